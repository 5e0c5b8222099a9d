//! r-variation and λ-jump counts of finite sequences.
//!
//! Both quantities are suprema over increasing subsequences. They are computed
//! exactly by dynamic programming over the last chosen index, which is
//! `O(n^2)`. Real sequences also have faster paths used by the experiments.

use crate::error::{Error, Result};
use num_complex::Complex64;

/// Longest sequence accepted by the quadratic routines.
pub const MAX_LEN: usize = 20_000;

/// Longest sequence accepted by the exhaustive oracle.
pub const ORACLE_MAX_LEN: usize = 20;

/// An ordered family `(a_t)` sampled at strictly increasing parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    params: Vec<f64>,
    values: Vec<Complex64>,
}

impl Sample {
    pub fn new(params: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if params.len() != values.len() {
            return Err(Error::InvalidArgument("parameter and value counts differ".into()));
        }
        if params.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidArgument("parameters must be strictly increasing".into()));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidArgument("sample values must be finite".into()));
        }
        Ok(Sample { params, values })
    }

    /// Real values at parameters `0, 1, 2, ...`.
    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(
            (0..values.len()).map(|i| i as f64).collect(),
            values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        )
    }

    pub fn from_complex(values: Vec<Complex64>) -> Result<Self> {
        Self::new((0..values.len()).map(|i| i as f64).collect(), values)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

fn check_r(r: f64) -> Result<()> {
    if r.is_nan() || r < 1.0 {
        return Err(Error::ExponentBelowOne(r));
    }
    Ok(())
}

/// `x^(1/r)`, with the correctly rounded square root at `r = 2`.
fn root(x: f64, r: f64) -> f64 {
    if r == 2.0 {
        x.sqrt()
    } else {
        x.powf(1.0 / r)
    }
}

fn check_len(n: usize, limit: usize) -> Result<()> {
    if n > limit {
        return Err(Error::TooLong { len: n, limit });
    }
    Ok(())
}

/// The homogeneous r-variation, or the inhomogeneous norm
/// `sup |a_t| + V^r` when `homogeneous` is false.
pub fn r_variation(sample: &Sample, r: f64, homogeneous: bool) -> Result<f64> {
    check_r(r)?;
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    check_len(sample.len(), MAX_LEN)?;
    let a = sample.values();
    let n = a.len();
    // best[i]: largest sum of r-th powers along a subsequence ending at i.
    let mut best = vec![0.0f64; n];
    for i in 1..n {
        let mut b = 0.0f64;
        for j in 0..i {
            let v = best[j] + (a[i] - a[j]).norm().powf(r);
            if v > b {
                b = v;
            }
        }
        best[i] = b;
    }
    let total = best.iter().cloned().fold(0.0, f64::max);
    let v = root(total, r);
    Ok(if homogeneous { v } else { v + sample.sup_abs() })
}

/// The λ-jump count: the longest chain `t_0 < ... < t_J` whose consecutive
/// increments all exceed `λ` strictly.
pub fn jump_count(sample: &Sample, lambda: f64) -> Result<usize> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    check_len(sample.len(), MAX_LEN)?;
    if sample.values().iter().all(|v| v.im == 0.0) {
        let re: Vec<f64> = sample.values().iter().map(|v| v.re).collect();
        return Ok(jump_count_real(&re, lambda));
    }
    let a = sample.values();
    let n = a.len();
    let mut chain = vec![0usize; n];
    let mut best = 0;
    for i in 0..n {
        let mut c = 0;
        for j in 0..i {
            if (a[i] - a[j]).norm() > lambda && chain[j] + 1 > c {
                c = chain[j] + 1;
            }
        }
        chain[i] = c;
        best = best.max(c);
    }
    Ok(best)
}

/// Exhaustive enumeration of all increasing subsequences. Returns the
/// variation (homogeneous or not) and the jump count.
pub fn oracle_variation_jump(sample: &Sample, r: f64, lambda: f64, homogeneous: bool) -> Result<(f64, usize)> {
    check_r(r)?;
    if !(lambda > 0.0) {
        return Err(Error::InvalidArgument("lambda must be positive".into()));
    }
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    check_len(sample.len(), ORACLE_MAX_LEN)?;
    let a = sample.values();
    let n = a.len();
    let mut best_sum = 0.0f64;
    let mut best_jumps = 0usize;
    for mask in 1u32..(1u32 << n) {
        let mut prev: Option<usize> = None;
        let mut sum = 0.0f64;
        let mut all_jump = true;
        let mut steps = 0;
        for i in 0..n {
            if mask & (1 << i) == 0 {
                continue;
            }
            if let Some(p) = prev {
                let d = (a[i] - a[p]).norm();
                sum += d.powf(r);
                all_jump &= d > lambda;
                steps += 1;
            }
            prev = Some(i);
        }
        best_sum = best_sum.max(sum);
        if all_jump {
            best_jumps = best_jumps.max(steps);
        }
    }
    let v = root(best_sum, r);
    Ok((if homogeneous { v } else { v + sample.sup_abs() }, best_jumps))
}

/// Drops repeated values and interior points of monotone runs. For `r >= 1`
/// the r-variation of a real sequence is attained on its turning points.
pub fn turning_points(values: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::with_capacity(values.len());
    for &v in values {
        if out.last() == Some(&v) {
            continue;
        }
        if out.len() >= 2 {
            let a = out[out.len() - 2];
            let b = out[out.len() - 1];
            if (b - a) * (v - b) > 0.0 {
                *out.last_mut().unwrap() = v;
                continue;
            }
        }
        out.push(v);
    }
    out
}

/// Homogeneous r-variation of a real sequence through its turning points.
/// Agrees with [`r_variation`] up to rounding.
pub fn hvar_real(values: &[f64], r: f64) -> f64 {
    let tp = turning_points(values);
    if r == 1.0 {
        return tp.windows(2).map(|w| (w[1] - w[0]).abs()).sum();
    }
    let n = tp.len();
    let mut best = vec![0.0f64; n];
    let mut total = 0.0f64;
    for i in 1..n {
        let mut b = 0.0f64;
        for j in 0..i {
            let v = best[j] + (tp[i] - tp[j]).abs().powf(r);
            if v > b {
                b = v;
            }
        }
        best[i] = b;
        total = total.max(b);
    }
    root(total, r)
}

/// Prefix-maximum Fenwick tree over `n` slots.
struct MaxFenwick {
    tree: Vec<usize>,
}

impl MaxFenwick {
    fn new(n: usize) -> Self {
        MaxFenwick { tree: vec![0; n + 1] }
    }

    fn update(&mut self, i: usize, v: usize) {
        let mut i = i + 1;
        while i < self.tree.len() {
            if self.tree[i] < v {
                self.tree[i] = v;
            }
            i += i & i.wrapping_neg();
        }
    }

    /// Maximum over slots `0..end`.
    fn prefix(&self, end: usize) -> usize {
        let mut i = end;
        let mut m = 0;
        while i > 0 {
            m = m.max(self.tree[i]);
            i -= i & i.wrapping_neg();
        }
        m
    }
}

/// Exact λ-jump count of a real sequence in `O(n log n)`.
///
/// Chains are stored with length + 1 so that 0 marks an empty slot.
pub fn jump_count_real(values: &[f64], lambda: f64) -> usize {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.dedup();
    let m = sorted.len();
    let mut below = MaxFenwick::new(m);
    let mut above = MaxFenwick::new(m);
    let mut best = 0;
    for &a in values {
        // Values v < a with a - v > λ form a prefix of `sorted`.
        let lo = sorted.partition_point(|&v| a - v > lambda);
        // Values v > a with v - a > λ form a suffix.
        let hi = sorted.partition_point(|&v| !(v - a > lambda));
        let mut c = 0;
        let p = below.prefix(lo);
        if p > 0 {
            c = c.max(p);
        }
        let q = above.prefix(m - hi);
        if q > 0 {
            c = c.max(q);
        }
        // c is the longest predecessor chain + 1, or 0 without predecessor.
        let chain = c;
        best = best.max(chain);
        let rank = sorted.partition_point(|&v| v < a);
        below.update(rank, chain + 1);
        above.update(m - 1 - rank, chain + 1);
    }
    best
}

/// `λ N_λ^{1/r}` for the given sequence, exact when the values are real.
pub fn jump_functional(values: &[f64], lambda: f64, r: f64) -> f64 {
    let n = jump_count_real(values, lambda);
    lambda * root(n as f64, r)
}

/// Indices of the turning points of `v[..=end]`; the last index is `end`.
fn turning_indices(v: &[f64], end: usize) -> Vec<usize> {
    let mut out: Vec<usize> = Vec::new();
    for i in 0..=end {
        let x = v[i];
        if let Some(&last) = out.last() {
            if v[last] == x {
                if i == end {
                    *out.last_mut().unwrap() = i;
                }
                continue;
            }
        }
        if out.len() >= 2 {
            let a = v[out[out.len() - 2]];
            let b = v[out[out.len() - 1]];
            if (b - a) * (x - b) > 0.0 {
                *out.last_mut().unwrap() = i;
                continue;
            }
        }
        out.push(i);
    }
    out
}

/// Homogeneous r-variation of every window `v[s..=end]`, `s` in `starts`.
pub fn window_variations_real(v: &[f64], end: usize, starts: &[usize], r: f64) -> Vec<f64> {
    let tp = turning_indices(v, end);
    let m = tp.len();
    // g[j]: best r-th power sum of a subsequence starting at tp[j].
    let mut g = vec![0.0f64; m];
    for j in (0..m).rev() {
        let a = v[tp[j]];
        let mut b = 0.0f64;
        for l in (j + 1)..m {
            let c = (v[tp[l]] - a).abs().powf(r) + g[l];
            if c > b {
                b = c;
            }
        }
        g[j] = b;
    }
    let mut suffix = g.clone();
    for j in (0..m.saturating_sub(1)).rev() {
        suffix[j] = suffix[j].max(suffix[j + 1]);
    }
    starts
        .iter()
        .map(|&s| {
            if s >= end {
                return 0.0;
            }
            let first = tp.partition_point(|&i| i < s);
            let mut best = if first < m { suffix[first] } else { 0.0 };
            let a = v[s];
            for l in first..m {
                if tp[l] > s {
                    best = best.max((v[tp[l]] - a).abs().powf(r) + g[l]);
                }
            }
            root(best, r)
        })
        .collect()
}

/// Complex counterpart of [`window_variations_real`], quadratic in `end`.
pub fn window_variations_complex(v: &[Complex64], end: usize, starts: &[usize], r: f64) -> Vec<f64> {
    let mut g = vec![0.0f64; end + 1];
    for j in (0..=end).rev() {
        let mut b = 0.0f64;
        for l in (j + 1)..=end {
            let c = (v[l] - v[j]).norm().powf(r) + g[l];
            if c > b {
                b = c;
            }
        }
        g[j] = b;
    }
    for j in (0..end).rev() {
        g[j] = g[j].max(g[j + 1]);
    }
    starts
        .iter()
        .map(|&s| if s > end { 0.0 } else { root(g[s], r) })
        .collect()
}

/// λ-jump counts of every window `v[s..=end]`, `s` in `starts`.
pub fn window_jumps_real(v: &[f64], end: usize, starts: &[usize], lambda: f64) -> Vec<usize> {
    let seg = &v[..=end];
    let mut sorted: Vec<f64> = seg.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    sorted.dedup();
    let m = sorted.len();
    let mut below = MaxFenwick::new(m);
    let mut above = MaxFenwick::new(m);
    // best[i]: longest chain starting at i or later.
    let mut best = vec![0usize; end + 2];
    for i in (0..=end).rev() {
        let a = seg[i];
        let lo = sorted.partition_point(|&x| a - x > lambda);
        let hi = sorted.partition_point(|&x| !(x - a > lambda));
        let chain = below.prefix(lo).max(above.prefix(m - hi));
        best[i] = best[i + 1].max(chain);
        let rank = sorted.partition_point(|&x| x < a);
        below.update(rank, chain + 1);
        above.update(m - 1 - rank, chain + 1);
    }
    starts.iter().map(|&s| if s > end { 0 } else { best[s] }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[f64]) -> Sample {
        Sample::from_real(v).unwrap()
    }

    #[test]
    fn constant_sequence_has_no_variation() {
        assert_eq!(r_variation(&s(&[2.0; 6]), 2.0, true).unwrap(), 0.0);
    }

    #[test]
    fn alternating_two_variation() {
        let v = r_variation(&s(&[0.0, 1.0, 0.0, 1.0]), 2.0, true).unwrap();
        assert_eq!(v, 3f64.sqrt());
        let (o, _) = oracle_variation_jump(&s(&[0.0, 1.0, 0.0, 1.0]), 2.0, 0.5, true).unwrap();
        assert_eq!(o, v);
    }

    #[test]
    fn monotone_one_variation() {
        let v = r_variation(&s(&[0.0, 0.5, 2.0, 3.5]), 1.0, true).unwrap();
        assert_eq!(v, 3.5);
        assert_eq!(hvar_real(&[0.0, 0.5, 2.0, 3.5], 1.0), 3.5);
    }

    #[test]
    fn inhomogeneous_adds_sup() {
        let v = r_variation(&s(&[-3.0, 1.0]), 1.0, false).unwrap();
        assert_eq!(v, 7.0);
    }

    #[test]
    fn rejects_small_exponent() {
        assert!(matches!(
            r_variation(&s(&[0.0, 1.0]), 0.5, true),
            Err(Error::ExponentBelowOne(_))
        ));
        assert!(r_variation(&s(&[]), 2.0, true).is_err());
    }

    #[test]
    fn jump_examples() {
        assert_eq!(jump_count(&s(&[0.0, 1.0, 0.0, 1.0, 0.0]), 0.9).unwrap(), 4);
        assert_eq!(jump_count(&s(&[0.0, 1.0]), 1.0).unwrap(), 0);
        assert_eq!(jump_count(&s(&[0.0, 0.3, -0.2]), 5.0).unwrap(), 0);
    }

    #[test]
    fn jump_count_beats_left_greedy() {
        let v = [0.7, 0.5, -0.467, 0.803, -1.0, 0.373, 0.5, 0.106];
        let (_, oracle) = oracle_variation_jump(&s(&v), 2.0, 0.3, true).unwrap();
        assert_eq!(oracle, 5);
        assert_eq!(jump_count(&s(&v), 0.3).unwrap(), 5);
    }

    #[test]
    fn complex_jump_count() {
        let a = vec![
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, 0.0),
        ];
        assert_eq!(jump_count(&Sample::from_complex(a).unwrap(), 0.5).unwrap(), 2);
    }

    #[test]
    fn oracle_limits() {
        let (v, n) = oracle_variation_jump(&s(&[3.0]), 2.0, 0.1, true).unwrap();
        assert_eq!((v, n), (0.0, 0));
        let (v, _) = oracle_variation_jump(&s(&[3.0]), 2.0, 0.1, false).unwrap();
        assert_eq!(v, 3.0);
        assert!(matches!(
            oracle_variation_jump(&s(&[0.0; 21]), 2.0, 0.1, true),
            Err(Error::TooLong { .. })
        ));
    }

    #[test]
    fn sample_validation() {
        assert!(Sample::new(vec![0.0, 0.0], vec![Complex64::new(0.0, 0.0); 2]).is_err());
        assert!(Sample::new(vec![0.0], vec![]).is_err());
    }

    #[test]
    fn window_routines_match_direct() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let n = rng.gen_range(2..40);
            let v: Vec<f64> = (0..n).map(|_| (rng.gen_range(-3..=3) as f64) * 0.5).collect();
            let end = rng.gen_range(0..n);
            let starts: Vec<usize> = (0..=end).collect();
            let cv: Vec<Complex64> = v.iter().map(|&x| Complex64::new(x, 0.0)).collect();
            for r in [1.0, 2.0, 3.0] {
                let fast = window_variations_real(&v, end, &starts, r);
                let slow = window_variations_complex(&cv, end, &starts, r);
                for &st in &starts {
                    let direct = r_variation(&s(&v[st..=end]), r, true).unwrap();
                    assert!((fast[st] - direct).abs() <= 1e-12 * (1.0 + direct), "{v:?} {st} {end}");
                    assert!((slow[st] - direct).abs() <= 1e-12 * (1.0 + direct));
                }
            }
            for lambda in [0.4, 1.0] {
                let w = window_jumps_real(&v, end, &starts, lambda);
                for &st in &starts {
                    assert_eq!(w[st], jump_count_real(&v[st..=end], lambda));
                }
            }
        }
    }

    #[test]
    fn turning_points_reduce() {
        assert_eq!(turning_points(&[0.0, 1.0, 2.0, 2.0, 1.0, 3.0]), vec![0.0, 2.0, 1.0, 3.0]);
        assert_eq!(turning_points(&[1.0, 1.0]), vec![1.0]);
    }

    #[test]
    fn real_paths_match_quadratic_dp() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let n = rng.gen_range(1..60);
            let v: Vec<f64> = (0..n).map(|_| (rng.gen_range(-4..=4) as f64) * 0.25).collect();
            for r in [1.0, 2.0, 3.5] {
                let a = r_variation(&s(&v), r, true).unwrap();
                let b = hvar_real(&v, r);
                assert!((a - b).abs() <= 1e-12 * (1.0 + a), "{v:?} {r} {a} {b}");
            }
            for lambda in [0.1, 0.25, 0.5, 1.0] {
                let mut chain = vec![0usize; n];
                for i in 0..n {
                    for j in 0..i {
                        if (v[i] - v[j]).abs() > lambda {
                            chain[i] = chain[i].max(chain[j] + 1);
                        }
                    }
                }
                let slow = chain.iter().cloned().max().unwrap_or(0);
                assert_eq!(jump_count_real(&v, lambda), slow, "{v:?} {lambda}");
            }
        }
    }
}
