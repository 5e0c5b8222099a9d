//! Sparse and Carleson families, sparse operators, the non-tangential pair
//! functional and the stopping-time construction of sparse families.

use crate::dyadic::CubeSystem;
use crate::error::{invalid, Error, Result};
use crate::function::GridFunction;
use crate::operators::{Family, Kernel, Profile};
use crate::stats::quantile;
use crate::variation::{
    jump_count, window_jumps_real, window_variations_complex, window_variations_real, Sample,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

fn check_family(system: &CubeSystem, family: &[usize]) -> Result<()> {
    if let Some(&q) = family.iter().find(|&&q| q >= system.len()) {
        return Err(Error::UnknownCube(q));
    }
    Ok(())
}

fn membership(system: &CubeSystem, family: &[usize]) -> Vec<bool> {
    let mut m = vec![false; system.len()];
    for &q in family {
        m[q] = true;
    }
    m
}

/// Cube ids ordered from the finest scale up.
fn finest_first(system: &CubeSystem) -> Vec<usize> {
    system.scales().flat_map(|k| system.cubes_at(k).iter().copied()).collect()
}

/// `max over Q` of `sum over Q' in S, Q' ⊆ Q` of `mu(Q') / mu(Q)`, taken over
/// every cube of the system in one bottom-up pass. Repeated ids count once.
pub fn carleson_constant(system: &CubeSystem, family: &[usize]) -> Result<f64> {
    check_family(system, family)?;
    let member = membership(system, family);
    let mut stacked = vec![0.0f64; system.len()];
    let mut lambda = 0.0f64;
    for q in finest_first(system) {
        let c = &system.cubes()[q];
        let mut s: f64 = c.children.iter().map(|&ch| stacked[ch]).sum();
        if member[q] {
            s += c.measure;
        }
        stacked[q] = s;
        lambda = lambda.max(s / c.measure);
    }
    Ok(lambda)
}

/// Disjoint sets `E(Q) ⊆ Q`, or the first cube that could not reach its share.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Witness {
    Success {
        /// `(cube, E(Q))` in the order the sets were claimed.
        sets: Vec<(usize, Vec<usize>)>,
    },
    Failure {
        cube: usize,
        /// Unclaimed share of `mu(Q)` left when `Q` was reached.
        available: f64,
    },
}

impl Witness {
    pub fn is_success(&self) -> bool {
        matches!(self, Witness::Success { .. })
    }
}

/// Builds witness sets from the finest cubes upward. Each cube claims its
/// unclaimed points in increasing id order until it holds `eta_s mu(Q)`.
pub fn sparse_witness(system: &CubeSystem, family: &[usize], eta_s: f64) -> Result<Witness> {
    check_family(system, family)?;
    if !(eta_s > 0.0 && eta_s <= 1.0) {
        return invalid("eta_s must lie in (0, 1]");
    }
    let space = system.space();
    let member = membership(system, family);
    let mut claimed = vec![false; space.len()];
    let mut sets = Vec::new();
    let tol = 1e-12;
    for q in finest_first(system) {
        if !member[q] {
            continue;
        }
        let c = &system.cubes()[q];
        let need = eta_s * c.measure;
        let free: f64 = c.members.iter().filter(|&&m| !claimed[m]).map(|&m| space.weight(m)).sum();
        if free < need * (1.0 - tol) {
            return Ok(Witness::Failure {
                cube: q,
                available: free / c.measure,
            });
        }
        let mut got = 0.0;
        let mut set = Vec::new();
        for &m in &c.members {
            if got >= need * (1.0 - tol) {
                break;
            }
            if !claimed[m] {
                claimed[m] = true;
                got += space.weight(m);
                set.push(m);
            }
        }
        sets.push((q, set));
    }
    Ok(Witness::Success { sets })
}

/// Radius of the dilated cube `CQ = B(c_Q, dilate C1 kappa^k(Q))`.
pub fn dilated_radius(system: &CubeSystem, q: usize, dilate: f64) -> f64 {
    let c1 = if system.c1() > 0.0 { system.c1() } else { 1.0 };
    dilate * c1 * system.kappa().powi(system.cubes()[q].scale)
}

/// `<|f|>` over the dilated cube `CQ`.
pub fn dilated_average(system: &CubeSystem, f: &GridFunction, q: usize, dilate: f64) -> f64 {
    let space = system.space();
    let c = system.cubes()[q].center;
    let r = dilated_radius(system, q, dilate);
    let mut s = 0.0;
    let mut m = 0.0;
    for y in 0..space.len() {
        if space.dist(c, y) <= r {
            s += f.get(y).norm() * space.weight(y);
            m += space.weight(y);
        }
    }
    s / m
}

/// `(sum over Q in S of 1_Q <|f|>_CQ^exponent)^(1/exponent)`.
pub fn sparse_operator(
    system: &CubeSystem,
    family: &[usize],
    f: &GridFunction,
    exponent: f64,
    dilate: f64,
) -> Result<Vec<f64>> {
    check_family(system, family)?;
    f.check_space(system.space())?;
    if exponent < 1.0 || exponent.is_nan() {
        return Err(Error::ExponentBelowOne(exponent));
    }
    if !(dilate >= 1.0) {
        return invalid("dilation must be at least 1");
    }
    let mut acc = vec![0.0f64; system.space().len()];
    let mut seen = vec![false; system.len()];
    for &q in family {
        if std::mem::replace(&mut seen[q], true) {
            continue;
        }
        let a = dilated_average(system, f, q, dilate).powf(exponent);
        for &m in &system.cubes()[q].members {
            acc[m] += a;
        }
    }
    if exponent != 1.0 {
        acc.iter_mut().for_each(|v| *v = v.powf(1.0 / exponent));
    }
    Ok(acc)
}

/// A nonnegative function `F(Q', Q)` on nested pairs `Q' ⊆ Q`.
pub trait PairFunctional {
    fn name(&self) -> String;

    /// Declared subadditivity exponent.
    fn exponent(&self) -> f64 {
        1.0
    }

    fn eval(&self, system: &CubeSystem, inner: usize, outer: usize) -> f64;
}

/// `F ≡ 0`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroFunctional;

impl PairFunctional for ZeroFunctional {
    fn name(&self) -> String {
        "zero".into()
    }

    fn eval(&self, _system: &CubeSystem, _inner: usize, _outer: usize) -> f64 {
        0.0
    }
}

/// Which window quantity a [`WindowFunctional`] measures.
#[derive(Clone, Copy)]
pub enum WindowKind<'a> {
    /// Homogeneous r-variation of `A_t f`.
    VarAv { r: f64 },
    /// Homogeneous r-variation of `T_t f`.
    VarTsi { r: f64, kernel: &'a dyn Kernel },
    /// `lambda sqrt(N_lambda)` of `A_t f`.
    JumpAv { lambda: f64 },
}

impl WindowKind<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            WindowKind::VarAv { .. } => "var-av",
            WindowKind::VarTsi { .. } => "var-tsi",
            WindowKind::JumpAv { .. } => "jump-av",
        }
    }
}

/// `F(Q', Q) = max over x' in Q'` of the window quantity of the family
/// `t -> A_t f(x')` or `T_t f(x')` over `kappa^k(Q') <= t <= kappa^k(Q)`.
///
/// Window values are tabulated per point and scale pair, then maximized per
/// cube, so evaluation is a lookup.
pub struct WindowFunctional {
    name: String,
    k_min: i32,
    scales: usize,
    /// `point[x][i * scales + j]` for the window from scale `i` to scale `j`.
    point: Vec<Vec<f64>>,
    /// `cube[q][j]`: max over members of the window from `k(q)` to scale `j`.
    cube: Vec<Vec<f64>>,
}

impl WindowFunctional {
    pub fn new(system: &CubeSystem, f: &GridFunction, kind: WindowKind<'_>) -> Result<Self> {
        let space = system.space();
        f.check_space(space)?;
        let family = match kind {
            WindowKind::VarAv { r } | WindowKind::VarTsi { r, .. } if r < 1.0 || r.is_nan() => {
                return Err(Error::ExponentBelowOne(r));
            }
            WindowKind::JumpAv { lambda } if !(lambda > 0.0) => {
                return invalid("lambda must be positive");
            }
            WindowKind::VarTsi { kernel, .. } => Family::Singular(kernel),
            _ => Family::Averages,
        };
        let ks: Vec<i32> = system.scales().collect();
        let s = ks.len();
        let radii: Vec<f64> = ks.iter().map(|&k| system.kappa().powi(k)).collect();
        let mut point = Vec::with_capacity(space.len());
        for x in 0..space.len() {
            let p = Profile::new(space, f, x, family)?;
            let idx: Vec<usize> = radii.iter().map(|&t| p.index_at(t)).collect();
            let mut row = vec![0.0f64; s * s];
            let real = p.is_real();
            let re: Vec<f64> = if real { p.values.iter().map(|v| v.re).collect() } else { Vec::new() };
            for j in 0..s {
                let end = idx[j];
                let starts = &idx[..=j];
                let vals: Vec<f64> = match kind {
                    WindowKind::VarAv { r } | WindowKind::VarTsi { r, .. } => {
                        if real {
                            window_variations_real(&re, end, starts, r)
                        } else {
                            window_variations_complex(&p.values, end, starts, r)
                        }
                    }
                    WindowKind::JumpAv { lambda } => {
                        let counts: Vec<usize> = if real {
                            window_jumps_real(&re, end, starts, lambda)
                        } else {
                            starts
                                .iter()
                                .map(|&st| {
                                    let seg = p.values[st.min(end)..=end].to_vec();
                                    jump_count(&Sample::from_complex(seg)?, lambda)
                                })
                                .collect::<Result<_>>()?
                        };
                        counts.iter().map(|&c| lambda * (c as f64).sqrt()).collect()
                    }
                };
                for (i, v) in vals.into_iter().enumerate() {
                    row[i * s + j] = v;
                }
            }
            point.push(row);
        }
        let k_min = system.k_min();
        let cube = system
            .cubes()
            .iter()
            .map(|q| {
                let i = (q.scale - k_min) as usize;
                (0..s)
                    .map(|j| {
                        if j < i {
                            0.0
                        } else {
                            q.members.iter().map(|&m| point[m][i * s + j]).fold(0.0, f64::max)
                        }
                    })
                    .collect()
            })
            .collect();
        Ok(WindowFunctional {
            name: kind.label().to_string(),
            k_min,
            scales: s,
            point,
            cube,
        })
    }

    /// Window quantity at `x` from scale `k1` to `k2`.
    pub fn at_point(&self, x: usize, k1: i32, k2: i32) -> f64 {
        let i = (k1 - self.k_min) as usize;
        let j = (k2 - self.k_min) as usize;
        self.point[x][i * self.scales + j]
    }

    /// Window quantity at each point over the whole scale range.
    pub fn pointwise(&self) -> Vec<f64> {
        let last = self.scales - 1;
        self.point.iter().map(|row| row[last]).collect()
    }
}

impl PairFunctional for WindowFunctional {
    fn name(&self) -> String {
        self.name.clone()
    }

    fn eval(&self, system: &CubeSystem, inner: usize, outer: usize) -> f64 {
        let k = system.cubes()[outer].scale;
        self.cube[inner][(k - self.k_min) as usize]
    }
}

/// Scope of the non-tangential supremum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scope {
    /// `N_Q F(x) = sup over x in Q' ⊆ Q` of `F(Q', Q)`.
    Cube(usize),
    /// `N F(x)`: sup over all nested pairs with `x in Q'`.
    Global,
}

/// Pointwise non-tangential supremum; the empty supremum is 0.
pub fn nontangential_n(system: &CubeSystem, f: &dyn PairFunctional, scope: Scope) -> Result<Vec<f64>> {
    let n = system.space().len();
    let ks: Vec<i32> = system.scales().collect();
    let mut out = vec![0.0f64; n];
    match scope {
        Scope::Cube(q) => {
            if q >= system.len() {
                return Err(Error::UnknownCube(q));
            }
            let top = system.cubes()[q].scale;
            for &x in &system.cubes()[q].members {
                let mut best = 0.0f64;
                for &k in ks.iter().filter(|&&k| k <= top) {
                    best = best.max(f.eval(system, system.cube_of(x, k), q));
                }
                out[x] = best;
            }
        }
        Scope::Global => {
            for (x, o) in out.iter_mut().enumerate() {
                let chain: Vec<usize> = ks.iter().map(|&k| system.cube_of(x, k)).collect();
                let mut best = 0.0f64;
                for i in 0..chain.len() {
                    for j in i..chain.len() {
                        if system.is_subcube(chain[i], chain[j]) {
                            best = best.max(f.eval(system, chain[i], chain[j]));
                        }
                    }
                }
                *o = best;
            }
        }
    }
    Ok(out)
}

/// Violations of monotonicity and subadditivity found on random chains.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub chains: usize,
    /// `F(Q'', Q') > F(Q''', Q)` for `Q''' ⊆ Q'' ⊆ Q' ⊆ Q`.
    pub monotone_violations: usize,
    /// `F(Q'', Q)^r > F(Q'', Q')^r + F(Q', Q)^r`.
    pub subadditive_violations: usize,
    pub worst_subadditive_ratio: f64,
}

/// Spot-checks the hypotheses of the stopping-time construction on
/// ancestor chains of random points.
pub fn check_pair_functional(system: &CubeSystem, f: &dyn PairFunctional, chains: usize, seed: u64) -> PairCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ks: Vec<i32> = system.scales().collect();
    let r = f.exponent();
    let mut mono = 0;
    let mut sub = 0;
    let mut worst = 0.0f64;
    let n = system.space().len();
    for _ in 0..chains {
        let x = rng.gen_range(0..n);
        let mut pick: Vec<i32> = (0..4).map(|_| ks[rng.gen_range(0..ks.len())]).collect();
        pick.sort_unstable();
        let q: Vec<usize> = pick.iter().map(|&k| system.cube_of(x, k)).collect();
        let tol = 1e-12;
        if f.eval(system, q[1], q[2]) > f.eval(system, q[0], q[3]) * (1.0 + tol) + tol {
            mono += 1;
        }
        let lhs = f.eval(system, q[0], q[2]).powf(r);
        let rhs = f.eval(system, q[0], q[1]).powf(r) + f.eval(system, q[1], q[2]).powf(r);
        if lhs > rhs * (1.0 + tol) + tol {
            sub += 1;
        }
        if rhs > 0.0 {
            worst = worst.max(lhs / rhs);
        }
    }
    PairCheck {
        chains,
        monotone_violations: mono,
        subadditive_violations: sub,
        worst_subadditive_ratio: worst,
    }
}

/// Thresholds of the stopping-time construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdPolicy {
    /// Starting multiple for the dilated-average condition.
    pub a: f64,
    /// Weak (1,1) constant `C_w`; the functional condition starts at `4 C_w`.
    pub c_w: f64,
    /// Dilation `C` in `CQ = B(c_Q, C C1 kappa^k)`.
    pub dilate: f64,
    pub max_doublings: u32,
}

impl Default for ThresholdPolicy {
    fn default() -> Self {
        ThresholdPolicy {
            a: 4.0,
            c_w: 1.0,
            dilate: 4.0,
            max_doublings: 64,
        }
    }
}

/// One selected cube with the thresholds that produced its children.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub cube: usize,
    pub average: f64,
    pub a: f64,
    pub b: f64,
    pub doublings: u32,
    pub children: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseFamily {
    pub label: String,
    pub functional: String,
    pub k0: i32,
    pub eta_target: f64,
    pub cubes: Vec<usize>,
    pub carleson: f64,
    pub witness: Witness,
    pub selections: Vec<Selection>,
    pub policy: ThresholdPolicy,
}

impl SparseFamily {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Maximal strict subcubes of `q` flagged by `stop`.
fn maximal_stopping(system: &CubeSystem, q: usize, mut stop: impl FnMut(usize) -> bool) -> Vec<usize> {
    let mut out = Vec::new();
    let mut stack: Vec<usize> = system.cubes()[q].children.iter().rev().copied().collect();
    while let Some(c) = stack.pop() {
        if stop(c) {
            out.push(c);
        } else {
            stack.extend(system.cubes()[c].children.iter().rev());
        }
    }
    out.sort_unstable();
    out
}

/// Stopping-time construction from the scale-`k0` cubes. Children of a
/// selected `Q` are the maximal strict subcubes `Q'` with
/// `<|f|>_CQ' > A <|f|>_CQ` or `F(Q', Q) > B <|f|>_CQ`; `(A, B)` double until
/// the children cover at most half of `Q`.
pub fn build_sparse_family(
    system: &CubeSystem,
    functional: &dyn PairFunctional,
    f: &GridFunction,
    k0: i32,
    policy: &ThresholdPolicy,
) -> Result<SparseFamily> {
    f.check_space(system.space())?;
    system.check_scale(k0)?;
    if !(policy.a > 0.0 && policy.c_w > 0.0) {
        return invalid("thresholds must be positive");
    }
    if !(policy.dilate >= 1.0) {
        return invalid("dilation must be at least 1");
    }
    let averages: Vec<f64> = (0..system.len())
        .map(|q| dilated_average(system, f, q, policy.dilate))
        .collect();
    let mut queue: Vec<usize> = system.cubes_at(k0).to_vec();
    let mut selections = Vec::new();
    let mut cubes = Vec::new();
    while let Some(q) = queue.pop() {
        cubes.push(q);
        let avg = averages[q];
        let mu = system.cubes()[q].measure;
        let mut a = policy.a;
        let mut b = 4.0 * policy.c_w;
        let mut doublings = 0;
        let children = loop {
            let ch = if avg > 0.0 {
                maximal_stopping(system, q, |c| {
                    averages[c] > a * avg || functional.eval(system, c, q) > b * avg
                })
            } else {
                Vec::new()
            };
            let covered: f64 = ch.iter().map(|&c| system.cubes()[c].measure).sum();
            if covered <= 0.5 * mu * (1.0 + 1e-12) {
                break ch;
            }
            if doublings == policy.max_doublings {
                return Err(Error::Degenerate(format!(
                    "stopping children of cube {q} still cover more than half after {doublings} doublings"
                )));
            }
            a *= 2.0;
            b *= 2.0;
            doublings += 1;
        };
        queue.extend(children.iter().rev());
        selections.push(Selection {
            cube: q,
            average: avg,
            a,
            b,
            doublings,
            children,
        });
    }
    cubes.sort_unstable();
    let carleson = carleson_constant(system, &cubes)?;
    let witness = sparse_witness(system, &cubes, 0.5)?;
    Ok(SparseFamily {
        label: system.label().to_string(),
        functional: functional.name(),
        k0,
        eta_target: 0.5,
        cubes,
        carleson,
        witness,
        selections,
        policy: *policy,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationReport {
    pub ratios: Vec<f64>,
    /// Largest ratio; infinite when there are violations.
    pub max_ratio: f64,
    pub argmax: Option<usize>,
    pub median: f64,
    pub p90: f64,
    pub p99: f64,
    /// Points with `A_S f = 0 < lhs`.
    pub violations: Vec<usize>,
}

/// Pointwise ratio `lhs / A_S f` with `0 / 0 = 0`.
pub fn verify_domination(
    system: &CubeSystem,
    lhs: &[f64],
    family: &[usize],
    f: &GridFunction,
    exponent: f64,
    dilate: f64,
) -> Result<DominationReport> {
    if lhs.len() != system.space().len() {
        return invalid("lhs length differs from the number of points");
    }
    let rhs = sparse_operator(system, family, f, exponent, dilate)?;
    Ok(domination_from(lhs, &rhs))
}

/// [`verify_domination`] with a precomputed right-hand side.
pub fn domination_from(lhs: &[f64], rhs: &[f64]) -> DominationReport {
    let mut ratios = Vec::with_capacity(lhs.len());
    let mut violations = Vec::new();
    let mut max_ratio = 0.0f64;
    let mut argmax = None;
    for (x, (&l, &r)) in lhs.iter().zip(rhs).enumerate() {
        let q = if l <= 0.0 {
            0.0
        } else if r <= 0.0 {
            violations.push(x);
            0.0
        } else {
            l / r
        };
        if q > max_ratio {
            max_ratio = q;
            argmax = Some(x);
        }
        ratios.push(q);
    }
    if !violations.is_empty() {
        max_ratio = f64::INFINITY;
        argmax = Some(violations[0]);
    }
    DominationReport {
        median: quantile(&ratios, 0.5),
        p90: quantile(&ratios, 0.9),
        p99: quantile(&ratios, 0.99),
        ratios,
        max_ratio,
        argmax,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::build_shifted_grid;
    use crate::space::build_euclidean_grid;
    use std::sync::Arc;

    fn system(n: usize, top: i32) -> CubeSystem {
        let s = Arc::new(build_euclidean_grid(1, n, 1.0).unwrap());
        build_shifted_grid(s, &[0], (0, top)).unwrap()
    }

    #[test]
    fn carleson_examples() {
        let sys = system(64, 6);
        let disjoint: Vec<usize> = sys.cubes_at(2).to_vec();
        assert_eq!(carleson_constant(&sys, &disjoint).unwrap(), 1.0);
        assert_eq!(carleson_constant(&sys, &[]).unwrap(), 0.0);
        assert!(carleson_constant(&sys, &[sys.len()]).is_err());
    }

    #[test]
    fn witness_on_disjoint_family() {
        let sys = system(64, 6);
        let fam: Vec<usize> = sys.cubes_at(3).to_vec();
        match sparse_witness(&sys, &fam, 1.0).unwrap() {
            Witness::Success { sets } => {
                for (q, e) in sets {
                    assert_eq!(e, sys.cubes()[q].members);
                }
            }
            w => panic!("{w:?}"),
        }
    }

    #[test]
    fn constant_function_operator() {
        let sys = system(64, 6);
        let f = GridFunction::constant(64, 3.0);
        let fam: Vec<usize> = sys.cubes_at(4).iter().chain(sys.cubes_at(2)).copied().collect();
        let a = sparse_operator(&sys, &fam, &f, 2.0, 1.0).unwrap();
        for x in 0..64 {
            let count = fam.iter().filter(|&&q| sys.contains(q, x)).count() as f64;
            assert!((a[x] - 3.0 * count.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_function_builds_top_cubes_only() {
        let sys = system(64, 6);
        let f = GridFunction::constant(64, 1.0);
        let fam = build_sparse_family(&sys, &ZeroFunctional, &f, 5, &ThresholdPolicy::default()).unwrap();
        assert_eq!(fam.cubes, {
            let mut v = sys.cubes_at(5).to_vec();
            v.sort_unstable();
            v
        });
        assert!(fam.witness.is_success());
    }

    #[test]
    fn nontangential_scope() {
        let sys = system(64, 6);
        let f = GridFunction::from_fn(sys.space(), |c| (c[0] * 0.3).sin());
        let w = WindowFunctional::new(&sys, &f, WindowKind::VarAv { r: 2.0 }).unwrap();
        let q = sys.cubes_at(3)[0];
        let n = nontangential_n(&sys, &w, Scope::Cube(q)).unwrap();
        for x in 0..64 {
            if !sys.contains(q, x) {
                assert_eq!(n[x], 0.0);
            }
        }
        assert!(nontangential_n(&sys, &ZeroFunctional, Scope::Global).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn domination_trivia() {
        let rep = domination_from(&[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(rep.max_ratio, 0.0);
        let rep = domination_from(&[2.0, 1.0], &[2.0, 1.0]);
        assert_eq!(rep.max_ratio, 1.0);
        let rep = domination_from(&[1.0], &[0.0]);
        assert_eq!(rep.violations, vec![0]);
    }
}
