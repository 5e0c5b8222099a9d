//! Conditional expectations along a cube system, martingale differences, the
//! dyadic maximal function, greedy stopping scales and the Calderón–Zygmund
//! decomposition.

use crate::dyadic::CubeSystem;
use crate::error::{invalid, Error, Result};
use crate::function::GridFunction;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Averages `<f>_Q` and `<|f|>_Q` of one function over every cube.
#[derive(Clone, Debug)]
pub struct CubeAverages {
    pub mean: Vec<Complex64>,
    pub mean_abs: Vec<f64>,
}

impl CubeAverages {
    pub fn new(system: &CubeSystem, f: &GridFunction) -> Result<Self> {
        f.check_space(system.space())?;
        let space = system.space();
        let mut mean = Vec::with_capacity(system.len());
        let mut mean_abs = Vec::with_capacity(system.len());
        for q in system.cubes() {
            let mut s = Complex64::new(0.0, 0.0);
            let mut a = 0.0;
            for &m in &q.members {
                let w = space.weight(m);
                s += f.get(m) * w;
                a += f.get(m).norm() * w;
            }
            mean.push(s / q.measure);
            mean_abs.push(a / q.measure);
        }
        Ok(CubeAverages { mean, mean_abs })
    }

    /// `E_k f(x)`.
    pub fn at(&self, system: &CubeSystem, x: usize, k: i32) -> Complex64 {
        self.mean[system.cube_of(x, k)]
    }
}

/// `E_k f`: the average of `f` over the scale-`k` cube of each point.
pub fn expectation(system: &CubeSystem, f: &GridFunction, k: i32) -> Result<GridFunction> {
    system.check_scale(k)?;
    f.check_space(system.space())?;
    let space = system.space();
    let mut out = GridFunction::zeros(space.len());
    for &id in system.cubes_at(k) {
        let q = &system.cubes()[id];
        let mut s = Complex64::new(0.0, 0.0);
        for &m in &q.members {
            s += f.get(m) * space.weight(m);
        }
        let avg = s / q.measure;
        for &m in &q.members {
            out.set(m, avg);
        }
    }
    Ok(out)
}

/// `D_k f = E_k f - E_{k+1} f`.
pub fn difference(system: &CubeSystem, f: &GridFunction, k: i32) -> Result<GridFunction> {
    system.check_scale(k)?;
    system.check_scale(k + 1)?;
    Ok(expectation(system, f, k)?.sub(&expectation(system, f, k + 1)?))
}

/// `M_D f(x) = max_{Q ∋ x} <|f|>_Q` over all cubes of the system.
pub fn dyadic_maximal(system: &CubeSystem, f: &GridFunction) -> Result<Vec<f64>> {
    let avg = CubeAverages::new(system, f)?;
    Ok(maximal_from_averages(system, &avg.mean_abs))
}

pub(crate) fn maximal_from_averages(system: &CubeSystem, mean_abs: &[f64]) -> Vec<f64> {
    let n = system.space().len();
    let mut out = vec![0.0f64; n];
    for k in system.scales() {
        let a = system.assignment(k);
        for x in 0..n {
            out[x] = out[x].max(mean_abs[a[x]]);
        }
    }
    out
}

/// `mu{ v > lambda }`.
pub fn level_set_measure(system: &CubeSystem, values: &[f64], lambda: f64) -> f64 {
    values
        .iter()
        .zip(system.space().weights())
        .filter(|(v, _)| **v > lambda)
        .map(|(_, w)| w)
        .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StoppingSequence {
    pub point: usize,
    pub lambda: f64,
    /// `l_0 > l_1 > ...`, starting at the requested top scale.
    pub scales: Vec<i32>,
}

fn stopping_scales(system: &CubeSystem, avg: &CubeAverages, x: usize, lambda: f64, k_top: i32) -> Vec<i32> {
    let mut scales = vec![k_top];
    let mut cur = k_top;
    loop {
        let base = avg.at(system, x, cur);
        let next = ((system.k_min())..cur)
            .rev()
            .find(|&l| (avg.at(system, x, l) - base).norm() > lambda / 8.0);
        match next {
            Some(l) => {
                scales.push(l);
                cur = l;
            }
            None => break,
        }
    }
    scales
}

/// Greedy stopping scales with jump size `lambda / 8`: from `l_j`, the next
/// scale is the largest `l < l_j` with `|E_l f(x) - E_{l_j} f(x)| > lambda/8`.
pub fn greedy_stopping(
    system: &CubeSystem,
    f: &GridFunction,
    x: usize,
    lambda: f64,
    k_max: i32,
) -> Result<StoppingSequence> {
    system.check_scale(k_max)?;
    if !(lambda > 0.0) {
        return invalid("lambda must be positive");
    }
    if x >= system.space().len() {
        return Err(Error::PointOutsideCube { point: x });
    }
    let avg = CubeAverages::new(system, f)?;
    Ok(StoppingSequence {
        point: x,
        lambda,
        scales: stopping_scales(system, &avg, x, lambda, k_max),
    })
}

/// Square sum of the stopped increments of `(E_{k0} - E_{k1}) f` at `x`,
/// with `k0 = k(Q')`, `k1 = k(Q)` and the stopping scales of `f` at `x`
/// started from the top scale of the system.
///
/// Since `E_t E_k = E_{max(t,k)}`, the stopped function at scale `t` is
/// `E_{clamp(t, k0, k1)} f - E_{k1} f`; the last stopping scale is followed
/// by the limit `t -> -inf`, which clamps to `k0`.
pub fn martingale_jump_majorant(
    system: &CubeSystem,
    f: &GridFunction,
    x: usize,
    lambda: f64,
    q_prime: usize,
    q: usize,
) -> Result<f64> {
    let avg = CubeAverages::new(system, f)?;
    let stops = stopping_scales(system, &avg, x, lambda, system.k_max());
    majorant_from_stops(system, &avg, x, &stops, q_prime, q)
}

pub(crate) fn majorant_from_stops(
    system: &CubeSystem,
    avg: &CubeAverages,
    x: usize,
    stops: &[i32],
    q_prime: usize,
    q: usize,
) -> Result<f64> {
    system.cube(q_prime)?;
    system.cube(q)?;
    if !system.contains(q_prime, x) {
        return Err(Error::PointOutsideCube { point: x });
    }
    if !system.is_subcube(q_prime, q) {
        return invalid("Q' must be a subcube of Q");
    }
    let k0 = system.cubes()[q_prime].scale;
    let k1 = system.cubes()[q].scale;
    Ok(majorant_window(system, avg, x, stops, k0, k1))
}

pub(crate) fn majorant_window(
    system: &CubeSystem,
    avg: &CubeAverages,
    x: usize,
    stops: &[i32],
    k0: i32,
    k1: i32,
) -> f64 {
    if k0 >= k1 {
        return 0.0;
    }
    let e = |t: i32| avg.at(system, x, t.clamp(k0, k1));
    let mut sum = 0.0;
    for w in stops.windows(2) {
        sum += (e(w[1]) - e(w[0])).norm_sqr();
    }
    if let Some(&last) = stops.last() {
        sum += (e(k0) - e(last)).norm_sqr();
    }
    sum.sqrt()
}

/// One bad function `b^Q = (f - <f>_Q) 1_Q`, stored on the members of `Q`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BadPart {
    pub cube: usize,
    pub values: Vec<(usize, Complex64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CzDecomposition {
    pub lambda: f64,
    pub good: GridFunction,
    pub bad: Vec<BadPart>,
}

impl CzDecomposition {
    /// `g + sum_Q b^Q`.
    pub fn reconstruct(&self) -> GridFunction {
        let mut out = self.good.clone();
        for b in &self.bad {
            for &(x, v) in &b.values {
                out.set(x, out.get(x) + v);
            }
        }
        out
    }

    pub fn bad_measure(&self, system: &CubeSystem) -> f64 {
        self.bad.iter().map(|b| system.cubes()[b.cube].measure).sum()
    }

    /// `||g||_inf / lambda`, the measured constant of the good-part bound.
    pub fn good_bound_ratio(&self) -> f64 {
        self.good.norm_inf() / self.lambda
    }
}

/// Calderón–Zygmund decomposition at height `lambda`: bad cubes are the
/// maximal cubes with `<|f|>_Q > lambda`, searched from the top scale down.
pub fn cz_decompose(system: &CubeSystem, f: &GridFunction, lambda: f64) -> Result<CzDecomposition> {
    if !(lambda > 0.0) {
        return invalid("lambda must be positive");
    }
    let avg = CubeAverages::new(system, f)?;
    let mut stack: Vec<usize> = system.cubes_at(system.k_max()).iter().rev().copied().collect();
    let mut selected = Vec::new();
    while let Some(id) = stack.pop() {
        if avg.mean_abs[id] > lambda {
            selected.push(id);
        } else {
            stack.extend(system.cubes()[id].children.iter().rev());
        }
    }
    selected.sort_unstable();
    let mut good = f.clone();
    let mut bad = Vec::with_capacity(selected.len());
    for &id in &selected {
        let q = &system.cubes()[id];
        let m = avg.mean[id];
        let mut values = Vec::with_capacity(q.members.len());
        for &x in &q.members {
            values.push((x, f.get(x) - m));
            good.set(x, m);
        }
        bad.push(BadPart { cube: id, values });
    }
    Ok(CzDecomposition { lambda, good, bad })
}
