//! Weights, dyadic Muckenhoupt characteristics and weak-type quasinorms.
//!
//! Characteristics are suprema over the cubes of a given system. The
//! `A_inf` characteristic uses the Fujii–Wilson form
//! `sup_Q w(Q)^-1 ∫_Q M_D(w 1_Q)`.

use crate::dyadic::CubeSystem;
use crate::error::{invalid, Error, Result};
use crate::function::GridFunction;
use crate::space::{heisenberg, Space, SpaceKind};
use serde::{Deserialize, Serialize};

/// A strictly positive weight, one value per point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weight {
    values: Vec<f64>,
}

impl Weight {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
            return invalid("weights must be positive and finite");
        }
        Ok(Weight { values })
    }

    pub fn constant(n: usize) -> Self {
        Weight { values: vec![1.0; n] }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `w^e` pointwise.
    pub fn pow(&self, e: f64) -> Weight {
        Weight {
            values: self.values.iter().map(|v| v.powf(e)).collect(),
        }
    }

    /// The dual weight `w^(1 - p')` with `p' = p / (p - 1)`.
    pub fn dual(&self, p: f64) -> Result<Weight> {
        check_p(p)?;
        Ok(self.pow(1.0 - conjugate(p)))
    }

    fn check_space(&self, space: &Space) -> Result<()> {
        if self.len() != space.len() {
            return invalid(format!(
                "weight has {} values but the space has {} points",
                self.len(),
                space.len()
            ));
        }
        Ok(())
    }
}

fn check_p(p: f64) -> Result<()> {
    if !(p > 1.0) || !p.is_finite() {
        return invalid(format!("exponent p = {p} must exceed 1"));
    }
    Ok(())
}

/// `p' = p / (p - 1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

fn hull_mid(space: &Space) -> [f64; 3] {
    let (lo, hi) = space.hull();
    [0.5 * (lo[0] + hi[0]), 0.5 * (lo[1] + hi[1]), 0.5 * (lo[2] + hi[2])]
}

/// Distance from a point to the middle of the hull.
fn distance_to_mid(space: &Space, x: usize) -> f64 {
    let m = hull_mid(space);
    let c = space.coords(x);
    match space.kind() {
        SpaceKind::Euclidean => (0..space.coordinate_dimension())
            .map(|a| (c[a] - m[a]).powi(2))
            .sum::<f64>()
            .sqrt(),
        SpaceKind::Heisenberg => heisenberg::distance(m, c),
    }
}

/// Weight registry:
/// * `const`: `w = 1`;
/// * `power:a`: `max(|x - mid|, spacing)^a`, `mid` the middle of the hull;
/// * `checkerboard:h`: `h` on alternate blocks of 8 lattice cells, else 1.
pub fn weight_by_name(space: &Space, name: &str) -> Result<Weight> {
    let (head, arg) = match name.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (name, None),
    };
    let num = |a: Option<&str>| -> Result<f64> {
        a.and_then(|s| s.parse::<f64>().ok())
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::UnknownName(name.to_string()))
    };
    let n = space.len();
    match head {
        "const" if arg.is_none() => Ok(Weight::constant(n)),
        "power" => {
            let a = num(arg)?;
            let h = space.min_spacing();
            Weight::new((0..n).map(|x| distance_to_mid(space, x).max(h).powf(a)).collect())
        }
        "checkerboard" => {
            let h = num(arg)?;
            let block = 8.0 * space.min_spacing();
            let (lo, _) = space.hull();
            let dims = match space.kind() {
                SpaceKind::Euclidean => space.coordinate_dimension(),
                SpaceKind::Heisenberg => 2,
            };
            Weight::new(
                (0..n)
                    .map(|x| {
                        let c = space.coords(x);
                        let parity: i64 = (0..dims)
                            .map(|a| ((c[a] - lo[a]) / block + 1e-9).floor() as i64)
                            .sum();
                        if parity.rem_euclid(2) == 0 { h } else { 1.0 }
                    })
                    .collect(),
            )
        }
        _ => Err(Error::UnknownName(name.to_string())),
    }
}

/// `<w>_Q` for every cube.
fn cube_averages(system: &CubeSystem, w: &Weight) -> Vec<f64> {
    let space = system.space();
    system
        .cubes()
        .iter()
        .map(|q| q.members.iter().map(|&m| w.values[m] * space.weight(m)).sum::<f64>() / q.measure)
        .collect()
}

/// `[w, sigma]_{A_p} = sup_Q <w>_Q <sigma>_Q^(p-1)`.
pub fn two_weight(system: &CubeSystem, w: &Weight, sigma: &Weight, p: f64) -> Result<f64> {
    check_p(p)?;
    w.check_space(system.space())?;
    sigma.check_space(system.space())?;
    let aw = cube_averages(system, w);
    let asg = cube_averages(system, sigma);
    Ok(aw
        .iter()
        .zip(&asg)
        .map(|(a, s)| a * s.powf(p - 1.0))
        .fold(0.0, f64::max))
}

/// `[w]_{A_p} = [w, w^(1-p')]_{A_p}`.
pub fn ap_characteristic(system: &CubeSystem, w: &Weight, p: f64) -> Result<f64> {
    two_weight(system, w, &w.dual(p)?, p)
}

/// `[w]_{A_inf} = sup_Q w(Q)^-1 ∫_Q M_D(w 1_Q)`, where the maximal function
/// runs over the subcubes of `Q`.
pub fn ainfty_characteristic(system: &CubeSystem, w: &Weight) -> Result<f64> {
    let space = system.space();
    w.check_space(space)?;
    let avg = cube_averages(system, w);
    let ks: Vec<i32> = system.scales().collect();
    // running[x][i]: largest average over the cubes containing x up to scale i.
    let running: Vec<Vec<f64>> = (0..space.len())
        .map(|x| {
            let mut m = 0.0f64;
            ks.iter()
                .map(|&k| {
                    m = m.max(avg[system.cube_of(x, k)]);
                    m
                })
                .collect()
        })
        .collect();
    let mut best = 0.0f64;
    for q in system.cubes() {
        let i = (q.scale - system.k_min()) as usize;
        let mut num = 0.0;
        let mut den = 0.0;
        for &m in &q.members {
            num += running[m][i] * space.weight(m);
            den += w.values[m] * space.weight(m);
        }
        best = best.max(num / den);
    }
    Ok(best)
}

/// `||f||_{L^p(w)}`.
pub fn weighted_norm(space: &Space, f: &GridFunction, w: &Weight, p: f64) -> Result<f64> {
    f.check_space(space)?;
    w.check_space(space)?;
    if !(p >= 1.0) {
        return Err(Error::ExponentBelowOne(p));
    }
    let s: f64 = (0..space.len())
        .map(|x| f.get(x).norm().powf(p) * w.values[x] * space.weight(x))
        .sum();
    Ok(s.powf(1.0 / p))
}

/// `sup_lambda lambda mu_w{|f| > lambda}^(1/p)`, exact by scanning the
/// distinct values of `|f|`. `w = None` uses the plain measure.
pub fn weak_lp_quasinorm(space: &Space, f: &GridFunction, p: f64, w: Option<&Weight>) -> Result<f64> {
    f.check_space(space)?;
    if let Some(w) = w {
        w.check_space(space)?;
    }
    if !(p > 0.0) || !p.is_finite() {
        return invalid("p must be positive");
    }
    let mut pts: Vec<(f64, f64)> = (0..space.len())
        .map(|x| {
            let m = space.weight(x) * w.map_or(1.0, |w| w.values[x]);
            (f.get(x).norm(), m)
        })
        .collect();
    pts.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = 0.0f64;
    let mut mass = 0.0;
    let mut i = 0;
    while i < pts.len() {
        let v = pts[i].0;
        if v <= 0.0 {
            break;
        }
        while i < pts.len() && pts[i].0 == v {
            mass += pts[i].1;
            i += 1;
        }
        // Levels just below v see every point with |f| >= v.
        best = best.max(v * f64::powf(mass, 1.0 / p));
    }
    Ok(best)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityReport {
    pub p: f64,
    /// `||sum g_j||_{p,inf}^p`.
    pub lhs: f64,
    /// `sum ||g_j||_{p,inf}^p`.
    pub rhs: f64,
    pub ratio: f64,
    /// `2^p (1 + 1/(1-p))`.
    pub bound: f64,
    pub holds: bool,
}

/// Both sides of `||sum g_j||_{p,inf}^p <= 2^p (1 + 1/(1-p)) sum ||g_j||_{p,inf}^p`
/// for `0 < p < 1`, using `|g_j|`.
pub fn check_weak_lp_subadditivity(space: &Space, gs: &[GridFunction], p: f64) -> Result<SubadditivityReport> {
    if !(p > 0.0 && p < 1.0) {
        return invalid("p must lie in (0, 1)");
    }
    if gs.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sum = GridFunction::zeros(space.len());
    let mut rhs = 0.0;
    for g in gs {
        let a = g.abs_fn();
        rhs += weak_lp_quasinorm(space, &a, p, None)?.powf(p);
        sum = sum.add(&a);
    }
    let lhs = weak_lp_quasinorm(space, &sum, p, None)?.powf(p);
    let bound = 2f64.powf(p) * (1.0 + 1.0 / (1.0 - p));
    let ratio = if rhs > 0.0 { lhs / rhs } else { 0.0 };
    Ok(SubadditivityReport {
        p,
        lhs,
        rhs,
        ratio,
        bound,
        holds: lhs <= bound * rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::build_shifted_grid;
    use crate::space::build_euclidean_grid;
    use std::sync::Arc;

    #[test]
    fn constants_have_unit_characteristics() {
        let s = Arc::new(build_euclidean_grid(1, 64, 1.0).unwrap());
        let sys = build_shifted_grid(s, &[0], (0, 6)).unwrap();
        let w = Weight::constant(64);
        assert!((ap_characteristic(&sys, &w, 2.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((two_weight(&sys, &w, &w, 3.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((ainfty_characteristic(&sys, &w).unwrap() - 1.0).abs() < 1e-15);
        assert!(ap_characteristic(&sys, &w, 1.0).is_err());
    }

    #[test]
    fn weak_norm_examples() {
        let s = build_euclidean_grid(1, 4, 1.0).unwrap();
        let f = GridFunction::from_real(&[3.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(weak_lp_quasinorm(&s, &f, 1.0, None).unwrap(), 4.0);
        let e = GridFunction::indicator(4, &[0, 2]);
        assert!((weak_lp_quasinorm(&s, &e, 0.5, None).unwrap() - 4.0).abs() < 1e-15);
        assert_eq!(weak_lp_quasinorm(&s, &GridFunction::zeros(4), 2.0, None).unwrap(), 0.0);
    }

    #[test]
    fn registry() {
        let s = build_euclidean_grid(1, 9, 0.25).unwrap();
        let w = weight_by_name(&s, "power:0.5").unwrap();
        assert_eq!(w.values()[4], 0.5);
        assert_eq!(w.values()[0], 1.0);
        assert!(weight_by_name(&s, "checkerboard:3").is_ok());
        assert!(weight_by_name(&s, "power").is_err());
        assert!(weight_by_name(&s, "const:2").is_err());
        assert!(Weight::new(vec![0.0]).is_err());
    }

    #[test]
    fn lemma_on_equal_indicators() {
        let s = build_euclidean_grid(1, 8, 1.0).unwrap();
        let g = GridFunction::indicator(8, &[1, 2, 3]);
        let rep = check_weak_lp_subadditivity(&s, &[g.clone(), g], 0.5).unwrap();
        assert!((rep.ratio - 0.5f64.sqrt()).abs() < 1e-15);
        assert!(rep.holds);
    }
}
