//! Scalar functions on the points of a [`Space`].

use crate::error::{invalid, Result};
use crate::space::Space;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// One complex value per point. The function does not own its space; callers
/// pass the space whenever the measure is needed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    values: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(values: Vec<Complex64>) -> Result<Self> {
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return invalid("grid function values must be finite");
        }
        Ok(GridFunction { values })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect())
    }

    pub fn zeros(n: usize) -> Self {
        GridFunction {
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    pub fn constant(n: usize, c: f64) -> Self {
        GridFunction {
            values: vec![Complex64::new(c, 0.0); n],
        }
    }

    pub fn indicator(n: usize, members: &[usize]) -> Self {
        let mut f = Self::zeros(n);
        for &m in members {
            f.values[m] = Complex64::new(1.0, 0.0);
        }
        f
    }

    pub fn from_fn(space: &Space, mut g: impl FnMut([f64; 3]) -> f64) -> Self {
        GridFunction {
            values: (0..space.len()).map(|x| Complex64::new(g(space.coords(x)), 0.0)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn get(&self, x: usize) -> Complex64 {
        self.values[x]
    }

    pub fn set(&mut self, x: usize, v: Complex64) {
        self.values[x] = v;
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }

    pub fn re(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn abs(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.norm()).collect()
    }

    pub fn abs_fn(&self) -> GridFunction {
        GridFunction {
            values: self.values.iter().map(|v| Complex64::new(v.norm(), 0.0)).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        GridFunction {
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> GridFunction {
        GridFunction {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &GridFunction) -> GridFunction {
        GridFunction {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn mul(&self, other: &GridFunction) -> GridFunction {
        GridFunction {
            values: self.values.iter().zip(&other.values).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn check_space(&self, space: &Space) -> Result<()> {
        if self.len() != space.len() {
            return invalid(format!(
                "function has {} values but the space has {} points",
                self.len(),
                space.len()
            ));
        }
        Ok(())
    }

    /// `sum_x f(x) mu(x)`.
    pub fn integral(&self, space: &Space) -> Complex64 {
        self.values
            .iter()
            .zip(space.weights())
            .map(|(v, w)| v * w)
            .sum()
    }

    pub fn norm_lp(&self, space: &Space, p: f64) -> f64 {
        if p == 1.0 {
            return self
                .values
                .iter()
                .zip(space.weights())
                .map(|(v, w)| v.norm() * w)
                .sum();
        }
        let s: f64 = self
            .values
            .iter()
            .zip(space.weights())
            .map(|(v, w)| v.norm().powf(p) * w)
            .sum();
        s.powf(1.0 / p)
    }

    pub fn norm_l1(&self, space: &Space) -> f64 {
        self.norm_lp(space, 1.0)
    }

    pub fn norm_l2_squared(&self, space: &Space) -> f64 {
        self.values
            .iter()
            .zip(space.weights())
            .map(|(v, w)| v.norm_sqr() * w)
            .sum()
    }

    pub fn norm_inf(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}
