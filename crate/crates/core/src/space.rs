//! Finite discretizations of spaces of homogeneous type.
//!
//! A [`Space`] is a lattice of points, each carrying the measure of the cell
//! it represents, together with a quasi-metric. Two families are provided:
//! Euclidean grids in dimension one and two, and an anisotropic lattice in the
//! first Heisenberg group with a homogeneous gauge of homogeneous dimension 4.
//!
//! Balls are closed: `B(x, r) = { y : rho(x, y) <= r }`.

use crate::error::{invalid, Error, Result};
use crate::stats::fit_loglog;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Default cap on the number of lattice points of a single space.
pub const POINT_BUDGET: usize = 100_000;

/// Weight of the central coordinate in the Heisenberg gauge
/// `((x^2 + y^2)^2 + TAU * t^2)^(1/4)`. With the group law
/// `t + t' + (x y' - y x') / 2` this is the Cygan-Korányi gauge, which is a
/// genuine metric.
pub const HEISENBERG_TAU: f64 = 16.0;

/// Current version of the serialized space document.
pub const SPACE_DOC_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpaceKind {
    Euclidean,
    Heisenberg,
}

/// The serialized form of a lattice space. Point data is regenerated from
/// these fields and never stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub version: u32,
    pub kind: SpaceKind,
    pub dimension: usize,
    pub side_count: usize,
    pub spacing: f64,
    #[serde(rename = "A0")]
    pub a0: f64,
    #[serde(rename = "D")]
    pub homogeneous_dimension: f64,
}

impl SpaceSpec {
    pub fn euclidean(dimension: usize, side_count: usize, spacing: f64) -> Self {
        SpaceSpec {
            version: SPACE_DOC_VERSION,
            kind: SpaceKind::Euclidean,
            dimension,
            side_count,
            spacing,
            a0: 1.0,
            homogeneous_dimension: dimension as f64,
        }
    }

    pub fn heisenberg(side_count: usize, spacing: f64) -> Self {
        SpaceSpec {
            version: SPACE_DOC_VERSION,
            kind: SpaceKind::Heisenberg,
            dimension: 3,
            side_count,
            spacing,
            a0: 1.0,
            homogeneous_dimension: 4.0,
        }
    }

    pub fn build(&self) -> Result<Space> {
        if self.version != SPACE_DOC_VERSION {
            return Err(Error::Serialization(format!(
                "unsupported space document version {}",
                self.version
            )));
        }
        match self.kind {
            SpaceKind::Euclidean => build_euclidean_grid(self.dimension, self.side_count, self.spacing),
            SpaceKind::Heisenberg => build_heisenberg_grid(self.side_count, self.spacing),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum Metric {
    Euclidean(usize),
    Heisenberg,
}

/// A finite weighted point cloud with a quasi-metric.
#[derive(Clone, Debug)]
pub struct Space {
    spec: Option<SpaceSpec>,
    metric: Metric,
    coords: Vec<[f64; 3]>,
    /// Integer lattice coordinates; differences are exact multiples of `cell`.
    lattice: Vec<[i64; 3]>,
    cell: [f64; 3],
    weights: Vec<f64>,
    a0: f64,
    dim: f64,
    hull_lo: [f64; 3],
    hull_hi: [f64; 3],
    min_spacing: f64,
    diameter: f64,
}

/// Builds the grid `{0, s, ..., (n-1)s}^d` with Euclidean distance and cell
/// weights `s^d`.
pub fn build_euclidean_grid(dimension: usize, side_count: usize, spacing: f64) -> Result<Space> {
    build_euclidean_grid_with_budget(dimension, side_count, spacing, POINT_BUDGET)
}

pub fn build_euclidean_grid_with_budget(
    dimension: usize,
    side_count: usize,
    spacing: f64,
    budget: usize,
) -> Result<Space> {
    if !(dimension == 1 || dimension == 2) {
        return invalid(format!("euclidean dimension must be 1 or 2, got {dimension}"));
    }
    if side_count < 2 {
        return invalid("side_count must be at least 2");
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return invalid("spacing must be positive and finite");
    }
    let requested = side_count.checked_pow(dimension as u32).unwrap_or(usize::MAX);
    if requested > budget {
        return Err(Error::PointBudget { requested, budget });
    }
    let mut lattice = Vec::with_capacity(requested);
    if dimension == 1 {
        for i in 0..side_count as i64 {
            lattice.push([i, 0, 0]);
        }
    } else {
        for j in 0..side_count as i64 {
            for i in 0..side_count as i64 {
                lattice.push([i, j, 0]);
            }
        }
    }
    let cell = [spacing, spacing, 0.0];
    let coords = lattice
        .iter()
        .map(|l| [l[0] as f64 * spacing, l[1] as f64 * spacing, 0.0])
        .collect();
    let w = spacing.powi(dimension as i32);
    let extent = (side_count - 1) as f64 * spacing;
    let mut hull_hi = [0.0; 3];
    for h in hull_hi.iter_mut().take(dimension) {
        *h = extent;
    }
    Ok(Space {
        spec: Some(SpaceSpec::euclidean(dimension, side_count, spacing)),
        metric: Metric::Euclidean(dimension),
        coords,
        lattice,
        cell,
        weights: vec![w; requested],
        a0: 1.0,
        dim: dimension as f64,
        hull_lo: [0.0; 3],
        hull_hi,
        min_spacing: spacing,
        diameter: extent * (dimension as f64).sqrt(),
    })
}

/// Builds a `side_count^3` lattice in the Heisenberg group, centered at the
/// identity, with horizontal spacing `s` and central spacing `s^2`. Each point
/// carries the Haar measure `s^4` of its cell.
pub fn build_heisenberg_grid(side_count: usize, spacing: f64) -> Result<Space> {
    build_heisenberg_grid_with_budget(side_count, spacing, POINT_BUDGET)
}

pub fn build_heisenberg_grid_with_budget(side_count: usize, spacing: f64, budget: usize) -> Result<Space> {
    if side_count < 2 {
        return invalid("side_count must be at least 2");
    }
    if !(spacing > 0.0 && spacing.is_finite()) {
        return invalid("spacing must be positive and finite");
    }
    let requested = side_count.checked_pow(3).unwrap_or(usize::MAX);
    if requested > budget {
        return Err(Error::PointBudget { requested, budget });
    }
    // Lattice index 2i - (n - 1) with half-cells keeps the grid centered for
    // both parities of n.
    let n = side_count as i64;
    let cell = [spacing / 2.0, spacing / 2.0, spacing * spacing / 2.0];
    let mut lattice = Vec::with_capacity(requested);
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                lattice.push([2 * i - (n - 1), 2 * j - (n - 1), 2 * k - (n - 1)]);
            }
        }
    }
    let coords: Vec<[f64; 3]> = lattice
        .iter()
        .map(|l| [l[0] as f64 * cell[0], l[1] as f64 * cell[1], l[2] as f64 * cell[2]])
        .collect();
    let half = (n - 1) as f64;
    let hull_hi = [half * cell[0], half * cell[1], half * cell[2]];
    let hull_lo = [-hull_hi[0], -hull_hi[1], -hull_hi[2]];
    let mut space = Space {
        spec: Some(SpaceSpec::heisenberg(side_count, spacing)),
        metric: Metric::Heisenberg,
        coords,
        lattice,
        cell,
        weights: vec![spacing.powi(4); requested],
        a0: 1.0,
        dim: 4.0,
        hull_lo,
        hull_hi,
        min_spacing: 0.0,
        diameter: 0.0,
    };
    space.min_spacing = space.measure_min_spacing();
    space.diameter = space.measure_diameter();
    Ok(space)
}

/// Heisenberg group operations on raw coordinates `(x, y, t)`.
pub mod heisenberg {
    use super::HEISENBERG_TAU;

    pub fn mul(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
        [
            a[0] + b[0],
            a[1] + b[1],
            a[2] + b[2] + 0.5 * (a[0] * b[1] - a[1] * b[0]),
        ]
    }

    pub fn inverse(a: [f64; 3]) -> [f64; 3] {
        [-a[0], -a[1], -a[2]]
    }

    /// Homogeneous dilation `(x, y, t) -> (s x, s y, s^2 t)`.
    pub fn dilate(a: [f64; 3], s: f64) -> [f64; 3] {
        [s * a[0], s * a[1], s * s * a[2]]
    }

    pub fn gauge(p: [f64; 3]) -> f64 {
        let h = p[0] * p[0] + p[1] * p[1];
        (h * h + HEISENBERG_TAU * p[2] * p[2]).sqrt().sqrt()
    }

    /// `gauge(h^{-1} g)`.
    pub fn distance(g: [f64; 3], h: [f64; 3]) -> f64 {
        gauge(mul(inverse(h), g))
    }
}

impl Space {
    /// Builds a space from explicit coordinates with the Euclidean metric of
    /// the given dimension. Used for small hand-made examples; such spaces
    /// cannot be serialized.
    pub fn from_points(dimension: usize, coords: Vec<[f64; 3]>, weights: Vec<f64>) -> Result<Space> {
        if !(dimension == 1 || dimension == 2) {
            return invalid("dimension must be 1 or 2");
        }
        if coords.is_empty() || coords.len() != weights.len() {
            return invalid("coordinates and weights must be nonempty and of equal length");
        }
        if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return invalid("weights must be positive and finite");
        }
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for a in 0..dimension {
            lo[a] = coords.iter().map(|c| c[a]).fold(f64::INFINITY, f64::min);
            hi[a] = coords.iter().map(|c| c[a]).fold(f64::NEG_INFINITY, f64::max);
        }
        let mut space = Space {
            spec: None,
            metric: Metric::Euclidean(dimension),
            lattice: Vec::new(),
            cell: [0.0; 3],
            coords,
            weights,
            a0: 1.0,
            dim: dimension as f64,
            hull_lo: lo,
            hull_hi: hi,
            min_spacing: 0.0,
            diameter: 0.0,
        };
        space.min_spacing = space.measure_min_spacing();
        space.diameter = space.measure_diameter();
        Ok(space)
    }

    pub fn spec(&self) -> Option<&SpaceSpec> {
        self.spec.as_ref()
    }

    pub fn to_json(&self) -> Result<String> {
        match &self.spec {
            Some(s) => s.to_json(),
            None => Err(Error::Serialization("custom point spaces are not serializable".into())),
        }
    }

    pub fn kind(&self) -> SpaceKind {
        match self.metric {
            Metric::Euclidean(_) => SpaceKind::Euclidean,
            Metric::Heisenberg => SpaceKind::Heisenberg,
        }
    }

    /// Topological dimension of the coordinates (1, 2, or 3 for Heisenberg).
    pub fn coordinate_dimension(&self) -> usize {
        match self.metric {
            Metric::Euclidean(d) => d,
            Metric::Heisenberg => 3,
        }
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn a0(&self) -> f64 {
        self.a0
    }

    /// Homogeneous dimension `D`.
    pub fn homogeneous_dimension(&self) -> f64 {
        self.dim
    }

    pub fn coords(&self, x: usize) -> [f64; 3] {
        self.coords[x]
    }

    pub fn weight(&self, x: usize) -> f64 {
        self.weights[x]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn total_measure(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn min_spacing(&self) -> f64 {
        self.min_spacing
    }

    pub fn diameter(&self) -> f64 {
        self.diameter
    }

    pub fn hull(&self) -> ([f64; 3], [f64; 3]) {
        (self.hull_lo, self.hull_hi)
    }

    /// Coordinate difference `x - y`, exact for lattice spaces.
    pub fn delta(&self, x: usize, y: usize) -> [f64; 3] {
        if self.lattice.is_empty() {
            let a = self.coords[x];
            let b = self.coords[y];
            [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
        } else {
            let a = self.lattice[x];
            let b = self.lattice[y];
            [
                (a[0] - b[0]) as f64 * self.cell[0],
                (a[1] - b[1]) as f64 * self.cell[1],
                (a[2] - b[2]) as f64 * self.cell[2],
            ]
        }
    }

    /// The quasi-metric `rho(x, y)`.
    #[inline]
    pub fn dist(&self, x: usize, y: usize) -> f64 {
        if x == y {
            return 0.0;
        }
        match self.metric {
            Metric::Euclidean(1) => self.delta(x, y)[0].abs(),
            Metric::Euclidean(_) => {
                let d = self.delta(x, y);
                (d[0] * d[0] + d[1] * d[1]).sqrt()
            }
            Metric::Heisenberg => {
                let d = self.delta(x, y);
                let g = self.coords[x];
                let h = self.coords[y];
                let t = d[2] + 0.5 * (h[1] * g[0] - h[0] * g[1]);
                heisenberg::gauge([d[0], d[1], t])
            }
        }
    }

    /// Closed ball `B(center, r)` as a list of point ids in increasing order.
    pub fn ball(&self, center: usize, r: f64) -> Vec<usize> {
        (0..self.len()).filter(|&y| self.dist(center, y) <= r).collect()
    }

    pub fn ball_measure(&self, center: usize, r: f64) -> f64 {
        (0..self.len())
            .filter(|&y| self.dist(center, y) <= r)
            .map(|y| self.weights[y])
            .sum()
    }

    /// Whether the closed ball `B(center, r)` lies inside the lattice hull, so
    /// that it is not clipped by the edge of the grid.
    pub fn ball_inside_hull(&self, center: usize, r: f64) -> bool {
        let c = self.coords[center];
        let eps = 1e-12 * (1.0 + self.diameter);
        match self.metric {
            Metric::Euclidean(d) => (0..d).all(|a| {
                c[a] - r >= self.hull_lo[a] - eps && c[a] + r <= self.hull_hi[a] + eps
            }),
            Metric::Heisenberg => {
                // h = c * p with gauge(p) <= r: |p_x|, |p_y| <= r and
                // |p_t| <= r^2 / sqrt(tau); the shear adds at most
                // (|c_x| + |c_y|) r / 2 to the central coordinate.
                let dt = r * r / HEISENBERG_TAU.sqrt() + 0.5 * r * (c[0].abs() + c[1].abs());
                c[0] - r >= self.hull_lo[0] - eps
                    && c[0] + r <= self.hull_hi[0] + eps
                    && c[1] - r >= self.hull_lo[1] - eps
                    && c[1] + r <= self.hull_hi[1] + eps
                    && c[2] - dt >= self.hull_lo[2] - eps
                    && c[2] + dt <= self.hull_hi[2] + eps
            }
        }
    }

    /// Point closest to the given coordinates (ties broken by lowest id).
    pub fn nearest_point(&self, target: [f64; 3]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, c) in self.coords.iter().enumerate() {
            let d: f64 = (0..3).map(|a| (c[a] - target[a]).powi(2)).sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Point closest to the center of the hull.
    pub fn central_point(&self) -> usize {
        let mid = [
            0.5 * (self.hull_lo[0] + self.hull_hi[0]),
            0.5 * (self.hull_lo[1] + self.hull_hi[1]),
            0.5 * (self.hull_lo[2] + self.hull_hi[2]),
        ];
        self.nearest_point(mid)
    }

    fn measure_min_spacing(&self) -> f64 {
        if self.len() < 2 {
            return 0.0;
        }
        match self.metric {
            Metric::Heisenberg => {
                // Smallest distance from the central point to any other point;
                // the lattice is homogeneous enough that this is the floor.
                let c = self.central_point();
                (0..self.len())
                    .filter(|&y| y != c)
                    .map(|y| self.dist(c, y))
                    .fold(f64::INFINITY, f64::min)
            }
            Metric::Euclidean(_) => {
                let mut m = f64::INFINITY;
                for x in 0..self.len() {
                    for y in (x + 1)..self.len() {
                        m = m.min(self.dist(x, y));
                    }
                }
                m
            }
        }
    }

    fn measure_diameter(&self) -> f64 {
        let n = self.len();
        if n <= 4096 {
            let mut d = 0.0f64;
            for x in 0..n {
                for y in (x + 1)..n {
                    d = d.max(self.dist(x, y));
                }
            }
            d
        } else {
            // Double sweep from every hull corner: a lower bound within a
            // factor 2 of the true diameter.
            let mut d = 0.0f64;
            let start = self.nearest_point(self.hull_lo);
            let far = (0..n).max_by(|&a, &b| self.dist(start, a).total_cmp(&self.dist(start, b))).unwrap();
            for y in 0..n {
                d = d.max(self.dist(far, y));
            }
            d
        }
    }
}

/// A closed ball query.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BallQuery {
    pub center: usize,
    pub radius: f64,
}

impl BallQuery {
    pub fn new(center: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return invalid("ball radius must be positive");
        }
        Ok(BallQuery { center, radius })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusRow {
    pub radius: f64,
    pub mean_measure: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

/// Measured Ahlfors-David constants `c r^D <= mu(B(x, r)) <= C r^D`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub centers_used: usize,
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub fitted_exponent: f64,
    pub rows: Vec<RadiusRow>,
}

/// Measures `mu(B(x, r)) / r^D` over the given radii and over the sample
/// centers whose balls stay inside the lattice hull.
pub fn check_regularity(space: &Space, radii: &[f64], sample_centers: &[usize]) -> Result<RegularityReport> {
    if radii.is_empty() || sample_centers.is_empty() {
        return Err(Error::EmptySample);
    }
    let lo = 2.0 * space.min_spacing();
    let hi = space.diameter() / 4.0;
    for &r in radii {
        if !(r >= lo * (1.0 - 1e-12) && r <= hi * (1.0 + 1e-12)) {
            return invalid(format!("radius {r} outside the resolvable range [{lo}, {hi}]"));
        }
    }
    let rmax = radii.iter().cloned().fold(0.0, f64::max);
    let centers: Vec<usize> = sample_centers
        .iter()
        .copied()
        .filter(|&c| c < space.len() && space.ball_inside_hull(c, rmax))
        .collect();
    if centers.is_empty() {
        return Err(Error::EmptySample);
    }
    let d = space.homogeneous_dimension();
    let mut rows = Vec::with_capacity(radii.len());
    let mut fit_pts = Vec::with_capacity(radii.len());
    let (mut gmin, mut gmax) = (f64::INFINITY, 0.0f64);
    for &r in radii {
        let (mut sum, mut mn, mut mx) = (0.0, f64::INFINITY, 0.0f64);
        for &c in &centers {
            let m = space.ball_measure(c, r);
            sum += m;
            let ratio = m / r.powf(d);
            mn = mn.min(ratio);
            mx = mx.max(ratio);
        }
        let mean = sum / centers.len() as f64;
        gmin = gmin.min(mn);
        gmax = gmax.max(mx);
        fit_pts.push((r, mean));
        rows.push(RadiusRow {
            radius: r,
            mean_measure: mean,
            min_ratio: mn,
            max_ratio: mx,
        });
    }
    let fitted_exponent = fit_loglog(&fit_pts).map(|f| f.slope).unwrap_or(f64::NAN);
    Ok(RegularityReport {
        centers_used: centers.len(),
        min_ratio: gmin,
        max_ratio: gmax,
        fitted_exponent,
        rows,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub eta: f64,
    pub samples: usize,
    pub evaluated: usize,
    /// Largest sampled value of
    /// `|rho(x,z) - rho(y,z)| / (max(rho(x,z), rho(y,z))^(1-eta) rho(x,y)^eta)`.
    pub constant: f64,
}

/// Samples the Hölder-type regularity of the quasi-metric. Half of the
/// triples draw `y` among the lattice neighbours of `x`, where the ratio is
/// largest. Triples with `z = x` or `z = y` are skipped.
pub fn check_holder_metric(space: &Space, eta: f64, samples: usize, seed: u64) -> Result<HolderReport> {
    if !(eta > 0.0 && eta <= 1.0) {
        return invalid("eta must lie in (0, 1]");
    }
    if samples == 0 {
        return Err(Error::EmptySample);
    }
    let n = space.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut constant = 0.0f64;
    let mut evaluated = 0;
    let near_radius = 3.0 * space.min_spacing();
    for s in 0..samples {
        let x = rng.gen_range(0..n);
        let y = if s % 2 == 0 {
            rng.gen_range(0..n)
        } else {
            let near: Vec<usize> = neighbourhood(space, x, near_radius);
            near[rng.gen_range(0..near.len())]
        };
        let z = rng.gen_range(0..n);
        if z == x || z == y {
            continue;
        }
        evaluated += 1;
        if x == y {
            continue;
        }
        let dxz = space.dist(x, z);
        let dyz = space.dist(y, z);
        let dxy = space.dist(x, y);
        let denom = dxz.max(dyz).powf(1.0 - eta) * dxy.powf(eta);
        constant = constant.max((dxz - dyz).abs() / denom);
    }
    Ok(HolderReport {
        eta,
        samples,
        evaluated,
        constant,
    })
}

fn neighbourhood(space: &Space, x: usize, r: f64) -> Vec<usize> {
    match space.metric {
        Metric::Euclidean(1) => {
            // Contiguous lattice: neighbours are close in index.
            let k = (r / space.min_spacing()).ceil() as usize + 1;
            let lo = x.saturating_sub(k);
            let hi = (x + k + 1).min(space.len());
            (lo..hi).filter(|&y| space.dist(x, y) <= r).collect()
        }
        _ => space.ball(x, r),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuasiTriangleReport {
    pub triples: usize,
    /// Largest sampled `rho(x,y) / (rho(x,z) + rho(z,y))`.
    pub max_ratio: f64,
    /// Triples violating the declared constant by more than `1e-12` relative.
    pub violations: usize,
}

/// Checks `rho(x, y) <= A0 (rho(x, z) + rho(z, y))` on random triples.
pub fn check_quasi_triangle(space: &Space, triples: usize, seed: u64) -> QuasiTriangleReport {
    let n = space.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_ratio = 0.0f64;
    let mut violations = 0;
    for _ in 0..triples {
        let x = rng.gen_range(0..n);
        let y = rng.gen_range(0..n);
        let z = rng.gen_range(0..n);
        let lhs = space.dist(x, y);
        let rhs = space.dist(x, z) + space.dist(z, y);
        if rhs > 0.0 {
            max_ratio = max_ratio.max(lhs / rhs);
        }
        if lhs > space.a0() * rhs * (1.0 + 1e-12) {
            violations += 1;
        }
    }
    QuasiTriangleReport {
        triples,
        max_ratio,
        violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_line() {
        let s = build_euclidean_grid(1, 4, 1.0).unwrap();
        assert_eq!(s.len(), 4);
        for i in 0..4 {
            assert_eq!(s.coords(i)[0], i as f64);
            assert_eq!(s.weight(i), 1.0);
        }
        assert_eq!(s.a0(), 1.0);
        assert_eq!(s.homogeneous_dimension(), 1.0);
    }

    #[test]
    fn euclidean_plane_weights() {
        let s = build_euclidean_grid(2, 2, 0.5).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.weights().iter().all(|&w| w == 0.25));
    }

    #[test]
    fn total_measure() {
        let s = build_euclidean_grid(1, 1000, 0.01).unwrap();
        assert!((s.total_measure() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(build_euclidean_grid(1, 1, 1.0).is_err());
        assert!(build_euclidean_grid(3, 4, 1.0).is_err());
        assert!(build_euclidean_grid(1, 4, 0.0).is_err());
        assert!(matches!(
            build_euclidean_grid(2, 1000, 1.0),
            Err(Error::PointBudget { .. })
        ));
        assert!(matches!(
            build_heisenberg_grid(50, 1.0),
            Err(Error::PointBudget { .. })
        ));
    }

    #[test]
    fn gauge_identity_and_inverse() {
        let e = [0.0, 0.0, 0.0];
        assert_eq!(heisenberg::distance(e, e), 0.0);
        let g = [1.0, 0.0, 0.0];
        assert_eq!(heisenberg::distance(g, e), heisenberg::gauge(g));
    }

    #[test]
    fn gauge_is_homogeneous() {
        let e = [0.0, 0.0, 0.0];
        let g = [1.0, 1.0, 1.0];
        let lhs = heisenberg::distance(e, heisenberg::dilate(g, 2.0));
        let rhs = 2.0 * heisenberg::distance(e, g);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn metric_axioms_on_all_pairs() {
        for space in [
            build_euclidean_grid(2, 6, 0.3).unwrap(),
            build_heisenberg_grid(5, 0.5).unwrap(),
        ] {
            for x in 0..space.len() {
                for y in 0..space.len() {
                    let d = space.dist(x, y);
                    assert_eq!(d, space.dist(y, x));
                    assert_eq!(d == 0.0, x == y);
                }
            }
        }
    }

    #[test]
    fn heisenberg_lattice_layout() {
        let s = build_heisenberg_grid(4, 0.5).unwrap();
        assert_eq!(s.len(), 64);
        assert_eq!(s.weight(0), 0.5f64.powi(4));
        let (lo, hi) = s.hull();
        assert_eq!(hi[0], 0.75);
        assert_eq!(lo[2], -1.5 * 0.25);
        assert!(s.min_spacing() > 0.0);
    }

    #[test]
    fn regularity_1d_interval() {
        let s = build_euclidean_grid(1, 200, 1.0).unwrap();
        let rep = check_regularity(&s, &[10.0], &[100]).unwrap();
        // 21 points of weight 1 in a ball of radius 10.
        assert!((rep.max_ratio - 2.1).abs() < 1e-12);
        assert!(rep.min_ratio >= 1.6 && rep.max_ratio <= 2.4);
    }

    #[test]
    fn regularity_rejects_degenerate_input() {
        let s = build_euclidean_grid(1, 200, 1.0).unwrap();
        assert!(check_regularity(&s, &[0.0, 0.0], &[100]).is_err());
        assert!(matches!(check_regularity(&s, &[10.0], &[]), Err(Error::EmptySample)));
        // Only edge centers: no ball stays inside the hull.
        assert!(matches!(check_regularity(&s, &[10.0], &[0, 1]), Err(Error::EmptySample)));
    }

    #[test]
    fn regularity_exponent_1d() {
        let s = build_euclidean_grid(1, 2000, 1.0).unwrap();
        let radii: Vec<f64> = (0..6).map(|i| 40.0 * 10f64.powf(i as f64 / 5.0)).collect();
        let rep = check_regularity(&s, &radii, &[1000, 990, 1010]).unwrap();
        assert!((rep.fitted_exponent - 1.0).abs() < 0.1, "{}", rep.fitted_exponent);
    }

    #[test]
    fn regularity_exponent_2d() {
        let s = build_euclidean_grid(2, 120, 1.0).unwrap();
        let radii: Vec<f64> = (0..6).map(|i| 3.0 * 10f64.powf(i as f64 / 5.0)).collect();
        let c = s.central_point();
        let rep = check_regularity(&s, &radii, &[c]).unwrap();
        assert!((rep.fitted_exponent - 2.0).abs() < 0.1, "{}", rep.fitted_exponent);
    }

    #[test]
    fn regularity_exponent_heisenberg() {
        let s = build_heisenberg_grid(32, 1.0).unwrap();
        let c = s.central_point();
        let lo = 2.0 * s.min_spacing();
        let mut hi = s.diameter() / 4.0;
        while !s.ball_inside_hull(c, hi) {
            hi *= 0.95;
        }
        let radii: Vec<f64> = (0..5).map(|i| lo * (hi / lo).powf(i as f64 / 4.0)).collect();
        let rep = check_regularity(&s, &radii, &[c]).unwrap();
        assert!(hi > 2.0 * lo);
        assert!((rep.fitted_exponent - 4.0).abs() < 0.3, "{rep:?}");
    }

    #[test]
    fn holder_euclidean_eta_one() {
        let s = build_euclidean_grid(2, 20, 1.0).unwrap();
        let rep = check_holder_metric(&s, 1.0, 5000, 3).unwrap();
        assert!(rep.constant <= 1.0 + 1e-12);
        assert!(rep.evaluated > 0);
    }

    #[test]
    fn holder_heisenberg_is_finite() {
        let s = build_heisenberg_grid(8, 1.0).unwrap();
        let rep = check_holder_metric(&s, 0.5, 5000, 1).unwrap();
        assert!(rep.constant.is_finite() && rep.constant > 0.0);
        assert!(check_holder_metric(&s, 0.5, 0, 1).is_err());
    }

    #[test]
    fn quasi_triangle_holds() {
        for space in [
            build_euclidean_grid(2, 30, 1.0).unwrap(),
            build_heisenberg_grid(12, 1.0).unwrap(),
        ] {
            let rep = check_quasi_triangle(&space, 100_000, 11);
            assert_eq!(rep.violations, 0, "{rep:?}");
        }
    }

    #[test]
    fn spec_json_round_trip() {
        let s = build_heisenberg_grid(4, 0.5).unwrap();
        let json = s.to_json().unwrap();
        assert!(json.contains("\"A0\""));
        assert!(json.contains("\"heisenberg\""));
        let back = SpaceSpec::from_json(&json).unwrap().build().unwrap();
        assert_eq!(back.len(), s.len());
        assert_eq!(back.dist(3, 17), s.dist(3, 17));
    }

    #[test]
    fn custom_points() {
        let s = Space::from_points(1, vec![[0.0, 0.0, 0.0]], vec![2.0]).unwrap();
        assert_eq!(s.len(), 1);
        assert_eq!(s.diameter(), 0.0);
        assert!(s.to_json().is_err());
    }
}
