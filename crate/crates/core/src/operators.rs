//! Averaging operators, truncated singular integrals, kernel validation,
//! smooth dyadic kernel pieces and short variations.
//!
//! Both `t -> A_t f(x)` and `t -> T_t f(x)` are piecewise constant with
//! breakpoints at the distances from `x`, so each is stored as a [`Profile`]
//! and every variation below is taken over its breakpoints. Balls in `A_t`
//! are closed and truncations in `T_t` are strict, so the two are
//! complementary.

use crate::dyadic::CubeSystem;
use crate::error::{invalid, Error, Result};
use crate::function::GridFunction;
use crate::martingale::CubeAverages;
use crate::space::{Space, SpaceKind};
use crate::stats::{fit_line, LineFit};
use crate::variation::{hvar_real, r_variation, Sample};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Largest space accepted by the dense almost-orthogonality routines.
pub const ORTH_MAX_POINTS: usize = 2048;

/// A kernel `K(x, y)` defined off the diagonal. `eval` returns 0 on it.
pub trait Kernel: Send + Sync {
    fn name(&self) -> String;

    /// Declared Hölder exponent.
    fn eta(&self) -> f64 {
        1.0
    }

    /// Declared bound for the per-variable smoothness ratio.
    fn smoothness_bound(&self) -> f64 {
        2.0
    }

    fn check_space(&self, space: &Space) -> Result<()>;

    fn eval(&self, space: &Space, x: usize, y: usize) -> Complex64;
}

fn require_euclidean(space: &Space, dim: usize, name: &str) -> Result<()> {
    if space.kind() != SpaceKind::Euclidean || space.coordinate_dimension() != dim {
        return Err(Error::IncompatibleSpace(format!(
            "kernel {name} needs a {dim}-dimensional Euclidean grid"
        )));
    }
    Ok(())
}

/// `1 / (x - y)` on the line.
#[derive(Clone, Copy, Debug, Default)]
pub struct HilbertKernel;

impl Kernel for HilbertKernel {
    fn name(&self) -> String {
        "hilbert".into()
    }

    fn check_space(&self, space: &Space) -> Result<()> {
        require_euclidean(space, 1, "hilbert")
    }

    fn eval(&self, space: &Space, x: usize, y: usize) -> Complex64 {
        if x == y {
            return ZERO;
        }
        Complex64::new(1.0 / space.delta(x, y)[0], 0.0)
    }
}

/// `(x_j - y_j) / |x - y|^3` in the plane, `j` in `{1, 2}`.
#[derive(Clone, Copy, Debug)]
pub struct RieszKernel {
    pub component: usize,
}

impl Kernel for RieszKernel {
    fn name(&self) -> String {
        format!("riesz-{}", self.component)
    }

    fn smoothness_bound(&self) -> f64 {
        16.0
    }

    fn check_space(&self, space: &Space) -> Result<()> {
        require_euclidean(space, 2, "riesz")
    }

    fn eval(&self, space: &Space, x: usize, y: usize) -> Complex64 {
        if x == y {
            return ZERO;
        }
        let d = space.delta(x, y);
        let r = (d[0] * d[0] + d[1] * d[1]).sqrt();
        Complex64::new(d[self.component - 1] / (r * r * r), 0.0)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroKernel;

impl Kernel for ZeroKernel {
    fn name(&self) -> String {
        "zero".into()
    }

    fn smoothness_bound(&self) -> f64 {
        0.0
    }

    fn check_space(&self, _space: &Space) -> Result<()> {
        Ok(())
    }

    fn eval(&self, _space: &Space, _x: usize, _y: usize) -> Complex64 {
        ZERO
    }
}

/// `rho(x, y)^-D`. Satisfies the size bound but has no cancellation.
#[derive(Clone, Copy, Debug, Default)]
pub struct PositiveKernel;

impl Kernel for PositiveKernel {
    fn name(&self) -> String {
        "test-positive".into()
    }

    fn smoothness_bound(&self) -> f64 {
        f64::INFINITY
    }

    fn check_space(&self, _space: &Space) -> Result<()> {
        Ok(())
    }

    fn eval(&self, space: &Space, x: usize, y: usize) -> Complex64 {
        if x == y {
            return ZERO;
        }
        Complex64::new(space.dist(x, y).powf(-space.homogeneous_dimension()), 0.0)
    }
}

/// Kernel registry: `hilbert`, `riesz-1`, `riesz-2`, `zero`, `test-positive`.
pub fn kernel_by_name(name: &str) -> Result<Box<dyn Kernel>> {
    Ok(match name {
        "hilbert" => Box::new(HilbertKernel),
        "riesz-1" => Box::new(RieszKernel { component: 1 }),
        "riesz-2" => Box::new(RieszKernel { component: 2 }),
        "zero" => Box::new(ZeroKernel),
        "test-positive" => Box::new(PositiveKernel),
        _ => return Err(Error::UnknownName(name.to_string())),
    })
}

/// Names accepted by [`kernel_by_name`].
pub const KERNEL_NAMES: [&str; 5] = ["hilbert", "riesz-1", "riesz-2", "zero", "test-positive"];

fn log_kappa(x: f64, kappa: f64) -> f64 {
    if kappa == 2.0 {
        x.log2()
    } else {
        x.ln() / kappa.ln()
    }
}

/// Smoothstep `Phi`: 0 below -1, 1 above 0, `3w^2 - 2w^3` with `w = v + 1`
/// in between.
pub fn phi(v: f64) -> f64 {
    if v <= -1.0 {
        0.0
    } else if v >= 0.0 {
        1.0
    } else {
        let w = v + 1.0;
        w * w * (3.0 - 2.0 * w)
    }
}

/// The bump `psi(s) = Phi(log_kappa s) - Phi(log_kappa s - 1)`, supported on
/// `(1/kappa, kappa)`, with `sum_k psi(kappa^-k s) = 1`.
pub fn psi(s: f64, kappa: f64) -> f64 {
    if !(s > 0.0) {
        return 0.0;
    }
    let u = log_kappa(s, kappa);
    phi(u) - phi(u - 1.0)
}

/// `psi(kappa^-k rho)`. The argument is formed as `log_kappa(rho) - k` so
/// that consecutive pieces share their smoothstep terms.
pub fn piece_weight(rho: f64, k: i32, kappa: f64) -> f64 {
    if !(rho > 0.0) {
        return 0.0;
    }
    let u = log_kappa(rho, kappa);
    phi(u - k as f64) - phi(u - (k + 1) as f64)
}

/// `K_k(x, y) = K(x, y) psi(kappa^-k rho(x, y))`.
pub struct DyadicPiece<'a> {
    pub kernel: &'a dyn Kernel,
    pub k: i32,
    pub kappa: f64,
}

pub fn dyadic_piece(kernel: &dyn Kernel, k: i32, kappa: f64) -> DyadicPiece<'_> {
    DyadicPiece { kernel, k, kappa }
}

impl Kernel for DyadicPiece<'_> {
    fn name(&self) -> String {
        format!("{}@{}", self.kernel.name(), self.k)
    }

    fn eta(&self) -> f64 {
        self.kernel.eta()
    }

    fn check_space(&self, space: &Space) -> Result<()> {
        self.kernel.check_space(space)
    }

    fn eval(&self, space: &Space, x: usize, y: usize) -> Complex64 {
        if x == y {
            return ZERO;
        }
        let w = piece_weight(space.dist(x, y), self.k, self.kappa);
        if w == 0.0 {
            return ZERO;
        }
        self.kernel.eval(space, x, y) * w
    }
}

/// Strictly increasing positive truncation radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationGrid {
    radii: Vec<f64>,
}

impl TruncationGrid {
    pub fn new(radii: Vec<f64>) -> Result<Self> {
        if radii.is_empty() {
            return Err(Error::EmptySample);
        }
        if radii.iter().any(|&t| !(t > 0.0) || !t.is_finite()) {
            return invalid("truncation radii must be positive and finite");
        }
        if radii.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("truncation radii must be strictly increasing");
        }
        Ok(TruncationGrid { radii })
    }

    /// `count` geometrically spaced radii from `lo` to `hi`.
    pub fn geometric(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if count < 2 || !(lo > 0.0) || !(hi > lo) {
            return invalid("geometric grid needs 0 < lo < hi and at least two radii");
        }
        let q = (hi / lo).powf(1.0 / (count - 1) as f64);
        let mut radii: Vec<f64> = (0..count).map(|i| lo * q.powi(i as i32)).collect();
        radii[count - 1] = hi;
        Self::new(radii)
    }

    /// Geometric radii from the minimal spacing to the diameter.
    pub fn spanning(space: &Space, count: usize) -> Result<Self> {
        Self::geometric(space.min_spacing(), space.diameter(), count)
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }
}

/// `A_t f(x)`: the mean of `f` over the closed ball `B(x, t)`.
pub fn average(space: &Space, f: &GridFunction, t: f64, x: usize) -> Result<Complex64> {
    f.check_space(space)?;
    let mut s = ZERO;
    let mut m = 0.0;
    for y in 0..space.len() {
        if space.dist(x, y) <= t {
            let w = space.weight(y);
            s += f.get(y) * w;
            m += w;
        }
    }
    Ok(s / m)
}

/// `T_t f(x) = sum over rho(x, y) > t of K(x, y) f(y) mu(y)`.
pub fn truncated_si(space: &Space, kernel: &dyn Kernel, f: &GridFunction, t: f64, x: usize) -> Result<Complex64> {
    f.check_space(space)?;
    kernel.check_space(space)?;
    if !(t > 0.0) {
        return invalid("truncation radius must be positive");
    }
    let mut s = ZERO;
    for y in 0..space.len() {
        if space.dist(x, y) > t {
            s += kernel.eval(space, x, y) * f.get(y) * space.weight(y);
        }
    }
    Ok(s)
}

/// Operator family whose profile is taken.
#[derive(Clone, Copy)]
pub enum Family<'a> {
    Averages,
    Singular(&'a dyn Kernel),
}

impl Family<'_> {
    pub fn label(&self) -> &'static str {
        match self {
            Family::Averages => "averages",
            Family::Singular(_) => "singular",
        }
    }
}

/// `t -> A_t f(x)` or `t -> T_t f(x)` as a step function: `values[i]` holds
/// for `t` in `[radii[i], radii[i + 1])`, and `radii[0] = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub radii: Vec<f64>,
    pub values: Vec<Complex64>,
}

/// Neighbours of `x` grouped by distance: `(distance, ids)` in increasing order.
fn distance_groups(space: &Space, x: usize) -> Vec<(f64, Vec<usize>)> {
    let mut order: Vec<(f64, usize)> = (0..space.len()).map(|y| (space.dist(x, y), y)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut groups: Vec<(f64, Vec<usize>)> = Vec::new();
    for (d, y) in order {
        match groups.last_mut() {
            Some(g) if g.0 == d => g.1.push(y),
            _ => groups.push((d, vec![y])),
        }
    }
    groups
}

impl Profile {
    pub fn new(space: &Space, f: &GridFunction, x: usize, family: Family<'_>) -> Result<Self> {
        f.check_space(space)?;
        if x >= space.len() {
            return invalid(format!("point {x} is not in the space"));
        }
        if let Family::Singular(k) = family {
            k.check_space(space)?;
        }
        let groups = distance_groups(space, x);
        let radii: Vec<f64> = groups.iter().map(|g| g.0).collect();
        let values = match family {
            Family::Averages => {
                let mut s = ZERO;
                let mut m = 0.0;
                groups
                    .iter()
                    .map(|(_, ys)| {
                        for &y in ys {
                            s += f.get(y) * space.weight(y);
                            m += space.weight(y);
                        }
                        s / m
                    })
                    .collect()
            }
            Family::Singular(kernel) => {
                let n = groups.len();
                let mut v = vec![ZERO; n];
                for i in (0..n.saturating_sub(1)).rev() {
                    let mut g = ZERO;
                    for &y in &groups[i + 1].1 {
                        g += kernel.eval(space, x, y) * f.get(y) * space.weight(y);
                    }
                    v[i] = v[i + 1] + g;
                }
                v
            }
        };
        Ok(Profile { radii, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest `i` with `radii[i] <= t`, for `t >= 0`.
    pub fn index_at(&self, t: f64) -> usize {
        self.radii.partition_point(|&d| d <= t).saturating_sub(1)
    }

    /// Largest `i` with `radii[i] < t`, for `t > 0`.
    pub fn index_before(&self, t: f64) -> usize {
        self.radii.partition_point(|&d| d < t).saturating_sub(1)
    }

    pub fn value_at(&self, t: f64) -> Complex64 {
        self.values[self.index_at(t)]
    }

    /// Values taken on the closed window `lo <= t <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> &[Complex64] {
        let a = self.index_at(lo);
        let b = self.index_at(hi).max(a);
        &self.values[a..=b]
    }

    pub fn is_real(&self) -> bool {
        self.values.iter().all(|v| v.im == 0.0)
    }
}

/// `A_t f(x)` for every radius of the grid.
pub fn averages_on_grid(space: &Space, f: &GridFunction, x: usize, grid: &TruncationGrid) -> Result<Vec<Complex64>> {
    let p = Profile::new(space, f, x, Family::Averages)?;
    Ok(grid.radii().iter().map(|&t| p.value_at(t)).collect())
}

/// `T_t f(x)` for every radius of the grid.
pub fn truncations_on_grid(
    space: &Space,
    kernel: &dyn Kernel,
    f: &GridFunction,
    x: usize,
    grid: &TruncationGrid,
) -> Result<Vec<Complex64>> {
    let p = Profile::new(space, f, x, Family::Singular(kernel))?;
    Ok(grid.radii().iter().map(|&t| p.value_at(t)).collect())
}

/// r-variation of a sequence, using the turning-point route for real values.
pub fn sequence_variation(values: &[Complex64], r: f64, homogeneous: bool) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::EmptySample);
    }
    if r < 1.0 || r.is_nan() {
        return Err(Error::ExponentBelowOne(r));
    }
    if values.iter().all(|v| v.im == 0.0) {
        let re: Vec<f64> = values.iter().map(|v| v.re).collect();
        let v = hvar_real(&re, r);
        let sup = re.iter().fold(0.0f64, |m, a| m.max(a.abs()));
        return Ok(if homogeneous { v } else { v + sup });
    }
    r_variation(&Sample::from_complex(values.to_vec())?, r, homogeneous)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShortVarOptions {
    /// Variation exponent.
    pub r: f64,
    /// Non-tangential aperture: the sup runs over `rho(x, x') <= aperture * kappa^k`.
    pub aperture: f64,
    /// Drop the `sup |a_t|` term of the variation norm.
    pub homogeneous: bool,
}

impl Default for ShortVarOptions {
    fn default() -> Self {
        ShortVarOptions {
            r: 2.0,
            aperture: 1.0,
            homogeneous: false,
        }
    }
}

/// The scale-`k` short variation sequence at `x'` from its profile, over
/// `t` in `[kappa^(k-1), kappa^(k+1)]`. `ek` is `E_k f(x')` (averages only).
pub fn short_sequence(profile: &Profile, family: Family<'_>, lo: f64, hi: f64, ek: Complex64) -> Vec<Complex64> {
    match family {
        Family::Averages => profile.window(lo, hi).iter().map(|v| v - ek).collect(),
        Family::Singular(_) => {
            // t -> sum over lo < rho < t equals T_lo - T_(t-).
            let a = profile.index_at(lo);
            let b = profile.index_before(hi).max(a);
            let t_lo = profile.values[a];
            let mut out = Vec::with_capacity(b - a + 2);
            out.push(ZERO);
            out.extend(profile.values[a..=b].iter().map(|v| t_lo - v));
            out
        }
    }
}

fn check_window(system: &CubeSystem, k: i32) -> Result<()> {
    system.check_scale(k)?;
    let hi = system.kappa().powi(k + 1);
    if hi < system.space().min_spacing() {
        return invalid(format!("scale {k} window lies below the grid resolution"));
    }
    Ok(())
}

/// Short variations `w[x'][j]` before the non-tangential sup, for scales `ks`.
fn local_short_variations(
    system: &CubeSystem,
    f: &GridFunction,
    ks: &[i32],
    family: Family<'_>,
    opts: &ShortVarOptions,
) -> Result<Vec<Vec<f64>>> {
    let space = system.space();
    let kappa = system.kappa();
    let avg = match family {
        Family::Averages => Some(CubeAverages::new(system, f)?),
        Family::Singular(_) => None,
    };
    let mut out = Vec::with_capacity(space.len());
    for x in 0..space.len() {
        let p = Profile::new(space, f, x, family)?;
        let mut row = Vec::with_capacity(ks.len());
        for &k in ks {
            let ek = avg.as_ref().map_or(ZERO, |a| a.at(system, x, k));
            let seq = short_sequence(&p, family, kappa.powi(k - 1), kappa.powi(k + 1), ek);
            row.push(sequence_variation(&seq, opts.r, opts.homogeneous)?);
        }
        out.push(row);
    }
    Ok(out)
}

/// Non-tangential sup of `local[x'][j]` over `rho(x, x') <= aperture kappa^ks[j]`.
fn nontangential_sup(system: &CubeSystem, local: &[Vec<f64>], ks: &[i32], aperture: f64) -> Vec<Vec<f64>> {
    let space = system.space();
    let radii: Vec<f64> = ks.iter().map(|&k| aperture * system.kappa().powi(k)).collect();
    (0..space.len())
        .map(|x| {
            let mut row = vec![0.0f64; ks.len()];
            for y in 0..space.len() {
                let d = space.dist(x, y);
                for j in 0..ks.len() {
                    if d <= radii[j] && local[y][j] > row[j] {
                        row[j] = local[y][j];
                    }
                }
            }
            row
        })
        .collect()
}

fn check_family(system: &CubeSystem, f: &GridFunction, family: Family<'_>, opts: &ShortVarOptions) -> Result<()> {
    f.check_space(system.space())?;
    if let Family::Singular(k) = family {
        k.check_space(system.space())?;
    }
    if opts.r < 1.0 || opts.r.is_nan() {
        return Err(Error::ExponentBelowOne(opts.r));
    }
    if !(opts.aperture > 0.0) {
        return invalid("aperture must be positive");
    }
    Ok(())
}

/// `S_k f(x) = sup over rho(x, x') <= C kappa^k` of the r-variation norm over
/// `t` in `[kappa^(k-1), kappa^(k+1)]` of `A_t f(x') - E_k f(x')`, or of
/// `sum over kappa^(k-1) < rho(x', y) < t` of `K(x', y) f(y) mu(y)`.
pub fn short_variation(
    system: &CubeSystem,
    f: &GridFunction,
    k: i32,
    family: Family<'_>,
    opts: &ShortVarOptions,
) -> Result<Vec<f64>> {
    check_family(system, f, family, opts)?;
    check_window(system, k)?;
    let local = local_short_variations(system, f, &[k], family, opts)?;
    Ok(nontangential_sup(system, &local, &[k], opts.aperture)
        .into_iter()
        .map(|r| r[0])
        .collect())
}

/// Scales of the system whose window is resolved by the grid.
pub fn resolved_scales(system: &CubeSystem) -> Vec<i32> {
    system
        .scales()
        .filter(|&k| system.kappa().powi(k + 1) >= system.space().min_spacing())
        .collect()
}

/// `S f = (sum_k (S_k f)^2)^(1/2)` over [`resolved_scales`].
pub fn short_variation_square(
    system: &CubeSystem,
    f: &GridFunction,
    family: Family<'_>,
    opts: &ShortVarOptions,
) -> Result<Vec<f64>> {
    check_family(system, f, family, opts)?;
    let ks = resolved_scales(system);
    let local = local_short_variations(system, f, &ks, family, opts)?;
    Ok(nontangential_sup(system, &local, &ks, opts.aperture)
        .into_iter()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect())
}

/// Pass thresholds for [`validate_kernel`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelThresholds {
    pub size: f64,
    /// `None` uses the kernel's declared bound.
    pub smoothness: Option<f64>,
    pub cancellation: f64,
}

impl Default for KernelThresholds {
    fn default() -> Self {
        KernelThresholds {
            size: 1.0,
            smoothness: None,
            cancellation: 1e-12,
        }
    }
}

/// Annulus whose kernel integral is largest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CancellationWitness {
    pub center: usize,
    pub inner: f64,
    pub outer: f64,
    /// `"y"` integrates `K(center, .)`, `"x"` integrates `K(., center)`.
    pub variable: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelReport {
    pub kernel: String,
    pub eta: f64,
    pub pairs: usize,
    pub size_ratio: f64,
    pub size_pass: bool,
    pub triples: usize,
    /// Largest of the two per-variable ratios.
    pub smoothness_constant: f64,
    /// Largest ratio for the sum of both variables.
    pub smoothness_sum: f64,
    pub smoothness_pass: bool,
    pub annuli: usize,
    pub cancellation_max: f64,
    pub cancellation_witness: Option<CancellationWitness>,
    pub cancellation_pass: bool,
    pub pass: bool,
}

/// Samples the size, smoothness and two-sided cancellation conditions.
/// Size uses every pair when `samples >= n(n-1)`. Cancellation only uses
/// annuli whose outer ball lies inside the hull.
pub fn validate_kernel(
    space: &Space,
    kernel: &dyn Kernel,
    samples: usize,
    seed: u64,
    thresholds: &KernelThresholds,
) -> Result<KernelReport> {
    kernel.check_space(space)?;
    if samples == 0 {
        return invalid("samples must be at least 1");
    }
    let n = space.len();
    if n < 2 {
        return Err(Error::Degenerate("kernel validation needs two points".into()));
    }
    let dim = space.homogeneous_dimension();
    let eta = kernel.eta();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Size.
    let mut size_ratio = 0.0f64;
    let mut pairs = 0;
    let mut size_at = |x: usize, y: usize| {
        let r = space.dist(x, y).powf(dim) * kernel.eval(space, x, y).norm();
        size_ratio = size_ratio.max(r);
    };
    if samples >= n * (n - 1) {
        for x in 0..n {
            for y in 0..n {
                if x != y {
                    size_at(x, y);
                    pairs += 1;
                }
            }
        }
    } else {
        while pairs < samples {
            let x = rng.gen_range(0..n);
            let y = rng.gen_range(0..n);
            if x != y {
                size_at(x, y);
                pairs += 1;
            }
        }
    }

    // Smoothness on triples with rho(x, y) >= 2 rho(x, x') > 0.
    let mut smooth = 0.0f64;
    let mut smooth_sum = 0.0f64;
    let mut triples = 0;
    let mut attempts = 0;
    while triples < samples && attempts < 20 * samples {
        attempts += 1;
        let x = rng.gen_range(0..n);
        let y = rng.gen_range(0..n);
        if x == y {
            continue;
        }
        let rho = space.dist(x, y);
        let near: Vec<usize> = (0..n)
            .filter(|&z| z != x && 2.0 * space.dist(x, z) <= rho)
            .collect();
        if near.is_empty() {
            continue;
        }
        let xp = if rng.gen_bool(0.5) {
            near[rng.gen_range(0..near.len())]
        } else {
            *near
                .iter()
                .max_by(|&&a, &&b| space.dist(x, a).total_cmp(&space.dist(x, b)))
                .unwrap()
        };
        let delta = space.dist(x, xp);
        let scale = rho.powf(dim) * (rho / delta).powf(eta);
        let a = (kernel.eval(space, x, y) - kernel.eval(space, xp, y)).norm() * scale;
        let b = (kernel.eval(space, y, x) - kernel.eval(space, y, xp)).norm() * scale;
        smooth = smooth.max(a).max(b);
        smooth_sum = smooth_sum.max(a + b);
        triples += 1;
    }

    // Cancellation on annuli r < rho < R in both variables.
    let mut cancel = 0.0f64;
    let mut witness: Option<CancellationWitness> = None;
    let mut annuli = 0;
    let lo = 2.0 * space.min_spacing();
    let hi = 0.5 * space.diameter();
    let mut attempts = 0;
    while annuli < samples && hi > lo && attempts < 20 * samples {
        attempts += 1;
        let outer = rng.gen_range(lo..=hi);
        let c = rng.gen_range(0..n);
        if !space.ball_inside_hull(c, outer) {
            continue;
        }
        let inner = rng.gen_range(0.0..outer);
        let mut sy = ZERO;
        let mut sx = ZERO;
        for z in 0..n {
            let d = space.dist(c, z);
            if inner < d && d < outer {
                sy += kernel.eval(space, c, z) * space.weight(z);
            }
            let d = space.dist(z, c);
            if inner < d && d < outer {
                sx += kernel.eval(space, z, c) * space.weight(z);
            }
        }
        for (v, var) in [(sy.norm(), "y"), (sx.norm(), "x")] {
            if v > cancel || witness.is_none() {
                cancel = cancel.max(v);
                witness = Some(CancellationWitness {
                    center: c,
                    inner,
                    outer,
                    variable: var.into(),
                    value: v,
                });
            }
        }
        annuli += 1;
    }

    let size_pass = size_ratio <= thresholds.size;
    let smoothness_pass = smooth <= thresholds.smoothness.unwrap_or(kernel.smoothness_bound());
    let cancellation_pass = annuli > 0 && cancel <= thresholds.cancellation;
    Ok(KernelReport {
        kernel: kernel.name(),
        eta,
        pairs,
        size_ratio,
        size_pass,
        triples,
        smoothness_constant: smooth,
        smoothness_sum: smooth_sum,
        smoothness_pass,
        annuli,
        cancellation_max: cancel,
        cancellation_witness: witness,
        cancellation_pass,
        pass: size_pass && smoothness_pass && cancellation_pass,
    })
}

/// `W^(1/2) K_k W^(1/2)` as sparse rows.
struct SparseMatrix {
    n: usize,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SparseMatrix {
    fn piece(space: &Space, kernel: &dyn Kernel, k: i32, kappa: f64) -> Self {
        let n = space.len();
        let lo = kappa.powi(k - 1);
        let hi = kappa.powi(k + 1);
        let rows = (0..n)
            .map(|x| {
                (0..n)
                    .filter_map(|y| {
                        let d = space.dist(x, y);
                        if !(lo < d && d < hi) {
                            return None;
                        }
                        let w = piece_weight(d, k, kappa);
                        let v = kernel.eval(space, x, y) * w * (space.weight(x) * space.weight(y)).sqrt();
                        (v != ZERO).then_some((y, v))
                    })
                    .collect()
            })
            .collect();
        SparseMatrix { n, rows }
    }

    fn mul(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * v[j]).sum())
            .collect()
    }

    fn mul_adjoint(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![ZERO; self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, a) in row {
                out[j] += a.conj() * v[i];
            }
        }
        out
    }

    fn is_zero(&self) -> bool {
        self.rows.iter().all(|r| r.is_empty())
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Largest singular value of the operator `apply` by power iteration on
/// `apply_adjoint . apply`.
fn power_norm(n: usize, apply: impl Fn(&[Complex64]) -> Vec<Complex64>, adjoint: impl Fn(&[Complex64]) -> Vec<Complex64>) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|z| *z /= nv);
    let mut sigma = 0.0f64;
    for _ in 0..5000 {
        let u = apply(&v);
        let s = norm(&u);
        if s == 0.0 {
            return 0.0;
        }
        let w = adjoint(&u);
        let nw = norm(&w);
        if nw == 0.0 {
            return s;
        }
        v = w.into_iter().map(|z| z / nw).collect();
        let done = (s - sigma).abs() <= 1e-12 * s;
        sigma = s;
        if done {
            break;
        }
    }
    sigma
}

fn check_orth(space: &Space, kernel: &dyn Kernel, k: i32, k2: i32, kappa: f64) -> Result<()> {
    kernel.check_space(space)?;
    if space.len() > ORTH_MAX_POINTS {
        return Err(Error::PointBudget {
            requested: space.len(),
            budget: ORTH_MAX_POINTS,
        });
    }
    if !(kappa > 1.0) {
        return invalid("kappa must exceed 1");
    }
    for s in [k, k2] {
        if kappa.powi(s + 1) <= space.min_spacing() || kappa.powi(s - 1) >= space.diameter() {
            return invalid(format!("scale {s} is not resolved by the grid"));
        }
    }
    Ok(())
}

/// `||T_k2^* T_k|| + ||T_k2 T_k^*||` for the pieces `T_k` of the kernel, as
/// operators on `L^2(mu)`.
pub fn almost_orthogonality(space: &Space, kernel: &dyn Kernel, k: i32, k2: i32, kappa: f64) -> Result<f64> {
    check_orth(space, kernel, k, k2, kappa)?;
    let a = SparseMatrix::piece(space, kernel, k, kappa);
    let b = SparseMatrix::piece(space, kernel, k2, kappa);
    if a.is_zero() || b.is_zero() {
        return Ok(0.0);
    }
    let n = space.len();
    // B^* A and its adjoint A^* B.
    let first = power_norm(n, |v| b.mul_adjoint(&a.mul(v)), |v| a.mul_adjoint(&b.mul(v)));
    // B A^* and its adjoint A B^*.
    let second = power_norm(n, |v| b.mul(&a.mul_adjoint(v)), |v| a.mul(&b.mul_adjoint(v)));
    Ok(first + second)
}

/// Dense row-major `W^(1/2) K_k W^(1/2)`, for cross-checks.
pub fn piece_matrix(space: &Space, kernel: &dyn Kernel, k: i32, kappa: f64) -> Result<Vec<Complex64>> {
    check_orth(space, kernel, k, k, kappa)?;
    let m = SparseMatrix::piece(space, kernel, k, kappa);
    let n = space.len();
    let mut out = vec![ZERO; n * n];
    for (i, row) in m.rows.iter().enumerate() {
        for &(j, v) in row {
            out[i * n + j] = v;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityRow {
    pub k: i32,
    pub k2: i32,
    pub gap: u32,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrthogonalityReport {
    pub rows: Vec<OrthogonalityRow>,
    /// `(gap, largest norm at that gap)`.
    pub by_gap: Vec<(u32, f64)>,
    /// Fit of `log2(norm)` against the gap.
    pub fit: Option<LineFit>,
    /// `-slope` of the fit.
    pub epsilon: f64,
}

/// Norms for all pairs `k <= k2` in `scales` with `k2 - k <= max_gap`, the
/// worst norm per gap and the decay exponent fitted on `log2`.
pub fn orthogonality_decay(
    space: &Space,
    kernel: &dyn Kernel,
    kappa: f64,
    scales: (i32, i32),
    max_gap: u32,
) -> Result<OrthogonalityReport> {
    let (lo, hi) = scales;
    if lo > hi {
        return invalid("empty scale range");
    }
    let mut rows = Vec::new();
    for k in lo..=hi {
        for g in 0..=max_gap {
            let k2 = k + g as i32;
            if k2 > hi {
                break;
            }
            rows.push(OrthogonalityRow {
                k,
                k2,
                gap: g,
                norm: almost_orthogonality(space, kernel, k, k2, kappa)?,
            });
        }
    }
    let mut by_gap: Vec<(u32, f64)> = Vec::new();
    for g in 0..=max_gap {
        let m = rows.iter().filter(|r| r.gap == g).map(|r| r.norm).fold(f64::NAN, f64::max);
        if !m.is_nan() {
            by_gap.push((g, m));
        }
    }
    let pts: Vec<(f64, f64)> = by_gap
        .iter()
        .filter(|p| p.1 > 0.0)
        .map(|&(g, v)| (g as f64, v.log2()))
        .collect();
    let fit = fit_line(&pts);
    let epsilon = fit.map_or(0.0, |f| -f.slope);
    Ok(OrthogonalityReport { rows, by_gap, fit, epsilon })
}

/// Smallest integer `k0` with `kappa^k0 > r`.
pub fn split_scale(r: f64, kappa: f64) -> i32 {
    let mut k = log_kappa(r, kappa).floor() as i32;
    while kappa.powi(k) > r {
        k -= 1;
    }
    while kappa.powi(k) <= r {
        k += 1;
    }
    k
}

/// The three parts of `T_r f(x)`: the long sum of pieces from `k0`, the edge
/// piece on `kappa^(k0-1) < rho < kappa^k0`, and the short part on
/// `r < rho < kappa^k0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitParts {
    pub r: f64,
    pub k0: i32,
    pub long: Complex64,
    pub edge: Complex64,
    pub short: Complex64,
    /// `T_r f(x)` summed directly.
    pub direct: Complex64,
}

impl SplitParts {
    /// `long - edge + short`.
    pub fn recombined(&self) -> Complex64 {
        self.long - self.edge + self.short
    }
}

pub fn split_truncation(
    space: &Space,
    kernel: &dyn Kernel,
    f: &GridFunction,
    x: usize,
    r: f64,
    kappa: f64,
) -> Result<SplitParts> {
    f.check_space(space)?;
    kernel.check_space(space)?;
    if !(r > 0.0) || !(kappa > 1.0) {
        return invalid("split needs r > 0 and kappa > 1");
    }
    let k0 = split_scale(r, kappa);
    let top = split_scale(space.diameter(), kappa) + 1;
    let edge_lo = kappa.powi(k0 - 1);
    let edge_hi = kappa.powi(k0);
    let mut long = ZERO;
    let mut edge = ZERO;
    let mut short = ZERO;
    let mut direct = ZERO;
    for y in 0..space.len() {
        if y == x {
            continue;
        }
        let d = space.dist(x, y);
        let kf = kernel.eval(space, x, y) * f.get(y) * space.weight(y);
        for k in k0..=top {
            let w = piece_weight(d, k, kappa);
            if w != 0.0 {
                long += kf * w;
            }
        }
        if edge_lo < d && d < edge_hi {
            edge += kf * piece_weight(d, k0, kappa);
        }
        if r < d && d < edge_hi {
            short += kf;
        }
        if d > r {
            direct += kf;
        }
    }
    Ok(SplitParts {
        r,
        k0,
        long,
        edge,
        short,
        direct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::build_shifted_grid;
    use crate::space::build_euclidean_grid;
    use std::sync::Arc;

    fn line(n: usize) -> Space {
        build_euclidean_grid(1, n, 1.0).unwrap()
    }

    #[test]
    fn average_of_indicator() {
        let s = line(60);
        let f = GridFunction::indicator(60, &(20..30).collect::<Vec<_>>());
        // Ball around 20 with radius 19.5 is {1..39}: 10 of 39 points.
        let a = average(&s, &f, 19.5, 20).unwrap();
        assert!((a.re - 10.0 / 39.0).abs() < 1e-15);
        assert_eq!(average(&s, &f, 0.5, 25).unwrap().re, 1.0);
    }

    #[test]
    fn hilbert_on_interval_approximates_log() {
        let n = 4001;
        let h = 1.0 / 1000.0;
        let s = build_euclidean_grid(1, n, h).unwrap();
        let x = 1000;
        let f = GridFunction::from_fn(&s, |c| {
            let y = c[0] - 1.0;
            if (1.0..=2.0).contains(&y) { 1.0 } else { 0.0 }
        });
        let v = truncated_si(&s, &HilbertKernel, &f, 0.5, x).unwrap();
        assert!((v.re + 2f64.ln()).abs() < 2e-3, "{}", v.re);
    }

    #[test]
    fn profiles_match_direct_sums() {
        let s = line(40);
        let f = GridFunction::from_fn(&s, |c| (c[0] * 0.37).sin());
        for x in [0, 13, 39] {
            let pa = Profile::new(&s, &f, x, Family::Averages).unwrap();
            let pt = Profile::new(&s, &f, x, Family::Singular(&HilbertKernel)).unwrap();
            assert_eq!(*pt.values.last().unwrap(), ZERO);
            for t in [0.2, 1.0, 3.5, 7.0, 20.0, 50.0] {
                assert!((pa.value_at(t) - average(&s, &f, t, x).unwrap()).norm() < 1e-13);
                let d = truncated_si(&s, &HilbertKernel, &f, t, x).unwrap();
                assert!((pt.value_at(t) - d).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn psi_partition_of_unity() {
        for kappa in [2.0, 3.0] {
            for rho in [0.3, 1.0, 1.7, 2.0, 5.5, 64.0] {
                let s: f64 = (-20..20).map(|k| piece_weight(rho, k, kappa)).sum();
                assert!((s - 1.0).abs() < 1e-14);
            }
        }
        assert_eq!(psi(1.0, 2.0), 1.0);
        assert_eq!(piece_weight(4.0, 1, 2.0), 0.0);
        assert_eq!(piece_weight(1.0, 1, 2.0), 0.0);
        let mid = psi(2f64.sqrt(), 2.0);
        assert!(mid > 0.0 && mid < 1.0);
    }

    #[test]
    fn split_recombines() {
        let s = line(200);
        let f = GridFunction::from_fn(&s, |c| (c[0] * 0.11).cos() + 0.5);
        for r in [0.5, 1.0, 3.0, 4.0, 10.3, 64.0] {
            let p = split_truncation(&s, &HilbertKernel, &f, 77, r, 2.0).unwrap();
            assert!(2f64.powi(p.k0) > r && 2f64.powi(p.k0 - 1) <= r);
            assert!((p.recombined() - p.direct).norm() < 1e-12 * (1.0 + p.direct.norm()));
        }
    }

    #[test]
    fn kernel_checks() {
        let s = line(64);
        let rep = validate_kernel(&s, &HilbertKernel, 5000, 1, &KernelThresholds::default()).unwrap();
        assert_eq!(rep.size_ratio, 1.0);
        assert!(rep.smoothness_constant <= 2.0 && rep.smoothness_sum <= 4.0);
        assert!(rep.cancellation_max <= 1e-12);
        assert!(rep.pass);
        let z = validate_kernel(&s, &ZeroKernel, 100, 1, &KernelThresholds::default()).unwrap();
        assert!(z.pass);
        let p = validate_kernel(&s, &PositiveKernel, 100, 1, &KernelThresholds::default()).unwrap();
        assert!(!p.cancellation_pass);
        assert!(p.cancellation_witness.unwrap().value > 0.0);
        assert!(kernel_by_name("nope").is_err());
        assert!(HilbertKernel.check_space(&build_euclidean_grid(2, 4, 1.0).unwrap()).is_err());
    }

    #[test]
    fn riesz_kernel_passes() {
        let s = build_euclidean_grid(2, 24, 1.0).unwrap();
        for j in [1, 2] {
            let rep = validate_kernel(&s, &RieszKernel { component: j }, 400, 3, &KernelThresholds::default()).unwrap();
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn short_variation_basics() {
        let s = Arc::new(line(32));
        let sys = build_shifted_grid(s.clone(), &[0], (0, 4)).unwrap();
        let c = GridFunction::constant(32, 2.5);
        let opts = ShortVarOptions::default();
        for k in 0..=4 {
            assert!(short_variation(&sys, &c, k, Family::Averages, &opts).unwrap().iter().all(|&v| v < 1e-12));
        }
        let z = GridFunction::zeros(32);
        let v = short_variation(&sys, &z, 2, Family::Singular(&HilbertKernel), &opts).unwrap();
        assert!(v.iter().all(|&v| v == 0.0));
        let f = GridFunction::from_fn(&s, |c| if c[0] == 9.0 { 1.0 } else { 0.0 });
        let a = short_variation_square(&sys, &f, Family::Averages, &opts).unwrap();
        let b = short_variation_square(&sys, &f.scale(Complex64::new(-3.0, 0.0)), Family::Averages, &opts).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((3.0 * x - y).abs() < 1e-12 * (1.0 + y));
        }
    }

    #[test]
    fn orthogonality_of_zero_kernel() {
        let s = line(64);
        assert_eq!(almost_orthogonality(&s, &ZeroKernel, 2, 3, 2.0).unwrap(), 0.0);
        assert!(almost_orthogonality(&s, &HilbertKernel, -3, 2, 2.0).is_err());
    }
}
