//! Experiment configuration, test-function registry and the three
//! verification experiments: sparse domination, weak type (1,1) of the short
//! variation square function, and weighted bounds.
//!
//! Reports are deterministic: identical configurations give byte-identical
//! JSON and CSV output.

use crate::dyadic::{build_christ_cubes, build_shifted_grid, CubeSystem, CUBES_DOC_VERSION};
use crate::error::{Error, Result};
use crate::function::GridFunction;
use crate::operators::{kernel_by_name, short_variation_square, Family, Kernel, Profile, ShortVarOptions};
use crate::space::{Space, SpaceKind, SpaceSpec, POINT_BUDGET, SPACE_DOC_VERSION};
use crate::sparse::{
    build_sparse_family, domination_from, nontangential_n, sparse_operator, Scope, ThresholdPolicy,
    WindowFunctional, WindowKind,
};
use crate::stats::spread;
use crate::variation::jump_count_real;
use crate::weights::{ainfty_characteristic, two_weight, weak_lp_quasinorm, weight_by_name, weighted_norm};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

pub const REPORT_SCHEMA: &str = "varcz-report/1";

/// Kernel evaluations allowed per run.
pub const EVALUATION_BUDGET: u64 = 100_000_000;

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    #[serde(default = "default_kind")]
    pub kind: SpaceKind,
    #[serde(default = "one")]
    pub dimension: usize,
    /// Side counts; the spacing is `extent / side`.
    pub sizes: Vec<usize>,
    #[serde(default = "unit")]
    pub extent: f64,
}

fn default_kind() -> SpaceKind {
    SpaceKind::Euclidean
}
fn one() -> usize {
    1
}
fn unit() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}

impl SpaceConfig {
    pub fn spec(&self, side: usize) -> SpaceSpec {
        let h = self.extent / side as f64;
        match self.kind {
            SpaceKind::Euclidean => SpaceSpec::euclidean(self.dimension, side, h),
            SpaceKind::Heisenberg => SpaceSpec::heisenberg(side, h),
        }
    }

    fn points(&self, side: usize) -> usize {
        match self.kind {
            SpaceKind::Euclidean => side.saturating_pow(self.dimension as u32),
            SpaceKind::Heisenberg => side.saturating_pow(3),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CubesKind {
    Shifted,
    Christ,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubesConfig {
    #[serde(default = "default_cubes")]
    pub kind: CubesKind,
    /// Shift per axis for shifted grids; zeros when empty.
    #[serde(default)]
    pub shift: Vec<u8>,
    /// Used by Christ cubes; shifted grids always use 2.
    #[serde(default = "two")]
    pub kappa: f64,
    /// `[k_min, k_max]`; derived from the grid when absent.
    #[serde(default)]
    pub scales: Option<(i32, i32)>,
}

fn default_cubes() -> CubesKind {
    CubesKind::Shifted
}

impl Default for CubesConfig {
    fn default() -> Self {
        CubesConfig {
            kind: CubesKind::Shifted,
            shift: Vec::new(),
            kappa: 2.0,
            scales: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Averages,
    Singular,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Statistic {
    Variation,
    Jump,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    #[serde(default = "default_mode")]
    pub mode: Mode,
    #[serde(default)]
    pub kernel: Option<String>,
    #[serde(default = "default_statistic")]
    pub statistic: Statistic,
    /// Variation exponents for the domination experiment.
    #[serde(default = "default_r")]
    pub r: Vec<f64>,
    #[serde(default)]
    pub lambda_ladder: Option<Vec<f64>>,
    /// Exponent inside the short variations.
    #[serde(default = "two")]
    pub short_r: f64,
    #[serde(default = "unit")]
    pub aperture: f64,
    /// Also measure the non-tangential jump functional in the weak (1,1) run.
    #[serde(default = "yes")]
    pub jump_analogue: bool,
}

fn default_mode() -> Mode {
    Mode::Averages
}
fn default_statistic() -> Statistic {
    Statistic::Variation
}
fn default_r() -> Vec<f64> {
    vec![3.0]
}
fn yes() -> bool {
    true
}

impl Default for OperatorConfig {
    fn default() -> Self {
        OperatorConfig {
            mode: Mode::Averages,
            kernel: None,
            statistic: Statistic::Variation,
            r: default_r(),
            lambda_ladder: None,
            short_r: 2.0,
            aperture: 1.0,
            jump_analogue: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightConfig {
    /// Weight names swept in order; `sigma = w^(1 - p')`.
    pub sweep: Vec<String>,
    #[serde(default = "two")]
    pub p: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseConfig {
    #[serde(default = "four")]
    pub a: f64,
    #[serde(default = "unit")]
    pub c_w: f64,
    #[serde(default = "four")]
    pub dilate: f64,
    #[serde(default = "default_doublings")]
    pub max_doublings: u32,
    /// Exponent of the sparse operator.
    #[serde(default = "unit")]
    pub exponent: f64,
}

fn four() -> f64 {
    4.0
}
fn default_doublings() -> u32 {
    64
}

impl Default for SparseConfig {
    fn default() -> Self {
        SparseConfig {
            a: 4.0,
            c_w: 1.0,
            dilate: 4.0,
            max_doublings: 64,
            exponent: 1.0,
        }
    }
}

impl SparseConfig {
    pub fn policy(&self) -> ThresholdPolicy {
        ThresholdPolicy {
            a: self.a,
            c_w: self.c_w,
            dilate: self.dilate,
            max_doublings: self.max_doublings,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Thresholds {
    /// Largest allowed max/min of a measured constant across grid sizes.
    #[serde(default = "two")]
    pub size_stability: f64,
    /// Largest allowed max/min of `constant (r-2)/r` over the exponents.
    #[serde(default = "four")]
    pub r_band: f64,
    /// Largest allowed max/min of the weighted ratio over the sweep.
    #[serde(default = "four")]
    pub weight_band: f64,
    /// Smallest required max/min of the characteristic bracket over the sweep.
    #[serde(default = "ten")]
    pub characteristic_growth: f64,
    /// Largest allowed Carleson constant of a built family.
    #[serde(default = "carleson_limit")]
    pub carleson: f64,
}

fn ten() -> f64 {
    10.0
}
fn carleson_limit() -> f64 {
    2.0 + 1e-12
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            size_stability: 2.0,
            r_band: 4.0,
            weight_band: 4.0,
            characteristic_growth: 10.0,
            carleson: carleson_limit(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub space: SpaceConfig,
    #[serde(default)]
    pub cubes: CubesConfig,
    #[serde(default)]
    pub operator: OperatorConfig,
    /// Test functions, see [`function_by_name`].
    pub functions: Vec<String>,
    #[serde(default)]
    pub weights: Option<WeightConfig>,
    #[serde(default)]
    pub sparse: SparseConfig,
    #[serde(default)]
    pub thresholds: Thresholds,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Domination,
    Weak11,
    Weighted,
}

impl Experiment {
    pub fn label(&self) -> &'static str {
        match self {
            Experiment::Domination => "domination",
            Experiment::Weak11 => "weak11",
            Experiment::Weighted => "weighted",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "domination" => Ok(Experiment::Domination),
            "weak11" => Ok(Experiment::Weak11),
            "weighted" => Ok(Experiment::Weighted),
            _ => Err(Error::UnknownName(s.to_string())),
        }
    }
}

impl ExperimentConfig {
    /// Parses JSON, or TOML when the text is not JSON.
    pub fn parse(text: &str) -> Result<Self> {
        let trimmed = text.trim_start();
        if trimmed.starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Checks names, ranges and budgets for the given experiment before any
    /// computation.
    pub fn validate(&self, experiment: Experiment) -> Result<()> {
        if self.space.sizes.is_empty() {
            return config_err("space.sizes is empty");
        }
        if !(self.space.extent > 0.0) {
            return config_err("space.extent must be positive");
        }
        for &side in &self.space.sizes {
            if side < 2 {
                return config_err("grid sizes must be at least 2");
            }
            let pts = self.space.points(side);
            if pts > POINT_BUDGET {
                return Err(Error::PointBudget {
                    requested: pts,
                    budget: POINT_BUDGET,
                });
            }
        }
        if self.functions.is_empty() {
            return config_err("no test functions given");
        }
        let probe = crate::space::build_euclidean_grid(1, 4, 1.0)?;
        for f in &self.functions {
            function_by_name(&probe, f, self.seed)?;
        }
        if let Some(k) = &self.operator.kernel {
            kernel_by_name(k)?;
        }
        if self.operator.mode == Mode::Singular && self.operator.kernel.is_none() {
            return config_err("singular mode needs operator.kernel");
        }
        if let Some(ladder) = &self.operator.lambda_ladder {
            if ladder.is_empty() || ladder.iter().any(|&l| !(l > 0.0)) {
                return config_err("lambda ladder must be nonempty and positive");
            }
        }
        if self.operator.r.iter().any(|&r| !(r >= 1.0)) || self.operator.r.is_empty() {
            return config_err("variation exponents must be at least 1");
        }
        match experiment {
            Experiment::Domination => {
                if self.operator.statistic == Statistic::Jump {
                    if self.operator.lambda_ladder.is_none() {
                        return config_err("jump statistic needs operator.lambda_ladder");
                    }
                    if self.operator.mode == Mode::Singular {
                        return config_err("jump domination is only defined for averages");
                    }
                }
            }
            Experiment::Weak11 => {
                if self.operator.lambda_ladder.is_none() {
                    return config_err("weak (1,1) run needs operator.lambda_ladder");
                }
            }
            Experiment::Weighted => {
                let w = match &self.weights {
                    Some(w) => w,
                    None => return config_err("weighted run needs a [weights] table"),
                };
                if !(w.p > 1.0) {
                    return config_err("weighted bounds need 1 < p < inf");
                }
                if w.sweep.is_empty() {
                    return config_err("weights.sweep is empty");
                }
                for name in &w.sweep {
                    weight_by_name(&probe, name)?;
                }
                if self.operator.lambda_ladder.is_none() {
                    return config_err("weighted run needs operator.lambda_ladder");
                }
                if self.operator.mode != Mode::Averages {
                    return config_err("weighted run uses averages");
                }
            }
        }
        Ok(())
    }

    fn kernel(&self) -> Result<Option<Box<dyn Kernel>>> {
        match (&self.operator.mode, &self.operator.kernel) {
            (Mode::Singular, Some(k)) => Ok(Some(kernel_by_name(k)?)),
            _ => Ok(None),
        }
    }

    /// Kernel evaluations needed by the experiment on a grid of `side`.
    fn evaluations(&self, experiment: Experiment, side: usize) -> u64 {
        if self.operator.mode != Mode::Singular {
            return 0;
        }
        let n = self.space.points(side) as u64;
        let per = match experiment {
            Experiment::Domination => self.operator.r.len() as u64,
            Experiment::Weak11 => self.functions.len() as u64,
            Experiment::Weighted => 0,
        };
        n.saturating_mul(n).saturating_mul(per)
    }

    pub fn build_space(&self, side: usize) -> Result<Arc<Space>> {
        Ok(Arc::new(self.space.spec(side).build()?))
    }

    pub fn build_system(&self, space: Arc<Space>) -> Result<CubeSystem> {
        match self.cubes.kind {
            CubesKind::Shifted => {
                if space.kind() != SpaceKind::Euclidean {
                    return config_err("shifted grids need a Euclidean space");
                }
                let scales = self.cubes.scales.unwrap_or_else(|| {
                    let lo = space.min_spacing().log2().floor() as i32;
                    let hi = (space.diameter() + space.min_spacing()).log2().ceil() as i32;
                    (lo, hi)
                });
                let d = space.coordinate_dimension();
                let shift = if self.cubes.shift.is_empty() { vec![0; d] } else { self.cubes.shift.clone() };
                build_shifted_grid(space, &shift, scales)
            }
            CubesKind::Christ => {
                let kappa = self.cubes.kappa;
                let scales = self.cubes.scales.unwrap_or_else(|| {
                    let lk = |x: f64| x.ln() / kappa.ln();
                    let lo = (lk(space.min_spacing()) - 1e-9).ceil() as i32;
                    let hi = (lk(space.diameter()) + 1e-9).floor() as i32;
                    (lo, hi)
                });
                build_christ_cubes(space, kappa, scales, self.seed)
            }
        }
    }
}

/// Test-function registry. Names have the form `kind[:arg][@seed]`:
/// * `zero`, `const:c`;
/// * `blocks:m`: independent uniform values on `m` equal blocks along the
///   first axis;
/// * `spike`: unit mass at one random location;
/// * `spikes:m`: `m` unit masses;
/// * `noise`: independent uniform values per point;
/// * `bump`: `max(0, 1 - 4|x - mid| / extent)`.
///
/// Block values and spike locations are drawn in continuum coordinates, so
/// the same name and seed give the same function on every grid size.
pub fn function_by_name(space: &Space, name: &str, seed: u64) -> Result<GridFunction> {
    let (body, seed) = match name.split_once('@') {
        Some((b, s)) => (b, s.parse::<u64>().map_err(|_| Error::UnknownName(name.to_string()))?),
        None => (name, seed),
    };
    let (kind, arg) = match body.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (body, None),
    };
    let bad = || Error::UnknownName(name.to_string());
    let n = space.len();
    let (lo, hi) = space.hull();
    let h = space.min_spacing();
    let extent: Vec<f64> = (0..3).map(|a| hi[a] - lo[a] + h).collect();
    let dims = match space.kind() {
        SpaceKind::Euclidean => space.coordinate_dimension(),
        SpaceKind::Heisenberg => 3,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spike_at = |rng: &mut ChaCha8Rng| {
        let mut target = [0.0; 3];
        for a in 0..dims {
            target[a] = lo[a] + rng.gen_range(0.0..1.0) * extent[a];
        }
        space.nearest_point(target)
    };
    match (kind, arg) {
        ("zero", None) => Ok(GridFunction::zeros(n)),
        ("const", Some(c)) => {
            let c: f64 = c.parse().map_err(|_| bad())?;
            GridFunction::new(vec![num_complex::Complex64::new(c, 0.0); n])
        }
        ("blocks", Some(m)) => {
            let m: usize = m.parse().map_err(|_| bad())?;
            if m == 0 {
                return Err(bad());
            }
            let vals: Vec<f64> = (0..m).map(|_| rng.gen_range(0.0..1.0)).collect();
            Ok(GridFunction::from_fn(space, |c| {
                let u = ((c[0] - lo[0]) / extent[0] * m as f64).floor() as usize;
                vals[u.min(m - 1)]
            }))
        }
        ("spike", None) | ("spikes", Some(_)) => {
            let m: usize = match arg {
                Some(a) => a.parse().map_err(|_| bad())?,
                None => 1,
            };
            let mut f = GridFunction::zeros(n);
            for _ in 0..m {
                let x = spike_at(&mut rng);
                let v = f.get(x) + 1.0 / space.weight(x);
                f.set(x, v);
            }
            Ok(f)
        }
        ("noise", None) => GridFunction::from_real(&(0..n).map(|_| rng.gen_range(0.0..1.0)).collect::<Vec<_>>()),
        ("bump", None) => {
            let mid = 0.5 * (lo[0] + hi[0]);
            Ok(GridFunction::from_fn(space, |c| (1.0 - 4.0 * (c[0] - mid).abs() / extent[0]).max(0.0)))
        }
        _ => Err(bad()),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Assertion {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    /// `"<"`, `"<="` or `">="`.
    pub relation: String,
    pub pass: bool,
}

impl Assertion {
    fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Assertion {
            name: name.into(),
            value,
            threshold,
            relation: "<".into(),
            pass: value < threshold,
        }
    }

    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Assertion {
            name: name.into(),
            value,
            threshold,
            relation: "<=".into(),
            pass: value <= threshold,
        }
    }

    fn at_least(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Assertion {
            name: name.into(),
            value,
            threshold,
            relation: ">=".into(),
            pass: value >= threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: String,
    pub experiment: Experiment,
    pub name: String,
    pub config_hash: String,
    pub versions: BTreeMap<String, String>,
    pub config: ExperimentConfig,
    /// `"complete"` or `"partial"`.
    pub status: String,
    pub failure: Option<String>,
    pub constants: BTreeMap<String, f64>,
    pub assertions: Vec<Assertion>,
    pub pass: bool,
    pub results: serde_json::Value,
}

impl Report {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

pub fn versions() -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    m.insert("varcz".into(), env!("CARGO_PKG_VERSION").into());
    m.insert("space-doc".into(), SPACE_DOC_VERSION.to_string());
    m.insert("cubes-doc".into(), CUBES_DOC_VERSION.to_string());
    m.insert("report".into(), REPORT_SCHEMA.into());
    m
}

/// A report with its CSV table.
#[derive(Clone, Debug, PartialEq)]
pub struct Output {
    pub report: Report,
    pub csv: String,
}

impl Output {
    /// Writes `<name>.json` and `<name>.csv` into `dir`, each through a
    /// temporary file and a rename.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        std::fs::create_dir_all(dir)?;
        let base = format!("{}-{}", self.report.name, self.report.experiment.label());
        let json = dir.join(format!("{base}.json"));
        let csv = dir.join(format!("{base}.csv"));
        write_atomic(&json, &self.report.to_json()?)?;
        write_atomic(&csv, &self.csv)?;
        Ok((json, csv))
    }
}

fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, text)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct Csv {
    text: String,
}

impl Csv {
    fn new(header: &[&str]) -> Self {
        Csv {
            text: header.join(",") + "\n",
        }
    }

    fn row(&mut self, cells: &[String]) {
        self.text += &cells.join(",");
        self.text.push('\n');
    }
}

fn finish(
    config: &ExperimentConfig,
    experiment: Experiment,
    failure: Option<String>,
    constants: BTreeMap<String, f64>,
    assertions: Vec<Assertion>,
    results: serde_json::Value,
    csv: Csv,
) -> Output {
    let pass = failure.is_none() && assertions.iter().all(|a| a.pass);
    Output {
        report: Report {
            schema: REPORT_SCHEMA.into(),
            experiment,
            name: config.name.clone(),
            config_hash: config.hash(),
            versions: versions(),
            config: config.clone(),
            status: if failure.is_none() { "complete" } else { "partial" }.into(),
            failure,
            constants,
            assertions,
            pass,
            results,
        },
        csv: csv.text,
    }
}

/// Checks the evaluation budget for the next grid size.
fn budget_check(config: &ExperimentConfig, experiment: Experiment, side: usize, used: &mut u64) -> Option<String> {
    let need = config.evaluations(experiment, side);
    if used.saturating_add(need) > EVALUATION_BUDGET {
        return Some(
            Error::EvaluationBudget {
                requested: used.saturating_add(need),
                budget: EVALUATION_BUDGET,
            }
            .to_string(),
        );
    }
    *used += need;
    None
}

fn num(v: f64) -> String {
    format!("{v:e}")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DominationRow {
    pub size: usize,
    pub points: usize,
    /// `r` for variations, `lambda` for jumps.
    pub parameter: f64,
    pub max_ratio: f64,
    pub median_ratio: f64,
    pub family_size: usize,
    pub carleson: f64,
    pub witness: bool,
    pub violations: usize,
}

/// Builds the lhs field, the sparse family and the ratio for every grid size
/// and every exponent (or every `lambda` of the ladder).
pub fn run_domination_experiment(config: &ExperimentConfig) -> Result<Output> {
    let exp = Experiment::Domination;
    config.validate(exp)?;
    let kernel = config.kernel()?;
    let jump = config.operator.statistic == Statistic::Jump;
    let params: Vec<f64> = if jump {
        config.operator.lambda_ladder.clone().unwrap_or_default()
    } else {
        config.operator.r.clone()
    };
    let policy = config.sparse.policy();
    let mut rows: Vec<DominationRow> = Vec::new();
    let mut csv = Csv::new(&["size", "parameter", "point", "lhs", "rhs", "ratio"]);
    let mut used = 0u64;
    let mut failure = None;
    let mut done_sizes = Vec::new();
    for &side in &config.space.sizes {
        if let Some(f) = budget_check(config, exp, side, &mut used) {
            failure = Some(f);
            break;
        }
        let space = config.build_space(side)?;
        let system = config.build_system(space.clone())?;
        let f = function_by_name(&space, &config.functions[0], config.seed)?;
        let k0 = system.k_max();
        for &p in &params {
            let kind = match (&kernel, jump) {
                (_, true) => WindowKind::JumpAv { lambda: p },
                (Some(k), false) => WindowKind::VarTsi { r: p, kernel: k.as_ref() },
                (None, false) => WindowKind::VarAv { r: p },
            };
            let functional = WindowFunctional::new(&system, &f, kind)?;
            let lhs = functional.pointwise();
            let family = build_sparse_family(&system, &functional, &f, k0, &policy)?;
            let rhs = sparse_operator(&system, &family.cubes, &f, config.sparse.exponent, policy.dilate)?;
            let rep = domination_from(&lhs, &rhs);
            for x in 0..space.len() {
                csv.row(&[side.to_string(), num(p), x.to_string(), num(lhs[x]), num(rhs[x]), num(rep.ratios[x])]);
            }
            rows.push(DominationRow {
                size: side,
                points: space.len(),
                parameter: p,
                max_ratio: rep.max_ratio,
                median_ratio: rep.median,
                family_size: family.cubes.len(),
                carleson: family.carleson,
                witness: family.witness.is_success(),
                violations: rep.violations.len(),
            });
        }
        done_sizes.push(side);
    }

    let th = &config.thresholds;
    let mut constants = BTreeMap::new();
    let mut assertions = Vec::new();
    let finite = rows.iter().all(|r| r.max_ratio.is_finite());
    assertions.push(Assertion::at_most(
        "finite-constants",
        if finite { 0.0 } else { 1.0 },
        0.0,
    ));
    let carleson = rows.iter().map(|r| r.carleson).fold(0.0, f64::max);
    assertions.push(Assertion::at_most("carleson", carleson, th.carleson));
    let witnesses = rows.iter().filter(|r| !r.witness).count();
    assertions.push(Assertion::at_most("witness-failures", witnesses as f64, 0.0));

    // Per-size constant: one per exponent, or the max over the ladder.
    let per_size = |sel: &dyn Fn(&DominationRow) -> bool| -> Vec<f64> {
        done_sizes
            .iter()
            .map(|&s| {
                rows.iter()
                    .filter(|r| r.size == s && sel(r))
                    .map(|r| r.max_ratio)
                    .fold(0.0, f64::max)
            })
            .collect()
    };
    if jump {
        let c = per_size(&|_| true);
        for (s, v) in done_sizes.iter().zip(&c) {
            constants.insert(format!("constant/size={s}"), *v);
        }
        assertions.push(Assertion::below("size-stability", spread(&c), th.size_stability));
    } else {
        for &r in &params {
            let c = per_size(&|row| row.parameter == r);
            for (s, v) in done_sizes.iter().zip(&c) {
                constants.insert(format!("constant/r={r}/size={s}"), *v);
            }
            assertions.push(Assertion::below(format!("size-stability/r={r}"), spread(&c), th.size_stability));
        }
        if params.len() > 1 && params.iter().all(|&r| r > 2.0) {
            for &s in &done_sizes {
                let scaled: Vec<f64> = params
                    .iter()
                    .map(|&r| {
                        let c = rows
                            .iter()
                            .find(|row| row.size == s && row.parameter == r)
                            .map_or(0.0, |row| row.max_ratio);
                        c * (r - 2.0) / r
                    })
                    .collect();
                assertions.push(Assertion::below(format!("r-band/size={s}"), spread(&scaled), th.r_band));
            }
        }
    }
    let results = serde_json::json!({ "rows": rows });
    Ok(finish(config, exp, failure, constants, assertions, results, csv))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Weak11Row {
    pub size: usize,
    pub function: String,
    pub l1: f64,
    /// `sup_lambda lambda mu{Sf > lambda} / ||f||_1`, exact.
    pub constant: f64,
    /// The same quotient at each ladder value.
    pub ladder: Vec<(f64, f64)>,
    /// `max over the ladder of sup_nu nu mu{N F_lambda > nu} / ||f||_1`.
    pub jump_constant: Option<f64>,
}

/// Weak type (1,1) of the short variation square function over a
/// `lambda` ladder, for every function and grid size.
pub fn run_weak11_experiment(config: &ExperimentConfig) -> Result<Output> {
    let exp = Experiment::Weak11;
    config.validate(exp)?;
    let kernel = config.kernel()?;
    let ladder = config.operator.lambda_ladder.clone().unwrap_or_default();
    let opts = ShortVarOptions {
        r: config.operator.short_r,
        aperture: config.operator.aperture,
        homogeneous: false,
    };
    let mut rows: Vec<Weak11Row> = Vec::new();
    let mut csv = Csv::new(&["size", "function", "lambda", "level_measure", "quotient"]);
    let mut used = 0u64;
    let mut failure = None;
    let mut done_sizes = Vec::new();
    for &side in &config.space.sizes {
        if let Some(f) = budget_check(config, exp, side, &mut used) {
            failure = Some(f);
            break;
        }
        let space = config.build_space(side)?;
        let system = config.build_system(space.clone())?;
        let family = match &kernel {
            Some(k) => Family::Singular(k.as_ref()),
            None => Family::Averages,
        };
        for name in &config.functions {
            let f = function_by_name(&space, name, config.seed)?;
            let l1 = f.norm_l1(&space);
            let s = GridFunction::from_real(&short_variation_square(&system, &f, family, &opts)?)?;
            let sup = weak_lp_quasinorm(&space, &s, 1.0, None)?;
            let q = |v: f64| if l1 > 0.0 { v / l1 } else { 0.0 };
            let mut lad = Vec::new();
            for &lam in &ladder {
                let m: f64 = (0..space.len())
                    .filter(|&x| s.get(x).re > lam)
                    .map(|x| space.weight(x))
                    .sum();
                csv.row(&[side.to_string(), name.clone(), num(lam), num(m), num(q(lam * m))]);
                lad.push((lam, q(lam * m)));
            }
            let jump_constant = if config.operator.jump_analogue && kernel.is_none() {
                let mut best = 0.0f64;
                for &lam in &ladder {
                    let fl = WindowFunctional::new(&system, &f, WindowKind::JumpAv { lambda: lam })?;
                    let nf = GridFunction::from_real(&nontangential_n(&system, &fl, Scope::Global)?)?;
                    best = best.max(q(weak_lp_quasinorm(&space, &nf, 1.0, None)?));
                }
                Some(best)
            } else {
                None
            };
            rows.push(Weak11Row {
                size: side,
                function: name.clone(),
                l1,
                constant: q(sup),
                ladder: lad,
                jump_constant,
            });
        }
        done_sizes.push(side);
    }

    let th = &config.thresholds;
    let mut constants = BTreeMap::new();
    let mut assertions = Vec::new();
    let finite = rows.iter().all(|r| r.constant.is_finite());
    assertions.push(Assertion::at_most("finite-constants", if finite { 0.0 } else { 1.0 }, 0.0));
    let mut worst = 1.0f64;
    let mut worst_jump = 1.0f64;
    for name in &config.functions {
        let c: Vec<f64> = rows.iter().filter(|r| &r.function == name).map(|r| r.constant).collect();
        let cj: Vec<f64> = rows
            .iter()
            .filter(|r| &r.function == name)
            .filter_map(|r| r.jump_constant)
            .collect();
        constants.insert(format!("constant/{name}"), c.iter().cloned().fold(0.0, f64::max));
        worst = worst.max(spread(&c));
        if !cj.is_empty() {
            constants.insert(format!("jump-constant/{name}"), cj.iter().cloned().fold(0.0, f64::max));
            worst_jump = worst_jump.max(spread(&cj));
        }
    }
    assertions.push(Assertion::below("size-stability", worst, th.size_stability));
    constants.insert("jump-size-spread".into(), worst_jump);
    let results = serde_json::json!({ "rows": rows, "sizes": done_sizes });
    Ok(finish(config, exp, failure, constants, assertions, results, csv))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedRow {
    pub size: usize,
    pub weight: String,
    pub two_weight: f64,
    pub ainfty_w: f64,
    pub ainfty_sigma: f64,
    /// `[w,sigma]^(1/p) ([w]_inf^(1/p') + [sigma]_inf^(1/p))`.
    pub bracket: f64,
    /// `max over the ladder of ||lambda sqrt(N_lambda(A_t(f sigma)))||_{L^p(w)}`.
    pub lhs: f64,
    pub f_norm: f64,
    pub ratio: f64,
}

/// Weighted jump bound for averages across a weight sweep.
pub fn run_weighted_experiment(config: &ExperimentConfig) -> Result<Output> {
    let exp = Experiment::Weighted;
    config.validate(exp)?;
    let wc = config.weights.as_ref().expect("validated");
    let p = wc.p;
    let pp = p / (p - 1.0);
    let ladder = config.operator.lambda_ladder.clone().unwrap_or_default();
    let mut rows: Vec<WeightedRow> = Vec::new();
    let mut csv = Csv::new(&[
        "size",
        "weight",
        "two_weight",
        "ainfty_w",
        "ainfty_sigma",
        "bracket",
        "lhs",
        "f_norm",
        "ratio",
    ]);
    for &side in &config.space.sizes {
        let space = config.build_space(side)?;
        let system = config.build_system(space.clone())?;
        let f = function_by_name(&space, &config.functions[0], config.seed)?;
        for name in &wc.sweep {
            let w = weight_by_name(&space, name)?;
            let sigma = w.dual(p)?;
            let fs = f.mul(&GridFunction::from_real(sigma.values())?);
            let profiles: Vec<Vec<f64>> = (0..space.len())
                .map(|x| Profile::new(&space, &fs, x, Family::Averages).map(|pr| pr.values.iter().map(|v| v.re).collect()))
                .collect::<Result<_>>()?;
            let mut lhs = 0.0f64;
            for &lam in &ladder {
                let g: Vec<f64> = profiles
                    .iter()
                    .map(|vals| lam * (jump_count_real(vals, lam) as f64).sqrt())
                    .collect();
                lhs = lhs.max(weighted_norm(&space, &GridFunction::from_real(&g)?, &w, p)?);
            }
            let tw = two_weight(&system, &w, &sigma, p)?;
            let aw = ainfty_characteristic(&system, &w)?;
            let asg = ainfty_characteristic(&system, &sigma)?;
            let bracket = tw.powf(1.0 / p) * (aw.powf(1.0 / pp) + asg.powf(1.0 / p));
            let f_norm = weighted_norm(&space, &f, &sigma, p)?;
            let denom = bracket * f_norm;
            let ratio = if denom > 0.0 { lhs / denom } else { 0.0 };
            csv.row(&[
                side.to_string(),
                name.clone(),
                num(tw),
                num(aw),
                num(asg),
                num(bracket),
                num(lhs),
                num(f_norm),
                num(ratio),
            ]);
            rows.push(WeightedRow {
                size: side,
                weight: name.clone(),
                two_weight: tw,
                ainfty_w: aw,
                ainfty_sigma: asg,
                bracket,
                lhs,
                f_norm,
                ratio,
            });
        }
    }
    let th = &config.thresholds;
    let mut constants = BTreeMap::new();
    let mut assertions = Vec::new();
    for &side in &config.space.sizes {
        let sel: Vec<&WeightedRow> = rows.iter().filter(|r| r.size == side).collect();
        let ratios: Vec<f64> = sel.iter().map(|r| r.ratio).collect();
        let brackets: Vec<f64> = sel.iter().map(|r| r.bracket).collect();
        let growth = |v: Vec<f64>| spread(&v);
        constants.insert(format!("max-ratio/size={side}"), ratios.iter().cloned().fold(0.0, f64::max));
        constants.insert(
            format!("two-weight-growth/size={side}"),
            growth(sel.iter().map(|r| r.two_weight).collect()),
        );
        constants.insert(
            format!("ainfty-w-growth/size={side}"),
            growth(sel.iter().map(|r| r.ainfty_w).collect()),
        );
        constants.insert(
            format!("ainfty-sigma-growth/size={side}"),
            growth(sel.iter().map(|r| r.ainfty_sigma).collect()),
        );
        assertions.push(Assertion::below(format!("ratio-band/size={side}"), spread(&ratios), th.weight_band));
        assertions.push(Assertion::at_least(
            format!("characteristic-growth/size={side}"),
            spread(&brackets),
            th.characteristic_growth,
        ));
    }
    let results = serde_json::json!({ "rows": rows });
    Ok(finish(config, exp, None, constants, assertions, results, csv))
}

/// Dispatches to the experiment runner.
pub fn run_experiment(experiment: Experiment, config: &ExperimentConfig) -> Result<Output> {
    match experiment {
        Experiment::Domination => run_domination_experiment(config),
        Experiment::Weak11 => run_weak11_experiment(config),
        Experiment::Weighted => run_weighted_experiment(config),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> ExperimentConfig {
        ExperimentConfig::parse(
            r#"
            name = "t"
            functions = ["blocks:8"]
            [space]
            sizes = [32, 64]
            [operator]
            r = [3.0]
            lambda_ladder = [0.5, 0.25]
            "#,
        )
        .unwrap()
    }

    #[test]
    fn functions_are_size_consistent() {
        let a = crate::space::build_euclidean_grid(1, 16, 1.0 / 16.0).unwrap();
        let b = crate::space::build_euclidean_grid(1, 32, 1.0 / 32.0).unwrap();
        let fa = function_by_name(&a, "blocks:4@9", 0).unwrap();
        let fb = function_by_name(&b, "blocks:4@9", 0).unwrap();
        for i in 0..16 {
            assert_eq!(fa.get(i), fb.get(2 * i));
        }
        let s = function_by_name(&b, "spike@3", 0).unwrap();
        assert!((s.integral(&b).re - 1.0).abs() < 1e-12);
        assert!(function_by_name(&b, "nope", 0).is_err());
    }

    #[test]
    fn zero_function_passes() {
        let mut c = base();
        c.functions = vec!["zero".into()];
        let out = run_domination_experiment(&c).unwrap();
        assert!(out.report.pass, "{:?}", out.report.assertions);
        assert!(out.report.constants.values().all(|&v| v == 0.0));
    }

    #[test]
    fn config_errors() {
        let mut c = base();
        c.operator.kernel = Some("no-such-kernel".into());
        assert!(run_domination_experiment(&c).is_err());
        let mut c = base();
        c.operator.lambda_ladder = None;
        assert!(matches!(run_weak11_experiment(&c), Err(Error::Config(_))));
        let mut c = base();
        c.weights = Some(WeightConfig {
            sweep: vec!["const".into()],
            p: 1.0,
        });
        assert!(matches!(run_weighted_experiment(&c), Err(Error::Config(_))));
    }

    #[test]
    fn deterministic_reports() {
        let c = base();
        let a = run_domination_experiment(&c).unwrap();
        let b = run_domination_experiment(&c).unwrap();
        assert_eq!(a.report.to_json().unwrap(), b.report.to_json().unwrap());
        assert_eq!(a.csv, b.csv);
    }
}
