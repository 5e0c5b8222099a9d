use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use varcz::dyadic::{
    build_christ_cubes, build_shifted_grid, measure_small_boundary, verify_cube_axioms, BoundaryTarget, CubeSystem,
};
use varcz::harness::{function_by_name, Experiment, ExperimentConfig};
use varcz::operators::{
    averages_on_grid, kernel_by_name, orthogonality_decay, short_variation_square, truncations_on_grid, Family,
    ShortVarOptions, TruncationGrid,
};
use varcz::space::{check_holder_metric, check_quasi_triangle, check_regularity};
use varcz::sparse::{build_sparse_family, domination_from, sparse_operator, ThresholdPolicy, WindowFunctional, WindowKind};
use varcz::variation::{jump_count, r_variation, Sample};
use varcz::weights::{ainfty_characteristic, ap_characteristic, weight_by_name};
use varcz::{Error, Space, SpaceKind, SpaceSpec};

#[derive(Parser)]
#[command(name = "varcz", version, about = "Variation, jump and sparse-domination experiments on discrete spaces")]
struct Cli {
    /// Experiment configuration (TOML or JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; results go to stdout when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Accepted for compatibility; computations run on one thread.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    module: Module,
}

#[derive(Subcommand)]
enum Module {
    /// Discrete spaces.
    Space {
        #[command(subcommand)]
        verb: SpaceVerb,
    },
    /// Dyadic cube systems.
    Cubes {
        #[command(subcommand)]
        verb: CubesVerb,
    },
    /// Variation and jumps of a single sequence.
    Var {
        #[command(subcommand)]
        verb: VarVerb,
    },
    /// Averaging and singular-integral operators.
    Op {
        #[command(subcommand)]
        verb: OpVerb,
    },
    /// Sparse families and domination.
    Sparse {
        #[command(subcommand)]
        verb: SparseVerb,
    },
    /// Weight characteristics.
    Weights {
        #[command(subcommand)]
        verb: WeightsVerb,
    },
    /// Configured experiments.
    Harness {
        #[command(subcommand)]
        verb: HarnessVerb,
    },
}

#[derive(Subcommand)]
enum SpaceVerb {
    /// Writes a space document.
    Build {
        #[arg(long, default_value = "euclidean")]
        kind: String,
        #[arg(long, default_value_t = 1)]
        dimension: usize,
        #[arg(long)]
        side: usize,
        #[arg(long)]
        spacing: f64,
    },
    /// Measures regularity, the quasi-triangle constant and Hölder regularity.
    Check {
        #[arg(long)]
        space: PathBuf,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
}

#[derive(Args)]
struct SystemArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long)]
    system: PathBuf,
}

#[derive(Subcommand)]
enum CubesVerb {
    /// Builds a shifted grid (`kappa` 2) or Christ cubes.
    Build {
        #[arg(long)]
        space: PathBuf,
        #[arg(long, default_value = "shifted")]
        kind: String,
        /// Shift per axis, e.g. `0,1`.
        #[arg(long, default_value = "")]
        shift: String,
        #[arg(long, default_value_t = 2.0)]
        kappa: f64,
        /// `a:b`.
        #[arg(long, allow_hyphen_values = true)]
        scales: String,
    },
    /// Checks the dyadic axioms; fails when one is violated.
    Verify {
        #[command(flatten)]
        sys: SystemArgs,
    },
    /// Measures the small-boundary property.
    Boundary {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, value_delimiter = ',', default_value = "0.02,0.05,0.1,0.2")]
        taus: Vec<f64>,
    },
}

#[derive(Subcommand)]
enum VarVerb {
    /// r-variation and jump count of comma-separated values.
    Compute {
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        values: Vec<f64>,
        #[arg(long, default_value_t = 2.0)]
        r: f64,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        homogeneous: bool,
    },
}

#[derive(Args)]
struct GridArgs {
    #[arg(long)]
    space: PathBuf,
    #[arg(long, default_value = "blocks:8")]
    function: String,
    /// Comma-separated radii, or `lo:hi:count` for a geometric grid.
    #[arg(long)]
    t: String,
}

#[derive(Subcommand)]
enum OpVerb {
    /// `A_t f(x)` for every point and radius.
    Average {
        #[command(flatten)]
        grid: GridArgs,
    },
    /// `T_t f(x)` for every point and radius.
    Tsi {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long)]
        kernel: String,
    },
    /// Short variation square function.
    Shortvar {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value = "blocks:8")]
        function: String,
        #[arg(long)]
        kernel: Option<String>,
        #[arg(long, default_value_t = 2.0)]
        r: f64,
    },
    /// Almost-orthogonality of the smooth dyadic pieces.
    Orth {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        kernel: String,
        #[arg(long, default_value_t = 2.0)]
        kappa: f64,
        #[arg(long, allow_hyphen_values = true)]
        scales: String,
        #[arg(long, default_value_t = 4)]
        max_gap: u32,
    },
}

#[derive(Args)]
struct SparseArgs {
    #[command(flatten)]
    sys: SystemArgs,
    /// `var-av`, `var-tsi` or `jump-av`.
    #[arg(long, default_value = "var-av")]
    functional: String,
    #[arg(long, default_value_t = 3.0)]
    r: f64,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long, default_value = "blocks:8")]
    function: String,
}

#[derive(Subcommand)]
enum SparseVerb {
    /// Builds the stopping-time family from the top scale.
    Build {
        #[command(flatten)]
        args: SparseArgs,
    },
    /// Builds the family and compares the functional with the sparse operator.
    Verify {
        #[command(flatten)]
        args: SparseArgs,
    },
}

#[derive(Subcommand)]
enum WeightsVerb {
    /// A_p and A_inf characteristics of a named weight.
    Char {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long)]
        weight: String,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
    },
}

#[derive(Subcommand)]
enum HarnessVerb {
    Domination,
    Weak11,
    Weighted,
}

enum Failure {
    Assertion(String),
    Config(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Config(e)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Config(e.into())
    }
}

type Outcome = std::result::Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn emit(cli: &Cli, name: &str, text: &str) -> anyhow::Result<()> {
    match &cli.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(name);
            let tmp = path.with_extension("tmp");
            std::fs::write(&tmp, text)?;
            std::fs::rename(&tmp, &path)?;
        }
        None => println!("{text}"),
    }
    Ok(())
}

fn emit_json<T: serde::Serialize>(cli: &Cli, name: &str, value: &T) -> anyhow::Result<()> {
    emit(cli, name, &serde_json::to_string_pretty(value)?)
}

fn load_space(path: &Path) -> anyhow::Result<Arc<Space>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Arc::new(SpaceSpec::from_json(&text)?.build()?))
}

fn load_system(sys: &SystemArgs) -> anyhow::Result<CubeSystem> {
    let space = load_space(&sys.space)?;
    let text = std::fs::read_to_string(&sys.system).with_context(|| format!("reading {}", sys.system.display()))?;
    Ok(CubeSystem::from_json(space, &text)?)
}

fn parse_scales(s: &str) -> anyhow::Result<(i32, i32)> {
    let (a, b) = s.split_once(':').context("scales must look like a:b")?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

fn parse_grid(space: &Space, t: &str) -> anyhow::Result<TruncationGrid> {
    let parts: Vec<&str> = t.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].parse()?;
        let hi: f64 = parts[1].parse()?;
        let count: usize = parts[2].parse()?;
        return Ok(TruncationGrid::geometric(lo, hi, count)?);
    }
    if t == "span" {
        return Ok(TruncationGrid::spanning(space, 32)?);
    }
    let radii = t
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(TruncationGrid::new(radii)?)
}

fn window_kind<'a>(args: &SparseArgs, kernel: &'a Option<Box<dyn varcz::operators::Kernel>>) -> anyhow::Result<WindowKind<'a>> {
    Ok(match args.functional.as_str() {
        "var-av" => WindowKind::VarAv { r: args.r },
        "var-tsi" => WindowKind::VarTsi {
            r: args.r,
            kernel: kernel.as_deref().context("var-tsi needs --kernel")?,
        },
        "jump-av" => WindowKind::JumpAv {
            lambda: args.lambda.context("jump-av needs --lambda")?,
        },
        other => anyhow::bail!("unknown functional {other}"),
    })
}

fn run(cli: &Cli) -> Outcome {
    match &cli.module {
        Module::Space { verb } => match verb {
            SpaceVerb::Build {
                kind,
                dimension,
                side,
                spacing,
            } => {
                let spec = match kind.as_str() {
                    "euclidean" => SpaceSpec::euclidean(*dimension, *side, *spacing),
                    "heisenberg" => SpaceSpec::heisenberg(*side, *spacing),
                    other => return Err(Error::UnknownName(other.to_string()).into()),
                };
                spec.build()?;
                emit(cli, "space.json", &spec.to_json()?)?;
            }
            SpaceVerb::Check { space, samples } => {
                let space = load_space(space)?;
                let h = space.min_spacing();
                let radii: Vec<f64> = (0..8).map(|i| 4.0 * h * 10f64.powf(i as f64 / 7.0)).collect();
                let c = space.central_point();
                let regularity = check_regularity(&space, &radii, &[c])?;
                let quasi = check_quasi_triangle(&space, *samples, cli.seed);
                let holder = check_holder_metric(&space, 1.0, *samples, cli.seed)?;
                emit_json(
                    cli,
                    "space-check.json",
                    &serde_json::json!({ "regularity": regularity, "quasi_triangle": quasi, "holder": holder }),
                )?;
                if quasi.violations > 0 {
                    return Err(Failure::Assertion(format!("{} quasi-triangle violations", quasi.violations)));
                }
            }
        },
        Module::Cubes { verb } => match verb {
            CubesVerb::Build {
                space,
                kind,
                shift,
                kappa,
                scales,
            } => {
                let space = load_space(space)?;
                let scales = parse_scales(scales)?;
                let system = match kind.as_str() {
                    "shifted" => {
                        if space.kind() != SpaceKind::Euclidean {
                            return Err(Error::IncompatibleSpace("shifted grids need a Euclidean space".into()).into());
                        }
                        let alpha: Vec<u8> = if shift.is_empty() {
                            vec![0; space.coordinate_dimension()]
                        } else {
                            shift
                                .split(',')
                                .map(|s| s.trim().parse::<u8>())
                                .collect::<std::result::Result<_, _>>()
                                .map_err(anyhow::Error::from)?
                        };
                        build_shifted_grid(space, &alpha, scales)?
                    }
                    "christ" => build_christ_cubes(space, *kappa, scales, cli.seed)?,
                    other => return Err(Error::UnknownName(other.to_string()).into()),
                };
                emit(cli, "cubes.json", &system.to_json()?)?;
            }
            CubesVerb::Verify { sys } => {
                let system = load_system(sys)?;
                let report = verify_cube_axioms(&system);
                emit_json(cli, "axioms.json", &report)?;
                if !report.all_pass() {
                    return Err(Failure::Assertion("dyadic axioms violated".into()));
                }
            }
            CubesVerb::Boundary { sys, taus } => {
                let system = load_system(sys)?;
                let report = measure_small_boundary(BoundaryTarget::System(&system), taus)?;
                emit_json(cli, "boundary.json", &report)?;
                if !report.holds {
                    return Err(Failure::Assertion("fitted boundary exponent is not positive".into()));
                }
            }
        },
        Module::Var { verb } => match verb {
            VarVerb::Compute {
                values,
                r,
                lambda,
                homogeneous,
            } => {
                let sample = Sample::from_real(values)?;
                let v = r_variation(&sample, *r, *homogeneous)?;
                let n = match lambda {
                    Some(l) => Some(jump_count(&sample, *l)?),
                    None => None,
                };
                emit_json(cli, "variation.json", &serde_json::json!({ "r": r, "variation": v, "lambda": lambda, "jumps": n }))?;
            }
        },
        Module::Op { verb } => match verb {
            OpVerb::Average { grid } => {
                let space = load_space(&grid.space)?;
                let f = function_by_name(&space, &grid.function, cli.seed)?;
                let t = parse_grid(&space, &grid.t)?;
                let mut rows = Vec::with_capacity(space.len());
                for x in 0..space.len() {
                    let v = averages_on_grid(&space, &f, x, &t)?;
                    rows.push(v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>());
                }
                emit_json(cli, "average.json", &serde_json::json!({ "radii": t.radii(), "values": rows }))?;
            }
            OpVerb::Tsi { grid, kernel } => {
                let space = load_space(&grid.space)?;
                let kernel = kernel_by_name(kernel)?;
                let f = function_by_name(&space, &grid.function, cli.seed)?;
                let t = parse_grid(&space, &grid.t)?;
                let mut rows = Vec::with_capacity(space.len());
                for x in 0..space.len() {
                    let v = truncations_on_grid(&space, kernel.as_ref(), &f, x, &t)?;
                    rows.push(v.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>());
                }
                emit_json(cli, "tsi.json", &serde_json::json!({ "radii": t.radii(), "values": rows }))?;
            }
            OpVerb::Shortvar {
                sys,
                function,
                kernel,
                r,
            } => {
                let system = load_system(sys)?;
                let f = function_by_name(system.space(), function, cli.seed)?;
                let kernel = kernel.as_deref().map(kernel_by_name).transpose()?;
                let family = match &kernel {
                    Some(k) => Family::Singular(k.as_ref()),
                    None => Family::Averages,
                };
                let opts = ShortVarOptions {
                    r: *r,
                    ..ShortVarOptions::default()
                };
                let s = short_variation_square(&system, &f, family, &opts)?;
                emit_json(cli, "shortvar.json", &s)?;
            }
            OpVerb::Orth {
                space,
                kernel,
                kappa,
                scales,
                max_gap,
            } => {
                let space = load_space(space)?;
                let kernel = kernel_by_name(kernel)?;
                let report = orthogonality_decay(&space, kernel.as_ref(), *kappa, parse_scales(scales)?, *max_gap)?;
                emit_json(cli, "orthogonality.json", &report)?;
            }
        },
        Module::Sparse { verb } => {
            let (args, verify) = match verb {
                SparseVerb::Build { args } => (args, false),
                SparseVerb::Verify { args } => (args, true),
            };
            let system = load_system(&args.sys)?;
            let f = function_by_name(system.space(), &args.function, cli.seed)?;
            let kernel = args.kernel.as_deref().map(kernel_by_name).transpose()?;
            let functional = WindowFunctional::new(&system, &f, window_kind(args, &kernel)?)?;
            let policy = ThresholdPolicy::default();
            let family = build_sparse_family(&system, &functional, &f, system.k_max(), &policy)?;
            if !verify {
                emit(cli, "sparse.json", &family.to_json()?)?;
                return Ok(());
            }
            let lhs = functional.pointwise();
            let rhs = sparse_operator(&system, &family.cubes, &f, 1.0, policy.dilate)?;
            let report = domination_from(&lhs, &rhs);
            let mut csv = String::from("point,lhs,rhs,ratio\n");
            for x in 0..lhs.len() {
                csv += &format!("{x},{:e},{:e},{:e}\n", lhs[x], rhs[x], report.ratios[x]);
            }
            emit_json(cli, "domination.json", &report)?;
            if cli.out.is_some() {
                emit(cli, "domination.csv", &csv)?;
            }
            if !report.violations.is_empty() {
                return Err(Failure::Assertion(format!(
                    "{} points with positive lhs and zero sparse bound",
                    report.violations.len()
                )));
            }
        }
        Module::Weights { verb } => match verb {
            WeightsVerb::Char { sys, weight, p } => {
                let system = load_system(sys)?;
                let w = weight_by_name(system.space(), weight)?;
                let ap = ap_characteristic(&system, &w, *p)?;
                let ainf = ainfty_characteristic(&system, &w)?;
                emit_json(
                    cli,
                    "characteristics.json",
                    &serde_json::json!({ "weight": weight, "p": p, "ap": ap, "ainfty": ainf }),
                )?;
            }
        },
        Module::Harness { verb } => {
            let experiment = match verb {
                HarnessVerb::Domination => Experiment::Domination,
                HarnessVerb::Weak11 => Experiment::Weak11,
                HarnessVerb::Weighted => Experiment::Weighted,
            };
            let path = cli.config.as_ref().context("harness runs need --config")?;
            let mut config = ExperimentConfig::load(path)?;
            if cli.seed != 0 {
                config.seed = cli.seed;
            }
            let out = varcz::harness::run_experiment(experiment, &config)?;
            match &cli.out {
                Some(dir) => {
                    let (json, csv) = out.write(dir)?;
                    eprintln!("wrote {} and {}", json.display(), csv.display());
                }
                None => println!("{}", out.report.to_json()?),
            }
            let failed: Vec<String> = out
                .report
                .assertions
                .iter()
                .filter(|a| !a.pass)
                .map(|a| format!("{} = {} ({} {})", a.name, a.value, a.relation, a.threshold))
                .collect();
            if let Some(f) = &out.report.failure {
                return Err(Failure::Assertion(format!("partial report: {f}")));
            }
            if !failed.is_empty() {
                return Err(Failure::Assertion(failed.join("; ")));
            }
        }
    }
    Ok(())
}
