use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use stable_clt::attraction::{sample_law, Law, LawSpec};
use stable_clt::bounds::{bound_improved, bound_main, BoundReport, ConstantMode};
use stable_clt::experiment::{
    emit_outputs, fit_rate, fit_table, read_csv, run_rate_experiment, Abscissa, DistanceKind, ExperimentPlan,
    OutputFormat,
};
use stable_clt::generator::{apply_generator, GeneratorForm};
use stable_clt::lindeberg::{
    law_truncation_check, stable_truncation_check, taylor_residual, telescoping_decompose, Coupling, ZSpec,
};
use stable_clt::mc::McConfig;
use stable_clt::smooth::SmoothFnSpec;
use stable_clt::stable::{sample_stable, stable_cdf, stable_pdf, SampleBatch};
use stable_clt::{Error, ErrorClass, QuadConfig, Result, StableParams};

#[derive(Parser)]
#[command(
    name = "stable-clt",
    version,
    about = "Stable laws, generator quadrature, swap decompositions and rate experiments"
)]
struct Cli {
    /// JSON file with any of the sections law, stable, plan, quad, distances, function.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; results are also written there as files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Absolute quadrature tolerance.
    #[arg(long, global = true)]
    tolerance: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct StableArgs {
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
}

#[derive(Args, Clone)]
struct LawArgs {
    /// Law as JSON, e.g. '{"family":"pareto","alpha":1.5}'.
    #[arg(long)]
    law: Option<String>,
    /// Shorthand for the symmetric Pareto law with this index.
    #[arg(long, conflicts_with = "law")]
    pareto: Option<f64>,
}

#[derive(Args, Clone)]
struct FunctionArgs {
    /// Test function as JSON, e.g. '{"kind":"cosine","lambda":1}'. Defaults
    /// to the smoothed indicator of (-inf, 0] with steepness 2.
    #[arg(long)]
    function: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Raw,
    Shifted,
}

#[derive(Clone, Copy, ValueEnum)]
enum LemmaArg {
    Expansion,
    StableTruncation,
    LawTruncation,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Unit,
    Explicit,
}

#[derive(Clone, Copy, ValueEnum)]
enum AbscissaArg {
    LogN,
    LogLogN,
}

#[derive(Subcommand)]
enum Command {
    /// Draw from a stable law, or from a summand law when --law/--pareto is given.
    Sample {
        #[command(flatten)]
        stable: StableArgs,
        #[command(flatten)]
        law: LawArgs,
        #[arg(long, default_value_t = 10)]
        count: usize,
    },
    /// Stable density at the given points.
    Pdf {
        #[command(flatten)]
        stable: StableArgs,
        #[arg(long, default_value_t = 1.0)]
        time: f64,
        #[arg(long = "x", required = true, num_args = 1.., allow_negative_numbers = true)]
        x: Vec<f64>,
    },
    /// Stable distribution function at the given points.
    Cdf {
        #[command(flatten)]
        stable: StableArgs,
        #[arg(long = "x", required = true, num_args = 1.., allow_negative_numbers = true)]
        x: Vec<f64>,
    },
    /// Apply the stable generator to a test function.
    Generator {
        #[command(flatten)]
        stable: StableArgs,
        #[command(flatten)]
        function: FunctionArgs,
        #[arg(long = "x", required = true, num_args = 1.., allow_negative_numbers = true)]
        x: Vec<f64>,
        #[arg(long, value_enum, default_value = "raw")]
        form: FormArg,
    },
    /// Split E f(S_n) - E f(Y) into one-summand swaps.
    Decompose {
        #[command(flatten)]
        law: LawArgs,
        #[command(flatten)]
        function: FunctionArgs,
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
        #[arg(long)]
        independent: bool,
    },
    /// Monte Carlo check of an expansion or truncation inequality.
    LemmaCheck {
        #[arg(long, value_enum)]
        lemma: LemmaArg,
        #[command(flatten)]
        law: LawArgs,
        #[command(flatten)]
        function: FunctionArgs,
        #[arg(long)]
        a: f64,
        /// Fixed evaluation point; the expansion check defaults to the matched hybrid sum.
        #[arg(long, allow_negative_numbers = true)]
        z: Option<f64>,
        #[arg(long, default_value_t = 100_000)]
        paths: usize,
    },
    /// Evaluate the rate bound for each n.
    Bound {
        #[command(flatten)]
        law: LawArgs,
        #[command(flatten)]
        function: FunctionArgs,
        #[arg(long = "n", required = true, num_args = 1..)]
        n: Vec<usize>,
        #[arg(long, value_enum, default_value = "unit")]
        mode: ModeArg,
        /// Use the improved bound (index at most 1, monotone tail perturbation).
        #[arg(long)]
        improved: bool,
    },
    /// Run the plan in the config and write CSV, JSON and SVG outputs.
    RateExperiment {
        #[arg(long)]
        burn_in: Option<usize>,
    },
    /// Fit log(value) against log n or log log n from a results CSV.
    Fit {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value = "kolmogorov")]
        kind: String,
        #[arg(long, value_enum, default_value = "log-n")]
        abscissa: AbscissaArg,
        #[arg(long, default_value_t = 1)]
        burn_in: usize,
        /// Fit the bound column instead of the values.
        #[arg(long)]
        bound: bool,
    },
}

/// Plan fields of the config; law and distances live at the top level.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PlanSection {
    n_grid: Vec<usize>,
    #[serde(rename = "M")]
    m: usize,
    #[serde(default)]
    master_seed: Option<u64>,
    #[serde(default)]
    burn_in: Option<usize>,
    #[serde(default)]
    common_random_numbers: bool,
    #[serde(default)]
    bound_mode: ConstantMode,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Config {
    law: Option<LawSpec>,
    stable: Option<StableParams>,
    plan: Option<PlanSection>,
    #[serde(default)]
    quad: Option<QuadConfig>,
    distances: Option<Vec<DistanceKind>>,
    function: Option<SmoothFnSpec>,
}

fn load_config(path: Option<&Path>) -> Result<Config> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", p.display())))
        }
    }
}

fn resolve_stable(args: &StableArgs, cfg: &Config) -> Result<StableParams> {
    let base = cfg.stable;
    let alpha = args
        .alpha
        .or(base.map(|p| p.alpha()))
        .ok_or_else(|| Error::InvalidConfig("a stable law needs --alpha or a stable section in the config".into()))?;
    let beta = args.beta.or(base.map(|p| p.beta())).unwrap_or(0.0);
    let sigma = args.sigma.or(base.map(|p| p.sigma())).unwrap_or(1.0);
    StableParams::new(alpha, beta, sigma)
}

fn resolve_law_spec(args: &LawArgs, cfg: &Config) -> Result<Option<LawSpec>> {
    if let Some(text) = &args.law {
        return serde_json::from_str(text)
            .map(Some)
            .map_err(|e| Error::InvalidConfig(format!("--law: {e}")));
    }
    if let Some(alpha) = args.pareto {
        return Ok(Some(LawSpec::Pareto { alpha }));
    }
    Ok(cfg.law.clone())
}

fn resolve_law(args: &LawArgs, cfg: &Config, q: &QuadConfig) -> Result<Law> {
    let spec = resolve_law_spec(args, cfg)?
        .ok_or_else(|| Error::InvalidConfig("a summand law is needed: --law, --pareto or a law section".into()))?;
    Law::from_spec(&spec, q)
}

fn resolve_function(args: &FunctionArgs, cfg: &Config) -> Result<SmoothFnSpec> {
    if let Some(text) = &args.function {
        return serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("--function: {e}")));
    }
    Ok(cfg.function.clone().unwrap_or(SmoothFnSpec::Step {
        center: 0.0,
        rho: 2.0,
        scale: 1.0,
    }))
}

fn attracted(law: &Law) -> Result<&stable_clt::attraction::AttractedLaw> {
    law.as_attracted()
        .ok_or_else(|| Error::InvalidConfig("this command needs a law in the domain of normal attraction".into()))
}

/// Prints JSON to stdout and, with --out, writes it to `<out>/<name>.json`.
fn report<T: Serialize>(value: &T, out: Option<&Path>, name: &str) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{name}.json")), format!("{text}\n"))?;
    }
    let mut stdout = std::io::stdout().lock();
    writeln!(stdout, "{text}")?;
    Ok(())
}

fn write_batch(batch: &SampleBatch, out: Option<&Path>) -> Result<()> {
    let mut text = String::from("value\n");
    for v in &batch.values {
        text.push_str(&format!("{v}\n"));
    }
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("sample.csv"), &text)?;
    }
    std::io::stdout().lock().write_all(text.as_bytes())?;
    Ok(())
}

#[derive(Serialize)]
struct PointValue {
    x: f64,
    value: f64,
}

fn run(cli: Cli) -> Result<()> {
    if let Some(k) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    let cfg = load_config(cli.config.as_deref())?;
    let mut q = cfg.quad.unwrap_or_default();
    if let Some(t) = cli.tolerance {
        if t.is_nan() || t <= 0.0 {
            return Err(Error::InvalidConfig(format!("tolerance must be positive, got {t}")));
        }
        q.tolerance = t;
    }
    let seed = cli.seed.unwrap_or(0);
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Sample { stable, law, count } => {
            let batch = match resolve_law_spec(law, &cfg)? {
                Some(spec) => sample_law(&Law::from_spec(&spec, &q)?, *count, seed)?,
                None => sample_stable(&resolve_stable(stable, &cfg)?, *count, seed)?,
            };
            write_batch(&batch, out)
        }
        Command::Pdf { stable, time, x } => {
            let p = resolve_stable(stable, &cfg)?;
            let rows = x
                .iter()
                .map(|&x| {
                    Ok(PointValue {
                        x,
                        value: stable_pdf(&p, *time, x, &q)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            report(&rows, out, "pdf")
        }
        Command::Cdf { stable, x } => {
            let p = resolve_stable(stable, &cfg)?;
            let rows = x
                .iter()
                .map(|&x| {
                    Ok(PointValue {
                        x,
                        value: stable_cdf(&p, x, &q)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            report(&rows, out, "cdf")
        }
        Command::Generator {
            stable,
            function,
            x,
            form,
        } => {
            let p = resolve_stable(stable, &cfg)?;
            let f = resolve_function(function, &cfg)?.build()?;
            let form = match form {
                FormArg::Raw => GeneratorForm::Raw,
                FormArg::Shifted => GeneratorForm::Shifted,
            };
            let rows = x
                .iter()
                .map(|&x| {
                    Ok(PointValue {
                        x,
                        value: apply_generator(&f, &p, x, &q, form)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            report(&rows, out, "generator")
        }
        Command::Decompose {
            law,
            function,
            n,
            paths,
            independent,
        } => {
            let law = resolve_law(law, &cfg, &q)?;
            let f = resolve_function(function, &cfg)?.build()?;
            let coupling = if *independent {
                Coupling::Independent
            } else {
                Coupling::Common
            };
            let target = cfg.stable.unwrap_or(law.limit());
            let d = telescoping_decompose(&f, &law, &target, *n, &McConfig::new(*paths, seed), coupling, &q)?;
            report(&d, out, "decompose")
        }
        Command::LemmaCheck {
            lemma,
            law,
            function,
            a,
            z,
            paths,
        } => {
            let law = resolve_law(law, &cfg, &q)?;
            let l = attracted(&law)?;
            let f = resolve_function(function, &cfg)?.build()?;
            let mc = McConfig::new(*paths, seed);
            match lemma {
                LemmaArg::Expansion => {
                    let zs = z.map(|z| ZSpec::Fixed { z }).unwrap_or_default();
                    let r = taylor_residual(&f, l, *a, zs, &mc, &q)?;
                    report(
                        &serde_json::json!({ "result": r, "holds": r.check.holds() }),
                        out,
                        "lemma_check",
                    )
                }
                LemmaArg::StableTruncation => {
                    let r = stable_truncation_check(&f, &l.limit(), *a, z.unwrap_or(0.0), &mc, &q)?;
                    report(
                        &serde_json::json!({ "result": r, "holds": r.check.holds() }),
                        out,
                        "lemma_check",
                    )
                }
                LemmaArg::LawTruncation => {
                    let r = law_truncation_check(&f, l, *a, z.unwrap_or(0.0), &mc, &q)?;
                    report(
                        &serde_json::json!({ "result": r, "holds": r.check.holds() && r.moment.holds() }),
                        out,
                        "lemma_check",
                    )
                }
            }
        }
        Command::Bound {
            law,
            function,
            n,
            mode,
            improved,
        } => {
            let law = resolve_law(law, &cfg, &q)?;
            let l = attracted(&law)?;
            let norms = resolve_function(function, &cfg)?.build()?.norms();
            let mode = match mode {
                ModeArg::Unit => ConstantMode::Unit,
                ModeArg::Explicit => ConstantMode::Explicit,
            };
            let reports = n
                .iter()
                .map(|&n| {
                    if *improved {
                        bound_improved(&norms, l, n, mode, &q)
                    } else {
                        bound_main(&norms, l, n, mode, &q)
                    }
                })
                .collect::<Result<Vec<BoundReport>>>()?;
            report(&reports, out, "bound")
        }
        Command::RateExperiment { burn_in } => {
            let section = cfg
                .plan
                .clone()
                .ok_or_else(|| Error::InvalidConfig("rate-experiment needs a plan section".into()))?;
            let law = cfg
                .law
                .clone()
                .ok_or_else(|| Error::InvalidConfig("rate-experiment needs a law section".into()))?;
            let dir = out
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("rate-experiment"));
            let plan = ExperimentPlan {
                law,
                stable: cfg.stable,
                n_grid: section.n_grid,
                m: section.m,
                distances: cfg.distances.clone().unwrap_or_else(|| vec![DistanceKind::Kolmogorov]),
                master_seed: cli.seed.or(section.master_seed).unwrap_or(0),
                out_dir: Some(dir.clone()),
                burn_in: burn_in.or(section.burn_in).unwrap_or(1),
                common_random_numbers: section.common_random_numbers,
                bound_mode: section.bound_mode,
                test_function: cfg.function.clone(),
            };
            let run = run_rate_experiment(&plan, &q)?;
            let table = &run.table;
            for fmt in [OutputFormat::Csv, OutputFormat::Json, OutputFormat::Svg] {
                emit_outputs(table, fmt, &dir, "results")?;
            }
            fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&table.meta)? + "\n")?;
            let mut fits = serde_json::Map::new();
            for kind in table.kinds() {
                let abscissa = if matches!(plan.law, LawSpec::Logtail { .. }) {
                    Abscissa::LogLogN
                } else {
                    Abscissa::LogN
                };
                match fit_table(table, &kind, abscissa, plan.burn_in) {
                    Ok(fit) => {
                        fits.insert(kind, serde_json::to_value(fit)?);
                    }
                    Err(e) => eprintln!("warning: no fit for {kind}: {e}"),
                }
            }
            if matches!(plan.law, LawSpec::Logtail { .. }) {
                eprintln!("warning: log-speed rates are hard to resolve over a desk-scale range of n");
            }
            fs::write(dir.join("fit.json"), serde_json::to_string_pretty(&fits)? + "\n")?;
            for w in &table.meta.warnings {
                eprintln!("warning: {w}");
            }
            println!("{}", serde_json::to_string_pretty(&fits)?);
            match run.error {
                Some(e) => Err(e),
                None => Ok(()),
            }
        }
        Command::Fit {
            input,
            kind,
            abscissa,
            burn_in,
            bound,
        } => {
            let rows = read_csv(input)?;
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| &r.distance_kind == kind)
                .filter_map(|r| if *bound { r.bound_total } else { r.value }.map(|v| (r.n as f64, v)))
                .collect();
            let abscissa = match abscissa {
                AbscissaArg::LogN => Abscissa::LogN,
                AbscissaArg::LogLogN => Abscissa::LogLogN,
            };
            let fit = fit_rate(points.get(*burn_in..).unwrap_or(&[]), abscissa)?;
            report(&fit, out, "fit")
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e.class() {
        ErrorClass::InvalidInput => 2,
        ErrorClass::Numerical => 3,
        ErrorClass::Hypothesis => 4,
        ErrorClass::Io => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
