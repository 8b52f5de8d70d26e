use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};

use gfft_core::config::{ApplyConfig, ApplyMode, FSpec, FunctionalSpec, RunConfig, Suite, DEFAULT_CONFIG};
use gfft_core::cylinder::eval_cylinder;
use gfft_core::gfft::{gfft, gfft_general, t_lambda, t_lambda_mc, GeneralOptions};
use gfft_core::grid::TimeGrid;
use gfft_core::rng::RngStream;
use gfft_core::suites::run_config;
use gfft_core::wiener::WienerPath;

/// Verification suites and transforms for Fourier–Feynman transforms of
/// cylinder functionals.
#[derive(Parser)]
#[command(name = "gfft", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the suites of a configuration and write the report.
    Run {
        #[command(flatten)]
        common: RunArgs,
        /// Suite to run; overrides the configuration.
        #[arg(long)]
        suite: Option<Suite>,
    },
    /// Run a single suite.
    Verify {
        #[arg(value_enum)]
        suite: VerifySuite,
        #[command(flatten)]
        common: RunArgs,
    },
    /// Apply one transform.
    Transform {
        #[command(subcommand)]
        command: TransformCommand,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum VerifySuite {
    Rotation,
    Transform,
    Algebra,
}

#[derive(Subcommand)]
enum TransformCommand {
    /// Closed form (JSON functional), quadrature (CSV samples) or Monte
    /// Carlo (JSON estimate), by the config's `mode`.
    Apply {
        #[arg(long)]
        config: PathBuf,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration; the bundled default when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configuration seed.
    #[arg(long, env = "GFFT_SEED")]
    seed: Option<u64>,
    /// Report directory.
    #[arg(long, default_value = "gfft-report")]
    out: PathBuf,
    /// Worker threads.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    parallel: Option<u64>,
}

/// Exit statuses: 0 all rows pass, 1 a row failed or a computation broke,
/// 2 invalid configuration or usage.
enum Failure {
    Invalid(anyhow::Error),
    Failed(anyhow::Error),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { common, suite } => run(common, suite),
        Command::Verify { suite, common } => run(
            common,
            Some(match suite {
                VerifySuite::Rotation => Suite::Rotation,
                VerifySuite::Transform => Suite::Transform,
                VerifySuite::Algebra => Suite::Algebra,
            }),
        ),
        Command::Transform {
            command: TransformCommand::Apply { config, out },
        } => apply(&config, out.as_deref()),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Failed(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Invalid(e)) => {
            eprintln!("invalid configuration: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn invalid<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Invalid(e.into())
}

fn failed<E: Into<anyhow::Error>>(e: E) -> Failure {
    Failure::Failed(e.into())
}

fn run(args: RunArgs, suite: Option<Suite>) -> Result<bool, Failure> {
    let (mut cfg, base) = match &args.config {
        Some(path) => {
            let cfg = RunConfig::load(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(invalid)?;
            (cfg, path.parent().unwrap_or(Path::new(".")).to_path_buf())
        }
        None => (
            RunConfig::from_json(DEFAULT_CONFIG).map_err(invalid)?,
            PathBuf::from("."),
        ),
    };
    if let Some(s) = suite {
        cfg.suite = s;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.parallel.unwrap_or(0) as usize)
        .build()
        .map_err(failed)?;
    let report = pool.install(|| run_config(&cfg, &base)).map_err(invalid)?;
    report
        .write_dir(&args.out)
        .with_context(|| format!("writing {}", args.out.display()))
        .map_err(failed)?;
    print!("{}", report.summary());
    Ok(report.pass())
}

fn apply(path: &Path, out: Option<&Path>) -> Result<bool, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(invalid)?;
    let cfg = ApplyConfig::from_json(&text).map_err(invalid)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let grid = TimeGrid::new(cfg.horizon, cfg.intervals).map_err(invalid)?;
    let f = cfg.functional.resolve(grid, base).map_err(invalid)?;
    let h = cfg.h.resolve(grid, base).map_err(invalid)?;

    let mut buf = Vec::new();
    match cfg.mode {
        ApplyMode::Closed => {
            let q = cfg.q.unwrap_or_default();
            let g = gfft(&f, q, &h).map_err(failed)?;
            let pgp = g
                .closed_form()
                .cloned()
                .ok_or_else(|| failed(anyhow::anyhow!("no closed form")))?;
            let spec = FunctionalSpec {
                family: cfg.functional.family.clone(),
                tol: cfg.functional.tol,
                f: FSpec::Pgp(pgp),
            };
            serde_json::to_writer_pretty(&mut buf, &spec).map_err(failed)?;
            buf.push(b'\n');
        }
        ApplyMode::Quadrature => {
            let q = cfg.q.unwrap_or_default();
            let opts = cfg.options.clone().unwrap_or_else(|| GeneralOptions {
                rho: vec![1.0, 0.5, 2.0],
                ..GeneralOptions::default()
            });
            let sampled = gfft_general(&f, q, &h, &opts).map_err(failed)?;
            for (rho, d) in sampled.rho.iter().zip(&sampled.diffs) {
                eprintln!("rho = {rho}: successive L2 differences {d:?}");
            }
            let header: Vec<String> = (1..=sampled.arity)
                .map(|j| format!("r{j}"))
                .chain(["re".to_string(), "im".to_string()])
                .collect();
            writeln!(buf, "{}", header.join(",")).map_err(failed)?;
            let mut point = vec![0.0; sampled.arity];
            for (i, v) in sampled.values.iter().enumerate() {
                sampled.point(i, &mut point);
                let coords: Vec<String> = point.iter().map(|x| format!("{x:e}")).collect();
                writeln!(buf, "{},{:e},{:e}", coords.join(","), v.re, v.im).map_err(failed)?;
            }
        }
        ApplyMode::Mc => {
            let lambda = cfg.lambda.unwrap_or_default();
            let n = cfg.n.unwrap_or(100_000);
            let rng = RngStream::new(cfg.seed.unwrap_or(0), 0);
            let y = WienerPath::zero(grid);
            let est = t_lambda_mc(&f, lambda, &h, &y, n, &rng).map_err(failed)?;
            let mut value = serde_json::json!({
                "lambda": lambda,
                "n": n,
                "mean": est.mean(),
                "stderr": [est.re.stderr, est.im.stderr],
            });
            if f.closed_form().is_some() {
                let exact = eval_cylinder(&t_lambda(&f, lambda, &h).map_err(failed)?, &y).map_err(failed)?;
                value["closed_form"] = serde_json::json!(exact);
                value["zscore"] = serde_json::json!(est.zscore_against(exact));
            }
            serde_json::to_writer_pretty(&mut buf, &value).map_err(failed)?;
            buf.push(b'\n');
        }
    }
    match out {
        Some(p) => std::fs::write(p, &buf)
            .with_context(|| format!("writing {}", p.display()))
            .map_err(failed)?,
        None => std::io::stdout().write_all(&buf).map_err(failed)?,
    }
    Ok(true)
}
