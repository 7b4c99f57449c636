use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use patchbeam::harness::{self, StudyConfig};
use patchbeam::Error;

#[derive(Parser)]
#[command(name = "patchbeam", version, about = "Thin elastic beams clamped on a shrinking end patch")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Study configuration (key = value lines). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Relative residual tolerance of the iterative solves; overrides `solver.tol`.
    #[arg(long)]
    tol: Option<f64>,
    /// Worker threads (0 uses all cores).
    #[arg(long, default_value_t = 0)]
    threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// 3D solves for every epsilon of the sweep.
    Solve3d(Common),
    /// The one-dimensional limit problem of the configured regime.
    Limit(Common),
    /// Capacitary Gram matrices for every truncation length and both far fields.
    Capacity(Common),
    /// Full convergence sweep against the limit problem.
    Study {
        #[command(flatten)]
        common: Common,
        /// Exit with status 4 when the verdict fails.
        #[arg(long)]
        strict: bool,
    },
    /// Smallest eigenvalues of the critical penalty blocks.
    Coercivity(Common),
}

enum Failure {
    Config(String),
    Solver(String),
    Verdict,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Io(_) | Error::InadmissibleMaterial(_) | Error::Voigt(_) | Error::Geometry(_) | Error::Regime(_) => {
                Failure::Config(e.to_string())
            }
            other => Failure::Solver(other.to_string()),
        }
    }
}

fn setup(c: &Common) -> Result<(StudyConfig, PathBuf), Failure> {
    if c.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(c.threads)
            .build_global()
            .map_err(|e| Failure::Config(e.to_string()))?;
    }
    let mut cfg = match &c.config {
        Some(p) => StudyConfig::load(p)?,
        None => StudyConfig::default(),
    };
    if let Some(t) = c.tol {
        if !(t > 0.0 && t < 1.0) {
            return Err(Failure::Config(format!("--tol must lie in (0, 1), got {t}")));
        }
        cfg.solver.tol = t;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    fs::create_dir_all(&cfg.out_dir).map_err(|e| Failure::Config(format!("{}: {e}", cfg.out_dir.display())))?;
    let out = cfg.out_dir.clone();
    Ok((cfg, out))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), Failure> {
    let p = dir.join(name);
    fs::write(&p, text).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
    log::info!("wrote {}", p.display());
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve3d(c) => {
            let (cfg, out) = setup(&c)?;
            let csv = harness::solve3d_report(&cfg)?;
            write(&out, "solve3d.csv", &csv)?;
            print!("{csv}");
        }
        Command::Limit(c) => {
            let (cfg, out) = setup(&c)?;
            let run = harness::run_limit(&cfg)?;
            write(&out, "limit.csv", &harness::limit_csv(&run.beam, 100))?;
            let trace = harness::trace_csv(&run.beam);
            write(&out, "trace.csv", &trace)?;
            print!("{}{trace}", harness::header(&run.regime));
            if let Some(n) = run.coercivity {
                println!("penalty smallest eigenvalue: {n:.6e}");
            }
        }
        Command::Capacity(c) => {
            let (cfg, out) = setup(&c)?;
            let (csv, summary) = harness::capacity_report(&cfg)?;
            write(&out, "capacity.csv", &csv)?;
            write(&out, "capacity_summary.txt", &summary)?;
            print!("{summary}");
        }
        Command::Coercivity(c) => {
            let (cfg, out) = setup(&c)?;
            let csv = harness::coercivity_report(&cfg)?;
            write(&out, "coercivity.csv", &csv)?;
            print!("{csv}");
        }
        Command::Study { common, strict } => {
            let (cfg, out) = setup(&common)?;
            let report = harness::run_study(&cfg)?;
            write(&out, "study.csv", &report.csv())?;
            let summary = report.summary();
            write(&out, "summary.txt", &summary)?;
            print!("{summary}");
            if strict && !report.verdict.pass() {
                return Err(Failure::Verdict);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(m)) => {
            eprintln!("solver failure: {m}");
            ExitCode::from(3)
        }
        Err(Failure::Verdict) => {
            eprintln!("verdict failed");
            ExitCode::from(4)
        }
    }
}
