use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use pgsom_core::oracle::audit::AuditOptions;
use pgsom_harness::audit::AUDIT_FILE;
use pgsom_harness::{emit_outputs, run_audit, run_experiment, run_grid, EnvChoice, HarnessError, Method, RunConfig, Stabilizer};

/// Policy-gradient experiments: REINFORCE, PG-SOM and Runge-Kutta updates.
#[derive(Debug, Parser)]
#[command(name = "pgsom", version)]
struct Cli {
    /// JSON run configuration; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    stabilizer: Option<Stabilizer>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Number of seeds; runs seeds 0..N.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    /// `cartpole` or `mdp:<path-to-json>`.
    #[arg(long)]
    env: Option<EnvChoice>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Run the oracle audit and exit 1 if any check fails.
    #[arg(long)]
    audit: bool,
    /// Run all 3 methods × 4 stabilizers.
    #[arg(long)]
    grid: bool,
}

fn build_config(cli: &Cli) -> Result<RunConfig, HarnessError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::from_json_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(m) = cli.method {
        cfg.method = m;
    }
    if let Some(s) = cli.stabilizer {
        cfg.stabilizer = s;
    }
    if let Some(e) = cli.episodes {
        cfg.episodes = e;
    }
    if let Some(n) = cli.seeds {
        cfg.seeds = (0..n).collect();
    }
    if cli.lr.is_some() {
        cfg.lr = cli.lr;
    }
    if let Some(env) = &cli.env {
        cfg.env = env.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<bool, HarnessError> {
    if cli.audit {
        let path = cli.out.join(AUDIT_FILE);
        let report = run_audit(&AuditOptions::default(), &path)?;
        for c in &report.checks {
            println!(
                "{:<44} {}  max_abs_error={:.3e}  tol={:.0e}",
                c.name,
                if c.passed { "PASS" } else { "FAIL" },
                c.max_abs_error,
                c.tolerance
            );
        }
        println!("report written to {}", path.display());
        return Ok(report.all_passed);
    }

    let cfg = build_config(cli)?;
    let records = if cli.grid {
        run_grid(&cfg)?
    } else {
        vec![run_experiment(&cfg)?]
    };
    println!("{:<18} {:>10} {:>10} {:>10}", "model", "mean", "std", "ep→200");
    for r in &records {
        let flag = if r.any_diverged() { "  (diverged)" } else { "" };
        println!(
            "{:<18} {:>10.2} {:>10.2} {:>10}{flag}",
            r.model(),
            r.final_mean,
            r.final_std,
            r.episodes_to_200.map_or("NA".to_string(), |e| e.to_string())
        );
    }
    for path in emit_outputs(&records, &cli.out)? {
        println!("wrote {}", path.display());
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
