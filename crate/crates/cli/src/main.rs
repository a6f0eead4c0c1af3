use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::Parser;
use qnf_core::config::{validate, CheckSelection, RunConfig, RunMode};
use qnf_core::run::run;

/// Quantum normal forms of PT-symmetric perturbations of the linear torus
/// flow, checked against a truncated-matrix Weyl oracle.
#[derive(Debug, Parser)]
#[command(name = "qnf", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Normal-form order K (overrides `order`).
    #[arg(long)]
    order: Option<usize>,
    /// quantum, classical or both.
    #[arg(long)]
    mode: Option<RunMode>,
    /// all, none, or a comma-separated list of check names.
    #[arg(long)]
    checks: Option<String>,
    /// Worker threads for the (eps, hbar) jobs.
    #[arg(long)]
    jobs: Option<usize>,
    /// Validate the config and print the smallness report without running.
    #[arg(long)]
    validate_only: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    let mut config = RunConfig::load(&cli.config)
        .with_context(|| format!("reading {}", cli.config.display()))?;
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    if let Some(k) = cli.order {
        config.order = k;
    }
    if let Some(m) = cli.mode {
        config.mode = m;
    }
    if let Some(c) = &cli.checks {
        config.checks = CheckSelection::parse(c);
    }
    if let Some(j) = cli.jobs {
        config.jobs = j;
    }

    let report = validate(&config);
    eprint!("{}", report.render());
    if !report.valid {
        return Ok(ExitCode::from(2));
    }
    if cli.validate_only {
        return Ok(ExitCode::SUCCESS);
    }

    let outcome = run(&config)?;
    let r = &outcome.report;
    println!(
        "{} checks: {} pass, {} fail, {} vacuous; artifacts in {}",
        r.checks.len(),
        r.counts.pass,
        r.counts.fail,
        r.counts.vacuous,
        outcome.out_dir.display()
    );
    for c in r.failed_checks() {
        println!("FAIL {} [{}] residual {:e}", c.name, c.scope, c.residual);
    }
    Ok(if outcome.failed() {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    })
}
