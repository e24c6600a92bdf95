mod cli;
mod job;
mod manifest;
mod run;

use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::Parser;
use paramp::ErrorCategory;

use crate::cli::{Cli, Command};
use crate::job::Job;
use crate::manifest::Manifest;

fn write_csv(path: &Path, table: &run::Table) -> anyhow::Result<()> {
    let mut w =
        csv::Writer::from_path(path).with_context(|| format!("creating {}", path.display()))?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn execute(job: Job, out: &Path) -> anyhow::Result<()> {
    job_checks(&job)?;
    let start = Instant::now();
    let table = run::execute(&job)?;
    write_csv(out, &table)?;
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        output: out.to_path_buf(),
        seed: job.seed(),
        wall_clock_seconds: start.elapsed().as_secs_f64(),
        job,
    };
    let mpath = manifest.write()?;
    eprintln!(
        "{}: wrote {} and {}",
        manifest.job.name(),
        out.display(),
        mpath.display()
    );
    Ok(())
}

fn job_checks(job: &Job) -> anyhow::Result<()> {
    match job {
        Job::SweepKappa { config, kappas }
        | Job::FitF { config, kappas, .. }
        | Job::CompareReduced { config, kappas } => {
            for &k in kappas {
                let mut c = config.clone();
                c.kappa_up = k;
                c.kappa_low = k;
                c.validate()?;
            }
        }
        Job::Pattern { config, .. } | Job::Correlations { config } => config.validate()?,
        Job::CollapseSweep { spec, .. } => spec.validate()?,
    }
    Ok(())
}

fn main_inner(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Rerun { manifest, out } => {
            let m = Manifest::read(manifest)?;
            let target = out.clone().unwrap_or(m.output.clone());
            execute(m.job, &target)
        }
        cmd => {
            let out = match cmd {
                Command::SweepKappa(c)
                | Command::CollapseSweep(c)
                | Command::Pattern(c)
                | Command::Correlations(c)
                | Command::FitF(c)
                | Command::CompareReduced(c) => c.out.clone(),
                Command::Rerun { .. } => unreachable!(),
            };
            execute(job::build(cmd)?, &out)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.chain().find_map(|e| e.downcast_ref::<paramp::Error>()) {
        Some(e) => match e.category() {
            ErrorCategory::Config => 2,
            ErrorCategory::Numeric => 3,
            ErrorCategory::Convergence => 4,
        },
        None => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match main_inner(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
