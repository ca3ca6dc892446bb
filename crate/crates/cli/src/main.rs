use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use selab_core::experiment::{parse_plan, run_plan, ExperimentKind, ExperimentPlan, Outcome};

const TABLES: &str = "\
CSV tables (header row, RFC 4180 quoting):
  stats           checkpoints.csv  n,M,V,range,m2_over_v,pqd_partial_sum
  gc              gc.csv           replicate,n,sup_deviation
  fclt            sup.csv          replicate,sup_abs_y
                  covariance.csv   s,t,estimate,stderr,target,z
  rw-asym         checkpoints.csv  replicate,n,M,V,range,m2_over_v,pqd_partial_sum
  rotation        checkpoints.csv  replicate,n,M,V,range,m2_over_v,pqd_partial_sum,v_sqrt_log_n_over_n2
                  dk.csv           replicate,k,q_k,S_qk
  counterexample  schedule.csv     level,q_lambda,first_visit,time,M,V,m2_over_v,expected_M,M_matches
  variance        returns.csv      lag,k,p
  selftest        selftest.csv     suite,op,passed,value,threshold

Every run also writes summary.json (plan echo, library version, results
tagged by operation, checks) and timing.json (wall time, kept apart so the
other files are byte-reproducible).

Exit codes: 0 success, 1 error, 2 failed check under --assert.";

#[derive(Parser)]
#[command(name = "selab", version, about = "Local-time and sampled empirical process experiments", after_help = TABLES)]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "SELAB_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a JSON experiment plan.
    #[command(after_help = TABLES)]
    Run {
        plan: PathBuf,
        /// Exit with status 2 when a check fails.
        #[arg(long)]
        assert: bool,
        #[arg(long, default_value = "selab-out")]
        out: PathBuf,
    },
    /// Run the built-in oracle suites.
    Selftest {
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn report(outcome: &Outcome) {
    let mut out = std::io::stdout().lock();
    for c in &outcome.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        // A closed pipe must not turn a finished run into a failure.
        if writeln!(
            out,
            "{tag} {} = {} ({}) [{}]",
            c.name, c.value, c.threshold, c.op
        )
        .is_err()
        {
            return;
        }
    }
}

fn write(outcome: &Outcome, out: &PathBuf, secs: f64) -> Result<()> {
    outcome.write_to(out)?;
    let timing = serde_json::json!({ "wall_seconds": secs });
    std::fs::write(out.join("timing.json"), format!("{timing}\n"))
        .context("writing timing.json")?;
    Ok(())
}

fn execute(plan: &ExperimentPlan, out: Option<&PathBuf>) -> Result<Outcome> {
    let start = Instant::now();
    let outcome = run_plan(plan)?;
    if let Some(out) = out {
        write(&outcome, out, start.elapsed().as_secs_f64())?;
    }
    report(&outcome);
    Ok(outcome)
}

fn main_inner(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring thread pool")?;
    }
    match cli.command {
        Command::Run { plan, assert, out } => {
            let text = std::fs::read_to_string(&plan)
                .with_context(|| format!("reading {}", plan.display()))?;
            let plan = parse_plan(&text)?;
            let outcome = execute(&plan, Some(&out))?;
            Ok(if assert && !outcome.passed() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Selftest { out } => {
            let plan = parse_plan(&format!(
                "{{\"experiment\":\"{}\"}}",
                ExperimentKind::Selftest.name()
            ))?;
            let outcome = execute(&plan, out.as_ref())?;
            Ok(if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            })
        }
    }
}

fn main() -> ExitCode {
    match main_inner(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
