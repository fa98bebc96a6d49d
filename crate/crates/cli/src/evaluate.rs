use std::path::Path;

use clap::ValueEnum;
use planverify::corpus::load_episodes;
use planverify::engine::read_traces;
use planverify::eval::{percent, EvalError};
use planverify::summarize_run;

use crate::plot::convergence_svg;
use crate::{CliError, CliResult, EvaluateArgs, EXIT_OK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Plot,
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| CliError::Fatal(format!("cannot write {}: {e}", path.display())))
}

pub fn run(args: EvaluateArgs) -> CliResult<u8> {
    let traces = read_traces(&args.traces).map_err(|e| CliError::Fatal(e.to_string()))?;
    let episodes = match &args.corpus {
        Some(dir) => load_episodes(dir).map_err(|e| CliError::Fatal(e.to_string()))?,
        None => Vec::new(),
    };
    let report = summarize_run(&traces, &episodes).map_err(|e| match e {
        EvalError::EmptyRun => CliError::Fatal(format!("no traces found in {}", args.traces.display())),
        other => CliError::Fatal(other.to_string()),
    })?;
    if report.metrics.is_none() {
        tracing::warn!("no annotated episodes matched the traces; the report has no metrics block");
    }

    std::fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Fatal(format!("cannot create {}: {e}", args.out.display())))?;
    if args.formats.contains(&Format::Json) {
        write(&args.out.join("report.json"), &report.to_json())?;
    }
    if args.formats.contains(&Format::Csv) {
        write(&args.out.join("report.csv"), &report.to_csv())?;
    }
    if args.formats.contains(&Format::Plot) {
        write(&args.out.join("convergence.svg"), &convergence_svg(&report.convergence)?)?;
    }

    if let Some(m) = &report.metrics {
        println!(
            "recall {}%  precision {}%  f1 {}%  over {} annotated episode(s)",
            m.recall.percent, m.precision.percent, m.f1.percent, m.annotated_episodes
        );
    }
    let c = &report.convergence;
    let cumulative: Vec<String> = c.cumulative.iter().map(|r| format!("{}%", percent(*r))).collect();
    println!(
        "{} trace(s), {} failed, {} not converged; converged by round: {}",
        report.episodes,
        report.failed,
        c.not_converged,
        cumulative.join(" ")
    );
    Ok(EXIT_OK)
}
