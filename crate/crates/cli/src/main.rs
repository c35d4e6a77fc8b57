mod output;
mod run;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::output::Format;
use crate::run::{run, RunOptions};
use crate::scenario::{load, sanitize, Output, ScenarioDoc};

#[derive(Parser)]
#[command(name = "gaussdyn", version, about = "Reduced dynamics of Gaussian open quantum systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every output listed in the scenario.
    Simulate(Common),
    /// Master-equation coefficients on the time grid.
    Coefficients(Common),
    /// First zero of det Φ_ii.
    CriticalTime(Common),
    /// Second derivative of the reduced purity at t = 0.
    PurityRate(Common),
    /// Initial rate of system-environment correlations.
    CorrelationRate(Common),
    /// Reduced Wigner function propagated on a phase-space grid.
    Wigner(Common),
    /// Residual of the bath memory equation along the exact trajectory.
    QbmResidual(Common),
    /// Parse and validate the scenario without running it.
    Validate(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory; sweeps write one sub-directory per run.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides `tolerances.ode`.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
}

impl Command {
    fn parts(&self) -> (&Common, Option<Output>) {
        match self {
            Command::Simulate(c) | Command::Validate(c) => (c, None),
            Command::Coefficients(c) => (c, Some(Output::Coefficients)),
            Command::CriticalTime(c) => (c, Some(Output::CriticalTime)),
            Command::PurityRate(c) => (c, Some(Output::PurityRate)),
            Command::CorrelationRate(c) => (c, Some(Output::CorrelationRate)),
            Command::Wigner(c) => (c, Some(Output::WignerGrid)),
            Command::QbmResidual(c) => (c, Some(Output::QbmResidual)),
        }
    }
}

fn prepare(common: &Common, only: Option<Output>) -> Result<Vec<ScenarioDoc>> {
    let mut docs = load(&common.scenario)?;
    for doc in &mut docs {
        if let Some(o) = only {
            doc.outputs = vec![o];
        }
        if let Some(tol) = common.tol {
            doc.tolerances.ode = tol;
        }
    }
    Ok(docs)
}

fn validate_only(docs: Vec<ScenarioDoc>) -> Result<bool> {
    for doc in docs {
        let name = doc.name.clone();
        let sc = doc.validate()?;
        let s = gaussdyn::states::validate(&sc.s0)?;
        let e = gaussdyn::states::validate(&sc.e0)?;
        let report = json!({
            "name": name,
            "version": gaussdyn::VERSION,
            "system_dof": sc.system.d(),
            "environment_dof": sc.system.n_env(),
            "system_symplectic_eigenvalues": s.symplectic_eigenvalues,
            "system_pure": s.pure,
            "environment_symplectic_eigenvalues": e.symplectic_eigenvalues,
            "outputs": sc.outputs.iter().map(|o| o.name()).collect::<Vec<_>>(),
            "tolerances": run::tolerance_table(&sc),
        });
        println!("{}", serde_json::to_string_pretty(&report)?);
    }
    Ok(true)
}

fn execute(cli: &Cli) -> Result<bool> {
    let (common, only) = cli.command.parts();
    let docs = prepare(common, only)?;
    if matches!(cli.command, Command::Validate(_)) {
        return validate_only(docs);
    }
    let sweep = docs.len() > 1;
    let mut ok = true;
    for doc in docs {
        let out = if sweep {
            common.out.join(sanitize(&doc.name))
        } else {
            common.out.clone()
        };
        let sc = doc.validate()?;
        let report = run(
            &sc,
            &RunOptions {
                out: out.clone(),
                format: common.format,
            },
        )?;
        for (name, entry) in &report.outputs {
            match &entry.error {
                None => eprintln!("[{}] {name}: ok {:?}", report.name, entry.files),
                Some(e) => eprintln!("[{}] {name}: FAILED: {e}", report.name),
            }
        }
        eprintln!("[{}] summary written to {}", report.name, out.join("summary.json").display());
        ok &= !report.failed();
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let chain: Vec<String> = e.chain().map(|c| c.to_string()).collect();
            let msg = json!({ "error": format!("{e:#}"), "causes": chain });
            eprintln!("{msg}");
            ExitCode::from(2)
        }
    }
}
