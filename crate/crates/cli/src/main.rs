//! `hjinv` — command-line front end for the Hamilton-Jacobi inverse-design
//! library. Subcommands cover the forward/backward solvers, the sensitivity
//! and transport pipelines, gradient-descent reconstruction, and the
//! reachability toolbox; a built-in `selftest` battery exercises all of them.
//!
//! Exit codes: 0 success, 1 numerical failure, 2 configuration error,
//! 3 domain/hypothesis error.

mod artifacts;
mod commands;
mod config;
mod selftest;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

/// Front-end error classification; the variant picks the exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration (schema, field values, unreadable inputs) — exit 2.
    Config(String),
    /// Operation invoked outside its validity domain — exit 3.
    Domain(String),
    /// Numerical failure inside a pipeline — exit 1.
    Numerical(String),
    /// Failure writing artifacts — exit 1.
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Numerical(_) | CliError::Io(_) => 1,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m)
            | CliError::Domain(m)
            | CliError::Numerical(m)
            | CliError::Io(m) => m,
        }
    }
}

impl From<hjinv_core::Error> for CliError {
    fn from(e: hjinv_core::Error) -> Self {
        use hjinv_core::Error as E;
        match &e {
            E::ValidityDomain(_) | E::Hypothesis(_) | E::SchemeMismatch(_) => {
                CliError::Domain(e.to_string())
            }
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

#[derive(Parser)]
#[command(
    name = "hjinv",
    version,
    about = "Viscosity solvers, sensitivities, and inverse design for convex \
             Hamilton-Jacobi equations on truncated grids"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration file (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Where to write artifacts (overrides `run.output_dir`; placement only,
    /// not part of the scenario).
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    /// Where to write the report and manifest.
    #[arg(long, default_value = "out/selftest")]
    output_dir: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the initial condition forward and write solution slices.
    Solve(RunArgs),
    /// Evolve the target backward and write slices of the reconstruction.
    Backward(RunArgs),
    /// Backward-forward envelope of the target (its largest reachable minorant).
    Envelope(RunArgs),
    /// Directional derivative of the forward operator with a convergence study.
    Gateaux(RunArgs),
    /// Transport a density along the solution flow and check the duality pairing.
    Transport(RunArgs),
    /// Gradient measure of the terminal-fidelity functional, with an agreement check.
    Grad(RunArgs),
    /// Reconstruct initial data for a target by mollified gradient descent.
    Invert(RunArgs),
    /// Project the target onto the reachable set in L2.
    Project(RunArgs),
    /// Test whether the target is reachable at the horizon.
    Check(RunArgs),
    /// Describe the cone of initial data reaching a reachable target.
    Cone(RunArgs),
    /// Run the built-in property battery and write a report.
    Selftest(SelftestArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve(_) => "solve",
            Command::Backward(_) => "backward",
            Command::Envelope(_) => "envelope",
            Command::Gateaux(_) => "gateaux",
            Command::Transport(_) => "transport",
            Command::Grad(_) => "grad",
            Command::Invert(_) => "invert",
            Command::Project(_) => "project",
            Command::Check(_) => "check",
            Command::Cone(_) => "cone",
            Command::Selftest(_) => "selftest",
        }
    }
}

fn section_needs(command: &Command, raw: &config::RawConfig) -> config::SectionNeeds {
    let mut needs = config::SectionNeeds::default();
    match command {
        Command::Solve(_) => needs.initial = true,
        Command::Backward(_) | Command::Envelope(_) | Command::Check(_) => {
            needs.target = true;
        }
        Command::Gateaux(_) => {
            needs.initial = true;
            needs.direction = true;
            needs.gateaux = true;
        }
        Command::Transport(_) => {
            needs.initial = true;
            needs.transport = true;
        }
        Command::Grad(_) => {
            needs.initial = true;
            needs.target = true;
            needs.direction = true;
        }
        Command::Invert(_) => {
            needs.target = true;
            needs.descent = true;
        }
        Command::Project(_) => {
            needs.target = true;
            needs.projection = true;
        }
        Command::Cone(_) => {
            needs.target = true;
            // A candidate initial condition is optional; test membership
            // only when the config supplies one.
            needs.initial = raw.initial.is_some();
        }
        Command::Selftest(_) => {}
    }
    needs
}

fn configure_threads(threads: usize) {
    if threads > 0 {
        // A second initialization (tests driving the binary repeatedly in
        // one process cannot happen; this is belt and braces) is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    let run = |args: &RunArgs| -> Result<config::Scenario, CliError> {
        let raw = config::load_raw(&args.config)?;
        let needs = section_needs(command, &raw);
        config::resolve(&raw, needs, args.output_dir.as_deref())
    };

    match command {
        Command::Selftest(args) => selftest::run(&args.output_dir),
        Command::Solve(args)
        | Command::Backward(args)
        | Command::Envelope(args)
        | Command::Gateaux(args)
        | Command::Transport(args)
        | Command::Grad(args)
        | Command::Invert(args)
        | Command::Project(args)
        | Command::Check(args)
        | Command::Cone(args) => {
            let scenario = run(args)?;
            configure_threads(scenario.threads);
            let mut writer = artifacts::RunWriter::create(
                &scenario.output_dir,
                command.name(),
                scenario.seed,
            )?;
            writer.record_input(&args.config)?;
            for input in &scenario.input_files {
                writer.record_input(input)?;
            }
            writer.write_resolved_config(&scenario.resolved)?;
            match command {
                Command::Solve(_) => commands::solve(&scenario, &mut writer)?,
                Command::Backward(_) => commands::backward(&scenario, &mut writer)?,
                Command::Envelope(_) => commands::envelope(&scenario, &mut writer)?,
                Command::Gateaux(_) => commands::gateaux(&scenario, &mut writer)?,
                Command::Transport(_) => commands::transport(&scenario, &mut writer)?,
                Command::Grad(_) => commands::grad(&scenario, &mut writer)?,
                Command::Invert(_) => commands::invert(&scenario, &mut writer)?,
                Command::Project(_) => commands::project(&scenario, &mut writer)?,
                Command::Check(_) => commands::check(&scenario, &mut writer)?,
                Command::Cone(_) => commands::cone(&scenario, &mut writer)?,
                Command::Selftest(_) => unreachable!("handled above"),
            }
            let dir = writer.finish()?;
            println!("artifacts written to {}", dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let started = Instant::now();
    match dispatch(&cli.command) {
        Ok(()) => {
            println!(
                "{} completed in {:.2}s",
                cli.command.name(),
                started.elapsed().as_secs_f64()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}
