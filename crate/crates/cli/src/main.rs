use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hetnet_tr::channel::{draw_channel_set, place_nodes, ScenarioConfig};
use hetnet_tr::harness::{load_config, parse_sweep, run_experiment, trial_rng, Experiment, ExperimentSpec, SweepAxis};
use hetnet_tr::power::{solve_proposed, StepSchedule};
use hetnet_tr::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "hetnet-tr", version, about = "Two-tier TR/ZF downlink power allocation experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo experiment and write its CSV.
    Run {
        #[arg(long)]
        experiment: Experiment,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        trials: Option<u64>,
        /// Defaults to the config's network seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override one sweep axis, e.g. `psi=0.05,0.1`. Repeatable.
        #[arg(long, value_parser = parse_sweep_arg)]
        sweep: Vec<SweepAxis>,
    },
    /// Check a config file and run one feasibility precheck.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn parse_sweep_arg(s: &str) -> Result<SweepAxis, String> {
    parse_sweep(s).map_err(|e| e.to_string())
}

fn exit_for(e: &Error) -> u8 {
    if e.is_infeasible() {
        EXIT_INFEASIBLE
    } else if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_CONFIG
    }
}

fn run(
    experiment: Experiment,
    config: PathBuf,
    out: PathBuf,
    trials: Option<u64>,
    seed: Option<u64>,
    sweep: Vec<SweepAxis>,
) -> Result<u8, Error> {
    let cfg = load_config(&config)?;
    let seed = seed.unwrap_or(cfg.network.seed);
    let spec = ExperimentSpec::new(experiment, trials, seed, sweep, out)?;
    log::info!(
        "running {} with {} trials, seed {}, {} sweep points",
        spec.experiment,
        spec.trials,
        spec.seed,
        spec.grid().len()
    );
    let stats = run_experiment(&spec, &cfg)?;
    log::info!(
        "wrote {} rows to {}; {}/{} evaluations feasible, {} numerical failures",
        stats.rows,
        spec.output_path.display(),
        stats.feasible,
        stats.attempted,
        stats.numerical_failures
    );
    if stats.numerical_failures > 0 {
        eprintln!("{} evaluations failed numerically", stats.numerical_failures);
        return Ok(EXIT_NUMERICAL);
    }
    if stats.infeasible_everywhere() {
        eprintln!("no sweep point was feasible");
        return Ok(EXIT_INFEASIBLE);
    }
    Ok(0)
}

fn precheck(cfg: &ScenarioConfig) -> Result<(), Error> {
    let catalog = cfg.catalog()?;
    let mut rng = trial_rng(cfg.network.seed, 0);
    let geometry = place_nodes(cfg, &mut rng);
    let channels = draw_channel_set(cfg, &catalog, &geometry, &mut rng)?;
    let schedule = StepSchedule {
        a: cfg.power.step_a,
        b: cfg.power.step_b,
        max_iter: cfg.power.max_iter,
    };
    let r = solve_proposed(
        &channels,
        &vec![cfg.gamma_m(); cfg.network.macro_users],
        &vec![cfg.gamma_f(); cfg.network.femto_users],
        cfg.p_tol(),
        cfg.noise(),
        &schedule,
    )?;
    println!(
        "precheck realization feasible: total power {:e} W after {} dual iterations",
        r.total_power, r.iterations
    );
    Ok(())
}

fn validate(config: PathBuf) -> Result<u8, Error> {
    let cfg = load_config(&config)?;
    println!("config ok: {}", config.display());
    precheck(&cfg)?;
    Ok(0)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            experiment,
            config,
            out,
            trials,
            seed,
            sweep,
        } => run(experiment, config, out, trials, seed, sweep),
        Command::Validate { config } => validate(config),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use hetnet_tr::Stage;

    #[test]
    fn error_classes_map_to_exit_codes() {
        let no_conv = Error::NoConvergence {
            what: "macro dual subgradient",
            iterations: 10,
            residual: 1.0,
        };
        assert_eq!(exit_for(&no_conv), EXIT_NUMERICAL);
        assert_eq!(exit_for(&Error::Numerical("singular".into())), EXIT_NUMERICAL);
        let infeasible = Error::Infeasible {
            stage: Stage::Femto,
            reason: "rho >= 1".into(),
        };
        assert_eq!(exit_for(&infeasible), EXIT_INFEASIBLE);
        assert_eq!(exit_for(&Error::Config("bad".into())), EXIT_CONFIG);
        assert_eq!(exit_for(&Error::InvalidParameter("psi".into())), EXIT_CONFIG);
        assert_eq!(exit_for(&Error::Io(std::io::Error::other("denied"))), EXIT_CONFIG);
    }
}
