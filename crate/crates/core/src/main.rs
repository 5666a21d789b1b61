use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ftmsim::adversary::sniff_report;
use ftmsim::harness::{builtin_presets, export_csv, load_scenario, run_scenario, ResultSet, Scenario};

#[derive(Parser)]
#[command(name = "ftmsim", version, about = "Wi-Fi FTM ranging simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// List built-in scenarios, devices and environments.
    Presets,
    /// Run a scenario and write <scenario>_<seed>.csv.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides the seed in the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the scenario's attacker and print the outcome.
    Attack {
        #[arg(long)]
        config: PathBuf,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

fn load(path: &PathBuf) -> Result<Scenario, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })?;
    load_scenario(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })
}

fn execute(scenario: &Scenario) -> Result<ResultSet, ExitCode> {
    run_scenario(scenario).map_err(|e| {
        eprintln!("error: {e}");
        ExitCode::from(EXIT_RUNTIME)
    })
}

fn print_summary(r: &ResultSet) {
    let s = &r.scenario;
    println!(
        "scenario {} (config {}, seed {}), {} samples per distance",
        s.name,
        s.config_name,
        s.seed,
        s.samples_per_distance()
    );
    for note in &s.defaults_applied {
        println!("  default: {note}");
    }
    println!("  {:>8}  {:>9}  {:>8}  {:>8}  {:>8}  {:>7}", "true_m", "mean_m", "std_m", "mae_m", "p90_m", "dropped");
    for d in &r.distances {
        match &d.stats {
            Some(st) => println!(
                "  {:>8.3}  {:>9.4}  {:>8.4}  {:>8.4}  {:>8.4}  {:>7}",
                d.true_distance_m, st.mean_est_m, st.std_est_m, st.mean_abs_error_m, st.p90_abs_error_m, d.dropped_samples
            ),
            None => println!("  {:>8.3}  all samples dropped", d.true_distance_m),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Presets => {
            print!("{}", builtin_presets());
            Ok(())
        }
        Command::Run { config, out, seed } => (|| {
            let mut scenario = load(&config)?;
            if let Some(seed) = seed {
                scenario.seed = seed;
            }
            let results = execute(&scenario)?;
            let path = export_csv(&results, &out).map_err(|e| {
                eprintln!("error: cannot write csv: {e}");
                ExitCode::from(EXIT_RUNTIME)
            })?;
            print_summary(&results);
            println!("wrote {}", path.display());
            Ok(())
        })(),
        Command::Attack { config } => (|| {
            let scenario = load(&config)?;
            if scenario.attacker.is_none() {
                eprintln!("error: {}: no [attacker] section", config.display());
                return Err(ExitCode::from(EXIT_CONFIG));
            }
            let results = execute(&scenario)?;
            let attack = results.attack.expect("attacker configured");
            println!("{}", attack.outcome);
            if !attack.sniffed.is_empty() {
                print!("{}", sniff_report(&attack.sniffed));
            }
            Ok(())
        })(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(code) => code,
    }
}
