use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use cranplace::des::{simulate_queue, Discipline};
use cranplace::exact::{check_constraints, solve_exact};
use cranplace::experiments::presets::{compare_spec, sweep_spec, ScenarioSpec};
use cranplace::experiments::{compare_heuristics, optimal_cloud_count, run_sweep};
use cranplace::heuristics::{place, HeuristicConfig, HeuristicKind};
use cranplace::io::{load_scenario, save_scenario, write_exact, write_placement, write_report, write_sweep, ScenarioFile};
use cranplace::queueing::QueueLoad;
use cranplace::state::Engine;
use cranplace::{Error, Result};

#[derive(Parser)]
#[command(name = "cranplace", version, about = "Delay-aware baseband function placement experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Standard,
    Compare,
    Sweep,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario file
    Generate {
        #[arg(long)]
        bs: usize,
        #[arg(long)]
        clouds: usize,
        #[arg(long)]
        requests: usize,
        #[arg(long)]
        load: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Generator settings to start from
        #[arg(long, value_enum, default_value = "standard")]
        preset: Preset,
    },
    /// Optimal placement by exhaustive search (small instances only)
    SolveExact {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one heuristic
    Place {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        heuristic: HeuristicKind,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the number of clouds
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        /// Inclusive range, e.g. 1..15
        #[arg(long)]
        clouds: String,
        #[arg(long)]
        load: f64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "bnb-sa")]
        heuristic: HeuristicKind,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Simulate a single queue
    Simulate {
        #[arg(long)]
        discipline: Discipline,
        #[arg(long)]
        rho: f64,
        #[arg(long)]
        mu: f64,
        #[arg(long)]
        packets: usize,
        #[arg(long)]
        seed: u64,
        /// Buffer size in bytes
        #[arg(long, default_value_t = 1e9)]
        buffer: f64,
    },
    /// Compare all heuristics on request-count prefixes
    Compare {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated request counts
        #[arg(long, value_delimiter = ',')]
        axis: Vec<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn parse_range(s: &str) -> Result<Vec<usize>> {
    let bad = || Error::Invalid(format!("expected LO..HI, got `{s}`"));
    let (lo, hi) = s.split_once("..").ok_or_else(bad)?;
    let lo: usize = lo.trim().parse().map_err(|_| bad())?;
    let hi: usize = hi.trim_start_matches('=').trim().parse().map_err(|_| bad())?;
    if lo == 0 || lo > hi {
        return Err(bad());
    }
    Ok((lo..=hi).collect())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate {
            bs,
            clouds,
            requests,
            load,
            seed,
            out,
            preset,
        } => {
            let mut spec = match preset {
                Preset::Standard => ScenarioSpec::standard(bs, clouds, requests, load, seed),
                Preset::Compare => compare_spec(requests, seed),
                Preset::Sweep => sweep_spec(clouds, load, seed),
            };
            spec.n_bs = bs;
            spec.n_clouds = clouds;
            spec.workload.n_bs = bs;
            spec.workload.n_requests = requests;
            spec.workload.load_fraction = load;
            spec.workload.seed = seed;
            let scenario = spec.build()?;
            save_scenario(
                &out,
                &ScenarioFile {
                    generator: Some(spec),
                    scenario,
                },
            )?;
            println!("wrote {}", out.display());
        }
        Command::SolveExact { scenario, out } => {
            let file = load_scenario(&scenario)?;
            let sol = solve_exact(&file.scenario)?;
            let e = Engine::new(&file.scenario)?;
            let report = check_constraints(&e, &sol.state);
            write_exact(&sol, &report, &out)?;
            println!("objective {} s, {} dropped", sol.objective, sol.dropped);
        }
        Command::Place {
            scenario,
            heuristic,
            seed,
            out,
        } => {
            let file = load_scenario(&scenario)?;
            let config = HeuristicConfig::for_scenario(heuristic, seed, &file.scenario);
            let r = place(&file.scenario, &config)?;
            write_placement(&r, &out)?;
            println!(
                "{}: {} satisfied, {} dropped, {} migrations, {:.1} ms",
                heuristic,
                r.satisfied,
                r.dropped,
                r.migrations,
                r.wall_time * 1e3
            );
        }
        Command::Sweep {
            scenario,
            clouds,
            load,
            out,
            heuristic,
            seed,
        } => {
            let file = load_scenario(&scenario)?;
            let spec = file
                .generator
                .ok_or_else(|| Error::Invalid("scenario file carries no generator settings".into()))?;
            let points = run_sweep(&spec, &parse_range(&clouds)?, load, heuristic, seed)?;
            write_sweep(&points, &out.join("sweep.csv"))?;
            println!("optimal clouds: {}", optimal_cloud_count(&points)?);
        }
        Command::Simulate {
            discipline,
            rho,
            mu,
            packets,
            seed,
            buffer,
        } => {
            let r = simulate_queue(discipline, QueueLoad::new(rho * mu, mu), packets, buffer, seed)?;
            println!("mean_sojourn,ci95_halfwidth,packets_served,drops");
            println!("{},{},{},{}", r.mean_sojourn, r.ci95_halfwidth, r.packets_served, r.drops);
        }
        Command::Compare {
            scenario,
            axis,
            out,
            seed,
        } => {
            let file = load_scenario(&scenario)?;
            let configs: Vec<HeuristicConfig> = HeuristicKind::ALL
                .into_iter()
                .map(|k| HeuristicConfig::for_scenario(k, seed, &file.scenario))
                .collect();
            let report = compare_heuristics(&file.scenario, &axis, &configs)?;
            for p in write_report(&report, &out)? {
                println!("wrote {}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
