use std::io::Write;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use swarmstep::bench::{run_bench, BenchOptions, BenchSpec, DEFAULT_COUNTS};
use swarmstep::runtime::{run, RunOptions};
use swarmstep::{init_threads, load_config, record, CliError};
use swarmstep_core::sim::CircleStrategyConfig;
use swarmstep_wire::{circle_swarm_strategy, AlgoClient, CircleStrategy, RetryPolicy};

#[derive(Parser)]
#[command(name = "swarmstep", version, about = "Batched swarm simulator")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutFormat {
    Csv,
    Table,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a configured world, serving the endpoints unless headless.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Do not open any endpoint.
        #[arg(long)]
        headless: bool,
        /// Simulated seconds per wall second; 0 runs as fast as possible.
        #[arg(long, value_name = "R")]
        realtime: Option<f64>,
        /// Override the configured tick limit; 0 runs until stopped.
        #[arg(long, value_name = "N")]
        ticks: Option<u64>,
        /// Also write the snapshot stream to FILE.
        #[arg(long, value_name = "FILE")]
        record: Option<PathBuf>,
        /// Step agent groups on the calling thread only.
        #[arg(long)]
        sequential: bool,
    },
    /// Time the main loop over quadrotor counts.
    Bench {
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_COUNTS)]
        counts: Vec<usize>,
        #[arg(long, default_value_t = 500)]
        warmup: u64,
        #[arg(long, default_value_t = 2000)]
        timed: u64,
        #[arg(long, default_value_t = 1)]
        repeats: u32,
        /// What goes to stdout.
        #[arg(long, value_enum, default_value_t = OutFormat::Table)]
        out: OutFormat,
        /// Also write the CSV to FILE.
        #[arg(long, value_name = "FILE")]
        csv: Option<PathBuf>,
        /// Include in-loop collision detection in every round.
        #[arg(long)]
        with_collision: bool,
        /// Publish every round to a loopback client.
        #[arg(long)]
        with_wire: bool,
        #[arg(long)]
        sequential: bool,
    },
    /// Summarize a recorded snapshot stream.
    Replay {
        #[arg(long, value_name = "FILE")]
        record: PathBuf,
        /// Print one line per snapshot.
        #[arg(long)]
        verbose: bool,
    },
    /// Fly the circle strategy from a separate process against a running server.
    Algo {
        #[arg(long, default_value = "127.0.0.1:9001")]
        connect: SocketAddr,
        /// Take the strategy settings from this run config.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Exit after this many snapshots.
        #[arg(long, value_name = "N")]
        snapshots: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if e.use_stderr() => {
            let _ = e.print();
            eprintln!("\n{}", Cli::command().render_usage());
            return ExitCode::from(2);
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    init_threads()?;
    match cmd {
        Cmd::Run { config, headless, realtime, ticks, record, sequential } => {
            let cfg = load_config(&config)?;
            let opts = RunOptions { headless, realtime_factor: realtime, tick_limit: ticks, record, stop: None, sequential };
            let report = run(&cfg, &opts, |addrs| {
                let mut out = std::io::stdout().lock();
                match addrs {
                    Some(a) => {
                        let _ = writeln!(out, "algo    tcp {}", a.algo);
                        let _ = writeln!(out, "viewer  tcp {}", a.viewer);
                        if let Some(ws) = a.ws {
                            let _ = writeln!(out, "viewer  ws  {ws}");
                        }
                    }
                    None => {
                        let _ = writeln!(out, "headless, no endpoints");
                    }
                }
                let _ = out.flush();
            })?;
            print!("{report}");
        }
        Cmd::Bench { counts, warmup, timed, repeats, out, csv, with_collision, with_wire, sequential } => {
            let spec = BenchSpec::new(counts, warmup, timed, repeats)?;
            let options = BenchOptions { with_collision, with_wire, sequential };
            let result = run_bench(&spec, &options, |line| eprintln!("{line}"))?;
            let stdout = std::io::stdout().lock();
            match out {
                OutFormat::Csv => result.write_csv(stdout)?,
                OutFormat::Table => result.write_table(stdout)?,
            }
            if let Some(path) = csv {
                let file = std::fs::File::create(&path).map_err(|source| CliError::File { path: path.clone(), source })?;
                result.write_csv(std::io::BufWriter::new(file))?;
            }
        }
        Cmd::Replay { record, verbose } => {
            let summary = record::replay(&record, |s| {
                if verbose {
                    println!("tick {:>8}  {} agents, {} alive", s.tick, s.agent_count(), s.alive_count());
                }
            })?;
            print!("{summary}");
        }
        Cmd::Algo { connect, config, snapshots } => {
            let circle = match config {
                Some(path) => load_config(&path)?.algorithm.circle,
                None => CircleStrategyConfig::default(),
            };
            let strategy = CircleStrategy::from(&circle);
            let mut client = AlgoClient::connect(connect, RetryPolicy::default())?;
            if let Some(n) = snapshots {
                client = client.with_snapshot_limit(n);
            }
            let summary =
                client.run(|snap, dt| Ok::<_, std::convert::Infallible>(circle_swarm_strategy(snap, dt, &strategy)))?;
            println!(
                "{} snapshots, {} command messages, {} reconnects",
                summary.snapshots, summary.command_msgs, summary.reconnects
            );
        }
    }
    Ok(())
}
