use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use powergame::system::SystemParams;
use powergame::ReceiverKind;
use powergame_cli::delay::DelaySweep;
use powergame_cli::equilibrium::{ObjectiveChoice, ReceiverChoice};
use powergame_cli::load::LoadSweep;
use powergame_cli::multicarrier::McSweep;
use powergame_cli::pricing::PricingSweep;
use powergame_cli::range::{LinearRange, LogRange};
use powergame_cli::scenario::Scenario;
use powergame_cli::{gamma_star_table, CliError, Format, RunOptions, Table};

#[derive(Parser)]
#[command(name = "powergame", version, about = "Energy-efficient power control games for uplink CDMA")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Base seed; trial t uses seed + t. Overrides a scenario's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Convergence threshold on the largest power change, relative to P_max.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, global = true, default_value_t = 100_000)]
    max_iters: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Write the table here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Efficiency {
    /// Efficiency function family; only `exp-m`, (1 - e^-γ)^M, is built in.
    #[arg(long, default_value = "exp-m", value_parser = ["exp-m"])]
    efficiency: String,
    /// Packet length M in bits.
    #[arg(long, default_value_t = 100)]
    packet_size: u32,
}

#[derive(Subcommand)]
enum Command {
    /// Target SIR maximizing f(γ)/γ.
    GammaStar {
        #[command(flatten)]
        eff: Efficiency,
    },
    /// Nash equilibrium of one scenario.
    Equilibrium {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum, default_value_t = ReceiverChoice::Mf)]
        receiver: ReceiverChoice,
        #[arg(long, value_enum, default_value_t = ObjectiveChoice::Bpj)]
        objective: ObjectiveChoice,
        #[command(flatten)]
        eff: Efficiency,
    },
    /// Equilibrium utility against load: large-system formula and finite Monte Carlo.
    SweepLoad {
        #[arg(long, default_value = "0.05:1.5:0.05")]
        alpha: LinearRange,
        #[arg(long, value_delimiter = ',', default_value = "mf,de,mmse")]
        receivers: Vec<ReceiverArg>,
        #[arg(long, value_delimiter = ',', default_value = "1")]
        antennas: Vec<usize>,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        /// Processing gain N of the finite system.
        #[arg(long, default_value_t = 256)]
        gain: usize,
        #[arg(long, default_value_t = 100.0)]
        distance: f64,
        #[command(flatten)]
        eff: Efficiency,
    },
    /// Joint carrier selection against per-carrier maximization.
    Multicarrier {
        /// User counts, start:stop:step.
        #[arg(long, default_value = "1:16:1")]
        users: LinearRange,
        #[arg(long, default_value_t = 2)]
        carriers: usize,
        #[arg(long, default_value_t = 128)]
        gain: usize,
        #[arg(long, default_value_t = 20)]
        trials: usize,
        #[arg(long, default_value_t = 100.0)]
        distance: f64,
        #[command(flatten)]
        eff: Efficiency,
    },
    /// User size, capacity, rate and goodput against the normalized delay bound.
    DelayQos {
        /// Source rates in packets per second.
        #[arg(long, value_delimiter = ',', default_value = "10,50,100")]
        source_rates: Vec<f64>,
        /// Normalized delay range D·B, start:stop.
        #[arg(long, default_value = "1e4:1e7")]
        delay_range: LogRange,
        #[arg(long, default_value_t = 10)]
        points_per_decade: usize,
        #[arg(long, default_value_t = 5e6)]
        bandwidth: f64,
        #[command(flatten)]
        eff: Efficiency,
    },
    /// Pareto effect of a common linear power price.
    Pricing {
        #[arg(long, default_value_t = 10)]
        instances: usize,
        #[arg(long, default_value_t = 12)]
        max_users: usize,
        /// Price factor range κ, start:stop.
        #[arg(long, default_value = "1e-12:1")]
        price_range: LogRange,
        #[arg(long, default_value_t = 10)]
        points_per_decade: usize,
        #[command(flatten)]
        eff: Efficiency,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum ReceiverArg {
    Mf,
    De,
    Mmse,
}

impl From<ReceiverArg> for ReceiverKind {
    fn from(r: ReceiverArg) -> Self {
        match r {
            ReceiverArg::Mf => ReceiverKind::Mf,
            ReceiverArg::De => ReceiverKind::De,
            ReceiverArg::Mmse => ReceiverKind::Mmse,
        }
    }
}

fn positive(name: &str, v: usize) -> Result<usize, CliError> {
    if v == 0 {
        return Err(CliError::Config(format!("--{name} must be at least 1")));
    }
    Ok(v)
}

fn run(cli: Cli) -> Result<(Table, Format, Option<PathBuf>), CliError> {
    let g = cli.global;
    let opts = RunOptions {
        seed: g.seed.unwrap_or(RunOptions::default().seed),
        tol: g.tol,
        max_iters: g.max_iters,
    };
    opts.validate()?;
    let model = |eff: &Efficiency| {
        powergame::EfficiencyModel::exp_m(eff.packet_size).map_err(|e| CliError::Config(e.to_string()))
    };
    let table = match cli.command {
        Command::GammaStar { eff } => gamma_star_table(eff.packet_size)?,
        Command::Equilibrium {
            config,
            receiver,
            objective,
            eff,
        } => {
            let scenario = Scenario::load(&config)?;
            let opts = RunOptions {
                seed: g.seed.unwrap_or(scenario.seed),
                ..opts
            };
            let run = powergame_cli::equilibrium::solve(&scenario, receiver, objective, model(&eff)?, &opts)?;
            powergame_cli::equilibrium::table(&run)
        }
        Command::SweepLoad {
            alpha,
            receivers,
            antennas,
            trials,
            gain,
            distance,
            eff,
        } => {
            if antennas.contains(&0) {
                return Err(CliError::Config("--antennas must be at least 1".into()));
            }
            let sweep = LoadSweep {
                alphas: alpha.values(),
                receivers: receivers.into_iter().map(Into::into).collect(),
                antennas,
                trials: positive("trials", trials)?,
                processing_gain: positive("gain", gain)?,
                distance_m: distance,
                system: SystemParams::default(),
                efficiency: model(&eff)?,
            };
            powergame_cli::load::table(&sweep.run(&opts)?)
        }
        Command::Multicarrier {
            users,
            carriers,
            gain,
            trials,
            distance,
            eff,
        } => {
            let users: Vec<usize> = users.values().into_iter().map(|k| k.round() as usize).collect();
            if users.contains(&0) {
                return Err(CliError::Config("--users must be at least 1".into()));
            }
            let sweep = McSweep {
                users,
                carriers: positive("carriers", carriers)?,
                processing_gain: positive("gain", gain)?,
                trials: positive("trials", trials)?,
                distance_m: distance,
                system: SystemParams::default(),
                efficiency: model(&eff)?,
            };
            powergame_cli::multicarrier::table(&sweep.run(&opts)?)
        }
        Command::DelayQos {
            source_rates,
            delay_range,
            points_per_decade,
            bandwidth,
            eff,
        } => {
            let sweep = DelaySweep {
                delays: delay_range.values(positive("points-per-decade", points_per_decade)?),
                source_rates_pps: source_rates,
                bandwidth_hz: bandwidth,
                packet_size_bits: eff.packet_size,
            };
            powergame_cli::delay::table(&sweep.run()?)
        }
        Command::Pricing {
            instances,
            max_users,
            price_range,
            points_per_decade,
            eff,
        } => {
            let sweep = PricingSweep {
                instances: positive("instances", instances)?,
                max_users,
                price_factors: price_range.values(positive("points-per-decade", points_per_decade)?),
                efficiency: model(&eff)?,
                ..PricingSweep::default()
            };
            powergame_cli::pricing::table(&sweep.run(&opts)?)
        }
    };
    Ok((table, g.format, g.out))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = run(cli).and_then(|(table, format, out)| {
        let text = table.render(format);
        match out {
            Some(path) => std::fs::write(&path, text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display()))),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
