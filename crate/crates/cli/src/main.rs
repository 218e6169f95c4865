//! `gridmpc`: generate storm scenarios, run the receding-horizon controller,
//! and report forecast error.
//!
//! Exit status is 0 on success, 1 for bad input, 2 when the optimizer fails.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use gridmpc_core::scenario::GeneratorConfig;
use gridmpc_core::{
    comm_loss_rmse, generate_synthetic, load_scenario, run_with, BatteryParams, BlcCurve, MpcConfig, ScenarioTimeSeries,
    SimulationResult, StrideMode, Weights,
};
use gridmpc_milp::write_lp;

#[derive(Parser, Debug)]
#[command(name = "gridmpc", version, about = "Sliding-window MPC for an isolated microgrid under a storm event")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the 72-hour simulation and write trace.csv, summary.json and ri_curve.csv.
    Simulate(SimulateArgs),
    /// Write a synthetic scenario CSV.
    Generate(GenerateArgs),
    /// Print the two-hour-average forecaster's RMSE over the comm-loss hours.
    Rmse {
        /// Scenario CSV.
        scenario: PathBuf,
    },
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Use the built-in storm generator instead of a file.
    #[arg(long, conflicts_with = "scenario", requires = "seed")]
    synthetic: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Scenario CSV (`hour,wind_kw,solar_kw,essential_kw,regular_kw,hilp,comm_loss`).
    #[arg(long, required_unless_present = "synthetic")]
    scenario: Option<PathBuf>,
    #[command(flatten)]
    weights: WeightArgs,
    #[command(flatten)]
    params: ParamArgs,
    /// Lifecycle curve CSV (`dod,cycles`, 9 rows).
    #[arg(long)]
    curve: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "hour")]
    stride: Stride,
    /// Output directory, created if missing.
    #[arg(short = 'o', long = "out")]
    out: PathBuf,
    /// Write the horizon problem of `--dump-hour` in LP text format.
    #[arg(long)]
    dump_milp: Option<PathBuf>,
    #[arg(long, default_value_t = 0, requires = "dump_milp")]
    dump_hour: usize,
}

#[derive(Args, Debug)]
struct WeightArgs {
    #[arg(long)]
    w_bat: Option<f64>,
    #[arg(long)]
    w_blc: Option<f64>,
    #[arg(long)]
    w_t: Option<f64>,
    #[arg(long)]
    w_r: Option<f64>,
    #[arg(long)]
    w_essential: Option<f64>,
    #[arg(long)]
    w_regular: Option<f64>,
}

impl WeightArgs {
    fn apply(&self, mut w: Weights) -> Weights {
        let set = |slot: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *slot = v;
            }
        };
        set(&mut w.w_bat, self.w_bat);
        set(&mut w.w_blc, self.w_blc);
        set(&mut w.w_t, self.w_t);
        set(&mut w.w_r, self.w_r);
        set(&mut w.w_essential, self.w_essential);
        set(&mut w.w_regular, self.w_regular);
        w
    }
}

#[derive(Args, Debug)]
struct ParamArgs {
    #[arg(long)]
    eta_ch: Option<f64>,
    #[arg(long)]
    eta_dis: Option<f64>,
    #[arg(long)]
    soc_init: Option<f64>,
    #[arg(long)]
    soc_min: Option<f64>,
    #[arg(long)]
    soc_max: Option<f64>,
    /// Battery capacity in kWh.
    #[arg(long)]
    e_max: Option<f64>,
    /// Charge and discharge power limit in kW.
    #[arg(long)]
    p_max: Option<f64>,
    #[arg(long)]
    c_bat: Option<f64>,
    #[arg(long)]
    c_ch_dis: Option<f64>,
    #[arg(long)]
    c_no_ch_dis: Option<f64>,
    #[arg(long)]
    c_idle: Option<f64>,
}

impl ParamArgs {
    fn apply(&self, mut p: BatteryParams) -> BatteryParams {
        let pairs = [
            (&mut p.eta_ch, self.eta_ch),
            (&mut p.eta_dis, self.eta_dis),
            (&mut p.soc_init, self.soc_init),
            (&mut p.soc_min, self.soc_min),
            (&mut p.soc_max, self.soc_max),
            (&mut p.e_max, self.e_max),
            (&mut p.p_max, self.p_max),
            (&mut p.c_bat, self.c_bat),
            (&mut p.c_ch_dis, self.c_ch_dis),
            (&mut p.c_no_ch_dis, self.c_no_ch_dis),
            (&mut p.c_idle, self.c_idle),
        ];
        for (slot, v) in pairs {
            if let Some(v) = v {
                *slot = v;
            }
        }
        p
    }
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Stride {
    Hour,
    Day,
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// First and last hour of the storm.
    #[arg(long, default_value_t = 27)]
    hilp_start: usize,
    #[arg(long, default_value_t = 39)]
    hilp_end: usize,
    /// Telemetry outage, defaulting to the storm hours.
    #[arg(long)]
    comm_loss_start: Option<usize>,
    #[arg(long)]
    comm_loss_end: Option<usize>,
    /// Keep telemetry up for the whole series.
    #[arg(long, conflicts_with_all = ["comm_loss_start", "comm_loss_end"])]
    no_comm_loss: bool,
    /// Clock hour of hour 0.
    #[arg(long, default_value_t = 0)]
    start_clock: usize,
    #[arg(short = 'o', long = "out")]
    out: PathBuf,
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

fn user(message: impl Into<String>) -> Failure {
    Failure {
        code: 1,
        message: message.into(),
    }
}

impl From<gridmpc_core::Error> for Failure {
    fn from(e: gridmpc_core::Error) -> Self {
        Failure {
            code: if e.is_internal() { 2 } else { 1 },
            message: e.to_string(),
        }
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| user(format!("cannot write `{}`: {e}", path.display())))
}

fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let weights = args.weights.apply(Weights::default());
    weights.validate()?;
    let params = args.params.apply(BatteryParams::default());
    params.validate()?;
    let curve = match &args.curve {
        Some(path) => BlcCurve::load(path)?,
        None => BlcCurve::default(),
    };
    let scenario: ScenarioTimeSeries = match (&args.scenario, args.seed) {
        (Some(path), _) => load_scenario(path)?,
        (None, Some(seed)) => generate_synthetic(seed, &GeneratorConfig::default())?,
        (None, None) => return Err(user("give --scenario or --synthetic --seed")),
    };
    let config = MpcConfig {
        weights,
        params,
        curve,
        stride: match args.stride {
            Stride::Hour => StrideMode::Hour,
            Stride::Day => StrideMode::Day,
        },
        ..MpcConfig::default()
    };
    if args.dump_milp.is_some() && args.dump_hour >= config.simulation_hours {
        return Err(user(format!(
            "--dump-hour {} is past the last decision hour {}",
            args.dump_hour,
            config.simulation_hours - 1
        )));
    }
    fs::create_dir_all(&args.out).map_err(|e| user(format!("cannot create `{}`: {e}", args.out.display())))?;

    let mut dumped = None;
    let result = run_with(&scenario, &config, |hour, model| {
        if args.dump_milp.is_some() && hour == args.dump_hour {
            dumped = Some(write_lp(&model.problem, &format!("horizon problem at decision hour {hour}")));
        }
        Ok(())
    })?;
    if let (Some(path), Some(text)) = (&args.dump_milp, dumped) {
        write_file(path, text)?;
    }
    write_outputs(&args.out, &result)
}

fn write_outputs(dir: &Path, result: &SimulationResult) -> Result<(), Failure> {
    let mut trace = String::from("hour,mode,p_ch,p_dis,soc,essential_shed,regular_shed,surplus,expected_ri\n");
    for r in &result.records {
        trace.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.hour, r.mode, r.p_ch, r.p_dis, r.soc_after, r.essential_shed, r.regular_shed, r.surplus, r.expected_ri
        ));
    }
    write_file(&dir.join("trace.csv"), trace)?;

    let mut curve = String::from("hour,expected_ri\n");
    for (hour, ri) in &result.expected_ri_curve {
        curve.push_str(&format!("{hour},{ri}\n"));
    }
    write_file(&dir.join("ri_curve.csv"), curve)?;

    let json = serde_json::to_string_pretty(&result.summary()).expect("summary serializes");
    write_file(&dir.join("summary.json"), json + "\n")
}

fn generate(args: GenerateArgs) -> Result<(), Failure> {
    if args.hilp_start > args.hilp_end {
        return Err(user("--hilp-start is after --hilp-end"));
    }
    let comm_loss = if args.no_comm_loss {
        None
    } else {
        let start = args.comm_loss_start.unwrap_or(args.hilp_start);
        let end = args.comm_loss_end.unwrap_or(args.hilp_end);
        if start > end {
            return Err(user("comm-loss window ends before it starts"));
        }
        Some(start..=end)
    };
    let config = GeneratorConfig {
        hilp: args.hilp_start..=args.hilp_end,
        comm_loss,
        start_clock: args.start_clock,
        ..GeneratorConfig::default()
    };
    let series: ScenarioTimeSeries = generate_synthetic(args.seed, &config)?;
    series.save(&args.out)?;
    Ok(())
}

fn rmse(path: &Path) -> Result<(), Failure> {
    let series: ScenarioTimeSeries = load_scenario(path)?;
    match comm_loss_rmse(&series)? {
        None => println!("no comm-loss window"),
        Some(r) => {
            println!("essential {:.6}", r.essential);
            println!("regular {:.6}", r.regular);
            println!("total {:.6}", r.total);
        }
    }
    Ok(())
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
    let outcome = match cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Generate(args) => generate(args),
        Command::Rmse { scenario } => rmse(&scenario),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
