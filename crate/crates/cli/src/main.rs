//! `loe`: simulate flights, run the detector over logs, sweep parameters and
//! report delay statistics.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use loe_core::replay::{
    evaluate, load_log, read_results_csv, render_table, run_detector, summarize, sweep, write_results_csv,
    write_summary_csv, FlightLog, SweepSpec,
};
use loe_core::sim::{fly_scenario, FaultEvent, Scenario, ScenarioConfig, SensorNoiseModel, VehicleParams};
use loe_core::{DetectorConfig, DetectorOutput, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "loe", version, about = "Actuator loss-of-effectiveness detection toolkit")]
struct Cli {
    /// Print the default detector configuration as TOML and exit.
    #[arg(long)]
    print_default_config: bool,

    /// Print the default sweep specification as TOML and exit.
    #[arg(long)]
    print_default_spec: bool,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fly a simulated scenario and write its sensor log.
    Simulate {
        /// hover, step-maneuvers, wind or ground-idle
        #[arg(long, default_value = "hover")]
        scenario: Scenario,
        /// Seconds of flight.
        #[arg(long, default_value_t = 10.0)]
        duration: f64,
        /// Propeller ejection as `actuator:time`, e.g. `3:1.56`.
        #[arg(long, value_parser = parse_fault)]
        fault: Option<FaultEvent>,
        /// Seeds both the flight schedule and the sensor noise.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replay a log through the detector.
    Detect {
        #[arg(long)]
        log: PathBuf,
        /// Detector configuration (TOML); defaults when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Per-tick detector output CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every parameter set of a sweep over a set of logs.
    Sweep {
        /// Glob of log files, e.g. `logs/*.csv`.
        #[arg(long)]
        logs: String,
        /// Sweep specification (TOML); the default 19-set sweep when omitted.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
        /// Worker threads, 0 for one per core.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// Summarize a sweep results CSV as a delay statistics table.
    Report {
        #[arg(long)]
        results: PathBuf,
        /// Also write the summary CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_fault(s: &str) -> std::result::Result<FaultEvent, String> {
    let (actuator, time) = s
        .split_once(':')
        .ok_or_else(|| format!("expected `actuator:time`, got `{s}`"))?;
    let actuator: usize = actuator
        .trim()
        .parse()
        .map_err(|_| format!("bad actuator index `{actuator}`"))?;
    let time: f64 = time.trim().parse().map_err(|_| format!("bad fault time `{time}`"))?;
    FaultEvent::ejection(actuator, time).map_err(|e| e.to_string())
}

fn simulate(scenario: Scenario, duration: f64, fault: Option<FaultEvent>, seed: u64, out: &Path) -> Result<()> {
    if let Some(f) = fault {
        if f.time >= duration {
            return Err(Error::InvalidArgument(format!(
                "fault time {} s is not inside the {duration} s flight",
                f.time
            )));
        }
    }
    let mut cfg = ScenarioConfig::new(scenario, duration).with_seed(seed);
    cfg.fault = fault;
    let noise = SensorNoiseModel {
        rng_seed: seed,
        ..Default::default()
    };
    let log = fly_scenario(&cfg, &VehicleParams::default(), &noise)?;
    log.write(out)?;
    match log.header.fault {
        Some(gt) => println!(
            "wrote {} samples to {}: fault_actuator={} fault_time_s={}",
            log.samples.len(),
            out.display(),
            gt.actuator,
            gt.time
        ),
        None => println!("wrote {} samples to {}: no fault", log.samples.len(), out.display()),
    }
    Ok(())
}

fn write_outputs(path: &Path, outputs: &[DetectorOutput]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["t".to_owned(), "armed".to_owned()];
    for prefix in ["k", "var", "p_fail", "failed"] {
        header.extend((1..=4).map(|i| format!("{prefix}{i}")));
    }
    w.write_record(&header)?;
    for o in outputs.iter().filter(|o| o.tick) {
        let mut row = vec![o.timestamp.to_string(), (o.armed as u8).to_string()];
        row.extend(o.k_hat.iter().map(f64::to_string));
        row.extend(o.variances.iter().map(f64::to_string));
        row.extend(o.p_fail.iter().map(f64::to_string));
        row.extend(o.status.failed.iter().map(|&f| (f as u8).to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_owned(),
        source,
    })
}

fn detect(log: &Path, config: Option<&Path>, out: Option<&Path>) -> Result<()> {
    let config = match config {
        Some(path) => DetectorConfig::load(path)?,
        None => DetectorConfig::default(),
    };
    let log = load_log(log)?;
    let outputs = run_detector(&log, &config)?;
    if let Some(path) = out {
        write_outputs(path, &outputs)?;
    }
    let r = evaluate(&outputs, log.header.fault)?;
    let fmt = |v: Option<String>| v.unwrap_or_else(|| "none".to_owned());
    println!(
        "delay_s={} false_alarms={} missed={} detected_actuator={}",
        fmt(r.detection_delay.map(|d| format!("{d:.3}"))),
        r.false_alarm_count,
        r.missed_detection,
        fmt(r.detected_actuator.map(|a| a.to_string()))
    );
    Ok(())
}

fn collect_logs(pattern: &str) -> Result<Vec<(String, FlightLog)>> {
    let paths = glob::glob(pattern).map_err(|e| Error::InvalidArgument(format!("bad glob `{pattern}`: {e}")))?;
    let mut paths: Vec<PathBuf> = paths
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    paths.retain(|p| p.is_file());
    paths.sort();
    if paths.is_empty() {
        return Err(Error::InvalidArgument(format!("no log files match `{pattern}`")));
    }
    paths
        .iter()
        .map(|p| {
            let id = p.file_stem().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned());
            Ok((id, load_log(p)?))
        })
        .collect()
}

fn run_sweep(logs: &str, spec: Option<&Path>, out_dir: &Path, jobs: usize) -> Result<()> {
    let spec = match spec {
        Some(path) => SweepSpec::load(path)?,
        None => SweepSpec::default(),
    };
    // reject bad names and values before reading any log
    spec.parameter_sets()?;
    let logs = collect_logs(logs)?;
    let results = sweep(&logs, &spec, jobs)?;
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.to_owned(),
        source,
    })?;
    let summary = summarize(&results.rows);
    write_results_csv(out_dir.join("results.csv"), &results.rows)?;
    write_summary_csv(out_dir.join("summary.csv"), &summary)?;
    println!(
        "{} parameter sets x {} logs = {} runs",
        results.sets.len(),
        logs.len(),
        results.rows.len()
    );
    print!("{}", render_table(&summary));
    Ok(())
}

fn report(results: &Path, out: Option<&Path>) -> Result<()> {
    let rows = read_results_csv(results)?;
    let summary = summarize(&rows);
    if let Some(path) = out {
        write_summary_csv(path, &summary)?;
    }
    print!("{}", render_table(&summary));
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if cli.print_default_config {
        print!("{}", DetectorConfig::default().to_toml());
        return Ok(());
    }
    if cli.print_default_spec {
        print!("{}", SweepSpec::default().to_toml());
        return Ok(());
    }
    match cli.command {
        None => Err(Error::InvalidArgument(
            "a subcommand is required (simulate, detect, sweep, report); see --help".into(),
        )),
        Some(Command::Simulate {
            scenario,
            duration,
            fault,
            seed,
            out,
        }) => simulate(scenario, duration, fault, seed, &out),
        Some(Command::Detect { log, config, out }) => detect(&log, config.as_deref(), out.as_deref()),
        Some(Command::Sweep {
            logs,
            spec,
            out_dir,
            jobs,
        }) => run_sweep(&logs, spec.as_deref(), &out_dir, jobs),
        Some(Command::Report { results, out }) => report(&results, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
