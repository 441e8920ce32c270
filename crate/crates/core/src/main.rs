use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use uansim::ber::{ber_analytic, ber_threshold, pilot_ber, BerEstimate, EstimationMethod, PilotChannelSpec};
use uansim::env::DataCollectEnv;
use uansim::mobility::{sample_trajectory, write_trajectory_csv, TrajectoryConfig};
use uansim::net::{write_metrics_csv, Network};
use uansim::packet::{header_tx_delay, HeaderMode, PacketKind};
use uansim::phy::Modulation;
use uansim::propagation::{synthetic_table, SyntheticTableParams};
use uansim::scenario::{parse_value, sweep, with_overrides, Scenario};
use uansim::trace::TraceSink;

#[derive(Parser)]
#[command(name = "uansim", version, about = "Discrete-event simulator for underwater acoustic networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario (file path or bundled name).
    Run {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// JSON Lines packet trace.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Metrics CSV; printed to stdout when absent.
        #[arg(long)]
        metrics: Option<PathBuf>,
        /// Override a scenario key, e.g. `--set phy.mode=qpsk`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a scenario once per value of one parameter.
    Sweep {
        scenario: String,
        #[arg(long)]
        param: String,
        #[arg(long, num_args = 1.., required = true)]
        values: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Bit error rate against SNR or Eb/N0.
    BerSweep {
        #[arg(long, value_enum, default_value = "analytic")]
        method: BerKind,
        /// Modulation for the analytic method; all five when absent.
        #[arg(long)]
        mode: Option<Modulation>,
        #[arg(long, default_value_t = 0.0)]
        from: f64,
        #[arg(long, default_value_t = 20.0)]
        to: f64,
        #[arg(long, default_value_t = 1.0)]
        step: f64,
        /// Threshold of the threshold method, dB.
        #[arg(long, default_value_t = 5.0)]
        threshold: f64,
        /// Monte Carlo trials per point.
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Flat single-tap channel instead of the default three-tap Rayleigh one.
        #[arg(long)]
        flat: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Header size and header transmission delay of every packet kind.
    Table1 {
        #[arg(long, default_value_t = 500.0)]
        rate: f64,
    },
    /// Sample a mobility model to CSV `t,x,y,z`.
    Trajectory {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drive the data-collection environment with scripted actions.
    Env {
        scenario: String,
        /// One line per step, one action index per agent, comma separated.
        #[arg(long)]
        actions: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic deep-water arrival table.
    GenTable {
        #[arg(long, default_value_t = 10.0)]
        frequency_khz: f64,
        #[arg(long, default_value_t = 10_000.0)]
        max_range: f64,
        #[arg(long, default_value_t = 250.0)]
        range_step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the bundled scenarios.
    Scenarios,
}

#[derive(Clone, Copy, ValueEnum)]
enum BerKind {
    Threshold,
    Analytic,
    Ls,
    Mmse,
    Ideal,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("cannot create {}", p.display()))?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn parse_overrides(items: &[String]) -> Result<Vec<(String, toml::Value)>> {
    items
        .iter()
        .map(|s| match s.split_once('=') {
            Some((k, v)) => Ok((k.trim().to_string(), parse_value(v.trim()))),
            None => bail!("override {s:?} must look like KEY=VALUE"),
        })
        .collect()
}

fn load(source: &str, overrides: &[String], seed: Option<u64>) -> Result<Scenario> {
    let mut s = Scenario::load(source)?;
    let overrides = parse_overrides(overrides)?;
    if !overrides.is_empty() {
        s = with_overrides(&s, &overrides)?;
    }
    if let Some(seed) = seed {
        s.seed = seed;
    }
    Ok(s)
}

fn run(scenario: &str, seed: Option<u64>, trace: Option<&Path>, metrics: Option<&Path>, overrides: &[String]) -> Result<()> {
    let s = load(scenario, overrides, seed)?;
    let mut net = Network::from_scenario(&s)?;
    if let Some(p) = trace {
        if s.trace.enabled {
            let f = File::create(p).with_context(|| format!("cannot create {}", p.display()))?;
            net.set_trace(TraceSink::Writer(Box::new(BufWriter::new(f))));
        }
    }
    let outcome = net.run()?;
    write_metrics_csv(output(metrics)?, &[outcome.metrics])?;
    Ok(())
}

fn run_sweep(scenario: &str, param: &str, values: &[String], out: Option<&Path>, overrides: &[String]) -> Result<()> {
    let base = load(scenario, overrides, None)?;
    let values: Vec<toml::Value> = values.iter().map(|v| parse_value(v)).collect();
    let points = sweep(&base, param, &values)?;
    let mut w = csv::Writer::from_writer(output(out)?);
    let mut header = vec![param.to_string()];
    header.extend(uansim::net::MetricsSummary::csv_header());
    w.write_record(&header)?;
    for p in points {
        let value = match &p.value {
            toml::Value::String(s) => s.clone(),
            v => v.to_string(),
        };
        let mut row = vec![value];
        row.extend(p.metrics.csv_record());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn ber_sweep(kind: BerKind, mode: Option<Modulation>, from: f64, to: f64, step: f64, threshold: f64, trials: u64, seed: u64, flat: bool, out: Option<&Path>) -> Result<()> {
    if !(step > 0.0) || to < from {
        bail!("need --step > 0 and --to >= --from");
    }
    let mut w = csv::Writer::from_writer(output(out)?);
    w.write_record(["method", "mode", "x_db", "ber", "std_error", "bit_errors", "bits"])?;
    let n = ((to - from) / step + 1e-9).floor() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| from + i as f64 * step).collect();
    let spec = if flat { PilotChannelSpec::flat() } else { PilotChannelSpec::default() };
    let modes: Vec<Modulation> = mode.map(|m| vec![m]).unwrap_or_else(|| Modulation::ALL.to_vec());
    let emit = |w: &mut csv::Writer<_>, mode: &str, x: f64, e: BerEstimate| -> Result<()> {
        if let Some(msg) = &e.warning {
            eprintln!("warning at {x} dB: {msg}");
        }
        w.write_record([e.method.name().to_string(), mode.to_string(), x.to_string(), e.ber.to_string(), e.std_error.to_string(), e.bit_errors.to_string(), e.bits.to_string()])?;
        Ok(())
    };
    for &x in &grid {
        match kind {
            BerKind::Threshold => emit(&mut w, "any", x, ber_threshold(x, threshold))?,
            BerKind::Analytic => {
                for m in &modes {
                    emit(&mut w, m.name(), x, ber_analytic(*m, x))?;
                }
            }
            BerKind::Ls | BerKind::Mmse | BerKind::Ideal => {
                let method = match kind {
                    BerKind::Ls => EstimationMethod::Ls,
                    BerKind::Mmse => EstimationMethod::Mmse,
                    _ => EstimationMethod::Ideal,
                };
                let e = pilot_ber(&spec, method, x, trials, seed).map_err(anyhow::Error::msg)?;
                emit(&mut w, "qpsk", x, e)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn table1(rate: f64) -> Result<()> {
    if !(rate > 0.0) {
        bail!("--rate must be > 0");
    }
    let mut w = csv::Writer::from_writer(io::stdout().lock());
    w.write_record(["protocol", "kind", "hs_bytes", "td_s", "tg_hs_bytes", "tg_td_s"])?;
    for kind in PacketKind::ALL {
        let (hs, tg) = (kind.header_size(HeaderMode::Adaptive), kind.header_size(HeaderMode::Fixed));
        w.write_record([
            kind.protocol().name().to_string(),
            kind.label().to_string(),
            hs.to_string(),
            format!("{:.2}", header_tx_delay(kind, HeaderMode::Adaptive, rate)),
            tg.to_string(),
            format!("{:.2}", header_tx_delay(kind, HeaderMode::Fixed, rate)),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn trajectory(config: &Path, out: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(config).with_context(|| format!("cannot read {}", config.display()))?;
    let cfg: TrajectoryConfig = toml::from_str(&text).with_context(|| format!("invalid trajectory config {}", config.display()))?;
    if !(cfg.dt > 0.0 && cfg.duration >= 0.0) {
        bail!("need dt > 0 and duration >= 0");
    }
    let model = cfg.mobility.build(cfg.start, config.parent())?;
    write_trajectory_csv(output(out)?, &sample_trajectory(&model, cfg.duration, cfg.dt))?;
    Ok(())
}

fn read_actions(path: &Path) -> Result<Vec<Vec<usize>>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.split(',')
                .map(|a| a.trim().parse::<usize>().with_context(|| format!("{}:{}: bad action {a:?}", path.display(), i + 1)))
                .collect()
        })
        .collect()
}

fn scripted_env(scenario: &str, actions: &Path, seed: Option<u64>, out: Option<&Path>) -> Result<()> {
    let mut env = DataCollectEnv::load(scenario)?;
    let script = read_actions(actions)?;
    env.reset(seed)?;
    let mut w = csv::Writer::from_writer(output(out)?);
    let agents = env.action_spec().agents;
    let mut header = vec!["step".to_string(), "time".to_string()];
    header.extend(agents.iter().map(|a| format!("reward_{a}")));
    header.extend(["done".to_string(), "observation".to_string()]);
    w.write_record(&header)?;
    for (k, actions) in script.iter().enumerate() {
        let r = env.step(actions)?;
        let mut row = vec![(k + 1).to_string(), r.observation.time.as_secs().to_string()];
        row.extend(r.rewards.iter().map(|x| x.to_string()));
        row.push(r.done.to_string());
        let flat: Vec<String> = r
            .observation
            .agents
            .iter()
            .flat_map(|a| a.values.iter().map(|v| v.to_string()))
            .collect();
        row.push(flat.join(" "));
        w.write_record(&row)?;
        if r.done {
            break;
        }
    }
    w.flush()?;
    env.close();
    Ok(())
}

fn gen_table(frequency_khz: f64, max_range: f64, range_step: f64, out: Option<&Path>) -> Result<()> {
    let params = SyntheticTableParams {
        frequency_khz,
        max_range_m: max_range,
        range_step_m: range_step,
        ..Default::default()
    };
    let table = synthetic_table(&params)?;
    let mut w = output(out)?;
    table.write(&mut w)?;
    w.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            scenario,
            seed,
            trace,
            metrics,
            overrides,
        } => run(&scenario, seed, trace.as_deref(), metrics.as_deref(), &overrides),
        Command::Sweep {
            scenario,
            param,
            values,
            out,
            overrides,
        } => run_sweep(&scenario, &param, &values, out.as_deref(), &overrides),
        Command::BerSweep {
            method,
            mode,
            from,
            to,
            step,
            threshold,
            trials,
            seed,
            flat,
            out,
        } => ber_sweep(method, mode, from, to, step, threshold, trials, seed, flat, out.as_deref()),
        Command::Table1 { rate } => table1(rate),
        Command::Trajectory { config, out } => trajectory(&config, out.as_deref()),
        Command::Env {
            scenario,
            actions,
            seed,
            out,
        } => scripted_env(&scenario, &actions, seed, out.as_deref()),
        Command::GenTable {
            frequency_khz,
            max_range,
            range_step,
            out,
        } => gen_table(frequency_khz, max_range, range_step, out.as_deref()),
        Command::Scenarios => {
            for name in uansim::scenario::bundled_names() {
                println!("{name}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
