use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dstls::battery::simulate_cell;
use dstls::config::AppConfig;
use dstls::drive::{current_from_speed, generate_trip, TripSpec};
use dstls::etre::{match_all, parse_etre};
use dstls::eval::{l_tls_from_segments, run_monte_carlo, save_results_csv};
use dstls::pipeline::{
    ds_tls_run, l_bounds, rls_run, save_estimate_csv, save_segments_csv, tls_fixed_run,
    EstimateTrace, Method, SelectorConfig,
};
use dstls::signal::{derive_seed, load_signal_csv, save_signal_csv};
use dstls::{Result, SampledSignal};

/// Data-selective battery parameter identification toolkit.
#[derive(Parser)]
#[command(name = "dstls", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic trips: speed and cell-trace CSVs plus a manifest.
    GenTrips {
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Output directory (overrides paths.out_dir).
        #[arg(long, value_name = "DIR")]
        out_dir: Option<PathBuf>,
    },
    /// Match an ETRE against a speed CSV; prints begin,end,begin_s,end_s.
    Match {
        /// Expression text, e.g. 'tube(20,5)+ within [60,60]'.
        #[arg(long, conflicts_with = "expr_file")]
        expr: Option<String>,
        /// File containing the expression.
        #[arg(long, value_name = "FILE")]
        expr_file: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        speed: PathBuf,
    },
    /// Run one estimator over one trip and write estimate + segments CSVs.
    Estimate {
        /// One of rls, tls, ds-tls.
        #[arg(long, value_parser = parse_method)]
        method: Method,
        /// Cell-trace CSV from gen-trips.
        #[arg(long, value_name = "FILE")]
        trip: PathBuf,
        /// Speed CSV (required for ds-tls).
        #[arg(long, value_name = "FILE")]
        speed: Option<PathBuf>,
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        /// Segment duration parameter d in seconds; defaults to the first
        /// entry of etre.d.
        #[arg(long)]
        d: Option<f64>,
        /// Fixed segment length for --method tls; defaults to the mean
        /// selected-segment length of a DS-TLS run on the same trip.
        #[arg(long)]
        l_tls: Option<usize>,
        #[arg(long, value_name = "FILE", default_value = "estimate.csv")]
        out: PathBuf,
        #[arg(long, value_name = "FILE", default_value = "segments.csv")]
        segments: PathBuf,
    },
    /// Run the full Monte Carlo comparison and write the results table.
    Eval {
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
        #[arg(long, value_name = "FILE", default_value = "results.csv")]
        out: PathBuf,
    },
    /// Print the fully-resolved configuration.
    PrintConfig {
        #[arg(long, value_name = "FILE")]
        config: Option<PathBuf>,
    },
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: dstls::Error| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<AppConfig> {
    match path {
        Some(p) => AppConfig::load(p),
        None => Ok(AppConfig::default()),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenTrips { config, out_dir } => {
            let cfg = load_config(&config)?;
            let dir = out_dir.unwrap_or_else(|| PathBuf::from(&cfg.out_dir));
            gen_trips(&cfg, &dir)
        }
        Command::Match { expr, expr_file, speed } => {
            let text = match (expr, expr_file) {
                (Some(t), _) => t,
                (None, Some(f)) => std::fs::read_to_string(f)?,
                (None, None) => {
                    return Err(dstls::Error::InvalidArg("need --expr or --expr-file".into()))
                }
            };
            let e = parse_etre(text.trim())?;
            let signal = load_signal_csv(&speed, "v")?;
            for iv in match_all(&e, &signal).iter() {
                let begin_s = signal.t0 + iv.begin as f64 * signal.period;
                let end_s = signal.t0 + iv.end as f64 * signal.period;
                println!("{},{},{begin_s},{end_s}", iv.begin, iv.end);
            }
            Ok(())
        }
        Command::Estimate { method, trip, speed, config, d, l_tls, out, segments } => {
            let cfg = load_config(&config)?;
            estimate(&cfg, method, &trip, speed.as_deref(), d, l_tls, &out, &segments)
        }
        Command::Eval { config, out } => {
            let cfg = load_config(&config)?;
            let rows = run_monte_carlo(&cfg.harness)?;
            save_results_csv(&out, &rows)?;
            Ok(())
        }
        Command::PrintConfig { config } => {
            print!("{}", load_config(&config)?.to_text());
            Ok(())
        }
    }
}

fn gen_trips(cfg: &AppConfig, dir: &Path) -> Result<()> {
    use std::fmt::Write as _;
    std::fs::create_dir_all(dir)?;
    let h = &cfg.harness;
    h.map.save_csv(dir.join("params.csv"))?;
    let mut manifest = String::from("trip,seed,samples,speed_csv,cells_csv\n");
    for t in 0..h.n_trips {
        let seed = derive_seed(h.master_seed, &[t as u64, 0, 0]);
        let spec = TripSpec { seed, ..h.trip.clone() };
        let speed = generate_trip(&spec)?;
        let current = current_from_speed(&speed, &h.vehicle, &h.map, h.z0, h.capacity_ah)?;
        let cell = simulate_cell(&h.map, &current, h.z0, h.capacity_ah, h.period)?;
        let speed_name = format!("trip{t:02}.csv");
        let cells_name = format!("trip{t:02}_cells.csv");
        save_signal_csv(dir.join(&speed_name), &speed, "v")?;
        cell.save_csv(dir.join(&cells_name))?;
        let _ = writeln!(manifest, "{t},{seed},{},{speed_name},{cells_name}", speed.len());
    }
    std::fs::write(dir.join("manifest.csv"), manifest)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn estimate(
    cfg: &AppConfig,
    method: Method,
    trip: &Path,
    speed: Option<&Path>,
    d: Option<f64>,
    l_tls: Option<usize>,
    out: &Path,
    segments_out: &Path,
) -> Result<()> {
    let h = &cfg.harness;
    let current = load_signal_csv(trip, "i")?;
    let voltage = load_signal_csv(trip, "v")?.values;
    let soc = load_signal_csv(trip, "z")?.values;
    let (t0, period) = (current.t0, current.period);
    let d = d.or_else(|| h.d_values.first().copied()).ok_or_else(|| {
        dstls::Error::InvalidArg("no d value configured".into())
    })?;

    let selector = || -> Result<SelectorConfig> {
        let expr = dstls::etre::build_transition_expr(
            h.tube_h.0,
            h.tube_h.1,
            h.tube_m.0,
            h.tube_m.1,
            d,
            h.d_tmax,
        )?;
        let (_, l_max) = l_bounds(d, h.d_tmax, period)?;
        Ok(SelectorConfig { expr, window_len_w: l_max, d, d_tmax: h.d_tmax, period })
    };
    let load_speed = || -> Result<SampledSignal> {
        let p = speed.ok_or_else(|| dstls::Error::InvalidArg("--speed is required".into()))?;
        load_signal_csv(p, "v")
    };

    let trace: EstimateTrace = match method {
        Method::Rls => rls_run(&current.values, &voltage, &soc, &h.map, h.lambda, h.theta0, h.p0_diag)?,
        Method::DsTls => {
            ds_tls_run(&load_speed()?, &current.values, &voltage, &soc, &h.map, &selector()?)?
        }
        Method::Tls => {
            let l = match l_tls {
                Some(l) => l,
                None => {
                    let ds = ds_tls_run(
                        &load_speed()?,
                        &current.values,
                        &voltage,
                        &soc,
                        &h.map,
                        &selector()?,
                    )?;
                    l_tls_from_segments(&ds.selected_segments[1..])?
                }
            };
            tls_fixed_run(&current.values, &voltage, &soc, &h.map, l)?
        }
    };
    save_estimate_csv(out, t0, period, &trace)?;
    save_segments_csv(segments_out, &trace.selected_segments)?;
    Ok(())
}
