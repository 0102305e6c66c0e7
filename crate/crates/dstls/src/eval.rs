//! Metrics, fair fixed-interval TLS sizing, and the Monte Carlo harness
//! comparing RLS, fixed-interval TLS, and DS-TLS across synthetic trips.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use crate::battery::{
    overpotential_from_measurement, simulate_cell, ArxTheta, CellTrace, EcmParamMap,
};
use crate::drive::{current_from_speed, generate_trip, TripSpec, VehiclePack};
use crate::etre::build_transition_expr;
use crate::pipeline::{
    ds_tls_run_with_schedule, l_bounds, rls_run, selection_schedule, tls_fixed_run,
    EstimateTrace, Method, SelectorConfig,
};
use crate::signal::{add_gaussian_noise, derive_seed, IndexInterval, SampledSignal};
use crate::{Error, Result};

/// Per-run quality metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub rmse_v: f64,
    /// Percentage error per ARX parameter.
    pub mape: [f64; 3],
    pub data_usage: f64,
}

/// One line of the results table: a method at one segment duration,
/// aggregated across trips.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsRow {
    pub method: Method,
    pub d: Option<f64>,
    pub mape_mean: [f64; 3],
    pub mape_std: [f64; 3],
    pub rmse_mv_mean: f64,
    pub rmse_mv_std: f64,
    pub du_mean: f64,
    pub du_std: f64,
}

/// One-step-ahead terminal voltage prediction from an estimate trace and
/// measured data: `V̂_k = V_oc,k + θ̂_k · [V̄_{k-1}, I_k, I_{k-1}]`.
///
/// At `k = 0` the unavailable lags default to `V̄ = 0` and `I_{-1} = I_0`,
/// matching the cell simulator's start-of-trip convention.
pub fn predicted_voltage(
    theta_hat: &[ArxTheta],
    current: &[f64],
    vbar_measured: &[f64],
    v_oc: &[f64],
) -> Result<Vec<f64>> {
    let k_total = theta_hat.len();
    if current.len() != k_total || vbar_measured.len() != k_total || v_oc.len() != k_total {
        return Err(Error::InvalidArg("series length mismatch".into()));
    }
    let mut out = Vec::with_capacity(k_total);
    for k in 0..k_total {
        let (vbar_prev, i_prev) = if k == 0 { (0.0, current[0]) } else { (vbar_measured[k - 1], current[k - 1]) };
        let th = theta_hat[k];
        out.push(v_oc[k] + th.theta1 * vbar_prev + th.theta2 * current[k] + th.theta3 * i_prev);
    }
    Ok(out)
}

/// Root-mean-square error over samples after the first `l_max`.
pub fn rmse(v_true: &[f64], v_pred: &[f64], l_max: usize) -> Result<f64> {
    if v_true.len() != v_pred.len() {
        return Err(Error::InvalidArg("series length mismatch".into()));
    }
    if v_true.len() <= l_max {
        return Err(Error::InvalidArg(format!(
            "need more than l_max = {l_max} samples, got {}",
            v_true.len()
        )));
    }
    let n = v_true.len() - l_max;
    let sum: f64 = v_true[l_max..]
        .iter()
        .zip(&v_pred[l_max..])
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((sum / n as f64).sqrt())
}

/// Mean absolute percentage error of parameter `i` over samples after the
/// first `l_max`.
pub fn mape(theta_true: &[ArxTheta], theta_hat: &[ArxTheta], l_max: usize, i: usize) -> Result<f64> {
    if theta_true.len() != theta_hat.len() {
        return Err(Error::InvalidArg("series length mismatch".into()));
    }
    if theta_true.len() <= l_max {
        return Err(Error::InvalidArg(format!(
            "need more than l_max = {l_max} samples, got {}",
            theta_true.len()
        )));
    }
    if i >= 3 {
        return Err(Error::InvalidArg(format!("parameter index {i} out of range")));
    }
    let n = theta_true.len() - l_max;
    let mut sum = 0.0;
    for (t, h) in theta_true[l_max..].iter().zip(&theta_hat[l_max..]) {
        let (t, h) = (t.as_array()[i], h.as_array()[i]);
        if t == 0.0 {
            return Err(Error::InvalidArg(format!("true theta{} is zero", i + 1)));
        }
        sum += (t - h).abs() / t.abs();
    }
    Ok(100.0 * sum / n as f64)
}

/// Fraction of the trip consumed by the given disjoint segments, percent.
pub fn data_usage(segments: &[IndexInterval], k_total: usize) -> Result<f64> {
    let mut sorted = segments.to_vec();
    sorted.sort();
    for pair in sorted.windows(2) {
        if pair[1].begin < pair[0].end {
            return Err(Error::InvalidArg(format!("overlapping segments {:?} and {:?}", pair[0], pair[1])));
        }
    }
    if sorted.last().is_some_and(|s| s.end > k_total) {
        return Err(Error::InvalidArg(format!("segment beyond trip of {k_total} samples")));
    }
    let used: usize = sorted.iter().map(|s| s.len()).sum();
    Ok(100.0 * used as f64 / k_total as f64)
}

/// Mean segment length rounded to the nearest integer, ties away from zero.
pub fn l_tls_from_segments(segments: &[IndexInterval]) -> Result<usize> {
    if segments.is_empty() {
        return Err(Error::InvalidArg("no segments to size l_tls from".into()));
    }
    let total: usize = segments.iter().map(|s| s.len()).sum();
    Ok((total as f64 / segments.len() as f64).round() as usize)
}

/// Metrics of one estimate trace against ground truth and measurements.
pub fn trace_metrics(
    trace: &EstimateTrace,
    theta_true: &[ArxTheta],
    current: &[f64],
    voltage: &[f64],
    vbar_measured: &[f64],
    v_oc: &[f64],
    l_max: usize,
) -> Result<Metrics> {
    let v_pred = predicted_voltage(&trace.theta_hat, current, vbar_measured, v_oc)?;
    let rmse_v = rmse(voltage, &v_pred, l_max)?;
    let mape = [
        mape(theta_true, &trace.theta_hat, l_max, 0)?,
        mape(theta_true, &trace.theta_hat, l_max, 1)?,
        mape(theta_true, &trace.theta_hat, l_max, 2)?,
    ];
    let data_usage = match trace.method {
        Method::Rls => 100.0,
        _ => data_usage(&trace.selected_segments, current.len())?,
    };
    Ok(Metrics { rmse_v, mape, data_usage })
}

/// Monte Carlo harness configuration.
#[derive(Debug, Clone)]
pub struct HarnessConfig {
    pub n_trips: usize,
    pub n_trials: usize,
    pub master_seed: u64,
    /// Segment half-durations d (seconds); one TLS and one DS-TLS row each.
    pub d_values: Vec<f64>,
    pub d_tmax: f64,
    pub tube_h: (f64, f64),
    pub tube_m: (f64, f64),
    pub sigma_i: f64,
    pub sigma_v: f64,
    pub period: f64,
    pub z0: f64,
    pub capacity_ah: f64,
    pub lambda: f64,
    pub theta0: ArxTheta,
    pub p0_diag: [f64; 3],
    /// Trip template; the seed field is replaced per trip.
    pub trip: TripSpec,
    pub vehicle: VehiclePack,
    pub map: EcmParamMap,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            n_trips: 20,
            n_trials: 10,
            master_seed: 42,
            d_values: vec![10.0, 30.0, 60.0],
            d_tmax: 60.0,
            tube_h: (20.0, 5.0),
            tube_m: (34.0, 10.0),
            sigma_i: 0.02,
            sigma_v: 0.002,
            period: 1.0,
            z0: 0.95,
            capacity_ah: 50.0,
            lambda: 0.999,
            theta0: ArxTheta::ZERO,
            p0_diag: [1e6; 3],
            trip: TripSpec {
                n_transitions: 8,
                highway_speed: 20.0,
                motorway_speed: 34.0,
                hold_duration_range: (1000.0, 2000.0),
                ramp_accel: 1.0,
                jitter_sigma: 0.5,
                total_soc_window: (0.95, 0.05),
                period: 1.0,
                seed: 0,
            },
            vehicle: VehiclePack::default(),
            map: EcmParamMap::synthetic_default(),
        }
    }
}

impl HarnessConfig {
    fn selector(&self, d: f64) -> Result<SelectorConfig> {
        let expr = build_transition_expr(
            self.tube_h.0,
            self.tube_h.1,
            self.tube_m.0,
            self.tube_m.1,
            d,
            self.d_tmax,
        )?;
        let (_, l_max) = l_bounds(d, self.d_tmax, self.period)?;
        Ok(SelectorConfig { expr, window_len_w: l_max, d, d_tmax: self.d_tmax, period: self.period })
    }

    /// Row layout of the results table: RLS, then TLS per d, then DS-TLS per d.
    pub fn row_specs(&self) -> Vec<(Method, Option<f64>)> {
        let mut rows = vec![(Method::Rls, None)];
        rows.extend(self.d_values.iter().map(|&d| (Method::Tls, Some(d))));
        rows.extend(self.d_values.iter().map(|&d| (Method::DsTls, Some(d))));
        rows
    }
}

// Seed-derivation channels; trip generation uses trial=0, channel=0.
const CHANNEL_CURRENT: u64 = 1;
const CHANNEL_VOLTAGE: u64 = 2;

/// Ground truth for one trip.
struct TripTruth {
    speed: SampledSignal,
    cell: CellTrace,
}

fn build_trip(cfg: &HarnessConfig, t: usize) -> Result<TripTruth> {
    let spec = TripSpec { seed: derive_seed(cfg.master_seed, &[t as u64, 0, 0]), ..cfg.trip.clone() };
    let speed = generate_trip(&spec)?;
    let current = current_from_speed(&speed, &cfg.vehicle, &cfg.map, cfg.z0, cfg.capacity_ah)?;
    let cell = simulate_cell(&cfg.map, &current, cfg.z0, cfg.capacity_ah, cfg.period)?;
    if cell.saturated {
        return Err(Error::Config(format!(
            "trip {t} hit an SOC limit; shorten trip.hold_min/hold_max or raise sim.capacity_ah"
        )));
    }
    Ok(TripTruth { speed, cell })
}

fn with_noise(values: &[f64], sigma: f64, seed: u64, period: f64) -> Result<Vec<f64>> {
    let s = SampledSignal::new(0.0, period, values.to_vec())?;
    Ok(add_gaussian_noise(&s, sigma, seed)?.values)
}

/// Trial-averaged metrics for one trip, in `row_specs` order.
fn run_trip(cfg: &HarnessConfig, t: usize) -> Result<Vec<Metrics>> {
    let truth = build_trip(cfg, t)?;
    let k_total = truth.cell.len();

    // The selection schedule depends only on the (noise-free) speed signal,
    // so it is computed once per d and shared across trials.
    let mut schedules = Vec::new();
    let mut l_maxes = Vec::new();
    for &d in &cfg.d_values {
        let sel = cfg.selector(d)?;
        schedules.push(selection_schedule(&truth.speed, &sel)?);
        l_maxes.push(l_bounds(d, cfg.d_tmax, cfg.period)?.1);
    }
    // RLS has no d of its own; score it over the most conservative window.
    let l_max_rls = l_maxes.iter().copied().max().unwrap_or(0);

    let n_rows = cfg.row_specs().len();
    let mut sums = vec![Metrics { rmse_v: 0.0, mape: [0.0; 3], data_usage: 0.0 }; n_rows];
    for trial in 0..cfg.n_trials {
        let tr = trial as u64;
        let current = with_noise(
            &truth.cell.current,
            cfg.sigma_i,
            derive_seed(cfg.master_seed, &[t as u64, tr, CHANNEL_CURRENT]),
            cfg.period,
        )?;
        let voltage = with_noise(
            &truth.cell.terminal_voltage,
            cfg.sigma_v,
            derive_seed(cfg.master_seed, &[t as u64, tr, CHANNEL_VOLTAGE]),
            cfg.period,
        )?;
        let soc = &truth.cell.soc;
        let vbar_measured = overpotential_from_measurement(&voltage, soc, &cfg.map)?;
        let ctx = |what: &str, e: Error| {
            Error::Config(format!("trip {t}, trial {trial}, {what}: {e}"))
        };
        let score = |trace: &EstimateTrace, l_max: usize| {
            trace_metrics(
                trace,
                &truth.cell.theta_true,
                &current,
                &voltage,
                &vbar_measured,
                &truth.cell.v_oc,
                l_max,
            )
        };

        let rls = rls_run(&current, &voltage, soc, &cfg.map, cfg.lambda, cfg.theta0, cfg.p0_diag)
            .map_err(|e| ctx("rls", e))?;
        let mut trial_metrics = vec![score(&rls, l_max_rls).map_err(|e| ctx("rls", e))?];

        // DS-TLS first: the fixed-interval TLS runs are sized from its
        // segments for a like-for-like comparison.
        let mut ds_metrics = Vec::new();
        for (i, &d) in cfg.d_values.iter().enumerate() {
            let what = format!("ds-tls d={d}");
            let ds = ds_tls_run_with_schedule(&current, &voltage, soc, &cfg.map, &schedules[i])
                .map_err(|e| ctx(&what, e))?;
            ds_metrics.push(score(&ds, l_maxes[i]).map_err(|e| ctx(&what, e))?);
            let l_tls = l_tls_from_segments(&ds.selected_segments[1..]).map_err(|e| ctx(&what, e))?;
            let what = format!("tls d={d}");
            let tls = tls_fixed_run(&current, &voltage, soc, &cfg.map, l_tls.min(k_total))
                .map_err(|e| ctx(&what, e))?;
            trial_metrics.push(score(&tls, l_maxes[i]).map_err(|e| ctx(&what, e))?);
        }
        trial_metrics.extend(ds_metrics);

        for (sum, m) in sums.iter_mut().zip(&trial_metrics) {
            sum.rmse_v += m.rmse_v;
            for i in 0..3 {
                sum.mape[i] += m.mape[i];
            }
            sum.data_usage += m.data_usage;
        }
    }
    let n = cfg.n_trials as f64;
    for s in &mut sums {
        s.rmse_v /= n;
        for i in 0..3 {
            s.mape[i] /= n;
        }
        s.data_usage /= n;
    }
    Ok(sums)
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Runs the full trips × trials × methods comparison. Trips execute in
/// parallel; aggregation order is fixed, so results are deterministic.
pub fn run_monte_carlo(cfg: &HarnessConfig) -> Result<Vec<ResultsRow>> {
    if cfg.n_trips == 0 || cfg.n_trials == 0 {
        return Err(Error::InvalidArg("need at least one trip and one trial".into()));
    }
    let slots: Mutex<Vec<Option<Result<Vec<Metrics>>>>> =
        Mutex::new((0..cfg.n_trips).map(|_| None).collect());
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cfg.n_trips);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let t = next.fetch_add(1, Ordering::Relaxed);
                if t >= cfg.n_trips {
                    break;
                }
                let result = run_trip(cfg, t).map_err(|e| match e {
                    e @ Error::Config(_) => e,
                    e => Error::Config(format!("trip {t}: {e}")),
                });
                slots.lock().expect("worker panicked")[t] = Some(result);
            });
        }
    });
    let per_trip: Vec<Vec<Metrics>> = slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|slot| slot.expect("every trip visited"))
        .collect::<Result<_>>()?;

    let rows = cfg.row_specs();
    let mut out = Vec::with_capacity(rows.len());
    for (r, (method, d)) in rows.into_iter().enumerate() {
        let col = |f: &dyn Fn(&Metrics) -> f64| -> (f64, f64) {
            let xs: Vec<f64> = per_trip.iter().map(|trip| f(&trip[r])).collect();
            mean_std(&xs)
        };
        let m1 = col(&|m| m.mape[0]);
        let m2 = col(&|m| m.mape[1]);
        let m3 = col(&|m| m.mape[2]);
        let rm = col(&|m| m.rmse_v * 1000.0);
        let du = col(&|m| m.data_usage);
        out.push(ResultsRow {
            method,
            d,
            mape_mean: [m1.0, m2.0, m3.0],
            mape_std: [m1.1, m2.1, m3.1],
            rmse_mv_mean: rm.0,
            rmse_mv_std: rm.1,
            du_mean: du.0,
            du_std: du.1,
        });
    }
    Ok(out)
}

/// Serializes result rows with fixed formatting so identical runs produce
/// byte-identical files.
pub fn results_to_csv(rows: &[ResultsRow]) -> String {
    use std::fmt::Write as _;
    let mut out = String::from(
        "method,d,mape1_mean,mape1_std,mape2_mean,mape2_std,mape3_mean,mape3_std,rmse_mv_mean,rmse_mv_std,du_mean,du_std\n",
    );
    for r in rows {
        let d = r.d.map_or_else(|| "-".to_string(), |d| format!("{d}"));
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6}",
            r.method,
            d,
            r.mape_mean[0],
            r.mape_std[0],
            r.mape_mean[1],
            r.mape_std[1],
            r.mape_mean[2],
            r.mape_std[2],
            r.rmse_mv_mean,
            r.rmse_mv_std,
            r.du_mean,
            r.du_std,
        );
    }
    out
}

pub fn save_results_csv(path: impl AsRef<Path>, rows: &[ResultsRow]) -> Result<()> {
    std::fs::write(path, results_to_csv(rows))?;
    Ok(())
}
