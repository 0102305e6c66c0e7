//! Data-selective TLS orchestration: sliding observation window, segment
//! selection, cooldown, initialization, and per-segment TLS updates, plus
//! plain RLS and fixed-interval TLS runs for comparison.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::battery::{overpotential_from_measurement, ArxTheta, EcmParamMap};
use crate::estimators::{build_regression, rls_step, tls_solve, RlsState};
use crate::etre::{matches_ending_at, Expr};
use crate::signal::{IndexInterval, SampledSignal};
use crate::{Error, Result};

/// Estimation method tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Rls,
    Tls,
    DsTls,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Rls => "rls",
            Method::Tls => "tls",
            Method::DsTls => "ds-tls",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Method> {
        match s {
            "rls" => Ok(Method::Rls),
            "tls" => Ok(Method::Tls),
            "ds-tls" => Ok(Method::DsTls),
            other => Err(Error::InvalidArg(format!("unknown method `{other}`"))),
        }
    }
}

/// Configuration of the segment selector.
#[derive(Debug, Clone)]
pub struct SelectorConfig {
    pub expr: Expr,
    /// Observation window length in samples; at least `l_max`.
    pub window_len_w: usize,
    pub d: f64,
    pub d_tmax: f64,
    pub period: f64,
}

/// Output of one estimator run over a trip.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateTrace {
    pub method: Method,
    pub theta_hat: Vec<ArxTheta>,
    /// True at samples where the estimate changed.
    pub updated: Vec<bool>,
    /// Data segments consumed by updates (empty for RLS).
    pub selected_segments: Vec<IndexInterval>,
}

/// Segment length bounds in samples: `l_min = 2d/T`, `l_max = (2d + d_tmax)/T`.
pub fn l_bounds(d: f64, d_tmax: f64, period: f64) -> Result<(usize, usize)> {
    if d < 0.0 || d_tmax < 0.0 || !(period > 0.0) {
        return Err(Error::InvalidArg(format!("bad bounds inputs d={d} d_tmax={d_tmax} period={period}")));
    }
    let to_samples = |seconds: f64| -> Result<usize> {
        let ratio = seconds / period;
        let rounded = ratio.round();
        if (ratio - rounded).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::InvalidArg(format!("{seconds} s is not a whole number of {period} s samples")));
        }
        Ok(rounded as usize)
    };
    Ok((to_samples(2.0 * d)?, to_samples(2.0 * d + d_tmax)?))
}

/// The longest match ending exactly at the window's last sample, converted
/// to absolute indices; `k` is the absolute index of the window end.
pub fn select_segment(window: &SampledSignal, cfg: &SelectorConfig, k: usize) -> Option<IndexInterval> {
    let n = window.len();
    let begins = matches_ending_at(&cfg.expr, window);
    begins
        .into_iter()
        .find(|&b| b < n) // begins are sorted; first = longest; skip empty
        .map(|b| IndexInterval::new(k + 1 - (n - b), k + 1))
}

/// The update schedule for a DS-TLS run over a speed profile: the
/// initialization interval `[0, l_max)` followed by every segment the
/// selector picks under the cooldown law. Depends only on speed, so one
/// schedule serves all noise trials of a trip.
pub fn selection_schedule(speed: &SampledSignal, cfg: &SelectorConfig) -> Result<Vec<IndexInterval>> {
    let (_, l_max) = l_bounds(cfg.d, cfg.d_tmax, cfg.period)?;
    if cfg.window_len_w < l_max {
        return Err(Error::InvalidArg(format!(
            "window of {} samples shorter than l_max = {l_max}",
            cfg.window_len_w
        )));
    }
    if (speed.period - cfg.period).abs() > 1e-9 * cfg.period {
        return Err(Error::InvalidArg(format!(
            "speed period {} does not match configured period {}",
            speed.period, cfg.period
        )));
    }
    let k_total = speed.len();
    if k_total < l_max {
        return Err(Error::InvalidArg(format!("trip of {k_total} samples shorter than l_max = {l_max}")));
    }
    let mut schedule = vec![IndexInterval::new(0, l_max)];
    // Initialization counts as an update: cooldown applies after it too,
    // which keeps the initialization interval disjoint from later segments.
    let mut k = (l_max - 1) + l_max + 1;
    while k < k_total {
        let begin_w = (k + 1).saturating_sub(cfg.window_len_w);
        let window = speed.slice(begin_w, k + 1);
        match select_segment(&window, cfg, k) {
            Some(seg) => {
                schedule.push(seg);
                k += l_max + 1;
            }
            None => k += 1,
        }
    }
    Ok(schedule)
}

/// DS-TLS run: selects segments from speed, then updates θ̂ by TLS on each.
pub fn ds_tls_run(
    speed: &SampledSignal,
    current: &[f64],
    voltage: &[f64],
    soc: &[f64],
    map: &EcmParamMap,
    cfg: &SelectorConfig,
) -> Result<EstimateTrace> {
    if speed.len() != current.len() {
        return Err(Error::InvalidArg(format!(
            "speed has {} samples, cell trace has {}",
            speed.len(),
            current.len()
        )));
    }
    let schedule = selection_schedule(speed, cfg)?;
    ds_tls_run_with_schedule(current, voltage, soc, map, &schedule)
}

/// DS-TLS estimation against a precomputed selection schedule (first entry
/// is the initialization interval). Split out so Monte Carlo trials that
/// share a speed profile do not repeat the matching work.
pub fn ds_tls_run_with_schedule(
    current: &[f64],
    voltage: &[f64],
    soc: &[f64],
    map: &EcmParamMap,
    schedule: &[IndexInterval],
) -> Result<EstimateTrace> {
    check_aligned(current, voltage, soc)?;
    let k_total = current.len();
    if schedule.is_empty() || schedule.iter().any(|s| s.end > k_total) {
        return Err(Error::InvalidArg("schedule empty or out of range".into()));
    }
    let vbar = overpotential_from_measurement(voltage, soc, map)?;

    let mut theta = ArxTheta::ZERO;
    let mut theta_hat = Vec::with_capacity(k_total);
    let mut updated = vec![false; k_total];
    let mut selected_segments = Vec::new();
    let mut next = 0;
    for k in 0..k_total {
        while next < schedule.len() && schedule[next].end == k + 1 {
            let seg = schedule[next];
            let solved = build_regression(&vbar[seg.begin..seg.end], &current[seg.begin..seg.end])
                .and_then(|reg| tls_solve(&reg));
            match solved {
                Ok(t) => {
                    theta = t;
                    updated[k] = true;
                    selected_segments.push(seg);
                }
                // Non-informative segment: keep the previous estimate. The
                // initialization interval is still recorded.
                Err(Error::UninformativeSegment) if next > 0 => {}
                Err(Error::UninformativeSegment) => selected_segments.push(seg),
                Err(e) => return Err(e),
            }
            next += 1;
        }
        theta_hat.push(theta);
    }
    Ok(EstimateTrace { method: Method::DsTls, theta_hat, updated, selected_segments })
}

/// Plain RLS with forgetting factor, updating at every sample.
pub fn rls_run(
    current: &[f64],
    voltage: &[f64],
    soc: &[f64],
    map: &EcmParamMap,
    lambda: f64,
    theta0: ArxTheta,
    p0_diag: [f64; 3],
) -> Result<EstimateTrace> {
    check_aligned(current, voltage, soc)?;
    let vbar = overpotential_from_measurement(voltage, soc, map)?;
    let k_total = current.len();
    let mut state = RlsState::new(theta0, p0_diag);
    let mut theta_hat = Vec::with_capacity(k_total);
    let mut updated = vec![false; k_total];
    if k_total > 0 {
        theta_hat.push(state.theta_hat);
    }
    for k in 1..k_total {
        let phi = [vbar[k - 1], current[k], current[k - 1]];
        state = rls_step(&state, vbar[k], phi, lambda)?;
        theta_hat.push(state.theta_hat);
        updated[k] = true;
    }
    Ok(EstimateTrace { method: Method::Rls, theta_hat, updated, selected_segments: Vec::new() })
}

/// Fixed-interval TLS: consecutive disjoint segments of `l_tls` samples,
/// one solve per segment, estimate held on failure. A trailing remainder
/// shorter than `l_tls` is left unused.
pub fn tls_fixed_run(
    current: &[f64],
    voltage: &[f64],
    soc: &[f64],
    map: &EcmParamMap,
    l_tls: usize,
) -> Result<EstimateTrace> {
    check_aligned(current, voltage, soc)?;
    let k_total = current.len();
    if l_tls < 5 {
        return Err(Error::InvalidArg(format!("l_tls must be >= 5, got {l_tls}")));
    }
    if l_tls > k_total {
        return Err(Error::InvalidArg(format!("l_tls = {l_tls} exceeds trip length {k_total}")));
    }
    let vbar = overpotential_from_measurement(voltage, soc, map)?;
    let mut theta = ArxTheta::ZERO;
    let mut theta_hat = Vec::with_capacity(k_total);
    let mut updated = vec![false; k_total];
    let mut selected_segments = Vec::new();
    for k in 0..k_total {
        if (k + 1) % l_tls == 0 {
            let seg = IndexInterval::new(k + 1 - l_tls, k + 1);
            let solved = build_regression(&vbar[seg.begin..seg.end], &current[seg.begin..seg.end])
                .and_then(|reg| tls_solve(&reg));
            match solved {
                Ok(t) => {
                    theta = t;
                    updated[k] = true;
                    selected_segments.push(seg);
                }
                Err(Error::UninformativeSegment) => {}
                Err(e) => return Err(e),
            }
        }
        theta_hat.push(theta);
    }
    Ok(EstimateTrace { method: Method::Tls, theta_hat, updated, selected_segments })
}

fn check_aligned(current: &[f64], voltage: &[f64], soc: &[f64]) -> Result<()> {
    if current.len() != voltage.len() || current.len() != soc.len() {
        return Err(Error::InvalidArg(format!(
            "series length mismatch: current {}, voltage {}, soc {}",
            current.len(),
            voltage.len(),
            soc.len()
        )));
    }
    Ok(())
}

/// Writes an estimate trace as `t,theta1_hat,theta2_hat,theta3_hat,updated`.
pub fn save_estimate_csv(path: impl AsRef<Path>, t0: f64, period: f64, trace: &EstimateTrace) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::from("t,theta1_hat,theta2_hat,theta3_hat,updated\n");
    for (k, (theta, up)) in trace.theta_hat.iter().zip(&trace.updated).enumerate() {
        let t = t0 + k as f64 * period;
        let _ = writeln!(out, "{t},{},{},{},{}", theta.theta1, theta.theta2, theta.theta3, u8::from(*up));
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Writes selected segments as `begin,end` index pairs.
pub fn save_segments_csv(path: impl AsRef<Path>, segments: &[IndexInterval]) -> Result<()> {
    use std::fmt::Write as _;
    let mut out = String::from("begin,end\n");
    for s in segments {
        let _ = writeln!(out, "{},{}", s.begin, s.end);
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads a `begin,end` segments CSV.
pub fn load_segments_csv(path: impl AsRef<Path>) -> Result<Vec<IndexInterval>> {
    let path = path.as_ref();
    let err = |msg: String| Error::Csv { path: path.display().to_string(), msg };
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    match lines.next() {
        Some("begin,end") => {}
        other => return Err(err(format!("expected header `begin,end`, got {other:?}"))),
    }
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let (b, e) = line
            .split_once(',')
            .ok_or_else(|| err(format!("row {}: expected two fields", i + 2)))?;
        let b: usize = b.trim().parse().map_err(|_| err(format!("row {}: bad begin `{b}`", i + 2)))?;
        let e: usize = e.trim().parse().map_err(|_| err(format!("row {}: bad end `{e}`", i + 2)))?;
        if b > e {
            return Err(err(format!("row {}: begin {b} > end {e}", i + 2)));
        }
        out.push(IndexInterval::new(b, e));
    }
    Ok(out)
}
