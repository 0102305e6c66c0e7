//! Synthetic highway/motorway trip generation and a simple longitudinal
//! vehicle model converting speed to per-cell battery current.
//!
//! All vehicle and trip constants here are synthetic stand-ins; results
//! derived from them must be reported alongside these settings.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::battery::{v_oc_at, EcmParamMap};
use crate::signal::SampledSignal;
use crate::{Error, Result};

const AIR_DENSITY: f64 = 1.2; // kg/m^3
const GRAVITY: f64 = 9.81; // m/s^2

/// First-lag autocorrelation of the speed jitter. Real cruise-speed
/// wander is slow; white jitter would make every cruise segment highly
/// exciting and erase the informativity contrast the selector targets.
const JITTER_RHO: f64 = 0.995;

/// Specification of one synthetic trip.
#[derive(Debug, Clone)]
pub struct TripSpec {
    pub n_transitions: usize,
    pub highway_speed: f64,
    pub motorway_speed: f64,
    /// Uniform range (seconds) for the cruise holds between ramps.
    pub hold_duration_range: (f64, f64),
    pub ramp_accel: f64,
    pub jitter_sigma: f64,
    /// Intended SOC window (start, end); checked by the harness, not here.
    pub total_soc_window: (f64, f64),
    pub period: f64,
    pub seed: u64,
}

impl TripSpec {
    fn validate(&self) -> Result<()> {
        if self.highway_speed < 0.0 || self.motorway_speed < 0.0 {
            return Err(Error::InvalidArg("speeds must be >= 0".into()));
        }
        let (lo, hi) = self.hold_duration_range;
        if !(0.0 < lo && lo <= hi) {
            return Err(Error::InvalidArg(format!("bad hold range [{lo}, {hi}]")));
        }
        if !(self.period > 0.0) {
            return Err(Error::InvalidArg("period must be > 0".into()));
        }
        if self.jitter_sigma < 0.0 {
            return Err(Error::InvalidArg("jitter_sigma must be >= 0".into()));
        }
        if self.total_soc_window.0 <= self.total_soc_window.1 {
            return Err(Error::InvalidArg("soc window must have z_start > z_end".into()));
        }
        let dv = (self.motorway_speed - self.highway_speed).abs();
        if self.n_transitions > 0 {
            if !(self.ramp_accel > 0.0) {
                return Err(Error::InvalidArg("ramp_accel must be > 0".into()));
            }
            if dv / self.ramp_accel >= lo {
                return Err(Error::InvalidArg(format!(
                    "ramp of {:.1} s longer than the hold budget of {lo} s",
                    dv / self.ramp_accel
                )));
            }
        }
        Ok(())
    }
}

/// Generates the speed profile of a trip: alternating highway and motorway
/// holds joined by constant-acceleration ramps, with slowly wandering
/// zero-mean Gaussian speed jitter. Deterministic per seed.
pub fn generate_trip(spec: &TripSpec) -> Result<SampledSignal> {
    spec.validate()?;
    let t = spec.period;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Hold durations are drawn up front so the phase plan is independent of
    // how many jitter samples each phase consumes.
    let n_holds = spec.n_transitions + 1;
    let holds: Vec<f64> = (0..n_holds)
        .map(|_| rng.random_range(spec.hold_duration_range.0..=spec.hold_duration_range.1))
        .collect();

    let mut nominal = Vec::new();
    let mut v = spec.highway_speed;
    for (i, hold) in holds.iter().enumerate() {
        let target = if i % 2 == 0 { spec.highway_speed } else { spec.motorway_speed };
        // Ramp toward the target, then hold.
        while (v - target).abs() > spec.ramp_accel * t {
            v += spec.ramp_accel * t * (target - v).signum();
            nominal.push(v);
        }
        v = target;
        let hold_samples = (hold / t).round() as usize;
        nominal.extend(std::iter::repeat_n(v, hold_samples));
    }

    let values = if spec.jitter_sigma > 0.0 {
        let white = Normal::new(0.0, spec.jitter_sigma).expect("sigma validated");
        let innovation = (1.0 - JITTER_RHO * JITTER_RHO).sqrt();
        let mut j = white.sample(&mut rng);
        nominal
            .iter()
            .map(|&nom| {
                let out = (nom + j).max(0.0);
                j = JITTER_RHO * j + innovation * white.sample(&mut rng);
                out
            })
            .collect()
    } else {
        nominal
    };
    SampledSignal::new(0.0, t, values)
}

/// Vehicle and battery-pack constants for the longitudinal model.
#[derive(Debug, Clone)]
pub struct VehiclePack {
    pub mass: f64,
    pub drag_area_cd_a: f64,
    pub rolling_coeff: f64,
    pub drivetrain_eff: f64,
    pub regen_eff: f64,
    pub aux_power: f64,
    pub series_cells: usize,
    pub parallel_cells: usize,
}

impl Default for VehiclePack {
    fn default() -> Self {
        // Representative mid-size EV with a 120s4p pack.
        Self {
            mass: 2000.0,
            drag_area_cd_a: 0.7,
            rolling_coeff: 0.01,
            drivetrain_eff: 0.9,
            regen_eff: 0.6,
            aux_power: 500.0,
            series_cells: 120,
            parallel_cells: 4,
        }
    }
}

/// Converts a speed profile to per-cell current (positive = discharge).
///
/// Traction power from inertia, aerodynamic drag, and rolling resistance;
/// pack voltage approximated by the open-circuit voltage at a running
/// coulomb-counting SOC estimate.
pub fn current_from_speed(
    speed: &SampledSignal,
    vp: &VehiclePack,
    map: &EcmParamMap,
    z0: f64,
    capacity_ah: f64,
) -> Result<Vec<f64>> {
    if speed.values.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArg("speed must be non-negative".into()));
    }
    let t = speed.period;
    let mut z = z0;
    let mut prev_v = *speed.values.first().unwrap_or(&0.0);
    let mut out = Vec::with_capacity(speed.len());
    for &v in &speed.values {
        let accel = (v - prev_v) / t;
        let force = vp.mass * accel
            + 0.5 * AIR_DENSITY * vp.drag_area_cd_a * v * v
            + vp.rolling_coeff * vp.mass * GRAVITY;
        let wheel_power = force * v;
        let battery_power = if wheel_power >= 0.0 {
            wheel_power / vp.drivetrain_eff
        } else {
            wheel_power * vp.regen_eff
        } + vp.aux_power;
        let pack_voltage = vp.series_cells as f64 * v_oc_at(map, z.clamp(0.0, 1.0))?;
        if !(pack_voltage > 0.0) {
            return Err(Error::InvalidArg(format!("non-positive pack voltage {pack_voltage}")));
        }
        let cell_current = battery_power / pack_voltage / vp.parallel_cells as f64;
        out.push(cell_current);
        z = (z - t * cell_current / (3600.0 * capacity_ah)).clamp(0.0, 1.0);
        prev_v = v;
    }
    Ok(out)
}
