//! Flat key-value configuration: one `section.key = value` per line,
//! arrays comma-separated, `#` starts a comment. Unknown keys are errors
//! so typos fail loudly.

use std::path::Path;

use crate::battery::{ArxTheta, EcmParamMap};
use crate::eval::HarnessConfig;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct AppConfig {
    pub harness: HarnessConfig,
    pub out_dir: String,
    /// Optional path to a `z,v_oc,r0,r1,c1` parameter map CSV; the built-in
    /// synthetic map is used when empty.
    pub param_map_path: String,
}

impl Default for AppConfig {
    fn default() -> Self {
        Self { harness: HarnessConfig::default(), out_dir: "out".into(), param_map_path: String::new() }
    }
}

impl AppConfig {
    /// Parses a config file, starting from defaults.
    pub fn load(path: impl AsRef<Path>) -> Result<AppConfig> {
        let text = std::fs::read_to_string(path)?;
        AppConfig::parse(&text)
    }

    pub fn parse(text: &str) -> Result<AppConfig> {
        let mut cfg = AppConfig::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let bad = |msg: String| Error::Config(format!("line {}: {msg}", i + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| bad(format!("expected `key = value`, got `{line}`")))?;
            cfg.set(key.trim(), value.trim())
                .map_err(|e| bad(e.to_string()))?;
        }
        if !cfg.param_map_path.is_empty() {
            cfg.harness.map = EcmParamMap::load_csv(&cfg.param_map_path)?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let h = &mut self.harness;
        match key {
            "etre.v_h" => h.tube_h.0 = num(key, value)?,
            "etre.dv_h" => h.tube_h.1 = num(key, value)?,
            "etre.v_m" => h.tube_m.0 = num(key, value)?,
            "etre.dv_m" => h.tube_m.1 = num(key, value)?,
            "etre.d" => h.d_values = list(key, value)?,
            "etre.d_tmax" => h.d_tmax = num(key, value)?,
            "rls.lambda" => h.lambda = num(key, value)?,
            "rls.theta0" => h.theta0 = ArxTheta::from_array(triple(key, value)?),
            "rls.p0" => h.p0_diag = triple(key, value)?,
            "noise.sigma_i" => h.sigma_i = num(key, value)?,
            "noise.sigma_v" => h.sigma_v = num(key, value)?,
            "sim.period" => {
                h.period = num(key, value)?;
                h.trip.period = h.period;
            }
            "sim.z0" => h.z0 = num(key, value)?,
            "sim.capacity_ah" => h.capacity_ah = num(key, value)?,
            "sim.series_cells" => h.vehicle.series_cells = int(key, value)?,
            "sim.parallel_cells" => h.vehicle.parallel_cells = int(key, value)?,
            "sim.mass" => h.vehicle.mass = num(key, value)?,
            "sim.drag_area" => h.vehicle.drag_area_cd_a = num(key, value)?,
            "sim.rolling_coeff" => h.vehicle.rolling_coeff = num(key, value)?,
            "sim.drivetrain_eff" => h.vehicle.drivetrain_eff = num(key, value)?,
            "sim.regen_eff" => h.vehicle.regen_eff = num(key, value)?,
            "sim.aux_power" => h.vehicle.aux_power = num(key, value)?,
            "trip.n_transitions" => h.trip.n_transitions = int(key, value)?,
            "trip.highway_speed" => h.trip.highway_speed = num(key, value)?,
            "trip.motorway_speed" => h.trip.motorway_speed = num(key, value)?,
            "trip.hold_min" => h.trip.hold_duration_range.0 = num(key, value)?,
            "trip.hold_max" => h.trip.hold_duration_range.1 = num(key, value)?,
            "trip.ramp_accel" => h.trip.ramp_accel = num(key, value)?,
            "trip.jitter_sigma" => h.trip.jitter_sigma = num(key, value)?,
            "trip.soc_start" => h.trip.total_soc_window.0 = num(key, value)?,
            "trip.soc_end" => h.trip.total_soc_window.1 = num(key, value)?,
            "harness.trips" => h.n_trips = int(key, value)?,
            "harness.trials" => h.n_trials = int(key, value)?,
            "harness.master_seed" => {
                h.master_seed = value
                    .parse()
                    .map_err(|_| Error::Config(format!("{key}: bad integer `{value}`")))?
            }
            "paths.out_dir" => self.out_dir = value.to_string(),
            "paths.param_map" => self.param_map_path = value.to_string(),
            other => return Err(Error::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    /// Fully-resolved config text; feeding it back reproduces this config.
    pub fn to_text(&self) -> String {
        use std::fmt::Write as _;
        let h = &self.harness;
        let v = &h.vehicle;
        let d: Vec<String> = h.d_values.iter().map(|d| format!("{d}")).collect();
        let mut s = String::new();
        let _ = writeln!(s, "etre.v_h = {}", h.tube_h.0);
        let _ = writeln!(s, "etre.dv_h = {}", h.tube_h.1);
        let _ = writeln!(s, "etre.v_m = {}", h.tube_m.0);
        let _ = writeln!(s, "etre.dv_m = {}", h.tube_m.1);
        let _ = writeln!(s, "etre.d = {}", d.join(","));
        let _ = writeln!(s, "etre.d_tmax = {}", h.d_tmax);
        let _ = writeln!(s, "rls.lambda = {}", h.lambda);
        let t0 = h.theta0.as_array();
        let _ = writeln!(s, "rls.theta0 = {},{},{}", t0[0], t0[1], t0[2]);
        let _ = writeln!(s, "rls.p0 = {},{},{}", h.p0_diag[0], h.p0_diag[1], h.p0_diag[2]);
        let _ = writeln!(s, "noise.sigma_i = {}", h.sigma_i);
        let _ = writeln!(s, "noise.sigma_v = {}", h.sigma_v);
        let _ = writeln!(s, "sim.period = {}", h.period);
        let _ = writeln!(s, "sim.z0 = {}", h.z0);
        let _ = writeln!(s, "sim.capacity_ah = {}", h.capacity_ah);
        let _ = writeln!(s, "sim.series_cells = {}", v.series_cells);
        let _ = writeln!(s, "sim.parallel_cells = {}", v.parallel_cells);
        let _ = writeln!(s, "sim.mass = {}", v.mass);
        let _ = writeln!(s, "sim.drag_area = {}", v.drag_area_cd_a);
        let _ = writeln!(s, "sim.rolling_coeff = {}", v.rolling_coeff);
        let _ = writeln!(s, "sim.drivetrain_eff = {}", v.drivetrain_eff);
        let _ = writeln!(s, "sim.regen_eff = {}", v.regen_eff);
        let _ = writeln!(s, "sim.aux_power = {}", v.aux_power);
        let _ = writeln!(s, "trip.n_transitions = {}", h.trip.n_transitions);
        let _ = writeln!(s, "trip.highway_speed = {}", h.trip.highway_speed);
        let _ = writeln!(s, "trip.motorway_speed = {}", h.trip.motorway_speed);
        let _ = writeln!(s, "trip.hold_min = {}", h.trip.hold_duration_range.0);
        let _ = writeln!(s, "trip.hold_max = {}", h.trip.hold_duration_range.1);
        let _ = writeln!(s, "trip.ramp_accel = {}", h.trip.ramp_accel);
        let _ = writeln!(s, "trip.jitter_sigma = {}", h.trip.jitter_sigma);
        let _ = writeln!(s, "trip.soc_start = {}", h.trip.total_soc_window.0);
        let _ = writeln!(s, "trip.soc_end = {}", h.trip.total_soc_window.1);
        let _ = writeln!(s, "harness.trips = {}", h.n_trips);
        let _ = writeln!(s, "harness.trials = {}", h.n_trials);
        let _ = writeln!(s, "harness.master_seed = {}", h.master_seed);
        let _ = writeln!(s, "paths.out_dir = {}", self.out_dir);
        let _ = writeln!(s, "paths.param_map = {}", self.param_map_path);
        s
    }
}

fn num(key: &str, value: &str) -> Result<f64> {
    value.parse().map_err(|_| Error::Config(format!("{key}: bad number `{value}`")))
}

fn int(key: &str, value: &str) -> Result<usize> {
    value.parse().map_err(|_| Error::Config(format!("{key}: bad integer `{value}`")))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|p| num(key, p.trim())).collect()
}

fn triple(key: &str, value: &str) -> Result<[f64; 3]> {
    let v = list(key, value)?;
    v.try_into()
        .map_err(|_| Error::Config(format!("{key}: expected three comma-separated values")))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let text = AppConfig::default().to_text();
        let parsed = AppConfig::parse(&text).unwrap();
        assert_eq!(parsed.to_text(), text);
    }

    #[test]
    fn overrides_apply() {
        let cfg = AppConfig::parse(
            "harness.trips = 3\netre.d = 10,30 # only two\nrls.p0 = 1,2,3\n\n# comment line\n",
        )
        .unwrap();
        assert_eq!(cfg.harness.n_trips, 3);
        assert_eq!(cfg.harness.d_values, vec![10.0, 30.0]);
        assert_eq!(cfg.harness.p0_diag, [1.0, 2.0, 3.0]);
        // Everything else keeps its default.
        assert_eq!(cfg.harness.n_trials, 10);
    }

    #[test]
    fn rejects_unknown_key_and_bad_value() {
        let err = AppConfig::parse("etre.vh = 20\n").unwrap_err();
        assert!(err.to_string().contains("unknown key"), "{err}");
        let err = AppConfig::parse("noise.sigma_i = lots\n").unwrap_err();
        assert!(err.to_string().contains("bad number"), "{err}");
        let err = AppConfig::parse("just words\n").unwrap_err();
        assert!(err.to_string().contains("key = value"), "{err}");
    }

    #[test]
    fn period_propagates_to_trip() {
        let cfg = AppConfig::parse("sim.period = 2\n").unwrap();
        assert_eq!(cfg.harness.period, 2.0);
        assert_eq!(cfg.harness.trip.period, 2.0);
    }
}
