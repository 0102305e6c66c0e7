//! SOC-dependent 1RC equivalent-circuit parameters, the ECM-to-ARX mapping,
//! and ground-truth cell simulation driven by a current series.
//!
//! The default parameter map is synthetic: it uses plausible prismatic-cell
//! magnitudes, not measured values for any particular cell.

use std::fmt::Write as _;
use std::path::Path;

use crate::{Error, Result};

/// ARX parameter triple relating overpotential to lagged overpotential and
/// current: `vbar[k] = theta1*vbar[k-1] + theta2*i[k] + theta3*i[k-1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArxTheta {
    pub theta1: f64,
    pub theta2: f64,
    pub theta3: f64,
}

impl ArxTheta {
    pub const ZERO: ArxTheta = ArxTheta { theta1: 0.0, theta2: 0.0, theta3: 0.0 };

    pub fn as_array(&self) -> [f64; 3] {
        [self.theta1, self.theta2, self.theta3]
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        ArxTheta { theta1: a[0], theta2: a[1], theta3: a[2] }
    }
}

/// SOC-dependent circuit parameters as a piecewise-linear breakpoint table.
#[derive(Debug, Clone)]
pub struct EcmParamMap {
    /// Strictly increasing breakpoints spanning [0, 1].
    pub z: Vec<f64>,
    pub v_oc: Vec<f64>,
    pub r0: Vec<f64>,
    pub r1: Vec<f64>,
    pub c1: Vec<f64>,
}

impl EcmParamMap {
    pub fn new(z: Vec<f64>, v_oc: Vec<f64>, r0: Vec<f64>, r1: Vec<f64>, c1: Vec<f64>) -> Result<Self> {
        let n = z.len();
        if n < 2 || v_oc.len() != n || r0.len() != n || r1.len() != n || c1.len() != n {
            return Err(Error::InvalidArg("parameter map needs >= 2 equal-length breakpoint rows".into()));
        }
        if z[0] != 0.0 || z[n - 1] != 1.0 {
            return Err(Error::InvalidArg("z breakpoints must span [0, 1]".into()));
        }
        if z.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArg("z breakpoints must be strictly increasing".into()));
        }
        if v_oc.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArg("v_oc must be strictly increasing in z".into()));
        }
        if r0.iter().chain(&r1).chain(&c1).any(|&p| !(p > 0.0)) {
            return Err(Error::InvalidArg("r0, r1, c1 must be strictly positive".into()));
        }
        Ok(Self { z, v_oc, r0, r1, c1 })
    }

    /// Synthetic default map: Voc(z) = 3.0 + z + 0.2 z^2, R0 and R1 grow 50%
    /// toward empty, C1 constant 10 kF. Breakpoints at z = 0.0, 0.1, ..., 1.0.
    pub fn synthetic_default() -> Self {
        let z: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let v_oc = z.iter().map(|&z| 3.0 + z + 0.2 * z * z).collect();
        let r0 = z.iter().map(|&z| 1.0e-3 * (1.0 + 0.5 * (1.0 - z))).collect();
        let r1 = z.iter().map(|&z| 0.5e-3 * (1.0 + 0.5 * (1.0 - z))).collect();
        let c1 = vec![1.0e4; z.len()];
        Self::new(z, v_oc, r0, r1, c1).expect("default map is valid")
    }

    /// A map with identical values at every breakpoint (SOC-independent).
    pub fn flat(v_oc: f64, r0: f64, r1: f64, c1: f64) -> Self {
        // Voc must be strictly increasing; use a negligible slope.
        let eps = 1e-12;
        Self {
            z: vec![0.0, 1.0],
            v_oc: vec![v_oc, v_oc + eps],
            r0: vec![r0, r0],
            r1: vec![r1, r1],
            c1: vec![c1, c1],
        }
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("z,v_oc,r0,r1,c1\n");
        for i in 0..self.z.len() {
            let _ = writeln!(out, "{},{},{},{},{}", self.z[i], self.v_oc[i], self.r0[i], self.r1[i], self.c1[i]);
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines();
        let header = lines.next().unwrap_or("");
        if header.trim() != "z,v_oc,r0,r1,c1" {
            return Err(Error::Csv {
                path: path.display().to_string(),
                msg: "expected header `z,v_oc,r0,r1,c1`".into(),
            });
        }
        let mut cols: [Vec<f64>; 5] = Default::default();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Csv { path: path.display().to_string(), msg: format!("bad row: {line}") });
            }
            for (col, f) in cols.iter_mut().zip(fields) {
                col.push(f.trim().parse().map_err(|e| Error::Csv {
                    path: path.display().to_string(),
                    msg: format!("{e} in row: {line}"),
                })?);
            }
        }
        let [z, v_oc, r0, r1, c1] = cols;
        Self::new(z, v_oc, r0, r1, c1)
    }
}

/// Piecewise-linear interpolation of the map at SOC `z`; exact at breakpoints.
pub fn lookup_params(map: &EcmParamMap, z: f64) -> Result<(f64, f64, f64, f64)> {
    if !(0.0..=1.0).contains(&z) {
        return Err(Error::InvalidArg(format!("soc {z} outside [0, 1]")));
    }
    let i = match map.z.iter().position(|&b| z <= b) {
        Some(0) => return Ok((map.v_oc[0], map.r0[0], map.r1[0], map.c1[0])),
        Some(i) => i,
        None => map.z.len() - 1,
    };
    let (z0, z1) = (map.z[i - 1], map.z[i]);
    let w = (z - z0) / (z1 - z0);
    let lerp = |a: &[f64]| a[i - 1] + w * (a[i] - a[i - 1]);
    Ok((lerp(&map.v_oc), lerp(&map.r0), lerp(&map.r1), lerp(&map.c1)))
}

/// Open-circuit voltage at SOC `z`.
pub fn v_oc_at(map: &EcmParamMap, z: f64) -> Result<f64> {
    lookup_params(map, z).map(|(v, _, _, _)| v)
}

/// Bilinear-transform discretization of the 1RC circuit into ARX parameters
/// for sampling interval `t`.
pub fn arx_from_ecm(r0: f64, r1: f64, c1: f64, t: f64) -> Result<ArxTheta> {
    if !(r0 > 0.0 && r1 > 0.0 && c1 > 0.0 && t > 0.0) {
        return Err(Error::InvalidArg(format!("non-positive argument: r0={r0} r1={r1} c1={c1} t={t}")));
    }
    let tau2 = 2.0 * r1 * c1;
    let den = tau2 + t;
    Ok(ArxTheta {
        theta1: (tau2 - t) / den,
        theta2: r0 + r1 * t / den,
        theta3: ((r0 + r1) * t - r0 * tau2) / den,
    })
}

/// Ground-truth trace of one simulated trip.
#[derive(Debug, Clone)]
pub struct CellTrace {
    pub current: Vec<f64>,
    pub terminal_voltage: Vec<f64>,
    pub overpotential: Vec<f64>,
    pub soc: Vec<f64>,
    pub v_oc: Vec<f64>,
    pub theta_true: Vec<ArxTheta>,
    pub capacity_ah: f64,
    pub period: f64,
    /// Set when coulomb counting had to clamp SOC to [0, 1].
    pub saturated: bool,
}

impl CellTrace {
    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    /// Cell-trace CSV: `t,i,v,z,v_oc,vbar,theta1,theta2,theta3`.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("t,i,v,z,v_oc,vbar,theta1,theta2,theta3\n");
        for k in 0..self.len() {
            let th = self.theta_true[k];
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                k as f64 * self.period,
                self.current[k],
                self.terminal_voltage[k],
                self.soc[k],
                self.v_oc[k],
                self.overpotential[k],
                th.theta1,
                th.theta2,
                th.theta3
            );
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Simulates the cell along a current series (positive = discharge).
///
/// SOC is tracked by coulomb counting, the true ARX parameters follow the
/// SOC-dependent circuit values, and the overpotential is generated by the
/// ARX recursion itself (initialized at zero, with the pre-trip current taken
/// equal to the first sample).
pub fn simulate_cell(
    map: &EcmParamMap,
    current: &[f64],
    z0: f64,
    capacity_ah: f64,
    t: f64,
) -> Result<CellTrace> {
    if current.is_empty() {
        return Err(Error::InvalidArg("empty current series".into()));
    }
    if !(capacity_ah > 0.0) {
        return Err(Error::InvalidArg(format!("capacity must be > 0, got {capacity_ah}")));
    }
    if !(0.0..=1.0).contains(&z0) {
        return Err(Error::InvalidArg(format!("z0 {z0} outside [0, 1]")));
    }
    let n = current.len();
    let mut trace = CellTrace {
        current: current.to_vec(),
        terminal_voltage: Vec::with_capacity(n),
        overpotential: Vec::with_capacity(n),
        soc: Vec::with_capacity(n),
        v_oc: Vec::with_capacity(n),
        theta_true: Vec::with_capacity(n),
        capacity_ah,
        period: t,
        saturated: false,
    };
    let mut z = z0;
    let mut vbar_prev = 0.0;
    let mut i_prev = current[0];
    for &i_k in current {
        z -= t * i_k / (3600.0 * capacity_ah);
        if !(0.0..=1.0).contains(&z) {
            trace.saturated = true;
            z = z.clamp(0.0, 1.0);
        }
        let (v_oc, r0, r1, c1) = lookup_params(map, z)?;
        let theta = arx_from_ecm(r0, r1, c1, t)?;
        let vbar = theta.theta1 * vbar_prev + theta.theta2 * i_k + theta.theta3 * i_prev;
        trace.soc.push(z);
        trace.v_oc.push(v_oc);
        trace.theta_true.push(theta);
        trace.overpotential.push(vbar);
        trace.terminal_voltage.push(v_oc + vbar);
        vbar_prev = vbar;
        i_prev = i_k;
    }
    Ok(trace)
}

/// Recovers the overpotential series from measured terminal voltage and a
/// known SOC trajectory: `vbar[k] = v[k] - v_oc(z[k])`.
pub fn overpotential_from_measurement(v: &[f64], z: &[f64], map: &EcmParamMap) -> Result<Vec<f64>> {
    if v.len() != z.len() {
        return Err(Error::InvalidArg(format!("length mismatch: v has {}, z has {}", v.len(), z.len())));
    }
    v.iter().zip(z).map(|(&v, &z)| Ok(v - v_oc_at(map, z)?)).collect()
}
