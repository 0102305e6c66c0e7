//! Uniformly sampled time series and CSV ingestion/emission.

use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

/// Relative tolerance for uniform-spacing checks on ingested timestamps.
const SPACING_RTOL: f64 = 1e-6;

/// A uniformly sampled real-valued time series.
///
/// Immutable after construction; `values[k]` is the sample at time
/// `t0 + k * period`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSignal {
    pub t0: f64,
    pub period: f64,
    pub values: Vec<f64>,
}

impl SampledSignal {
    pub fn new(t0: f64, period: f64, values: Vec<f64>) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::InvalidArg(format!("period must be > 0, got {period}")));
        }
        Ok(Self { t0, period, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Duration in seconds of an index interval `[begin, end)`.
    pub fn duration(&self, iv: IndexInterval) -> f64 {
        (iv.end - iv.begin) as f64 * self.period
    }

    /// Sub-signal over `[begin, end)`, keeping absolute time.
    pub fn slice(&self, begin: usize, end: usize) -> SampledSignal {
        assert!(begin <= end && end <= self.values.len());
        SampledSignal {
            t0: self.t0 + begin as f64 * self.period,
            period: self.period,
            values: self.values[begin..end].to_vec(),
        }
    }
}

/// A half-open index interval `[begin, end)` into a sampled signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct IndexInterval {
    pub begin: usize,
    pub end: usize,
}

impl IndexInterval {
    pub fn new(begin: usize, end: usize) -> Self {
        assert!(begin <= end, "interval begin {begin} > end {end}");
        Self { begin, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.begin
    }

    pub fn is_empty(&self) -> bool {
        self.begin == self.end
    }
}

fn csv_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Csv { path: path.display().to_string(), msg: msg.into() }
}

/// Loads one named column from a CSV file with a `t` timestamp column.
///
/// Timestamps must be strictly increasing and uniformly spaced within a
/// relative tolerance of 1e-6; the sample period is inferred from them.
pub fn load_signal_csv(path: impl AsRef<Path>, column: &str) -> Result<SampledSignal> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| csv_err(path, "empty file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let t_idx = cols
        .iter()
        .position(|c| *c == "t")
        .ok_or_else(|| csv_err(path, "missing column `t`"))?;
    let v_idx = cols
        .iter()
        .position(|c| *c == column)
        .ok_or_else(|| csv_err(path, format!("missing column `{column}`")))?;

    let mut ts = Vec::new();
    let mut vs = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parse = |idx: usize| -> Result<f64> {
            fields
                .get(idx)
                .ok_or_else(|| csv_err(path, format!("row {}: missing field {idx}", lineno + 2)))?
                .parse::<f64>()
                .map_err(|e| csv_err(path, format!("row {}: {e}", lineno + 2)))
        };
        ts.push(parse(t_idx)?);
        vs.push(parse(v_idx)?);
    }
    if ts.len() < 2 {
        return Err(csv_err(path, "fewer than 2 rows"));
    }
    let period = ts[1] - ts[0];
    if !(period > 0.0) {
        return Err(csv_err(path, "timestamps not strictly increasing"));
    }
    for k in 1..ts.len() {
        let dt = ts[k] - ts[k - 1];
        if (dt - period).abs() > SPACING_RTOL * period.abs() {
            return Err(csv_err(
                path,
                format!("non-uniform spacing at row {}: {dt} vs period {period}", k + 2),
            ));
        }
    }
    SampledSignal::new(ts[0], period, vs)
}

/// Writes a signal as a two-column CSV with the given value column name.
pub fn save_signal_csv(path: impl AsRef<Path>, signal: &SampledSignal, column: &str) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(out, "t,{column}");
    for (k, v) in signal.values.iter().enumerate() {
        let t = signal.t0 + k as f64 * signal.period;
        let _ = writeln!(out, "{t},{v}");
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Adds i.i.d. zero-mean Gaussian noise of the given standard deviation.
///
/// Deterministic for a fixed seed; `sigma == 0` returns the input unchanged.
pub fn add_gaussian_noise(signal: &SampledSignal, sigma: f64, seed: u64) -> Result<SampledSignal> {
    if sigma < 0.0 {
        return Err(Error::InvalidArg(format!("sigma must be >= 0, got {sigma}")));
    }
    if sigma == 0.0 {
        return Ok(signal.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma validated above");
    let values = signal.values.iter().map(|v| v + normal.sample(&mut rng)).collect();
    Ok(SampledSignal { t0: signal.t0, period: signal.period, values })
}

/// Derives a sub-seed from a master seed and a path of ids (trip, trial,
/// channel, ...). Splitmix64 folding; stable across platforms and runs.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    fn splitmix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9e3779b97f4a7c15);
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }
    let mut s = splitmix(master);
    for &p in parts {
        s = splitmix(s ^ splitmix(p.wrapping_add(0xa076_1d64_78bd_642f)));
    }
    s
}
