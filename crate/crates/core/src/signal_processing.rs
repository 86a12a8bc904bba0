//! Range profiles, range-Doppler maps and micro-Doppler spectrograms.
//!
//! Doppler axes are fftshifted so column `W/2` is zero velocity and columns
//! above it are approaching targets.

use std::f64::consts::TAU;
use std::sync::Arc;

use num_complex::{Complex32, Complex64};
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::em_synthesis::IfCube;
use crate::error::{Error, Result};
use crate::radar_model::RadarConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Window {
    /// Periodic Hann.
    #[default]
    Hann,
    Rect,
}

impl Window {
    pub fn coefficients(self, n: usize) -> Vec<f64> {
        match self {
            Window::Rect => vec![1.0; n],
            Window::Hann => (0..n).map(|i| 0.5 - 0.5 * (TAU * i as f64 / n as f64).cos()).collect(),
        }
    }
}

/// Windowed forward FFT along fast time. Bin `k` corresponds to range
/// `k * c / (2 B)`.
pub fn range_fft(chirp: &[Complex64], window: Window) -> Vec<Complex64> {
    let w = window.coefficients(chirp.len());
    let mut buf: Vec<Complex64> = chirp.iter().zip(&w).map(|(z, w)| z * w).collect();
    if !buf.is_empty() {
        FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    }
    buf
}

/// Magnitude map indexed `[range_bin][doppler_bin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    pub range_bins: usize,
    pub doppler_bins: usize,
    pub magnitude: Vec<f64>,
    pub range_resolution_m: f64,
    pub doppler_resolution_hz: f64,
    pub frame_index: usize,
}

impl RangeDopplerMap {
    pub fn at(&self, range_bin: usize, doppler_bin: usize) -> f64 {
        self.magnitude[range_bin * self.doppler_bins + doppler_bin]
    }

    pub fn row(&self, range_bin: usize) -> &[f64] {
        &self.magnitude[range_bin * self.doppler_bins..(range_bin + 1) * self.doppler_bins]
    }

    /// `(range_bin, doppler_bin)` of the largest magnitude.
    pub fn peak(&self) -> (usize, usize) {
        let i = argmax(&self.magnitude);
        (i / self.doppler_bins, i % self.doppler_bins)
    }

    pub fn energy(&self) -> f64 {
        self.magnitude.iter().map(|v| v * v).sum()
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Reusable FFT plans and windows for one cube geometry.
struct Processor {
    samples: usize,
    chirps: usize,
    range_fft: Arc<dyn Fft<f64>>,
    doppler_fft: Arc<dyn Fft<f64>>,
    range_window: Vec<f64>,
    doppler_window: Vec<f64>,
    range_resolution_m: f64,
    doppler_resolution_hz: f64,
}

impl Processor {
    fn new(config: &RadarConfig, window: Window) -> Result<Self> {
        config.validate()?;
        let (samples, chirps) = (config.samples_per_chirp, config.chirps_per_frame);
        let mut planner = FftPlanner::new();
        Ok(Processor {
            samples,
            chirps,
            range_fft: planner.plan_fft_forward(samples),
            doppler_fft: planner.plan_fft_forward(chirps),
            range_window: window.coefficients(samples),
            doppler_window: window.coefficients(chirps),
            range_resolution_m: crate::SPEED_OF_LIGHT / (2.0 * config.bandwidth_hz),
            doppler_resolution_hz: 1.0 / (chirps as f64 * config.pri()),
        })
    }

    fn map(&self, frame: &[Complex32], frame_index: usize) -> Result<RangeDopplerMap> {
        let (n, m) = (self.samples, self.chirps);
        if frame.len() != n * m {
            return Err(Error::DimensionMismatch(format!(
                "frame has {} samples, expected {m} chirps x {n} samples",
                frame.len()
            )));
        }
        // Range profiles, stored transposed as [range_bin][chirp].
        let mut slow = vec![Complex64::new(0.0, 0.0); n * m];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for c in 0..m {
            for (b, (z, w)) in buf.iter_mut().zip(frame[c * n..(c + 1) * n].iter().zip(&self.range_window)) {
                *b = Complex64::new(z.re as f64, z.im as f64) * w;
            }
            self.range_fft.process(&mut buf);
            for (k, z) in buf.iter().enumerate() {
                slow[k * m + c] = z * self.doppler_window[c];
            }
        }
        let mut magnitude = vec![0.0; n * m];
        let half = m / 2;
        for k in 0..n {
            let row = &mut slow[k * m..(k + 1) * m];
            self.doppler_fft.process(row);
            // Slow-time bin q (signed) grows with delay, i.e. receding
            // targets; column W/2 - q puts approaching targets above centre.
            for (q, z) in row.iter().enumerate() {
                let col = (half + m - q) % m;
                magnitude[k * m + col] = z.norm();
            }
        }
        Ok(RangeDopplerMap {
            range_bins: n,
            doppler_bins: m,
            magnitude,
            range_resolution_m: self.range_resolution_m,
            doppler_resolution_hz: self.doppler_resolution_hz,
            frame_index,
        })
    }
}

/// Range FFT per chirp, then a Doppler FFT per range bin.
pub fn doppler_map(frame: &[Complex32], config: &RadarConfig, frame_index: usize, window: Window) -> Result<RangeDopplerMap> {
    Processor::new(config, window)?.map(frame, frame_index)
}

/// Zero every range bin whose range `k * dr` lies outside `[r_min, r_max]`.
pub fn range_gate(map: &RangeDopplerMap, r_min: f64, r_max: f64) -> Result<RangeDopplerMap> {
    if !(r_min >= 0.0) || !(r_max > r_min) {
        return Err(Error::param("range_gate", format!("need 0 <= r_min < r_max, got [{r_min}, {r_max}]")));
    }
    let mut out = map.clone();
    let tol = 1e-9 * map.range_resolution_m;
    for k in 0..map.range_bins {
        let r = k as f64 * map.range_resolution_m;
        if r < r_min - tol || r > r_max + tol {
            out.magnitude[k * map.doppler_bins..(k + 1) * map.doppler_bins].fill(0.0);
        }
    }
    Ok(out)
}

/// Doppler columns removed by a notch of `width` bins: none for width 0,
/// otherwise every column within `width` of zero Doppler.
pub fn notch_columns(doppler_bins: usize, width: usize) -> std::ops::RangeInclusive<usize> {
    let half = doppler_bins / 2;
    if width == 0 {
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    half.saturating_sub(width)..=(half + width).min(doppler_bins - 1)
}

pub fn clutter_notch(map: &RangeDopplerMap, notch_width_bins: usize) -> RangeDopplerMap {
    let mut out = map.clone();
    let cols = notch_columns(map.doppler_bins, notch_width_bins);
    for k in 0..map.range_bins {
        for d in cols.clone() {
            out.magnitude[k * map.doppler_bins + d] = 0.0;
        }
    }
    out
}

/// How range bins are collapsed into one Doppler row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RangeSum {
    #[default]
    Magnitude,
    Power,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MicroDopplerParams {
    pub r_min_m: f64,
    /// `None` means no upper limit.
    pub r_max_m: Option<f64>,
    pub notch_width_bins: usize,
    pub window: Window,
    pub range_sum: RangeSum,
}

impl Default for MicroDopplerParams {
    fn default() -> Self {
        MicroDopplerParams {
            r_min_m: 0.0,
            r_max_m: None,
            notch_width_bins: 0,
            window: Window::Hann,
            range_sum: RangeSum::Magnitude,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub plan_seed: Option<u64>,
    pub config_hash: String,
}

/// Time-Doppler image, `values[row * width + col]`, one row per radar frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
    pub frame_rate_hz: f64,
    pub doppler_resolution_hz: f64,
    pub is_db: bool,
    pub provenance: Option<Provenance>,
}

impl Spectrogram {
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.width..(r + 1) * self.width]
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.width + c]
    }

    /// Column of the largest value in each row.
    pub fn peak_columns(&self) -> Vec<usize> {
        (0..self.height).map(|r| argmax(self.row(r))).collect()
    }

    /// Signed Doppler offset of a column from zero Doppler, in bins.
    pub fn doppler_offset(&self, col: usize) -> i64 {
        col as i64 - (self.width / 2) as i64
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn validate(&self) -> Result<()> {
        if self.height == 0 || self.width == 0 {
            return Err(Error::Empty("spectrogram"));
        }
        if self.values.len() != self.height * self.width {
            return Err(Error::SizeMismatch {
                expected: self.height * self.width,
                actual: self.values.len(),
            });
        }
        if !self.is_finite() {
            return Err(Error::NonFinite("spectrogram values".into()));
        }
        Ok(())
    }
}

/// One spectrogram row per frame: Doppler map, range gate, clutter notch,
/// then a sum over range bins.
pub fn micro_doppler(cube: &IfCube, params: &MicroDopplerParams) -> Result<Spectrogram> {
    let proc = Processor::new(&cube.config, params.window)?;
    if cube.chirps != proc.chirps || cube.samples != proc.samples {
        return Err(Error::DimensionMismatch(format!(
            "cube is {}x{}, config expects {}x{}",
            cube.chirps, cube.samples, proc.chirps, proc.samples
        )));
    }
    if cube.frames == 0 {
        return Err(Error::Empty("cube"));
    }
    let r_max = params.r_max_m.unwrap_or(f64::INFINITY);
    let width = cube.chirps;
    let rows: Vec<Vec<f64>> = (0..cube.frames)
        .into_par_iter()
        .map(|f| -> Result<Vec<f64>> {
            let map = proc.map(cube.frame(f), f)?;
            let map = range_gate(&map, params.r_min_m, r_max)?;
            let map = clutter_notch(&map, params.notch_width_bins);
            let mut row = vec![0.0; width];
            for k in 0..map.range_bins {
                for (acc, &v) in row.iter_mut().zip(map.row(k)) {
                    *acc += match params.range_sum {
                        RangeSum::Magnitude => v,
                        RangeSum::Power => v * v,
                    };
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    Ok(Spectrogram {
        height: cube.frames,
        width,
        values: rows.concat(),
        frame_rate_hz: cube.config.frame_rate_hz,
        doppler_resolution_hz: proc.doppler_resolution_hz,
        is_db: false,
        provenance: Some(Provenance {
            plan_seed: cube.plan_seed,
            config_hash: cube.config.config_hash(),
        }),
    })
}

pub const DB_EPSILON: f64 = 1e-12;

/// Amplitude dB, `max(20 log10(v + eps), floor_db)`.
pub fn to_db(s: &Spectrogram, floor_db: f64) -> Result<Spectrogram> {
    if s.is_db {
        return Err(Error::AlreadyDb);
    }
    let mut out = s.clone();
    for v in &mut out.values {
        *v = (20.0 * (*v + DB_EPSILON).log10()).max(floor_db);
    }
    out.is_db = true;
    Ok(out)
}
