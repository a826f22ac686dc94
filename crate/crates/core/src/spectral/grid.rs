use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use super::exponent::Exponent;
use super::fft::{fft_in_place, ifft_in_place, mode_of_slot, wavenumbers};
use crate::error::{LabError, Result};

const REAL_TOL: f64 = 1e-12;

/// Samples on the periodic grid `x_i = -L/2 + i L/n`, `i = 0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFunction {
    samples: Vec<Complex64>,
    box_length: f64,
    is_real: bool,
}

impl GridFunction {
    pub fn new(samples: Vec<Complex64>, box_length: f64, is_real: bool) -> Result<Self> {
        check_grid(samples.len(), box_length)?;
        if is_real {
            let max = samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
            let worst = samples.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
            if worst > REAL_TOL * max.max(f64::MIN_POSITIVE) {
                return Err(LabError::Config(format!(
                    "samples flagged real carry imaginary part {worst:.3e}"
                )));
            }
        }
        Ok(Self { samples, box_length, is_real })
    }

    pub fn from_real(values: &[f64], box_length: f64) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect(), box_length, true)
    }

    /// Samples `f(x_i)`; the result is flagged real when `f` is.
    pub fn sample<F: Fn(f64) -> Complex64>(n: usize, box_length: f64, f: F) -> Result<Self> {
        check_grid(n, box_length)?;
        let dx = box_length / n as f64;
        let samples: Vec<Complex64> = (0..n).map(|i| f(-box_length / 2.0 + i as f64 * dx)).collect();
        let is_real = samples.iter().all(|z| z.im == 0.0);
        Ok(Self { samples, box_length, is_real })
    }

    pub fn sample_real<F: Fn(f64) -> f64>(n: usize, box_length: f64, f: F) -> Result<Self> {
        Self::sample(n, box_length, |x| Complex64::new(f(x), 0.0))
    }

    pub fn zeros(n: usize, box_length: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); n], box_length, true)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn dx(&self) -> f64 {
        self.box_length / self.samples.len() as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        -self.box_length / 2.0 + i as f64 * self.dx()
    }

    pub fn x_grid(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.re).collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Builds a sibling function on the same grid; realness is re-derived.
    pub fn with_samples(&self, samples: Vec<Complex64>) -> Result<Self> {
        let max = samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let worst = samples.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        let is_real = worst <= REAL_TOL * max.max(f64::MIN_POSITIVE);
        let samples = if is_real {
            samples.into_iter().map(|z| Complex64::new(z.re, 0.0)).collect()
        } else {
            samples
        };
        Self::new(samples, self.box_length, is_real)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let is_real = self.is_real && c.im == 0.0;
        Self {
            samples: self.samples.iter().map(|z| z * c).collect(),
            box_length: self.box_length,
            is_real,
        }
    }

    pub fn add(&self, other: &GridFunction) -> Result<Self> {
        same_grid(self, other)?;
        Ok(Self {
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a + b).collect(),
            box_length: self.box_length,
            is_real: self.is_real && other.is_real,
        })
    }

    pub fn sub(&self, other: &GridFunction) -> Result<Self> {
        same_grid(self, other)?;
        Ok(Self {
            samples: self.samples.iter().zip(&other.samples).map(|(a, b)| a - b).collect(),
            box_length: self.box_length,
            is_real: self.is_real && other.is_real,
        })
    }

    /// Unnormalised DFT coefficients in FFT slot order.
    pub fn raw_spectrum(&self) -> Vec<Complex64> {
        let mut buf = self.samples.clone();
        fft_in_place(&mut buf);
        buf
    }

    /// Applies the Fourier multiplier `symbol(ξ_m)` mode by mode.
    ///
    /// When `symbol` is conjugate-symmetric and the input is real, the output is
    /// projected back to real samples (this only affects the Nyquist mode).
    pub fn apply_symbol<F: Fn(f64) -> Complex64>(&self, symbol: F, conj_symmetric: bool) -> Self {
        let n = self.len();
        let ks = wavenumbers(n, self.box_length);
        let mut buf = self.raw_spectrum();
        for (c, &k) in buf.iter_mut().zip(&ks) {
            *c *= symbol(k);
        }
        ifft_in_place(&mut buf);
        let is_real = self.is_real && conj_symmetric;
        if is_real {
            for z in buf.iter_mut() {
                z.im = 0.0;
            }
        }
        Self { samples: buf, box_length: self.box_length, is_real }
    }

    /// Translation `f(· - y)` through an exact Fourier phase.
    pub fn translate(&self, y: f64) -> Self {
        self.apply_symbol(|k| Complex64::from_polar(1.0, -k * y), true)
    }

    /// Numerical support `[i_lo, i_hi]` of samples above `tol · max`.
    pub fn support_indices(&self, tol: f64) -> Option<(usize, usize)> {
        let thr = tol * self.max_abs();
        let lo = self.samples.iter().position(|z| z.norm() > thr)?;
        let hi = self.samples.iter().rposition(|z| z.norm() > thr)?;
        Some((lo, hi))
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["x (dimensionless)", "re (dimensionless)", "im (dimensionless)"])?;
        for (i, z) in self.samples.iter().enumerate() {
            w.write_record(&[fmt_f(self.x(i)), fmt_f(z.re), fmt_f(z.im)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<P: AsRef<Path>>(path: P) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let mut xs = Vec::new();
        let mut samples = Vec::new();
        for rec in r.records() {
            let rec = rec?;
            let parse = |k: usize| -> Result<f64> {
                rec.get(k)
                    .ok_or_else(|| LabError::Config("short CSV row".into()))?
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| LabError::Config(format!("bad CSV number: {e}")))
            };
            xs.push(parse(0)?);
            samples.push(Complex64::new(parse(1)?, parse(2)?));
        }
        if xs.len() < 2 {
            return Err(LabError::Config("CSV holds fewer than two samples".into()));
        }
        let dx = xs[1] - xs[0];
        let box_length = dx * xs.len() as f64;
        if (xs[0] + box_length / 2.0).abs() > 1e-9 * box_length {
            return Err(LabError::Config("CSV grid is not centred at 0".into()));
        }
        let is_real = samples.iter().all(|z| z.im == 0.0);
        Self::new(samples, box_length, is_real)
    }
}

fn fmt_f(v: f64) -> String {
    format!("{v:.17e}")
}

pub(crate) fn check_grid(n: usize, box_length: f64) -> Result<()> {
    if n < 8 || !n.is_power_of_two() {
        return Err(LabError::Config(format!("grid size {n} must be a power of two >= 8")));
    }
    if !(box_length.is_finite() && box_length > 0.0) {
        return Err(LabError::Config(format!("box length {box_length} must be positive")));
    }
    Ok(())
}

pub(crate) fn same_grid(a: &GridFunction, b: &GridFunction) -> Result<()> {
    if a.len() != b.len() || a.box_length != b.box_length {
        return Err(LabError::Config("grid functions live on different grids".into()));
    }
    Ok(())
}

/// Tag for the single transform convention used throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Convention {
    /// `f̂(ξ) = (2π)^{-1/2} ∫ e^{-ixξ} f(x) dx`.
    UnitaryNegativeExponent,
}

/// Coefficients `c_m ≈ f̂(ξ_m)` for modes `m = -n/2 .. n/2 - 1`, stored in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyFunction {
    pub coefficients: Vec<Complex64>,
    pub box_length: f64,
    pub convention: Convention,
}

impl FrequencyFunction {
    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn mode(&self, idx: usize) -> i64 {
        idx as i64 - (self.len() / 2) as i64
    }

    pub fn xi(&self, idx: usize) -> f64 {
        2.0 * PI * self.mode(idx) as f64 / self.box_length
    }

    pub fn dxi(&self) -> f64 {
        2.0 * PI / self.box_length
    }

    pub fn coefficient(&self, m: i64) -> Complex64 {
        self.coefficients[(m + (self.len() / 2) as i64) as usize]
    }
}

/// Forward transform onto the mode lattice.
pub fn transform(f: &GridFunction) -> FrequencyFunction {
    let n = f.len();
    let raw = f.raw_spectrum();
    let scale = f.dx() / (2.0 * PI).sqrt();
    let mut coefficients = vec![Complex64::new(0.0, 0.0); n];
    for (slot, c) in raw.iter().enumerate() {
        let m = mode_of_slot(slot, n);
        let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        coefficients[(m + (n / 2) as i64) as usize] = c * (scale * sign);
    }
    FrequencyFunction { coefficients, box_length: f.box_length, convention: Convention::UnitaryNegativeExponent }
}

/// Inverse of [`transform`]; `is_real` asks for a real projection of the result.
pub fn inverse_transform(g: &FrequencyFunction, is_real: bool) -> Result<GridFunction> {
    let n = g.len();
    check_grid(n, g.box_length)?;
    let dx = g.box_length / n as f64;
    let scale = (2.0 * PI).sqrt() / dx;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (idx, c) in g.coefficients.iter().enumerate() {
        let m = idx as i64 - (n / 2) as i64;
        let sign = if m.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        buf[m.rem_euclid(n as i64) as usize] = c * (scale * sign);
    }
    ifft_in_place(&mut buf);
    if is_real {
        for z in buf.iter_mut() {
            z.im = 0.0;
        }
    }
    GridFunction::new(buf, g.box_length, is_real)
}

/// Riesz multiplier `|ξ|^s`; the zero mode is sent to 0 whenever `s != 0`.
pub fn fractional_derivative(f: &GridFunction, s: f64) -> Result<GridFunction> {
    if s == 0.0 {
        return Ok(f.clone());
    }
    if s < 0.0 {
        let raw = f.raw_spectrum();
        let max = raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if raw[0].norm() > 1e-10 * max {
            let mean = raw[0].norm() * f.dx();
            return Err(LabError::ZeroFrequencySingularity { s, mean });
        }
    }
    Ok(f.apply_symbol(|k| if k == 0.0 { Complex64::new(0.0, 0.0) } else { Complex64::new(k.abs().powf(s), 0.0) }, true))
}

/// `(Σ |f_i|^p Δx)^{1/p}`, or the sample max when `p = ∞`.
pub fn lebesgue_norm(f: &GridFunction, p: Exponent) -> f64 {
    weighted_norm(f.samples.iter().map(|z| z.norm()), f.dx(), p)
}

/// Scaled evaluation of `(Σ a_i^p w)^{1/p}` that neither overflows nor underflows.
pub fn weighted_norm<I: Iterator<Item = f64> + Clone>(values: I, weight: f64, p: Exponent) -> f64 {
    let max = values.clone().fold(0.0, f64::max);
    match p {
        Exponent::Infinite => max,
        Exponent::Finite(p) => {
            if max == 0.0 {
                return 0.0;
            }
            let s: f64 = values.map(|a| (a / max).powf(p)).sum();
            max * (s * weight).powf(1.0 / p)
        }
    }
}

/// Time after which the fastest significant wave packet reaches the box edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Horizon {
    pub time: f64,
    pub xi_max: f64,
    pub x_extent: f64,
    pub tolerance: f64,
}

/// Wrap-around horizon `(L/2 - x_extent) / (3 ξ_max²)` under the Airy group speed `3ξ²`.
pub fn wrap_horizon(f: &GridFunction, tol: f64) -> Horizon {
    let n = f.len();
    let raw = f.raw_spectrum();
    let cmax = raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let ks = wavenumbers(n, f.box_length);
    let xi_max = raw
        .iter()
        .zip(&ks)
        .filter(|(c, _)| c.norm() > tol * cmax)
        .map(|(_, k)| k.abs())
        .fold(0.0, f64::max);
    let fmax = f.max_abs();
    let x_extent = (0..n)
        .filter(|&i| f.samples[i].norm() > tol * fmax)
        .map(|i| f.x(i).abs())
        .fold(0.0, f64::max);
    let room = (f.box_length / 2.0 - x_extent).max(0.0);
    let time = if xi_max == 0.0 { f64::INFINITY } else { room / (3.0 * xi_max * xi_max) };
    Horizon { time, xi_max, x_extent, tolerance: tol }
}
