use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::fft::wavenumbers;
use super::grid::GridFunction;

/// A Fourier transform `ξ ↦ f̂(ξ)` that can be evaluated off the mode lattice.
pub trait Spectrum: Send + Sync {
    fn eval(&self, xi: f64) -> Complex64;

    /// Interval outside which `f̂` is negligible.
    fn support(&self) -> (f64, f64);

    /// Length scale in `ξ` on which `|f̂|` varies.
    fn feature_scale(&self) -> f64;

    fn eval_many(&self, xi: &[f64]) -> Vec<Complex64> {
        xi.par_iter().with_min_len(64).map(|&x| self.eval(x)).collect()
    }
}

impl<T: Spectrum + ?Sized> Spectrum for &T {
    fn eval(&self, xi: f64) -> Complex64 {
        (**self).eval(xi)
    }
    fn support(&self) -> (f64, f64) {
        (**self).support()
    }
    fn feature_scale(&self) -> f64 {
        (**self).feature_scale()
    }
    fn eval_many(&self, xi: &[f64]) -> Vec<Complex64> {
        (**self).eval_many(xi)
    }
}

impl<T: Spectrum + ?Sized> Spectrum for Box<T> {
    fn eval(&self, xi: f64) -> Complex64 {
        (**self).eval(xi)
    }
    fn support(&self) -> (f64, f64) {
        (**self).support()
    }
    fn feature_scale(&self) -> f64 {
        (**self).feature_scale()
    }
    fn eval_many(&self, xi: &[f64]) -> Vec<Complex64> {
        (**self).eval_many(xi)
    }
}

/// Discrete-time Fourier transform of grid samples, viewed as a compactly
/// supported function on the line. Agrees with [`super::transform`] on the modes.
#[derive(Debug, Clone)]
pub struct GridSpectrum {
    samples: Vec<Complex64>,
    x0: f64,
    dx: f64,
    scale: f64,
    nyquist: f64,
    support: (f64, f64),
    feature: f64,
}

impl GridSpectrum {
    pub fn new(f: &GridFunction) -> Self {
        let n = f.len();
        let dx = f.dx();
        let nyquist = PI / dx;
        let (lo, hi) = f.support_indices(1e-16).unwrap_or((0, 0));
        let samples = f.samples()[lo..=hi].to_vec();
        let raw = f.raw_spectrum();
        let cmax = raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let ks = wavenumbers(n, f.box_length());
        let dxi = 2.0 * PI / f.box_length();
        let mut slo = f64::INFINITY;
        let mut shi = f64::NEG_INFINITY;
        for (c, &k) in raw.iter().zip(&ks) {
            if c.norm() > 1e-14 * cmax {
                slo = slo.min(k);
                shi = shi.max(k);
            }
        }
        let support = if slo > shi {
            (0.0, 0.0)
        } else {
            ((slo - dxi).max(-nyquist), (shi + dxi).min(nyquist))
        };
        let width = (hi - lo + 1) as f64 * dx;
        Self {
            samples,
            x0: f.x(lo),
            dx,
            scale: dx / (2.0 * PI).sqrt(),
            nyquist,
            support,
            feature: 2.0 * PI / width,
        }
    }

    pub fn nyquist(&self) -> f64 {
        self.nyquist
    }
}

impl Spectrum for GridSpectrum {
    fn eval(&self, xi: f64) -> Complex64 {
        if xi.abs() > self.nyquist {
            return Complex64::new(0.0, 0.0);
        }
        let step = Complex64::from_polar(1.0, -xi * self.dx);
        let mut acc = Complex64::new(0.0, 0.0);
        let mut phase = Complex64::from_polar(1.0, -xi * self.x0);
        for (i, s) in self.samples.iter().enumerate() {
            if i % 64 == 0 && i > 0 {
                phase = Complex64::from_polar(1.0, -xi * (self.x0 + i as f64 * self.dx));
            }
            acc += s * phase;
            phase *= step;
        }
        acc * self.scale
    }

    fn support(&self) -> (f64, f64) {
        self.support
    }

    fn feature_scale(&self) -> f64 {
        self.feature
    }
}

/// `|ξ|^power · inner(ξ)`, set to zero at `ξ = 0`.
pub struct Weighted<S> {
    pub inner: S,
    pub power: f64,
}

impl<S: Spectrum> Spectrum for Weighted<S> {
    fn eval(&self, xi: f64) -> Complex64 {
        if xi == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.inner.eval(xi) * xi.abs().powf(self.power)
    }
    fn support(&self) -> (f64, f64) {
        self.inner.support()
    }
    fn feature_scale(&self) -> f64 {
        self.inner.feature_scale()
    }
}

pub struct SumSpectrum {
    pub terms: Vec<Box<dyn Spectrum>>,
}

impl Spectrum for SumSpectrum {
    fn eval(&self, xi: f64) -> Complex64 {
        self.terms.iter().map(|t| t.eval(xi)).sum()
    }
    fn support(&self) -> (f64, f64) {
        self.terms.iter().map(|t| t.support()).fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)))
    }
    fn feature_scale(&self) -> f64 {
        self.terms.iter().map(|t| t.feature_scale()).fold(f64::INFINITY, f64::min)
    }
}

/// Spectrum given by a closure.
pub struct FnSpectrum<F> {
    pub f: F,
    pub support: (f64, f64),
    pub feature: f64,
}

impl<F: Fn(f64) -> Complex64 + Send + Sync> Spectrum for FnSpectrum<F> {
    fn eval(&self, xi: f64) -> Complex64 {
        (self.f)(xi)
    }
    fn support(&self) -> (f64, f64) {
        self.support
    }
    fn feature_scale(&self) -> f64 {
        self.feature
    }
}

/// `amp · e^{iωx} · exp(-(x - c)²/w²)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Packet {
    pub amp: Complex64,
    pub freq: f64,
    pub center: f64,
    pub width: f64,
}

impl Packet {
    pub fn gaussian(amp: f64, center: f64, width: f64) -> Self {
        Self { amp: Complex64::new(amp, 0.0), freq: 0.0, center, width }
    }

    pub fn value(&self, x: f64) -> Complex64 {
        let u = (x - self.center) / self.width;
        self.amp * Complex64::from_polar((-u * u).exp(), self.freq * x)
    }

    pub fn transform(&self, xi: f64) -> Complex64 {
        let k = xi - self.freq;
        let w = self.width;
        self.amp * Complex64::from_polar(w / 2f64.sqrt() * (-w * w * k * k / 4.0).exp(), -k * self.center)
    }
}

/// Finite sum of Gaussian packets with a closed-form transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketSum {
    pub packets: Vec<Packet>,
}

impl PacketSum {
    pub fn value(&self, x: f64) -> Complex64 {
        self.packets.iter().map(|p| p.value(x)).sum()
    }

    pub fn is_real(&self) -> bool {
        // real iff packets pair up as complex conjugates
        self.packets.iter().all(|p| {
            (p.freq == 0.0 && p.amp.im == 0.0)
                || self.packets.iter().any(|q| q.freq == -p.freq && q.center == p.center && q.width == p.width && q.amp == p.amp.conj())
        })
    }

    /// Largest `|x|` at which a packet exceeds `tol` relative to its peak.
    pub fn spatial_extent(&self, tol: f64) -> f64 {
        let r = (-tol.ln()).sqrt();
        self.packets.iter().map(|p| p.center.abs() + r * p.width).fold(0.0, f64::max)
    }
}

impl Spectrum for PacketSum {
    fn eval(&self, xi: f64) -> Complex64 {
        self.packets.iter().map(|p| p.transform(xi)).sum()
    }

    fn support(&self) -> (f64, f64) {
        // exp(-w²k²/4) < 1e-17 once |k| > 12.5/w
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.packets {
            let r = 12.5 / p.width;
            lo = lo.min(p.freq - r);
            hi = hi.max(p.freq + r);
        }
        (lo, hi)
    }

    fn feature_scale(&self) -> f64 {
        let extent = self.spatial_extent(1e-16);
        let narrowest = self.packets.iter().map(|p| 2.0 / p.width).fold(f64::INFINITY, f64::min);
        (2.0 * PI / (2.0 * extent)).min(narrowest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::grid::transform;

    #[test]
    fn grid_spectrum_matches_modes() {
        let f = GridFunction::sample_real(256, 32.0, |x| (-(x - 1.0) * (x - 1.0)).exp() * (3.0 * x).cos()).unwrap();
        let g = transform(&f);
        let s = GridSpectrum::new(&f);
        for idx in (0..g.len()).step_by(7) {
            let d = (s.eval(g.xi(idx)) - g.coefficients[idx]).norm();
            assert!(d < 1e-13, "mode {idx}: {d}");
        }
    }

    #[test]
    fn packet_transform_matches_dtft() {
        let p = PacketSum {
            packets: vec![Packet { amp: Complex64::new(0.3, -1.2), freq: 2.5, center: -1.5, width: 0.8 }],
        };
        let f = GridFunction::sample(1024, 40.0, |x| p.value(x)).unwrap();
        let s = GridSpectrum::new(&f);
        for xi in [-3.0, 0.0, 1.1, 2.5, 4.7, 9.0] {
            assert!((s.eval(xi) - p.eval(xi)).norm() < 1e-12, "xi {xi}");
        }
    }

    #[test]
    fn realness_of_packet_sums() {
        let a = Complex64::new(0.5, 0.25);
        let real = PacketSum {
            packets: vec![
                Packet { amp: a, freq: 2.0, center: 0.0, width: 1.0 },
                Packet { amp: a.conj(), freq: -2.0, center: 0.0, width: 1.0 },
            ],
        };
        assert!(real.is_real());
        let complex = PacketSum { packets: vec![real.packets[0]] };
        assert!(!complex.is_real());
    }
}
