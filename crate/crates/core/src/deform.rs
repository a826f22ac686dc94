//! The deformation group `D(N) A(s) T(y)`, single-bubble extraction and finite-n decoupling.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::airy::airy_flow;
use crate::error::{LabError, Result};
use crate::morrey::{Lattice, LatticeTruncation, MorreyParams};
use crate::spectral::fft::{fft_in_place, ifft_in_place};
use crate::spectral::{GridFunction, GridSpectrum, Spectrum, Weighted};

/// Which power of `h` multiplies `f(hx)` in the dilation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DilationExponent {
    /// `h^{1/α}`, the scaling-invariant choice.
    #[default]
    Scaling,
    /// `h^α`, as literally written for the group.
    Literal,
}

impl DilationExponent {
    pub fn power(self, alpha: f64) -> f64 {
        match self {
            Self::Scaling => 1.0 / alpha,
            Self::Literal => alpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Deformation {
    /// `N = 2^{log2_n}`.
    pub log2_n: i32,
    pub s: f64,
    pub y: f64,
    pub alpha: f64,
    #[serde(default)]
    pub dilation: DilationExponent,
}

impl Deformation {
    pub fn new(n: f64, s: f64, y: f64, alpha: f64) -> Result<Self> {
        let log2_n = dyadic_exponent(n)?;
        if !(alpha > 0.0) {
            return Err(LabError::Domain(format!("alpha must be positive, got {alpha}")));
        }
        Ok(Self { log2_n, s, y, alpha, dilation: DilationExponent::Scaling })
    }

    pub fn identity(alpha: f64) -> Self {
        Self { log2_n: 0, s: 0.0, y: 0.0, alpha, dilation: DilationExponent::Scaling }
    }

    pub fn n(&self) -> f64 {
        (self.log2_n as f64).exp2()
    }

    fn power(&self) -> f64 {
        self.dilation.power(self.alpha)
    }
}

/// `m` with `n = 2^m`, or an error if `n` is not a power of two.
pub fn dyadic_exponent(n: f64) -> Result<i32> {
    if !(n > 0.0) || !n.is_finite() {
        return Err(LabError::Domain(format!("N = {n} is not a positive power of two")));
    }
    let m = n.log2().round();
    if m.exp2() != n {
        return Err(LabError::Domain(format!("N = {n} is not a power of two")));
    }
    Ok(m as i32)
}

/// `h^p f(h x)` with `h = 2^m`, treating `f` as zero outside the box.
///
/// Compression subsamples exactly; expansion interpolates spectrally and rejects data
/// with mass outside the part of the box that stays visible.
pub fn dilate(f: &GridFunction, m: i32, p: f64) -> Result<GridFunction> {
    let n = f.len();
    let h = (m as f64).exp2();
    let amp = h.powf(p);
    if m == 0 {
        return Ok(f.clone());
    }
    if m > 0 {
        let step = 1usize << m;
        let raw = f.raw_spectrum();
        let cmax = raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let cut = (n / 2) / step;
        let leak = raw
            .iter()
            .enumerate()
            .filter(|(s, _)| crate::spectral::fft::mode_of_slot(*s, n).unsigned_abs() as usize > cut)
            .map(|(_, z)| z.norm())
            .fold(0.0, f64::max);
        if leak > 1e-10 * cmax {
            return Err(LabError::Resolution(format!(
                "dilation by {h} needs the spectrum below 1/{step} of Nyquist; leak {:.2e}",
                leak / cmax
            )));
        }
        let offset = (step - 1) * n / 2;
        let samples = (0..n)
            .map(|i| {
                let j = i * step;
                if j >= offset && j - offset < n {
                    f.samples()[j - offset] * amp
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        return GridFunction::new(samples, f.box_length(), f.is_real());
    }
    let k = 1usize << (-m);
    let visible = n / (2 * k);
    let fmax = f.max_abs();
    let outside = (0..n)
        .filter(|&i| (i as i64 - (n / 2) as i64).unsigned_abs() as usize > visible)
        .map(|i| f.samples()[i].norm())
        .fold(0.0, f64::max);
    if outside > 1e-8 * fmax {
        return Err(LabError::OffDomain(format!(
            "expansion by {k} pushes mass {:.2e} (relative) out of the box",
            outside / fmax
        )));
    }
    let fine = upsample(f, k);
    let shift = n * (k - 1) / 2;
    let samples = (0..n).map(|i| fine[i + shift] * amp).collect();
    GridFunction::new(samples, f.box_length(), f.is_real())
}

/// Trigonometric interpolant on a `k`-times finer grid of the same box.
fn upsample(f: &GridFunction, k: usize) -> Vec<Complex64> {
    let n = f.len();
    let mut spec = f.samples().to_vec();
    fft_in_place(&mut spec);
    let big = n * k;
    let mut padded = vec![Complex64::new(0.0, 0.0); big];
    // Both grids start at -L/2, so zero-padding the modes gives the interpolant directly.
    for (s, c) in spec.iter().enumerate() {
        let mode = crate::spectral::fft::mode_of_slot(s, n);
        if mode.unsigned_abs() as usize == n / 2 {
            let half = c * 0.5;
            padded[n / 2] += half;
            padded[big - n / 2] += half;
            continue;
        }
        let slot = if mode >= 0 { mode as usize } else { (big as i64 + mode) as usize };
        padded[slot] = *c;
    }
    ifft_in_place(&mut padded);
    for z in padded.iter_mut() {
        *z *= k as f64;
    }
    if f.is_real() {
        for z in padded.iter_mut() {
            z.im = 0.0;
        }
    }
    padded
}

/// `D(N) A(s) T(y) f`.
pub fn apply_deformation(g: &Deformation, f: &GridFunction) -> Result<GridFunction> {
    let shifted = if g.y == 0.0 { f.clone() } else { f.translate(g.y) };
    let flowed = if g.s == 0.0 { shifted } else { airy_flow(&shifted, g.s) };
    dilate(&flowed, g.log2_n, g.power())
}

/// Fourier transform of `D(N) A(s) T(y) f` given that of `f`:
/// `N^{p-1} e^{is(ξ/N)³} e^{-iyξ/N} f̂(ξ/N)`.
#[derive(Debug, Clone)]
pub struct DeformedSpectrum<S> {
    pub inner: S,
    pub deformation: Deformation,
}

impl<S: Spectrum> Spectrum for DeformedSpectrum<S> {
    fn eval(&self, xi: f64) -> Complex64 {
        let g = &self.deformation;
        let n = g.n();
        let eta = xi / n;
        let phase = g.s * eta * eta * eta - g.y * eta;
        self.inner.eval(eta) * Complex64::from_polar(n.powf(g.power() - 1.0), phase)
    }

    fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.inner.support();
        let n = self.deformation.n();
        (lo * n, hi * n)
    }

    fn feature_scale(&self) -> f64 {
        let g = &self.deformation;
        let (lo, hi) = self.inner.support();
        let reach = lo.abs().max(hi.abs());
        // Phase derivative in η is y - 3sη²; features shrink with it.
        let spread = g.y.abs() + 3.0 * g.s.abs() * reach * reach;
        let phase_scale = if spread > 0.0 { 2.0 * PI / spread } else { f64::INFINITY };
        self.inner.feature_scale().min(phase_scale) * g.n()
    }
}

/// `|log(N/Ñ)| + |s − (N/Ñ)³ s̃| + |y − (N/Ñ) ỹ|`, evaluated in both orders; the max is returned.
pub fn divergence(g: &Deformation, h: &Deformation) -> f64 {
    fn one(a: &Deformation, b: &Deformation) -> f64 {
        let r = a.n() / b.n();
        r.ln().abs() + (a.s - r * r * r * b.s).abs() + (a.y - r * b.y).abs()
    }
    one(g, h).max(one(h, g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BubbleSearch {
    /// Inclusive range of `log2 N`.
    pub log2_n: (i32, i32),
    /// Airy times scanned over `[-s_max, s_max]`.
    pub s_max: f64,
    pub s_steps: usize,
    /// Period of the band-limited evaluation, in units of the box length.
    pub pad: usize,
}

impl Default for BubbleSearch {
    fn default() -> Self {
        Self { log2_n: (-6, 6), s_max: 2.0, s_steps: 256, pad: 8 }
    }
}

impl BubbleSearch {
    pub fn s_grid(&self) -> Vec<f64> {
        let steps = self.s_steps.max(1);
        let mut s: Vec<f64> = (0..=steps).map(|k| -self.s_max + 2.0 * self.s_max * k as f64 / steps as f64).collect();
        s.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
        s
    }

    pub fn s_cell(&self) -> f64 {
        2.0 * self.s_max / self.s_steps.max(1) as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BubbleReport {
    #[serde(rename = "N")]
    pub n: f64,
    pub s: f64,
    pub y: f64,
    pub amplitude: f64,
    pub runner_up_amplitude: f64,
    pub deformation: Deformation,
    pub search: BubbleSearch,
}

struct SliceBest {
    value: f64,
    s: f64,
    y: f64,
}

/// Grid search for the deformation maximizing `|P₁ e^{s∂³} D(N)^{-1} f|(y)`.
///
/// `P₁` is the sharp indicator of `1/2 ≤ |ξ| < 1`. Band values come from the DTFT of the
/// samples on a lattice of period `pad · L`, so no resampling in `x` is needed.
pub fn extract_bubble(f: &GridFunction, alpha: f64, dilation: DilationExponent, search: &BubbleSearch) -> Result<BubbleReport> {
    if f.max_abs() == 0.0 {
        return Err(LabError::NoConcentration("datum is identically zero".into()));
    }
    if search.log2_n.0 > search.log2_n.1 {
        return Err(LabError::Config("empty N range".into()));
    }
    let spec = GridSpectrum::new(f);
    let p = dilation.power(alpha);
    let period = search.pad.max(1) as f64 * f.box_length();
    let dxi = 2.0 * PI / period;
    let m_hi = (1.0 / dxi).ceil() as i64;
    let band: Vec<f64> = (-m_hi..=m_hi)
        .map(|m| m as f64 * dxi)
        .filter(|xi| xi.abs() >= 0.5 && xi.abs() < 1.0)
        .collect();
    let mut ys: Vec<f64> = f.x_grid();
    ys.sort_by(|a, b| a.abs().total_cmp(&b.abs()).then(a.total_cmp(b)));
    let waves: Vec<Vec<Complex64>> = band.iter().map(|&xi| ys.iter().map(|&y| Complex64::from_polar(1.0, xi * y)).collect()).collect();
    let weight = dxi / (2.0 * PI).sqrt();
    let s_grid = search.s_grid();

    let slices: Vec<(i32, SliceBest)> = (search.log2_n.0..=search.log2_n.1)
        .into_par_iter()
        .map(|m| {
            let n = (m as f64).exp2();
            let coeff: Vec<Complex64> = band.iter().map(|&xi| spec.eval(n * xi) * (n.powf(1.0 - p) * weight)).collect();
            let best = s_grid
                .par_iter()
                .map(|&s| {
                    let d: Vec<Complex64> = coeff.iter().zip(&band).map(|(c, &xi)| c * Complex64::from_polar(1.0, -s * xi * xi * xi)).collect();
                    let mut acc = vec![Complex64::new(0.0, 0.0); ys.len()];
                    for (dm, w) in d.iter().zip(&waves) {
                        for (a, w) in acc.iter_mut().zip(w) {
                            *a += dm * w;
                        }
                    }
                    let mut top = SliceBest { value: -1.0, s, y: 0.0 };
                    for (a, &y) in acc.iter().zip(&ys) {
                        let v = a.norm();
                        if v > top.value * (1.0 + 1e-12) {
                            top = SliceBest { value: v, s, y };
                        }
                    }
                    top
                })
                .collect::<Vec<_>>()
                .into_iter()
                .fold(SliceBest { value: -1.0, s: 0.0, y: 0.0 }, |a, b| if b.value > a.value * (1.0 + 1e-12) { b } else { a });
            (m, best)
        })
        .collect();

    let mut order: Vec<usize> = (0..slices.len()).collect();
    // Stable: equal values keep the smaller N first.
    order.sort_by(|&a, &b| {
        let (va, vb) = (slices[a].1.value, slices[b].1.value);
        if (va - vb).abs() <= 1e-12 * va.max(vb) {
            std::cmp::Ordering::Equal
        } else {
            vb.total_cmp(&va)
        }
    });
    let (m, best) = &slices[order[0]];
    if !(best.value > 0.0) {
        return Err(LabError::NoConcentration("no energy in the unit band at any scale".into()));
    }
    let runner_up = order.get(1).map(|&i| slices[i].1.value).unwrap_or(0.0);
    let deformation = Deformation { log2_n: *m, s: best.s, y: best.y, alpha, dilation };
    Ok(BubbleReport {
        n: deformation.n(),
        s: best.s,
        y: best.y,
        amplitude: best.value,
        runner_up_amplitude: runner_up,
        deformation,
        search: *search,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecouplingReport {
    /// `‖|∂|^σ Σ_j G^j ψ^j‖^δ`
    pub lhs: f64,
    /// `Σ_j ‖|∂|^σ ψ^j‖^δ`
    pub rhs: f64,
    pub relative_gap: f64,
}

/// Finite-n decoupling for the hat-Morrey norm `M̂^β_{2,δ}` of `|∂|^σ`.
///
/// The truncation, if not given, is the default for the sum widened by one scale.
pub fn decoupling_gap(
    profiles: &[(Deformation, &dyn Spectrum)],
    sigma: f64,
    params: &MorreyParams,
    truncation: Option<LatticeTruncation>,
) -> Result<DecouplingReport> {
    if profiles.is_empty() {
        return Err(LabError::Config("no profiles".into()));
    }
    let delta = params.delta.value();
    let parts: Vec<DeformedSpectrum<&dyn Spectrum>> =
        profiles.iter().map(|(g, s)| DeformedSpectrum { inner: *s, deformation: *g }).collect();
    let sum = SumOf(&parts);
    let total = Weighted { inner: &sum, power: sigma };
    let tr = truncation.unwrap_or_else(|| LatticeTruncation::for_spectrum(&total).widen(1));
    let lhs = Lattice::hat(&total, tr)?.norm(params)?.value.powf(delta);
    let mut rhs = 0.0;
    for (_, s) in profiles {
        let w = Weighted { inner: *s, power: sigma };
        let t = truncation.unwrap_or_else(|| LatticeTruncation::for_spectrum(&w).widen(1));
        rhs += Lattice::hat(&w, t)?.norm(params)?.value.powf(delta);
    }
    Ok(DecouplingReport { lhs, rhs, relative_gap: if rhs > 0.0 { (lhs - rhs).abs() / rhs } else { 0.0 } })
}

struct SumOf<'a, S>(&'a [S]);

impl<S: Spectrum> Spectrum for SumOf<'_, S> {
    fn eval(&self, xi: f64) -> Complex64 {
        self.0.iter().map(|s| s.eval(xi)).sum()
    }
    fn support(&self) -> (f64, f64) {
        self.0.iter().map(|s| s.support()).fold((f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)))
    }
    fn feature_scale(&self) -> f64 {
        self.0.iter().map(|s| s.feature_scale()).fold(f64::INFINITY, f64::min)
    }
}
