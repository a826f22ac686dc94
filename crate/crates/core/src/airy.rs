//! The Airy group `e^{-t∂³}` and the τ-mollified band multiplier `P_{R,λ}`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::OnceLock;

use crate::dyadic::{BilinearRegion, EnlargedRegion};
use crate::error::{LabError, Result};
use crate::spectral::fft::{fft_in_place, ifft_in_place, wavenumbers};
use crate::spectral::quadrature::GaussRule;
use crate::spectral::{
    mixed_spacetime_norm, wrap_horizon, Exponent, GridFunction, Horizon, MixedNormSpec, SpaceTimeField,
};

/// `e^{-t∂³} f`, i.e. multiplication of every mode by `e^{itξ³}`.
pub fn airy_flow(f: &GridFunction, t: f64) -> GridFunction {
    if t == 0.0 {
        return f.clone();
    }
    f.apply_symbol(|k| Complex64::from_polar(1.0, t * k * k * k), true)
}

#[derive(Debug, Clone)]
pub struct AiryField {
    pub field: SpaceTimeField,
    pub horizon: Horizon,
    /// Set when some `|t|` exceeds the wrap-around horizon.
    pub warning: Option<String>,
}

pub const HORIZON_TOLERANCE: f64 = 1e-10;

pub fn airy_field(f: &GridFunction, t_grid: &[f64]) -> Result<AiryField> {
    let horizon = wrap_horizon(f, HORIZON_TOLERANCE);
    let t_max = t_grid.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let warning = (t_max > horizon.time).then(|| {
        format!("|t| up to {t_max:.4} exceeds the wrap-around horizon {:.4}; rows past it are periodic images", horizon.time)
    });
    let rows: Vec<GridFunction> = t_grid.par_iter().map(|&t| airy_flow(f, t)).collect();
    let field = SpaceTimeField::from_rows(rows, t_grid.to_vec())?;
    Ok(AiryField { field, horizon, warning })
}

/// CDF of the bump `φ(x) = c·exp(-1/(1-x²))` on `[-1, 1]`, tabulated for cubic Hermite lookup.
pub struct Mollifier {
    cdf: Vec<f64>,
    density: Vec<f64>,
    h: f64,
    norm: f64,
}

const TABLE_POINTS: usize = 4097;

impl Mollifier {
    fn build() -> Self {
        let rule = GaussRule::new(8);
        let n = TABLE_POINTS - 1;
        let h = 2.0 / n as f64;
        let raw = |x: f64| if x.abs() >= 1.0 { 0.0 } else { (-1.0 / (1.0 - x * x)).exp() };
        let mut cdf = vec![0.0; TABLE_POINTS];
        for i in 0..n {
            let a = -1.0 + i as f64 * h;
            cdf[i + 1] = cdf[i] + rule.integrate(a, a + h, 1, raw);
        }
        let norm = cdf[n];
        cdf.iter_mut().for_each(|c| *c /= norm);
        cdf[n] = 1.0;
        let density = (0..TABLE_POINTS).map(|i| raw(-1.0 + i as f64 * h) / norm).collect();
        Self { cdf, density, h, norm }
    }

    pub fn get() -> &'static Mollifier {
        static TABLE: OnceLock<Mollifier> = OnceLock::new();
        TABLE.get_or_init(Self::build)
    }

    /// `φ(x)`, normalised to unit integral.
    pub fn density(&self, x: f64) -> f64 {
        if x.abs() >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - x * x)).exp() / self.norm
        }
    }

    /// `∫_{-1}^x φ`, exactly 0 below -1 and 1 above 1.
    pub fn cdf(&self, x: f64) -> f64 {
        if x <= -1.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let u = (x + 1.0) / self.h;
        let i = (u.floor() as usize).min(TABLE_POINTS - 2);
        let s = u - i as f64;
        let (y0, y1) = (self.cdf[i], self.cdf[i + 1]);
        let (d0, d1) = (self.density[i] * self.h, self.density[i + 1] * self.h);
        let s2 = s * s;
        let s3 = s2 * s;
        let v = (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * d0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * d1;
        v.clamp(0.0, 1.0)
    }
}

/// Closed frequency domain whose sections in `τ` are intervals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BandRegion {
    Bilinear { region: BilinearRegion },
    /// `a ≤ ξ ≤ b`, `cξ ≤ τ - ξ³/4 ≤ dξ`, attached to scale `j`.
    Raw { a: f64, b: f64, c: f64, d: f64, j: i32 },
}

impl BandRegion {
    pub fn xi_window(&self) -> (f64, f64) {
        match self {
            BandRegion::Bilinear { region } => region.xi_window(),
            BandRegion::Raw { a, b, .. } => (*a, *b),
        }
    }

    /// `τ`-section `[lo, hi]` at `ξ`.
    pub fn tau_section(&self, xi: f64) -> Option<(f64, f64)> {
        let (a, b) = self.xi_window();
        if xi < a || xi > b {
            return None;
        }
        let cubic = xi * xi * xi / 4.0;
        let (lo, hi) = match self {
            BandRegion::Bilinear { region } => region.band(xi),
            BandRegion::Raw { c, d, .. } => (c * xi, d * xi),
        };
        (lo <= hi).then_some((lo + cubic, hi + cubic))
    }

    pub fn contains(&self, tau: f64, xi: f64) -> bool {
        self.tau_section(xi).is_some_and(|(lo, hi)| lo <= tau && tau <= hi)
    }

    pub fn scale(&self) -> i32 {
        match self {
            BandRegion::Bilinear { region } => region.j,
            BandRegion::Raw { j, .. } => *j,
        }
    }

    /// Midpoint of the ξ-window and of the τ-section above it.
    pub fn center(&self) -> (f64, f64) {
        let (a, b) = self.xi_window();
        let xi = 0.5 * (a + b);
        let (lo, hi) = self.tau_section(xi).unwrap_or((0.0, 0.0));
        (0.5 * (lo + hi), xi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffSpec {
    pub region: BandRegion,
    pub lambda: f64,
}

impl CutoffSpec {
    pub fn new(region: BandRegion, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(LabError::Parameter(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self { region, lambda })
    }

    /// `P_{X̃}`: the region with its canonical `λ = k / (100 · 2^{3j})`.
    pub fn canonical(region: BilinearRegion) -> Result<Self> {
        Self::new(BandRegion::Bilinear { region }, region.canonical_lambda())
    }

    pub fn from_enlarged(e: &EnlargedRegion) -> Result<Self> {
        Self::new(BandRegion::Bilinear { region: e.base }, e.lambda)
    }

    /// `ψ_{R,λ}(τ, ξ) = [(2/λ) φ(2·/λ) * 1_{R_{+λ/2}}(·, ξ)](τ)`.
    pub fn psi(&self, tau: f64, xi: f64) -> f64 {
        match self.region.tau_section(xi) {
            Some((lo, hi)) => psi_section(Mollifier::get(), lo, hi, self.lambda, tau),
            None => 0.0,
        }
    }

    /// Whether `(τ, ξ)` lies in `R_{+λ}`.
    pub fn in_enlarged(&self, tau: f64, xi: f64) -> bool {
        self.region.tau_section(xi).is_some_and(|(lo, hi)| lo - self.lambda <= tau && tau <= hi + self.lambda)
    }
}

fn psi_section(m: &Mollifier, lo: f64, hi: f64, lambda: f64, tau: f64) -> f64 {
    let half = 0.5 * lambda;
    (m.cdf((tau - lo) / half + 1.0) - m.cdf((tau - hi) / half - 1.0)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsiSample {
    pub tau: f64,
    pub xi: f64,
    pub psi: f64,
}

/// `ψ` on an `n_tau × n_xi` grid over the given ranges.
pub fn psi_snapshot(c: &CutoffSpec, tau_range: (f64, f64), xi_range: (f64, f64), n_tau: usize, n_xi: usize) -> Vec<PsiSample> {
    let taus = crate::spectral::uniform_grid(tau_range.0, tau_range.1, n_tau);
    let xis = crate::spectral::uniform_grid(xi_range.0, xi_range.1, n_xi);
    xis.par_iter()
        .flat_map_iter(|&xi| taus.iter().map(move |&tau| PsiSample { tau, xi, psi: c.psi(tau, xi) }))
        .collect()
}

pub fn write_psi_csv<P: AsRef<Path>>(samples: &[PsiSample], path: P) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["tau (dimensionless)", "xi (dimensionless)", "psi (dimensionless)"])?;
    for s in samples {
        w.write_record(&[format!("{:.17e}", s.tau), format!("{:.17e}", s.xi), format!("{:.17e}", s.psi)])?;
    }
    w.flush()?;
    Ok(())
}

/// Smallest `λ` the guard admits on a field: four `τ`-grid cells.
pub fn tau_resolution(f: &SpaceTimeField) -> f64 {
    2.0 * std::f64::consts::PI / (f.n_t() as f64 * f.dt())
}

/// `P_{R,λ} F` by a 2-D transform with kernel `e^{-i(tτ + xξ)}`; carriers shift the frequencies seen by `ψ`.
pub fn apply_band_multiplier(f: &SpaceTimeField, c: &CutoffSpec) -> Result<SpaceTimeField> {
    let (nt, nx) = (f.n_t(), f.n_x());
    if nt < 2 {
        return Err(LabError::Resolution("band multiplier needs at least two time samples".into()));
    }
    let dtau = tau_resolution(f);
    if c.lambda <= 4.0 * dtau {
        return Err(LabError::Resolution(format!(
            "lambda = {:.3e} does not exceed four tau-cells (4 x {dtau:.3e}); lengthen the time window",
            c.lambda
        )));
    }
    if !nt.is_power_of_two() {
        return Err(LabError::Resolution(format!("n_t = {nt} must be a power of two")));
    }
    let taus: Vec<f64> = wavenumbers(nt, nt as f64 * f.dt()).into_iter().map(|t| t + f.tau_carrier).collect();
    let xis: Vec<f64> = wavenumbers(nx, f.box_length()).into_iter().map(|x| x + f.xi_carrier).collect();
    // column-major copy: column l holds F(·, x_l)
    let mut cols = vec![Complex64::new(0.0, 0.0); nt * nx];
    let mut rows = f.values().to_vec();
    rows.par_chunks_mut(nx).for_each(fft_in_place);
    for i in 0..nt {
        for l in 0..nx {
            cols[l * nt + i] = rows[i * nx + l];
        }
    }
    let m = Mollifier::get();
    cols.par_chunks_mut(nt).enumerate().for_each(|(l, col)| {
        fft_in_place(col);
        match c.region.tau_section(xis[l]) {
            None => col.iter_mut().for_each(|z| *z = Complex64::new(0.0, 0.0)),
            Some((lo, hi)) => {
                for (z, &tau) in col.iter_mut().zip(&taus) {
                    *z *= psi_section(m, lo, hi, c.lambda, tau);
                }
            }
        }
        ifft_in_place(col);
    });
    for i in 0..nt {
        for l in 0..nx {
            rows[i * nx + l] = cols[l * nt + i];
        }
    }
    rows.par_chunks_mut(nx).for_each(ifft_in_place);
    let mut out = f.clone();
    out.values_mut().copy_from_slice(&rows);
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossVariant {
    /// `‖PF‖_{L^p_x L^q_t} ≤ C 2^{-jσ} ‖F‖_{L^{p_σ}_x L^q_t}`
    SpaceLoss,
    /// `‖PF‖_{L^p_t L^q_x} ≤ C 2^{-jσ} ‖F‖_{L^p_t L^{q_σ}_x}`
    TimeLoss,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierBoundSpec {
    pub p: Exponent,
    pub q: Exponent,
    pub sigma: f64,
    pub variant: LossVariant,
}

impl MultiplierBoundSpec {
    pub fn new(p: Exponent, q: Exponent, sigma: f64, variant: LossVariant) -> Result<Self> {
        let s = Self { p, q, sigma, variant };
        s.lossy_exponent()?;
        Ok(s)
    }

    /// `p_σ` (space loss) or `q_σ` (time loss).
    pub fn lossy_exponent(&self) -> Result<Exponent> {
        if !(self.sigma > 0.0) {
            return Err(LabError::Parameter(format!("sigma must be positive, got {}", self.sigma)));
        }
        let base = match self.variant {
            LossVariant::SpaceLoss => self.p,
            LossVariant::TimeLoss => self.q,
        };
        let r = base.reciprocal() + self.sigma;
        if r > 1.0 + 1e-15 {
            return Err(LabError::Parameter(format!(
                "needs 1/(1 - sigma) <= {base}, so that the lossy exponent stays in [1, inf]"
            )));
        }
        Exponent::from_reciprocal(r.min(1.0))
    }

    pub fn norms(&self) -> Result<(MixedNormSpec, MixedNormSpec)> {
        let lossy = self.lossy_exponent()?;
        Ok(match self.variant {
            LossVariant::SpaceLoss => (MixedNormSpec::space_outer(self.p, self.q), MixedNormSpec::space_outer(lossy, self.q)),
            LossVariant::TimeLoss => (MixedNormSpec::time_outer(self.p, self.q), MixedNormSpec::time_outer(self.p, lossy)),
        })
    }
}

/// `‖P F‖ / (2^{-jσ} ‖F‖_lossy)` with `j` the scale of the cutoff region.
pub fn multiplier_bound_ratio(f: &SpaceTimeField, c: &CutoffSpec, spec: &MultiplierBoundSpec) -> Result<f64> {
    let pf = apply_band_multiplier(f, c)?;
    bound_ratio_of(f, &pf, c.region.scale(), spec)
}

/// Ratio for a field whose projection has already been computed.
pub fn bound_ratio_of(f: &SpaceTimeField, pf: &SpaceTimeField, j: i32, spec: &MultiplierBoundSpec) -> Result<f64> {
    let (lhs_spec, rhs_spec) = spec.norms()?;
    let rhs = mixed_spacetime_norm(f, &rhs_spec) * (-(j as f64) * spec.sigma).exp2();
    if rhs == 0.0 || !rhs.is_finite() {
        return Err(LabError::Degenerate(format!("right-hand side of the multiplier bound is {rhs}")));
    }
    Ok(mixed_spacetime_norm(pf, &lhs_spec) / rhs)
}

/// Time grid and envelope of a field adapted to a band region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaptedFrame {
    /// Time samples; must be a power of two.
    pub n_t: usize,
    /// Length of the time window at scale 0.
    pub t_len: f64,
    /// Width of the Gaussian time envelope at scale 0.
    pub t_width: f64,
}

impl Default for AdaptedFrame {
    fn default() -> Self {
        Self { n_t: 16384, t_len: 800.0, t_width: 0.2 }
    }
}

/// `F(t, x) = exp(-(t/w_t)²) g(x) e^{i(τ_c t + ξ_c x)}` centred on the region, with the
/// scale-`j` frame obtained from the scale-0 one by `t → 2^{3j} t`, `x → 2^j x`.
///
/// `g` is given on its scale-0 box; its samples are reused on the dilated box.
pub fn adapted_field(region: &BandRegion, g: &GridFunction, frame: &AdaptedFrame) -> Result<SpaceTimeField> {
    let j = region.scale() as f64;
    let (t_s, x_s) = ((3.0 * j).exp2(), j.exp2());
    let t_len = frame.t_len * t_s;
    let width = frame.t_width * t_s;
    let dt = t_len / frame.n_t as f64;
    let t_grid: Vec<f64> = (0..frame.n_t).map(|i| -t_len / 2.0 + i as f64 * dt).collect();
    let nx = g.len();
    let mut values = Vec::with_capacity(frame.n_t * nx);
    for &t in &t_grid {
        let u = t / width;
        let env = (-u * u).exp();
        values.extend(g.samples().iter().map(|z| z * env));
    }
    let (tau_c, xi_c) = region.center();
    Ok(SpaceTimeField::new(values, t_grid, nx, g.box_length() * x_s)?.with_carriers(tau_c, xi_c))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::Family;
    use crate::spectral::{lebesgue_norm, uniform_grid};

    fn l2(f: &GridFunction) -> f64 {
        lebesgue_norm(f, Exponent::Finite(2.0))
    }

    #[test]
    fn identity_and_single_mode() {
        let f = GridFunction::sample_real(64, 16.0, |x| (-x * x).exp()).unwrap();
        assert_eq!(airy_flow(&f, 0.0), f);
        let xi0 = 2.0 * std::f64::consts::PI * 3.0 / 16.0;
        let g = GridFunction::sample(64, 16.0, |x| Complex64::from_polar(1.0, xi0 * x)).unwrap();
        let h = airy_flow(&g, 0.7);
        let phase = Complex64::from_polar(1.0, 0.7 * xi0.powi(3));
        for (a, b) in h.samples().iter().zip(g.samples()) {
            assert!((a - phase * b).norm() < 1e-13);
        }
    }

    #[test]
    fn gaussian_matches_oscillatory_quadrature() {
        // f = e^{-x²/4}, f̂ = √2 e^{-ξ²}, so u(x, t) = π^{-1/2} ∫ e^{-ξ²} cos(xξ + tξ³) dξ
        let f = GridFunction::sample_real(4096, 256.0, |x| (-x * x / 4.0).exp()).unwrap();
        let u = airy_flow(&f, 1.0);
        assert!(u.is_real());
        let rule = GaussRule::new(16);
        let mut worst: f64 = 0.0;
        for i in (0..4096).step_by(37) {
            let x = u.x(i);
            let exact = rule.integrate(-9.0, 9.0, 400, |k| (-k * k).exp() * (x * k + k * k * k).cos()) / std::f64::consts::PI.sqrt();
            worst = worst.max((u.samples()[i].re - exact).abs());
        }
        assert!(worst < 1e-8, "{worst}");
    }

    #[test]
    fn field_rows_unitary_and_group_law() {
        let f = GridFunction::sample_real(256, 64.0, |x| (-((x - 1.0) / 3.0).powi(2)).exp() * (1.0 + 0.3 * x)).unwrap();
        let t = uniform_grid(0.0, 0.5, 6);
        let af = airy_field(&f, &t).unwrap();
        assert!(af.warning.is_none());
        for i in 0..t.len() {
            let r = af.field.row_function(i).unwrap();
            assert!((l2(&r) - l2(&f)).abs() < 1e-12);
        }
        let twice = airy_flow(&airy_flow(&f, 0.2), 0.3);
        let once = af.field.row_function(5).unwrap();
        let d = twice.sub(&once).unwrap().max_abs();
        assert!(d < 1e-12, "{d}");
        let single = airy_field(&f, &[0.0]).unwrap();
        assert_eq!(single.field.row(0), f.samples());
    }

    #[test]
    fn horizon_warning() {
        let f = GridFunction::sample_real(256, 32.0, |x| (-x * x).exp()).unwrap();
        let af = airy_field(&f, &[0.0, 1e3]).unwrap();
        assert!(af.warning.is_some());
    }

    #[test]
    fn mollifier_cdf() {
        let m = Mollifier::get();
        assert_eq!(m.cdf(-1.0), 0.0);
        assert_eq!(m.cdf(1.0), 1.0);
        assert!((m.cdf(0.0) - 0.5).abs() < 1e-14);
        let rule = GaussRule::new(8);
        let direct = rule.integrate(-1.0, 0.3, 64, |x| m.density(x));
        assert!((m.cdf(0.3) - direct).abs() < 1e-12);
        let xs = uniform_grid(-1.0, 1.0, 2001);
        assert!(xs.windows(2).all(|w| m.cdf(w[0]) <= m.cdf(w[1])));
    }

    fn region() -> CutoffSpec {
        CutoffSpec::canonical(BilinearRegion::new(Family::A, 0, 4, 6).unwrap()).unwrap()
    }

    #[test]
    fn psi_sandwich_on_grid() {
        let c = region();
        let (lo, hi) = c.region.xi_window();
        let samples = psi_snapshot(&c, (330.0, 420.0), (lo - 0.5, hi + 0.5), 512, 512);
        let (mut mn, mut mx) = (f64::INFINITY, f64::NEG_INFINITY);
        for s in &samples {
            mn = mn.min(s.psi);
            mx = mx.max(s.psi);
            if c.region.contains(s.tau, s.xi) {
                assert_eq!(s.psi, 1.0);
            }
            if !c.in_enlarged(s.tau, s.xi) {
                assert_eq!(s.psi, 0.0);
            }
        }
        assert_eq!((mn, mx), (0.0, 1.0));
    }

    fn frame_field(c: &CutoffSpec, g_width: f64) -> SpaceTimeField {
        let g = GridFunction::sample(64, 32.0, |x| Complex64::new((-(x / g_width).powi(2)).exp(), 0.0)).unwrap();
        adapted_field(&c.region, &g, &AdaptedFrame::default()).unwrap()
    }

    #[test]
    fn multiplier_fixes_interior_and_kills_exterior() {
        // narrow in τ and ξ: spectrum deep inside R
        let c = region();
        let (tau_c, xi_c) = c.region.center();
        let nt = 16384;
        let t_len = 800.0;
        let dt = t_len / nt as f64;
        let t: Vec<f64> = (0..nt).map(|i| -t_len / 2.0 + i as f64 * dt).collect();
        let g = GridFunction::sample(64, 32.0, |_| Complex64::new(1.0, 0.0)).unwrap();
        let mut vals = Vec::new();
        for &s in &t {
            let env = (-(s / 20.0).powi(2)).exp();
            vals.extend(g.samples().iter().map(|z| z * env));
        }
        let inside = SpaceTimeField::new(vals.clone(), t.clone(), 64, 32.0).unwrap().with_carriers(tau_c, xi_c);
        let p = apply_band_multiplier(&inside, &c).unwrap();
        let d = p.values().iter().zip(inside.values()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        assert!(d < 1e-10, "{d}");
        let outside = SpaceTimeField::new(vals, t, 64, 32.0).unwrap().with_carriers(tau_c + 200.0, xi_c);
        let p = apply_band_multiplier(&outside, &c).unwrap();
        assert!(p.max_abs() < 1e-10, "{}", p.max_abs());
    }

    #[test]
    fn resolution_guard() {
        let c = CutoffSpec::new(region().region, 1e-3).unwrap();
        let f = frame_field(&region(), 1.5);
        assert!(matches!(apply_band_multiplier(&f, &c), Err(LabError::Resolution(_))));
    }

    #[test]
    fn zero_field_is_degenerate() {
        let c = region();
        let f = frame_field(&c, 1.5).scale(0.0);
        let spec = MultiplierBoundSpec::new(Exponent::Finite(4.0), Exponent::Finite(2.0), 0.1, LossVariant::SpaceLoss).unwrap();
        assert!(matches!(multiplier_bound_ratio(&f, &c, &spec), Err(LabError::Degenerate(_))));
    }

    #[test]
    fn lossy_exponent_window() {
        assert!(MultiplierBoundSpec::new(Exponent::Finite(1.05), Exponent::Finite(2.0), 0.1, LossVariant::SpaceLoss).is_err());
        let s = MultiplierBoundSpec::new(Exponent::Finite(4.0), Exponent::Finite(2.0), 0.25, LossVariant::SpaceLoss).unwrap();
        assert_eq!(s.lossy_exponent().unwrap(), Exponent::Finite(2.0));
    }
}
