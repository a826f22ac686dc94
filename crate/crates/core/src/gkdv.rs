//! Pseudo-spectral integration of `∂_t u + ∂_x³ u = μ ∂_x(|u|^{2α} u)` on the periodic box.
//!
//! The state is kept as raw DFT coefficients. The dispersive part is exact
//! (integrating factor or exponential time differencing); the nonlinearity is
//! evaluated pointwise and dealiased with the 2/3 rule.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::path::Path;

use crate::airy::airy_flow;
use crate::error::{LabError, Result};
use crate::exponents::{space_norm_spec, LwpParams, SpaceNorm, SpaceTag};
use crate::morrey::{Lattice, LatticeTruncation, MorreyParams};
use crate::spectral::fft::{fft_in_place, ifft_in_place, wavenumbers};
use crate::spectral::{
    fractional_derivative, mixed_spacetime_norm, wrap_horizon, Exponent, GridFunction, GridSpectrum, SpaceTimeField,
    Weighted,
};

const C0: Complex64 = Complex64::new(0.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Integrator {
    IfRk4,
    Etdrk4,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub alpha: f64,
    pub mu: f64,
    pub box_length: f64,
    pub n_x: usize,
    pub dt: f64,
    #[serde(default = "default_integrator")]
    pub integrator: Integrator,
    #[serde(default = "default_true")]
    pub dealias: bool,
    /// Guard `dt ≤ cfl · Δx³`.
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Store every `stride`-th step; `0` picks a stride giving about 1000 stored states.
    #[serde(default)]
    pub stride: usize,
}

fn default_integrator() -> Integrator {
    Integrator::IfRk4
}

fn default_true() -> bool {
    true
}

fn default_cfl() -> f64 {
    1.0
}

impl SolverConfig {
    pub fn new(alpha: f64, mu: f64, box_length: f64, n_x: usize, dt: f64) -> Self {
        Self { alpha, mu, box_length, n_x, dt, integrator: Integrator::IfRk4, dealias: true, cfl: 1.0, stride: 0 }
    }

    pub fn dx(&self) -> f64 {
        self.box_length / self.n_x as f64
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) {
            return Err(LabError::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.dt > 0.0) {
            return Err(LabError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !self.mu.is_finite() {
            return Err(LabError::Config("mu must be finite".into()));
        }
        let limit = self.cfl * self.dx().powi(3);
        if self.dt > limit {
            return Err(LabError::Config(format!(
                "dt = {:.3e} exceeds the guard cfl * dx^3 = {limit:.3e}",
                self.dt
            )));
        }
        GridFunction::zeros(self.n_x, self.box_length)?;
        Ok(())
    }

    /// The equation is mass-subcritical for `α < 2`.
    pub fn mass_subcritical(&self) -> bool {
        self.alpha < 2.0
    }
}

/// Conserved quantities at a stored state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub t: f64,
    pub mean: f64,
    pub mass: f64,
    pub hamiltonian: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Trajectory {
    pub config: SolverConfig,
    /// Step actually used, `≤ config.dt`, so that the span is covered exactly.
    pub dt: f64,
    pub stride: usize,
    pub times: Vec<f64>,
    #[serde(skip)]
    pub states: Vec<GridFunction>,
    pub ledger: Vec<LedgerEntry>,
    /// Spatially constant-in-time forcing added to the right-hand side, if any.
    #[serde(skip)]
    pub forcing: Option<GridFunction>,
}

impl Trajectory {
    pub fn initial(&self) -> &GridFunction {
        &self.states[0]
    }

    pub fn last(&self) -> &GridFunction {
        self.states.last().expect("trajectory holds at least one state")
    }

    pub fn field(&self) -> Result<SpaceTimeField> {
        SpaceTimeField::from_rows(self.states.clone(), self.times.clone())
    }

    /// Stored states with `t - t_0 ≤ t_max`.
    pub fn window(&self, t_max: f64) -> Result<SpaceTimeField> {
        let t0 = self.times[0];
        let n = self.times.iter().take_while(|&&t| t - t0 <= t_max * (1.0 + 1e-12)).count();
        SpaceTimeField::from_rows(self.states[..n].to_vec(), self.times[..n].to_vec())
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        self.field()?.write_csv(path)
    }
}

/// `|u|^{2α} u` for real `u`.
pub fn nonlinearity(u: f64, alpha: f64) -> f64 {
    let p = 2.0 * alpha;
    if p.fract() == 0.0 && p <= 64.0 {
        u.abs().powi(p as i32) * u
    } else {
        (p * u.abs().max(1e-300).ln()).exp() * u
    }
}

struct Solver {
    alpha: f64,
    mu: f64,
    dx: f64,
    k: Vec<f64>,
    /// `i k` on kept modes, zero on dealiased and Nyquist modes.
    ik_mask: Vec<Complex64>,
    linear: Vec<Complex64>,
    forcing_hat: Option<Vec<Complex64>>,
}

impl Solver {
    fn new(cfg: &SolverConfig, forcing: Option<&GridFunction>) -> Result<Self> {
        let n = cfg.n_x;
        let k = wavenumbers(n, cfg.box_length);
        let cutoff = if cfg.dealias { n / 3 } else { n / 2 - 1 };
        let ik_mask = (0..n)
            .map(|s| {
                let m = crate::spectral::fft::mode_of_slot(s, n).unsigned_abs() as usize;
                if m <= cutoff && m < n / 2 {
                    Complex64::new(0.0, k[s])
                } else {
                    C0
                }
            })
            .collect();
        let linear = k.iter().map(|&k| Complex64::new(0.0, k * k * k)).collect();
        let forcing_hat = match forcing {
            Some(e) => {
                if e.len() != n || e.box_length() != cfg.box_length {
                    return Err(LabError::Config("forcing is on a different grid".into()));
                }
                let mut buf: Vec<Complex64> = e.samples().iter().map(|z| Complex64::new(z.re, 0.0)).collect();
                fft_in_place(&mut buf);
                Some(buf)
            }
            None => None,
        };
        Ok(Self { alpha: cfg.alpha, mu: cfg.mu, dx: cfg.dx(), k, ik_mask, linear, forcing_hat })
    }

    fn physical(&self, v: &[Complex64]) -> Vec<f64> {
        let mut buf = v.to_vec();
        ifft_in_place(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// `μ i k F[|u|^{2α} u]` (plus forcing) on the kept modes.
    fn rhs(&self, v: &[Complex64], out: &mut [Complex64]) {
        if self.mu == 0.0 {
            out.iter_mut().for_each(|z| *z = C0);
        } else {
            let mut buf = v.to_vec();
            ifft_in_place(&mut buf);
            for z in buf.iter_mut() {
                *z = Complex64::new(nonlinearity(z.re, self.alpha), 0.0);
            }
            fft_in_place(&mut buf);
            for ((o, b), m) in out.iter_mut().zip(&buf).zip(&self.ik_mask) {
                *o = self.mu * m * b;
            }
        }
        if let Some(e) = &self.forcing_hat {
            for (o, e) in out.iter_mut().zip(e) {
                *o += e;
            }
        }
    }

    fn mass(&self, v: &[Complex64]) -> f64 {
        let n = v.len() as f64;
        v.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.dx / n
    }

    fn ledger(&self, t: f64, v: &[Complex64]) -> LedgerEntry {
        let u = self.physical(v);
        let n = v.len();
        let mut d: Vec<Complex64> = v
            .iter()
            .enumerate()
            .map(|(s, z)| if s == n / 2 { C0 } else { z * Complex64::new(0.0, self.k[s]) })
            .collect();
        ifft_in_place(&mut d);
        let p = 2.0 * self.alpha + 2.0;
        let hamiltonian = u
            .iter()
            .zip(&d)
            .map(|(u, ux)| 0.5 * ux.re * ux.re + self.mu * u.abs().powf(p) / p)
            .sum::<f64>()
            * self.dx;
        LedgerEntry {
            t,
            mean: u.iter().sum::<f64>() * self.dx,
            mass: u.iter().map(|u| u * u).sum::<f64>() * self.dx,
            hamiltonian,
        }
    }
}

/// Exponential time-differencing coefficients by the contour mean of Kassam and Trefethen.
struct EtdCoefficients {
    e: Vec<Complex64>,
    e2: Vec<Complex64>,
    q: Vec<Complex64>,
    f1: Vec<Complex64>,
    f2: Vec<Complex64>,
    f3: Vec<Complex64>,
}

const CONTOUR_POINTS: usize = 32;

impl EtdCoefficients {
    fn new(linear: &[Complex64], h: f64) -> Self {
        let roots: Vec<Complex64> =
            (1..=CONTOUR_POINTS).map(|j| Complex64::from_polar(1.0, PI * (j as f64 - 0.5) / CONTOUR_POINTS as f64)).collect();
        let mut out = Self { e: vec![], e2: vec![], q: vec![], f1: vec![], f2: vec![], f3: vec![] };
        for &l in linear {
            let lh = l * h;
            out.e.push(lh.exp());
            out.e2.push((lh / 2.0).exp());
            let (mut q, mut f1, mut f2, mut f3) = (C0, C0, C0, C0);
            for r in &roots {
                let z = lh + r;
                let ez = z.exp();
                let z3 = z * z * z;
                q += ((z / 2.0).exp() - 1.0) / z;
                f1 += (-4.0 - z + ez * (4.0 - 3.0 * z + z * z)) / z3;
                f2 += (2.0 + z + ez * (z - 2.0)) / z3;
                f3 += (-4.0 - 3.0 * z - z * z + ez * (4.0 - z)) / z3;
            }
            let m = h / CONTOUR_POINTS as f64;
            out.q.push(q * m);
            out.f1.push(f1 * m);
            out.f2.push(f2 * m);
            out.f3.push(f3 * m);
        }
        out
    }
}

/// Integrates from `t_span.0` to `t_span.1`, storing every `stride`-th state.
pub fn evolve(u0: &GridFunction, cfg: &SolverConfig, t_span: (f64, f64)) -> Result<Trajectory> {
    evolve_forced(u0, cfg, t_span, None)
}

/// As [`evolve`] with a time-independent forcing `e(x)` added to the right-hand side.
pub fn evolve_forced(u0: &GridFunction, cfg: &SolverConfig, t_span: (f64, f64), forcing: Option<&GridFunction>) -> Result<Trajectory> {
    cfg.validate()?;
    if u0.len() != cfg.n_x || (u0.box_length() - cfg.box_length).abs() > 1e-12 * cfg.box_length {
        return Err(LabError::Config("initial datum is not on the configured grid".into()));
    }
    if !u0.is_real() {
        return Err(LabError::Config("gKdV evolution needs real initial data".into()));
    }
    let (t0, t1) = t_span;
    if !(t1 >= t0) {
        return Err(LabError::Config(format!("t_span ({t0}, {t1}) must be increasing")));
    }
    let raw = ((t1 - t0) / cfg.dt - 1e-9).ceil().max(0.0) as usize;
    let stride = if cfg.stride == 0 { raw.div_ceil(1000).max(1) } else { cfg.stride };
    // Round up to whole strides so stored times stay uniform.
    let steps = raw.div_ceil(stride) * stride;
    let h = if steps == 0 { cfg.dt } else { (t1 - t0) / steps as f64 };
    let solver = Solver::new(cfg, forcing)?;
    let n = cfg.n_x;
    let mut v: Vec<Complex64> = u0.samples().iter().map(|z| Complex64::new(z.re, 0.0)).collect();
    fft_in_place(&mut v);

    let etd = (cfg.integrator == Integrator::Etdrk4).then(|| EtdCoefficients::new(&solver.linear, h));
    let e_half: Vec<Complex64> = solver.linear.iter().map(|l| (l * h / 2.0).exp()).collect();
    let mut bufs = [vec![C0; n], vec![C0; n], vec![C0; n], vec![C0; n]];
    let mut tmp = vec![C0; n];

    let mut traj = Trajectory {
        config: cfg.clone(),
        dt: h,
        stride,
        times: vec![t0],
        states: vec![u0.clone()],
        ledger: vec![solver.ledger(t0, &v)],
        forcing: forcing.cloned(),
    };
    let mut mass = solver.mass(&v);
    for step in 1..=steps {
        let [a, b, c, d] = &mut bufs;
        match &etd {
            None => {
                solver.rhs(&v, a);
                for i in 0..n {
                    tmp[i] = e_half[i] * (v[i] + 0.5 * h * a[i]);
                }
                solver.rhs(&tmp, b);
                for i in 0..n {
                    tmp[i] = e_half[i] * v[i] + 0.5 * h * b[i];
                }
                solver.rhs(&tmp, c);
                for i in 0..n {
                    tmp[i] = e_half[i] * e_half[i] * v[i] + e_half[i] * h * c[i];
                }
                solver.rhs(&tmp, d);
                for i in 0..n {
                    let e = e_half[i];
                    v[i] = e * e * v[i] + h / 6.0 * (e * e * a[i] + 2.0 * e * (b[i] + c[i]) + d[i]);
                }
            }
            Some(k) => {
                solver.rhs(&v, a);
                let an: Vec<Complex64> = (0..n).map(|i| k.e2[i] * v[i] + k.q[i] * a[i]).collect();
                solver.rhs(&an, b);
                let bn: Vec<Complex64> = (0..n).map(|i| k.e2[i] * v[i] + k.q[i] * b[i]).collect();
                solver.rhs(&bn, c);
                let cn: Vec<Complex64> = (0..n).map(|i| k.e2[i] * an[i] + k.q[i] * (2.0 * c[i] - a[i])).collect();
                solver.rhs(&cn, d);
                for i in 0..n {
                    v[i] = k.e[i] * v[i] + a[i] * k.f1[i] + 2.0 * (b[i] + c[i]) * k.f2[i] + d[i] * k.f3[i];
                }
            }
        }
        let t = t0 + step as f64 * h;
        let new_mass = solver.mass(&v);
        if !new_mass.is_finite() || (mass > 0.0 && new_mass.sqrt() > 10.0 * mass.sqrt()) {
            return Err(LabError::Instability {
                t,
                detail: format!("L2 norm went from {:.3e} to {:.3e} in one step of {h:.3e}", mass.sqrt(), new_mass.sqrt()),
            });
        }
        mass = new_mass;
        if step % stride == 0 {
            let u = solver.physical(&v);
            traj.times.push(t);
            traj.states.push(GridFunction::from_real(&u, cfg.box_length)?);
            traj.ledger.push(solver.ledger(t, &v));
        }
    }
    Ok(traj)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConservedReport {
    pub max_mean_drift: f64,
    pub max_relative_mass_drift: f64,
    pub max_hamiltonian_drift: f64,
    pub entries: usize,
}

pub fn conserved_report(traj: &Trajectory) -> ConservedReport {
    let first = traj.ledger[0];
    let mut r = ConservedReport { max_mean_drift: 0.0, max_relative_mass_drift: 0.0, max_hamiltonian_drift: 0.0, entries: traj.ledger.len() };
    for e in &traj.ledger {
        r.max_mean_drift = r.max_mean_drift.max((e.mean - first.mean).abs());
        let rel = if first.mass > 0.0 { (e.mass - first.mass).abs() / first.mass } else { e.mass.abs() };
        r.max_relative_mass_drift = r.max_relative_mass_drift.max(rel);
        r.max_hamiltonian_drift = r.max_hamiltonian_drift.max((e.hamiltonian - first.hamiltonian).abs());
    }
    r
}

/// Max over stored times of the L² defect in the integral form, with the integral taken by
/// cumulative trapezoid over stored states in the interaction picture.
pub fn duhamel_residual(traj: &Trajectory) -> Result<f64> {
    if traj.states.len() < 2 {
        return Err(LabError::InsufficientStates("Duhamel quadrature needs at least two stored states".into()));
    }
    let cfg = &traj.config;
    let solver = Solver::new(cfg, traj.forcing.as_ref())?;
    let n = cfg.n_x;
    let t0 = traj.times[0];
    let to_hat = |u: &GridFunction| {
        let mut b: Vec<Complex64> = u.samples().to_vec();
        fft_in_place(&mut b);
        b
    };
    let u0_hat = to_hat(&traj.states[0]);
    // g(s) = e^{-L(s - t0)} N(u(s))
    let integrand: Vec<Vec<Complex64>> = traj
        .states
        .par_iter()
        .zip(&traj.times)
        .map(|(u, &s)| {
            let mut out = vec![C0; n];
            solver.rhs(&to_hat(u), &mut out);
            for (o, l) in out.iter_mut().zip(&solver.linear) {
                *o *= (-l * (s - t0)).exp();
            }
            out
        })
        .collect();
    let mut acc = vec![C0; n];
    let mut worst: f64 = 0.0;
    for i in 1..traj.states.len() {
        let w = 0.5 * (traj.times[i] - traj.times[i - 1]);
        for m in 0..n {
            acc[m] += w * (integrand[i][m] + integrand[i - 1][m]);
        }
        let ui = to_hat(&traj.states[i]);
        let dt = traj.times[i] - t0;
        let defect: f64 = (0..n)
            .map(|m| ((-solver.linear[m] * dt).exp() * ui[m] - u0_hat[m] - acc[m]).norm_sqr())
            .sum();
        worst = worst.max((defect * solver.dx / n as f64).sqrt());
    }
    Ok(worst)
}

/// `Q_c(x - x0) = ((α+1)c)^{1/(2α)} sech^{1/α}(α√c (x - x0))`, solving `Q'' - cQ + Q^{2α+1} = 0`.
pub fn soliton_profile(alpha: f64, c: f64, x0: f64, n: usize, box_length: f64) -> Result<GridFunction> {
    if !(c > 0.0) {
        return Err(LabError::Domain(format!("soliton speed must be positive, got {c}")));
    }
    if !(alpha > 0.0) {
        return Err(LabError::Domain(format!("alpha must be positive, got {alpha}")));
    }
    let amp = ((alpha + 1.0) * c).powf(1.0 / (2.0 * alpha));
    let k = alpha * c.sqrt();
    GridFunction::sample_real(n, box_length, |x| amp * (1.0 / (k * (x - x0)).cosh()).powf(1.0 / alpha))
}

/// Max of `|Q'' - cQ + Q^{2α+1}|` on the grid with spectral derivatives.
pub fn soliton_residual(q: &GridFunction, alpha: f64, c: f64) -> f64 {
    let qxx = q.apply_symbol(|k| Complex64::new(-k * k, 0.0), true);
    q.samples()
        .iter()
        .zip(qxx.samples())
        .map(|(q, qxx)| (qxx.re - c * q.re + q.re.abs().powf(2.0 * alpha + 1.0) * q.re.signum()).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringConfig {
    /// Tail tolerance for the wrap-around horizon of the initial datum.
    pub horizon_tolerance: f64,
    /// Fraction of the horizon that probes may use.
    pub horizon_fraction: f64,
    /// Number of probe times for the Cauchy increments.
    pub probes: usize,
}

impl Default for ScatteringConfig {
    fn default() -> Self {
        Self { horizon_tolerance: 1e-8, horizon_fraction: 0.5, probes: 8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScatteringDiagnostic {
    pub probe_times: Vec<f64>,
    /// `‖|∂|^σ (w(t_{i+1}) - w(t_i))‖_{M̂^β_{2,δ}}` with `w(t) = e^{t∂³} u(t)`.
    pub increments: Vec<f64>,
    pub sup_morrey: f64,
    pub strichartz: f64,
    pub initial_morrey: f64,
    /// `(sup_t ‖|∂|^σ u(t)‖_{M̂} + ‖u‖_S) / ‖|∂|^σ u_0‖_{M̂}`
    pub small_data_ratio: f64,
    pub horizon: f64,
    pub window: f64,
    pub caveat: &'static str,
}

const PERIODIC_CAVEAT: &str = "periodic box surrogate: norms are truncated to the probe window before the wrap-around horizon";

/// `‖|∂|^σ f‖_{M̂^β_{γ,δ}}` through the DTFT of the samples.
pub fn weighted_hat_morrey(f: &GridFunction, sigma: f64, params: &MorreyParams) -> Result<f64> {
    let s = Weighted { inner: GridSpectrum::new(f), power: sigma };
    let tr = LatticeTruncation::for_spectrum(&s);
    Ok(Lattice::hat(&s, tr)?.norm(params)?.value)
}

/// Space-time norm `‖|∂|^d u‖` of a field described by a [`SpaceNorm`].
pub fn space_norm_of(field: &SpaceTimeField, norm: &SpaceNorm) -> Result<f64> {
    let d = norm.derivative_f64();
    let f = if d == 0.0 {
        field.clone()
    } else {
        let rows = (0..field.n_t())
            .into_par_iter()
            .map(|i| fractional_derivative(&field.row_function(i)?, d))
            .collect::<Result<Vec<_>>>()?;
        SpaceTimeField::from_rows(rows, field.t_grid().to_vec())?
    };
    Ok(mixed_spacetime_norm(&f, &norm.mixed_spec()?))
}

pub fn scattering_profile(traj: &Trajectory, params: &LwpParams, sc: &ScatteringConfig) -> Result<ScatteringDiagnostic> {
    let u0 = traj.initial();
    let horizon = wrap_horizon(u0, sc.horizon_tolerance).time;
    let window = (horizon * sc.horizon_fraction).min(traj.times.last().unwrap() - traj.times[0]);
    let t0 = traj.times[0];
    let inside: Vec<usize> = (0..traj.times.len()).filter(|&i| traj.times[i] - t0 <= window * (1.0 + 1e-12)).collect();
    if inside.len() < 4 {
        return Err(LabError::Horizon(format!(
            "only {} stored states lie before {:.3} (half the horizon {horizon:.3}); need 4",
            inside.len(),
            window
        )));
    }
    let probes = sc.probes.max(4).min(inside.len());
    let pick: Vec<usize> = (0..probes).map(|p| inside[p * (inside.len() - 1) / (probes - 1)]).collect();
    let sigma = params.sigma_f64();
    let beta = params.beta.to_exponent()?;
    let delta = params.delta.to_exponent()?;
    let m2 = MorreyParams::hat(beta, Exponent::Finite(2.0), delta)?;
    let mg = MorreyParams::hat(beta, params.gamma.to_exponent()?, delta)?;
    let w: Vec<GridFunction> = pick.iter().map(|&i| airy_flow(&traj.states[i], -(traj.times[i] - t0))).collect();
    let increments = w
        .par_windows(2)
        .map(|p| weighted_hat_morrey(&p[1].sub(&p[0])?, sigma, &m2))
        .collect::<Result<Vec<_>>>()?;
    let morrey = pick
        .par_iter()
        .map(|&i| weighted_hat_morrey(&traj.states[i], sigma, &mg))
        .collect::<Result<Vec<_>>>()?;
    let initial_morrey = morrey[0];
    if initial_morrey == 0.0 {
        return Err(LabError::Degenerate("initial datum has zero hat-Morrey norm".into()));
    }
    let sup_morrey = morrey.iter().copied().fold(0.0, f64::max);
    let s_norm = space_norm_spec(SpaceTag::S, params.alpha, params.sigma)?;
    let strichartz = space_norm_of(&traj.window(window)?, &s_norm)?;
    Ok(ScatteringDiagnostic {
        probe_times: pick.iter().map(|&i| traj.times[i]).collect(),
        increments,
        sup_morrey,
        strichartz,
        initial_morrey,
        small_data_ratio: (sup_morrey + strichartz) / initial_morrey,
        horizon,
        window,
        caveat: PERIODIC_CAVEAT,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport {
    /// Largest tested amplitude with ratio ≤ 2 (a lower bound for the threshold).
    pub threshold: f64,
    /// Smallest tested amplitude with ratio > 2, if one was found.
    pub first_failure: Option<f64>,
    pub evaluations: Vec<(f64, f64)>,
}

/// Bisection in `log ε` for the largest amplitude whose small-data ratio stays ≤ 2.
pub fn small_data_threshold(
    profile: &GridFunction,
    cfg: &SolverConfig,
    t_end: f64,
    params: &LwpParams,
    sc: &ScatteringConfig,
    eps_range: (f64, f64),
    iterations: usize,
) -> Result<ThresholdReport> {
    let ratio = |eps: f64| -> Result<f64> {
        let u0 = profile.scale(Complex64::new(eps, 0.0));
        match evolve(&u0, cfg, (0.0, t_end)) {
            Ok(traj) => Ok(scattering_profile(&traj, params, sc)?.small_data_ratio),
            Err(LabError::Instability { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    };
    let (mut lo, mut hi) = eps_range;
    let mut evaluations = vec![(lo, ratio(lo)?)];
    if evaluations[0].1 > 2.0 {
        return Ok(ThresholdReport { threshold: 0.0, first_failure: Some(lo), evaluations });
    }
    let r_hi = ratio(hi)?;
    evaluations.push((hi, r_hi));
    if r_hi <= 2.0 {
        return Ok(ThresholdReport { threshold: hi, first_failure: None, evaluations });
    }
    for _ in 0..iterations {
        let mid = (lo * hi).sqrt();
        let r = ratio(mid)?;
        evaluations.push((mid, r));
        if r <= 2.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(ThresholdReport { threshold: lo, first_failure: Some(hi), evaluations })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityPoint {
    pub epsilon: f64,
    /// `‖u - ũ‖_S + ‖u - ũ‖_M` over the common window.
    pub difference: f64,
    /// `‖|u|^{2α}u - |ũ|^{2α}ũ‖_N`.
    pub nonlinear_difference: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilityReport {
    pub points: Vec<StabilityPoint>,
    /// Least-squares slope of `log difference` against `log ε`.
    pub slope: f64,
    /// Largest deviation of `difference / ε` from its geometric mean, as a factor.
    pub spread: f64,
}

fn difference_norms(u: &Trajectory, v: &Trajectory, alpha: f64) -> Result<(f64, f64)> {
    let rows = u.states.iter().zip(&v.states).map(|(a, b)| a.sub(b)).collect::<Result<Vec<_>>>()?;
    let diff = SpaceTimeField::from_rows(rows, u.times.clone())?;
    let a = crate::exponents::parse_rational(&format!("{alpha}"))?.expect("finite alpha");
    let zero = num_rational::Rational64::new(0, 1);
    let s = space_norm_of(&diff, &space_norm_spec(SpaceTag::S, a, zero)?)?;
    let m = space_norm_of(&diff, &space_norm_spec(SpaceTag::M, a, zero)?)?;
    let nl_rows = u
        .states
        .iter()
        .zip(&v.states)
        .map(|(a, b)| {
            let vals: Vec<f64> = a.samples().iter().zip(b.samples()).map(|(x, y)| nonlinearity(x.re, alpha) - nonlinearity(y.re, alpha)).collect();
            GridFunction::from_real(&vals, a.box_length())
        })
        .collect::<Result<Vec<_>>>()?;
    let nl = SpaceTimeField::from_rows(nl_rows, u.times.clone())?;
    let n = space_norm_of(&nl, &space_norm_spec(SpaceTag::N, a, zero)?)?;
    Ok((s + m, n))
}

/// Runs `u` from `u0` and `ũ` from `u0 + ε·perturbation` with forcing `ε·e`, for each `ε`.
pub fn stability_experiment(
    u0: &GridFunction,
    perturbation: &GridFunction,
    forcing: Option<&GridFunction>,
    cfg: &SolverConfig,
    t_end: f64,
    epsilons: &[f64],
) -> Result<StabilityReport> {
    let base = evolve(u0, cfg, (0.0, t_end))?;
    let points = epsilons
        .iter()
        .map(|&eps| {
            let c = Complex64::new(eps, 0.0);
            let start = u0.add(&perturbation.scale(c))?;
            let e = forcing.map(|e| e.scale(c));
            let other = evolve_forced(&start, cfg, (0.0, t_end), e.as_ref())?;
            let (difference, nonlinear_difference) = difference_norms(&base, &other, cfg.alpha)?;
            Ok(StabilityPoint { epsilon: eps, difference, nonlinear_difference })
        })
        .collect::<Result<Vec<_>>>()?;
    let usable: Vec<&StabilityPoint> = points.iter().filter(|p| p.epsilon > 0.0 && p.difference > 0.0).collect();
    let (slope, spread) = if usable.len() >= 2 {
        let xs: Vec<f64> = usable.iter().map(|p| p.epsilon.ln()).collect();
        let ys: Vec<f64> = usable.iter().map(|p| p.difference.ln()).collect();
        let (mx, my) = (xs.iter().sum::<f64>() / xs.len() as f64, ys.iter().sum::<f64>() / ys.len() as f64);
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
        let logs: Vec<f64> = usable.iter().map(|p| (p.difference / p.epsilon).ln()).collect();
        let mean = logs.iter().sum::<f64>() / logs.len() as f64;
        let spread = logs.iter().map(|l| (l - mean).abs()).fold(0.0, f64::max).exp();
        (sxy / sxx, spread)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(StabilityReport { points, slope, spread })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airy::airy_field;
    use crate::spectral::lebesgue_norm;

    fn l2(f: &GridFunction) -> f64 {
        lebesgue_norm(f, Exponent::Finite(2.0))
    }

    #[test]
    fn soliton_residuals() {
        for (alpha, c) in [(1.0, 1.0), (2.0, 1.0), (0.75, 2.0), (1.3, 0.5)] {
            let q = soliton_profile(alpha, c, 0.3, 2048, 96.0).unwrap();
            let r = soliton_residual(&q, alpha, c);
            assert!(r < 1e-8, "alpha {alpha} c {c}: {r}");
        }
        let q = soliton_profile(1.0, 1.0, 0.0, 256, 32.0).unwrap();
        let x = q.x(140);
        assert!((q.samples()[140].re - 2f64.sqrt() / x.cosh()).abs() < 1e-15);
        let q = soliton_profile(2.0, 1.0, 0.0, 256, 32.0).unwrap();
        assert!((q.samples()[140].re - 3f64.powf(0.25) / (2.0 * x).cosh().sqrt()).abs() < 1e-15);
        assert!(soliton_profile(1.0, 0.0, 0.0, 64, 8.0).is_err());
    }

    #[test]
    fn soliton_translation() {
        let a = soliton_profile(1.0, 1.0, 0.0, 512, 80.0).unwrap();
        let b = soliton_profile(1.0, 1.0, 8.0 * a.dx(), 512, 80.0).unwrap();
        assert!(a.translate(8.0 * a.dx()).sub(&b).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn zero_datum_stays_zero() {
        let cfg = SolverConfig::new(1.0, -1.0, 32.0, 128, 1e-3);
        let u0 = GridFunction::zeros(128, 32.0).unwrap();
        let tr = evolve(&u0, &cfg, (0.0, 0.1)).unwrap();
        assert_eq!(tr.last().max_abs(), 0.0);
    }

    #[test]
    fn linear_case_is_airy_flow() {
        let mut cfg = SolverConfig::new(2.0, 0.0, 32.0, 128, 1e-3);
        cfg.stride = 20;
        let u0 = GridFunction::sample_real(128, 32.0, |x| (-x * x).exp() * (1.0 + x)).unwrap();
        for integ in [Integrator::IfRk4, Integrator::Etdrk4] {
            cfg.integrator = integ;
            let tr = evolve(&u0, &cfg, (0.0, 0.2)).unwrap();
            let af = airy_field(&u0, &tr.times).unwrap();
            for i in 0..tr.times.len() {
                let d = tr.states[i].sub(&af.field.row_function(i).unwrap()).unwrap().max_abs();
                assert!(d < 1e-10, "{integ:?} {i}: {d}");
            }
            let c = conserved_report(&tr);
            assert!(c.max_mean_drift < 1e-10 && c.max_relative_mass_drift < 1e-10 && c.max_hamiltonian_drift < 1e-10, "{c:?}");
            assert!(duhamel_residual(&tr).unwrap() < 1e-10);
        }
    }

    #[test]
    fn cfl_guard() {
        let mut cfg = SolverConfig::new(1.0, -1.0, 32.0, 1024, 1e-3);
        assert!(cfg.validate().is_err());
        cfg.cfl = 100.0;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn single_state_duhamel_is_error() {
        let cfg = SolverConfig::new(1.0, -1.0, 32.0, 128, 1e-3);
        let u0 = GridFunction::sample_real(128, 32.0, |x| (-x * x).exp()).unwrap();
        let tr = evolve(&u0, &cfg, (0.0, 0.0)).unwrap();
        assert!(matches!(duhamel_residual(&tr), Err(LabError::InsufficientStates(_))));
    }

    #[test]
    fn short_soliton_run_conserves() {
        let mut cfg = SolverConfig::new(1.0, -1.0, 64.0, 512, 1e-3);
        cfg.cfl = 1.0;
        let q = soliton_profile(1.0, 1.0, 0.0, 512, 64.0).unwrap();
        let tr = evolve(&q, &cfg, (0.0, 0.5)).unwrap();
        let exact = soliton_profile(1.0, 1.0, 0.5, 512, 64.0).unwrap();
        let err = l2(&tr.last().sub(&exact).unwrap());
        assert!(err < 1e-8, "{err}");
        let c = conserved_report(&tr);
        assert!(c.max_mean_drift < 1e-12, "{c:?}");
        assert!(c.max_relative_mass_drift < 1e-10, "{c:?}");
        assert!(c.max_hamiltonian_drift < 1e-8, "{c:?}");
    }

    #[test]
    fn instability_detected() {
        let mut cfg = SolverConfig::new(1.0, -1.0, 16.0, 256, 0.05);
        cfg.cfl = 1e9;
        cfg.dealias = false;
        let q = soliton_profile(1.0, 4.0, 0.0, 256, 16.0).unwrap();
        assert!(matches!(evolve(&q, &cfg, (0.0, 5.0)), Err(LabError::Instability { .. })));
    }

    #[test]
    fn nonlinearity_branches() {
        assert_eq!(nonlinearity(-2.0, 1.0), -8.0);
        assert_eq!(nonlinearity(2.0, 1.5), 16.0);
        assert!((nonlinearity(-2.0, 1.25) + 2f64.powf(3.5)).abs() < 1e-12);
        assert_eq!(nonlinearity(0.0, 1.25), 0.0);
    }
}
