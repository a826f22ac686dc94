//! Ratio engine: left and right sides of the Strichartz-type estimates, the
//! multiplier bounds, the Morrey embeddings and the concentration estimate,
//! evaluated over structured test families.
//!
//! The maximum ratio over a family is an empirical constant, never the sharp one.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::airy::{adapted_field, airy_field, apply_band_multiplier, AdaptedFrame, BandRegion, CutoffSpec, LossVariant, MultiplierBoundSpec};
use crate::dyadic::{overlap_count, BilinearRegion, EnlargedRegion, Family, FrequencyPoint, OverlapCount, SEPARATIONS};
use crate::error::{LabError, Result};
use crate::exponents::{
    classical_exponents, refined_exponents_s, refined_exponents_t, report, ClassicalPair, LwpParams, Q, RExp, RefinedExponentsS,
    RefinedExponentsT,
};
use crate::gkdv::{scattering_profile, ScatteringConfig, Trajectory};
use crate::morrey::{embedding_gap, Embedding, Lattice, LatticeTruncation, MorreyParams};
use crate::spectral::{
    fractional_derivative, mixed_spacetime_norm, uniform_grid, wrap_horizon, Exponent, GridFunction, GridSpectrum, MixedNormSpec,
    Packet, PacketSum, SpaceTimeField, Spectrum, Weighted,
};

/// Base frequency of the lacunary pieces `e^{i 2^j ω₀ x}`.
pub const LACUNARY_BASE: f64 = 0.5;
const SUPPORT_TOL: f64 = 1e-10;
const RESOLUTION_TOL: f64 = 1e-5;

fn qr(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

// ---------------------------------------------------------------------------
// test families

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyKind {
    Gaussian,
    ModulatedGaussian,
    #[serde(alias = "lacunary")]
    LacunarySum,
    #[serde(alias = "bump")]
    RescaledBump,
    #[serde(alias = "random")]
    RandomBandLimited,
}

impl FamilyKind {
    pub const ALL: [FamilyKind; 5] =
        [FamilyKind::Gaussian, FamilyKind::ModulatedGaussian, FamilyKind::LacunarySum, FamilyKind::RescaledBump, FamilyKind::RandomBandLimited];

    pub fn name(&self) -> &'static str {
        match self {
            FamilyKind::Gaussian => "gaussian",
            FamilyKind::ModulatedGaussian => "modulated_gaussian",
            FamilyKind::LacunarySum => "lacunary_sum",
            FamilyKind::RescaledBump => "rescaled_bump",
            FamilyKind::RandomBandLimited => "random_band_limited",
        }
    }
}

impl fmt::Display for FamilyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FamilyKind {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.replace('-', "_").as_str() {
            "gaussian" => FamilyKind::Gaussian,
            "modulated_gaussian" | "modulated" => FamilyKind::ModulatedGaussian,
            "lacunary_sum" | "lacunary" => FamilyKind::LacunarySum,
            "rescaled_bump" | "bump" => FamilyKind::RescaledBump,
            "random_band_limited" | "random" => FamilyKind::RandomBandLimited,
            _ => return Err(LabError::Config(format!("unknown family '{s}'"))),
        })
    }
}

/// Members are sampled on `n_x` points of `[-L/2, L/2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestFamily {
    pub kind: FamilyKind,
    pub size: usize,
    pub seed: u64,
    #[serde(default = "default_n_x")]
    pub n_x: usize,
    #[serde(default = "default_box")]
    pub box_length: f64,
}

fn default_n_x() -> usize {
    256
}

fn default_box() -> f64 {
    64.0
}

/// `exp(1 - 1/(1 - x²))` on `(-1, 1)`.
fn bump(x: f64) -> f64 {
    if x.abs() >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - x * x)).exp()
    }
}

impl TestFamily {
    pub fn new(kind: FamilyKind, size: usize, seed: u64) -> Self {
        Self { kind, size, seed, n_x: default_n_x(), box_length: default_box() }
    }

    /// The five built-in families at a common size.
    pub fn builtin(size: usize, seed: u64) -> Vec<TestFamily> {
        FamilyKind::ALL.iter().map(|&k| Self::new(k, size, seed)).collect()
    }

    pub fn with_grid(mut self, n_x: usize, box_length: f64) -> Self {
        self.n_x = n_x;
        self.box_length = box_length;
        self
    }

    fn position(&self, i: usize) -> f64 {
        if self.size <= 1 {
            0.0
        } else {
            i as f64 / (self.size - 1) as f64
        }
    }

    /// Closed-form profile of member `i`.
    pub fn profile(&self, i: usize) -> Box<dyn Fn(f64) -> Complex64 + Send + Sync> {
        let t = self.position(i);
        match self.kind {
            FamilyKind::Gaussian => {
                let w = 4f64.powf(t);
                Box::new(move |x| Complex64::new((-(x / w).powi(2)).exp(), 0.0))
            }
            FamilyKind::ModulatedGaussian => {
                let omega = 1.0 + 3.0 * t;
                Box::new(move |x| Complex64::from_polar((-x * x / 4.0).exp(), omega * x))
            }
            FamilyKind::LacunarySum => {
                let s = lacunary_packets(i + 1, 4.0);
                Box::new(move |x| s.value(x))
            }
            FamilyKind::RescaledBump => {
                let r = 8.0 * 3f64.powf(t);
                Box::new(move |x| Complex64::new(bump(x / r), 0.0))
            }
            FamilyKind::RandomBandLimited => {
                let s = random_packets(self.seed.wrapping_add(i as u64));
                Box::new(move |x| s.value(x))
            }
        }
    }

    /// Frequency beyond which member `i` is below about `1e-10` of its peak, when known in closed form.
    pub fn band_limit(&self, i: usize) -> Option<f64> {
        let t = self.position(i);
        match self.kind {
            FamilyKind::Gaussian => Some(9.6 / 4f64.powf(t)),
            FamilyKind::ModulatedGaussian => Some(1.0 + 3.0 * t + 4.8),
            FamilyKind::LacunarySum => Some(LACUNARY_BASE * ((i + 1) as f64).exp2() + 2.4),
            FamilyKind::RescaledBump => None,
            FamilyKind::RandomBandLimited => Some(4.0 + 6.4),
        }
    }

    pub fn members(&self) -> Result<Vec<GridFunction>> {
        self.members_on(self.n_x, self.box_length)
    }

    /// Members sampled on another grid, e.g. for refinement studies.
    pub fn members_on(&self, n_x: usize, box_length: f64) -> Result<Vec<GridFunction>> {
        if self.size == 0 {
            return Err(LabError::Config("a test family needs at least one member".into()));
        }
        let nyquist = std::f64::consts::PI * n_x as f64 / box_length;
        (0..self.size)
            .map(|i| {
                if let Some(b) = self.band_limit(i).filter(|&b| b > 0.9 * nyquist) {
                    return Err(LabError::Resolution(format!(
                        "{} member {i} reaches frequency {b:.2} beyond 0.9 x Nyquist {nyquist:.2}",
                        self.kind
                    )));
                }
                let f = GridFunction::sample(n_x, box_length, self.profile(i))?;
                check_member(&f, self.kind, i)?;
                Ok(f)
            })
            .collect()
    }
}

/// `Σ_{j=1}^{J} e^{i 2^j ω₀ x} e^{-x²/w²}`.
pub fn lacunary_packets(j_count: usize, width: f64) -> PacketSum {
    PacketSum {
        packets: (1..=j_count)
            .map(|j| Packet { amp: Complex64::new(1.0, 0.0), freq: LACUNARY_BASE * (j as f64).exp2(), center: 0.0, width })
            .collect(),
    }
}

fn random_packets(seed: u64) -> PacketSum {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PacketSum {
        packets: (0..6)
            .map(|_| Packet {
                amp: Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)),
                freq: rng.gen_range(-4.0..4.0),
                center: rng.gen_range(-8.0..8.0),
                width: rng.gen_range(1.5..3.0),
            })
            .collect(),
    }
}

fn check_member(f: &GridFunction, kind: FamilyKind, i: usize) -> Result<()> {
    let max = f.max_abs();
    if max == 0.0 {
        return Err(LabError::Degenerate(format!("{kind} member {i} vanishes")));
    }
    let n = f.len();
    let edge = n / 16;
    let tail = f.samples()[..edge].iter().chain(&f.samples()[n - edge..]).map(|z| z.norm()).fold(0.0, f64::max);
    if tail > SUPPORT_TOL * max {
        return Err(LabError::Config(format!("{kind} member {i} is not supported in the box (edge/peak {:.1e})", tail / max)));
    }
    let raw = f.raw_spectrum();
    let cmax = raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let top = raw
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let m = crate::spectral::fft::mode_of_slot(*k, n).unsigned_abs() as f64;
            m >= 0.45 * n as f64
        })
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max);
    if top > RESOLUTION_TOL * cmax {
        return Err(LabError::Resolution(format!(
            "{kind} member {i} is under-resolved at n_x = {n} (top-band/peak {:.1e})",
            top / cmax
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// specs

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatumKind {
    Grid,
    Field,
    Trajectory,
}

#[derive(Debug, Clone)]
pub enum SpecContext {
    /// `‖|∂|^s e^{-t∂³}f‖_{L^p_x L^q_t} + ‖|∂|^{1/p} e^{-t∂³}f‖_{L^p_t L^q_x} ≤ C ‖f̂‖_{L^{α'}}`
    Mixed(ClassicalPair),
    /// `‖|∂|^s e^{-t∂³}f‖_{L^p_x L^q_t} ≤ C ‖|∂|^σ f‖_{M̂^β_{γ,δ}}`
    RefinedSpace(RefinedExponentsS),
    /// `‖|∂|^{1/p} e^{-t∂³}f‖_{L^p_t L^q_x} ≤ C ‖f‖_{M̂^α_{γ,δ}}`
    RefinedTime(RefinedExponentsT),
    /// `‖P F‖ ≤ C 2^{-jσ} ‖F‖_lossy` on the canonical enlargement of a region.
    Multiplier { bound: MultiplierBoundSpec, region: BilinearRegion },
    /// `sup_t ‖|∂|^σ u‖_{M̂} + ‖u‖_S ≤ 2 ‖|∂|^σ u₀‖_{M̂}`
    SmallData(LwpParams),
    Embedding(Embedding),
    /// `‖|∂|^{1/(3α)} e^{-t∂³}u‖_{L^{3α}} ≤ C (sup_N ‖P_N ...‖)^{1-θ} ‖|∂|^σ u‖_{M̂^β_{γ,δ}}^θ`, `θ = ζ/(3α)`.
    Concentration { params: LwpParams, zeta: f64 },
}

#[derive(Debug, Clone)]
pub struct InequalitySpec {
    pub name: String,
    pub context: SpecContext,
}

impl InequalitySpec {
    pub fn new(name: impl Into<String>, context: SpecContext) -> Self {
        Self { name: name.into(), context }
    }

    pub fn mixed(p: RExp, q: RExp) -> Result<Self> {
        Ok(Self::new("mixed", SpecContext::Mixed(classical_exponents(p, q)?)))
    }

    pub fn refined_space(p: RExp, q: RExp, sigma: Q) -> Result<Self> {
        let r = refined_exponents_s(p, q, sigma)?;
        require_hat(r.hat_params_valid(), &report::refined_s(&r))?;
        Ok(Self::new("refined-space", SpecContext::RefinedSpace(r)))
    }

    pub fn refined_time(p: RExp, q: RExp, sigma: Q) -> Result<Self> {
        let r = refined_exponents_t(p, q, sigma)?;
        require_hat(r.hat_params_valid(), &report::refined_t(&r))?;
        Ok(Self::new("refined-time", SpecContext::RefinedTime(r)))
    }

    pub fn multiplier(p: f64, q: f64, sigma: f64, variant: LossVariant, region: BilinearRegion) -> Result<Self> {
        let bound = MultiplierBoundSpec::new(Exponent::new(p)?, Exponent::new(q)?, sigma, variant)?;
        let name = match variant {
            LossVariant::SpaceLoss => "multiplier-space",
            LossVariant::TimeLoss => "multiplier-time",
        };
        Ok(Self::new(name, SpecContext::Multiplier { bound, region }))
    }

    pub fn concentration(params: LwpParams) -> Result<Self> {
        let zeta = params.gamma.conjugate().value().max(params.delta.value());
        Ok(Self::new("concentration", SpecContext::Concentration { params, zeta }))
    }

    pub fn datum_kind(&self) -> DatumKind {
        match self.context {
            SpecContext::Multiplier { .. } => DatumKind::Field,
            SpecContext::SmallData(_) => DatumKind::Trajectory,
            _ => DatumKind::Grid,
        }
    }

    pub fn exponents(&self) -> Value {
        match &self.context {
            SpecContext::Mixed(c) => report::classical(c),
            SpecContext::RefinedSpace(r) => report::refined_s(r),
            SpecContext::RefinedTime(r) => report::refined_t(r),
            SpecContext::Multiplier { bound, region } => json!({
                "p": bound.p, "q": bound.q, "sigma": bound.sigma, "variant": bound.variant,
                "lossy": bound.lossy_exponent().ok(), "region": region, "lambda": region.canonical_lambda(),
            }),
            SpecContext::SmallData(l) => report::lwp(l),
            SpecContext::Embedding(e) => serde_json::to_value(e).unwrap_or(Value::Null),
            SpecContext::Concentration { params, zeta } => {
                let mut v = report::lwp(params);
                v["zeta"] = json!(zeta);
                v["theta"] = json!(zeta / (3.0 * params.alpha_f64()));
                v
            }
        }
    }
}

fn require_hat(ok: bool, exps: &Value) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(LabError::Inadmissible(vec![format!("hat-Morrey parameters out of order: {exps}")]))
    }
}

fn e(p: f64) -> Exponent {
    Exponent::new(p).expect("catalog exponent")
}

/// The region used by the catalog's multiplier specs.
pub fn catalog_region() -> BilinearRegion {
    BilinearRegion::new(Family::A, 0, 4, 6).expect("catalog region")
}

/// One spec per estimate, at representative exponents.
pub fn builtin_catalog() -> Vec<InequalitySpec> {
    let ri = RExp::integer;
    let lwp = crate::exponents::lwp_params(qr(2, 1), qr(1, 25), qr(1, 2), qr(21, 50), crate::exponents::Assumption::One)
        .expect("catalog well-posedness tuple");
    let mut out = vec![
        InequalitySpec::mixed(ri(8), ri(8)).expect("catalog"),
        InequalitySpec::refined_space(ri(6), ri(6), qr(1, 30)).expect("catalog"),
        InequalitySpec::refined_time(ri(6), ri(6), qr(1, 30)).expect("catalog"),
        InequalitySpec::multiplier(4.0, 2.0, 0.1, LossVariant::SpaceLoss, catalog_region()).expect("catalog"),
        InequalitySpec::multiplier(4.0, 4.0, 0.2, LossVariant::TimeLoss, catalog_region()).expect("catalog"),
        InequalitySpec::new("small-data", SpecContext::SmallData(lwp.clone())),
    ];
    let embeddings = [
        Embedding::I { beta: e(4.0), gamma1: e(3.0), gamma2: e(2.0), delta1: e(5.0), delta2: e(8.0) },
        Embedding::Ii { beta: e(2.0), gamma1: e(3.0), gamma2: e(4.0), delta1: e(3.0), delta2: e(6.0) },
        Embedding::Iii { beta: e(3.0), gamma: e(2.0), delta: e(6.0) },
        Embedding::Iv { beta: e(3.0), gamma: e(4.0), delta: e(2.0) },
        Embedding::V { alpha: e(4.0), beta: e(2.0), gamma1: e(3.0), gamma2: e(16.0), delta1: e(3.0), delta2: e(4.0) },
    ];
    for em in embeddings {
        out.push(InequalitySpec::new(format!("embedding-{}", em.label()), SpecContext::Embedding(em)));
    }
    out.push(InequalitySpec::concentration(lwp).expect("catalog"));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimate {
    Mixed,
    RefinedSpace,
    RefinedTime,
    MultiplierSpace,
    MultiplierTime,
}

impl Estimate {
    pub const ALL: [Estimate; 5] =
        [Estimate::Mixed, Estimate::RefinedSpace, Estimate::RefinedTime, Estimate::MultiplierSpace, Estimate::MultiplierTime];

    pub fn name(&self) -> &'static str {
        match self {
            Estimate::Mixed => "mixed",
            Estimate::RefinedSpace => "refined-space",
            Estimate::RefinedTime => "refined-time",
            Estimate::MultiplierSpace => "multiplier-space",
            Estimate::MultiplierTime => "multiplier-time",
        }
    }

    /// Five admissible exponent points, all with a nonnegative derivative on the datum.
    pub fn standard_grid(&self) -> Vec<InequalitySpec> {
        let ri = RExp::integer;
        let pts = [(8, 8), (6, 6), (8, 4), (12, 6), (6, 12)];
        let sig = [qr(1, 20), qr(1, 30), qr(1, 20), qr(1, 30), qr(1, 30)];
        let region = catalog_region();
        let made: Result<Vec<InequalitySpec>> = match self {
            Estimate::Mixed => pts.iter().map(|&(p, q)| InequalitySpec::mixed(ri(p), ri(q))).collect(),
            Estimate::RefinedSpace => pts.iter().zip(sig).map(|(&(p, q), s)| InequalitySpec::refined_space(ri(p), ri(q), s)).collect(),
            Estimate::RefinedTime => pts.iter().zip(sig).map(|(&(p, q), s)| InequalitySpec::refined_time(ri(p), ri(q), s)).collect(),
            Estimate::MultiplierSpace => [(4.0, 2.0, 0.1), (4.0, 4.0, 0.1), (2.0, 2.0, 0.2), (8.0, 2.0, 0.1), (3.0, 3.0, 0.3)]
                .iter()
                .map(|&(p, q, s)| InequalitySpec::multiplier(p, q, s, LossVariant::SpaceLoss, region))
                .collect(),
            Estimate::MultiplierTime => [(4.0, 4.0, 0.2), (2.0, 4.0, 0.1), (4.0, 2.0, 0.2), (8.0, 8.0, 0.1), (3.0, 3.0, 0.3)]
                .iter()
                .map(|&(p, q, s)| InequalitySpec::multiplier(p, q, s, LossVariant::TimeLoss, region))
                .collect(),
        };
        made.expect("standard exponent grid is admissible")
    }
}

impl FromStr for Estimate {
    type Err = LabError;
    fn from_str(s: &str) -> Result<Self> {
        Estimate::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| LabError::Config(format!("unknown estimate '{s}'")))
    }
}

// ---------------------------------------------------------------------------
// evaluation

#[derive(Debug, Clone, Copy)]
pub enum Datum<'a> {
    Grid(&'a GridFunction),
    Field(&'a SpaceTimeField),
    Trajectory(&'a Trajectory),
}

impl Datum<'_> {
    fn kind(&self) -> DatumKind {
        match self {
            Datum::Grid(_) => DatumKind::Grid,
            Datum::Field(_) => DatumKind::Field,
            Datum::Trajectory(_) => DatumKind::Trajectory,
        }
    }
}

/// Truncated evaluation domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Domain {
    /// Tail tolerance for the wrap-around horizon.
    pub horizon_tolerance: f64,
    /// `T` as a fraction of the horizon when `t_max` is unset.
    pub horizon_fraction: f64,
    /// Explicit half-width `T` of the window.
    pub t_max: Option<f64>,
    /// Window centre; the window is `[t_center - T, t_center + T]`.
    pub t_center: f64,
    /// Minimum number of time samples.
    pub n_t: usize,
    /// Lattice for hat norms; derived from the datum when unset.
    pub lattice: Option<LatticeTruncation>,
    /// Frame for fields built from grid data in multiplier specs.
    pub frame: AdaptedFrame,
}

impl Default for Domain {
    fn default() -> Self {
        Self {
            horizon_tolerance: 1e-6,
            horizon_fraction: 0.5,
            t_max: None,
            t_center: 0.0,
            n_t: 256,
            lattice: None,
            frame: AdaptedFrame { n_t: 4096, t_len: 800.0, t_width: 0.8 },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub horizon: Option<f64>,
    pub n_t: Option<usize>,
    pub n_x: usize,
    pub box_length: f64,
}

impl Domain {
    /// Time window for the Airy evolution of `f`.
    pub fn window(&self, f: &GridFunction) -> Result<Truncation> {
        let h = wrap_horizon(f, self.horizon_tolerance);
        let t = self.t_max.unwrap_or(self.horizon_fraction * h.time);
        if !t.is_finite() || t <= 0.0 {
            return Err(LabError::Horizon(format!("no finite time window (horizon {:.3e})", h.time)));
        }
        if self.t_center.abs() + t > h.time {
            return Err(LabError::Horizon(format!(
                "window [{:.4}, {:.4}] leaves the wrap-around horizon {:.4}",
                self.t_center - t,
                self.t_center + t,
                h.time
            )));
        }
        // keep the Airy phase step ξ³ Δt below 1/2
        let n_t = self.n_t.max((4.0 * t * h.xi_max.powi(3)).ceil() as usize + 1);
        Ok(Truncation {
            t_min: Some(self.t_center - t),
            t_max: Some(self.t_center + t),
            horizon: Some(h.time),
            n_t: Some(n_t),
            n_x: f.len(),
            box_length: f.box_length(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    pub truncation: Truncation,
}

fn t_grid(tr: &Truncation) -> Vec<f64> {
    uniform_grid(tr.t_min.unwrap_or(0.0), tr.t_max.unwrap_or(0.0), tr.n_t.unwrap_or(1))
}

/// `‖|∂|^d e^{-t∂³} f‖` over the window.
fn airy_norm(f: &GridFunction, d: f64, spec: &MixedNormSpec, tr: &Truncation) -> Result<f64> {
    let g = fractional_derivative(f, d)?;
    let field = airy_field(&g, &t_grid(tr))?.field;
    Ok(mixed_spacetime_norm(&field, spec))
}

fn lattice_for<S: Spectrum + ?Sized>(s: &S, dom: &Domain) -> LatticeTruncation {
    dom.lattice.unwrap_or_else(|| LatticeTruncation::for_spectrum(s))
}

fn hat_morrey(f: &GridFunction, sigma: f64, beta: RExp, gamma: RExp, delta: RExp, dom: &Domain) -> Result<f64> {
    let params = MorreyParams::hat(beta.to_exponent()?, gamma.to_exponent()?, delta.to_exponent()?)?;
    let s = Weighted { inner: GridSpectrum::new(f), power: sigma };
    Ok(Lattice::hat(&s, lattice_for(&s, dom))?.norm(&params)?.value)
}

fn hat_lebesgue(f: &GridFunction, alpha: RExp, dom: &Domain) -> Result<f64> {
    let s = GridSpectrum::new(f);
    Ok(Lattice::hat(&s, lattice_for(&s, dom))?.lebesgue(alpha.conjugate().to_exponent()?))
}

fn qf(x: Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

fn ex(r: RExp) -> Result<Exponent> {
    r.to_exponent()
}

/// Sharp dyadic band `N/2 ≤ |ξ| < N`.
pub fn band_projection(f: &GridFunction, n: f64) -> GridFunction {
    f.apply_symbol(move |k| if k.abs() >= 0.5 * n && k.abs() < n { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }, true)
}

/// Dyadic `N` whose bands carry a non-negligible part of `f̂`.
fn active_bands(f: &GridFunction) -> Vec<f64> {
    let raw = f.raw_spectrum();
    let cmax = raw.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let ks = crate::spectral::fft::wavenumbers(f.len(), f.box_length());
    let mut lo = f64::INFINITY;
    let mut hi: f64 = 0.0;
    for (c, k) in raw.iter().zip(&ks) {
        if *k != 0.0 && c.norm() > 1e-12 * cmax {
            lo = lo.min(k.abs());
            hi = hi.max(k.abs());
        }
    }
    if !lo.is_finite() {
        return Vec::new();
    }
    let (a, b) = (lo.log2().floor() as i32 + 1, hi.log2().floor() as i32 + 1);
    (a..=b).map(|m| (m as f64).exp2()).collect()
}

fn grid_sides(ctx: &SpecContext, f: &GridFunction, dom: &Domain) -> Result<(f64, f64, Truncation)> {
    if f.max_abs() == 0.0 {
        return Err(LabError::Degenerate("zero datum".into()));
    }
    match ctx {
        SpecContext::Mixed(c) => {
            let tr = dom.window(f)?;
            let (p, q) = (ex(c.p)?, ex(c.q)?);
            let rhs = hat_lebesgue(f, c.alpha, dom)?;
            let a = airy_norm(f, qf(c.s), &MixedNormSpec::space_outer(p, q), &tr)?;
            let b = airy_norm(f, qf(c.p.inv()), &MixedNormSpec::time_outer(p, q), &tr)?;
            Ok((a + b, rhs, tr))
        }
        SpecContext::RefinedSpace(r) => {
            let tr = dom.window(f)?;
            let rhs = hat_morrey(f, qf(r.sigma), r.beta, r.gamma, r.delta, dom)?;
            let lhs = airy_norm(f, qf(r.s), &MixedNormSpec::space_outer(ex(r.p)?, ex(r.q)?), &tr)?;
            Ok((lhs, rhs, tr))
        }
        SpecContext::RefinedTime(r) => {
            let tr = dom.window(f)?;
            let rhs = hat_morrey(f, 0.0, r.alpha, r.gamma, r.delta, dom)?;
            let lhs = airy_norm(f, qf(r.derivative), &MixedNormSpec::time_outer(ex(r.p)?, ex(r.q)?), &tr)?;
            Ok((lhs, rhs, tr))
        }
        SpecContext::Embedding(em) => {
            let rep = embedding_gap(f, em, dom.lattice)?;
            let tr = Truncation { t_min: None, t_max: None, horizon: None, n_t: None, n_x: f.len(), box_length: f.box_length() };
            Ok((rep.lhs, rep.rhs, tr))
        }
        SpecContext::Concentration { params, zeta } => {
            let tr = dom.window(f)?;
            let a3 = 3.0 * params.alpha_f64();
            let d = 1.0 / a3;
            let norm = MixedNormSpec::diagonal(Exponent::new(a3)?);
            let lhs = airy_norm(f, d, &norm, &tr)?;
            let mut sup: f64 = 0.0;
            for n in active_bands(f) {
                sup = sup.max(airy_norm(&band_projection(f, n), d, &norm, &tr)?);
            }
            let m = hat_morrey(f, params.sigma_f64(), params.beta, params.gamma, params.delta, dom)?;
            let theta = zeta / a3;
            Ok((lhs, sup.powf(1.0 - theta) * m.powf(theta), tr))
        }
        SpecContext::Multiplier { region, .. } => {
            let field = adapted_field(&BandRegion::Bilinear { region: *region }, f, &dom.frame)?;
            field_sides(ctx, &field, None)
        }
        SpecContext::SmallData(_) => Err(LabError::Config("the small-data spec consumes a Trajectory".into())),
    }
}

fn field_truncation(f: &SpaceTimeField) -> Truncation {
    let t = f.t_grid();
    Truncation {
        t_min: t.first().copied(),
        t_max: t.last().copied(),
        horizon: None,
        n_t: Some(f.n_t()),
        n_x: f.n_x(),
        box_length: f.box_length(),
    }
}

fn field_sides(ctx: &SpecContext, f: &SpaceTimeField, projected: Option<&SpaceTimeField>) -> Result<(f64, f64, Truncation)> {
    let SpecContext::Multiplier { bound, region } = ctx else {
        return Err(LabError::Config("only multiplier specs consume a space-time field".into()));
    };
    let owned;
    let pf = match projected {
        Some(p) => p,
        None => {
            owned = apply_band_multiplier(f, &CutoffSpec::canonical(*region)?)?;
            &owned
        }
    };
    let (lhs_spec, rhs_spec) = bound.norms()?;
    let rhs = mixed_spacetime_norm(f, &rhs_spec) * (-(region.j as f64) * bound.sigma).exp2();
    Ok((mixed_spacetime_norm(pf, &lhs_spec), rhs, field_truncation(f)))
}

/// Both sides and their ratio on the declared truncated domain.
pub fn evaluate(spec: &InequalitySpec, datum: Datum<'_>, dom: &Domain) -> Result<Evaluation> {
    let (lhs, rhs, truncation) = match (datum, &spec.context) {
        (Datum::Grid(f), ctx) => grid_sides(ctx, f, dom)?,
        (Datum::Field(f), ctx @ SpecContext::Multiplier { .. }) => field_sides(ctx, f, None)?,
        (Datum::Trajectory(t), SpecContext::SmallData(params)) => {
            let sc = ScatteringConfig { horizon_tolerance: 1e-8, ..ScatteringConfig::default() };
            let d = scattering_profile(t, params, &sc)?;
            let u0 = t.initial();
            let tr = Truncation {
                t_min: Some(t.times[0]),
                t_max: Some(t.times[0] + d.window),
                horizon: Some(d.horizon),
                n_t: None,
                n_x: u0.len(),
                box_length: u0.box_length(),
            };
            (d.sup_morrey + d.strichartz, d.initial_morrey, tr)
        }
        (d, _) => {
            return Err(LabError::Config(format!("spec '{}' consumes {:?} data, got {:?}", spec.name, spec.datum_kind(), d.kind())));
        }
    };
    if !(rhs > 0.0) || !rhs.is_finite() {
        return Err(LabError::Degenerate(format!("right-hand side of '{}' is {rhs}", spec.name)));
    }
    if !lhs.is_finite() {
        return Err(LabError::Resolution(format!("left-hand side of '{}' is {lhs}", spec.name)));
    }
    Ok(Evaluation { lhs, rhs, ratio: lhs / rhs, truncation })
}

pub fn ratio(spec: &InequalitySpec, datum: Datum<'_>, dom: &Domain) -> Result<f64> {
    Ok(evaluate(spec, datum, dom)?.ratio)
}

// ---------------------------------------------------------------------------
// sweeps

#[derive(Debug, Clone, Serialize)]
pub struct RatioReport {
    pub spec: String,
    pub family: FamilyKind,
    pub seed: u64,
    pub exponents: Value,
    pub ratios: Vec<f64>,
    /// Ratios with `n_x` and the time grid doubled on the same windows.
    pub refined_ratios: Vec<f64>,
    pub max: f64,
    pub refined_max: f64,
    /// `|refined_max - max| / max`
    pub drift: f64,
    pub truncation: Vec<Truncation>,
}

fn refine(tr: &Truncation) -> Domain {
    Domain {
        t_max: tr.t_max.zip(tr.t_min).map(|(b, a)| 0.5 * (b - a)),
        t_center: tr.t_max.zip(tr.t_min).map(|(b, a)| 0.5 * (a + b)).unwrap_or(0.0),
        n_t: 2 * tr.n_t.unwrap_or(1),
        ..Domain::default()
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Max ratio per exponent point over a family, with the drift under doubling
/// `n_x` and the time grid. All points must share a datum kind.
pub fn sweep(points: &[InequalitySpec], family: &TestFamily, dom: &Domain) -> Result<Vec<RatioReport>> {
    if points.is_empty() {
        return Ok(Vec::new());
    }
    let kind = points[0].datum_kind();
    if points.iter().any(|p| p.datum_kind() != kind) || kind == DatumKind::Trajectory {
        return Err(LabError::Config("a sweep needs points of one grid or field kind".into()));
    }
    let coarse = family.members()?;
    let fine = family.members_on(2 * family.n_x, family.box_length)?;
    // per member: (coarse evaluations, fine evaluations), one entry per point
    let per_member: Vec<Vec<(Evaluation, f64)>> = coarse
        .par_iter()
        .zip(fine.par_iter())
        .map(|(c, f)| match kind {
            DatumKind::Grid => grid_member(points, c, f, dom),
            _ => field_member(points, c, f, dom),
        })
        .collect::<Result<_>>()?;
    Ok(points
        .iter()
        .enumerate()
        .map(|(k, spec)| {
            let ratios: Vec<f64> = per_member.iter().map(|m| m[k].0.ratio).collect();
            let refined_ratios: Vec<f64> = per_member.iter().map(|m| m[k].1).collect();
            let (max, refined_max) = (max_of(&ratios), max_of(&refined_ratios));
            RatioReport {
                spec: spec.name.clone(),
                family: family.kind,
                seed: family.seed,
                exponents: spec.exponents(),
                drift: (refined_max - max).abs() / max,
                truncation: per_member.iter().map(|m| m[k].0.truncation).collect(),
                ratios,
                refined_ratios,
                max,
                refined_max,
            }
        })
        .collect())
}

fn grid_member(points: &[InequalitySpec], c: &GridFunction, f: &GridFunction, dom: &Domain) -> Result<Vec<(Evaluation, f64)>> {
    points
        .iter()
        .map(|spec| {
            let ev = evaluate(spec, Datum::Grid(c), dom)?;
            let mut fine_dom = refine(&ev.truncation);
            fine_dom.lattice = dom.lattice;
            fine_dom.horizon_tolerance = dom.horizon_tolerance;
            let fine = evaluate(spec, Datum::Grid(f), &fine_dom)?;
            Ok((ev, fine.ratio))
        })
        .collect()
}

fn field_member(points: &[InequalitySpec], c: &GridFunction, f: &GridFunction, dom: &Domain) -> Result<Vec<(Evaluation, f64)>> {
    let fine_frame = AdaptedFrame { n_t: 2 * dom.frame.n_t, ..dom.frame };
    // projections are shared by all points on the same region
    let mut cache: Vec<(BilinearRegion, [(SpaceTimeField, SpaceTimeField); 2])> = Vec::new();
    let mut out = Vec::with_capacity(points.len());
    for spec in points {
        let SpecContext::Multiplier { region, .. } = &spec.context else {
            return Err(LabError::Config("field sweeps take multiplier specs only".into()));
        };
        if !cache.iter().any(|(r, _)| r == region) {
            let band = BandRegion::Bilinear { region: *region };
            let cut = CutoffSpec::canonical(*region)?;
            let fc = adapted_field(&band, c, &dom.frame)?;
            let pc = apply_band_multiplier(&fc, &cut)?;
            let ff = adapted_field(&band, f, &fine_frame)?;
            let pf = apply_band_multiplier(&ff, &cut)?;
            cache.push((*region, [(fc, pc), (ff, pf)]));
        }
        let (_, [(fc, pc), (ff, pf)]) = cache.iter().find(|(r, _)| r == region).expect("cached");
        let (l, r, tr) = field_sides(&spec.context, fc, Some(pc))?;
        let (lf, rf, _) = field_sides(&spec.context, ff, Some(pf))?;
        if !(r > 0.0 && rf > 0.0) {
            return Err(LabError::Degenerate(format!("right-hand side of '{}' vanishes", spec.name)));
        }
        out.push((Evaluation { lhs: l, rhs: r, ratio: l / r, truncation: tr }, lf / rf));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// lacunary refinement gap

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapPoint {
    pub j: usize,
    /// `‖f̂‖_{L^{α'}}`
    pub hat_lebesgue: f64,
    /// Refined right-hand side.
    pub hat_morrey: f64,
    pub gap: f64,
    /// `gap(J) / gap(1)`
    pub growth: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LacunaryGapReport {
    pub exponents: Value,
    pub envelope_width: f64,
    pub base_frequency: f64,
    pub points: Vec<GapPoint>,
    pub strictly_growing: bool,
}

fn gap_series(j_max: usize, width: f64, alpha: RExp, morrey: impl Fn(&PacketSum) -> Result<f64>) -> Result<Vec<GapPoint>> {
    let a_conj = alpha.conjugate().to_exponent()?;
    let mut out: Vec<GapPoint> = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        let s = lacunary_packets(j, width);
        let l = Lattice::hat(&s, LatticeTruncation::for_spectrum(&s))?.lebesgue(a_conj);
        let m = morrey(&s)?;
        let gap = l / m;
        let growth = out.first().map_or(1.0, |g| gap / g.gap);
        out.push(GapPoint { j, hat_lebesgue: l, hat_morrey: m, gap, growth });
    }
    Ok(out)
}

fn growing(points: &[GapPoint]) -> bool {
    points.windows(2).all(|w| w[1].gap > w[0].gap)
}

/// Lacunary sums `Σ_{j≤J} e^{i 2^j ω₀ x} e^{-x²/w²}` against the time-outer pairing:
/// both right-hand sides bound `‖|∂|^{1/p} e^{-t∂³}f‖_{L^p_t L^q_x}` with the same `α`.
pub fn lacunary_gap(r: &RefinedExponentsT, j_max: usize, width: f64) -> Result<LacunaryGapReport> {
    let params = MorreyParams::hat(ex(r.alpha)?, ex(r.gamma)?, ex(r.delta)?)?;
    let points = gap_series(j_max, width, r.alpha, |s| {
        Ok(Lattice::hat(s, LatticeTruncation::for_spectrum(s))?.norm(&params)?.value)
    })?;
    Ok(LacunaryGapReport {
        exponents: report::refined_t(r),
        envelope_width: width,
        base_frequency: LACUNARY_BASE,
        strictly_growing: growing(&points),
        points,
    })
}

/// The space-outer pairing, whose refined side carries `|ξ|^σ`.
pub fn lacunary_gap_space(r: &RefinedExponentsS, j_max: usize, width: f64) -> Result<LacunaryGapReport> {
    let params = MorreyParams::hat(ex(r.beta)?, ex(r.gamma)?, ex(r.delta)?)?;
    let sigma = qf(r.sigma);
    let points = gap_series(j_max, width, r.alpha, |s| {
        let w = Weighted { inner: s, power: sigma };
        Ok(Lattice::hat(&w, LatticeTruncation::for_spectrum(&w))?.norm(&params)?.value)
    })?;
    Ok(LacunaryGapReport {
        exponents: report::refined_s(r),
        envelope_width: width,
        base_frequency: LACUNARY_BASE,
        strictly_growing: growing(&points),
        points,
    })
}

// ---------------------------------------------------------------------------
// overlap audit

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OverlapAuditConfig {
    pub family: Family,
    pub samples: usize,
    pub seed: u64,
    /// Boundary and corner points of randomly chosen regions.
    pub adversarial: usize,
    /// `log₂ |ξ|` range.
    pub log_xi: (f64, f64),
    /// `log₂ (v/ξ)` range, `v = τ - ξ³/4`.
    pub log_slope: (f64, f64),
}

impl Default for OverlapAuditConfig {
    fn default() -> Self {
        Self { family: Family::A, samples: 100_000, seed: 7, adversarial: 20_000, log_xi: (-8.0, 8.0), log_slope: (-20.0, 20.0) }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OverlapAudit {
    pub config: OverlapAuditConfig,
    pub points: usize,
    pub max_total: usize,
    pub max_per_m: usize,
    /// Maximum count for `m = -3, -2, 2, 3`.
    pub per_m_max: [usize; 4],
    /// `histogram[c]` points lie in exactly `c` enlarged regions.
    pub histogram: Vec<usize>,
    pub total_violations: usize,
    pub per_m_violations: usize,
    pub worst: Option<FrequencyPoint>,
}

pub const OVERLAP_TOTAL_BOUND: usize = 12;
pub const OVERLAP_PER_M_BOUND: usize = 3;

impl OverlapAudit {
    pub fn total_ok(&self) -> bool {
        self.max_total <= OVERLAP_TOTAL_BOUND
    }

    pub fn per_m_ok(&self) -> bool {
        self.max_per_m <= OVERLAP_PER_M_BOUND
    }

    /// Histogram rows `overlap,points`.
    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["overlap", "points"])?;
        for (c, n) in self.histogram.iter().enumerate() {
            w.write_record([c.to_string(), n.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, range: (f64, f64)) -> f64 {
    rng.gen_range(range.0..range.1).exp2()
}

fn random_point(rng: &mut ChaCha8Rng, cfg: &OverlapAuditConfig) -> FrequencyPoint {
    let mut xi = log_uniform(rng, cfg.log_xi);
    if cfg.family == Family::B && rng.gen_bool(0.5) {
        xi = -xi;
    }
    FrequencyPoint::from_offset(xi, xi * log_uniform(rng, cfg.log_slope))
}

/// Corners and edge midpoints of a random enlarged region, plus nudges across each.
fn boundary_points(rng: &mut ChaCha8Rng, family: Family) -> Vec<FrequencyPoint> {
    let m = SEPARATIONS[rng.gen_range(0..4)];
    let j = rng.gen_range(-6..=6);
    let k = rng.gen_range(0.max(-m)..=40);
    let region = EnlargedRegion::canonical(BilinearRegion::new(family, j, k, k + m).expect("index set"));
    let (a, b) = region.base.xi_window();
    let mut out = Vec::new();
    for xi in [a, 0.5 * (a + b), b] {
        if let Some((lo, hi)) = region.section(xi) {
            for v in [lo, 0.5 * (lo + hi), hi] {
                for (dx, dv) in [(0.0, 0.0), (1e-12, 0.0), (-1e-12, 0.0), (0.0, 1e-12), (0.0, -1e-12)] {
                    let x = xi * (1.0 + dx);
                    out.push(FrequencyPoint::from_offset(x, v + dv * v.abs().max(1e-300)));
                }
            }
        }
    }
    out
}

/// Overlap counts over a log-uniform cloud plus region boundaries and corners.
pub fn overlap_audit(cfg: &OverlapAuditConfig) -> OverlapAudit {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pts: Vec<FrequencyPoint> = (0..cfg.samples).map(|_| random_point(&mut rng, cfg)).collect();
    let mut adv = Vec::new();
    while adv.len() < cfg.adversarial {
        adv.extend(boundary_points(&mut rng, cfg.family));
    }
    adv.truncate(cfg.adversarial);
    pts.extend(adv);
    let counts: Vec<OverlapCount> = pts.par_iter().map(|&p| overlap_count(cfg.family, p)).collect();
    let mut audit = OverlapAudit {
        config: *cfg,
        points: pts.len(),
        max_total: 0,
        max_per_m: 0,
        per_m_max: [0; 4],
        histogram: vec![0; OVERLAP_TOTAL_BOUND + 1],
        total_violations: 0,
        per_m_violations: 0,
        worst: None,
    };
    for (c, p) in counts.iter().zip(&pts) {
        if c.total >= audit.histogram.len() {
            audit.histogram.resize(c.total + 1, 0);
        }
        audit.histogram[c.total] += 1;
        if c.total > audit.max_total {
            audit.max_total = c.total;
            audit.worst = Some(*p);
        }
        for (slot, &n) in audit.per_m_max.iter_mut().zip(&c.per_m) {
            *slot = (*slot).max(n);
        }
        audit.total_violations += usize::from(c.total > OVERLAP_TOTAL_BOUND);
        audit.per_m_violations += usize::from(c.max_per_m() > OVERLAP_PER_M_BOUND);
    }
    audit.max_per_m = audit.per_m_max.iter().copied().max().unwrap_or(0);
    audit
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::airy::airy_flow;

    fn gaussian() -> GridFunction {
        TestFamily::new(FamilyKind::Gaussian, 1, 0).members().unwrap().remove(0)
    }

    #[test]
    fn families_are_supported_and_resolved() {
        for fam in TestFamily::builtin(4, 3) {
            let m = fam.members().unwrap();
            assert_eq!(m.len(), 4);
        }
        let too_many = TestFamily::new(FamilyKind::LacunarySum, 6, 0);
        assert!(matches!(too_many.members(), Err(LabError::Resolution(_))));
        let narrow_box = TestFamily::new(FamilyKind::Gaussian, 3, 0).with_grid(256, 8.0);
        assert!(matches!(narrow_box.members(), Err(LabError::Config(_))));
    }

    #[test]
    fn random_family_is_seeded() {
        let a = TestFamily::new(FamilyKind::RandomBandLimited, 2, 11).members().unwrap();
        let b = TestFamily::new(FamilyKind::RandomBandLimited, 2, 11).members().unwrap();
        let c = TestFamily::new(FamilyKind::RandomBandLimited, 2, 12).members().unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], c[0]);
        assert_eq!(a[1], c[0]);
    }

    #[test]
    fn zero_datum_is_degenerate() {
        let z = GridFunction::zeros(256, 64.0).unwrap();
        for spec in builtin_catalog().iter().filter(|s| s.datum_kind() == DatumKind::Grid) {
            assert!(matches!(ratio(spec, Datum::Grid(&z), &Domain::default()), Err(LabError::Degenerate(_))), "{}", spec.name);
        }
    }

    #[test]
    fn window_beyond_horizon_is_rejected() {
        let f = gaussian();
        let dom = Domain { t_max: Some(100.0), ..Domain::default() };
        let spec = InequalitySpec::mixed(RExp::integer(8), RExp::integer(8)).unwrap();
        assert!(matches!(ratio(&spec, Datum::Grid(&f), &dom), Err(LabError::Horizon(_))));
    }

    #[test]
    fn datum_routing() {
        let cat = builtin_catalog();
        assert!(cat.len() >= 8);
        let small = cat.iter().find(|s| s.name == "small-data").unwrap();
        assert_eq!(small.datum_kind(), DatumKind::Trajectory);
        assert!(matches!(ratio(small, Datum::Grid(&gaussian()), &Domain::default()), Err(LabError::Config(_))));
        let mixed = &cat[0];
        let field = SpaceTimeField::from_rows(vec![gaussian(), gaussian()], vec![0.0, 1.0]).unwrap();
        assert!(matches!(ratio(mixed, Datum::Field(&field), &Domain::default()), Err(LabError::Config(_))));
    }

    #[test]
    fn mixed_and_refined_examples_are_finite() {
        let f = gaussian();
        let mixed = InequalitySpec::mixed(RExp::integer(8), RExp::integer(8)).unwrap();
        let r = ratio(&mixed, Datum::Grid(&f), &Domain::default()).unwrap();
        assert!(r.is_finite() && r > 0.0);
        let modulated = TestFamily::new(FamilyKind::ModulatedGaussian, 1, 0).members().unwrap().remove(0);
        let refined = InequalitySpec::refined_space(RExp::integer(6), RExp::integer(6), qr(1, 30)).unwrap();
        let r = ratio(&refined, Datum::Grid(&modulated), &Domain::default()).unwrap();
        assert!(r.is_finite() && r > 0.0);
    }

    #[test]
    fn homogeneity_of_catalog_grid_specs() {
        let f = TestFamily::new(FamilyKind::RandomBandLimited, 1, 5).members().unwrap().remove(0);
        let c = Complex64::new(-2.5, 1.25);
        let g = f.scale(c);
        for spec in builtin_catalog().iter().filter(|s| s.datum_kind() == DatumKind::Grid) {
            let a = ratio(spec, Datum::Grid(&f), &Domain::default()).unwrap();
            let b = ratio(spec, Datum::Grid(&g), &Domain::default()).unwrap();
            assert!((a - b).abs() <= 1e-10 * a, "{}: {a} vs {b}", spec.name);
        }
    }

    #[test]
    fn airy_group_invariance_with_shifted_window() {
        let f = TestFamily::new(FamilyKind::ModulatedGaussian, 1, 0).members().unwrap().remove(0);
        let base = Domain::default().window(&f).unwrap();
        let t = 0.5 * base.t_max.unwrap();
        let lattice = Some(LatticeTruncation::for_spectrum(&GridSpectrum::new(&f)).widen(1));
        let s = 0.2 * t;
        let dom = Domain { t_max: Some(t), lattice, ..Domain::default() };
        let moved = Domain { t_center: -s, ..dom };
        let g = airy_flow(&f, s);
        for spec in [
            InequalitySpec::mixed(RExp::integer(8), RExp::integer(8)).unwrap(),
            InequalitySpec::refined_space(RExp::integer(6), RExp::integer(6), qr(1, 30)).unwrap(),
        ] {
            let a = ratio(&spec, Datum::Grid(&f), &dom).unwrap();
            let b = ratio(&spec, Datum::Grid(&g), &moved).unwrap();
            assert!((a - b).abs() <= 1e-8 * a, "{}: {a} vs {b}", spec.name);
        }
    }

    #[test]
    fn concentration_on_two_bands() {
        let f = GridFunction::sample(256, 64.0, |x| {
            let env = (-x * x / 9.0).exp();
            Complex64::from_polar(env, 0.75 * x) + Complex64::from_polar(0.5 * env, 3.0 * x)
        })
        .unwrap();
        let spec = builtin_catalog().into_iter().find(|s| s.name == "concentration").unwrap();
        let ev = evaluate(&spec, Datum::Grid(&f), &Domain::default()).unwrap();
        assert!(ev.ratio.is_finite() && ev.ratio > 0.0);
        assert!(active_bands(&f).len() >= 2);
    }

    #[test]
    fn band_projections_partition() {
        let f = gaussian();
        let bands = active_bands(&f);
        let mut sum = GridFunction::zeros(f.len(), f.box_length()).unwrap();
        for n in &bands {
            sum = sum.add(&band_projection(&f, *n)).unwrap();
        }
        let mean = f.samples().iter().sum::<Complex64>() / f.len() as f64;
        let d = sum.samples().iter().zip(f.samples()).map(|(a, b)| (a + mean - b).norm()).fold(0.0, f64::max);
        assert!(d < 1e-9, "{d}");
    }

    #[test]
    fn degenerate_sweep_has_one_ratio() {
        let fam = TestFamily::new(FamilyKind::Gaussian, 1, 0);
        let spec = InequalitySpec::mixed(RExp::integer(8), RExp::integer(8)).unwrap();
        let rep = sweep(&[spec], &fam, &Domain::default()).unwrap();
        assert_eq!(rep.len(), 1);
        assert_eq!(rep[0].ratios.len(), 1);
        assert_eq!(rep[0].max, rep[0].ratios[0]);
        assert!(rep[0].drift < 0.05, "{}", rep[0].drift);
    }

    #[test]
    fn standard_grids_have_five_points() {
        for e in Estimate::ALL {
            let g = e.standard_grid();
            assert_eq!(g.len(), 5);
            assert!(g.iter().all(|s| s.name == e.name()));
        }
    }

    #[test]
    fn lacunary_gap_grows() {
        let r = refined_exponents_t(RExp::integer(8), RExp::integer(8), qr(1, 100)).unwrap();
        let rep = lacunary_gap(&r, 4, 64.0).unwrap();
        assert!(rep.strictly_growing);
        assert_eq!(rep.points[0].growth, 1.0);
    }

    #[test]
    fn small_overlap_audit() {
        for family in [Family::A, Family::B] {
            let cfg = OverlapAuditConfig { family, samples: 2000, adversarial: 500, ..Default::default() };
            let a = overlap_audit(&cfg);
            assert_eq!(a.points, 2500);
            assert_eq!(a.histogram.iter().sum::<usize>(), 2500);
            assert!(a.total_ok(), "{:?}", a.max_total);
        }
    }
}
