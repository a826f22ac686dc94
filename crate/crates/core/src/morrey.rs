//! Morrey and hat-Morrey norms over a truncated dyadic lattice.
//!
//! A grid function is read as the step function that equals `f_i` on
//! `[x_i, x_i + Δx)`; the direct norm is exact for it on every scale. The hat
//! norm integrates `|f̂|` with Gauss–Legendre nodes on the finest intervals.
//! Both then aggregate local integrals up the lattice, and the scales outside
//! the truncation are accounted for by a geometric coarse tail and a fitted
//! fine tail.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::spectral::quadrature::GaussRule;
use crate::spectral::{Exponent, GridFunction, GridSpectrum, Spectrum, Weighted};

const MAX_INTERVALS: usize = 1 << 22;
const GAUSS_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    /// `M^β_{γ,δ}`: weight `|τ|^{1/β-1/γ}` on `‖f‖_{L^γ(τ)}`.
    Direct,
    /// `M̂^β_{γ,δ}`: weight `|τ|^{1/γ-1/β}` on `‖f̂‖_{L^{γ'}(τ)}`.
    Hat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MorreyParams {
    pub beta: Exponent,
    pub gamma: Exponent,
    pub delta: Exponent,
    pub side: Side,
}

impl MorreyParams {
    pub fn direct(beta: Exponent, gamma: Exponent, delta: Exponent) -> Result<Self> {
        let p = Self { beta, gamma, delta, side: Side::Direct };
        p.validate()?;
        Ok(p)
    }

    pub fn hat(beta: Exponent, gamma: Exponent, delta: Exponent) -> Result<Self> {
        let p = Self { beta, gamma, delta, side: Side::Hat };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let (ib, ig, id) = (self.beta.reciprocal(), self.gamma.reciprocal(), self.delta.reciprocal());
        let err = |m: String| Err(LabError::Parameter(m));
        match self.side {
            Side::Direct => {
                if ig < ib {
                    return err(format!("direct Morrey norm needs gamma <= beta, got gamma = {}, beta = {}", self.gamma, self.beta));
                }
                if !self.delta.is_infinite() && id >= ib {
                    return err(format!("direct Morrey norm needs beta < delta, got beta = {}, delta = {}", self.beta, self.delta));
                }
                if ib == ig && !self.beta.is_infinite() && !self.delta.is_infinite() {
                    return err("beta = gamma < inf is only allowed with delta = inf".into());
                }
            }
            Side::Hat => {
                if ib < ig {
                    return err(format!("hat-Morrey norm needs beta <= gamma, got beta = {}, gamma = {}", self.beta, self.gamma));
                }
                if !self.delta.is_infinite() && id >= 1.0 - ib {
                    return err(format!("hat-Morrey norm needs beta' < delta, got beta' = {}, delta = {}", self.beta.conjugate(), self.delta));
                }
            }
        }
        Ok(())
    }

    /// Weight exponent and inner exponent `(e_w, r)` of each lattice term `|τ|^{e_w} ‖g‖_{L^r(τ)}`.
    fn term_exponents(&self) -> (f64, Exponent) {
        let (ib, ig) = (self.beta.reciprocal(), self.gamma.reciprocal());
        match self.side {
            Side::Direct => (ib - ig, self.gamma),
            Side::Hat => (ig - ib, self.gamma.conjugate()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeTruncation {
    pub j_min: i32,
    pub j_max: i32,
}

impl LatticeTruncation {
    pub fn new(j_min: i32, j_max: i32) -> Result<Self> {
        if j_min > j_max {
            return Err(LabError::Parameter(format!("j_min = {j_min} exceeds j_max = {j_max}")));
        }
        Ok(Self { j_min, j_max })
    }

    /// `j ∈ [-log2 L - 2, log2(n/L) + 2]`.
    pub fn for_grid(f: &GridFunction) -> Self {
        let l = f.box_length();
        Self {
            j_min: -(l.log2().ceil() as i32) - 2,
            j_max: ((f.len() as f64 / l).log2().ceil() as i32) + 2,
        }
    }

    /// Coarsest scale two octaves above the frequency support, finest scale an eighth of the feature scale.
    pub fn for_spectrum<S: Spectrum + ?Sized>(s: &S) -> Self {
        let (lo, hi) = s.support();
        let reach = lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE);
        let j_min = (-reach.log2()).floor() as i32 - 2;
        let j_max = ((8.0 / s.feature_scale()).log2().ceil() as i32).max(j_min);
        Self { j_min, j_max }
    }

    pub fn widen(&self, by: i32) -> Self {
        Self { j_min: self.j_min - by, j_max: self.j_max + by }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormReport {
    pub params: MorreyParams,
    pub truncation: LatticeTruncation,
    /// Lattice sum with both tails added.
    pub value: f64,
    /// Lattice sum over `j_min ≤ j ≤ j_max` only.
    pub truncated: f64,
    pub tail_estimate: f64,
    pub coarse_tail: f64,
    pub fine_tail: f64,
}

impl NormReport {
    fn zero(params: MorreyParams, truncation: LatticeTruncation) -> Self {
        Self { params, truncation, value: 0.0, truncated: 0.0, tail_estimate: 0.0, coarse_tail: 0.0, fine_tail: 0.0 }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("report serialises")
    }
}

/// Finest-scale measure: interval `k0 + i` carries the pairs `offsets[i]..offsets[i + 1]` of
/// (value, weight), with weights summing to the interval length where the data lives.
#[derive(Debug, Clone)]
pub struct Lattice {
    side: Side,
    truncation: LatticeTruncation,
    k0: i64,
    offsets: Vec<usize>,
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl Lattice {
    pub fn direct(f: &GridFunction, truncation: LatticeTruncation) -> Result<Self> {
        let mut lat = Self::empty(Side::Direct, truncation);
        let Some((lo, hi)) = f.support_indices(0.0) else {
            return Ok(lat);
        };
        let dx = f.dx();
        let x_lo = f.x(lo);
        let x_end = f.x(hi) + dx;
        let scale = (truncation.j_max as f64).exp2();
        let h = 1.0 / scale;
        let k_lo = (x_lo * scale).floor() as i64;
        let k_hi = (x_end * scale).ceil() as i64 - 1;
        let count = check_count(k_lo, k_hi)?;
        let samples = f.samples();
        lat.k0 = k_lo;
        lat.offsets.reserve(count + 1);
        for k in k_lo..=k_hi {
            let a = k as f64 * h;
            let b = a + h;
            let first = (((a - x_lo) / dx).floor().max(0.0) as usize).min(hi - lo);
            let last = ((((b - x_lo) / dx).ceil() as i64 - 1).max(0) as usize).min(hi - lo);
            for c in first..=last {
                let c0 = f.x(lo + c);
                let w = b.min(c0 + dx) - a.max(c0);
                if w > 0.0 {
                    lat.values.push(samples[lo + c].norm());
                    lat.weights.push(w);
                }
            }
            lat.offsets.push(lat.values.len());
        }
        Ok(lat)
    }

    pub fn hat<S: Spectrum + ?Sized>(s: &S, truncation: LatticeTruncation) -> Result<Self> {
        let mut lat = Self::empty(Side::Hat, truncation);
        let (lo, hi) = s.support();
        if !(lo < hi) {
            return Ok(lat);
        }
        let scale = (truncation.j_max as f64).exp2();
        let h = 1.0 / scale;
        let k_lo = (lo * scale).floor() as i64;
        let k_hi = (hi * scale).ceil() as i64 - 1;
        let count = check_count(k_lo, k_hi)?;
        let rule = GaussRule::new(GAUSS_POINTS);
        let nodes: Vec<f64> = (0..count)
            .flat_map(|i| {
                let a = (k_lo + i as i64) as f64 * h;
                rule.nodes.iter().map(move |x| a + x * h)
            })
            .collect();
        lat.values = s.eval_many(&nodes).into_iter().map(|z| z.norm()).collect();
        lat.weights = (0..count).flat_map(|_| rule.weights.iter().map(|w| w * h)).collect();
        lat.k0 = k_lo;
        lat.offsets = (0..=count).map(|i| i * GAUSS_POINTS).collect();
        Ok(lat)
    }

    fn empty(side: Side, truncation: LatticeTruncation) -> Self {
        Self { side, truncation, k0: 0, offsets: vec![0], values: Vec::new(), weights: Vec::new() }
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn truncation(&self) -> LatticeTruncation {
        self.truncation
    }

    pub fn interval_count(&self) -> usize {
        self.offsets.len() - 1
    }

    fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `‖g‖_{L^p}` of the underlying measure.
    pub fn lebesgue(&self, p: Exponent) -> f64 {
        match p {
            Exponent::Infinite => self.values.iter().copied().fold(0.0, f64::max),
            Exponent::Finite(p) => self.moment(p).powf(1.0 / p),
        }
    }

    fn moment(&self, p: f64) -> f64 {
        self.values.iter().zip(&self.weights).map(|(v, w)| w * v.powf(p)).sum()
    }

    /// Per-interval `∫ g^r` (or `sup g` for `r = ∞`) on the finest scale.
    fn local(&self, r: Exponent) -> Vec<f64> {
        (0..self.interval_count())
            .into_par_iter()
            .with_min_len(1024)
            .map(|i| {
                let rng = self.offsets[i]..self.offsets[i + 1];
                let (v, w) = (&self.values[rng.clone()], &self.weights[rng]);
                match r {
                    Exponent::Infinite => v.iter().zip(w).filter(|(_, &w)| w > 0.0).map(|(v, _)| *v).fold(0.0, f64::max),
                    Exponent::Finite(r) => v.iter().zip(w).map(|(v, w)| w * v.powf(r)).sum(),
                }
            })
            .collect()
    }

    pub fn norm(&self, params: &MorreyParams) -> Result<NormReport> {
        params.validate()?;
        if params.side != self.side {
            return Err(LabError::Parameter(format!("{:?} parameters on a {:?} lattice", params.side, self.side)));
        }
        let tr = self.truncation;
        if self.is_zero() {
            return Ok(NormReport::zero(*params, tr));
        }
        let (e_w, r) = params.term_exponents();
        let inv_r = r.reciprocal();
        let mut loc = self.local(r);
        let mut k0 = self.k0;
        let mut j = tr.j_max;
        // (j, level sum Σ t^δ or level max)
        let mut levels: Vec<(i32, f64)> = Vec::new();
        loop {
            let w = (-(j as f64) * e_w).exp2();
            let terms = loc.iter().map(|&l| match r {
                Exponent::Infinite => w * l,
                Exponent::Finite(_) => w * l.powf(inv_r),
            });
            let s = match params.delta {
                Exponent::Infinite => terms.fold(0.0, f64::max),
                Exponent::Finite(d) => terms.map(|t| t.powf(d)).sum(),
            };
            levels.push((j, s));
            let k_end = k0 + loc.len() as i64 - 1;
            if j <= tr.j_min && k0 >= -1 && k_end <= 0 {
                break;
            }
            let p0 = k0.div_euclid(2);
            let mut parent = vec![0.0f64; (k_end.div_euclid(2) - p0 + 1) as usize];
            for (i, &l) in loc.iter().enumerate() {
                let slot = &mut parent[((k0 + i as i64).div_euclid(2) - p0) as usize];
                *slot = if r.is_infinite() { slot.max(l) } else { *slot + l };
            }
            loc = parent;
            k0 = p0;
            j -= 1;
        }
        let inside = |j: i32| j >= tr.j_min && j <= tr.j_max;
        let coarse_level = levels.last().expect("at least one level").1;
        let report = match params.delta {
            Exponent::Infinite => {
                // coarser terms shrink by 2^{e_w} ≤ 1 and finer ones by 2^{-(e_w + 1/r)}, so the ladder holds the sup
                let truncated = levels.iter().filter(|(j, _)| inside(*j)).map(|l| l.1).fold(0.0, f64::max);
                let total = levels.iter().map(|l| l.1).fold(0.0, f64::max);
                let total = if e_w == 0.0 { total.max(coarse_level) } else { total };
                NormReport {
                    params: *params,
                    truncation: tr,
                    value: total,
                    truncated,
                    tail_estimate: total - truncated,
                    coarse_tail: total - truncated,
                    fine_tail: 0.0,
                }
            }
            Exponent::Finite(d) => {
                let truncated_sum: f64 = levels.iter().filter(|(j, _)| inside(*j)).map(|l| l.1).sum();
                let beyond: f64 = levels.iter().filter(|(j, _)| !inside(*j)).map(|l| l.1).sum();
                let rho_c = (d * e_w).exp2();
                let coarse_geom = if coarse_level == 0.0 {
                    0.0
                } else if rho_c >= 1.0 {
                    f64::INFINITY
                } else {
                    coarse_level * rho_c / (1.0 - rho_c)
                };
                let fine = self.fine_tail(&levels, d, e_w + inv_r);
                let total_sum = truncated_sum + beyond + coarse_geom + fine;
                let value = total_sum.powf(1.0 / d);
                let truncated = truncated_sum.powf(1.0 / d);
                let with_coarse = (truncated_sum + beyond + coarse_geom).powf(1.0 / d);
                NormReport {
                    params: *params,
                    truncation: tr,
                    value,
                    truncated,
                    tail_estimate: value - truncated,
                    coarse_tail: with_coarse - truncated,
                    fine_tail: value - with_coarse,
                }
            }
        };
        Ok(report)
    }

    /// `Σ_{j > J} S_j` from `S_j ≈ C 2^{-jκ} + D_j`, with `C = ∫ g^δ` and `D_j` extrapolated geometrically.
    fn fine_tail(&self, levels: &[(i32, f64)], d: f64, decay: f64) -> f64 {
        let kappa = d * decay - 1.0;
        if kappa <= 0.0 {
            return f64::INFINITY;
        }
        let c = self.moment(d);
        let model = |j: i32| c * (-(j as f64) * kappa).exp2();
        let rho = (-kappa).exp2();
        let (jf, sf) = levels[0];
        let mut tail = model(jf) * rho / (1.0 - rho);
        if levels.len() >= 2 {
            let dj = sf - model(jf);
            let dj1 = levels[1].1 - model(levels[1].0);
            if dj1 != 0.0 {
                let ratio = dj / dj1;
                if ratio > 0.0 && ratio < 1.0 {
                    tail += dj * ratio / (1.0 - ratio);
                }
            }
        }
        tail.max(0.0)
    }
}

fn check_count(k_lo: i64, k_hi: i64) -> Result<usize> {
    let count = (k_hi - k_lo + 1).max(0) as usize;
    if count > MAX_INTERVALS {
        return Err(LabError::Resolution(format!(
            "{count} finest dyadic intervals exceed the limit {MAX_INTERVALS}; lower j_max"
        )));
    }
    Ok(count)
}

pub fn morrey_norm(f: &GridFunction, params: &MorreyParams, tr: &LatticeTruncation) -> Result<NormReport> {
    Lattice::direct(f, *tr)?.norm(params)
}

/// Hat-Morrey norm of `f` through the DTFT of its samples.
pub fn hat_morrey_norm(f: &GridFunction, params: &MorreyParams, tr: &LatticeTruncation) -> Result<NormReport> {
    hat_morrey_norm_spectrum(&GridSpectrum::new(f), params, tr)
}

pub fn hat_morrey_norm_spectrum<S: Spectrum + ?Sized>(s: &S, params: &MorreyParams, tr: &LatticeTruncation) -> Result<NormReport> {
    Lattice::hat(s, *tr)?.norm(params)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "item", rename_all = "snake_case")]
pub enum Embedding {
    /// `‖f‖_{M^β_{γ₂,δ₂}} ≤ ‖f‖_{M^β_{γ₁,δ₁}}`
    I { beta: Exponent, gamma1: Exponent, gamma2: Exponent, delta1: Exponent, delta2: Exponent },
    /// `‖f‖_{M̂^β_{γ₂,δ₂}} ≤ ‖f‖_{M̂^β_{γ₁,δ₁}}`
    Ii { beta: Exponent, gamma1: Exponent, gamma2: Exponent, delta1: Exponent, delta2: Exponent },
    /// `‖f‖_{M^β_{γ,δ}} ≤ C ‖f‖_{L^β}`
    Iii { beta: Exponent, gamma: Exponent, delta: Exponent },
    /// `‖f‖_{M̂^β_{γ,δ}} ≤ C ‖f̂‖_{L^{β'}}`
    Iv { beta: Exponent, gamma: Exponent, delta: Exponent },
    /// `‖f‖_{M̂^α_{γ₂,δ₂}} ≤ C ‖|∂|^σ f‖_{M̂^β_{γ₁,δ₁}}`, `σ = 1/β - 1/α`
    V { alpha: Exponent, beta: Exponent, gamma1: Exponent, gamma2: Exponent, delta1: Exponent, delta2: Exponent },
}

impl Embedding {
    pub fn label(&self) -> &'static str {
        match self {
            Embedding::I { .. } => "i",
            Embedding::Ii { .. } => "ii",
            Embedding::Iii { .. } => "iii",
            Embedding::Iv { .. } => "iv",
            Embedding::V { .. } => "v",
        }
    }

    pub fn is_hat(&self) -> bool {
        !matches!(self, Embedding::I { .. } | Embedding::Iii { .. })
    }

    /// Checks the item's hypotheses and returns `(lhs, rhs)` norm parameters where both are Morrey norms.
    fn check(&self) -> Result<()> {
        let bad = |m: &str| Err(LabError::Parameter(format!("embedding ({}): {m}", self.label())));
        match *self {
            Embedding::I { beta, gamma1, gamma2, delta1, delta2 } => {
                let (ib, i1, i2) = (beta.reciprocal(), gamma1.reciprocal(), gamma2.reciprocal());
                if !(i2 >= i1 && i1 >= ib) {
                    return bad("needs gamma2 <= gamma1 <= beta");
                }
                if delta1.reciprocal() < delta2.reciprocal() {
                    return bad("needs delta1 <= delta2");
                }
            }
            Embedding::Ii { beta, gamma1, gamma2, delta1, delta2 } => {
                let (ib, i1, i2) = (beta.reciprocal(), gamma1.reciprocal(), gamma2.reciprocal());
                if !(ib >= i1 && i1 >= i2) {
                    return bad("needs beta <= gamma1 <= gamma2");
                }
                if delta1.reciprocal() < delta2.reciprocal() {
                    return bad("needs delta1 <= delta2");
                }
            }
            Embedding::Iii { beta, gamma, delta } => {
                if !(gamma.reciprocal() > beta.reciprocal() && beta.reciprocal() > delta.reciprocal()) {
                    return bad("needs gamma < beta < delta");
                }
            }
            Embedding::Iv { beta, gamma, delta } => {
                let (gc, bc) = (gamma.conjugate().reciprocal(), beta.conjugate().reciprocal());
                if !(gc > bc && bc > delta.reciprocal()) {
                    return bad("needs gamma' < beta' < delta");
                }
            }
            Embedding::V { alpha, beta, gamma1, gamma2, delta1, delta2 } => {
                let sigma = beta.reciprocal() - alpha.reciprocal();
                if sigma <= 0.0 {
                    return bad("needs beta < alpha");
                }
                if gamma1.reciprocal() - gamma2.reciprocal() <= sigma {
                    return bad("needs 1/gamma1 - 1/gamma2 > 1/beta - 1/alpha");
                }
                if delta1.reciprocal() < delta2.reciprocal() {
                    return bad("needs delta1 <= delta2");
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmbeddingReport {
    pub item: &'static str,
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
    /// Both sides restricted to the truncated lattice, where items (i) and (ii) hold termwise.
    pub lhs_truncated: f64,
    pub rhs_truncated: f64,
    pub ratio_truncated: f64,
    /// Items (i) and (ii) have constant one.
    pub unit_constant: bool,
}

fn ratio(lhs: f64, rhs: f64) -> f64 {
    if lhs == 0.0 && rhs == 0.0 {
        1.0
    } else {
        lhs / rhs
    }
}

fn report(e: &Embedding, lhs: (f64, f64), rhs: (f64, f64)) -> EmbeddingReport {
    EmbeddingReport {
        item: e.label(),
        lhs: lhs.0,
        rhs: rhs.0,
        ratio: ratio(lhs.0, rhs.0),
        lhs_truncated: lhs.1,
        rhs_truncated: rhs.1,
        ratio_truncated: ratio(lhs.1, rhs.1),
        unit_constant: matches!(e, Embedding::I { .. } | Embedding::Ii { .. }),
    }
}

fn pair(r: &NormReport) -> (f64, f64) {
    (r.value, r.truncated)
}

/// Both sides of an embedding for a grid function; hat items go through the DTFT of the samples.
pub fn embedding_gap(f: &GridFunction, e: &Embedding, tr: Option<LatticeTruncation>) -> Result<EmbeddingReport> {
    e.check()?;
    match *e {
        Embedding::I { beta, gamma1, gamma2, delta1, delta2 } => {
            let lat = Lattice::direct(f, tr.unwrap_or_else(|| LatticeTruncation::for_grid(f)))?;
            let lhs = lat.norm(&MorreyParams::direct(beta, gamma2, delta2)?)?;
            let rhs = lat.norm(&MorreyParams::direct(beta, gamma1, delta1)?)?;
            Ok(report(e, pair(&lhs), pair(&rhs)))
        }
        Embedding::Iii { beta, gamma, delta } => {
            let lat = Lattice::direct(f, tr.unwrap_or_else(|| LatticeTruncation::for_grid(f)))?;
            let lhs = lat.norm(&MorreyParams::direct(beta, gamma, delta)?)?;
            let l = lat.lebesgue(beta);
            Ok(report(e, pair(&lhs), (l, l)))
        }
        _ => embedding_gap_spectrum(&GridSpectrum::new(f), e, tr),
    }
}

/// Hat items (ii), (iv), (v) on an arbitrary spectrum.
pub fn embedding_gap_spectrum<S: Spectrum + ?Sized>(s: &S, e: &Embedding, tr: Option<LatticeTruncation>) -> Result<EmbeddingReport> {
    e.check()?;
    let tr = tr.unwrap_or_else(|| LatticeTruncation::for_spectrum(s));
    match *e {
        Embedding::Ii { beta, gamma1, gamma2, delta1, delta2 } => {
            let lat = Lattice::hat(s, tr)?;
            let lhs = lat.norm(&MorreyParams::hat(beta, gamma2, delta2)?)?;
            let rhs = lat.norm(&MorreyParams::hat(beta, gamma1, delta1)?)?;
            Ok(report(e, pair(&lhs), pair(&rhs)))
        }
        Embedding::Iv { beta, gamma, delta } => {
            let lat = Lattice::hat(s, tr)?;
            let lhs = lat.norm(&MorreyParams::hat(beta, gamma, delta)?)?;
            let l = lat.lebesgue(beta.conjugate());
            Ok(report(e, pair(&lhs), (l, l)))
        }
        Embedding::V { alpha, beta, gamma1, gamma2, delta1, delta2 } => {
            let sigma = beta.reciprocal() - alpha.reciprocal();
            let lhs = Lattice::hat(s, tr)?.norm(&MorreyParams::hat(alpha, gamma2, delta2)?)?;
            let weighted = Weighted { inner: s, power: sigma };
            let rhs = Lattice::hat(&weighted, tr)?.norm(&MorreyParams::hat(beta, gamma1, delta1)?)?;
            Ok(report(e, pair(&lhs), pair(&rhs)))
        }
        _ => Err(LabError::Parameter(format!("embedding ({}) acts on grid data, not on a spectrum", e.label()))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{lebesgue_norm, FnSpectrum, Packet, PacketSum};
    use num_complex::Complex64;

    fn e(p: f64) -> Exponent {
        Exponent::new(p).unwrap()
    }

    const INF: Exponent = Exponent::Infinite;

    /// Brute-force direct norm of a step function on its cells over `[j_lo, j_hi]`.
    fn brute_direct(f: &GridFunction, beta: f64, gamma: f64, j_lo: i32, j_hi: i32) -> f64 {
        let mut best: f64 = 0.0;
        for j in j_lo..=j_hi {
            let h = (-(j as f64)).exp2();
            for k in -((f.box_length() / h).ceil() as i64 + 2)..=((f.box_length() / h).ceil() as i64 + 2) {
                let (a, b) = (k as f64 * h, (k + 1) as f64 * h);
                let mut s = 0.0;
                for i in 0..f.len() {
                    let (c0, c1) = (f.x(i), f.x(i) + f.dx());
                    let w = b.min(c1) - a.max(c0);
                    if w > 0.0 {
                        s += w * f.samples()[i].norm().powf(gamma);
                    }
                }
                best = best.max(h.powf(1.0 / beta - 1.0 / gamma) * s.powf(1.0 / gamma));
            }
        }
        best
    }

    #[test]
    fn zero_function() {
        let f = GridFunction::zeros(64, 8.0).unwrap();
        let p = MorreyParams::direct(e(4.0), e(2.0), e(6.0)).unwrap();
        assert_eq!(morrey_norm(&f, &p, &LatticeTruncation::for_grid(&f)).unwrap().value, 0.0);
        let p = MorreyParams::hat(e(2.0), e(3.0), e(3.0)).unwrap();
        assert_eq!(hat_morrey_norm(&f, &p, &LatticeTruncation::for_grid(&f)).unwrap().value, 0.0);
    }

    #[test]
    fn unit_indicator_sup() {
        let f = GridFunction::sample_real(256, 16.0, |x| if (0.0..1.0).contains(&x) { 1.0 } else { 0.0 }).unwrap();
        let p = MorreyParams::direct(e(3.0), e(1.5), INF).unwrap();
        let r = morrey_norm(&f, &p, &LatticeTruncation::for_grid(&f)).unwrap();
        assert!((r.value - 1.0).abs() < 1e-14, "{r:?}");
        let tr = LatticeTruncation::for_grid(&f);
        let brute = brute_direct(&f, 3.0, 1.5, tr.j_min, tr.j_max);
        assert!((brute - 1.0).abs() < 1e-14);
    }

    #[test]
    fn direct_matches_brute_force() {
        let f = GridFunction::sample_real(64, 8.0, |x| (-(x - 0.3) * (x - 0.3)).exp() * (1.0 + 0.5 * x.sin())).unwrap();
        let tr = LatticeTruncation::new(-5, 5).unwrap();
        let p = MorreyParams::direct(e(4.0), e(2.0), INF).unwrap();
        let r = morrey_norm(&f, &p, &tr).unwrap();
        let brute = brute_direct(&f, 4.0, 2.0, -5, 5);
        assert!((r.truncated - brute).abs() < 1e-12 * brute, "{} vs {brute}", r.truncated);
    }

    #[test]
    fn hat_indicator_sup() {
        let s = FnSpectrum {
            f: |xi: f64| if (0.0..1.0).contains(&xi) { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) },
            support: (0.0, 1.0),
            feature: 1.0,
        };
        let p = MorreyParams::hat(e(2.0), e(3.0), INF).unwrap();
        let tr = LatticeTruncation::new(-6, 8).unwrap();
        let r = hat_morrey_norm_spectrum(&s, &p, &tr).unwrap();
        assert!((r.value - 1.0).abs() < 1e-13, "{r:?}");
    }

    #[test]
    fn modulus_invariance() {
        let f = GridFunction::sample(128, 16.0, |x| Complex64::from_polar((-x * x).exp(), 2.0 * x)).unwrap();
        let g = f.translate(8.0 * f.dx());
        let abs_spec = GridSpectrum::new(&f);
        let p = MorreyParams::hat(e(2.0), e(2.5), e(3.0)).unwrap();
        let tr = LatticeTruncation::for_spectrum(&abs_spec);
        let a = hat_morrey_norm(&f, &p, &tr).unwrap();
        let modulus = FnSpectrum { f: |xi: f64| Complex64::new(abs_spec.eval(xi).norm(), 0.0), support: abs_spec.support(), feature: abs_spec.feature_scale() };
        let b = hat_morrey_norm_spectrum(&modulus, &p, &tr).unwrap();
        assert_eq!(a.value, b.value);
        let c = hat_morrey_norm(&g, &p, &tr).unwrap();
        assert!((a.value - c.value).abs() < 1e-10 * a.value);
    }

    #[test]
    fn step_function_fine_tail_is_exact() {
        let f = GridFunction::sample_real(64, 8.0, |x| (-x * x).exp()).unwrap();
        let p = MorreyParams::direct(e(3.0), e(2.0), e(4.0)).unwrap();
        let base = LatticeTruncation::for_grid(&f);
        let a = morrey_norm(&f, &p, &base).unwrap();
        let b = morrey_norm(&f, &p, &base.widen(3)).unwrap();
        assert!((a.value - b.value).abs() < 1e-12 * a.value, "{} vs {}", a.value, b.value);
        assert!(a.tail_estimate > 0.0);
    }

    #[test]
    fn hat_truncation_convergence() {
        let s = PacketSum { packets: vec![Packet::gaussian(1.0, 0.5, 1.0), Packet { amp: Complex64::new(0.0, 0.5), freq: 3.0, center: -1.0, width: 2.0 }] };
        let p = MorreyParams::hat(e(2.0), e(2.5), e(3.0)).unwrap();
        let base = LatticeTruncation::for_spectrum(&s);
        let a = hat_morrey_norm_spectrum(&s, &p, &base).unwrap();
        let b = hat_morrey_norm_spectrum(&s, &p, &base.widen(2)).unwrap();
        assert!((a.value - b.value).abs() < 1e-6 * a.value, "{} vs {}", a.value, b.value);
    }

    #[test]
    fn equal_exponents_give_half_line_norms() {
        let f = GridFunction::sample_real(128, 16.0, |x| (-(x - 1.0) * (x - 1.0)).exp() + 0.5 * (-(x + 2.0) * (x + 2.0)).exp()).unwrap();
        let p = MorreyParams::direct(e(3.0), e(3.0), INF).unwrap();
        let r = morrey_norm(&f, &p, &LatticeTruncation::for_grid(&f)).unwrap();
        let half = |pos: bool| {
            let g = GridFunction::sample_real(128, 16.0, |x| if (x >= 0.0) == pos { f.samples()[((x + 8.0) / f.dx()).round() as usize].re } else { 0.0 }).unwrap();
            lebesgue_norm(&g, e(3.0))
        };
        assert!((r.value - half(true).max(half(false))).abs() < 1e-13);
    }

    #[test]
    fn parameter_validation() {
        assert!(MorreyParams::direct(e(2.0), e(3.0), e(4.0)).is_err());
        assert!(MorreyParams::direct(e(3.0), e(3.0), e(4.0)).is_err());
        assert!(MorreyParams::direct(e(3.0), e(3.0), INF).is_ok());
        assert!(MorreyParams::direct(e(3.0), e(2.0), e(2.0)).is_err());
        assert!(MorreyParams::hat(e(3.0), e(2.0), e(4.0)).is_err());
        assert!(MorreyParams::hat(e(2.0), e(3.0), e(2.0)).is_err());
        assert!(LatticeTruncation::new(3, 1).is_err());
    }

    #[test]
    fn embedding_zero_ratio_is_one() {
        let f = GridFunction::zeros(64, 8.0).unwrap();
        let emb = Embedding::I { beta: e(4.0), gamma1: e(3.0), gamma2: e(2.0), delta1: e(5.0), delta2: e(6.0) };
        let r = embedding_gap(&f, &emb, None).unwrap();
        assert_eq!((r.lhs, r.rhs, r.ratio), (0.0, 0.0, 1.0));
        let bad = Embedding::I { beta: e(4.0), gamma1: e(2.0), gamma2: e(3.0), delta1: e(5.0), delta2: e(6.0) };
        assert!(embedding_gap(&f, &bad, None).is_err());
    }
}
