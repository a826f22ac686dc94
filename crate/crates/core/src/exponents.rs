//! Exact exponent bookkeeping in reciprocal coordinates.
//!
//! Every relation below is affine in `1/p`, so exponents are stored as their
//! reciprocals in `Rational64`, with `0` standing for `∞`.

use num_rational::Rational64;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::error::{LabError, Result};
use crate::spectral::{Exponent, MixedNormSpec, NormOrder};

pub type Q = Rational64;

fn q(n: i64, d: i64) -> Q {
    Q::new(n, d)
}

fn qf(x: Q) -> f64 {
    *x.numer() as f64 / *x.denom() as f64
}

fn show(x: Q) -> String {
    if x.is_integer() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

/// Parses `"3"`, `"-1/30"`, `"0.04"` or `"inf"` (the latter as `None`).
pub fn parse_rational(s: &str) -> Result<Option<Q>> {
    let t = s.trim();
    if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity" | "∞") {
        return Ok(None);
    }
    let bad = || LabError::Config(format!("cannot read '{s}' as a rational"));
    if let Some((a, b)) = t.split_once('/') {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(bad());
        }
        return Ok(Some(q(a, b)));
    }
    if let Some((int, frac)) = t.split_once('.') {
        let neg = int.starts_with('-');
        let int_digits = int.trim_start_matches(['-', '+']);
        if frac.len() > 15 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let i: i64 = if int_digits.is_empty() { 0 } else { int_digits.parse().map_err(|_| bad())? };
        let f: i64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let den = 10i64.pow(frac.len() as u32);
        let v = q(i * den + f, den);
        return Ok(Some(if neg { -v } else { v }));
    }
    t.parse::<i64>().map(|v| Some(Q::from_integer(v))).map_err(|_| bad())
}

/// Exponent in `[1, ∞]` held through its reciprocal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RExp {
    inv: Q,
}

impl RExp {
    pub const INFINITY: RExp = RExp { inv: Q::new_raw(0, 1) };

    pub fn from_reciprocal(inv: Q) -> Self {
        Self { inv }
    }

    pub fn finite(p: Q) -> Self {
        Self { inv: p.recip() }
    }

    pub fn integer(p: i64) -> Self {
        Self::finite(Q::from_integer(p))
    }

    /// Accepts `"6"`, `"15/8"`, `"inf"`.
    pub fn parse(s: &str) -> Result<Self> {
        match parse_rational(s)? {
            None => Ok(Self::INFINITY),
            Some(p) if p.is_positive() => Ok(Self::finite(p)),
            Some(_) => Err(LabError::Config(format!("exponent '{s}' must be positive"))),
        }
    }

    pub fn inv(&self) -> Q {
        self.inv
    }

    pub fn is_infinite(&self) -> bool {
        self.inv.is_zero()
    }

    pub fn conjugate(&self) -> RExp {
        RExp { inv: Q::one() - self.inv }
    }

    /// Float exponent for the norm layer; fails outside `[1, ∞]`.
    pub fn to_exponent(&self) -> Result<Exponent> {
        Exponent::from_reciprocal(qf(self.inv))
    }

    pub fn value(&self) -> f64 {
        if self.is_infinite() {
            f64::INFINITY
        } else {
            qf(self.inv.recip())
        }
    }
}

impl fmt::Display for RExp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}", show(self.inv.recip()))
        }
    }
}

impl Serialize for RExp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for RExp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        RExp::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Exact value with a float shadow for reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Exact {
    pub exact: String,
    pub value: f64,
}

impl From<Q> for Exact {
    fn from(x: Q) -> Self {
        Exact { exact: show(x), value: qf(x) }
    }
}

impl From<RExp> for Exact {
    fn from(x: RExp) -> Self {
        Exact { exact: x.to_string(), value: x.value() }
    }
}

fn violation(out: &mut Vec<String>, ok: bool, msg: impl Into<String>) {
    if !ok {
        out.push(msg.into());
    }
}

fn check_unit(out: &mut Vec<String>, name: &str, e: RExp) {
    violation(out, e.inv >= Q::zero() && e.inv <= Q::one(), format!("{name} = {e} must lie in [1, inf]"));
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassicalPair {
    pub p: RExp,
    pub q: RExp,
    /// `1/α = 2/p + 1/q`
    pub alpha: RExp,
    /// `s = -1/p + 2/q`
    pub s: Q,
}

pub fn classical_exponents(p: RExp, qe: RExp) -> Result<ClassicalPair> {
    let (ip, iq) = (p.inv, qe.inv);
    let mut v = Vec::new();
    check_unit(&mut v, "p", p);
    check_unit(&mut v, "q", qe);
    let endpoint = (ip.is_zero() && iq == q(1, 2)) || (ip == q(1, 4) && iq.is_zero());
    if !endpoint {
        violation(&mut v, ip >= Q::zero() && ip < q(1, 4), format!("1/p = {} must satisfy 0 <= 1/p < 1/4", show(ip)));
        violation(
            &mut v,
            iq >= Q::zero() && iq < q(1, 2) - ip,
            format!("1/q = {} must satisfy 0 <= 1/q < 1/2 - 1/p = {}", show(iq), show(q(1, 2) - ip)),
        );
    }
    if !v.is_empty() {
        return Err(LabError::Inadmissible(v));
    }
    Ok(ClassicalPair {
        p,
        q: qe,
        alpha: RExp::from_reciprocal(ip * 2 + iq),
        s: -ip + iq * 2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaBranch {
    /// Taken when `1/q ≥ 1/p + σ` (space-outer) or `1/q ≥ 1/p - σ` (time-outer).
    Upper,
    Lower,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedExponentsS {
    pub p: RExp,
    pub q: RExp,
    pub sigma: Q,
    pub alpha: RExp,
    pub s: Q,
    pub beta: RExp,
    pub gamma: RExp,
    pub delta: RExp,
    pub branch: GammaBranch,
    /// `1/q = 1/p + σ`, where both branches coincide.
    pub on_boundary: bool,
}

impl RefinedExponentsS {
    /// Whether `(β, γ, δ)` satisfies the hat-Morrey ordering `β ≤ γ`, `β' < δ`.
    pub fn hat_params_valid(&self) -> bool {
        self.gamma.inv <= self.beta.inv && self.delta.inv < Q::one() - self.beta.inv
    }
}

fn check_sigma(v: &mut Vec<String>, sigma: Q) {
    violation(v, sigma > Q::zero() && sigma < q(1, 4), format!("sigma = {} must lie in (0, 1/4)", show(sigma)));
}

pub fn refined_exponents_s(p: RExp, qe: RExp, sigma: Q) -> Result<RefinedExponentsS> {
    let (ip, iq) = (p.inv, qe.inv);
    let mut v = Vec::new();
    check_sigma(&mut v, sigma);
    check_unit(&mut v, "q", qe);
    violation(
        &mut v,
        ip >= Q::zero() && ip <= q(1, 4) - sigma,
        format!("1/p = {} must satisfy 0 <= 1/p <= 1/4 - sigma = {}", show(ip), show(q(1, 4) - sigma)),
    );
    violation(
        &mut v,
        iq <= q(1, 2) - ip - sigma,
        format!("1/q = {} must satisfy 1/q <= 1/2 - 1/p - sigma = {}", show(iq), show(q(1, 2) - ip - sigma)),
    );
    if !v.is_empty() {
        return Err(LabError::Inadmissible(v));
    }
    let ia = ip * 2 + iq;
    let ib = ia + sigma;
    let upper = ib - ip;
    let lower = ib - iq + sigma;
    let branch = if iq >= ip + sigma { GammaBranch::Upper } else { GammaBranch::Lower };
    let on_boundary = iq == ip + sigma;
    if on_boundary {
        assert_eq!(upper, lower, "gamma branches disagree on their common boundary");
    }
    let ig = if branch == GammaBranch::Upper { upper } else { lower };
    Ok(RefinedExponentsS {
        p,
        q: qe,
        sigma,
        alpha: RExp::from_reciprocal(ia),
        s: -ip + iq * 2,
        beta: RExp::from_reciprocal(ib),
        gamma: RExp::from_reciprocal(ig),
        delta: RExp::from_reciprocal(q(1, 2) - ip.min(iq)),
        branch,
        on_boundary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefinedExponentsT {
    pub p: RExp,
    pub q: RExp,
    pub sigma: Q,
    pub alpha: RExp,
    /// Derivative weight `1/p` carried by the left side.
    pub derivative: Q,
    pub gamma: RExp,
    pub delta: RExp,
    pub branch: GammaBranch,
    pub on_boundary: bool,
}

impl RefinedExponentsT {
    /// Whether `(α, γ, δ)` satisfies the hat-Morrey ordering `α ≤ γ`, `α' < δ`.
    pub fn hat_params_valid(&self) -> bool {
        self.gamma.inv <= self.alpha.inv && self.delta.inv < Q::one() - self.alpha.inv
    }
}

pub fn refined_exponents_t(p: RExp, qe: RExp, sigma: Q) -> Result<RefinedExponentsT> {
    let (ip, iq) = (p.inv, qe.inv);
    let mut v = Vec::new();
    check_sigma(&mut v, sigma);
    check_unit(&mut v, "q", qe);
    violation(&mut v, ip >= Q::zero() && ip <= q(1, 4), format!("1/p = {} must satisfy 0 <= 1/p <= 1/4", show(ip)));
    violation(
        &mut v,
        iq <= q(1, 2) - ip - sigma,
        format!("1/q = {} must satisfy 1/q <= 1/2 - 1/p - sigma = {}", show(iq), show(q(1, 2) - ip - sigma)),
    );
    if !v.is_empty() {
        return Err(LabError::Inadmissible(v));
    }
    let ia = ip * 2 + iq;
    let upper = ia - ip + sigma;
    let lower = ia - iq;
    let branch = if iq >= ip - sigma { GammaBranch::Upper } else { GammaBranch::Lower };
    let on_boundary = iq == ip - sigma;
    if on_boundary {
        assert_eq!(upper, lower, "gamma branches disagree on their common boundary");
    }
    let ig = if branch == GammaBranch::Upper { upper } else { lower };
    Ok(RefinedExponentsT {
        p,
        q: qe,
        sigma,
        alpha: RExp::from_reciprocal(ia),
        derivative: ip,
        gamma: RExp::from_reciprocal(ig),
        delta: RExp::from_reciprocal(q(1, 2) - ip.min(iq)),
        branch,
        on_boundary,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Assumption {
    /// Local well-posedness window.
    One,
    /// `γ = 2` with endpoints removed.
    Two,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LwpParams {
    pub alpha: Q,
    pub sigma: Q,
    pub beta: RExp,
    pub gamma: RExp,
    pub delta: RExp,
    pub assumption: Assumption,
    /// Findings that do not reject the tuple, e.g. the α-window mismatch between the assumptions.
    pub notes: Vec<String>,
}

impl LwpParams {
    pub fn alpha_f64(&self) -> f64 {
        qf(self.alpha)
    }

    pub fn sigma_f64(&self) -> f64 {
        qf(self.sigma)
    }

    /// Mass-subcritical range `α < 2` of the equation.
    pub fn mass_subcritical(&self) -> bool {
        self.alpha < Q::from_integer(2)
    }
}

/// Validates `(α, σ, 1/γ, 1/δ)` against the chosen assumption, listing every violated constraint.
pub fn lwp_params(alpha: Q, sigma: Q, gamma_inv: Q, delta_inv: Q, assumption: Assumption) -> Result<LwpParams> {
    if !alpha.is_positive() {
        return Err(LabError::Inadmissible(vec![format!("alpha = {} must be positive", show(alpha))]));
    }
    let ia = alpha.recip();
    let ib = ia + sigma;
    let sig_hi = (q(3, 5) - ia).min(q(1, 4) - q(2, 5) * ia);
    let g_lo = q(4, 5) * ia + sigma * 2;
    let d_lo = q(1, 2) - q(1, 5) * ia;
    let d_hi = Q::one() - ib;
    let mut v = Vec::new();
    let mut notes = Vec::new();
    match assumption {
        Assumption::One => {
            violation(&mut v, alpha > q(5, 3), "α > 5/3");
            violation(&mut v, alpha <= q(20, 9), "α ≤ 20/9");
            violation(&mut v, sigma > Q::zero(), "σ > 0");
            violation(&mut v, sigma <= sig_hi, format!("σ ≤ min(3/5−1/α, 1/4−2/(5α)) = {}", qf(sig_hi)));
            violation(
                &mut v,
                g_lo <= gamma_inv && gamma_inv < ib,
                format!("4/(5α)+2σ = {} ≤ 1/γ < 1/β = {}", qf(g_lo), qf(ib)),
            );
            violation(
                &mut v,
                d_lo <= delta_inv && delta_inv < d_hi,
                format!("1/2−1/(5α) = {} ≤ 1/δ < 1/β′ = {}", qf(d_lo), qf(d_hi)),
            );
        }
        Assumption::Two => {
            violation(&mut v, gamma_inv == q(1, 2), "γ = 2");
            violation(&mut v, alpha > q(5, 3) && alpha < q(12, 5), "5/3 < α < 12/5");
            let s_lo = (q(1, 2) - ia).max(Q::zero());
            violation(
                &mut v,
                s_lo < sigma && sigma < sig_hi,
                format!("max(0, 1/2−1/α) = {} < σ < min(3/5−1/α, 1/4−2/(5α)) = {}", qf(s_lo), qf(sig_hi)),
            );
            violation(&mut v, ib > q(1, 2) && ib < q(3, 5), format!("5/3 < β < 2, got β = {}", qf(ib.recip())));
            violation(
                &mut v,
                d_lo < delta_inv && delta_inv < d_hi,
                format!("1/2−1/(5α) = {} < 1/δ < 1/β′ = {}", qf(d_lo), qf(d_hi)),
            );
            if v.is_empty() && alpha > q(20, 9) {
                notes.push(format!("α = {} lies in (20/9, 12/5): accepted by Assumption 2, outside Assumption 1", show(alpha)));
            }
        }
    }
    if !v.is_empty() {
        return Err(LabError::Inadmissible(v));
    }
    Ok(LwpParams {
        alpha,
        sigma,
        beta: RExp::from_reciprocal(ib),
        gamma: RExp::from_reciprocal(gamma_inv),
        delta: RExp::from_reciprocal(delta_inv),
        assumption,
        notes,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpaceTag {
    L,
    M,
    S,
    DSigma,
    N,
    NSigma,
}

/// Exact description of a space-time norm `‖|∂|^d u‖_{L^p L^q}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpaceNorm {
    pub derivative: Q,
    pub p: RExp,
    pub q: RExp,
    pub order: NormOrder,
}

impl SpaceNorm {
    pub fn mixed_spec(&self) -> Result<MixedNormSpec> {
        MixedNormSpec::new(self.p.to_exponent()?, self.q.to_exponent()?, self.order)
    }

    pub fn derivative_f64(&self) -> f64 {
        qf(self.derivative)
    }
}

pub fn space_norm_spec(tag: SpaceTag, alpha: Q, sigma: Q) -> Result<SpaceNorm> {
    if !alpha.is_positive() {
        return Err(LabError::Parameter("alpha must be positive".into()));
    }
    let ia = alpha.recip();
    let ib = ia + sigma;
    let so = NormOrder::SpaceOuter;
    let norm = |d: Q, ip: Q, iq: Q, order| SpaceNorm {
        derivative: d,
        p: RExp::from_reciprocal(ip),
        q: RExp::from_reciprocal(iq),
        order,
    };
    let out = match tag {
        SpaceTag::L => norm(ia, ia / 5, ia * 3 / 5, so),
        SpaceTag::M => norm(ia / 2, ia * 3 / 10, ia * 2 / 5, so),
        SpaceTag::S => norm(Q::zero(), ia * 2 / 5, ia / 5, so),
        SpaceTag::DSigma => {
            if !sigma.is_positive() {
                return Err(LabError::Parameter("D_sigma needs sigma > 0".into()));
            }
            norm(sigma + ib / 3, ib / 3, ib / 3, NormOrder::Diagonal)
        }
        SpaceTag::N => {
            // (1/p, 1/q)(N) = (1/p, 1/q)(M) + 2α (1/p, 1/q)(S)
            let two_a = alpha * 2;
            norm(ia / 2, ia * 3 / 10 + two_a * ia * 2 / 5, ia * 2 / 5 + two_a * ia / 5, so)
        }
        SpaceTag::NSigma => {
            if !(ib <= q(3, 5) && ib > q(9, 20)) {
                return Err(LabError::Parameter(format!(
                    "N_sigma needs 5/3 <= beta < 20/9, got 1/beta = {}",
                    show(ib)
                )));
            }
            // 2/p + 1/q = 1/β + 2 and -1/p + 2/q = 1/(3β)
            norm(ib / 3 + sigma, ib / 3 + q(4, 5), ib / 3 + q(2, 5), so)
        }
    };
    if let SpaceTag::NSigma = tag {
        debug_assert_eq!(out.p.inv * 2 + out.q.inv, ib + 2);
        debug_assert_eq!(-out.p.inv + out.q.inv * 2, ib / 3);
    }
    Ok(out)
}

/// JSON-ready view of any exponent record.
pub mod report {
    use super::*;
    use serde_json::{json, Value};

    pub fn classical(c: &ClassicalPair) -> Value {
        json!({ "theorem": "classical", "p": Exact::from(c.p), "q": Exact::from(c.q),
                "alpha": Exact::from(c.alpha), "s": Exact::from(c.s) })
    }

    pub fn refined_s(r: &RefinedExponentsS) -> Value {
        json!({ "theorem": "S", "p": Exact::from(r.p), "q": Exact::from(r.q), "sigma": Exact::from(r.sigma),
                "alpha": Exact::from(r.alpha), "s": Exact::from(r.s), "beta": Exact::from(r.beta),
                "gamma": Exact::from(r.gamma), "gamma_inv": Exact::from(r.gamma.inv()),
                "delta": Exact::from(r.delta), "branch": r.branch, "on_boundary": r.on_boundary,
                "hat_params_valid": r.hat_params_valid() })
    }

    pub fn refined_t(r: &RefinedExponentsT) -> Value {
        json!({ "theorem": "T", "p": Exact::from(r.p), "q": Exact::from(r.q), "sigma": Exact::from(r.sigma),
                "alpha": Exact::from(r.alpha), "derivative": Exact::from(r.derivative),
                "gamma": Exact::from(r.gamma), "gamma_inv": Exact::from(r.gamma.inv()),
                "delta": Exact::from(r.delta), "branch": r.branch, "on_boundary": r.on_boundary,
                "hat_params_valid": r.hat_params_valid() })
    }

    pub fn lwp(l: &LwpParams) -> Value {
        json!({ "alpha": Exact::from(l.alpha), "sigma": Exact::from(l.sigma), "beta": Exact::from(l.beta),
                "gamma": Exact::from(l.gamma), "delta": Exact::from(l.delta), "assumption": l.assumption,
                "mass_subcritical": l.mass_subcritical(), "notes": l.notes })
    }
}
