//! Dyadic lattice, the Whitney relation and the bilinear regions `A_{j,k,ℓ}`, `B_{j,k,ℓ}`.
//!
//! Writing `v = τ - ξ³/4`, family A lives on `ξ ∈ [(k+ℓ)/2^j, (k+ℓ+2)/2^j]` with
//! `v/ξ` between `(3/4)(k-ℓ∓1)²/4^j`; family B lives on
//! `ξ ∈ [(k-ℓ-1)/2^j, (k-ℓ+1)/2^j]` with `v/ξ` between `(3/4)(k+ℓ)²/4^j` and
//! `(3/4)(k+ℓ+2)²/4^j`. Enlargements widen the `v`-band by `±λ`.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Admissible separations `m = ℓ - k`.
pub const SEPARATIONS: [i64; 4] = [-3, -2, 2, 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicInterval {
    pub j: i32,
    pub k: i64,
}

impl DyadicInterval {
    pub fn len(&self) -> f64 {
        (-self.j as f64).exp2()
    }

    pub fn containing(x: f64, j: i32) -> Self {
        Self { j, k: (x * (j as f64).exp2()).floor() as i64 }
    }

    pub fn parent(&self) -> Self {
        Self { j: self.j - 1, k: self.k.div_euclid(2) }
    }
}

/// `[k 2^{-j}, (k+1) 2^{-j})`.
pub fn interval_bounds(iv: DyadicInterval) -> (f64, f64) {
    let h = iv.len();
    (iv.k as f64 * h, (iv.k + 1) as f64 * h)
}

pub fn whitney_related(k: i64, l: i64) -> bool {
    let d = l - k;
    if k.rem_euclid(2) == 0 {
        matches!(d, -2 | 2 | 3)
    } else {
        matches!(d, -3 | -2 | 2)
    }
}

/// Scales at which a pair at distance `d` can be related: `|ℓ-k| ∈ [2,3]`
/// forces `1 < d 2^j < 4`.
fn whitney_scale_range(d: f64) -> (i32, i32) {
    let lo = (1.0 / d).log2().floor() as i32 - 1;
    let hi = (4.0 / d).log2().ceil() as i32 + 1;
    (lo, hi)
}

/// All related triples `(j, k, ℓ)` with `ξ ∈ τ^j_k`, `η ∈ τ^j_ℓ` over the exhaustive scale range.
pub fn whitney_matches(xi: f64, eta: f64) -> Vec<(i32, i64, i64)> {
    let (lo, hi) = whitney_scale_range((xi - eta).abs());
    (lo..=hi)
        .filter_map(|j| {
            let k = DyadicInterval::containing(xi, j).k;
            let l = DyadicInterval::containing(eta, j).k;
            whitney_related(k, l).then_some((j, k, l))
        })
        .collect()
}

/// Locates the Whitney square containing `(ξ, η)`, scanning from coarse to fine.
pub fn locate_whitney(xi: f64, eta: f64) -> Result<(i32, i64, i64)> {
    if !(xi > 0.0 && eta > 0.0 && xi.is_finite() && eta.is_finite()) {
        return Err(LabError::OffDomain(format!("({xi}, {eta}) is not in the open quadrant")));
    }
    if xi == eta {
        return Err(LabError::OffDomain(format!("diagonal point ({xi}, {eta})")));
    }
    whitney_matches(xi, eta)
        .into_iter()
        .next()
        .ok_or_else(|| LabError::OffDomain(format!("no related pair for ({xi}, {eta})")))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub tau: f64,
    pub xi: f64,
}

impl FrequencyPoint {
    pub fn new(tau: f64, xi: f64) -> Self {
        Self { tau, xi }
    }

    /// Point at height `v = τ - ξ³/4` above the cubic.
    pub fn from_offset(xi: f64, v: f64) -> Self {
        Self { tau: v + xi * xi * xi / 4.0, xi }
    }

    pub fn offset(&self) -> f64 {
        self.tau - self.xi * self.xi * self.xi / 4.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BilinearRegion {
    pub family: Family,
    pub j: i32,
    pub k: i64,
    pub l: i64,
}

impl BilinearRegion {
    pub fn new(family: Family, j: i32, k: i64, l: i64) -> Result<Self> {
        if k < 0 || l < 0 || !SEPARATIONS.contains(&(l - k)) {
            return Err(LabError::Parameter(format!("({j}, {k}, {l}) is not in the index set")));
        }
        Ok(Self { family, j, k, l })
    }

    pub fn m(&self) -> i64 {
        self.l - self.k
    }

    fn scale(&self) -> f64 {
        (self.j as f64).exp2()
    }

    pub fn xi_window(&self) -> (f64, f64) {
        let s = self.scale();
        match self.family {
            Family::A => ((self.k + self.l) as f64 / s, (self.k + self.l + 2) as f64 / s),
            Family::B => ((self.k - self.l - 1) as f64 / s, (self.k - self.l + 1) as f64 / s),
        }
    }

    /// Closed band `[lo, hi]` for `v = τ - ξ³/4` at frequency `ξ`, before enlargement.
    pub fn band(&self, xi: f64) -> (f64, f64) {
        let c = 0.75 * xi / (2.0 * self.j as f64).exp2();
        let (k, l) = (self.k as f64, self.l as f64);
        let (a, b) = match self.family {
            Family::A => ((k - l - 1.0).powi(2), (k - l + 1.0).powi(2)),
            Family::B => ((k + l).powi(2), (k + l + 2.0).powi(2)),
        };
        let (lo, hi) = match (self.family, self.m() < 0) {
            (Family::A, true) => (a, b),
            (Family::A, false) => (b, a),
            (Family::B, true) => (a, b),
            (Family::B, false) => (b, a),
        };
        (lo * c, hi * c)
    }

    /// Canonical enlargement `λ = k / (100 · 2^{3j})`.
    pub fn canonical_lambda(&self) -> f64 {
        self.k as f64 / (100.0 * (3.0 * self.j as f64).exp2())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnlargedRegion {
    pub base: BilinearRegion,
    pub lambda: f64,
}

impl EnlargedRegion {
    pub fn canonical(base: BilinearRegion) -> Self {
        Self { base, lambda: base.canonical_lambda() }
    }

    pub fn unenlarged(base: BilinearRegion) -> Self {
        Self { base, lambda: 0.0 }
    }

    /// `v`-interval at `ξ`, or `None` off the ξ-window.
    pub fn section(&self, xi: f64) -> Option<(f64, f64)> {
        let (a, b) = self.base.xi_window();
        if xi < a || xi > b {
            return None;
        }
        let (lo, hi) = self.base.band(xi);
        Some((lo - self.lambda, hi + self.lambda))
    }
}

pub fn region_contains(r: &EnlargedRegion, p: FrequencyPoint) -> bool {
    let v = p.offset();
    match r.section(p.xi) {
        Some((lo, hi)) => lo <= v && v <= hi,
        None => false,
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlapCount {
    pub total: usize,
    /// Counts for `m = -3, -2, 2, 3` in that order.
    pub per_m: [usize; 4],
}

impl OverlapCount {
    pub fn max_per_m(&self) -> usize {
        self.per_m.iter().copied().max().unwrap_or(0)
    }
}

/// Counts enlarged regions of `family` containing `p`, with canonical margins.
pub fn overlap_count(family: Family, p: FrequencyPoint) -> OverlapCount {
    overlap_count_scaled(family, p, 1.0)
}

/// As [`overlap_count`] with margins `s · k / (100 · 2^{3j})`, `0 ≤ s ≤ 10`.
pub fn overlap_count_scaled(family: Family, p: FrequencyPoint, s: f64) -> OverlapCount {
    assert!((0.0..=10.0).contains(&s), "margin scale {s} outside [0, 10]");
    let mut out = OverlapCount::default();
    for (idx, &m) in SEPARATIONS.iter().enumerate() {
        for (j, k) in candidates(family, m, p, s) {
            let base = BilinearRegion { family, j, k, l: k + m };
            let r = EnlargedRegion { base, lambda: s * base.canonical_lambda() };
            if region_contains(&r, p) {
                out.per_m[idx] += 1;
                out.total += 1;
            }
        }
    }
    out
}

/// Finite superset of the `(j, k)` whose enlarged region can contain `p`.
fn candidates(family: Family, m: i64, p: FrequencyPoint, s: f64) -> Vec<(i32, i64)> {
    let xi = p.xi;
    let v = p.offset();
    let kmin = 0.max(-m);
    let mut out = Vec::new();
    if !(xi.is_finite() && v.is_finite()) || xi == 0.0 {
        return out;
    }
    match family {
        Family::A => {
            // ξ 2^j ≥ 2k+m ≥ 2, so λ ≤ s·0.0125·ξ/4^j and v/ξ·4^j is pinned
            // between (3/4)(|m|∓1)² ∓ 0.0125 s.
            if xi <= 0.0 {
                return out;
            }
            let am = m.abs() as f64;
            let lo_c = 0.75 * (am - 1.0).powi(2) - 0.0125 * s;
            let hi_c = 0.75 * (am + 1.0).powi(2) + 0.0125 * s;
            if v <= 0.0 {
                return out;
            }
            let j_lo = (0.5 * (lo_c * xi / v).log2()).floor() as i32 - 1;
            let j_hi = (0.5 * (hi_c * xi / v).log2()).ceil() as i32 + 1;
            let j_lo = j_lo.max((2.0 / xi).log2().floor() as i32 - 1);
            for j in j_lo..=j_hi {
                let t = xi * (j as f64).exp2();
                let k_lo = ((t - m as f64 - 2.0) / 2.0).ceil() as i64;
                let k_hi = ((t - m as f64) / 2.0).floor() as i64;
                for k in k_lo.max(kmin)..=k_hi {
                    out.push((j, k));
                }
            }
        }
        Family::B => {
            // sign(ξ) = -sign(m) and (|m|-1) ≤ |ξ| 2^j ≤ |m|+1 pin j.
            if (m < 0) != (xi > 0.0) {
                return out;
            }
            let am = m.abs() as f64;
            let ax = xi.abs();
            let j_lo = ((am - 1.0) / ax).log2().floor() as i32;
            let j_hi = ((am + 1.0) / ax).log2().ceil() as i32;
            for j in j_lo..=j_hi {
                let w = v * (2.0 * j as f64).exp2() / xi;
                let kc = ((4.0 * w.max(0.0) / 3.0).sqrt() - m as f64) / 2.0;
                let k_lo = (kc.floor() as i64 - 3).max(kmin);
                let k_hi = kc.ceil() as i64 + 2;
                for k in k_lo..=k_hi {
                    out.push((j, k));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_examples() {
        assert_eq!(interval_bounds(DyadicInterval { j: 0, k: 0 }), (0.0, 1.0));
        assert_eq!(interval_bounds(DyadicInterval { j: 1, k: 3 }), (1.5, 2.0));
        assert_eq!(interval_bounds(DyadicInterval { j: -1, k: 1 }), (2.0, 4.0));
    }

    #[test]
    fn relation_examples() {
        assert!(whitney_related(0, 2));
        assert!(!whitney_related(4, 5));
        assert!(whitney_related(1, 3));
        assert!(!whitney_related(4, 1));
        assert!(whitney_related(5, 2));
        assert!(!whitney_related(1, 4));
    }

    /// Brute force over a wide scale range, independent of the scale bound.
    fn brute_whitney(xi: f64, eta: f64) -> Vec<(i32, i64, i64)> {
        (-30..=60)
            .filter_map(|j| {
                let k = (xi * (j as f64).exp2()).floor() as i64;
                let l = (eta * (j as f64).exp2()).floor() as i64;
                whitney_related(k, l).then_some((j, k, l))
            })
            .collect()
    }

    #[test]
    fn locate_examples() {
        assert!(locate_whitney(0.5, 0.5).is_err());
        assert!(locate_whitney(-0.5, 0.5).is_err());
        let t = locate_whitney(0.1, 0.9).unwrap();
        assert_eq!(brute_whitney(0.1, 0.9), vec![t]);
        let a = 2f64.powi(-20);
        let t = locate_whitney(1.5 * a, 5.5 * a).unwrap();
        assert_eq!(brute_whitney(1.5 * a, 5.5 * a), vec![t]);
        assert!(t.0 >= 19);
        assert!(whitney_related(t.1, t.2));
    }

    #[test]
    fn region_examples() {
        let r = EnlargedRegion::unenlarged(BilinearRegion::new(Family::A, 0, 2, 4).unwrap());
        assert!(region_contains(&r, FrequencyPoint::new(100.0, 7.0)));
        assert!(!region_contains(&r, FrequencyPoint::new(90.0, 7.0)));
        assert!(!region_contains(&r, FrequencyPoint::new(100.0, 8.5)));
        let (lo, hi) = r.base.band(7.0);
        assert!((lo + 343.0 / 4.0 - 91.0).abs() < 1e-12 && (hi + 343.0 / 4.0 - 133.0).abs() < 1e-12);
        assert!(BilinearRegion::new(Family::A, 0, 2, 3).is_err());
        assert!(BilinearRegion::new(Family::B, 0, 1, -1).is_err());
    }

    /// Exhaustive count: every scale in a wide range, every k up to a cap.
    fn brute_count(family: Family, p: FrequencyPoint) -> usize {
        let mut n = 0;
        for &m in &SEPARATIONS {
            for j in -25..=40 {
                for k in 0.max(-m)..400 {
                    let base = BilinearRegion { family, j, k, l: k + m };
                    if region_contains(&EnlargedRegion::canonical(base), p) {
                        n += 1;
                    }
                }
            }
        }
        n
    }

    #[test]
    fn overlap_examples() {
        assert_eq!(overlap_count(Family::A, FrequencyPoint::new(0.0, 1.0)).total, 0);
        assert_eq!(brute_count(Family::A, FrequencyPoint::new(0.0, 1.0)), 0);
        assert_eq!(overlap_count(Family::A, FrequencyPoint::from_offset(-2.0, 3.0)).total, 0);
    }

    #[test]
    fn overlap_matches_exhaustive_enumeration() {
        let pts = [
            (7.0, 10.0, Family::A),
            (7.0, 40.0, Family::A),
            (0.3, 0.05, Family::A),
            (2.5, 1.0, Family::B),
            (1.5, 30.0, Family::B),
            (-1.5, -30.0, Family::B),
            (-0.7, -3.0, Family::B),
            (12.0, 2.0, Family::A),
        ];
        for (xi, v, fam) in pts {
            let p = FrequencyPoint::from_offset(xi, v);
            assert_eq!(overlap_count(fam, p).total, brute_count(fam, p), "{xi} {v} {fam:?}");
        }
    }

    #[test]
    fn canonical_lambda_vanishes_at_k_zero() {
        let r = BilinearRegion::new(Family::A, 3, 0, 2).unwrap();
        assert_eq!(r.canonical_lambda(), 0.0);
        let r = BilinearRegion::new(Family::A, 1, 4, 6).unwrap();
        assert_eq!(r.canonical_lambda(), 4.0 / 800.0);
    }
}
