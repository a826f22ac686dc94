use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use super::exponent::Exponent;
use super::grid::{check_grid, weighted_norm, GridFunction};
use crate::error::{LabError, Result};

/// Row-major samples `values[i * n_x + l] = F(t_i, x_l)`.
///
/// A nonzero carrier means the physical field is
/// `values · exp(i(τ_c t + ξ_c x))`; norms are unaffected by carriers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceTimeField {
    values: Vec<Complex64>,
    t_grid: Vec<f64>,
    n_x: usize,
    box_length: f64,
    pub tau_carrier: f64,
    pub xi_carrier: f64,
}

impl SpaceTimeField {
    pub fn new(values: Vec<Complex64>, t_grid: Vec<f64>, n_x: usize, box_length: f64) -> Result<Self> {
        check_grid(n_x, box_length)?;
        if t_grid.is_empty() || values.len() != t_grid.len() * n_x {
            return Err(LabError::Config(format!(
                "field shape {} does not match {} x {}",
                values.len(),
                t_grid.len(),
                n_x
            )));
        }
        check_uniform(&t_grid)?;
        Ok(Self { values, t_grid, n_x, box_length, tau_carrier: 0.0, xi_carrier: 0.0 })
    }

    pub fn from_rows(rows: Vec<GridFunction>, t_grid: Vec<f64>) -> Result<Self> {
        let first = rows.first().ok_or_else(|| LabError::Config("no rows".into()))?;
        let (n_x, l) = (first.len(), first.box_length());
        let mut values = Vec::with_capacity(rows.len() * n_x);
        for r in &rows {
            if r.len() != n_x || r.box_length() != l {
                return Err(LabError::Config("rows on different grids".into()));
            }
            values.extend_from_slice(r.samples());
        }
        Self::new(values, t_grid, n_x, l)
    }

    pub fn with_carriers(mut self, tau_carrier: f64, xi_carrier: f64) -> Self {
        self.tau_carrier = tau_carrier;
        self.xi_carrier = xi_carrier;
        self
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn t_grid(&self) -> &[f64] {
        &self.t_grid
    }

    pub fn n_t(&self) -> usize {
        self.t_grid.len()
    }

    pub fn n_x(&self) -> usize {
        self.n_x
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn dx(&self) -> f64 {
        self.box_length / self.n_x as f64
    }

    /// Time step; a single-row field uses unit weight.
    pub fn dt(&self) -> f64 {
        if self.t_grid.len() < 2 {
            1.0
        } else {
            self.t_grid[1] - self.t_grid[0]
        }
    }

    pub fn x(&self, l: usize) -> f64 {
        -self.box_length / 2.0 + l as f64 * self.dx()
    }

    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.values[i * self.n_x..(i + 1) * self.n_x]
    }

    pub fn row_function(&self, i: usize) -> Result<GridFunction> {
        let is_real = self.tau_carrier == 0.0
            && self.xi_carrier == 0.0
            && self.row(i).iter().all(|z| z.im == 0.0);
        GridFunction::new(self.row(i).to_vec(), self.box_length, is_real)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|z| *z *= c);
        out
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t (dimensionless)", "x (dimensionless)", "re (dimensionless)", "im (dimensionless)"])?;
        for (i, &t) in self.t_grid.iter().enumerate() {
            for (l, z) in self.row(i).iter().enumerate() {
                w.write_record(&[
                    format!("{t:.17e}"),
                    format!("{:.17e}", self.x(l)),
                    format!("{:.17e}", z.re),
                    format!("{:.17e}", z.im),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn check_uniform(t: &[f64]) -> Result<()> {
    if t.len() < 2 {
        return Ok(());
    }
    let dt = t[1] - t[0];
    if dt <= 0.0 {
        return Err(LabError::Config("t_grid must be strictly increasing".into()));
    }
    for w in t.windows(2) {
        if ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1e-300) * t.len() as f64 {
            return Err(LabError::Config("t_grid must be uniform".into()));
        }
    }
    Ok(())
}

/// Uniform grid of `n` points on `[a, b]` inclusive.
pub fn uniform_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![a];
    }
    let h = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + i as f64 * h).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormOrder {
    /// `L^p_x L^q_t`
    SpaceOuter,
    /// `L^p_t L^q_x`
    TimeOuter,
    /// `L^p_{t,x}`
    Diagonal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedNormSpec {
    pub outer: Exponent,
    pub inner: Exponent,
    pub order: NormOrder,
}

impl MixedNormSpec {
    pub fn new(outer: Exponent, inner: Exponent, order: NormOrder) -> Result<Self> {
        if order == NormOrder::Diagonal && outer != inner {
            return Err(LabError::Parameter("diagonal norm requires p = q".into()));
        }
        Ok(Self { outer, inner, order })
    }

    pub fn space_outer(p: Exponent, q: Exponent) -> Self {
        Self { outer: p, inner: q, order: NormOrder::SpaceOuter }
    }

    pub fn time_outer(p: Exponent, q: Exponent) -> Self {
        Self { outer: p, inner: q, order: NormOrder::TimeOuter }
    }

    pub fn diagonal(p: Exponent) -> Self {
        Self { outer: p, inner: p, order: NormOrder::Diagonal }
    }
}

pub fn mixed_spacetime_norm(f: &SpaceTimeField, spec: &MixedNormSpec) -> f64 {
    let (nt, nx) = (f.n_t(), f.n_x());
    let (dt, dx) = (f.dt(), f.dx());
    match spec.order {
        NormOrder::Diagonal => weighted_norm(f.values.iter().map(|z| z.norm()), dt * dx, spec.outer),
        NormOrder::SpaceOuter => {
            // blocked transpose of |F| so each time column is contiguous
            const B: usize = 64;
            let mut cols = vec![0.0f64; nt * nx];
            cols.par_chunks_mut(B * nt).enumerate().for_each(|(b, chunk)| {
                let l0 = b * B;
                let width = chunk.len() / nt;
                for i0 in (0..nt).step_by(B) {
                    for i in i0..(i0 + B).min(nt) {
                        let row = &f.values[i * nx + l0..i * nx + l0 + width];
                        for (dl, z) in row.iter().enumerate() {
                            chunk[dl * nt + i] = z.norm();
                        }
                    }
                }
            });
            let inner: Vec<f64> = cols.par_chunks(nt).map(|c| weighted_norm(c.iter().copied(), dt, spec.inner)).collect();
            weighted_norm(inner.iter().copied(), dx, spec.outer)
        }
        NormOrder::TimeOuter => {
            let inner: Vec<f64> = (0..nt)
                .into_par_iter()
                .map(|i| weighted_norm(f.row(i).iter().map(|z| z.norm()), dx, spec.inner))
                .collect();
            weighted_norm(inner.iter().copied(), dt, spec.outer)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn constant(nt: usize, nx: usize, t_len: f64, l: f64) -> SpaceTimeField {
        let dt = t_len / nt as f64;
        let t: Vec<f64> = (0..nt).map(|i| i as f64 * dt).collect();
        SpaceTimeField::new(vec![Complex64::new(1.0, 0.0); nt * nx], t, nx, l).unwrap()
    }

    #[test]
    fn unit_square() {
        let f = constant(16, 16, 1.0, 1.0);
        let two = Exponent::Finite(2.0);
        for spec in [MixedNormSpec::space_outer(two, two), MixedNormSpec::time_outer(two, two)] {
            assert_relative_eq!(mixed_spacetime_norm(&f, &spec), 1.0, max_relative = 1e-14);
        }
    }

    #[test]
    fn rectangle_hand_quadrature() {
        let f = constant(32, 64, 2.0, 3.0);
        let spec = MixedNormSpec::space_outer(Exponent::Finite(4.0), Exponent::Finite(2.0));
        assert_relative_eq!(mixed_spacetime_norm(&f, &spec), 3f64.powf(0.25) * 2f64.sqrt(), max_relative = 1e-13);
    }

    #[test]
    fn separable_factorisation() {
        let (nt, nx, l) = (24, 32, 6.0);
        let t = uniform_grid(-1.0, 1.0, nt);
        let dt = t[1] - t[0];
        let a = GridFunction::sample_real(nx, l, |x| (-x * x).exp()).unwrap();
        let b: Vec<f64> = t.iter().map(|&s| 1.0 + s * s).collect();
        let mut vals = Vec::new();
        for &bt in &b {
            vals.extend(a.samples().iter().map(|z| z * bt));
        }
        let f = SpaceTimeField::new(vals, t, nx, l).unwrap();
        let (p, q) = (Exponent::Finite(3.0), Exponent::Finite(1.5));
        let expected = super::super::grid::lebesgue_norm(&a, p) * weighted_norm(b.iter().copied(), dt, q);
        assert_relative_eq!(mixed_spacetime_norm(&f, &MixedNormSpec::space_outer(p, q)), expected, max_relative = 1e-12);
    }

    #[test]
    fn diagonal_requires_equal_exponents() {
        assert!(MixedNormSpec::new(Exponent::Finite(2.0), Exponent::Finite(3.0), NormOrder::Diagonal).is_err());
    }

    #[test]
    fn rejects_nonuniform_time() {
        let v = vec![Complex64::new(0.0, 0.0); 24];
        assert!(SpaceTimeField::new(v, vec![0.0, 1.0, 3.0], 8, 1.0).is_err());
    }
}
