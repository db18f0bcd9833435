//! Discrete polyatomic ellipsoidal Gaussian built from a cell's moments.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::moments::{MacroCell, Mat3};

/// Cholesky factor `T = L L^T` of a symmetric positive definite 3x3 tensor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdFactor {
    /// Lower-triangular factor with positive diagonal.
    pub l: Mat3,
    /// `log det T`.
    pub log_det: f64,
}

/// Cholesky factorization of a symmetric 3x3 tensor. Only the lower
/// triangle is read.
pub fn factor_spd(m: &Mat3) -> Result<SpdFactor> {
    let mut l = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..=a {
            let mut s = m[a][b];
            for c in 0..b {
                s -= l[a][c] * l[b][c];
            }
            if a == b {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::NonSpdTensor { cell: 0, pivot: a });
                }
                l[a][a] = s.sqrt();
            } else {
                l[a][b] = s / l[b][b];
            }
        }
    }
    let log_det = 2.0 * (l[0][0].ln() + l[1][1].ln() + l[2][2].ln());
    Ok(SpdFactor { l, log_det })
}

impl SpdFactor {
    /// Solves `L y = r`.
    #[inline]
    pub fn forward(&self, r: [f64; 3]) -> [f64; 3] {
        let l = &self.l;
        let y0 = r[0] / l[0][0];
        let y1 = (r[1] - l[1][0] * y0) / l[1][1];
        let y2 = (r[2] - l[2][0] * y0 - l[2][1] * y1) / l[2][2];
        [y0, y1, y2]
    }

    /// Solves `L^T x = y`.
    #[inline]
    pub fn backward(&self, y: [f64; 3]) -> [f64; 3] {
        let l = &self.l;
        let x2 = y[2] / l[2][2];
        let x1 = (y[1] - l[2][1] * x2) / l[1][1];
        let x0 = (y[0] - l[1][0] * x1 - l[2][0] * x2) / l[0][0];
        [x0, x1, x2]
    }

    /// `r^T T^{-1} r`, as `|L^{-1} r|^2`.
    #[inline]
    pub fn inverse_quadratic_form(&self, r: [f64; 3]) -> f64 {
        let y = self.forward(r);
        y[0] * y[0] + y[1] * y[1] + y[2] * y[2]
    }

    /// `T^{-1} r`.
    pub fn solve(&self, r: [f64; 3]) -> [f64; 3] {
        self.backward(self.forward(r))
    }

    pub fn reconstruct(&self) -> Mat3 {
        let mut m = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                m[a][b] = (0..3).map(|c| self.l[a][c] * self.l[b][c]).sum();
            }
        }
        m
    }
}

/// The Gaussian of one cell, ready to be evaluated on the grid.
///
/// ```text
/// M(v, I) = rho Lambda / (sqrt(det(2 pi T)) T_theta^(delta/2))
///           * exp(-(v-u)^T T^{-1} (v-u) / 2 - I^(2/delta) / T_theta)
/// ```
#[derive(Debug, Clone, Copy)]
pub struct CellGaussian {
    pub prefactor: f64,
    pub u: [f64; 3],
    pub factor: SpdFactor,
    pub t_theta: f64,
}

impl CellGaussian {
    pub fn new(cell: &MacroCell, delta: f64, lambda_delta: f64) -> Result<Self> {
        if !(cell.t_theta > 0.0) || !cell.t_theta.is_finite() {
            return Err(Error::DegenerateTemperature {
                cell: 0,
                t_theta: cell.t_theta,
            });
        }
        let factor = factor_spd(&cell.t_blend)?;
        let norm = (2.0 * PI).powf(1.5) * (0.5 * factor.log_det).exp();
        let prefactor = cell.rho * lambda_delta / (norm * cell.t_theta.powf(0.5 * delta));
        Ok(CellGaussian {
            prefactor,
            u: cell.u,
            factor,
            t_theta: cell.t_theta,
        })
    }

    /// Value at a single node, as one fused exponential.
    #[inline]
    pub fn value(&self, v: [f64; 3], internal_energy: f64) -> f64 {
        let r = [v[0] - self.u[0], v[1] - self.u[1], v[2] - self.u[2]];
        let exponent =
            -0.5 * self.factor.inverse_quadratic_form(r) - internal_energy / self.t_theta;
        self.prefactor * exponent.exp()
    }

    /// `prefactor * exp(-(v_j-u)^T T^{-1} (v_j-u) / 2)` for every velocity node.
    pub fn velocity_factors(&self, grid: &PhaseGrid, out: &mut Vec<f64>) {
        out.clear();
        out.extend((0..grid.n_vel()).map(|j| {
            let v = grid.velocity(j);
            let r = [v[0] - self.u[0], v[1] - self.u[1], v[2] - self.u[2]];
            self.prefactor * (-0.5 * self.factor.inverse_quadratic_form(r)).exp()
        }));
    }

    /// `exp(-I_k^(2/delta) / T_theta)` for every energy node.
    pub fn energy_factors(&self, energy_weights: &[f64], out: &mut Vec<f64>) {
        out.clear();
        let inv = 1.0 / self.t_theta;
        out.extend(energy_weights.iter().map(|&e| (-e * inv).exp()));
    }

    /// Writes the Gaussian over one cell block (velocity-major, energy
    /// innermost). The exponent splits into a velocity part and an energy
    /// part, so only `n_vel + n_i` exponentials are evaluated.
    pub fn fill(&self, grid: &PhaseGrid, energy_weights: &[f64], out: &mut [f64]) {
        let mut gv = Vec::new();
        let mut gi = Vec::new();
        self.velocity_factors(grid, &mut gv);
        self.energy_factors(energy_weights, &mut gi);
        for (row, &a) in out.chunks_exact_mut(grid.n_i).zip(&gv) {
            for (o, &b) in row.iter_mut().zip(&gi) {
                *o = a * b;
            }
        }
    }
}

/// Evaluates the Gaussian of `cell` on every `(j, k)` node of the grid.
pub fn eval_gaussian(
    cell: &MacroCell,
    grid: &PhaseGrid,
    delta: f64,
    lambda_delta: f64,
) -> Result<Vec<f64>> {
    let g = CellGaussian::new(cell, delta, lambda_delta)?;
    let eps = crate::moments::energy_weights(grid, delta);
    let mut out = vec![0.0; grid.cell_len()];
    g.fill(grid, &eps, &mut out);
    Ok(out)
}
