//! Discrete macroscopic fields of a distribution: mass, bulk velocity, stress
//! tensor, the translational/internal/polyatomic/relaxation temperatures and
//! the blended temperature tensor used by the scheme's Gaussian.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::DistField;
use crate::grid::PhaseGrid;
use crate::params::{blend_factors, internal_energy, SchemeParams};
use crate::sum::pairwise_map;

pub type Mat3 = [[f64; 3]; 3];

/// Cells with less discrete mass than this are treated as vacuum.
pub const VACUUM_THRESHOLD: f64 = 1e-300;

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

/// `k^T m k`.
#[inline]
pub fn quadratic_form(m: &Mat3, k: [f64; 3]) -> f64 {
    let mut acc = 0.0;
    for a in 0..3 {
        for b in 0..3 {
            acc += k[a] * m[a][b] * k[b];
        }
    }
    acc
}

pub fn trace(m: &Mat3) -> f64 {
    m[0][0] + m[1][1] + m[2][2]
}

fn scaled_identity_plus(diag: f64, scale: f64, m: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            out[a][b] = scale * m[a][b];
        }
        out[a][a] += diag;
    }
    out
}

/// Macroscopic state of one spatial cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MacroCell {
    pub rho: f64,
    pub u: [f64; 3],
    /// Stress tensor `Theta`.
    pub theta_tensor: Mat3,
    pub t_tr: f64,
    /// Internal temperature `T_{I,delta}`.
    pub t_int: f64,
    /// Polyatomic temperature `T_delta`.
    pub t_delta: f64,
    /// Relaxation temperature `T_theta`.
    pub t_theta: f64,
    /// Temperature tensor of the scheme, with the step-dependent blend factors.
    pub t_blend: Mat3,
}

impl MacroCell {
    /// Assembles the derived temperatures and the blended tensor from the
    /// primary moments.
    pub fn from_primary(
        rho: f64,
        u: [f64; 3],
        theta_tensor: Mat3,
        t_int: f64,
        params: &SchemeParams,
        lambda: f64,
        nu_bar: f64,
    ) -> Self {
        let SchemeParams {
            nu, theta, delta, ..
        } = *params;
        let t_tr = trace(&theta_tensor) / 3.0;
        let t_delta = (3.0 * t_tr + delta * t_int) / (3.0 + delta);
        let t_theta = theta * t_delta + (1.0 - theta) * t_int;
        let iso = lambda * theta * t_delta + lambda * (1.0 - theta) * (1.0 - nu) * t_tr;
        let t_blend = scaled_identity_plus(iso, (1.0 - theta) * nu_bar, &theta_tensor);
        MacroCell {
            rho,
            u,
            theta_tensor,
            t_tr,
            t_int,
            t_delta,
            t_theta,
            t_blend,
        }
    }

    /// Temperature tensor of the continuous model (no step-dependent blending).
    pub fn continuous_tensor(&self, params: &SchemeParams) -> Mat3 {
        let SchemeParams { nu, theta, .. } = *params;
        scaled_identity_plus(
            theta * self.t_delta + (1.0 - theta) * (1.0 - nu) * self.t_tr,
            (1.0 - theta) * nu,
            &self.theta_tensor,
        )
    }

    /// Polyatomic energy density `E_delta = (3 + delta)/2 rho T_delta`.
    pub fn energy_density(&self, delta: f64) -> f64 {
        0.5 * (3.0 + delta) * self.rho * self.t_delta
    }
}

/// One [`MacroCell`] per spatial index.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroFields {
    cells: Vec<MacroCell>,
}

impl MacroFields {
    pub fn new(cells: Vec<MacroCell>) -> Self {
        MacroFields { cells }
    }

    pub fn cells(&self) -> &[MacroCell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

impl std::ops::Index<usize> for MacroFields {
    type Output = MacroCell;
    fn index(&self, i: usize) -> &MacroCell {
        &self.cells[i]
    }
}

/// `I_k^(2/delta)` for every energy node.
pub fn energy_weights(grid: &PhaseGrid, delta: f64) -> Vec<f64> {
    grid.energy_nodes()
        .iter()
        .map(|&i| internal_energy(i, delta))
        .collect()
}

/// Per-step moment evaluator; holds the tabulated internal energies and the
/// blend factors for one time step.
#[derive(Debug, Clone)]
pub struct MomentEvaluator {
    params: SchemeParams,
    lambda: f64,
    nu_bar: f64,
    eps: Vec<f64>,
}

impl MomentEvaluator {
    pub fn new(grid: &PhaseGrid, params: &SchemeParams, dt: f64) -> Result<Self> {
        let (lambda, nu_bar) = blend_factors(params.nu, params.theta, params.kappa, dt)?;
        Ok(MomentEvaluator {
            params: *params,
            lambda,
            nu_bar,
            eps: energy_weights(grid, params.delta),
        })
    }

    pub fn energy_weights(&self) -> &[f64] {
        &self.eps
    }

    pub fn blend(&self) -> (f64, f64) {
        (self.lambda, self.nu_bar)
    }

    /// Moments of one spatial cell block. Cell index in errors is 0.
    pub fn cell(&self, grid: &PhaseGrid, cell: &[f64]) -> Result<MacroCell> {
        let n_i = grid.n_i;
        let eps = &self.eps;
        // Energy-direction partial sums per velocity node.
        let mut mass_j = Vec::with_capacity(grid.n_vel());
        let mut eps_j = Vec::with_capacity(grid.n_vel());
        for row in cell.chunks_exact(n_i) {
            let [m, e, lowest] = pairwise_map(n_i, &|k| {
                let f = row[k];
                [f, f * eps[k], f.min(0.0)]
            });
            if lowest < 0.0 || m.is_nan() {
                let value = row.iter().copied().fold(f64::INFINITY, f64::min);
                return Err(Error::NegativeField { cell: 0, value });
            }
            mass_j.push(m);
            eps_j.push(e);
        }

        let [s0, s1, s2, s3, se] = pairwise_map(grid.n_vel(), &|j| {
            let v = grid.velocity(j);
            let m = mass_j[j];
            [m, m * v[0], m * v[1], m * v[2], eps_j[j]]
        });
        let rho = s0 * grid.node_volume();
        if !(rho >= VACUUM_THRESHOLD) {
            return Err(Error::ZeroDensity { cell: 0, mass: rho });
        }
        let u = [s1 / s0, s2 / s0, s3 / s0];
        let t_int = 2.0 / self.params.delta * se / s0;

        // Second pass: centered second moments.
        let c = pairwise_map(grid.n_vel(), &|j| {
            let v = grid.velocity(j);
            let m = mass_j[j];
            let d = [v[0] - u[0], v[1] - u[1], v[2] - u[2]];
            [
                m * d[0] * d[0],
                m * d[0] * d[1],
                m * d[0] * d[2],
                m * d[1] * d[1],
                m * d[1] * d[2],
                m * d[2] * d[2],
            ]
        });
        let theta_tensor = [
            [c[0] / s0, c[1] / s0, c[2] / s0],
            [c[1] / s0, c[3] / s0, c[4] / s0],
            [c[2] / s0, c[4] / s0, c[5] / s0],
        ];
        Ok(MacroCell::from_primary(
            rho,
            u,
            theta_tensor,
            t_int,
            &self.params,
            self.lambda,
            self.nu_bar,
        ))
    }

    pub fn fields(&self, field: &DistField) -> Result<MacroFields> {
        let grid = field.grid();
        let cells = field
            .values()
            .par_chunks(grid.cell_len())
            .enumerate()
            .map(|(i, block)| self.cell(grid, block).map_err(|e| e.at_cell(i)))
            .collect::<Result<Vec<_>>>()?;
        Ok(MacroFields::new(cells))
    }
}

/// Discrete moments of every cell, with the blend factors of step `dt`.
pub fn compute_moments(field: &DistField, params: &SchemeParams, dt: f64) -> Result<MacroFields> {
    MomentEvaluator::new(field.grid(), params, dt)?.fields(field)
}

/// Upper bound factor `C_nu = max(1 - nu, 1 + 2 nu)`.
pub fn c_nu(nu: f64) -> f64 {
    (1.0 - nu).max(1.0 + 2.0 * nu)
}

/// Bounds `(lower, upper)` on `k^T T k / |k|^2` for the blended tensor.
pub fn tensor_bounds(cell: &MacroCell, params: &SchemeParams, dt: f64) -> Result<(f64, f64)> {
    let (lambda, _) = blend_factors(params.nu, params.theta, params.kappa, dt)?;
    let SchemeParams {
        nu, theta, delta, ..
    } = *params;
    Ok((
        lambda * theta * cell.t_delta,
        lambda * c_nu(nu) * (3.0 + delta * (1.0 - theta)) * cell.t_delta / 3.0,
    ))
}

/// Bounds `(lower, upper)` on the relaxation temperature.
pub fn relaxation_temperature_bounds(cell: &MacroCell, params: &SchemeParams) -> (f64, f64) {
    let SchemeParams { theta, delta, .. } = *params;
    (
        theta * cell.t_delta,
        (delta + 3.0 * (1.0 - theta)) / delta * cell.t_delta,
    )
}

/// Relative slack allowed on the tensor bounds to absorb round-off.
pub const SANDWICH_SLACK: f64 = 1e-12;

/// Worst relative margins found by [`tensor_sandwich_check`]. Positive
/// margins mean the bound holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichReport {
    pub trials: usize,
    pub lower: f64,
    pub upper: f64,
    pub worst_lower: f64,
    pub worst_upper: f64,
    pub relaxation_lower_margin: f64,
    pub relaxation_upper_margin: f64,
}

/// Draws `trials` random unit directions and checks
/// `lower |k|^2 <= k^T T k <= upper |k|^2` together with the relaxation
/// temperature bounds.
pub fn tensor_sandwich_check<R: Rng + ?Sized>(
    cell: &MacroCell,
    params: &SchemeParams,
    dt: f64,
    trials: usize,
    rng: &mut R,
) -> Result<SandwichReport> {
    let (lower, upper) = tensor_bounds(cell, params, dt)?;
    let mut worst_lower = f64::INFINITY;
    let mut worst_upper = f64::INFINITY;
    for _ in 0..trials {
        let k = random_unit_vector(rng);
        let value = quadratic_form(&cell.t_blend, k);
        let lo_margin = (value - lower) / lower.abs().max(f64::MIN_POSITIVE);
        let hi_margin = (upper - value) / upper.abs().max(f64::MIN_POSITIVE);
        if lo_margin < -SANDWICH_SLACK {
            return Err(Error::BoundViolated {
                direction: k,
                margin: lo_margin,
            });
        }
        if hi_margin < -SANDWICH_SLACK {
            return Err(Error::BoundViolated {
                direction: k,
                margin: hi_margin,
            });
        }
        worst_lower = worst_lower.min(lo_margin);
        worst_upper = worst_upper.min(hi_margin);
    }
    let (t_lo, t_hi) = relaxation_temperature_bounds(cell, params);
    let relaxation_lower_margin = (cell.t_theta - t_lo) / t_lo;
    let relaxation_upper_margin = (t_hi - cell.t_theta) / t_hi;
    if relaxation_lower_margin < -SANDWICH_SLACK || relaxation_upper_margin < -SANDWICH_SLACK {
        return Err(Error::BoundViolated {
            direction: [0.0; 3],
            margin: relaxation_lower_margin.min(relaxation_upper_margin),
        });
    }
    Ok(SandwichReport {
        trials,
        lower,
        upper,
        worst_lower,
        worst_upper,
        relaxation_lower_margin,
        relaxation_upper_margin,
    })
}

pub fn random_unit_vector<R: Rng + ?Sized>(rng: &mut R) -> [f64; 3] {
    loop {
        let k = [
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ];
        let n2: f64 = k.iter().map(|c| c * c).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            return [k[0] / n, k[1] / n, k[2] / n];
        }
    }
}

pub const MACRO_CSV_HEADER: &str = "time,x,rho,u1,u2,u3,t_tr,t_int,t_delta,t_theta";

/// Appends one CSV row per spatial cell. Does not write the header.
pub fn write_macro_rows<W: Write>(
    out: &mut W,
    time: f64,
    grid: &PhaseGrid,
    fields: &MacroFields,
) -> Result<()> {
    for (i, c) in fields.cells().iter().enumerate() {
        writeln!(
            out,
            "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            time,
            grid.x(i),
            c.rho,
            c.u[0],
            c.u[1],
            c.u[2],
            c.t_tr,
            c.t_int,
            c.t_delta,
            c.t_theta
        )?;
    }
    Ok(())
}
