//! Conserved quantities, discrete entropy, stability-envelope monitors and
//! observed convergence orders.

use std::fmt::Write as _;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::{DistField, LqWeights};
use crate::gaussian::CellGaussian;
use crate::grid::PhaseGrid;
use crate::moments::{energy_weights, MomentEvaluator};
use crate::params::{normalizer_discrete, SchemeParams};
use crate::stepper::{StepEvent, StepObserver};
use crate::sum::{pairwise_map, pairwise_sum};

/// Total mass, momentum and energy `sum f (1, v, |v|^2/2 + I^(2/delta)) dx dv^3 dI`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Conserved {
    pub mass: f64,
    pub momentum: [f64; 3],
    pub energy: f64,
}

impl Conserved {
    pub fn minus(&self, other: &Conserved) -> Conserved {
        Conserved {
            mass: self.mass - other.mass,
            momentum: [
                self.momentum[0] - other.momentum[0],
                self.momentum[1] - other.momentum[1],
                self.momentum[2] - other.momentum[2],
            ],
            energy: self.energy - other.energy,
        }
    }

    pub fn momentum_norm(&self) -> f64 {
        self.momentum.iter().map(|m| m * m).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.mass.is_finite() && self.energy.is_finite() && self.momentum.iter().all(|m| m.is_finite())
    }

    /// Drift of `self` relative to `reference`: `(mass, momentum, energy)`.
    ///
    /// Mass and energy are divided by their reference values. Momentum is
    /// divided by `mass * sqrt(2 energy / mass)`, a velocity scale that stays
    /// meaningful when the reference momentum vanishes.
    pub fn relative_drift(&self, reference: &Conserved) -> [f64; 3] {
        let d = self.minus(reference);
        let speed = (2.0 * reference.energy / reference.mass).sqrt();
        [
            (d.mass / reference.mass).abs(),
            d.momentum_norm() / (reference.mass * speed),
            (d.energy / reference.energy).abs(),
        ]
    }
}

pub fn conserved_quantities(field: &DistField, delta: f64) -> Conserved {
    let grid = field.grid();
    let eps = energy_weights(grid, delta);
    let n_i = grid.n_i;
    let per_cell: Vec<[f64; 5]> = field
        .values()
        .par_chunks(grid.cell_len())
        .map(|cell| {
            pairwise_map(grid.n_vel(), &|j| {
                let row = &cell[j * n_i..(j + 1) * n_i];
                let [m, e] = pairwise_map(n_i, &|k| [row[k], row[k] * eps[k]]);
                let v = grid.velocity(j);
                let half_v2 = 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
                [m, m * v[0], m * v[1], m * v[2], m * half_v2 + e]
            })
        })
        .collect();
    let total = pairwise_map(per_cell.len(), &|i| per_cell[i]);
    let w = grid.phase_volume();
    Conserved {
        mass: total[0] * w,
        momentum: [total[1] * w, total[2] * w, total[3] * w],
        energy: total[4] * w,
    }
}

/// Discrete entropy `sum f ln f dx dv^3 dI` with `0 ln 0 = 0`.
pub fn entropy(field: &DistField) -> Result<f64> {
    let grid = field.grid();
    let per_cell = field
        .values()
        .par_chunks(grid.cell_len())
        .enumerate()
        .map(|(i, cell)| {
            if let Some(&value) = cell.iter().find(|&&f| !(f >= 0.0)) {
                return Err(Error::NegativeField { cell: i, value });
            }
            Ok(pairwise_map(cell.len(), &|n| {
                let f = cell[n];
                [if f > 0.0 { f * f.ln() } else { 0.0 }]
            })[0])
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&per_cell) * grid.phase_volume())
}

/// `|| f - M(f) ||_q`, with the Gaussian built from the moments of `f` at step `dt`.
pub fn equilibrium_distance(field: &DistField, params: &SchemeParams, dt: f64) -> Result<f64> {
    let grid = field.grid();
    let evaluator = MomentEvaluator::new(grid, params, dt)?;
    let lambda_delta = normalizer_discrete(params.delta, grid.energy_nodes(), grid.di)?;
    let weights = LqWeights::new(grid, params.q, params.delta);
    let eps = evaluator.energy_weights();
    let per_cell = field
        .values()
        .par_chunks(grid.cell_len())
        .enumerate()
        .map(|(i, cell)| {
            let macro_cell = evaluator.cell(grid, cell).map_err(|e| e.at_cell(i))?;
            let gauss =
                CellGaussian::new(&macro_cell, params.delta, lambda_delta).map_err(|e| e.at_cell(i))?;
            let mut m = vec![0.0; cell.len()];
            gauss.fill(grid, eps, &mut m);
            Ok(cell
                .iter()
                .zip(&m)
                .zip(weights.table())
                .fold(0.0_f64, |acc, ((f, g), w)| acc.max((f - g).abs() * w)))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(per_cell.into_iter().fold(0.0, f64::max))
}

/// Lower envelope `C01 exp(-C02 (|v|^a + I^b))` certifying the initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityEnvelope {
    pub c01: f64,
    pub c02: f64,
    pub a_exp: f64,
    pub b_exp: f64,
}

/// Relative slack on envelope comparisons, for round-off only.
pub const ENVELOPE_SLACK: f64 = 1e-12;

impl StabilityEnvelope {
    pub fn new(c01: f64, c02: f64, a_exp: f64, b_exp: f64) -> Result<Self> {
        for (name, value) in [("c01", c01), ("c02", c02), ("a", a_exp), ("b", b_exp)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::validation(
                    format!("envelope.{name}"),
                    format!("{value} must be positive"),
                ));
            }
        }
        Ok(StabilityEnvelope {
            c01,
            c02,
            a_exp,
            b_exp,
        })
    }

    #[inline]
    pub fn lower(&self, v: [f64; 3], i: f64) -> f64 {
        let speed = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        self.c01 * (-self.c02 * (speed.powf(self.a_exp) + i.powf(self.b_exp))).exp()
    }

    /// Envelope tabulated over one cell, `(j, k)` order.
    pub fn table(&self, grid: &PhaseGrid) -> Vec<f64> {
        let mut out = Vec::with_capacity(grid.cell_len());
        for j in 0..grid.n_vel() {
            let v = grid.velocity(j);
            out.extend(grid.energy_nodes().iter().map(|&i| self.lower(v, i)));
        }
        out
    }

    /// Per-step decay `kappa / (kappa + A dt)` of the lower bound.
    pub fn decay_factor(params: &SchemeParams, dt: f64) -> f64 {
        let a = params.collision_frequency();
        params.kappa / (params.kappa + a * dt)
    }

    /// Checks `field >= factor * envelope` at every node.
    pub fn check_lower(
        &self,
        field: &DistField,
        table: &[f64],
        factor: f64,
        step: usize,
    ) -> Result<f64> {
        let grid = field.grid();
        let mut worst = f64::INFINITY;
        for (i, cell) in field.values().chunks(grid.cell_len()).enumerate() {
            for (jk, (&f, &env)) in cell.iter().zip(table).enumerate() {
                let bound = factor * env;
                let ratio = f / bound;
                if f < bound * (1.0 - ENVELOPE_SLACK) {
                    return Err(Error::EnvelopeViolated {
                        which: "B",
                        step,
                        node: Some((i, jk / grid.n_i, jk % grid.n_i)),
                        detail: format!("value {f:e} below bound {bound:e}"),
                    });
                }
                worst = worst.min(ratio);
            }
        }
        Ok(worst)
    }
}

/// Outcome of an envelope-monitored run.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub steps: usize,
    /// Smallest `f~^n / bound` seen over all nodes and steps (>= 1 when the
    /// lower envelope holds).
    pub worst_lower_ratio: f64,
    /// Largest `||f~^n||_q / bound` seen (<= 1 when the upper envelope holds).
    pub worst_upper_ratio: f64,
    pub decay_factor: f64,
    /// Measured per-step growth factors `(kappa + A dt C) / (kappa + A dt)`.
    pub growth_factors: Vec<f64>,
}

/// Checks the lower (`B^n`) and upper (`A^n`) stability envelopes on every
/// step of a run.
///
/// The upper factor uses the measured ratio `C = ||M(f~^n)||_q / ||f^n||_q`
/// of each step in place of the analytical constant.
#[derive(Debug, Clone)]
pub struct EnvelopeMonitor {
    envelope: StabilityEnvelope,
    table: Vec<f64>,
    decay: f64,
    a_dt: f64,
    kappa: f64,
    reference_norm: Option<f64>,
    cumulative_decay: f64,
    cumulative_growth: f64,
    report: EnvelopeReport,
}

impl EnvelopeMonitor {
    pub fn new(envelope: StabilityEnvelope, grid: &PhaseGrid, params: &SchemeParams, dt: f64) -> Self {
        let decay = StabilityEnvelope::decay_factor(params, dt);
        EnvelopeMonitor {
            envelope,
            table: envelope.table(grid),
            decay,
            a_dt: params.collision_frequency() * dt,
            kappa: params.kappa,
            reference_norm: None,
            cumulative_decay: 1.0,
            cumulative_growth: 1.0,
            report: EnvelopeReport {
                steps: 0,
                worst_lower_ratio: f64::INFINITY,
                worst_upper_ratio: 0.0,
                decay_factor: decay,
                growth_factors: Vec::new(),
            },
        }
    }

    pub fn envelope(&self) -> &StabilityEnvelope {
        &self.envelope
    }

    /// Checks the initial data against the envelope (the `n = 0` hypothesis).
    pub fn certify_initial(&mut self, f0: &DistField) -> Result<()> {
        let worst = self.envelope.check_lower(f0, &self.table, 1.0, 0)?;
        self.report.worst_lower_ratio = self.report.worst_lower_ratio.min(worst);
        Ok(())
    }

    pub fn report(&self) -> &EnvelopeReport {
        &self.report
    }

    pub fn into_report(self) -> EnvelopeReport {
        self.report
    }
}

impl StepObserver for EnvelopeMonitor {
    fn observe(&mut self, event: &StepEvent<'_>) -> Result<()> {
        let n = event.n;
        // ||f_0||_q is a continuous supremum; the best discrete proxy is the
        // larger of the sampled f^0 and f~^0 norms.
        let reference = *self
            .reference_norm
            .get_or_insert(event.prev_norm.max(event.advected_norm));
        let worst = self
            .envelope
            .check_lower(event.f_tilde, &self.table, self.cumulative_decay, n)?;
        self.report.worst_lower_ratio = self.report.worst_lower_ratio.min(worst);

        let bound = self.cumulative_growth * reference;
        let ratio = event.advected_norm / bound;
        if event.advected_norm > bound * (1.0 + ENVELOPE_SLACK) {
            return Err(Error::EnvelopeViolated {
                which: "A",
                step: n,
                node: None,
                detail: format!("norm {:e} above bound {bound:e}", event.advected_norm),
            });
        }
        self.report.worst_upper_ratio = self.report.worst_upper_ratio.max(ratio);

        // Factors that carry step n to step n + 1.
        let measured = if event.prev_norm > 0.0 {
            event.gaussian_norm / event.prev_norm
        } else {
            0.0
        };
        let growth = (self.kappa + self.a_dt * measured) / (self.kappa + self.a_dt);
        self.report.growth_factors.push(growth);
        self.cumulative_growth *= growth;
        self.cumulative_decay *= self.decay;
        self.report.steps += 1;
        Ok(())
    }
}

/// One refinement level of a convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub h: f64,
    pub error: f64,
    /// Order against the previous (coarser) level.
    pub order: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceTable {
    pub fn orders(&self) -> Vec<f64> {
        self.rows.iter().filter_map(|r| r.order).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("h,error,order\n");
        for r in &self.rows {
            let order = r.order.map(|o| format!("{o:.6}")).unwrap_or_default();
            let _ = writeln!(out, "{:.17e},{:.17e},{}", r.h, r.error, order);
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "| {:>12} | {:>12} | {:>6} |", "h", "error", "order");
        let _ = writeln!(out, "|{:-<14}|{:-<14}|{:-<8}|", "", "", "");
        for r in &self.rows {
            let order = r.order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "-".into());
            let _ = writeln!(out, "| {:>12.5e} | {:>12.5e} | {:>6} |", r.h, r.error, order);
        }
        out
    }
}

/// Observed orders `log(e_coarse / e_fine) / log(h_coarse / h_fine)` between
/// consecutive levels. Levels must be given coarse to fine.
pub fn observed_order(levels: &[(f64, f64)]) -> Result<ConvergenceTable> {
    if levels.len() < 3 {
        return Err(Error::DegenerateTable(format!(
            "need at least 3 levels, got {}",
            levels.len()
        )));
    }
    for (n, &(h, e)) in levels.iter().enumerate() {
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::DegenerateTable(format!("level {n}: step {h:e} not positive")));
        }
        if !(e > 0.0 && e.is_finite()) {
            return Err(Error::DegenerateTable(format!("level {n}: error {e:e} not positive")));
        }
    }
    let mut rows = Vec::with_capacity(levels.len());
    for (n, &(h, error)) in levels.iter().enumerate() {
        let order = if n == 0 {
            None
        } else {
            let (hc, ec) = levels[n - 1];
            if !(h < hc) {
                return Err(Error::DegenerateTable(format!(
                    "level {n}: step {h:e} does not refine {hc:e}"
                )));
            }
            if !(error < ec) {
                return Err(Error::DegenerateTable(format!(
                    "level {n}: error {error:e} does not decrease from {ec:e}"
                )));
            }
            Some((ec / error).ln() / (hc / h).ln())
        };
        rows.push(ConvergenceRow { h, error, order });
    }
    Ok(ConvergenceTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridConfig;
    use crate::params::internal_energy;
    use std::sync::Arc;

    fn grid() -> Arc<PhaseGrid> {
        Arc::new(
            PhaseGrid::new(GridConfig {
                n_x: 4,
                n_v: 5,
                v_max: 2.0,
                n_i: 3,
                i_max: 3.0,
            })
            .unwrap(),
        )
    }

    #[test]
    fn zero_field() {
        let f = DistField::zeros(grid());
        assert_eq!(conserved_quantities(&f, 2.0), Conserved::default());
        assert_eq!(entropy(&f).unwrap(), 0.0);
    }

    #[test]
    fn point_mass_conserved() {
        let g = grid();
        let mut f = DistField::zeros(g.clone());
        let (j, k) = (7, 2);
        f.set(1, j, k, 1.0 / g.node_volume());
        let c = conserved_quantities(&f, 1.5);
        let v = g.velocity(j);
        let e = 0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) + internal_energy(g.energy_nodes()[k], 1.5);
        assert!((c.mass - g.dx).abs() < 1e-15);
        for a in 0..3 {
            assert!((c.momentum[a] - g.dx * v[a]).abs() < 1e-15);
        }
        assert!((c.energy - g.dx * e).abs() < 1e-14);
    }

    #[test]
    fn conserved_is_linear() {
        let g = grid();
        let a = DistField::sample(g.clone(), 0.0, |x, v, i| 1.0 + x + v[0] * v[0] + i).unwrap();
        let b = DistField::sample(g.clone(), 0.0, |x, v, i| (x * v[1]).abs() + i * i).unwrap();
        let mut sum = a.clone();
        for (s, y) in sum.values_mut().iter_mut().zip(b.values()) {
            *s = 2.0 * *s + 3.0 * y;
        }
        let (ca, cb, cs) = (
            conserved_quantities(&a, 2.0),
            conserved_quantities(&b, 2.0),
            conserved_quantities(&sum, 2.0),
        );
        assert!((cs.mass - 2.0 * ca.mass - 3.0 * cb.mass).abs() < 1e-12);
        assert!((cs.energy - 2.0 * ca.energy - 3.0 * cb.energy).abs() < 1e-11);
    }

    #[test]
    fn entropy_examples() {
        let g = grid();
        let ones = DistField::sample(g.clone(), 0.0, |_, _, _| 1.0).unwrap();
        assert_eq!(entropy(&ones).unwrap(), 0.0);
        let mut neg = ones.clone();
        neg.set(2, 0, 0, -0.5);
        assert!(matches!(entropy(&neg), Err(Error::NegativeField { cell: 2, .. })));
    }

    #[test]
    fn order_examples() {
        let t = observed_order(&[(4.0, 4.0), (2.0, 2.0), (1.0, 1.0)]).unwrap();
        assert_eq!(t.orders(), vec![1.0, 1.0]);
        let t = observed_order(&[(0.4, 16e-3), (0.2, 4e-3), (0.1, 1e-3)]).unwrap();
        for o in t.orders() {
            assert!((o - 2.0).abs() < 1e-12);
        }
        assert!(t.to_csv().starts_with("h,error,order\n"));
        assert_eq!(t.to_markdown().lines().count(), 5);
    }

    #[test]
    fn order_rejects_degenerate_tables() {
        assert!(observed_order(&[(2.0, 1.0), (1.0, 0.5)]).is_err());
        assert!(observed_order(&[(4.0, 1.0), (2.0, 0.0), (1.0, 0.1)]).is_err());
        assert!(observed_order(&[(4.0, 1.0), (2.0, 2.0), (1.0, 0.1)]).is_err());
        assert!(observed_order(&[(4.0, 1.0), (4.0, 0.5), (1.0, 0.1)]).is_err());
    }

    #[test]
    fn envelope_validation_and_certification() {
        assert!(StabilityEnvelope::new(0.0, 1.0, 2.0, 2.0).is_err());
        let env = StabilityEnvelope::new(0.01, 1.0, 2.0, 2.0).unwrap();
        let g = grid();
        let table = env.table(&g);
        let good = DistField::sample(g.clone(), 0.0, |_, v, i| 0.02 * (-(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) - i * i).exp()).unwrap();
        assert!(env.check_lower(&good, &table, 1.0, 0).unwrap() >= 2.0 - 1e-12);
        let bad = DistField::sample(g.clone(), 0.0, |_, v, i| 0.005 * (-(v[0] * v[0]) - i).exp()).unwrap();
        assert!(matches!(
            env.check_lower(&bad, &table, 1.0, 0),
            Err(Error::EnvelopeViolated { which: "B", .. })
        ));
    }
}
