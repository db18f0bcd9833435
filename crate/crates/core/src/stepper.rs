//! Time stepping: semi-Lagrangian transport followed by the implicit
//! relaxation `f^{n+1} = (kappa f~ + A dt M(f~)) / (kappa + A dt)`.

use std::sync::Arc;

use rayon::prelude::*;

use crate::diagnostics::{conserved_quantities, entropy, Conserved};
use crate::error::{Error, Result};
use crate::field::{DistField, LqWeights};
use crate::gaussian::CellGaussian;
use crate::grid::PhaseGrid;
use crate::moments::{MacroCell, MacroFields, MomentEvaluator};
use crate::params::{DerivedConstants, SchemeParams};
use crate::transport::AdvectionPlan;

pub const STEP_CSV_HEADER: &str =
    "step,time,mass,mom1,mom2,mom3,energy,d_mass,d_mom,d_energy,entropy,norm_q";

/// Diagnostics of one completed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    /// Index of the produced level `f^step`.
    pub step: usize,
    pub time: f64,
    pub conserved: Conserved,
    /// Change of the conserved sums over this step.
    pub defect: Conserved,
    pub entropy: f64,
    /// `||f^step||_q`.
    pub norm_q: f64,
    /// `||f~^(step-1)||_q`.
    pub advected_norm: f64,
    /// `||M(f~^(step-1))||_q`, zero without relaxation.
    pub gaussian_norm: f64,
}

impl StepReport {
    pub fn csv_row(&self) -> String {
        let c = &self.conserved;
        let d = &self.defect;
        format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.6e},{:.6e},{:.6e},{:.17e},{:.17e}",
            self.step,
            self.time,
            c.mass,
            c.momentum[0],
            c.momentum[1],
            c.momentum[2],
            c.energy,
            d.mass,
            d.momentum_norm(),
            d.energy,
            self.entropy,
            self.norm_q
        )
    }
}

/// Everything an observer may inspect after step `n -> n + 1`.
#[derive(Debug, Clone, Copy)]
pub struct StepEvent<'a> {
    pub n: usize,
    pub f_tilde: &'a DistField,
    pub f_next: &'a DistField,
    /// Moments of `f~^n`, absent without relaxation.
    pub macros: Option<&'a MacroFields>,
    /// `||f^n||_q`.
    pub prev_norm: f64,
    pub advected_norm: f64,
    pub gaussian_norm: f64,
    pub report: &'a StepReport,
}

pub trait StepObserver {
    fn observe(&mut self, event: &StepEvent<'_>) -> Result<()>;
}

impl StepObserver for () {
    fn observe(&mut self, _: &StepEvent<'_>) -> Result<()> {
        Ok(())
    }
}

impl<F: FnMut(&StepEvent<'_>) -> Result<()>> StepObserver for F {
    fn observe(&mut self, event: &StepEvent<'_>) -> Result<()> {
        self(event)
    }
}

/// Output of the relaxation stage.
#[derive(Debug, Clone)]
pub struct Relaxation {
    pub macros: MacroFields,
    pub gaussian_norm: f64,
}

/// Fixed-step operator for one grid, parameter set and `dt`.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Arc<PhaseGrid>,
    params: SchemeParams,
    derived: DerivedConstants,
    plan: AdvectionPlan,
    moments: MomentEvaluator,
    weights: LqWeights,
    relaxation: bool,
}

impl Stepper {
    pub fn new(grid: Arc<PhaseGrid>, params: SchemeParams, dt: f64) -> Result<Self> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::OutOfRange {
                name: "dt",
                value: dt,
                rule: "dt > 0",
            });
        }
        let derived = params.derived(dt, &grid)?;
        Ok(Stepper {
            plan: AdvectionPlan::new(&grid, dt),
            moments: MomentEvaluator::new(&grid, &params, dt)?,
            weights: LqWeights::new(&grid, params.q, params.delta),
            grid,
            params,
            derived,
            relaxation: true,
        })
    }

    /// Pure transport: `f^{n+1} = f~^n`.
    pub fn without_relaxation(mut self) -> Self {
        self.relaxation = false;
        self
    }

    pub fn relaxation_enabled(&self) -> bool {
        self.relaxation
    }

    pub fn grid(&self) -> &Arc<PhaseGrid> {
        &self.grid
    }

    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn dt(&self) -> f64 {
        self.derived.dt
    }

    pub fn derived(&self) -> &DerivedConstants {
        &self.derived
    }

    pub fn weights(&self) -> &LqWeights {
        &self.weights
    }

    pub fn advect_into(&self, src: &DistField, dst: &mut DistField) {
        self.plan.apply(src, dst);
    }

    /// Writes the relaxed field into `out` and returns the moments of `f_tilde`.
    pub fn relax_into(&self, f_tilde: &DistField, out: &mut DistField) -> Result<Relaxation> {
        assert!(f_tilde.same_grid(out), "relaxation buffers on different grids");
        let grid = &*self.grid;
        let (n_vel, n_i) = (grid.n_vel(), grid.n_i);
        let (keep, gain) = self.derived.relaxation_weights(self.params.kappa);
        let eps = self.moments.energy_weights();
        let w = self.weights.table();
        let (delta, lambda_delta) = (self.params.delta, self.derived.lambda_delta);
        let cells = f_tilde
            .values()
            .par_chunks(grid.cell_len())
            .zip(out.values_mut().par_chunks_mut(grid.cell_len()))
            .enumerate()
            .map(|(i, (src, dst))| -> Result<(MacroCell, f64)> {
                let cell = self.moments.cell(grid, src).map_err(|e| e.at_cell(i))?;
                let gauss = CellGaussian::new(&cell, delta, lambda_delta).map_err(|e| e.at_cell(i))?;
                let mut gv = Vec::with_capacity(n_vel);
                let mut gi = Vec::with_capacity(n_i);
                gauss.velocity_factors(grid, &mut gv);
                gauss.energy_factors(eps, &mut gi);
                let mut norm = 0.0_f64;
                for (j, &a) in gv.iter().enumerate() {
                    let base = j * n_i;
                    let rows = src[base..base + n_i]
                        .iter()
                        .zip(&mut dst[base..base + n_i])
                        .zip(&w[base..base + n_i]);
                    for (((&f, o), &wk), &b) in rows.zip(&gi) {
                        let m = a * b;
                        norm = norm.max(m * wk);
                        *o = keep * f + gain * m;
                    }
                }
                Ok((cell, norm))
            })
            .collect::<Result<Vec<_>>>()?;
        let gaussian_norm = cells.iter().fold(0.0_f64, |acc, c| acc.max(c.1));
        Ok(Relaxation {
            macros: MacroFields::new(cells.into_iter().map(|c| c.0).collect()),
            gaussian_norm,
        })
    }
}

/// Double-buffered time integration from given initial data.
#[derive(Debug, Clone)]
pub struct Simulation {
    stepper: Stepper,
    current: DistField,
    scratch: DistField,
    /// `scratch` already holds `f~^n` for the next step.
    advected_ready: bool,
    step: usize,
    conserved: Conserved,
    initial: Conserved,
    norm: f64,
}

impl Simulation {
    pub fn new(stepper: Stepper, f0: DistField) -> Result<Self> {
        if f0.grid() != &**stepper.grid() {
            return Err(Error::GridMismatch);
        }
        if let Some(pos) = f0.values().iter().position(|&v| !(v >= 0.0)) {
            let (i, j, k) = f0.node_of(pos);
            return Err(Error::NegativeInitialData {
                i,
                j,
                k,
                value: f0.values()[pos],
            });
        }
        let conserved = conserved_quantities(&f0, stepper.params.delta);
        let norm = stepper.weights.norm(&f0);
        let scratch = DistField::zeros(stepper.grid.clone());
        Ok(Simulation {
            stepper,
            current: f0,
            scratch,
            advected_ready: false,
            step: 0,
            conserved,
            initial: conserved,
            norm,
        })
    }

    /// Samples `f^0` on the grid and the first foot `f~^0 = f0(x - v dt)`
    /// exactly, so the first step carries no interpolation error.
    pub fn from_initial_data<F>(stepper: Stepper, f0: F) -> Result<Self>
    where
        F: Fn(f64, [f64; 3], f64) -> f64 + Sync,
    {
        let grid = stepper.grid.clone();
        let dt = stepper.dt();
        let start = DistField::sample(grid.clone(), 0.0, &f0)?;
        let first_foot = DistField::sample(grid, dt, &f0)?;
        let mut sim = Simulation::new(stepper, start)?;
        sim.scratch = first_foot;
        sim.advected_ready = true;
        Ok(sim)
    }

    pub fn stepper(&self) -> &Stepper {
        &self.stepper
    }

    pub fn field(&self) -> &DistField {
        &self.current
    }

    pub fn into_field(self) -> DistField {
        self.current
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.stepper.dt()
    }

    pub fn initial_conserved(&self) -> Conserved {
        self.initial
    }

    pub fn conserved(&self) -> Conserved {
        self.conserved
    }

    pub fn step<O: StepObserver + ?Sized>(&mut self, observer: &mut O) -> Result<StepReport> {
        let n = self.step;
        self.advance(observer).map_err(|e| Error::StepFailed {
            step: n,
            source: Box::new(e),
        })
    }

    pub fn run<O: StepObserver + ?Sized>(
        &mut self,
        n_steps: usize,
        observer: &mut O,
    ) -> Result<Vec<StepReport>> {
        (0..n_steps).map(|_| self.step(observer)).collect()
    }

    fn advance<O: StepObserver + ?Sized>(&mut self, observer: &mut O) -> Result<StepReport> {
        if !self.advected_ready {
            self.stepper.advect_into(&self.current, &mut self.scratch);
        }
        self.advected_ready = false;
        let advected_norm = self.stepper.weights.norm(&self.scratch);

        let relaxation = if self.stepper.relaxation {
            Some(self.stepper.relax_into(&self.scratch, &mut self.current)?)
        } else {
            std::mem::swap(&mut self.current, &mut self.scratch);
            None
        };

        let norm_q = self.stepper.weights.norm(&self.current);
        if !norm_q.is_finite() {
            return Err(Error::Validation {
                field: "f".into(),
                message: "non-finite values after relaxation".into(),
            });
        }
        let conserved = conserved_quantities(&self.current, self.stepper.params.delta);
        let report = StepReport {
            step: self.step + 1,
            time: (self.step + 1) as f64 * self.stepper.dt(),
            conserved,
            defect: conserved.minus(&self.conserved),
            entropy: entropy(&self.current)?,
            norm_q,
            advected_norm,
            gaussian_norm: relaxation.as_ref().map_or(0.0, |r| r.gaussian_norm),
        };
        let f_tilde = if relaxation.is_some() {
            &self.scratch
        } else {
            &self.current
        };
        observer.observe(&StepEvent {
            n: self.step,
            f_tilde,
            f_next: &self.current,
            macros: relaxation.as_ref().map(|r| &r.macros),
            prev_norm: self.norm,
            advected_norm,
            gaussian_norm: report.gaussian_norm,
            report: &report,
        })?;
        self.step += 1;
        self.conserved = conserved;
        self.norm = norm_q;
        Ok(report)
    }
}

/// Relaxation stage alone: `(kappa f~ + A dt M(f~)) / (kappa + A dt)`.
pub fn relax(f_tilde: &DistField, params: &SchemeParams, dt: f64) -> Result<DistField> {
    let stepper = Stepper::new(f_tilde.grid_handle().clone(), *params, dt)?;
    let mut out = DistField::zeros(f_tilde.grid_handle().clone());
    stepper.relax_into(f_tilde, &mut out)?;
    Ok(out)
}

/// One full step from `f`.
pub fn step(f: &DistField, params: &SchemeParams, dt: f64) -> Result<(DistField, StepReport)> {
    let stepper = Stepper::new(f.grid_handle().clone(), *params, dt)?;
    let mut sim = Simulation::new(stepper, f.clone())?;
    let report = sim.step(&mut ())?;
    Ok((sim.into_field(), report))
}
