//! Scenario files and the `simulate`, `convergence` and `sweep` commands.
//!
//! A scenario is plain `key = value` text; `#` starts a comment. Vectors are
//! written as three numbers separated by spaces or commas, lists likewise.
//!
//! | key | default |
//! |-----|---------|
//! | `n_x`, `n_v`, `n_i` | required |
//! | `nu`, `theta`, `delta`, `kappa` | required |
//! | `q` | `6 + delta` |
//! | `t_ref` | largest temperature of the initial data |
//! | `v_max` | `max |U| + 8 sqrt(t_ref)` |
//! | `i_max` | `(40 t_ref)^(delta/2)` |
//! | `dt`, `t_final` | `0.01`, `0.1` |
//! | `initial` | `maxwellian` (`perturbation`, `riemann`) |
//! | `rho`, `u`, `temperature` | `1`, `0 0 0`, `1` (maxwellian) |
//! | `rho0`, `alpha`, `u`, `temperature` | `1`, `0.2`, `0 0 0`, `1` (perturbation) |
//! | `rho_l`, `u_l`, `t_l`, `rho_r`, `u_r`, `t_r` | `1`, `0 0 0`, `1`, `0.125`, `0 0 0`, `0.8` (riemann) |
//! | `smoothing_cells` | `2`; `riemann_raw = true` gives a sharp jump |
//! | `envelope_c01`, `envelope_c02`, `envelope_a`, `envelope_b` | none; all four or none |
//! | `snapshot_times` | empty |
//! | `macro_every` | `1`; `0` writes only the first and last levels |
//!
//! Riemann data use the `_r` state on `1/4 < x < 3/4` and the `_l` state
//! elsewhere.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use crate::diagnostics::{
    conserved_quantities, entropy, equilibrium_distance, observed_order, ConvergenceTable,
    EnvelopeMonitor, EnvelopeReport, StabilityEnvelope,
};
use crate::error::{Error, Result};
use crate::field::{error_sup_norm, write_snapshot, DistField};
use crate::grid::{GridConfig, PhaseGrid};
use crate::moments::{compute_moments, write_macro_rows, MACRO_CSV_HEADER};
use crate::params::{default_q, internal_energy, normalizer_discrete, SchemeParams};
use crate::stepper::{Simulation, StepEvent, StepReport, Stepper, STEP_CSV_HEADER};

/// Relative tolerance on `t_final / dt` being an integer.
const STEP_COUNT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub rho: f64,
    pub u: [f64; 3],
    pub temperature: f64,
}

impl State {
    fn validate(&self, tag: &str) -> Result<()> {
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return Err(Error::validation(format!("rho{tag}"), "must be positive"));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::validation(format!("temperature{tag}"), "must be positive"));
        }
        if !self.u.iter().all(|c| c.is_finite()) {
            return Err(Error::validation(format!("u{tag}"), "must be finite"));
        }
        Ok(())
    }

    fn speed(&self) -> f64 {
        self.u.iter().map(|c| c * c).sum::<f64>().sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitialCondition {
    Maxwellian(State),
    /// Local Maxwellian with density `rho0 (1 + alpha sin 2 pi x)`.
    Perturbation {
        rho0: f64,
        alpha: f64,
        u: [f64; 3],
        temperature: f64,
    },
    Riemann {
        left: State,
        right: State,
        /// Width of the tanh transition in cells; zero gives a jump.
        smoothing_cells: f64,
    },
}

impl InitialCondition {
    pub fn reference_temperature(&self) -> f64 {
        match self {
            InitialCondition::Maxwellian(s) => s.temperature,
            InitialCondition::Perturbation { temperature, .. } => *temperature,
            InitialCondition::Riemann { left, right, .. } => left.temperature.max(right.temperature),
        }
    }

    pub fn max_speed(&self) -> f64 {
        match self {
            InitialCondition::Maxwellian(s) => s.speed(),
            InitialCondition::Perturbation { u, .. } => u.iter().map(|c| c * c).sum::<f64>().sqrt(),
            InitialCondition::Riemann { left, right, .. } => left.speed().max(right.speed()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            InitialCondition::Maxwellian(s) => s.validate(""),
            InitialCondition::Perturbation {
                rho0,
                alpha,
                u,
                temperature,
            } => {
                State {
                    rho: *rho0,
                    u: *u,
                    temperature: *temperature,
                }
                .validate("")
                .map_err(|e| match e {
                    Error::Validation { field, message } if field == "rho" => Error::Validation {
                        field: "rho0".into(),
                        message,
                    },
                    other => other,
                })?;
                if !(alpha.abs() < 1.0) {
                    return Err(Error::validation("alpha", "need |alpha| < 1 for positive density"));
                }
                Ok(())
            }
            InitialCondition::Riemann {
                left,
                right,
                smoothing_cells,
            } => {
                left.validate("_l")?;
                right.validate("_r")?;
                if !(*smoothing_cells >= 0.0 && smoothing_cells.is_finite()) {
                    return Err(Error::validation("smoothing_cells", "must be nonnegative"));
                }
                Ok(())
            }
        }
    }
}

/// Closed-form initial distribution on a given grid.
#[derive(Debug, Clone, Copy)]
pub struct InitialData {
    pub condition: InitialCondition,
    pub delta: f64,
    pub lambda_delta: f64,
    pub dx: f64,
}

impl InitialData {
    fn maxwellian(&self, s: &State, v: [f64; 3], i: f64) -> f64 {
        let t = s.temperature;
        let r2 = (v[0] - s.u[0]).powi(2) + (v[1] - s.u[1]).powi(2) + (v[2] - s.u[2]).powi(2);
        let norm = (2.0 * PI * t).powf(1.5) * t.powf(0.5 * self.delta);
        s.rho * self.lambda_delta / norm * (-0.5 * r2 / t - internal_energy(i, self.delta) / t).exp()
    }

    /// Weight of the inner state, a smoothed indicator of `1/4 < x < 3/4`.
    pub fn inner_weight(&self, x: f64, smoothing_cells: f64) -> f64 {
        let c = (2.0 * PI * x).cos();
        if smoothing_cells == 0.0 {
            return if c < 0.0 { 1.0 } else { 0.0 };
        }
        let w = smoothing_cells * self.dx;
        0.5 * (1.0 - (c / (2.0 * PI * w)).tanh())
    }

    pub fn value(&self, x: f64, v: [f64; 3], i: f64) -> f64 {
        match &self.condition {
            InitialCondition::Maxwellian(s) => self.maxwellian(s, v, i),
            InitialCondition::Perturbation {
                rho0,
                alpha,
                u,
                temperature,
            } => {
                let s = State {
                    rho: rho0 * (1.0 + alpha * (2.0 * PI * x).sin()),
                    u: *u,
                    temperature: *temperature,
                };
                self.maxwellian(&s, v, i)
            }
            InitialCondition::Riemann {
                left,
                right,
                smoothing_cells,
            } => {
                let h = self.inner_weight(x, *smoothing_cells);
                let mut out = 0.0;
                if h < 1.0 {
                    out += (1.0 - h) * self.maxwellian(left, v, i);
                }
                if h > 0.0 {
                    out += h * self.maxwellian(right, v, i);
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub grid: GridConfig,
    pub params: SchemeParams,
    pub dt: f64,
    pub t_final: f64,
    pub n_steps: usize,
    pub initial: InitialCondition,
    pub envelope: Option<StabilityEnvelope>,
    pub snapshot_steps: Vec<usize>,
    pub macro_every: usize,
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(Error::Parse {
                    line,
                    message: format!("expected `key = value`, found `{content}`"),
                });
            };
            let key = key.trim().to_ascii_lowercase();
            if key.is_empty() {
                return Err(Error::Parse {
                    line,
                    message: "empty key".into(),
                });
            }
            if let Some((first, _)) = map.insert(key.clone(), (line, value.trim().to_string())) {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate key `{key}` (first on line {first})"),
                });
            }
        }
        Ok(Entries { map })
    }

    fn take<T: FromStr>(&mut self, key: &str) -> Result<Option<T>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some((line, value)) => value.parse().map(Some).map_err(|_| Error::Parse {
                line,
                message: format!("cannot parse `{value}` for `{key}`"),
            }),
        }
    }

    fn required<T: FromStr>(&mut self, key: &str) -> Result<T> {
        self.take(key)?
            .ok_or_else(|| Error::validation(key, "required key is missing"))
    }

    fn take_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.map.remove(key) {
            None => Ok(None),
            Some((line, value)) => value
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .map(|s| {
                    s.parse::<f64>().map_err(|_| Error::Parse {
                        line,
                        message: format!("cannot parse `{s}` in `{key}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    fn take_vec3(&mut self, key: &str) -> Result<Option<[f64; 3]>> {
        let line = self.map.get(key).map(|e| e.0);
        match self.take_list(key)? {
            None => Ok(None),
            Some(v) if v.len() == 3 => Ok(Some([v[0], v[1], v[2]])),
            Some(v) => Err(Error::Parse {
                line: line.unwrap_or(0),
                message: format!("`{key}` needs 3 components, found {}", v.len()),
            }),
        }
    }

    fn state(&mut self, suffix: &str, default: State) -> Result<State> {
        let t_key = if suffix.is_empty() {
            "temperature".to_string()
        } else {
            format!("t{suffix}")
        };
        Ok(State {
            rho: self.take(&format!("rho{suffix}"))?.unwrap_or(default.rho),
            u: self.take_vec3(&format!("u{suffix}"))?.unwrap_or(default.u),
            temperature: self.take(&t_key)?.unwrap_or(default.temperature),
        })
    }

    fn finish(self) -> Result<()> {
        match self.map.into_iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => Err(Error::Parse {
                line,
                message: format!("unknown key `{key}`"),
            }),
        }
    }
}

fn param_error(err: Error) -> Error {
    match err {
        Error::OutOfRange { name, value, rule } => {
            Error::validation(name, format!("{value} violates {rule}"))
        }
        other => other,
    }
}

/// Number of steps of length `dt` in `t`, if `t` is a whole multiple.
pub fn step_count(t: f64, dt: f64) -> Option<usize> {
    if !(t >= 0.0 && t.is_finite() && dt > 0.0) {
        return None;
    }
    let n = (t / dt).round();
    ((n * dt - t).abs() <= STEP_COUNT_TOLERANCE * t.max(1.0)).then_some(n as usize)
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut e = Entries::parse(text)?;
        let n_x: usize = e.required("n_x")?;
        let n_v: usize = e.required("n_v")?;
        let n_i: usize = e.required("n_i")?;
        let nu: f64 = e.required("nu")?;
        let theta: f64 = e.required("theta")?;
        let delta: f64 = e.required("delta")?;
        let kappa: f64 = e.required("kappa")?;
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::validation("delta", "must be positive"));
        }
        let q = e.take("q")?.unwrap_or_else(|| default_q(delta));
        let params = SchemeParams::new(nu, theta, delta, kappa, q).map_err(param_error)?;

        let kind: String = e.take("initial")?.unwrap_or_else(|| "maxwellian".into());
        let unit = State {
            rho: 1.0,
            u: [0.0; 3],
            temperature: 1.0,
        };
        let initial = match kind.to_ascii_lowercase().as_str() {
            "maxwellian" => InitialCondition::Maxwellian(e.state("", unit)?),
            "perturbation" => InitialCondition::Perturbation {
                rho0: e.take("rho0")?.unwrap_or(1.0),
                alpha: e.take("alpha")?.unwrap_or(0.2),
                u: e.take_vec3("u")?.unwrap_or([0.0; 3]),
                temperature: e.take("temperature")?.unwrap_or(1.0),
            },
            "riemann" => {
                let left = e.state("_l", unit)?;
                let right = e.state(
                    "_r",
                    State {
                        rho: 0.125,
                        u: [0.0; 3],
                        temperature: 0.8,
                    },
                )?;
                let raw: bool = e.take("riemann_raw")?.unwrap_or(false);
                let smoothing: f64 = e.take("smoothing_cells")?.unwrap_or(2.0);
                InitialCondition::Riemann {
                    left,
                    right,
                    smoothing_cells: if raw { 0.0 } else { smoothing },
                }
            }
            other => {
                return Err(Error::validation(
                    "initial",
                    format!("unknown kind `{other}` (maxwellian, perturbation, riemann)"),
                ))
            }
        };
        initial.validate()?;

        let t_ref = e.take("t_ref")?.unwrap_or_else(|| initial.reference_temperature());
        if !(t_ref > 0.0 && t_ref.is_finite()) {
            return Err(Error::validation("t_ref", "must be positive"));
        }
        let grid = GridConfig {
            n_x,
            n_v,
            v_max: e
                .take("v_max")?
                .unwrap_or_else(|| initial.max_speed() + 8.0 * t_ref.sqrt()),
            n_i,
            i_max: e
                .take("i_max")?
                .unwrap_or_else(|| (40.0 * t_ref).powf(0.5 * delta)),
        };
        let phase = PhaseGrid::new(grid).map_err(|err| Error::validation("grid", err.to_string()))?;

        let dt: f64 = e.take("dt")?.unwrap_or(1e-2);
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::validation("dt", "must be positive"));
        }
        let t_final: f64 = e.take("t_final")?.unwrap_or(0.1);
        let n_steps = step_count(t_final, dt).ok_or_else(|| {
            Error::validation(
                "t_final",
                format!("{t_final} is not a nonnegative integer multiple of dt = {dt}"),
            )
        })?;

        let envelope = match (
            e.take("envelope_c01")?,
            e.take("envelope_c02")?,
            e.take("envelope_a")?,
            e.take("envelope_b")?,
        ) {
            (None, None, None, None) => None,
            (Some(c01), Some(c02), Some(a), Some(b)) => Some(StabilityEnvelope::new(c01, c02, a, b)?),
            _ => {
                return Err(Error::validation(
                    "envelope",
                    "give all of envelope_c01, envelope_c02, envelope_a, envelope_b",
                ))
            }
        };

        let mut snapshot_steps = Vec::new();
        for t in e.take_list("snapshot_times")?.unwrap_or_default() {
            match step_count(t, dt) {
                Some(n) if n <= n_steps => snapshot_steps.push(n),
                _ => {
                    return Err(Error::validation(
                        "snapshot_times",
                        format!("{t} is not a multiple of dt within [0, t_final]"),
                    ))
                }
            }
        }
        snapshot_steps.sort_unstable();
        snapshot_steps.dedup();
        let macro_every = e.take("macro_every")?.unwrap_or(1);
        e.finish()?;

        // The rectangle rule in I undershoots the internal energy of a
        // Gaussian by about di / 2 (in I^(2/delta) units at delta = 2), and
        // every relaxation step removes that much.
        if phase.di > 0.1 * t_ref {
            log::warn!(
                "energy step di = {:.3} is coarse against t_ref = {t_ref}; expect internal-energy loss",
                phase.di
            );
        }

        Ok(Scenario {
            grid,
            params,
            dt,
            t_final,
            n_steps,
            initial,
            envelope,
            snapshot_steps,
            macro_every,
        })
    }
}

pub fn parse_scenario(path: &Path) -> Result<Scenario> {
    let text = fs::read_to_string(path)
        .map_err(|err| Error::Io(format!("{}: {err}", path.display())))?;
    text.parse()
}

impl Scenario {
    pub fn phase_grid(&self, n_x: usize) -> Result<Arc<PhaseGrid>> {
        Ok(Arc::new(PhaseGrid::new(GridConfig { n_x, ..self.grid })?))
    }

    pub fn initial_data(&self, grid: &PhaseGrid) -> Result<InitialData> {
        Ok(InitialData {
            condition: self.initial,
            delta: self.params.delta,
            lambda_delta: normalizer_discrete(self.params.delta, grid.energy_nodes(), grid.di)?,
            dx: grid.dx,
        })
    }

    /// Simulation on `n_x` cells with step `dt`, starting from the exactly
    /// sampled first foot.
    pub fn simulation(&self, n_x: usize, dt: f64, relaxation: bool) -> Result<Simulation> {
        let grid = self.phase_grid(n_x)?;
        let data = self.initial_data(&grid)?;
        let mut stepper = Stepper::new(grid, self.params, dt)?;
        if !relaxation {
            stepper = stepper.without_relaxation();
        }
        Simulation::from_initial_data(stepper, move |x, v, i| data.value(x, v, i))
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|err| Error::Io(format!("{}: {err}", path.display())))
}

/// Report row for the initial level.
pub fn initial_report(field: &DistField, params: &SchemeParams) -> Result<StepReport> {
    Ok(StepReport {
        step: 0,
        time: 0.0,
        conserved: conserved_quantities(field, params.delta),
        defect: Default::default(),
        entropy: entropy(field)?,
        norm_q: field.weighted_sup_norm(params.q, params.delta),
        advected_norm: 0.0,
        gaussian_norm: 0.0,
    })
}

#[derive(Debug, Clone)]
pub struct SimulateSummary {
    /// Step 0 followed by every completed step.
    pub reports: Vec<StepReport>,
    pub final_field: DistField,
    pub envelope: Option<EnvelopeReport>,
}

/// Runs the scenario, writing `steps.csv`, `macro.csv`, `final.bin` and the
/// requested `snapshot_NNNNNN.bin` files into `out_dir`.
pub fn cmd_simulate(scenario: &Scenario, out_dir: &Path) -> Result<SimulateSummary> {
    fs::create_dir_all(out_dir)?;
    let mut sim = scenario.simulation(scenario.grid.n_x, scenario.dt, true)?;
    let (params, dt) = (scenario.params, scenario.dt);
    let grid = sim.stepper().grid().clone();

    let mut steps = create(out_dir, "steps.csv")?;
    let mut macros = create(out_dir, "macro.csv")?;
    writeln!(steps, "{STEP_CSV_HEADER}")?;
    writeln!(macros, "{MACRO_CSV_HEADER}")?;

    let first = initial_report(sim.field(), &params)?;
    writeln!(steps, "{}", first.csv_row())?;
    write_macro_rows(&mut macros, 0.0, &grid, &compute_moments(sim.field(), &params, dt)?)?;
    let snapshot = |n: usize, field: &DistField| -> Result<()> {
        let file = create(out_dir, &format!("snapshot_{n:06}.bin"))?;
        write_snapshot(file, field, params.delta, params.q)
    };
    if scenario.snapshot_steps.first() == Some(&0) {
        snapshot(0, sim.field())?;
    }

    let mut monitor = match &scenario.envelope {
        Some(env) => {
            let mut m = EnvelopeMonitor::new(*env, &grid, &params, dt);
            m.certify_initial(sim.field())?;
            Some(m)
        }
        None => None,
    };
    let n_steps = scenario.n_steps;
    let mut observer = |event: &StepEvent<'_>| -> Result<()> {
        use crate::stepper::StepObserver;
        if let Some(m) = monitor.as_mut() {
            m.observe(event)?;
        }
        let level = event.n + 1;
        writeln!(steps, "{}", event.report.csv_row())?;
        let every = scenario.macro_every;
        if (every > 0 && level % every == 0) || level == n_steps {
            let m = compute_moments(event.f_next, &params, dt)?;
            write_macro_rows(&mut macros, event.report.time, &grid, &m)?;
        }
        if scenario.snapshot_steps.binary_search(&level).is_ok() {
            snapshot(level, event.f_next)?;
        }
        Ok(())
    };
    let mut reports = vec![first];
    reports.extend(sim.run(n_steps, &mut observer)?);
    steps.flush()?;
    macros.flush()?;
    write_snapshot(create(out_dir, "final.bin")?, sim.field(), params.delta, params.q)?;
    Ok(SimulateSummary {
        reports,
        final_field: sim.into_field(),
        envelope: monitor.map(EnvelopeMonitor::into_report),
    })
}

/// Runs every level and returns the convergence table in `Delta x`.
///
/// With relaxation, `Delta t = Delta x` and the reference is the run on
/// `reference` cells. Without relaxation, `Delta t` stays at the scenario
/// value and the error is measured against the exact transported data.
pub fn cmd_convergence(
    scenario: &Scenario,
    levels: &[usize],
    reference: Option<usize>,
    transport_only: bool,
) -> Result<ConvergenceTable> {
    if levels.len() < 3 {
        return Err(Error::validation("levels", "need at least 3 levels"));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::validation("levels", "must be strictly increasing"));
    }
    let t_final = scenario.t_final;
    let mut rows = Vec::with_capacity(levels.len());
    if transport_only {
        let dt = scenario.dt;
        for &n in levels {
            let mut sim = scenario.simulation(n, dt, false)?;
            sim.run(scenario.n_steps, &mut ())?;
            let grid = sim.stepper().grid().clone();
            let data = scenario.initial_data(&grid)?;
            let exact = DistField::sample(grid, t_final, |x, v, i| data.value(x, v, i))?;
            let err = error_sup_norm(sim.field(), &exact, scenario.params.q, scenario.params.delta)?;
            rows.push((1.0 / n as f64, err));
        }
    } else {
        let reference =
            reference.ok_or_else(|| Error::validation("reference", "required with relaxation"))?;
        let finest = *levels.last().unwrap_or(&0);
        if reference <= finest {
            return Err(Error::validation("reference", "must be finer than every level"));
        }
        let run = |n: usize| -> Result<DistField> {
            let dt = 1.0 / n as f64;
            let steps = step_count(t_final, dt).ok_or_else(|| {
                Error::validation("t_final", format!("not a multiple of dt = 1/{n}"))
            })?;
            let mut sim = scenario.simulation(n, dt, true)?;
            sim.run(steps, &mut ())?;
            Ok(sim.into_field())
        };
        for &n in levels {
            if reference % n != 0 {
                return Err(Error::validation(
                    "levels",
                    format!("{n} does not divide the reference {reference}"),
                ));
            }
        }
        let fine = run(reference)?;
        for &n in levels {
            let coarse = run(n)?;
            let err = error_sup_norm(
                &coarse,
                &fine.restrict(n)?,
                scenario.params.q,
                scenario.params.delta,
            )?;
            rows.push((1.0 / n as f64, err));
        }
    }
    observed_order(&rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub kappa: f64,
    /// Largest `||f^n||_q` over the run.
    pub max_norm: f64,
    /// `||f - M(f)||_q` at the final time.
    pub equilibrium_distance: f64,
    pub finite: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// Equilibrium distance non-increasing as `kappa` decreases.
    pub monotone: bool,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("kappa,max_norm_q,equilibrium_distance,finite\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:e},{:.17e},{:.17e},{}\n",
                r.kappa, r.max_norm, r.equilibrium_distance, r.finite
            ));
        }
        out
    }
}

/// Runs the scenario once per `kappa` at the scenario step size.
pub fn cmd_sweep(scenario: &Scenario, kappas: &[f64]) -> Result<SweepReport> {
    if kappas.is_empty() {
        return Err(Error::validation("kappa", "empty list"));
    }
    if let Some(k) = kappas.iter().find(|k| !(**k > 0.0 && k.is_finite())) {
        return Err(Error::validation("kappa", format!("{k} must be positive")));
    }
    let mut rows = Vec::with_capacity(kappas.len());
    for &kappa in kappas {
        let params = SchemeParams { kappa, ..scenario.params };
        let case = Scenario {
            params,
            ..scenario.clone()
        };
        let mut sim = case.simulation(case.grid.n_x, case.dt, true)?;
        let start = sim.field().weighted_sup_norm(params.q, params.delta);
        let reports = sim.run(case.n_steps, &mut ())?;
        let max_norm = reports.iter().map(|r| r.norm_q).fold(start, f64::max);
        let finite = sim.field().is_finite() && reports.iter().all(|r| r.conserved.is_finite());
        rows.push(SweepRow {
            kappa,
            max_norm,
            equilibrium_distance: equilibrium_distance(sim.field(), &params, case.dt)?,
            finite,
        });
    }
    let mut ordered = rows.clone();
    ordered.sort_by(|a, b| b.kappa.total_cmp(&a.kappa));
    let monotone = ordered
        .windows(2)
        .all(|w| w[1].equilibrium_distance <= w[0].equilibrium_distance);
    Ok(SweepReport { rows, monotone })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "n_x = 8\nn_v = 5\nn_i = 4\nnu = 0.5\ntheta = 0.8\ndelta = 2\nkappa = 1\n";

    #[test]
    fn minimal_file_gets_defaults() {
        let s: Scenario = MINIMAL.parse().unwrap();
        assert_eq!(s.params.q, 8.0);
        assert_eq!(s.grid.v_max, 8.0);
        assert_eq!(s.grid.i_max, 40.0);
        assert_eq!(s.dt, 0.01);
        assert_eq!(s.n_steps, 10);
        assert_eq!(
            s.initial,
            InitialCondition::Maxwellian(State {
                rho: 1.0,
                u: [0.0; 3],
                temperature: 1.0
            })
        );
        assert!(s.envelope.is_none());
    }

    #[test]
    fn validation_names_the_field() {
        let text = MINIMAL.replace("theta = 0.8", "theta = 0");
        match text.parse::<Scenario>() {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "theta"),
            other => panic!("{other:?}"),
        }
        let text = format!("{MINIMAL}t_final = 1\ndt = 0.3\n");
        match text.parse::<Scenario>() {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "t_final"),
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("n_v = 5\n", "");
        match text.parse::<Scenario>() {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "n_v"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = format!("{MINIMAL}\n# note\nbogus = 3\n");
        assert!(matches!(text.parse::<Scenario>(), Err(Error::Parse { line: 10, .. })));
        let text = format!("{MINIMAL}dt = fast\n");
        assert!(matches!(text.parse::<Scenario>(), Err(Error::Parse { line: 8, .. })));
        let text = format!("{MINIMAL}n_x = 9\n");
        assert!(matches!(text.parse::<Scenario>(), Err(Error::Parse { line: 8, .. })));
        assert!(matches!("no equals".parse::<Scenario>(), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn step_counts() {
        assert_eq!(step_count(1.0, 0.125), Some(8));
        assert_eq!(step_count(0.0, 0.1), Some(0));
        assert_eq!(step_count(0.1, 0.01), Some(10));
        assert_eq!(step_count(1.0, 0.3), None);
    }

    #[test]
    fn riemann_defaults_and_indicator() {
        let text = format!("{MINIMAL}initial = riemann\nrho_r = 0.5\n");
        let s: Scenario = text.parse().unwrap();
        let InitialCondition::Riemann { right, smoothing_cells, .. } = s.initial else {
            panic!("not riemann")
        };
        assert_eq!(right.rho, 0.5);
        assert_eq!(smoothing_cells, 2.0);
        let g = s.phase_grid(256).unwrap();
        let d = s.initial_data(&g).unwrap();
        assert!((d.inner_weight(0.25, 2.0) - 0.5).abs() < 1e-12);
        assert!(d.inner_weight(0.5, 2.0) > 1.0 - 1e-9);
        assert!(d.inner_weight(0.0, 2.0) < 1e-9);
        assert_eq!(d.inner_weight(0.3, 0.0), 1.0);
        let raw: Scenario = format!("{text}riemann_raw = true\n").parse().unwrap();
        assert!(matches!(raw.initial, InitialCondition::Riemann { smoothing_cells, .. } if smoothing_cells == 0.0));
    }

    #[test]
    fn perturbation_keys_and_velocity_default() {
        let text = format!("{MINIMAL}initial = perturbation\nt_l = 1\n");
        assert!(matches!(text.parse::<Scenario>(), Err(Error::Parse { line: 9, .. })));
        let text = format!("{MINIMAL}initial = perturbation\nalpha = 0.1\nu = 1, 0, 0\n");
        let s: Scenario = text.parse().unwrap();
        assert_eq!(s.grid.v_max, 9.0);
    }

    #[test]
    fn sweep_and_convergence_reject_bad_lists() {
        let s: Scenario = MINIMAL.parse().unwrap();
        assert!(matches!(cmd_sweep(&s, &[]), Err(Error::Validation { .. })));
        assert!(matches!(cmd_sweep(&s, &[1.0, 0.0]), Err(Error::Validation { .. })));
        assert!(matches!(
            cmd_convergence(&s, &[8, 8, 16], Some(32), false),
            Err(Error::Validation { .. })
        ));
        assert!(matches!(
            cmd_convergence(&s, &[8, 16], Some(32), false),
            Err(Error::Validation { .. })
        ));
    }
}
