//! The internal-energy grid `I_k = k dI` turns every energy moment of a
//! Gaussian into a finite geometric sum (delta = 2). These tests freeze the
//! closed forms of those sums and check the solver against them.

use std::sync::Arc;

use polykin::moments::MacroCell;
use polykin::params::normalizer_continuous;
use polykin::{
    compute_moments, conserved_quantities, eval_gaussian, normalizer_discrete, step, DistField,
    GridConfig, PhaseGrid, SchemeParams,
};

/// `(sum_k r^k, dI sum_k k r^k)` for `k < n`, `r = exp(-dI / t)`.
fn geometric(n: usize, di: f64, t: f64) -> (f64, f64) {
    let r = (-di / t).exp();
    let rn = r.powi(n as i32);
    let s0 = (1.0 - rn) / (1.0 - r);
    let s1 = di * r * (1.0 - n as f64 * r.powi(n as i32 - 1) + (n as f64 - 1.0) * rn)
        / ((1.0 - r) * (1.0 - r));
    (s0, s1)
}

fn grid(n_v: usize, n_i: usize, i_max: f64) -> Arc<PhaseGrid> {
    Arc::new(
        PhaseGrid::new(GridConfig {
            n_x: 2,
            n_v,
            v_max: 8.0,
            n_i,
            i_max,
        })
        .unwrap(),
    )
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// Isotropic Gaussian with `T_theta = t` and tensor `t Id`, on both cells.
fn isotropic(g: &Arc<PhaseGrid>, t: f64) -> DistField {
    let params = SchemeParams::with_default_q(0.0, 1.0, 2.0, 1.0).unwrap();
    let cell = MacroCell::from_primary(1.0, [0.0; 3], [[t, 0.0, 0.0], [0.0, t, 0.0], [0.0, 0.0, t]], t, &params, 1.0, 0.0);
    let lambda = normalizer_discrete(2.0, g.energy_nodes(), g.di).unwrap();
    let block = eval_gaussian(&cell, g, 2.0, lambda).unwrap();
    DistField::from_values(g.clone(), [block.clone(), block].concat()).unwrap()
}

#[test]
fn normalizer_is_a_geometric_sum() {
    for (n, i_max) in [(16, 12.0), (256, 40.0), (1000, 5.0)] {
        let g = grid(3, n, i_max);
        let (s0, _) = geometric(n, g.di, 1.0);
        let lambda = normalizer_discrete(2.0, g.energy_nodes(), g.di).unwrap();
        assert!(rel(lambda, 1.0 / (g.di * s0)) < 1e-13, "n={n}");
    }
}

#[test]
fn normalizer_fine_grid_matches_unit_integral() {
    let n = 1 << 25;
    let g = grid(2, n, 40.0);
    let lambda = normalizer_discrete(2.0, g.energy_nodes(), g.di).unwrap();
    assert!((lambda - 1.0).abs() < 1e-6, "{lambda}");
}

#[test]
fn normalizer_converges_at_first_order() {
    // delta = 1: 1/Lambda = Gamma(3/2).
    let exact = 1.0 / normalizer_continuous(1.0);
    assert!((exact - 0.886_226_925_452_758).abs() < 1e-14);
    let err = |n: usize| {
        let g = grid(2, n, 8.0);
        (1.0 / normalizer_discrete(1.0, g.energy_nodes(), g.di).unwrap() - exact).abs()
    };
    let (e1, e2, e3) = (err(200), err(400), err(800));
    for ratio in [e2 / e1, e3 / e2] {
        assert!((ratio - 0.5).abs() < 0.02, "{ratio}");
    }
}

#[test]
fn gaussian_moments_match_closed_forms() {
    let g = grid(33, 256, 40.0);
    let params = SchemeParams::with_default_q(0.0, 1.0, 2.0, 1.0).unwrap();
    let (base, _) = geometric(256, g.di, 1.0);
    for t in [1.0, 0.8, 0.6] {
        let f = isotropic(&g, t);
        let m = &compute_moments(&f, &params, 0.01).unwrap()[0];
        let (s0, s1) = geometric(256, g.di, t);
        let rho = s0 / (base * t);
        assert!(rel(m.rho, rho) < 1e-12, "t={t}: rho {} vs {rho}", m.rho);
        assert!(rel(m.t_tr, t) < 1e-12, "t={t}");
        assert!(rel(m.t_int, s1 / s0) < 1e-12, "t={t}");
        assert!(m.u.iter().all(|c| c.abs() < 1e-14));
    }
    // At t = 1 the discrete normalizer makes the density exact while the
    // internal temperature still carries the rectangle-rule defect.
    let m = &compute_moments(&isotropic(&g, 1.0), &params, 0.01).unwrap()[0];
    assert!((m.rho - 1.0).abs() < 1e-13);
    let di = g.di;
    assert!(rel(m.t_int, di / (di.exp() - 1.0)) < 1e-12);
    assert!(m.t_delta < 1.0 - 0.03);
}

#[test]
fn one_relaxation_step_moves_moments_by_the_oracle_defect() {
    let g = grid(33, 256, 40.0);
    let t = 0.7;
    let (kappa, dt) = (0.5, 0.1);
    let params = SchemeParams::with_default_q(0.0, 1.0, 2.0, kappa).unwrap();
    let f = isotropic(&g, t);
    let (out, report) = step(&f, &params, dt).unwrap();

    let n = g.n_i;
    let (base, _) = geometric(n, g.di, 1.0);
    let (s0, s1) = geometric(n, g.di, t);
    let rho = s0 / (base * t);
    let t_int = s1 / s0;
    let t_delta = (3.0 * t + 2.0 * t_int) / 5.0;
    let (m0, m1) = geometric(n, g.di, t_delta);
    let rho_m = rho * m0 / (base * t_delta);
    let (keep, gain) = (kappa / (kappa + dt), dt / (kappa + dt));

    // Both cells carry the same state and dx = 1/2.
    let c0 = conserved_quantities(&f, 2.0);
    let c1 = conserved_quantities(&out, 2.0);
    assert!(rel(c0.mass, rho) < 1e-12);
    assert!(rel(c1.mass, keep * rho + gain * rho_m) < 1e-12);
    let energy = |r: f64, t_v: f64, t_i: f64| r * (1.5 * t_v + t_i);
    let e_m = energy(rho_m, t_delta, m1 / m0);
    assert!(rel(c1.energy, keep * energy(rho, t, t_int) + gain * e_m) < 1e-12);
    assert!(c1.momentum_norm() < 1e-14);
    assert!(rel(report.defect.mass, c1.mass - c0.mass) < 1e-9);
}
