//! Model parameters and the scalar constants derived from them.

use crate::error::{Error, Result};
use crate::grid::PhaseGrid;
use crate::sum::pairwise_sum;

/// Parameters of the polyatomic ES-BGK model and of the error norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    /// Prandtl-fitting parameter, `-1/2 < nu < 1`.
    pub nu: f64,
    /// Relaxation-mixing parameter, `0 < theta <= 1`.
    pub theta: f64,
    /// Number of internal degrees of freedom.
    pub delta: f64,
    /// Knudsen number.
    pub kappa: f64,
    /// Weight exponent of the `L^inf_q` norm, `q > 5 + delta`.
    pub q: f64,
}

impl SchemeParams {
    pub fn new(nu: f64, theta: f64, delta: f64, kappa: f64, q: f64) -> Result<Self> {
        let params = SchemeParams {
            nu,
            theta,
            delta,
            kappa,
            q,
        };
        params.validate()?;
        Ok(params)
    }

    /// Same as [`SchemeParams::new`] with the default norm weight `q = 6 + delta`.
    pub fn with_default_q(nu: f64, theta: f64, delta: f64, kappa: f64) -> Result<Self> {
        Self::new(nu, theta, delta, kappa, default_q(delta))
    }

    pub fn validate(&self) -> Result<()> {
        check_nu_theta(self.nu, self.theta)?;
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::OutOfRange {
                name: "delta",
                value: self.delta,
                rule: "delta > 0",
            });
        }
        check_kappa(self.kappa)?;
        if !(self.q > 5.0 + self.delta && self.q.is_finite()) {
            return Err(Error::OutOfRange {
                name: "q",
                value: self.q,
                rule: "q > 5 + delta",
            });
        }
        if self.delta > 2.0 {
            log::warn!(
                "delta = {} exceeds 2; the scheme is well defined but the convergence estimate does not cover it",
                self.delta
            );
        }
        Ok(())
    }

    pub fn collision_frequency(&self) -> f64 {
        1.0 / (1.0 - self.nu + self.nu * self.theta)
    }

    /// Constants that depend on the time step and on the energy grid.
    pub fn derived(&self, dt: f64, grid: &PhaseGrid) -> Result<DerivedConstants> {
        let (lambda, nu_bar) = blend_factors(self.nu, self.theta, self.kappa, dt)?;
        Ok(DerivedConstants {
            a_nutheta: self.collision_frequency(),
            lambda,
            nu_bar,
            lambda_delta: normalizer_discrete(self.delta, grid.energy_nodes(), grid.di)?,
            dt,
        })
    }
}

pub fn default_q(delta: f64) -> f64 {
    6.0 + delta
}

/// Step-dependent constants shared by every cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    /// Collision frequency `A = 1 / (1 - nu + nu theta)`.
    pub a_nutheta: f64,
    /// Blend factor of the isotropic part of the temperature tensor.
    pub lambda: f64,
    /// Blend factor of the stress tensor.
    pub nu_bar: f64,
    /// Discrete normalizer of the internal-energy density.
    pub lambda_delta: f64,
    pub dt: f64,
}

impl DerivedConstants {
    /// Convex weights `(kappa / (kappa + A dt), A dt / (kappa + A dt))` of the
    /// implicit relaxation update.
    pub fn relaxation_weights(&self, kappa: f64) -> (f64, f64) {
        let gain = self.a_nutheta * self.dt;
        let denom = kappa + gain;
        (kappa / denom, gain / denom)
    }
}

fn check_nu_theta(nu: f64, theta: f64) -> Result<()> {
    if !(nu > -0.5 && nu < 1.0) {
        return Err(Error::OutOfRange {
            name: "nu",
            value: nu,
            rule: "-1/2 < nu < 1",
        });
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::OutOfRange {
            name: "theta",
            value: theta,
            rule: "0 < theta <= 1",
        });
    }
    Ok(())
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::OutOfRange {
            name: "kappa",
            value: kappa,
            rule: "kappa > 0",
        });
    }
    Ok(())
}

/// Collision frequency `A_{nu,theta} = 1 / (1 - nu + nu theta)`.
pub fn collision_frequency(nu: f64, theta: f64) -> Result<f64> {
    check_nu_theta(nu, theta)?;
    Ok(1.0 / (1.0 - nu + nu * theta))
}

/// Returns `(lambda, nu_bar)` with
/// `lambda = (kappa + A dt) / (dt + kappa)` and `nu_bar = kappa nu / (dt + kappa)`.
pub fn blend_factors(nu: f64, theta: f64, kappa: f64, dt: f64) -> Result<(f64, f64)> {
    let a = collision_frequency(nu, theta)?;
    check_kappa(kappa)?;
    if !(dt >= 0.0 && dt.is_finite()) {
        return Err(Error::OutOfRange {
            name: "dt",
            value: dt,
            rule: "dt >= 0",
        });
    }
    let denom = dt + kappa;
    Ok(((kappa + a * dt) / denom, kappa * nu / denom))
}

/// Internal energy `I^(2/delta)` carried by an energy node.
#[inline]
pub fn internal_energy(i: f64, delta: f64) -> f64 {
    if delta == 2.0 {
        i
    } else {
        i.powf(2.0 / delta)
    }
}

/// Discrete normalizer `Lambda_delta` with `1/Lambda_delta = sum_k exp(-I_k^(2/delta)) dI`.
pub fn normalizer_discrete(delta: f64, nodes: &[f64], di: f64) -> Result<f64> {
    if nodes.is_empty() || !(di > 0.0) {
        return Err(Error::DegenerateGrid(
            "energy grid must be nonempty with positive spacing".into(),
        ));
    }
    let terms: Vec<f64> = nodes
        .iter()
        .map(|&i| (-internal_energy(i, delta)).exp())
        .collect();
    let inv = pairwise_sum(&terms) * di;
    if !(inv > 0.0) || !inv.is_finite() {
        return Err(Error::DegenerateGrid(format!(
            "normalizer sum is {inv:e}"
        )));
    }
    Ok(1.0 / inv)
}

/// Continuous normalizer: `1/Lambda_delta = Gamma(1 + delta/2)`.
///
/// Only used as a cross-check of [`normalizer_discrete`].
pub fn normalizer_continuous(delta: f64) -> f64 {
    1.0 / libm::tgamma(1.0 + 0.5 * delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collision_frequency_examples() {
        assert_eq!(collision_frequency(0.0, 0.7).unwrap(), 1.0);
        assert_eq!(collision_frequency(0.5, 1.0).unwrap(), 1.0);
        let a = collision_frequency(-0.25, 0.5).unwrap();
        assert!((a - 1.0 / 1.125).abs() < 1e-15);
        assert!((a - 0.888_888_888_888_888_9).abs() < 1e-15);
    }

    #[test]
    fn collision_frequency_rejects_bounds() {
        assert!(collision_frequency(-0.5, 0.5).is_err());
        assert!(collision_frequency(1.0, 0.5).is_err());
        assert!(collision_frequency(0.2, 0.0).is_err());
        assert!(collision_frequency(0.2, 1.01).is_err());
        assert!(collision_frequency(f64::NAN, 0.5).is_err());
    }

    #[test]
    fn blend_factor_examples() {
        assert_eq!(blend_factors(0.3, 0.4, 0.7, 0.0).unwrap(), (1.0, 0.3));
        let (lambda, _) = blend_factors(0.0, 0.37, 2.0, 0.9).unwrap();
        assert_eq!(lambda, 1.0);
        let (lambda, nu_bar) = blend_factors(0.5, 0.5, 0.1, 0.1).unwrap();
        assert!((lambda - 7.0 / 6.0).abs() < 1e-14);
        assert!((nu_bar - 0.25).abs() < 1e-15);
        assert!(blend_factors(0.5, 0.5, 0.0, 0.1).is_err());
        assert!(blend_factors(0.5, 0.5, 1.0, -0.1).is_err());
    }

    #[test]
    fn blend_factor_limits_and_monotonicity() {
        for &(nu, theta) in &[(-0.4, 0.3), (0.0, 0.5), (0.5, 0.5), (0.9, 0.1)] {
            let a = collision_frequency(nu, theta).unwrap();
            let kappa = 0.3;
            let (l_big, nb_big) = blend_factors(nu, theta, kappa, 1e12).unwrap();
            assert!((l_big - a).abs() < 1e-9);
            assert!(nb_big.abs() < 1e-9);
            let mut prev = blend_factors(nu, theta, kappa, 0.0).unwrap();
            for n in 1..200 {
                let dt = 0.01 * n as f64;
                let cur = blend_factors(nu, theta, kappa, dt).unwrap();
                if a >= 1.0 {
                    assert!(cur.0 >= prev.0);
                } else {
                    assert!(cur.0 <= prev.0);
                }
                assert!(cur.1.abs() <= prev.1.abs());
                assert!(cur.1 * nu >= 0.0);
                assert!(cur.0 >= 1.0f64.min(kappa / (dt + kappa)));
                prev = cur;
            }
        }
    }

    #[test]
    fn unit_collision_frequency_exactly_when_nu_zero_or_theta_one() {
        for &nu in &[-0.45, -0.1, 0.0, 0.3, 0.95] {
            for &theta in &[0.05, 0.5, 1.0] {
                let a = collision_frequency(nu, theta).unwrap();
                assert!(a > 0.0);
                assert_eq!(a == 1.0, nu == 0.0 || theta == 1.0, "nu={nu} theta={theta}");
            }
        }
    }

    #[test]
    fn single_node_normalizer() {
        assert_eq!(normalizer_discrete(1.3, &[0.0], 1.0).unwrap(), 1.0);
        assert!(normalizer_discrete(2.0, &[], 1.0).is_err());
        assert!(normalizer_discrete(2.0, &[0.0], 0.0).is_err());
    }

    #[test]
    fn continuous_normalizer_values() {
        assert!((normalizer_continuous(2.0) - 1.0).abs() < 1e-14);
        assert!((1.0 / normalizer_continuous(1.0) - 0.886_226_925_452_758).abs() < 1e-14);
    }

    #[test]
    fn validation_rules() {
        assert!(SchemeParams::new(0.5, 0.8, 2.0, 1.0, 8.0).is_ok());
        assert!(SchemeParams::new(0.5, 0.8, 2.0, 1.0, 7.0).is_err());
        assert!(SchemeParams::new(0.5, 0.0, 2.0, 1.0, 8.0).is_err());
        assert!(SchemeParams::new(0.5, 0.8, 0.0, 1.0, 8.0).is_err());
        assert!(SchemeParams::new(0.5, 0.8, 2.0, 0.0, 8.0).is_err());
        // accepted with a warning
        assert!(SchemeParams::new(0.5, 0.8, 3.0, 1.0, 9.0).is_ok());
        assert_eq!(SchemeParams::with_default_q(0.0, 1.0, 2.0, 1.0).unwrap().q, 8.0);
    }

    #[test]
    fn relaxation_weights_are_convex() {
        let d = DerivedConstants {
            a_nutheta: 1.0,
            lambda: 1.0,
            nu_bar: 0.0,
            lambda_delta: 1.0,
            dt: 1.0,
        };
        assert_eq!(d.relaxation_weights(1.0), (0.5, 0.5));
    }
}
