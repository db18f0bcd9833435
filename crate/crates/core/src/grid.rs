//! Phase-space discretization: periodic unit interval in space, a truncated
//! velocity cube with equal spacing on all axes, and a uniform half-line grid
//! in the internal-energy variable.

use crate::error::{Error, Result};

/// Sizes used to build a [`PhaseGrid`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub n_x: usize,
    /// Velocity nodes per axis.
    pub n_v: usize,
    pub v_max: f64,
    pub n_i: usize,
    pub i_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    pub n_x: usize,
    pub dx: f64,
    pub n_v: usize,
    pub v_max: f64,
    pub dv: f64,
    pub n_i: usize,
    pub i_max: f64,
    pub di: f64,
    axis: Vec<f64>,
    energy: Vec<f64>,
}

/// Backward-characteristic foot of a spatial node: the lower interpolation
/// cell `s` and the weight `a` carried by it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FootWeight {
    pub s: usize,
    pub a: f64,
}

impl PhaseGrid {
    pub fn new(config: GridConfig) -> Result<Self> {
        let GridConfig {
            n_x,
            n_v,
            v_max,
            n_i,
            i_max,
        } = config;
        if n_x < 2 {
            return Err(Error::InvalidConfig(format!("n_x = {n_x}, need at least 2")));
        }
        if n_v < 2 {
            return Err(Error::InvalidConfig(format!(
                "n_v = {n_v}, need at least 2 velocity nodes per axis"
            )));
        }
        if n_i < 1 {
            return Err(Error::InvalidConfig("n_i must be positive".into()));
        }
        if !(v_max > 0.0 && v_max.is_finite()) {
            return Err(Error::InvalidConfig(format!("v_max = {v_max}, must be positive")));
        }
        if !(i_max > 0.0 && i_max.is_finite()) {
            return Err(Error::InvalidConfig(format!("i_max = {i_max}, must be positive")));
        }
        let dv = 2.0 * v_max / (n_v - 1) as f64;
        let di = i_max / n_i as f64;
        // Symmetric by construction: node m and node n_v-1-m carry opposite values.
        let half = (n_v - 1) as f64 / 2.0;
        let axis = (0..n_v).map(|m| (m as f64 - half) * dv).collect();
        let energy = (0..n_i).map(|k| k as f64 * di).collect();
        Ok(PhaseGrid {
            n_x,
            dx: 1.0 / n_x as f64,
            n_v,
            v_max,
            dv,
            n_i,
            i_max,
            di,
            axis,
            energy,
        })
    }

    pub fn config(&self) -> GridConfig {
        GridConfig {
            n_x: self.n_x,
            n_v: self.n_v,
            v_max: self.v_max,
            n_i: self.n_i,
            i_max: self.i_max,
        }
    }

    /// Same velocity and energy grids with a different number of spatial cells.
    pub fn with_n_x(&self, n_x: usize) -> Result<Self> {
        Self::new(GridConfig {
            n_x,
            ..self.config()
        })
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }

    /// Velocity nodes along one axis.
    pub fn axis(&self) -> &[f64] {
        &self.axis
    }

    /// Energy nodes `I_k = k dI`.
    pub fn energy_nodes(&self) -> &[f64] {
        &self.energy
    }

    /// Number of velocity nodes in the cube.
    #[inline]
    pub fn n_vel(&self) -> usize {
        self.n_v * self.n_v * self.n_v
    }

    /// Number of `(velocity, energy)` nodes per spatial cell.
    #[inline]
    pub fn cell_len(&self) -> usize {
        self.n_vel() * self.n_i
    }

    /// Total number of phase-space nodes.
    #[inline]
    pub fn len(&self) -> usize {
        self.n_x * self.cell_len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Splits a flat velocity index into its three axis indices.
    #[inline]
    pub fn velocity_indices(&self, j: usize) -> [usize; 3] {
        let n = self.n_v;
        [j / (n * n), (j / n) % n, j % n]
    }

    #[inline]
    pub fn velocity(&self, j: usize) -> [f64; 3] {
        let [a, b, c] = self.velocity_indices(j);
        [self.axis[a], self.axis[b], self.axis[c]]
    }

    /// Velocity node reflected through the origin.
    #[inline]
    pub fn mirror_velocity(&self, j: usize) -> usize {
        self.n_vel() - 1 - j
    }

    /// Flat storage index of node `(i, j, k)`; space outermost, energy innermost.
    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_vel() + j) * self.n_i + k
    }

    /// Quadrature weight `(dv)^3 dI` of one velocity-energy node.
    #[inline]
    pub fn node_volume(&self) -> f64 {
        self.dv * self.dv * self.dv * self.di
    }

    /// Quadrature weight `dx (dv)^3 dI` of one phase-space node.
    #[inline]
    pub fn phase_volume(&self) -> f64 {
        self.dx * self.node_volume()
    }

    /// Foot of the backward characteristic through `x_i` for the horizontal
    /// velocity `vj1` over one step `dt`.
    pub fn foot(&self, i: usize, vj1: f64, dt: f64) -> FootWeight {
        let (offset, a) = self.foot_offset(vj1, dt);
        FootWeight {
            s: wrap(i as isize + offset, self.n_x),
            a,
        }
    }

    /// The node-independent part of the foot: `s = i + offset (mod n_x)` and
    /// the weight `a`, which depends on the velocity alone.
    pub fn foot_offset(&self, vj1: f64, dt: f64) -> (isize, f64) {
        // Foot measured in cells relative to x_i: y/dx = i - c.
        let c = vj1 * dt * self.n_x as f64;
        let lower = (-c).floor();
        // a = x_{s+1}/dx - y/dx = lower + 1 + c, in (0, 1].
        let a = (lower + 1.0) + c;
        (lower as isize, a)
    }
}

#[inline]
pub(crate) fn wrap(idx: isize, n: usize) -> usize {
    idx.rem_euclid(n as isize) as usize
}
