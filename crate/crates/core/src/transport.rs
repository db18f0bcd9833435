//! Semi-Lagrangian transport along `x`: each node takes the periodic linear
//! interpolation of the field at the foot of its backward characteristic.
//!
//! On a uniform grid the foot offset and weight depend on the horizontal
//! velocity only, so advection reduces to two weighted circular shifts per
//! velocity slice.

use rayon::prelude::*;

use crate::field::DistField;
use crate::grid::{wrap, PhaseGrid};

/// Foot offsets and weights for one `(grid, dt)` pair, indexed by the first
/// velocity axis.
#[derive(Debug, Clone, PartialEq)]
pub struct AdvectionPlan {
    dt: f64,
    n_x: usize,
    shifts: Vec<(isize, f64)>,
}

impl AdvectionPlan {
    pub fn new(grid: &PhaseGrid, dt: f64) -> Self {
        let shifts = grid
            .axis()
            .iter()
            .map(|&v1| grid.foot_offset(v1, dt))
            .collect();
        AdvectionPlan {
            dt,
            n_x: grid.n_x,
            shifts,
        }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `(offset, a)` for the first-axis velocity index.
    pub fn shift(&self, axis_index: usize) -> (isize, f64) {
        self.shifts[axis_index]
    }

    /// Writes the advected `src` into `dst`. Both must live on the grid the
    /// plan was built for.
    pub fn apply(&self, src: &DistField, dst: &mut DistField) {
        let grid = src.grid();
        assert_eq!(grid.n_x, self.n_x, "advection plan built for another grid");
        assert!(src.same_grid(dst), "advection buffers on different grids");
        let cell_len = grid.cell_len();
        let slab = grid.n_v * grid.n_v * grid.n_i;
        let n_x = grid.n_x;
        let values = src.values();
        dst.values_mut()
            .par_chunks_mut(cell_len)
            .enumerate()
            .for_each(|(i, out)| {
                // All velocities with the same first component share the
                // same foot, and they form one contiguous slab per cell.
                for (j1, out_slab) in out.chunks_exact_mut(slab).enumerate() {
                    let (offset, a) = self.shifts[j1];
                    let s = wrap(i as isize + offset, n_x);
                    let s1 = if s + 1 == n_x { 0 } else { s + 1 };
                    let lo = &values[s * cell_len + j1 * slab..][..slab];
                    if a == 1.0 {
                        out_slab.copy_from_slice(lo);
                    } else {
                        let hi = &values[s1 * cell_len + j1 * slab..][..slab];
                        let b = 1.0 - a;
                        // Clamp: round-off may push a convex combination one
                        // ulp outside its endpoints.
                        for ((o, &x), &y) in out_slab.iter_mut().zip(lo).zip(hi) {
                            *o = (a * x + b * y).min(x.max(y)).max(x.min(y));
                        }
                    }
                }
            });
    }
}

/// Semi-Lagrangian advection of `field` over one step of length `dt`.
pub fn advect(field: &DistField, dt: f64) -> DistField {
    let plan = AdvectionPlan::new(field.grid(), dt);
    let mut out = DistField::zeros(field.grid_handle().clone());
    plan.apply(field, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::LqWeights;
    use crate::grid::GridConfig;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn grid(n_x: usize) -> Arc<PhaseGrid> {
        Arc::new(
            PhaseGrid::new(GridConfig {
                n_x,
                n_v: 5,
                v_max: 2.0,
                n_i: 3,
                i_max: 3.0,
            })
            .unwrap(),
        )
    }

    fn bumpy(g: Arc<PhaseGrid>) -> DistField {
        DistField::sample(g, 0.0, |x, v, i| {
            (1.2 + (6.283185307179586 * x).sin()) * (-0.5 * (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]) - i).exp()
                + 0.01 * v[0].abs()
        })
        .unwrap()
    }

    #[test]
    fn zero_step_is_identity() {
        let f = bumpy(grid(8));
        assert_eq!(advect(&f, 0.0), f);
    }

    #[test]
    fn uniform_field_is_unchanged() {
        let g = grid(6);
        let f = DistField::sample(g, 0.0, |_, v, i| (-(v[0] * v[0]) - i).exp()).unwrap();
        let out = advect(&f, 0.037);
        for (a, b) in out.values().iter().zip(f.values()) {
            assert!((a - b).abs() <= 2.0 * f64::EPSILON * b);
        }
    }

    #[test]
    fn integer_cell_shift_is_a_rotation() {
        // dv = 1, n_x = 8: v dt = m dx for dt = 1/8.
        let g = grid(8);
        let f = bumpy(g.clone());
        let out = advect(&f, 0.125);
        for i in 0..8 {
            for j in 0..g.n_vel() {
                let m = g.velocity(j)[0] as isize;
                let src = wrap(i as isize - m, 8);
                for k in 0..g.n_i {
                    assert_eq!(out.get(i, j, k), f.get(src, j, k));
                }
            }
        }
    }

    #[test]
    fn matches_pointwise_definition() {
        let g = grid(7);
        let f = bumpy(g.clone());
        let dt = 0.0913;
        let out = advect(&f, dt);
        for i in 0..7 {
            for j in 0..g.n_vel() {
                let foot = g.foot(i, g.velocity(j)[0], dt);
                for k in 0..g.n_i {
                    let (x, y) = (f.get(foot.s, j, k), f.get((foot.s + 1) % 7, j, k));
                    let e = foot.a * x + (1.0 - foot.a) * y;
                    assert!((out.get(i, j, k) - e).abs() <= 2.0 * f64::EPSILON * x.max(y));
                }
            }
        }
    }

    fn arb_field() -> impl Strategy<Value = (Vec<f64>, f64)> {
        let n = grid(5).len();
        (proptest::collection::vec(0.0..3.0f64, n), 0.0..0.7f64)
    }

    proptest! {
        #[test]
        fn max_principle_positivity_and_slice_mass((values, dt) in arb_field()) {
            let g = grid(5);
            let f = DistField::from_values(g.clone(), values).unwrap();
            let out = advect(&f, dt);
            let w = LqWeights::new(&g, 8.0, 2.0);
            prop_assert!(w.norm(&out) <= w.norm(&f));
            prop_assert!(out.min_value() >= 0.0);
            for j in 0..g.n_vel() {
                for k in 0..g.n_i {
                    let before: f64 = (0..5).map(|i| f.get(i, j, k)).sum();
                    let after: f64 = (0..5).map(|i| out.get(i, j, k)).sum();
                    prop_assert!((before - after).abs() <= 1e-13 * before.max(1.0));
                    let min_before = (0..5).map(|i| f.get(i, j, k)).fold(f64::INFINITY, f64::min);
                    let min_after = (0..5).map(|i| out.get(i, j, k)).fold(f64::INFINITY, f64::min);
                    prop_assert!(min_after >= min_before);
                }
            }
        }
    }
}
