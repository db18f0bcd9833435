//! Discrete distribution `f_{i,j,k}` on the phase grid, weighted sup norms and
//! the binary snapshot format.
//!
//! Layout: space outermost, then the flat velocity index, energy innermost.
//! A spatial cell is one contiguous block of `grid.cell_len()` values.

use std::io::{Read, Write};
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridConfig, PhaseGrid};
use crate::params::internal_energy;

#[derive(Debug, Clone, PartialEq)]
pub struct DistField {
    grid: Arc<PhaseGrid>,
    values: Vec<f64>,
}

impl DistField {
    pub fn zeros(grid: Arc<PhaseGrid>) -> Self {
        let values = vec![0.0; grid.len()];
        DistField { grid, values }
    }

    pub fn from_values(grid: Arc<PhaseGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidConfig(format!(
                "field has {} values, grid expects {}",
                values.len(),
                grid.len()
            )));
        }
        Ok(DistField { grid, values })
    }

    /// Samples `f0(x, v, I)` at the feet `x_i - v^1 shift_dt` of every node.
    ///
    /// `shift_dt = 0` gives `f^0`; `shift_dt = dt` gives the exactly sampled
    /// `f~^0` used by the first step.
    pub fn sample<F>(grid: Arc<PhaseGrid>, shift_dt: f64, f0: F) -> Result<Self>
    where
        F: Fn(f64, [f64; 3], f64) -> f64 + Sync,
    {
        let mut field = Self::zeros(grid.clone());
        let cell_len = grid.cell_len();
        let n_i = grid.n_i;
        let energies = grid.energy_nodes();
        field
            .values
            .par_chunks_mut(cell_len)
            .enumerate()
            .for_each(|(i, cell)| {
                for (j, row) in cell.chunks_mut(n_i).enumerate() {
                    let v = grid.velocity(j);
                    let x = (grid.x(i) - v[0] * shift_dt).rem_euclid(1.0);
                    for (value, &energy) in row.iter_mut().zip(energies) {
                        *value = f0(x, v, energy);
                    }
                }
            });
        if let Some(pos) = field.values.iter().position(|&v| !(v >= 0.0)) {
            let (i, j, k) = field.node_of(pos);
            return Err(Error::NegativeInitialData {
                i,
                j,
                k,
                value: field.values[pos],
            });
        }
        Ok(field)
    }

    pub fn grid(&self) -> &PhaseGrid {
        &self.grid
    }

    pub fn grid_handle(&self) -> &Arc<PhaseGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.grid.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        let idx = self.grid.index(i, j, k);
        self.values[idx] = value;
    }

    /// Contiguous `(j, k)` block of spatial cell `i`.
    pub fn cell(&self, i: usize) -> &[f64] {
        let n = self.grid.cell_len();
        &self.values[i * n..(i + 1) * n]
    }

    pub fn cell_mut(&mut self, i: usize) -> &mut [f64] {
        let n = self.grid.cell_len();
        &mut self.values[i * n..(i + 1) * n]
    }

    /// `(i, j, k)` of a flat index.
    pub fn node_of(&self, pos: usize) -> (usize, usize, usize) {
        let n_i = self.grid.n_i;
        let n_vel = self.grid.n_vel();
        (pos / (n_vel * n_i), (pos / n_i) % n_vel, pos % n_i)
    }

    pub fn same_grid(&self, other: &DistField) -> bool {
        Arc::ptr_eq(&self.grid, &other.grid) || *self.grid == *other.grid
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, c: f64) {
        self.values.iter_mut().for_each(|v| *v *= c);
    }

    /// Keeps every `stride`-th spatial cell, where `stride = n_x / coarse_n_x`.
    ///
    /// The coarse nodes `x_i = i / coarse_n_x` are a subset of the fine ones,
    /// so no interpolation is involved.
    pub fn restrict(&self, coarse_n_x: usize) -> Result<DistField> {
        let n_x = self.grid.n_x;
        if coarse_n_x == 0 || n_x % coarse_n_x != 0 {
            return Err(Error::InvalidConfig(format!(
                "cannot restrict {n_x} cells to {coarse_n_x}"
            )));
        }
        let stride = n_x / coarse_n_x;
        let coarse = Arc::new(self.grid.with_n_x(coarse_n_x)?);
        let mut values = Vec::with_capacity(coarse.len());
        for i in 0..coarse_n_x {
            values.extend_from_slice(self.cell(i * stride));
        }
        DistField::from_values(coarse, values)
    }

    /// `sup |f| (1 + |v|^2 + I^(2/delta))^(q/2)`.
    pub fn weighted_sup_norm(&self, q: f64, delta: f64) -> f64 {
        LqWeights::new(&self.grid, q, delta).norm(self)
    }
}

/// `(1 + |v_j|^2 + I_k^(2/delta))^(q/2)` tabulated over one spatial cell.
#[derive(Debug, Clone)]
pub struct LqWeights {
    q: f64,
    delta: f64,
    table: Vec<f64>,
}

impl LqWeights {
    pub fn new(grid: &PhaseGrid, q: f64, delta: f64) -> Self {
        let half_q = 0.5 * q;
        let eps: Vec<f64> = grid
            .energy_nodes()
            .iter()
            .map(|&i| internal_energy(i, delta))
            .collect();
        let mut table = Vec::with_capacity(grid.cell_len());
        for j in 0..grid.n_vel() {
            let v = grid.velocity(j);
            let v2 = v[0] * v[0] + v[1] * v[1] + v[2] * v[2];
            table.extend(eps.iter().map(|&e| (1.0 + v2 + e).powf(half_q)));
        }
        LqWeights { q, delta, table }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Weight of the `(j, k)` node at flat in-cell offset `jk`.
    #[inline]
    pub fn at(&self, jk: usize) -> f64 {
        self.table[jk]
    }

    pub fn table(&self) -> &[f64] {
        &self.table
    }

    pub fn norm(&self, field: &DistField) -> f64 {
        self.norm_of_cells(field.values())
    }

    /// Norm of a slice made of whole cells.
    pub fn norm_of_cells(&self, values: &[f64]) -> f64 {
        let n = self.table.len();
        values
            .par_chunks(n)
            .map(|cell| {
                cell.iter()
                    .zip(&self.table)
                    .fold(0.0_f64, |m, (f, w)| m.max(f.abs() * w))
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Weighted sup norm of `a - b`, without materializing the difference.
    pub fn error_norm(&self, a: &DistField, b: &DistField) -> Result<f64> {
        if !a.same_grid(b) {
            return Err(Error::GridMismatch);
        }
        let n = self.table.len();
        Ok(a.values()
            .par_chunks(n)
            .zip(b.values().par_chunks(n))
            .map(|(ca, cb)| {
                ca.iter()
                    .zip(cb)
                    .zip(&self.table)
                    .fold(0.0_f64, |m, ((x, y), w)| m.max((x - y).abs() * w))
            })
            .reduce(|| 0.0, f64::max))
    }
}

pub fn weighted_sup_norm(field: &DistField, q: f64, delta: f64) -> f64 {
    field.weighted_sup_norm(q, delta)
}

pub fn error_sup_norm(a: &DistField, b: &DistField, q: f64, delta: f64) -> Result<f64> {
    if !a.same_grid(b) {
        return Err(Error::GridMismatch);
    }
    LqWeights::new(a.grid(), q, delta).error_norm(a, b)
}

const SNAPSHOT_MAGIC: &[u8; 8] = b"PKFIELD1";

/// Writes a field snapshot.
///
/// Layout (all little-endian): the 8-byte magic `PKFIELD1`; `u64` n_x, n_v,
/// n_i; `f64` v_max, i_max, delta, q; then `n_x * n_v^3 * n_i` `f64` values
/// in storage order.
pub fn write_snapshot<W: Write>(mut out: W, field: &DistField, delta: f64, q: f64) -> Result<()> {
    let g = field.grid();
    out.write_all(SNAPSHOT_MAGIC)?;
    for n in [g.n_x, g.n_v, g.n_i] {
        out.write_all(&(n as u64).to_le_bytes())?;
    }
    for x in [g.v_max, g.i_max, delta, q] {
        out.write_all(&x.to_le_bytes())?;
    }
    let mut buf = Vec::with_capacity(8 * 4096);
    for chunk in field.values().chunks(4096) {
        buf.clear();
        for v in chunk {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        out.write_all(&buf)?;
    }
    out.flush()?;
    Ok(())
}

/// A field read back from a snapshot, with the `delta` and `q` it was saved with.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub field: DistField,
    pub delta: f64,
    pub q: f64,
}

pub fn read_snapshot<R: Read>(mut input: R) -> Result<Snapshot> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    let mut word = [0u8; 8];
    let mut read_u64 = |input: &mut R| -> Result<u64> {
        input.read_exact(&mut word)?;
        Ok(u64::from_le_bytes(word))
    };
    let n_x = read_u64(&mut input)? as usize;
    let n_v = read_u64(&mut input)? as usize;
    let n_i = read_u64(&mut input)? as usize;
    let mut floats = [0.0; 4];
    for x in floats.iter_mut() {
        let mut b = [0u8; 8];
        input.read_exact(&mut b)?;
        *x = f64::from_le_bytes(b);
    }
    let [v_max, i_max, delta, q] = floats;
    let grid = Arc::new(
        PhaseGrid::new(GridConfig {
            n_x,
            n_v,
            v_max,
            n_i,
            i_max,
        })
        .map_err(|e| Error::Snapshot(e.to_string()))?,
    );
    let mut bytes = vec![0u8; grid.len() * 8];
    input
        .read_exact(&mut bytes)
        .map_err(|e| Error::Snapshot(format!("truncated payload: {e}")))?;
    let values = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Snapshot {
        field: DistField::from_values(grid, values)?,
        delta,
        q,
    })
}
