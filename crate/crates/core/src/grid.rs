//! Discretized torus carrier: `N = 3·2^L` cells per axis on `[0,1)^d`.
//!
//! The factor 3 makes every dyadic cube of side `2^-k` (k <= L) *and* every
//! 1/3-shifted dyadic cube land exactly on cell boundaries, so all cube/cell
//! memberships below are decided in integer arithmetic.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Maximum supported dimension.
pub const MAX_DIM: usize = 2;

/// Geometry of the discretized torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Spatial dimension, 1 or 2.
    pub dim: usize,
    /// Dyadic depth L; cells per axis is `3 * 2^L`.
    pub depth: u32,
}

impl GridSpec {
    pub fn new(dim: usize, depth: u32) -> Result<Self> {
        if dim == 0 || dim > MAX_DIM {
            return Err(Error::BadDimension(dim));
        }
        if depth > 16 {
            return Err(Error::InvalidParam(format!(
                "depth {depth} too large for desk scale (max 16)"
            )));
        }
        let spec = GridSpec { dim, depth };
        if spec.cell_count() > 1 << 24 {
            return Err(Error::InvalidParam(format!(
                "grid has {} cells, exceeding the 2^24 desk-scale budget",
                spec.cell_count()
            )));
        }
        Ok(spec)
    }

    /// Cells per axis, `N = 3·2^L`.
    pub fn cells_per_axis(&self) -> usize {
        3usize << self.depth
    }

    /// Total number of cells, `N^d`.
    pub fn cell_count(&self) -> usize {
        self.cells_per_axis().pow(self.dim as u32)
    }

    /// Volume of one cell, `N^-d`.
    pub fn cell_volume(&self) -> f64 {
        1.0 / self.cell_count() as f64
    }

    /// Cell width along one axis.
    pub fn cell_width(&self) -> f64 {
        1.0 / self.cells_per_axis() as f64
    }

    /// Flattened index of the cell with the given per-axis coordinates.
    /// Coordinates are taken modulo N (torus).
    pub fn cell_index(&self, coords: [usize; MAX_DIM]) -> usize {
        let n = self.cells_per_axis();
        match self.dim {
            1 => coords[0] % n,
            _ => (coords[1] % n) * n + coords[0] % n,
        }
    }

    /// Per-axis coordinates of a flattened cell index.
    pub fn cell_coords(&self, index: usize) -> [usize; MAX_DIM] {
        let n = self.cells_per_axis();
        match self.dim {
            1 => [index, 0],
            _ => [index % n, index / n],
        }
    }

    /// Center of a cell in `[0,1)^d` (unused axes report 0).
    pub fn cell_center(&self, index: usize) -> [f64; MAX_DIM] {
        let c = self.cell_coords(index);
        let w = self.cell_width();
        let mut out = [0.0; MAX_DIM];
        for a in 0..self.dim {
            out[a] = (c[a] as f64 + 0.5) * w;
        }
        out
    }

    /// Torus distance between two points of `[0,1)^d`.
    pub fn torus_distance(&self, x: [f64; MAX_DIM], y: [f64; MAX_DIM]) -> f64 {
        let mut s = 0.0;
        for a in 0..self.dim {
            let d = (x[a] - y[a]).abs();
            let d = d.min(1.0 - d);
            s += d * d;
        }
        s.sqrt()
    }
}

/// Set of grid cells stored as a bitmask, used for E_Q sets and restrictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CellSet {
    words: Vec<u64>,
    len: usize,
}

impl CellSet {
    pub fn empty(cell_count: usize) -> Self {
        CellSet {
            words: vec![0; cell_count.div_ceil(64)],
            len: cell_count,
        }
    }

    pub fn full(cell_count: usize) -> Self {
        let mut s = Self::empty(cell_count);
        for i in 0..cell_count {
            s.insert(i);
        }
        s
    }

    pub fn from_indices(cell_count: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(cell_count);
        for i in indices {
            s.insert(i);
        }
        s
    }

    pub fn domain_size(&self) -> usize {
        self.len
    }

    pub fn insert(&mut self, i: usize) {
        debug_assert!(i < self.len);
        self.words[i / 64] |= 1 << (i % 64);
    }

    pub fn remove(&mut self, i: usize) {
        self.words[i / 64] &= !(1 << (i % 64));
    }

    pub fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    /// Number of member cells (exact integer measure in cell units).
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn union_with(&mut self, other: &CellSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= *b;
        }
    }

    pub fn subtract(&mut self, other: &CellSet) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= !*b;
        }
    }

    pub fn intersects(&self, other: &CellSet) -> bool {
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(move |&i| self.contains(i))
    }
}
