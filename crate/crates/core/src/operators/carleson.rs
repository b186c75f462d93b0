//! Carleson sequences, the dyadic paraproduct, and the reducing-matrix
//! maximal function used by the weighted embedding bounds.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::dyadic::{CubeId, DyadicLattice};
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::linalg::CVec;
use crate::operators::haar::{HaarCoeffs, HaarSystem};
use crate::weights::{MatrixWeight, ReducingPair};

/// Nonnegative reals `a_Q`, one per cube of a lattice (all levels).
#[derive(Debug, Clone)]
pub struct CarlesonSequence {
    depth: u32,
    values: Vec<f64>,
}

impl CarlesonSequence {
    pub fn new(lattice: &DyadicLattice, values: Vec<f64>) -> Result<Self> {
        if values.len() != lattice.cube_count() {
            return Err(Error::SizeMismatch {
                context: "carleson sequence",
                expected: lattice.cube_count(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParam(
                "carleson sequence entries must be finite and nonnegative".into(),
            ));
        }
        Ok(CarlesonSequence {
            depth: lattice.depth(),
            values,
        })
    }

    pub fn from_fn(
        lattice: &DyadicLattice,
        f: impl Fn(&crate::dyadic::DyadicCube) -> f64,
    ) -> Result<Self> {
        let values = lattice.ids().map(|id| f(lattice.cube(id))).collect();
        Self::new(lattice, values)
    }

    /// Deterministic uniform entries in `[0, 1)`.
    pub fn random(lattice: &DyadicLattice, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        CarlesonSequence {
            depth: lattice.depth(),
            values: (0..lattice.cube_count()).map(|_| rng.gen::<f64>()).collect(),
        }
    }

    pub fn depth(&self) -> u32 {
        self.depth
    }

    pub fn value(&self, lattice: &DyadicLattice, id: CubeId) -> f64 {
        self.values[lattice.ordinal(id)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        if !(c.is_finite() && c >= 0.0) {
            return Err(Error::InvalidParam(
                "carleson sequence scale must be finite and nonnegative".into(),
            ));
        }
        Ok(CarlesonSequence {
            depth: self.depth,
            values: self.values.iter().map(|v| v * c).collect(),
        })
    }
}

/// Subtree sums `Σ_{Q ⊆ J} a_Q²` for every cube `J`, indexed by ordinal.
fn subtree_square_sums(seq: &CarlesonSequence, lattice: &DyadicLattice) -> Vec<f64> {
    let mut sums: Vec<f64> = seq.values.iter().map(|v| v * v).collect();
    for k in (0..lattice.depth()).rev() {
        for (pos, cube) in lattice.level(k).iter().enumerate() {
            let ord = lattice.ordinal(CubeId { level: k, pos: pos as u32 });
            let child_total: f64 = cube
                .children
                .iter()
                .map(|&cid| sums[lattice.ordinal(cid)])
                .sum();
            sums[ord] += child_total;
        }
    }
    sums
}

/// Carleson norm `‖A‖_*`, the square root of
/// `sup_J |J|^{-1} Σ_{Q ⊆ J} a_Q²` over all cubes `J` of the lattice.
pub fn carleson_norm(seq: &CarlesonSequence, lattice: &DyadicLattice) -> Result<f64> {
    if seq.values.len() != lattice.cube_count() {
        return Err(Error::SizeMismatch {
            context: "carleson sequence",
            expected: lattice.cube_count(),
            got: seq.values.len(),
        });
    }
    let sums = subtree_square_sums(seq, lattice);
    let grid = lattice.grid();
    let mut best: f64 = 0.0;
    for id in lattice.ids() {
        let ratio = sums[lattice.ordinal(id)] / lattice.cube(id).measure(grid);
        best = best.max(ratio);
    }
    Ok(best.sqrt())
}

/// Dyadic paraproduct `π_A g = Σ_ε Σ_Q a_Q (m_Q g) h_Q^ε`, acting
/// componentwise on vector fields. Bottom-level cubes carry no Haar
/// functions and do not contribute.
pub fn paraproduct(
    seq: &CarlesonSequence,
    lattice: &DyadicLattice,
    g: &VectorField,
) -> Result<VectorField> {
    if seq.values.len() != lattice.cube_count() {
        return Err(Error::SizeMismatch {
            context: "carleson sequence",
            expected: lattice.cube_count(),
            got: seq.values.len(),
        });
    }
    let sys = HaarSystem::new(lattice);
    let integrals = sys.vector_integrals(g)?;
    let grid = lattice.grid();
    let mut rows = Vec::new();
    for k in 0..lattice.depth() {
        for (pos, cube) in lattice.level(k).iter().enumerate() {
            let ord = lattice.ordinal(CubeId { level: k, pos: pos as u32 });
            let mean = &integrals[ord] / Complex64::new(cube.measure(grid), 0.0);
            let coeff = mean * Complex64::new(seq.values[ord], 0.0);
            rows.push(vec![coeff; sys.sigma()]);
        }
    }
    let coeffs = HaarCoeffs::from_rows(sys.sigma(), rows);
    Ok(sys.reconstruct_vector(&coeffs, &CVec::zeros(g.n())))
}

/// Per-cube averages `t_Q = m_Q |𝒰_Q U^{-1/p} f|`, indexed by ordinal.
/// `reducing` must hold one entry per cube of the lattice, in ordinal
/// order, with `primal` the `L^p` reducing matrix of `U` on that cube.
pub fn reducing_cube_means(
    u: &MatrixWeight,
    p: f64,
    f: &VectorField,
    lattice: &DyadicLattice,
    reducing: &[ReducingPair],
) -> Result<Vec<f64>> {
    crate::weights::check_exponent(p)?;
    if f.grid() != u.grid() || f.grid() != lattice.grid() {
        return Err(Error::GridMismatch("weight, field, and lattice grids differ"));
    }
    if f.n() != u.n() {
        return Err(Error::SizeMismatch {
            context: "field size vs weight size",
            expected: u.n(),
            got: f.n(),
        });
    }
    if reducing.len() != lattice.cube_count() {
        return Err(Error::SizeMismatch {
            context: "reducing matrix table",
            expected: lattice.cube_count(),
            got: reducing.len(),
        });
    }
    let grid = lattice.grid();
    let um = u.power_field(-1.0 / p);
    let twisted: Vec<CVec> = (0..grid.cell_count())
        .map(|c| &um[c] * f.cell(c))
        .collect();
    let mut out = vec![0.0; lattice.cube_count()];
    for id in lattice.ids() {
        let ord = lattice.ordinal(id);
        let red = &reducing[ord].primal;
        let cells = lattice.cube(id).cells(grid);
        let mut acc = 0.0;
        for &c in &cells {
            acc += (red * &twisted[c]).norm();
        }
        out[ord] = acc / cells.len() as f64;
    }
    Ok(out)
}

/// Maximal function `M'_U f(x) = sup_{Q ∋ x} m_Q |𝒰_Q U^{-1/p} f|` over the
/// tower of cubes of one lattice, returned per cell.
pub fn goldberg_maximal(
    u: &MatrixWeight,
    p: f64,
    f: &VectorField,
    lattice: &DyadicLattice,
    reducing: &[ReducingPair],
) -> Result<Vec<f64>> {
    let means = reducing_cube_means(u, p, f, lattice, reducing)?;
    let grid = lattice.grid();
    let mut out = vec![0.0; grid.cell_count()];
    for (cell, slot) in out.iter_mut().enumerate() {
        let mut best: f64 = 0.0;
        for k in 0..=lattice.depth() {
            let id = lattice.cube_of_cell(k, cell);
            best = best.max(means[lattice.ordinal(id)]);
        }
        *slot = best;
    }
    Ok(out)
}
