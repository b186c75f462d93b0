//! Tensor Haar basis adapted to one shifted dyadic lattice.
//!
//! For a cube `Q` with `2^d` half-cubes and a signature `ε ∈ {1, …, 2^d-1}`,
//! the function `h_Q^ε` takes the value `±|Q|^{-1/2}` on each child, the
//! sign being `(-1)^{ε·j}` for the child with offset bits `j`. Together
//! with the constant these are orthonormal in `L^2` of the torus, and the
//! expansion of a field over cubes of levels `0..depth` reconstructs its
//! piecewise average at the bottom level plus the global mean.

use num_complex::Complex64;

use crate::dyadic::{CubeId, DyadicLattice};
use crate::error::{Error, Result};
use crate::field::{MatrixField, VectorField};
use crate::linalg::{CMat, CVec};

/// Number of Haar signatures per cube, `2^d - 1`.
pub fn signature_count(dim: usize) -> usize {
    (1 << dim) - 1
}

/// Sign of signature `eps` (1-based) on the child with offset bits `j`.
fn haar_sign(eps: usize, j: u8) -> f64 {
    if ((eps as u8) & j).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Cell-level values shared by the transform directions.
pub struct HaarSystem<'a> {
    lattice: &'a DyadicLattice,
    sigma: usize,
    /// Offset bits of each child slot, indexed by parent ordinal over
    /// levels `0..depth`.
    child_bits: Vec<Vec<u8>>,
}

/// Haar coefficients indexed by cube ordinal (levels `0..depth`) and
/// signature.
#[derive(Debug, Clone)]
pub struct HaarCoeffs<T> {
    sigma: usize,
    values: Vec<Vec<T>>,
}

impl<T> HaarCoeffs<T> {
    /// Builds a table from per-cube rows of `sigma` coefficients each, in
    /// ordinal order over levels `0..depth`.
    pub fn from_rows(sigma: usize, rows: Vec<Vec<T>>) -> Self {
        assert!(rows.iter().all(|r| r.len() == sigma));
        HaarCoeffs {
            sigma,
            values: rows,
        }
    }

    pub fn sigma(&self) -> usize {
        self.sigma
    }

    pub fn cube_count(&self) -> usize {
        self.values.len()
    }

    /// Coefficient for cube `id` (must lie above the bottom level).
    pub fn get(&self, lattice: &DyadicLattice, id: CubeId, eps: usize) -> &T {
        &self.values[lattice.ordinal(id)][eps - 1]
    }

    pub fn at_ordinal(&self, ordinal: usize, eps: usize) -> &T {
        &self.values[ordinal][eps - 1]
    }

    pub fn at_ordinal_mut(&mut self, ordinal: usize, eps: usize) -> &mut T {
        &mut self.values[ordinal][eps - 1]
    }

    pub fn map<U>(&self, f: impl Fn(&T) -> U) -> HaarCoeffs<U> {
        HaarCoeffs {
            sigma: self.sigma,
            values: self
                .values
                .iter()
                .map(|row| row.iter().map(&f).collect())
                .collect(),
        }
    }
}

/// Value-type plumbing shared by vector and matrix expansions.
pub trait HaarData: Clone {
    fn zeros_like(proto: &Self) -> Self;
    fn add_assign_ref(&mut self, other: &Self);
    /// `self += a · other`.
    fn axpy(&mut self, a: f64, other: &Self);
    fn scale_by(&self, a: f64) -> Self;
}

impl HaarData for CVec {
    fn zeros_like(proto: &Self) -> Self {
        CVec::zeros(proto.len())
    }

    fn add_assign_ref(&mut self, other: &Self) {
        *self += other;
    }

    fn axpy(&mut self, a: f64, other: &Self) {
        *self += other * Complex64::new(a, 0.0);
    }

    fn scale_by(&self, a: f64) -> Self {
        self * Complex64::new(a, 0.0)
    }
}

impl HaarData for CMat {
    fn zeros_like(proto: &Self) -> Self {
        CMat::zeros(proto.nrows(), proto.ncols())
    }

    fn add_assign_ref(&mut self, other: &Self) {
        *self += other;
    }

    fn axpy(&mut self, a: f64, other: &Self) {
        *self += other * Complex64::new(a, 0.0);
    }

    fn scale_by(&self, a: f64) -> Self {
        self * Complex64::new(a, 0.0)
    }
}

impl<'a> HaarSystem<'a> {
    pub fn new(lattice: &'a DyadicLattice) -> Self {
        let dim = lattice.grid().dim;
        let depth = lattice.depth();
        let mut child_bits = Vec::new();
        for k in 0..depth {
            for parent in lattice.level(k) {
                let bits = parent
                    .children
                    .iter()
                    .map(|&cid| {
                        let child = lattice.cube(cid);
                        let mut j = 0u8;
                        for a in 0..dim {
                            if child.corner[a] != parent.corner[a] {
                                j |= 1 << a;
                            }
                        }
                        j
                    })
                    .collect();
                child_bits.push(bits);
            }
        }
        HaarSystem {
            lattice,
            sigma: signature_count(dim),
            child_bits,
        }
    }

    pub fn lattice(&self) -> &DyadicLattice {
        self.lattice
    }

    pub fn sigma(&self) -> usize {
        self.sigma
    }

    /// Value of `h_Q^ε` at a cell (0 outside `Q`).
    pub fn value_on_cell(&self, id: CubeId, eps: usize, cell: usize) -> f64 {
        let grid = self.lattice.grid();
        let cube = self.lattice.cube(id);
        if !cube.contains_cell(grid, cell) {
            return 0.0;
        }
        let scale = cube.measure(grid).sqrt().recip();
        let bits = &self.child_bits[self.lattice.ordinal(id)];
        for (slot, &cid) in cube.children.iter().enumerate() {
            if self.lattice.cube(cid).contains_cell(grid, cell) {
                return haar_sign(eps, bits[slot]) * scale;
            }
        }
        0.0
    }

    /// Integrals `∫_Q X` for every cube, bottom-up.
    fn integrals<T: HaarData>(&self, cell_value: impl Fn(usize) -> T) -> Vec<T> {
        let lat = self.lattice;
        let grid = lat.grid();
        let proto = cell_value(0);
        let mut sums: Vec<T> = vec![T::zeros_like(&proto); lat.cube_count()];
        let depth = lat.depth();
        for (pos, cube) in lat.level(depth).iter().enumerate() {
            let ord = lat.ordinal(CubeId { level: depth, pos: pos as u32 });
            let mut acc = T::zeros_like(&proto);
            for c in cube.cells(grid) {
                let v = cell_value(c);
                acc.add_assign_ref(&v);
            }
            sums[ord] = acc.scale_by(grid.cell_volume());
        }
        for k in (0..depth).rev() {
            for (pos, cube) in lat.level(k).iter().enumerate() {
                let ord = lat.ordinal(CubeId { level: k, pos: pos as u32 });
                let mut acc = T::zeros_like(&proto);
                for &cid in &cube.children {
                    let child = sums[lat.ordinal(cid)].clone();
                    acc.add_assign_ref(&child);
                }
                sums[ord] = acc;
            }
        }
        sums
    }

    fn coeffs_from_integrals<T: HaarData>(&self, sums: &[T]) -> HaarCoeffs<T> {
        let lat = self.lattice;
        let grid = lat.grid();
        let depth = lat.depth();
        let mut values = Vec::with_capacity(self.child_bits.len());
        for k in 0..depth {
            for (pos, cube) in lat.level(k).iter().enumerate() {
                let ord = lat.ordinal(CubeId { level: k, pos: pos as u32 });
                let scale = cube.measure(grid).sqrt().recip();
                let bits = &self.child_bits[ord];
                let mut row = Vec::with_capacity(self.sigma);
                for eps in 1..=self.sigma {
                    let mut acc = T::zeros_like(&sums[ord]);
                    for (slot, &cid) in cube.children.iter().enumerate() {
                        acc.axpy(haar_sign(eps, bits[slot]) * scale, &sums[lat.ordinal(cid)]);
                    }
                    row.push(acc);
                }
                values.push(row);
            }
        }
        HaarCoeffs {
            sigma: self.sigma,
            values,
        }
    }

    /// Top-down synthesis `mean + Σ_{Q,ε} c_Q^ε h_Q^ε`, returned as per-cell
    /// values (constant on bottom-level cubes by construction).
    fn synthesize<T: HaarData>(&self, coeffs: &HaarCoeffs<T>, mean: &T) -> Vec<T> {
        let lat = self.lattice;
        let grid = lat.grid();
        let depth = lat.depth();
        if coeffs.values.len() != self.child_bits.len() {
            panic!("haar coefficient table does not match lattice");
        }
        let mut cube_vals: Vec<T> = vec![T::zeros_like(mean); lat.cube_count()];
        cube_vals[lat.ordinal(lat.root())] = mean.clone();
        for k in 0..depth {
            for (pos, cube) in lat.level(k).iter().enumerate() {
                let ord = lat.ordinal(CubeId { level: k, pos: pos as u32 });
                let scale = cube.measure(grid).sqrt().recip();
                let bits = &self.child_bits[ord];
                for (slot, &cid) in cube.children.iter().enumerate() {
                    let mut v = cube_vals[ord].clone();
                    for eps in 1..=self.sigma {
                        v.axpy(
                            haar_sign(eps, bits[slot]) * scale,
                            coeffs.at_ordinal(ord, eps),
                        );
                    }
                    cube_vals[lat.ordinal(cid)] = v;
                }
            }
        }
        let mut cells: Vec<T> = vec![T::zeros_like(mean); grid.cell_count()];
        for (pos, cube) in lat.level(depth).iter().enumerate() {
            let ord = lat.ordinal(CubeId { level: depth, pos: pos as u32 });
            for c in cube.cells(grid) {
                cells[c] = cube_vals[ord].clone();
            }
        }
        cells
    }

    /// Cube integrals `∫_Q f` of a vector field, indexed by ordinal.
    pub fn vector_integrals(&self, f: &VectorField) -> Result<Vec<CVec>> {
        self.check_grid(f.grid())?;
        Ok(self.integrals(|c| f.cell(c).clone()))
    }

    pub fn matrix_integrals(&self, b: &MatrixField) -> Result<Vec<CMat>> {
        self.check_grid(b.grid())?;
        Ok(self.integrals(|c| b.cell(c).clone()))
    }

    pub fn vector_coeffs(&self, f: &VectorField) -> Result<HaarCoeffs<CVec>> {
        Ok(self.coeffs_from_integrals(&self.vector_integrals(f)?))
    }

    pub fn matrix_coeffs(&self, b: &MatrixField) -> Result<HaarCoeffs<CMat>> {
        Ok(self.coeffs_from_integrals(&self.matrix_integrals(b)?))
    }

    pub fn reconstruct_vector(&self, coeffs: &HaarCoeffs<CVec>, mean: &CVec) -> VectorField {
        let cells = self.synthesize(coeffs, mean);
        VectorField::from_cells(self.lattice.grid(), mean.len(), cells)
            .expect("synthesized cells match grid")
    }

    pub fn reconstruct_matrix(&self, coeffs: &HaarCoeffs<CMat>, mean: &CMat) -> MatrixField {
        let cells = self.synthesize(coeffs, mean);
        MatrixField::from_cells(self.lattice.grid(), mean.nrows(), cells)
            .expect("synthesized cells match grid")
    }

    fn check_grid(&self, grid: &crate::grid::GridSpec) -> Result<()> {
        if grid != self.lattice.grid() {
            return Err(Error::GridMismatch("field grid differs from lattice grid"));
        }
        Ok(())
    }
}

/// Piecewise average at level `R`: on each level-`R` cube the field is
/// replaced by its mean over that cube.
pub fn project_vector(f: &VectorField, lattice: &DyadicLattice, level: u32) -> Result<VectorField> {
    if f.grid() != lattice.grid() {
        return Err(Error::GridMismatch("field grid differs from lattice grid"));
    }
    if level > lattice.depth() {
        return Err(Error::InvalidParam(format!(
            "projection level {level} exceeds lattice depth {}",
            lattice.depth()
        )));
    }
    let grid = lattice.grid();
    let mut out = f.clone();
    for cube in lattice.level(level) {
        let cells = cube.cells(grid);
        let mean = f.mean_over(&cells);
        for c in cells {
            *out.cell_mut(c) = mean.clone();
        }
    }
    Ok(out)
}

pub fn project_matrix(b: &MatrixField, lattice: &DyadicLattice, level: u32) -> Result<MatrixField> {
    if b.grid() != lattice.grid() {
        return Err(Error::GridMismatch("field grid differs from lattice grid"));
    }
    if level > lattice.depth() {
        return Err(Error::InvalidParam(format!(
            "projection level {level} exceeds lattice depth {}",
            lattice.depth()
        )));
    }
    let grid = lattice.grid();
    let mut out = b.clone();
    for cube in lattice.level(level) {
        let cells = cube.cells(grid);
        let mean = b.mean_over(&cells);
        for c in cells {
            *out.cell_mut(c) = mean.clone();
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::Shift;
    use crate::grid::GridSpec;

    fn all_haar_vectors(sys: &HaarSystem) -> Vec<Vec<f64>> {
        let lat = sys.lattice();
        let grid = lat.grid();
        let mut out = Vec::new();
        for k in 0..lat.depth() {
            for (pos, _) in lat.level(k).iter().enumerate() {
                let id = CubeId { level: k, pos: pos as u32 };
                for eps in 1..=sys.sigma() {
                    out.push(
                        (0..grid.cell_count())
                            .map(|c| sys.value_on_cell(id, eps, c))
                            .collect(),
                    );
                }
            }
        }
        out
    }

    #[test]
    fn haar_vectors_are_orthonormal_and_mean_zero() {
        for (dim, depth) in [(1usize, 2u32), (2, 1)] {
            let grid = GridSpec::new(dim, depth).unwrap();
            for shift in Shift::all(dim) {
                let lat = DyadicLattice::build(&grid, shift);
                let sys = HaarSystem::new(&lat);
                let vecs = all_haar_vectors(&sys);
                let vol = grid.cell_volume();
                for (i, a) in vecs.iter().enumerate() {
                    let mean: f64 = a.iter().sum::<f64>() * vol;
                    assert!(mean.abs() < 1e-12);
                    for (j, b) in vecs.iter().enumerate() {
                        let dot: f64 =
                            a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * vol;
                        let want = if i == j { 1.0 } else { 0.0 };
                        assert!(
                            (dot - want).abs() < 1e-10,
                            "gram({i},{j}) = {dot} in dim {dim}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn coefficients_match_brute_force_inner_products() {
        let grid = GridSpec::new(2, 1).unwrap();
        let lat = DyadicLattice::build(&grid, Shift::from_mask(0b01, 2).unwrap());
        let sys = HaarSystem::new(&lat);
        let f = VectorField::random(&grid, 2, 7);
        let coeffs = sys.vector_coeffs(&f).unwrap();
        let vol = grid.cell_volume();
        for k in 0..lat.depth() {
            for (pos, _) in lat.level(k).iter().enumerate() {
                let id = CubeId { level: k, pos: pos as u32 };
                for eps in 1..=sys.sigma() {
                    let mut want = CVec::zeros(2);
                    for c in 0..grid.cell_count() {
                        let h = sys.value_on_cell(id, eps, c);
                        if h != 0.0 {
                            want += f.cell(c) * Complex64::new(h * vol, 0.0);
                        }
                    }
                    let got = coeffs.get(&lat, id, eps);
                    assert!((got - want).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn roundtrip_recovers_bottom_level_projection() {
        let grid = GridSpec::new(1, 3).unwrap();
        let lat = DyadicLattice::build(&grid, Shift::from_mask(1, 1).unwrap());
        let sys = HaarSystem::new(&lat);

        let f = VectorField::random(&grid, 2, 13);
        let coeffs = sys.vector_coeffs(&f).unwrap();
        let rec = sys.reconstruct_vector(&coeffs, &f.mean());
        let proj = project_vector(&f, &lat, lat.depth()).unwrap();
        assert!(rec.sub(&proj).max_norm() < 1e-12);

        let resolved = MatrixField::random_resolved(&lat, 2, 14);
        let coeffs = sys.matrix_coeffs(&resolved).unwrap();
        let rec = sys.reconstruct_matrix(&coeffs, &resolved.mean());
        let diff = rec.add(&resolved.scale(Complex64::new(-1.0, 0.0)));
        assert!(diff.max_abs() < 1e-12);
    }

    #[test]
    fn truncated_expansion_is_level_projection() {
        let grid = GridSpec::new(2, 2).unwrap();
        let lat = DyadicLattice::build(&grid, Shift::NONE);
        let sys = HaarSystem::new(&lat);
        let f = VectorField::random(&grid, 1, 15);
        let mut coeffs = sys.vector_coeffs(&f).unwrap();
        let keep = 1u32;
        for k in keep..lat.depth() {
            for (pos, _) in lat.level(k).iter().enumerate() {
                let ord = lat.ordinal(CubeId { level: k, pos: pos as u32 });
                for eps in 1..=sys.sigma() {
                    *coeffs.at_ordinal_mut(ord, eps) = CVec::zeros(1);
                }
            }
        }
        let rec = sys.reconstruct_vector(&coeffs, &f.mean());
        let proj = project_vector(&f, &lat, keep).unwrap();
        assert!(rec.sub(&proj).max_norm() < 1e-12);
    }

    #[test]
    fn projection_is_idempotent_and_preserves_mean() {
        let grid = GridSpec::new(1, 2).unwrap();
        let lat = DyadicLattice::build(&grid, Shift::NONE);
        let f = VectorField::random(&grid, 3, 17);
        let p1 = project_vector(&f, &lat, 1).unwrap();
        let p2 = project_vector(&p1, &lat, 1).unwrap();
        assert!(p1.sub(&p2).max_norm() < 1e-13);
        assert!((p1.mean() - f.mean()).norm() < 1e-13);
    }
}
