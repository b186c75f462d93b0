//! Evaluation of the sparse commutator bound's right-hand side: for a
//! sparse family `S` the field
//! `Σ_{Q ∈ S} 1_Q(x) · fint_Q k_Q(x,y) (B(x) - B(y)) f(y) dy`,
//! reported without the dimensional constant in front.

use num_complex::Complex64;

use crate::dyadic::{DyadicCube, DyadicLattice, SparseFamily};
use crate::error::{Error, Result};
use crate::field::{MatrixField, VectorField};
use crate::linalg::CVec;

/// Per-cube kernel `k_Q(x, y)` sampled at cell pairs; must satisfy
/// `‖k_Q‖_∞ ≤ 1` on the grid.
pub type SparseKernel<'a> = &'a dyn Fn(&DyadicCube, usize, usize) -> f64;

const KERNEL_BOUND_TOL: f64 = 1e-12;

/// Applies the sparse sum. With no kernel, `k_Q ≡ 1` and each member
/// contributes `1_Q (B(x) m_Q f - m_Q(Bf))`.
pub fn sparse_apply(
    family: &SparseFamily,
    lattice: &DyadicLattice,
    kernel: Option<SparseKernel>,
    b: &MatrixField,
    f: &VectorField,
) -> Result<VectorField> {
    if b.grid() != lattice.grid() || f.grid() != lattice.grid() {
        return Err(Error::GridMismatch("field grids differ from lattice grid"));
    }
    if b.n() != f.n() {
        return Err(Error::SizeMismatch {
            context: "symbol size vs field size",
            expected: b.n(),
            got: f.n(),
        });
    }
    let grid = lattice.grid();
    let mut out = VectorField::zero(grid, f.n());
    for member in &family.members {
        let cube = lattice.cube(member.id);
        let cells = cube.cells(grid);
        let count = cells.len() as f64;
        match kernel {
            None => {
                let mut mean_f = CVec::zeros(f.n());
                let mut mean_bf = CVec::zeros(f.n());
                for &y in &cells {
                    mean_f += f.cell(y);
                    mean_bf += b.cell(y) * f.cell(y);
                }
                mean_f /= Complex64::new(count, 0.0);
                mean_bf /= Complex64::new(count, 0.0);
                for &x in &cells {
                    *out.cell_mut(x) += b.cell(x) * &mean_f - &mean_bf;
                }
            }
            Some(k) => {
                for &x in &cells {
                    let bx = b.cell(x);
                    let mut acc = CVec::zeros(f.n());
                    for &y in &cells {
                        let kv = k(cube, x, y);
                        if !kv.is_finite() || kv.abs() > 1.0 + KERNEL_BOUND_TOL {
                            return Err(Error::InvalidParam(format!(
                                "sparse kernel value {kv} exceeds unit bound on cube level {}",
                                cube.level
                            )));
                        }
                        acc += (bx - b.cell(y)) * f.cell(y) * Complex64::new(kv, 0.0);
                    }
                    *out.cell_mut(x) += acc / Complex64::new(count, 0.0);
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::{CubeId, Shift, SparseMember};
    use crate::grid::GridSpec;
    use crate::linalg::CMat;

    fn single_cube_family(lattice: &DyadicLattice, id: CubeId) -> SparseFamily {
        let cube_cells = lattice.cube(id).volume_cells(lattice.grid().dim);
        SparseFamily {
            root: lattice.root(),
            members: vec![SparseMember {
                id,
                cube_cells,
                ek_cells: cube_cells,
                removed: Vec::new(),
            }],
            sparsity: 1.0,
            lambda_used: 4.0,
            doublings: 0,
        }
    }

    #[test]
    fn constant_symbol_gives_zero() {
        let grid = GridSpec::new(1, 2).unwrap();
        let lat = DyadicLattice::build(&grid, Shift::NONE);
        let family = single_cube_family(&lat, lat.root());
        let b = MatrixField::constant(&grid, &CMat::from_element(2, 2, Complex64::new(1.5, 0.5)));
        let f = VectorField::random(&grid, 2, 3);
        let out = sparse_apply(&family, &lat, None, &b, &f).unwrap();
        assert!(out.max_norm() < 1e-13);
    }

    #[test]
    fn empty_family_gives_zero() {
        let grid = GridSpec::new(1, 1).unwrap();
        let lat = DyadicLattice::build(&grid, Shift::NONE);
        let family = SparseFamily {
            root: lat.root(),
            members: Vec::new(),
            sparsity: 1.0,
            lambda_used: 4.0,
            doublings: 0,
        };
        let b = MatrixField::random(&grid, 2, 1);
        let f = VectorField::random(&grid, 2, 2);
        let out = sparse_apply(&family, &lat, None, &b, &f).unwrap();
        assert_eq!(out.max_norm(), 0.0);
    }

    #[test]
    fn single_cube_matches_two_term_expansion() {
        let grid = GridSpec::new(1, 2).unwrap();
        let lat = DyadicLattice::build(&grid, Shift::NONE);
        let id = CubeId { level: 1, pos: 1 };
        let family = single_cube_family(&lat, id);
        let b = MatrixField::random(&grid, 1, 5);
        let f = VectorField::random(&grid, 1, 6);
        let out = sparse_apply(&family, &lat, None, &b, &f).unwrap();

        let cells = lat.cube(id).cells(&grid);
        let mean_f = f.mean_over(&cells);
        let bf = b.apply(&f).unwrap();
        let mean_bf = bf.mean_over(&cells);
        for c in 0..grid.cell_count() {
            if cells.contains(&c) {
                let want = b.cell(c) * &mean_f - &mean_bf;
                assert!((out.cell(c) - want).norm() < 1e-13);
            } else {
                assert_eq!(out.cell(c).norm(), 0.0);
            }
        }
    }

    #[test]
    fn unit_kernel_closure_matches_default_path() {
        let grid = GridSpec::new(2, 1).unwrap();
        let lat = DyadicLattice::build(&grid, Shift::NONE);
        let mut members = Vec::new();
        for (pos, _) in lat.level(1).iter().enumerate() {
            let id = CubeId { level: 1, pos: pos as u32 };
            members.push(SparseMember {
                id,
                cube_cells: lat.cube(id).volume_cells(2),
                ek_cells: lat.cube(id).volume_cells(2),
                removed: Vec::new(),
            });
        }
        let family = SparseFamily {
            root: lat.root(),
            members,
            sparsity: 1.0,
            lambda_used: 4.0,
            doublings: 0,
        };
        let b = MatrixField::random(&grid, 2, 7);
        let f = VectorField::random(&grid, 2, 8);
        let fast = sparse_apply(&family, &lat, None, &b, &f).unwrap();
        let unit: SparseKernel = &|_, _, _| 1.0;
        let slow = sparse_apply(&family, &lat, Some(unit), &b, &f).unwrap();
        assert!(fast.sub(&slow).max_norm() < 1e-12);
    }

    #[test]
    fn kernel_bound_is_enforced() {
        let grid = GridSpec::new(1, 1).unwrap();
        let lat = DyadicLattice::build(&grid, Shift::NONE);
        let family = single_cube_family(&lat, lat.root());
        let b = MatrixField::random(&grid, 1, 9);
        let f = VectorField::random(&grid, 1, 10);
        let too_big: SparseKernel = &|_, _, _| 1.5;
        assert!(sparse_apply(&family, &lat, Some(too_big), &b, &f).is_err());
    }
}
