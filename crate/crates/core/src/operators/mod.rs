//! Discrete operators of the commutator estimates: Fourier-multiplier
//! Calderón–Zygmund transforms, Haar expansions, paraproducts, sparse
//! sums, averaging, and set restrictions.

mod carleson;
mod czo;
mod haar;
mod sparse;

pub use carleson::{
    carleson_norm, goldberg_maximal, paraproduct, reducing_cube_means, CarlesonSequence,
};
pub use czo::{apply_czo, CzoKind};
pub use haar::{
    project_matrix, project_vector, signature_count, HaarCoeffs, HaarData, HaarSystem,
};
pub use sparse::{sparse_apply, SparseKernel};

use crate::error::{Error, Result};
use crate::field::{MatrixField, VectorField};
use crate::grid::CellSet;
use crate::linalg::CVec;

/// Averaging operator `A_E f = 1_E · fint_E f` (zero when `E` is empty).
pub fn averaging(f: &VectorField, set: &CellSet) -> Result<VectorField> {
    if set.domain_size() != f.grid().cell_count() {
        return Err(Error::SizeMismatch {
            context: "averaging set",
            expected: f.grid().cell_count(),
            got: set.domain_size(),
        });
    }
    let mut out = VectorField::zero(f.grid(), f.n());
    let cells: Vec<usize> = set.iter().collect();
    if cells.is_empty() {
        return Ok(out);
    }
    let mean = f.mean_over(&cells);
    for c in cells {
        *out.cell_mut(c) = mean.clone();
    }
    Ok(out)
}

/// Pointwise restriction `1_E f`.
pub fn restrict(f: &VectorField, set: &CellSet) -> Result<VectorField> {
    if set.domain_size() != f.grid().cell_count() {
        return Err(Error::SizeMismatch {
            context: "restriction set",
            expected: f.grid().cell_count(),
            got: set.domain_size(),
        });
    }
    let mut out = f.clone();
    for c in 0..f.grid().cell_count() {
        if !set.contains(c) {
            *out.cell_mut(c) = CVec::zeros(f.n());
        }
    }
    Ok(out)
}

/// Commutator `[M_B, T ⊗ I_n] f = B · T f - T (B f)`.
pub fn commutator(b: &MatrixField, kind: CzoKind, f: &VectorField) -> Result<VectorField> {
    let btf = b.apply(&apply_czo(kind, f, None)?)?;
    let tbf = apply_czo(kind, &b.apply(f)?, None)?;
    Ok(btf.sub(&tbf))
}

/// Commutator against a caller-supplied linear map in place of the
/// convolution operator.
pub fn commutator_with(
    b: &MatrixField,
    t: impl Fn(&VectorField) -> Result<VectorField>,
    f: &VectorField,
) -> Result<VectorField> {
    let btf = b.apply(&t(f)?)?;
    let tbf = t(&b.apply(f)?)?;
    Ok(btf.sub(&tbf))
}
