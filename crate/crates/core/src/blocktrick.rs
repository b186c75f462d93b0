//! The 2×2 block construction: per cell,
//! `Φ = [[V^{1/p}, V^{1/p}B], [0, U^{1/p}]]` with closed-form inverse
//! `[[V^{-1/p}, -B U^{-1/p}], [0, U^{-1/p}]]`, the induced block weight
//! `W = (Φ*Φ)^{p/2}`, and the algebraic identities that tie two-weight
//! commutator quantities to the single weight `W`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::dyadic::CubeFamily;
use crate::error::{Error, Result};
use crate::field::{MatrixField, VectorField};
use crate::grid::GridSpec;
use crate::linalg::{op_norm, CMat};
use crate::norms::LinearOp;
use crate::operators::{apply_czo, CzoKind};
use crate::weights::{check_exponent, conjugate_exponent, MatrixWeight};

/// Entrywise relative tolerance for the closed-form inverse of `Φ`.
pub const PHI_INVERSE_TOL: f64 = 1e-10;

/// Cell-pair budget: grids with at most this many cells are checked on
/// every pair inside every cube, larger grids on a fixed pseudo-random
/// sample.
pub const EXHAUSTIVE_PAIR_CELLS: usize = 4096;

/// Number of sampled cell pairs on grids above the exhaustive budget.
pub const SAMPLED_PAIRS: usize = 1 << 16;

/// The block field `Φ` together with its inverse and its sources.
#[derive(Debug, Clone)]
pub struct BlockField {
    grid: GridSpec,
    m: usize,
    p: f64,
    phi: MatrixField,
    phi_inv: MatrixField,
    u: MatrixWeight,
    v: MatrixWeight,
    b: MatrixField,
}

fn assemble_blocks(m: usize, a: &CMat, upper: &CMat, d: &CMat) -> CMat {
    let mut out = CMat::zeros(2 * m, 2 * m);
    out.view_mut((0, 0), (m, m)).copy_from(a);
    out.view_mut((0, m), (m, m)).copy_from(upper);
    out.view_mut((m, m), (m, m)).copy_from(d);
    out
}

/// Builds `Φ` and its closed-form inverse per cell, verifying
/// `Φ·Φ^{-1} = I` within `PHI_INVERSE_TOL` entrywise relative.
pub fn build_phi(
    b: &MatrixField,
    u: &MatrixWeight,
    v: &MatrixWeight,
    p: f64,
) -> Result<BlockField> {
    check_exponent(p)?;
    if b.grid() != u.grid() || b.grid() != v.grid() {
        return Err(Error::GridMismatch("symbol and weight grids differ"));
    }
    if b.n() != u.n() || b.n() != v.n() {
        return Err(Error::SizeMismatch {
            context: "symbol size vs weight size",
            expected: b.n(),
            got: u.n(),
        });
    }
    let grid = *b.grid();
    let m = b.n();
    let vp = v.power_field(1.0 / p);
    let vm = v.power_field(-1.0 / p);
    let up = u.power_field(1.0 / p);
    let um = u.power_field(-1.0 / p);

    let mut phi_cells = Vec::with_capacity(grid.cell_count());
    let mut inv_cells = Vec::with_capacity(grid.cell_count());
    for c in 0..grid.cell_count() {
        let phi = assemble_blocks(m, &vp[c], &(&vp[c] * b.cell(c)), &up[c]);
        let inv = assemble_blocks(m, &vm[c], &(-(b.cell(c) * &um[c])), &um[c]);
        let mut residual = &phi * &inv;
        for i in 0..2 * m {
            residual[(i, i)] -= Complex64::new(1.0, 0.0);
        }
        let scale = (op_norm(&phi) * op_norm(&inv)).max(1.0);
        let worst = residual.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if worst > PHI_INVERSE_TOL * scale {
            return Err(Error::InvalidParam(format!(
                "block inverse residual {worst:.3e} exceeds tolerance at cell {c}"
            )));
        }
        phi_cells.push(phi);
        inv_cells.push(inv);
    }
    Ok(BlockField {
        grid,
        m,
        p,
        phi: MatrixField::from_cells(&grid, 2 * m, phi_cells)?,
        phi_inv: MatrixField::from_cells(&grid, 2 * m, inv_cells)?,
        u: u.clone(),
        v: v.clone(),
        b: b.clone(),
    })
}

impl BlockField {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    /// Source matrix size `m`; the blocks are `2m × 2m`.
    pub fn source_size(&self) -> usize {
        self.m
    }

    pub fn block_size(&self) -> usize {
        2 * self.m
    }

    pub fn exponent(&self) -> f64 {
        self.p
    }

    pub fn phi(&self) -> &MatrixField {
        &self.phi
    }

    pub fn phi_inverse(&self) -> &MatrixField {
        &self.phi_inv
    }

    pub fn source_u(&self) -> &MatrixWeight {
        &self.u
    }

    pub fn source_v(&self) -> &MatrixWeight {
        &self.v
    }

    pub fn symbol(&self) -> &MatrixField {
        &self.b
    }
}

/// The induced `2m × 2m` weight `W = (Φ*Φ)^{p/2}`, computed per cell as a
/// Hermitian power of the Gram matrix; at `p = 2` the Gram matrix is
/// returned without powering.
pub fn build_w(phi: &BlockField) -> Result<MatrixWeight> {
    let gram: Vec<CMat> = phi
        .phi
        .cells()
        .iter()
        .map(|f| f.adjoint() * f)
        .collect();
    let base = MatrixWeight::from_cells(&phi.grid, 2 * phi.m, gram)?;
    if phi.p == 2.0 {
        Ok(base)
    } else {
        Ok(base.power_weight(phi.p / 2.0))
    }
}

/// Outcome of checking `Φ(x)Φ(y)^{-1}` against its blockwise closed form
/// on sampled cell pairs inside the cubes of a family.
#[derive(Debug, Clone)]
pub struct PhiIdentityReport {
    pub pairs_checked: usize,
    pub max_residual: f64,
    /// Label of the cube containing the worst pair.
    pub argmax: String,
}

/// Verifies blockwise that
/// `Φ(x)Φ(y)^{-1} = [[V^{1/p}(x)V^{-1/p}(y), V^{1/p}(x)(B(x)-B(y))U^{-1/p}(y)], [0, U^{1/p}(x)U^{-1/p}(y)]]`
/// on cell pairs inside each cube and reports the worst entrywise
/// relative residual.
pub fn phi_identity_check(phi: &BlockField, family: &CubeFamily) -> Result<PhiIdentityReport> {
    if family.grid() != &phi.grid {
        return Err(Error::GridMismatch("block field vs cube family"));
    }
    let m = phi.m;
    let vp = phi.v.power_field(1.0 / phi.p);
    let vm = phi.v.power_field(-1.0 / phi.p);
    let up = phi.u.power_field(1.0 / phi.p);
    let um = phi.u.power_field(-1.0 / phi.p);
    let b = &phi.b;

    let check_pair = |x: usize, y: usize| -> f64 {
        let actual = phi.phi.cell(x) * phi.phi_inv.cell(y);
        let expected = assemble_blocks(
            m,
            &(&vp[x] * &vm[y]),
            &(&vp[x] * (b.cell(x) - b.cell(y)) * &um[y]),
            &(&up[x] * &um[y]),
        );
        let scale = op_norm(&actual).max(1.0);
        (&actual - &expected)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            / scale
    };

    let mut cubes: Vec<(String, Vec<usize>)> = Vec::new();
    for (li, lattice) in family.lattices().iter().enumerate() {
        for id in lattice.ids() {
            cubes.push((
                family.cube_label(li, id),
                lattice.cube(id).cells(&phi.grid),
            ));
        }
    }

    if phi.grid.cell_count() <= EXHAUSTIVE_PAIR_CELLS {
        let per_cube: Vec<(usize, f64)> = cubes
            .par_iter()
            .map(|(_, cells)| {
                let mut worst = 0.0f64;
                for &x in cells {
                    for &y in cells {
                        worst = worst.max(check_pair(x, y));
                    }
                }
                (cells.len() * cells.len(), worst)
            })
            .collect();
        let pairs = per_cube.iter().map(|(c, _)| c).sum();
        let mut max_residual = 0.0;
        let mut argmax = String::new();
        for ((label, _), (_, worst)) in cubes.iter().zip(&per_cube) {
            if argmax.is_empty() || *worst > max_residual {
                max_residual = *worst;
                argmax = label.clone();
            }
        }
        Ok(PhiIdentityReport {
            pairs_checked: pairs,
            max_residual,
            argmax,
        })
    } else {
        let mut rng = ChaCha20Rng::seed_from_u64(0x626c6f636b);
        let mut max_residual = 0.0;
        let mut argmax = String::new();
        for _ in 0..SAMPLED_PAIRS {
            let (label, cells) = &cubes[rng.gen_range(0..cubes.len())];
            let x = cells[rng.gen_range(0..cells.len())];
            let y = cells[rng.gen_range(0..cells.len())];
            let r = check_pair(x, y);
            if argmax.is_empty() || r > max_residual {
                max_residual = r;
                argmax = label.clone();
            }
        }
        Ok(PhiIdentityReport {
            pairs_checked: SAMPLED_PAIRS,
            max_residual,
            argmax,
        })
    }
}

/// Local Muckenhoupt-type double mean
/// `fint_x (fint_y f(x,y)^{p'} dy)^{p/p'} dx` over the cells of one cube.
fn mixed_double_mean(cells: &[usize], p: f64, f: &dyn Fn(usize, usize) -> f64) -> f64 {
    let pc = conjugate_exponent(p);
    let count = cells.len() as f64;
    let mut outer = 0.0;
    for &x in cells {
        let mut inner = 0.0;
        for &y in cells {
            inner += f(x, y).powf(pc);
        }
        outer += (inner / count).powf(p / pc);
    }
    outer / count
}

/// Per-cube comparison of the block weight's Muckenhoupt expression with
/// the sum of the three block contributions.
#[derive(Debug, Clone)]
pub struct ApTriangleReport {
    pub p: f64,
    pub family: String,
    pub cube_count: usize,
    /// Supremum over cubes of the local `W` expression.
    pub w_ap: f64,
    /// Suprema of the local `U`, `V` and symbol contributions.
    pub u_ap: f64,
    pub v_ap: f64,
    /// Local mixed double mean of the off-diagonal kernel, which is the
    /// p-th power of the tilde oscillation norm.
    pub tilde_p: f64,
    /// Whether `local_W ≤ 3^{p/p'}(local_U + local_V + tilde_p)` held on
    /// every cube, and the smallest slack observed.
    pub triangle_ok: bool,
    pub min_triangle_margin: f64,
    /// Whether each block contribution stayed below the local `W`
    /// expression on every cube.
    pub sandwich_ok: bool,
    /// Extremes over cubes of `local_W / (local_U + local_V + tilde_p)`.
    pub fitted_lower: f64,
    pub fitted_upper: f64,
}

/// Evaluates, per cube, the triangle bound
/// `local_W ≤ 3^{p/p'}·(local_U + local_V + tilde_p)` and the reverse
/// comparability through the recorded ratio extremes; block compressions
/// force each individual contribution below `local_W`.
pub fn ap_triangle_check(
    b: &MatrixField,
    u: &MatrixWeight,
    v: &MatrixWeight,
    p: f64,
    family: &CubeFamily,
) -> Result<ApTriangleReport> {
    let phi = build_phi(b, u, v, p)?;
    if family.grid() != b.grid() {
        return Err(Error::GridMismatch("symbol vs cube family"));
    }
    let w = build_w(&phi)?;
    let wp = w.power_field(1.0 / p);
    let wm = w.power_field(-1.0 / p);
    let up = u.power_field(1.0 / p);
    let um = u.power_field(-1.0 / p);
    let vp = v.power_field(1.0 / p);
    let vm = v.power_field(-1.0 / p);

    let cubes: Vec<Vec<usize>> = family
        .iter()
        .map(|(_, lat, id)| lat.cube(id).cells(lat.grid()))
        .collect();
    let locals: Vec<[f64; 4]> = cubes
        .par_iter()
        .map(|cells| {
            let lw = mixed_double_mean(cells, p, &|x, y| op_norm(&(&wp[x] * &wm[y])));
            let lu = mixed_double_mean(cells, p, &|x, y| op_norm(&(&up[x] * &um[y])));
            let lv = mixed_double_mean(cells, p, &|x, y| op_norm(&(&vp[x] * &vm[y])));
            let lt = mixed_double_mean(cells, p, &|x, y| {
                op_norm(&(&vp[x] * (b.cell(x) - b.cell(y)) * &um[y]))
            });
            [lw, lu, lv, lt]
        })
        .collect();

    let factor = 3.0f64.powf(p / conjugate_exponent(p));
    let mut report = ApTriangleReport {
        p,
        family: family.descriptor(),
        cube_count: locals.len(),
        w_ap: 0.0,
        u_ap: 0.0,
        v_ap: 0.0,
        tilde_p: 0.0,
        triangle_ok: true,
        min_triangle_margin: f64::INFINITY,
        sandwich_ok: true,
        fitted_lower: f64::INFINITY,
        fitted_upper: 0.0,
    };
    for [lw, lu, lv, lt] in &locals {
        report.w_ap = report.w_ap.max(*lw);
        report.u_ap = report.u_ap.max(*lu);
        report.v_ap = report.v_ap.max(*lv);
        report.tilde_p = report.tilde_p.max(*lt);
        let sum = lu + lv + lt;
        let margin = factor * sum - lw;
        report.min_triangle_margin = report.min_triangle_margin.min(margin);
        if margin < -1e-9 * lw.max(1.0) {
            report.triangle_ok = false;
        }
        let slack = 1e-10 * lw.max(1.0);
        if *lt > lw + slack || *lu > lw + slack || *lv > lw + slack {
            report.sandwich_ok = false;
        }
        let ratio = lw / sum;
        report.fitted_lower = report.fitted_lower.min(ratio);
        report.fitted_upper = report.fitted_upper.max(ratio);
    }
    Ok(report)
}

/// The operator `f ↦ Φ (T ⊗ I_{2m}) Φ^{-1} f`, acting on block vectors.
///
/// Its unweighted operator norm coincides with the `W`-weighted norm of
/// `T ⊗ I_{2m}` because the polar unitary of `Φ` preserves pointwise
/// lengths.
pub struct PhiConjugatedCzo {
    kind: CzoKind,
    phi: MatrixField,
    phi_inv: MatrixField,
    phi_adj: MatrixField,
    phi_inv_adj: MatrixField,
}

impl PhiConjugatedCzo {
    pub fn new(block: &BlockField, kind: CzoKind) -> Result<Self> {
        kind.validate(block.grid.dim)?;
        Ok(PhiConjugatedCzo {
            kind,
            phi: block.phi.clone(),
            phi_inv: block.phi_inv.clone(),
            phi_adj: block.phi.adjoint(),
            phi_inv_adj: block.phi_inv.adjoint(),
        })
    }
}

impl LinearOp for PhiConjugatedCzo {
    fn grid(&self) -> &GridSpec {
        self.phi.grid()
    }

    fn n(&self) -> usize {
        self.phi.n()
    }

    fn apply(&self, f: &VectorField) -> Result<VectorField> {
        let inner = self.phi_inv.apply(f)?;
        let t = apply_czo(self.kind, &inner, None)?;
        self.phi.apply(&t)
    }

    fn apply_adjoint(&self, f: &VectorField) -> Result<VectorField> {
        // (Φ T Φ^{-1})* = Φ^{-*} T* Φ* with T* = -T.
        let inner = self.phi_adj.apply(f)?;
        let t = apply_czo(self.kind, &inner, None)?;
        self.phi_inv_adj
            .apply(&t)
            .map(|g| g.scale(Complex64::new(-1.0, 0.0)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::Shift;
    use crate::norms::opnorm_p2;
    use crate::weights::{generate_weight, WeightKind};
    use approx::assert_relative_eq;

    fn scalar_symbol(grid: &GridSpec, seed: u64) -> MatrixField {
        MatrixField::random(grid, 1, seed)
    }

    #[test]
    fn identity_sources_give_identity_phi() {
        let grid = GridSpec::new(1, 1).unwrap();
        let id = MatrixWeight::identity(&grid, 2);
        let zero = MatrixField::constant(&grid, &CMat::zeros(2, 2));
        let phi = build_phi(&zero, &id, &id, 2.0).unwrap();
        for c in 0..grid.cell_count() {
            let diff: f64 = (phi.phi().cell(c) - crate::linalg::identity(4))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-14);
        }
        let w = build_w(&phi).unwrap();
        for c in 0..grid.cell_count() {
            let diff: f64 = (w.cell(c) - crate::linalg::identity(4))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(diff < 1e-12);
        }
    }

    #[test]
    fn unit_weight_upper_block_is_symbol_difference() {
        let grid = GridSpec::new(1, 1).unwrap();
        let id = MatrixWeight::identity(&grid, 1);
        let b = scalar_symbol(&grid, 3);
        let phi = build_phi(&b, &id, &id, 2.0).unwrap();
        for x in 0..grid.cell_count() {
            for y in 0..grid.cell_count() {
                let prod = phi.phi().cell(x) * phi.phi_inverse().cell(y);
                let want = b.cell(x)[(0, 0)] - b.cell(y)[(0, 0)];
                assert_relative_eq!(prod[(0, 1)].re, want.re, epsilon = 1e-12);
                assert_relative_eq!(prod[(0, 1)].im, want.im, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn closed_form_inverse_matches_on_random_instance() {
        let grid = GridSpec::new(2, 1).unwrap();
        let p = 2.5;
        let u = generate_weight(
            &grid,
            &WeightKind::RotatedDiagonal { n: 2, amplitude: 3.0 },
            p,
            5,
        )
        .unwrap();
        let v = generate_weight(&grid, &WeightKind::LogGaussian { n: 2, sigma: 0.5 }, p, 6)
            .unwrap();
        let b = MatrixField::random(&grid, 2, 7);
        let phi = build_phi(&b, &u, &v, p).unwrap();
        for c in 0..grid.cell_count() {
            let mut prod = phi.phi().cell(c) * phi.phi_inverse().cell(c);
            for i in 0..4 {
                prod[(i, i)] -= Complex64::new(1.0, 0.0);
            }
            let worst = prod.iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(worst <= 1e-10, "inverse residual {worst}");
        }
    }

    #[test]
    fn gram_weight_has_no_fractional_power_at_p2() {
        let grid = GridSpec::new(1, 1).unwrap();
        let u = generate_weight(
            &grid,
            &WeightKind::PowerLaw {
                n: 1,
                alpha: 0.4,
                center: [0.1, 0.0],
            },
            2.0,
            9,
        )
        .unwrap();
        let b = scalar_symbol(&grid, 11);
        let phi = build_phi(&b, &u, &u, 2.0).unwrap();
        let w = build_w(&phi).unwrap();
        for c in 0..grid.cell_count() {
            let gram = phi.phi().cell(c).adjoint() * phi.phi().cell(c);
            let diff = (w.cell(c) - &gram).iter().map(|z| z.norm()).fold(0.0, f64::max);
            assert!(diff <= 1e-12 * op_norm(&gram));
        }
    }

    #[test]
    fn polar_factor_drops_out_of_pairwise_norms() {
        let grid = GridSpec::new(1, 1).unwrap();
        let p = 2.5;
        let u = generate_weight(
            &grid,
            &WeightKind::RotatedDiagonal { n: 2, amplitude: 2.0 },
            p,
            13,
        )
        .unwrap();
        let v = generate_weight(&grid, &WeightKind::LogGaussian { n: 2, sigma: 0.4 }, p, 14)
            .unwrap();
        let b = MatrixField::random(&grid, 2, 15);
        let phi = build_phi(&b, &u, &v, p).unwrap();
        let w = build_w(&phi).unwrap();
        let wp = w.power_field(1.0 / p);
        let wm = w.power_field(-1.0 / p);
        for x in 0..grid.cell_count() {
            for y in 0..grid.cell_count() {
                let lhs = op_norm(&(phi.phi().cell(x) * phi.phi_inverse().cell(y)));
                let rhs = op_norm(&(&wp[x] * &wm[y]));
                assert_relative_eq!(lhs, rhs, max_relative = 1e-9);
            }
        }
    }

    #[test]
    fn identity_check_passes_and_zero_symbol_kills_off_diagonal() {
        let grid = GridSpec::new(1, 2).unwrap();
        let p = 3.0;
        let u = generate_weight(
            &grid,
            &WeightKind::RotatedDiagonal { n: 2, amplitude: 2.5 },
            p,
            17,
        )
        .unwrap();
        let v = generate_weight(&grid, &WeightKind::LogGaussian { n: 2, sigma: 0.3 }, p, 18)
            .unwrap();
        let family = CubeFamily::all_shifts(&grid);

        let b = MatrixField::random(&grid, 2, 19);
        let report = phi_identity_check(&build_phi(&b, &u, &v, p).unwrap(), &family).unwrap();
        assert!(report.max_residual <= 1e-10, "residual {}", report.max_residual);
        assert!(report.pairs_checked > 0);

        let zero = MatrixField::constant(&grid, &CMat::zeros(2, 2));
        let phi0 = build_phi(&zero, &u, &v, p).unwrap();
        for x in 0..grid.cell_count() {
            for y in 0..grid.cell_count() {
                let prod = phi0.phi().cell(x) * phi0.phi_inverse().cell(y);
                let off = prod.view((0, 2), (2, 2)).map(|z| z.norm()).max();
                assert!(off <= 1e-12);
            }
        }
    }

    #[test]
    fn scalar_blocks_match_closed_forms() {
        let grid = GridSpec::new(1, 1).unwrap();
        let p = 2.0;
        let u = generate_weight(
            &grid,
            &WeightKind::PowerLaw {
                n: 1,
                alpha: 0.5,
                center: [0.2, 0.0],
            },
            p,
            21,
        )
        .unwrap();
        let b = scalar_symbol(&grid, 22);
        let phi = build_phi(&b, &u, &u, p).unwrap();
        for x in 0..grid.cell_count() {
            for y in 0..grid.cell_count() {
                let prod = phi.phi().cell(x) * phi.phi_inverse().cell(y);
                let ux = u.cell(x)[(0, 0)].re;
                let uy = u.cell(y)[(0, 0)].re;
                let ratio = (ux / uy).powf(1.0 / p);
                assert_relative_eq!(prod[(0, 0)].re, ratio, max_relative = 1e-10);
                assert_relative_eq!(prod[(1, 1)].re, ratio, max_relative = 1e-10);
                assert!(prod[(1, 0)].norm() <= 1e-12);
                let want = (b.cell(x)[(0, 0)] - b.cell(y)[(0, 0)])
                    * Complex64::new(ux.powf(1.0 / p) * uy.powf(-1.0 / p), 0.0);
                assert!((prod[(0, 1)] - want).norm() <= 1e-10 * want.norm().max(1.0));
            }
        }
    }

    #[test]
    fn triangle_check_identity_instance() {
        let grid = GridSpec::new(1, 1).unwrap();
        let id = MatrixWeight::identity(&grid, 1);
        let zero = MatrixField::constant(&grid, &CMat::zeros(1, 1));
        let family = CubeFamily::single(&grid, Shift::NONE);
        let report = ap_triangle_check(&zero, &id, &id, 2.0, &family).unwrap();
        assert_relative_eq!(report.w_ap, 1.0, max_relative = 1e-10);
        assert!(report.triangle_ok);
        assert!(report.sandwich_ok);
        assert!(report.min_triangle_margin > 0.0);
    }

    #[test]
    fn triangle_and_sandwich_hold_on_random_scalar_instance() {
        let grid = GridSpec::new(1, 2).unwrap();
        let p = 2.0;
        let u = generate_weight(
            &grid,
            &WeightKind::PowerLaw {
                n: 1,
                alpha: 0.6,
                center: [0.3, 0.0],
            },
            p,
            31,
        )
        .unwrap();
        let v = generate_weight(
            &grid,
            &WeightKind::PowerLaw {
                n: 1,
                alpha: -0.5,
                center: [0.8, 0.0],
            },
            p,
            32,
        )
        .unwrap();
        let b = scalar_symbol(&grid, 33);
        let family = CubeFamily::all_shifts(&grid);
        let report = ap_triangle_check(&b, &u, &v, p, &family).unwrap();
        assert!(report.triangle_ok, "margin {}", report.min_triangle_margin);
        assert!(report.sandwich_ok);
        let factor = 3.0f64.powf(p / conjugate_exponent(p));
        assert!(report.fitted_lower >= 1.0 / 3.0 - 1e-9);
        assert!(report.fitted_upper <= factor + 1e-9);
    }

    #[test]
    fn rescaling_sweep_ratio_stabilizes() {
        let grid = GridSpec::new(1, 1).unwrap();
        let p = 2.0;
        let u = generate_weight(
            &grid,
            &WeightKind::PowerLaw {
                n: 1,
                alpha: 0.4,
                center: [0.1, 0.0],
            },
            p,
            41,
        )
        .unwrap();
        let v = generate_weight(
            &grid,
            &WeightKind::PowerLaw {
                n: 1,
                alpha: -0.3,
                center: [0.6, 0.0],
            },
            p,
            42,
        )
        .unwrap();
        let b = scalar_symbol(&grid, 43);
        let family = CubeFamily::single(&grid, Shift::NONE);

        let base = ap_triangle_check(&b, &u, &v, p, &family).unwrap();
        let factor = 3.0f64.powf(p / conjugate_exponent(p));
        let mut ratios = Vec::new();
        let mut w_aps = Vec::new();
        for r in [1.0, 2.0, 4.0, 8.0] {
            let rb = b.scale(Complex64::new(r, 0.0));
            let report = ap_triangle_check(&rb, &u, &v, p, &family).unwrap();
            assert!(report.triangle_ok);
            let denom = base.u_ap + base.v_ap + r.powf(p) * base.tilde_p;
            let ratio = report.w_ap / denom;
            assert!(ratio >= 1.0 / 3.0 - 1e-9 && ratio <= factor + 1e-9);
            ratios.push(ratio);
            w_aps.push(report.w_ap);
        }
        assert!(w_aps[3] > w_aps[0]);
        let last_step = (ratios[3] / ratios[2] - 1.0).abs();
        assert!(last_step <= 1.0, "ratio still moving: {last_step}");
    }

    #[test]
    fn conjugation_norm_matches_weighted_norm_at_p2() {
        let grid = GridSpec::new(1, 1).unwrap();
        let u = generate_weight(
            &grid,
            &WeightKind::PowerLaw {
                n: 1,
                alpha: 0.5,
                center: [0.4, 0.0],
            },
            2.0,
            51,
        )
        .unwrap();
        let v = generate_weight(
            &grid,
            &WeightKind::PowerLaw {
                n: 1,
                alpha: -0.4,
                center: [0.9, 0.0],
            },
            2.0,
            52,
        )
        .unwrap();
        let b = scalar_symbol(&grid, 53);
        let phi = build_phi(&b, &u, &v, 2.0).unwrap();
        let w = build_w(&phi).unwrap();

        let conjugated = PhiConjugatedCzo::new(&phi, CzoKind::Hilbert).unwrap();
        let id = MatrixWeight::identity(&grid, 2);
        let via_phi = opnorm_p2(&conjugated, &id, &id).unwrap();

        let czo = crate::norms::CzoOp {
            grid,
            n: 2,
            kind: CzoKind::Hilbert,
        };
        let via_w = opnorm_p2(&czo, &w, &w).unwrap();
        assert_relative_eq!(via_phi.value, via_w.value, max_relative = 1e-8);
    }
}
