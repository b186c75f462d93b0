//! Weighted operator norms `‖T‖_{L^p(U) → L^p(V)}`, computed through the
//! conjugated operator `S = V^{1/p} ∘ T ∘ U^{-1/p}` on unweighted `L^p`.
//! At p = 2 the norm is the largest singular value of `S` and is found by
//! power iteration on `S*S`; for other p the nonlinear power method gives
//! a certified lower bound with an explicit witness.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{MatrixField, VectorField};
use crate::grid::{CellSet, GridSpec};
use crate::linalg::CMat;
use crate::operators::{apply_czo, commutator, CzoKind};
use crate::weights::{conjugate_exponent, MatrixWeight};

/// Deterministic start seed for the p = 2 power iteration.
const P2_SEED: u64 = 0x6d77_6c61_622d_7032;
/// Iteration cap for the p = 2 power iteration.
const P2_MAX_ITERS: usize = 50_000;
/// Relative tolerance on the singular-value estimate at p = 2.
const P2_TOL: f64 = 1e-10;

/// Default restart count for the lower-bound search.
pub const DEFAULT_RESTARTS: usize = 32;
/// Default per-restart iteration cap for the lower-bound search.
pub const DEFAULT_LOWER_ITERS: usize = 400;
/// Default stagnation tolerance for the lower-bound search.
pub const DEFAULT_LOWER_TOL: f64 = 1e-9;

/// A linear map on vector fields together with its unweighted `L^2`
/// adjoint.
pub trait LinearOp: Sync {
    fn grid(&self) -> &GridSpec;
    fn n(&self) -> usize;
    fn apply(&self, f: &VectorField) -> Result<VectorField>;
    fn apply_adjoint(&self, f: &VectorField) -> Result<VectorField>;
}

/// Identity on n-vector fields.
pub struct IdentityOp {
    pub grid: GridSpec,
    pub n: usize,
}

impl LinearOp for IdentityOp {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn n(&self) -> usize {
        self.n
    }

    fn apply(&self, f: &VectorField) -> Result<VectorField> {
        Ok(f.clone())
    }

    fn apply_adjoint(&self, f: &VectorField) -> Result<VectorField> {
        Ok(f.clone())
    }
}

/// The zero map.
pub struct ZeroOp {
    pub grid: GridSpec,
    pub n: usize,
}

impl LinearOp for ZeroOp {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn n(&self) -> usize {
        self.n
    }

    fn apply(&self, _f: &VectorField) -> Result<VectorField> {
        Ok(VectorField::zero(&self.grid, self.n))
    }

    fn apply_adjoint(&self, _f: &VectorField) -> Result<VectorField> {
        Ok(VectorField::zero(&self.grid, self.n))
    }
}

/// Pointwise multiplication `f ↦ B f`.
pub struct MultiplicationOp {
    pub b: MatrixField,
}

impl LinearOp for MultiplicationOp {
    fn grid(&self) -> &GridSpec {
        self.b.grid()
    }

    fn n(&self) -> usize {
        self.b.n()
    }

    fn apply(&self, f: &VectorField) -> Result<VectorField> {
        self.b.apply(f)
    }

    fn apply_adjoint(&self, f: &VectorField) -> Result<VectorField> {
        self.b.adjoint().apply(f)
    }
}

/// Convolution operator `T ⊗ I_n`, anti-self-adjoint by construction.
pub struct CzoOp {
    pub grid: GridSpec,
    pub n: usize,
    pub kind: CzoKind,
}

impl LinearOp for CzoOp {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn n(&self) -> usize {
        self.n
    }

    fn apply(&self, f: &VectorField) -> Result<VectorField> {
        apply_czo(self.kind, f, None)
    }

    fn apply_adjoint(&self, f: &VectorField) -> Result<VectorField> {
        Ok(apply_czo(self.kind, f, None)?.scale(Complex64::new(-1.0, 0.0)))
    }
}

/// Commutator `[M_B, T ⊗ I_n]`; its adjoint is the commutator with `B*`.
pub struct CommutatorOp {
    pub b: MatrixField,
    pub kind: CzoKind,
}

impl LinearOp for CommutatorOp {
    fn grid(&self) -> &GridSpec {
        self.b.grid()
    }

    fn n(&self) -> usize {
        self.b.n()
    }

    fn apply(&self, f: &VectorField) -> Result<VectorField> {
        commutator(&self.b, self.kind, f)
    }

    fn apply_adjoint(&self, f: &VectorField) -> Result<VectorField> {
        commutator(&self.b.adjoint(), self.kind, f)
    }
}

/// Restricted operator `1_E T 1_E`.
pub struct RestrictedOp<O: LinearOp> {
    pub inner: O,
    pub set: CellSet,
}

impl<O: LinearOp> LinearOp for RestrictedOp<O> {
    fn grid(&self) -> &GridSpec {
        self.inner.grid()
    }

    fn n(&self) -> usize {
        self.inner.n()
    }

    fn apply(&self, f: &VectorField) -> Result<VectorField> {
        let cut = crate::operators::restrict(f, &self.set)?;
        crate::operators::restrict(&self.inner.apply(&cut)?, &self.set)
    }

    fn apply_adjoint(&self, f: &VectorField) -> Result<VectorField> {
        let cut = crate::operators::restrict(f, &self.set)?;
        crate::operators::restrict(&self.inner.apply_adjoint(&cut)?, &self.set)
    }
}

/// Formal adjoint of another operator.
pub struct AdjointOp<'a> {
    pub inner: &'a dyn LinearOp,
}

impl LinearOp for AdjointOp<'_> {
    fn grid(&self) -> &GridSpec {
        self.inner.grid()
    }

    fn n(&self) -> usize {
        self.inner.n()
    }

    fn apply(&self, f: &VectorField) -> Result<VectorField> {
        self.inner.apply_adjoint(f)
    }

    fn apply_adjoint(&self, f: &VectorField) -> Result<VectorField> {
        self.inner.apply(f)
    }
}

/// How a [`NormEstimate`] value relates to the true operator norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormMode {
    /// Largest singular value at p = 2, exact up to iteration tolerance.
    ExactP2,
    /// Certified lower bound from an explicit witness.
    LowerBound,
}

/// Operator-norm result with the input field that attains it.
#[derive(Debug, Clone)]
pub struct NormEstimate {
    pub value: f64,
    pub mode: NormMode,
    pub iterations: usize,
    /// Unit-norm input to the conjugated operator whose image has norm
    /// `value`.
    pub witness: VectorField,
    /// Relative change of the value over the last iteration (0 when the
    /// iteration converged or terminated exactly).
    pub residual: f64,
    /// SHA-256 of the witness entries, for compact report identification.
    pub witness_hash: String,
}

/// Hex SHA-256 over the little-endian bytes of the witness entries in
/// cell-major order.
pub fn witness_hash(f: &VectorField) -> String {
    let mut hasher = Sha256::new();
    for v in f.cells() {
        for z in v.iter() {
            hasher.update(z.re.to_le_bytes());
            hasher.update(z.im.to_le_bytes());
        }
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// The conjugated operator `S = V^{1/p} ∘ T ∘ U^{-1/p}` acting on
/// unweighted `L^p`.
struct Conjugated<'a> {
    op: &'a dyn LinearOp,
    left: Arc<Vec<CMat>>,
    right: Arc<Vec<CMat>>,
}

fn apply_cellwise(table: &[CMat], f: &VectorField) -> VectorField {
    let mut out = f.clone();
    for c in 0..f.grid().cell_count() {
        *out.cell_mut(c) = &table[c] * f.cell(c);
    }
    out
}

impl<'a> Conjugated<'a> {
    fn new(op: &'a dyn LinearOp, u: &MatrixWeight, v: &MatrixWeight, p: f64) -> Result<Self> {
        if u.grid() != op.grid() || v.grid() != op.grid() {
            return Err(Error::GridMismatch("weight grids differ from operator grid"));
        }
        if u.n() != op.n() || v.n() != op.n() {
            return Err(Error::SizeMismatch {
                context: "weight size vs operator size",
                expected: op.n(),
                got: u.n(),
            });
        }
        Ok(Conjugated {
            op,
            left: v.power_field(1.0 / p),
            right: u.power_field(-1.0 / p),
        })
    }

    fn apply(&self, f: &VectorField) -> Result<VectorField> {
        let inner = self.op.apply(&apply_cellwise(&self.right, f))?;
        Ok(apply_cellwise(&self.left, &inner))
    }

    /// Adjoint in unweighted `L^2`; the power fields are Hermitian.
    fn apply_adjoint(&self, f: &VectorField) -> Result<VectorField> {
        let inner = self.op.apply_adjoint(&apply_cellwise(&self.left, f))?;
        Ok(apply_cellwise(&self.right, &inner))
    }
}

fn estimate(
    value: f64,
    mode: NormMode,
    iterations: usize,
    witness: VectorField,
    residual: f64,
) -> NormEstimate {
    let witness_hash = witness_hash(&witness);
    NormEstimate {
        value,
        mode,
        iterations,
        witness,
        residual,
        witness_hash,
    }
}

/// Exact weighted norm at p = 2 by power iteration on `S*S` with a
/// deterministic start. Non-convergence within the iteration cap is
/// reported through `residual`, not as an error.
pub fn opnorm_p2(op: &dyn LinearOp, u: &MatrixWeight, v: &MatrixWeight) -> Result<NormEstimate> {
    let s = Conjugated::new(op, u, v, 2.0)?;
    let grid = *op.grid();
    let mut w = VectorField::random(&grid, op.n(), P2_SEED);
    w = w.scale(Complex64::new(1.0 / w.l2_norm(), 0.0));

    let mut prev = f64::NAN;
    let mut residual = f64::NAN;
    let mut iterations = 0;
    for it in 1..=P2_MAX_ITERS {
        iterations = it;
        let sw = s.apply(&w)?;
        let sigma = sw.l2_norm();
        if sigma == 0.0 {
            return Ok(estimate(0.0, NormMode::ExactP2, it, w, 0.0));
        }
        let back = s.apply_adjoint(&sw)?;
        let back_norm = back.l2_norm();
        if back_norm == 0.0 {
            return Ok(estimate(sigma, NormMode::ExactP2, it, w, 0.0));
        }
        residual = if prev.is_nan() {
            f64::INFINITY
        } else {
            (sigma - prev).abs() / sigma.max(f64::MIN_POSITIVE)
        };
        prev = sigma;
        w = back.scale(Complex64::new(1.0 / back_norm, 0.0));
        if residual < P2_TOL {
            break;
        }
    }
    let value = s.apply(&w)?.l2_norm() / w.l2_norm();
    let w = w.scale(Complex64::new(1.0 / w.l2_norm(), 0.0));
    Ok(estimate(value, NormMode::ExactP2, iterations, w, residual))
}

/// Duality map `J_p f = f · |f|^{p-2}` (cellwise), sending unit vectors of
/// `L^p` to unit vectors of `L^{p'}` up to normalization.
fn duality_map(f: &VectorField, p: f64) -> VectorField {
    f.map(|v| {
        let norm = v.norm();
        if norm == 0.0 {
            v.clone()
        } else {
            v * Complex64::new(norm.powf(p - 2.0), 0.0)
        }
    })
}

/// Options for the lower-bound search.
#[derive(Debug, Clone, Copy)]
pub struct LowerOpts {
    pub restarts: usize,
    pub seed: u64,
    pub max_iters: usize,
    pub tol: f64,
}

impl Default for LowerOpts {
    fn default() -> Self {
        LowerOpts {
            restarts: DEFAULT_RESTARTS,
            seed: 0,
            max_iters: DEFAULT_LOWER_ITERS,
            tol: DEFAULT_LOWER_TOL,
        }
    }
}

struct RestartResult {
    value: f64,
    witness: VectorField,
    iterations: usize,
    residual: f64,
}

fn lower_restart(
    s: &Conjugated,
    grid: &GridSpec,
    n: usize,
    p: f64,
    seed: u64,
    opts: &LowerOpts,
) -> Result<RestartResult> {
    let q = conjugate_exponent(p);
    let mut f = VectorField::random(grid, n, seed);
    f = f.scale(Complex64::new(1.0 / f.lp_norm(p), 0.0));
    let mut best_value = 0.0;
    let mut best_witness = f.clone();
    let mut prev = f64::NAN;
    let mut residual = f64::NAN;
    let mut iterations = 0;
    for it in 1..=opts.max_iters {
        iterations = it;
        let g = s.apply(&f)?;
        let lam = g.lp_norm(p);
        if lam > best_value {
            best_value = lam;
            best_witness = f.clone();
        }
        if lam == 0.0 {
            residual = 0.0;
            break;
        }
        let h = s.apply_adjoint(&duality_map(&g, p))?;
        let next = duality_map(&h, q);
        let next_norm = next.lp_norm(p);
        if next_norm == 0.0 {
            residual = 0.0;
            break;
        }
        f = next.scale(Complex64::new(1.0 / next_norm, 0.0));
        residual = if prev.is_nan() {
            f64::INFINITY
        } else {
            (lam - prev).abs() / lam.max(f64::MIN_POSITIVE)
        };
        prev = lam;
        if residual < opts.tol {
            break;
        }
    }
    Ok(RestartResult {
        value: best_value,
        witness: best_witness,
        iterations,
        residual,
    })
}

/// Certified lower bound on `‖T‖_{L^p(U) → L^p(V)}` from a nonlinear power
/// method with deterministic restarts. The reported value is the norm of
/// the image of the stored unit witness, so it never exceeds the true
/// norm; at p = 2 the method coincides with power iteration.
pub fn opnorm_lower(
    op: &dyn LinearOp,
    u: &MatrixWeight,
    v: &MatrixWeight,
    p: f64,
    opts: &LowerOpts,
) -> Result<NormEstimate> {
    crate::weights::check_exponent(p)?;
    if opts.restarts == 0 {
        return Err(Error::InvalidParam("restart count must be positive".into()));
    }
    let s = Conjugated::new(op, u, v, p)?;
    let grid = *op.grid();
    let n = op.n();
    let results: Vec<Result<RestartResult>> = (0..opts.restarts)
        .into_par_iter()
        .map(|r| {
            lower_restart(
                &s,
                &grid,
                n,
                p,
                opts.seed.wrapping_add(r as u64),
                opts,
            )
        })
        .collect();
    let mut best: Option<RestartResult> = None;
    let mut total_iters = 0;
    for res in results {
        let res = res?;
        total_iters += res.iterations;
        let better = match &best {
            None => true,
            Some(b) => res.value > b.value,
        };
        if better {
            best = Some(res);
        }
    }
    let best = best.expect("at least one restart ran");
    let value = s.apply(&best.witness)?.lp_norm(p) / best.witness.lp_norm(p);
    let witness = best
        .witness
        .scale(Complex64::new(1.0 / best.witness.lp_norm(p), 0.0));
    Ok(estimate(
        value,
        NormMode::LowerBound,
        total_iters,
        witness,
        best.residual,
    ))
}

/// Weighted norm of `T` as a map `L^p(U) → L^p(V)`: exact at p = 2,
/// otherwise a lower bound with default search options.
pub fn opnorm(
    op: &dyn LinearOp,
    u: &MatrixWeight,
    v: &MatrixWeight,
    p: f64,
    opts: &LowerOpts,
) -> Result<NormEstimate> {
    if p == 2.0 {
        opnorm_p2(op, u, v)
    } else {
        opnorm_lower(op, u, v, p, opts)
    }
}

/// Norm of the commutator `[M_B, T ⊗ I_n]` between the weighted spaces.
pub fn commutator_norm(
    b: &MatrixField,
    kind: CzoKind,
    u: &MatrixWeight,
    v: &MatrixWeight,
    p: f64,
) -> Result<NormEstimate> {
    let op = CommutatorOp {
        b: b.clone(),
        kind,
    };
    opnorm(&op, u, v, p, &LowerOpts::default())
}

/// Re-evaluates a witness against the conjugated operator, returning the
/// attained Rayleigh-type quotient.
pub fn witness_value(
    op: &dyn LinearOp,
    u: &MatrixWeight,
    v: &MatrixWeight,
    p: f64,
    witness: &VectorField,
) -> Result<f64> {
    let s = Conjugated::new(op, u, v, p)?;
    Ok(s.apply(witness)?.lp_norm(p) / witness.lp_norm(p))
}

/// Dense matrix of the conjugated operator on the coordinate basis of
/// `ℂ^(n · cells)`; intended for small-grid cross-checks.
pub fn dense_conjugated(
    op: &dyn LinearOp,
    u: &MatrixWeight,
    v: &MatrixWeight,
    p: f64,
) -> Result<CMat> {
    let s = Conjugated::new(op, u, v, p)?;
    let grid = op.grid();
    let n = op.n();
    let dim = n * grid.cell_count();
    let mut dense = CMat::zeros(dim, dim);
    for col in 0..dim {
        let mut e = VectorField::zero(grid, n);
        e.cell_mut(col / n)[col % n] = Complex64::new(1.0, 0.0);
        let img = s.apply(&e)?;
        for row in 0..dim {
            dense[(row, col)] = img.cell(row / n)[row % n];
        }
    }
    Ok(dense)
}
