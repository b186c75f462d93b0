//! Matrix weights on the cell grid: fractional powers, Muckenhoupt A_p and
//! scalar A-infinity characteristics, reducing matrices, and generators.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dyadic::{CubeFamily, CubeId, DyadicLattice, Shift};
use crate::error::{Error, Result};
use crate::grid::{GridSpec, MAX_DIM};
use crate::linalg::{herm_recompose, hermitian_part, op_norm, CMat, CVec};

/// Default per-cell condition number cap.
pub const DEFAULT_COND_CAP: f64 = 1e12;
/// Hermitian ingestion tolerance, relative to the cell's operator norm.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Direction count factor for reducing-matrix fits: `64·n²` samples.
pub const DIRECTION_FACTOR: usize = 64;
/// Fit tolerance for the John-bound certification band.
pub const FIT_DELTA: f64 = 0.05;

pub fn conjugate_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

pub fn check_exponent(p: f64) -> Result<()> {
    if p.is_finite() && p > 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParam(format!(
            "exponent p must lie in (1, inf), got {p}"
        )))
    }
}

/// Piecewise-constant Hermitian positive definite matrix field.
///
/// Cell matrices are symmetrized on ingestion and eigendecomposed once;
/// fractional powers are served from a per-exponent cache.
pub struct MatrixWeight {
    grid: GridSpec,
    n: usize,
    cells: Vec<CMat>,
    eigen: Vec<(Vec<f64>, CMat)>,
    powers: RwLock<HashMap<u64, Arc<Vec<CMat>>>>,
}

impl Clone for MatrixWeight {
    fn clone(&self) -> Self {
        MatrixWeight {
            grid: self.grid,
            n: self.n,
            cells: self.cells.clone(),
            eigen: self.eigen.clone(),
            powers: RwLock::new(HashMap::new()),
        }
    }
}

impl fmt::Debug for MatrixWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MatrixWeight")
            .field("grid", &self.grid)
            .field("n", &self.n)
            .field("cells", &self.cells.len())
            .finish()
    }
}

impl MatrixWeight {
    pub fn from_cells(grid: &GridSpec, n: usize, cells: Vec<CMat>) -> Result<Self> {
        Self::from_cells_with_cap(grid, n, cells, DEFAULT_COND_CAP)
    }

    pub fn from_cells_with_cap(
        grid: &GridSpec,
        n: usize,
        cells: Vec<CMat>,
        cond_cap: f64,
    ) -> Result<Self> {
        if n == 0 || n > 8 {
            return Err(Error::InvalidParam(format!(
                "matrix size n must be in 1..=8, got {n}"
            )));
        }
        if cells.len() != grid.cell_count() {
            return Err(Error::SizeMismatch {
                context: "weight cells",
                expected: grid.cell_count(),
                got: cells.len(),
            });
        }
        let mut clean = Vec::with_capacity(cells.len());
        let mut eigen = Vec::with_capacity(cells.len());
        for (i, raw) in cells.into_iter().enumerate() {
            if raw.nrows() != n || raw.ncols() != n {
                return Err(Error::SizeMismatch {
                    context: "weight cell matrix",
                    expected: n,
                    got: raw.nrows(),
                });
            }
            let (h, asym) = hermitian_part(&raw);
            let scale = op_norm(&h).max(1.0);
            if asym > HERMITIAN_TOL * scale {
                return Err(Error::NotHermitian {
                    cell: i,
                    asymmetry: asym,
                });
            }
            let (vals, vecs) = crate::linalg::herm_eigen(&h);
            let min = vals[0];
            let max = vals[n - 1];
            if min <= 0.0 {
                return Err(Error::NotPositiveDefinite {
                    cell: i,
                    eigenvalue: min,
                });
            }
            if max / min > cond_cap {
                return Err(Error::IllConditioned {
                    cell: i,
                    cond: max / min,
                    cap: cond_cap,
                });
            }
            clean.push(h);
            eigen.push((vals, vecs));
        }
        Ok(MatrixWeight {
            grid: *grid,
            n,
            cells: clean,
            eigen,
            powers: RwLock::new(HashMap::new()),
        })
    }

    /// Constructs directly from a known eigensystem, skipping validation.
    fn from_eigen(grid: GridSpec, n: usize, eigen: Vec<(Vec<f64>, CMat)>) -> Self {
        let cells = eigen
            .iter()
            .map(|(vals, vecs)| herm_recompose(vals, vecs, |l| l))
            .collect();
        MatrixWeight {
            grid,
            n,
            cells,
            eigen,
            powers: RwLock::new(HashMap::new()),
        }
    }

    pub fn identity(grid: &GridSpec, n: usize) -> Self {
        let eigen = (0..grid.cell_count())
            .map(|_| (vec![1.0; n], CMat::identity(n, n)))
            .collect();
        Self::from_eigen(*grid, n, eigen)
    }

    /// Scalar weight (n = 1) from per-cell positive values.
    pub fn scalar(grid: &GridSpec, values: &[f64]) -> Result<Self> {
        let cells = values
            .iter()
            .map(|&v| CMat::from_element(1, 1, Complex64::new(v, 0.0)))
            .collect();
        Self::from_cells(grid, 1, cells)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cell(&self, i: usize) -> &CMat {
        &self.cells[i]
    }

    pub fn cells(&self) -> &[CMat] {
        &self.cells
    }

    /// Per-cell eigenvalues in ascending order.
    pub fn cell_eigenvalues(&self, i: usize) -> &[f64] {
        &self.eigen[i].0
    }

    /// Per-cell field of `W^s`, cached by exponent.
    pub fn power_field(&self, s: f64) -> Arc<Vec<CMat>> {
        let key = s.to_bits();
        if let Some(hit) = self.powers.read().unwrap().get(&key) {
            return hit.clone();
        }
        let field: Vec<CMat> = self
            .eigen
            .iter()
            .map(|(vals, vecs)| herm_recompose(vals, vecs, |l| l.powf(s)))
            .collect();
        let arc = Arc::new(field);
        self.powers
            .write()
            .unwrap()
            .entry(key)
            .or_insert_with(|| arc.clone());
        arc
    }

    /// `W^s` as a full weight (positive definite by construction).
    pub fn power_weight(&self, s: f64) -> MatrixWeight {
        let eigen = self
            .eigen
            .iter()
            .map(|(vals, vecs)| {
                (
                    vals.iter().map(|l| l.powf(s)).collect::<Vec<f64>>(),
                    vecs.clone(),
                )
            })
            .collect();
        Self::from_eigen(self.grid, self.n, eigen)
    }

    /// Mean of the cell matrices over the listed cells.
    pub fn average(&self, cells: &[usize]) -> CMat {
        average_of(&self.cells, cells)
    }

    /// Mean of `W^s` over the listed cells.
    pub fn average_power(&self, s: f64, cells: &[usize]) -> CMat {
        average_of(&self.power_field(s), cells)
    }

    pub fn scale(&self, c: f64) -> Result<MatrixWeight> {
        if c <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "weight scale factor must be positive, got {c}"
            )));
        }
        let eigen = self
            .eigen
            .iter()
            .map(|(vals, vecs)| {
                (
                    vals.iter().map(|l| c * l).collect::<Vec<f64>>(),
                    vecs.clone(),
                )
            })
            .collect();
        Ok(Self::from_eigen(self.grid, self.n, eigen))
    }

    /// Conjugates every cell by one fixed unitary: `Q* W Q`.
    pub fn conjugate(&self, q: &CMat) -> Result<MatrixWeight> {
        let cells = self.cells.iter().map(|w| q.adjoint() * w * q).collect();
        Self::from_cells(&self.grid, self.n, cells)
    }
}

/// Mean of a slice of equal-sized matrices over the listed cell indices.
pub fn average_of(field: &[CMat], cells: &[usize]) -> CMat {
    let n = field[0].nrows();
    let mut acc = CMat::zeros(n, n);
    for &c in cells {
        acc += &field[c];
    }
    acc / Complex64::new(cells.len() as f64, 0.0)
}

/// Per-cell power of a weight as a plain field: realizes `W^{1/p}`,
/// `W^{-p'/p}` and `(Φ*Φ)^{p/2}`.
pub fn matrix_power(w: &MatrixWeight, s: f64) -> MatrixWeight {
    w.power_weight(s)
}

/// Matrix Muckenhoupt characteristic over a cube family:
/// `sup_Q fint_x (fint_y ‖W^{1/p}(x) W^{-1/p}(y)‖^{p'} dy)^{p/p'} dx`.
/// With `dual` set, inner/outer variables and exponents are exchanged,
/// which evaluates the same supremum raised to `p'/p`.
pub fn ap_characteristic(
    w: &MatrixWeight,
    p: f64,
    family: &CubeFamily,
    dual: bool,
) -> Result<f64> {
    check_exponent(p)?;
    if family.grid() != w.grid() {
        return Err(Error::GridMismatch("weight vs cube family"));
    }
    let pc = conjugate_exponent(p);
    let wp = w.power_field(1.0 / p);
    let wm = w.power_field(-1.0 / p);
    let cubes: Vec<Vec<usize>> = family
        .iter()
        .map(|(_, lat, id)| lat.cube(id).cells(lat.grid()))
        .collect();
    let (inner_e, outer_e) = if dual { (p, pc / p) } else { (pc, p / pc) };
    let vals: Vec<f64> = cubes
        .par_iter()
        .map(|cells| {
            let count = cells.len() as f64;
            let mut outer = 0.0;
            for &x in cells {
                let mut inner = 0.0;
                for &y in cells {
                    let prod = if dual {
                        // dual form integrates over x inside, so the roles
                        // of the fixed and moving variable swap
                        &wp[y] * &wm[x]
                    } else {
                        &wp[x] * &wm[y]
                    };
                    inner += op_norm(&prod).powf(inner_e);
                }
                outer += (inner / count).powf(outer_e);
            }
            outer / count
        })
        .collect();
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Deterministic unit directions in `C^n`: the coordinate axes first, then
/// Halton-driven Gaussian vectors normalized to the sphere.
pub fn unit_directions(n: usize, count: usize) -> Vec<CVec> {
    const PRIMES: [u64; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];
    fn halton(mut i: u64, base: u64) -> f64 {
        let mut f = 1.0;
        let mut r = 0.0;
        while i > 0 {
            f /= base as f64;
            r += f * (i % base) as f64;
            i /= base;
        }
        r
    }
    let mut out = Vec::with_capacity(count);
    for a in 0..n.min(count) {
        let mut e = CVec::zeros(n);
        e[a] = Complex64::new(1.0, 0.0);
        out.push(e);
    }
    let mut idx = 1u64;
    while out.len() < count {
        let mut v = CVec::zeros(n);
        for j in 0..n {
            let u1 = halton(idx, PRIMES[2 * j]).max(1e-12);
            let u2 = halton(idx, PRIMES[2 * j + 1]);
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            v[j] = Complex64::new(r * c, r * s);
        }
        let norm = v.norm();
        if norm > 1e-9 {
            out.push(v / Complex64::new(norm, 0.0));
        }
        idx += 1;
    }
    out
}

/// Sampled-direction certification for one reducing matrix.
#[derive(Debug, Clone, Copy)]
pub struct Certification {
    pub directions: usize,
    /// Extremes of `|R e| / ρ(e)` over the sample.
    pub min_ratio: f64,
    pub max_ratio: f64,
    /// Whether both extremes lie in `[n^-1/2 (1-δ), n^1/2 (1+δ)]`.
    pub within_john: bool,
}

/// Reducing matrices of one cube: the L^p matrix `U_Q` for `W` and the
/// L^{p'} matrix `U'_Q` for `W^{-1/p}`, with certification data.
#[derive(Debug, Clone)]
pub struct ReducingPair {
    pub cube: CubeId,
    pub p: f64,
    pub primal: CMat,
    pub dual: CMat,
    pub primal_cert: Certification,
    pub dual_cert: Certification,
}

/// `ρ(e) = (avg_{cells} |F(x) e|^q)^{1/q}` for a per-cell matrix field F.
fn rho(field: &[CMat], cells: &[usize], q: f64, e: &CVec) -> f64 {
    let mut acc = 0.0;
    for &c in cells {
        acc += (&field[c] * e).norm().powf(q);
    }
    (acc / cells.len() as f64).powf(1.0 / q)
}

fn certify(h_sqrt: &CMat, field: &[CMat], cells: &[usize], q: f64, dirs: &[CVec]) -> Certification {
    let n = h_sqrt.nrows() as f64;
    let mut min_ratio = f64::INFINITY;
    let mut max_ratio = 0.0f64;
    for e in dirs {
        let denom = rho(field, cells, q, e);
        if denom <= 0.0 {
            continue;
        }
        let ratio = (h_sqrt * e).norm() / denom;
        min_ratio = min_ratio.min(ratio);
        max_ratio = max_ratio.max(ratio);
    }
    Certification {
        directions: dirs.len(),
        min_ratio,
        max_ratio,
        within_john: min_ratio >= (1.0 - FIT_DELTA) / n.sqrt()
            && max_ratio <= (1.0 + FIT_DELTA) * n.sqrt(),
    }
}

/// Least-squares fit of a Hermitian H with `⟨He,e⟩ ≈ ρ(e)²` over samples.
fn fit_quadratic_form(n: usize, dirs: &[CVec], values: &[f64]) -> Option<CMat> {
    let params = n * n;
    let rows = dirs.len();
    let mut a = DMatrix::<f64>::zeros(rows, params);
    for (r, e) in dirs.iter().enumerate() {
        let mut col = 0;
        for i in 0..n {
            a[(r, col)] = e[i].norm_sqr();
            col += 1;
        }
        for i in 0..n {
            for j in i + 1..n {
                let z = e[i].conj() * e[j];
                a[(r, col)] = 2.0 * z.re;
                a[(r, col + 1)] = -2.0 * z.im;
                col += 2;
            }
        }
    }
    let b = DVector::from_column_slice(values);
    let sol = a.svd(true, true).solve(&b, 1e-12).ok()?;
    let mut h = CMat::zeros(n, n);
    let mut col = 0;
    for i in 0..n {
        h[(i, i)] = Complex64::new(sol[col], 0.0);
        col += 1;
    }
    for i in 0..n {
        for j in i + 1..n {
            h[(i, j)] = Complex64::new(sol[col], sol[col + 1]);
            h[(j, i)] = h[(i, j)].conj();
            col += 2;
        }
    }
    Some(h)
}

/// One-sided reducing matrix for the norm `ρ(e) = (avg |F e|^q)^{1/q}`.
/// Exact for scalars and for q = 2; least-squares ellipsoid fit otherwise.
fn reduce_field(field: &[CMat], cells: &[usize], q: f64, directions: usize) -> (CMat, Certification) {
    let n = field[0].nrows();
    if n == 1 {
        let mut acc = 0.0;
        for &c in cells {
            acc += field[c][(0, 0)].norm().powf(q);
        }
        let r = (acc / cells.len() as f64).powf(1.0 / q);
        let m = CMat::from_element(1, 1, Complex64::new(r, 0.0));
        let cert = certify(&m, field, cells, q, &unit_directions(1, 2));
        return (m, cert);
    }
    if (q - 2.0).abs() < 1e-14 {
        let mut h = CMat::zeros(n, n);
        for &c in cells {
            h += field[c].adjoint() * &field[c];
        }
        h /= Complex64::new(cells.len() as f64, 0.0);
        let r = crate::linalg::herm_map(&h, |l| l.max(0.0).sqrt());
        let cert = certify(&r, field, cells, q, &unit_directions(n, 16.max(2 * n * n)));
        return (r, cert);
    }
    let dirs = unit_directions(n, directions.max(2 * n * n));
    let values: Vec<f64> = dirs.iter().map(|e| rho(field, cells, q, e).powi(2)).collect();
    let fitted = fit_quadratic_form(n, &dirs, &values);
    let h = match fitted {
        Some(h) => {
            let (vals, _) = crate::linalg::herm_eigen(&h);
            if vals[0] > 0.0 {
                h
            } else {
                average_of(field, cells).adjoint() * average_of(field, cells)
            }
        }
        None => average_of(field, cells).adjoint() * average_of(field, cells),
    };
    let r = crate::linalg::herm_map(&h, |l| l.max(0.0).sqrt());
    let cert = certify(&r, field, cells, q, &dirs);
    (r, cert)
}

/// Reducing pair for one cube.
pub fn reducing_pair(
    w: &MatrixWeight,
    lattice: &DyadicLattice,
    id: CubeId,
    p: f64,
    directions: usize,
) -> Result<ReducingPair> {
    check_exponent(p)?;
    if lattice.grid() != w.grid() {
        return Err(Error::GridMismatch("weight vs lattice"));
    }
    let cells = lattice.cube(id).cells(lattice.grid());
    let pc = conjugate_exponent(p);
    let wp = w.power_field(1.0 / p);
    let wm = w.power_field(-1.0 / p);
    let (primal, primal_cert) = reduce_field(&wp, &cells, p, directions);
    let (dual, dual_cert) = reduce_field(&wm, &cells, pc, directions);
    Ok(ReducingPair {
        cube: id,
        p,
        primal,
        dual,
        primal_cert,
        dual_cert,
    })
}

/// Reducing pairs for every cube of a lattice, indexed by lattice ordinal.
pub fn reducing_matrices(
    w: &MatrixWeight,
    lattice: &DyadicLattice,
    p: f64,
) -> Result<Vec<ReducingPair>> {
    let ids: Vec<CubeId> = lattice.ids().collect();
    let directions = DIRECTION_FACTOR * w.n() * w.n();
    ids.par_iter()
        .map(|&id| reducing_pair(w, lattice, id, p, directions))
        .collect()
}

/// Scalar A-infinity characteristic of the nonnegative cell field `g`:
/// `sup_Q (1/g(Q)) ∫_Q M(g 1_Q)` with M the maximum of the `2^d` shifted
/// dyadic maximal functions.
pub fn scalar_ainfty(g: &[f64], family: &CubeFamily, maximal: &[DyadicLattice]) -> f64 {
    let grid = family.grid();
    let cubes: Vec<Vec<usize>> = family
        .iter()
        .map(|(_, lat, id)| lat.cube(id).cells(lat.grid()))
        .collect();
    let vals: Vec<f64> = cubes
        .par_iter()
        .map(|cells| {
            let mut gq = vec![0.0; grid.cell_count()];
            let mut total = 0.0;
            for &c in cells {
                gq[c] = g[c];
                total += g[c];
            }
            if total <= 0.0 {
                return 1.0;
            }
            // per-lattice subtree sums of the restricted field
            let sums: Vec<Vec<f64>> = maximal
                .iter()
                .map(|lat| {
                    let mut s = vec![0.0; lat.cube_count()];
                    for k in (0..=lat.depth()).rev() {
                        for (pos, cube) in lat.level(k).iter().enumerate() {
                            let ord = lat.ordinal(CubeId {
                                level: k,
                                pos: pos as u32,
                            });
                            s[ord] = if k == lat.depth() {
                                cube.cells(grid).iter().map(|&c| gq[c]).sum()
                            } else {
                                cube.children.iter().map(|&ch| s[lat.ordinal(ch)]).sum()
                            };
                        }
                    }
                    s
                })
                .collect();
            let mut maximal_sum = 0.0;
            for &c in cells {
                let coords = grid.cell_coords(c);
                let mut m = 0.0f64;
                for (lat, s) in maximal.iter().zip(&sums) {
                    for k in 0..=lat.depth() {
                        let id = lat.cube_at(k, coords);
                        let cube = lat.cube(id);
                        m = m.max(s[lat.ordinal(id)] / cube.volume_cells(grid.dim) as f64);
                    }
                }
                maximal_sum += m;
            }
            maximal_sum / total
        })
        .collect();
    vals.into_iter().fold(0.0, f64::max)
}

/// Scalar A-infinity characteristic of a matrix weight:
/// `sup_e [ |W^{1/p}(·) e|^p ]_{A_inf}` over sampled unit directions.
pub fn ainfty_scalar(
    w: &MatrixWeight,
    p: f64,
    family: &CubeFamily,
    directions: usize,
) -> Result<f64> {
    check_exponent(p)?;
    if family.grid() != w.grid() {
        return Err(Error::GridMismatch("weight vs cube family"));
    }
    let n = w.n();
    if n > 1 && directions < 2 * n * n {
        return Err(Error::InvalidParam(format!(
            "direction sample {directions} below the 2n^2 = {} floor",
            2 * n * n
        )));
    }
    let grid = *w.grid();
    let maximal: Vec<DyadicLattice> = Shift::all(grid.dim)
        .into_iter()
        .map(|s| DyadicLattice::build(&grid, s))
        .collect();
    let wp = w.power_field(1.0 / p);
    let dirs = if n == 1 {
        unit_directions(1, 1)
    } else {
        unit_directions(n, directions)
    };
    let mut best = 0.0f64;
    for e in &dirs {
        let g: Vec<f64> = wp.iter().map(|m| (m * e).norm().powf(p)).collect();
        best = best.max(scalar_ainfty(&g, family, &maximal));
    }
    Ok(best)
}

/// Weight generator tags.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightKind {
    /// `|x - center|^alpha` on the torus, embedded as `diag(w, 1, ..., 1)`.
    PowerLaw {
        n: usize,
        alpha: f64,
        center: [f64; MAX_DIM],
    },
    /// `R(x) D(x) R(x)^T` with trig-polynomial angles and log-entries.
    RotatedDiagonal { n: usize, amplitude: f64 },
    /// `exp(sigma * G(x))` with i.i.d. Gaussian Hermitian `G`.
    LogGaussian { n: usize, sigma: f64 },
    /// Explicit per-cell table read from a file.
    Table { path: PathBuf },
}

/// Evaluates a trig polynomial with the given per-axis coefficients.
fn trig_poly(coef: &[[f64; 4]], x: &[f64; MAX_DIM], dim: usize) -> f64 {
    let mut acc = 0.0;
    for a in 0..dim {
        let t = std::f64::consts::TAU * x[a];
        let c = &coef[a];
        acc += c[0] * t.cos() + c[1] * t.sin() + 0.5 * (c[2] * (2.0 * t).cos() + c[3] * (2.0 * t).sin());
    }
    acc
}

fn draw_coeffs(rng: &mut ChaCha20Rng, dim: usize) -> Vec<[f64; 4]> {
    (0..dim)
        .map(|_| {
            let mut c = [0.0; 4];
            for v in &mut c {
                *v = rng.gen_range(-1.0..1.0);
            }
            c
        })
        .collect()
}

/// Plane rotation in coordinates (i, j) by angle theta, embedded in n×n.
fn plane_rotation(n: usize, i: usize, j: usize, theta: f64) -> CMat {
    let mut r = CMat::identity(n, n);
    let (s, c) = theta.sin_cos();
    r[(i, i)] = Complex64::new(c, 0.0);
    r[(j, j)] = Complex64::new(c, 0.0);
    r[(i, j)] = Complex64::new(-s, 0.0);
    r[(j, i)] = Complex64::new(s, 0.0);
    r
}

/// Deterministic weight factory; identical seeds give bit-identical output.
pub fn generate_weight(
    grid: &GridSpec,
    kind: &WeightKind,
    p: f64,
    seed: u64,
) -> Result<MatrixWeight> {
    check_exponent(p)?;
    match kind {
        WeightKind::PowerLaw { n, alpha, center } => {
            let d = grid.dim as f64;
            let (lo, hi) = (-d, d * (p - 1.0));
            if !(*alpha > lo && *alpha < hi) {
                return Err(Error::AlphaOutOfRange {
                    alpha: *alpha,
                    p,
                    lo,
                    hi,
                });
            }
            let cells = (0..grid.cell_count())
                .map(|c| {
                    let x = grid.cell_center(c);
                    let r = grid.torus_distance(x, *center);
                    let w = r.powf(*alpha).clamp(1e-6, 1e6);
                    let mut m = CMat::identity(*n, *n);
                    m[(0, 0)] = Complex64::new(w, 0.0);
                    m
                })
                .collect();
            MatrixWeight::from_cells(grid, *n, cells)
        }
        WeightKind::RotatedDiagonal { n, amplitude } => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let amp = amplitude.abs().min(3.0);
            let log_coefs: Vec<Vec<[f64; 4]>> =
                (0..*n).map(|_| draw_coeffs(&mut rng, grid.dim)).collect();
            let angle_coefs: Vec<Vec<[f64; 4]>> = (0..n.saturating_sub(1))
                .map(|_| draw_coeffs(&mut rng, grid.dim))
                .collect();
            let cells = (0..grid.cell_count())
                .map(|c| {
                    let x = grid.cell_center(c);
                    let mut d = CMat::zeros(*n, *n);
                    for i in 0..*n {
                        d[(i, i)] =
                            Complex64::new((amp * trig_poly(&log_coefs[i], &x, grid.dim)).exp(), 0.0);
                    }
                    let mut r = CMat::identity(*n, *n);
                    for (i, coefs) in angle_coefs.iter().enumerate() {
                        r *= plane_rotation(*n, i, i + 1, trig_poly(coefs, &x, grid.dim));
                    }
                    &r * d * r.transpose()
                })
                .collect();
            MatrixWeight::from_cells(grid, *n, cells)
        }
        WeightKind::LogGaussian { n, sigma } => {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let cells = (0..grid.cell_count())
                .map(|_| {
                    let mut g = CMat::zeros(*n, *n);
                    for i in 0..*n {
                        let v: f64 = rng.sample(StandardNormal);
                        g[(i, i)] = Complex64::new(v, 0.0);
                        for j in i + 1..*n {
                            let re: f64 = rng.sample(StandardNormal);
                            let im: f64 = rng.sample(StandardNormal);
                            let z = Complex64::new(re, im) / 2.0f64.sqrt();
                            g[(i, j)] = z;
                            g[(j, i)] = z.conj();
                        }
                    }
                    crate::linalg::herm_map(&g, |l| (sigma * l).clamp(-13.5, 13.5).exp())
                })
                .collect();
            MatrixWeight::from_cells(grid, *n, cells)
        }
        WeightKind::Table { path } => read_weight_table(path),
    }
}

/// Writes the weight-table format: a header
/// `mwlab-weight-table v1 dim=<d> depth=<L> n=<n>` followed by one line
/// per cell, `<cell> <re> <im> ...` over row-major entries with 17
/// significant digits.
pub fn write_weight_table(w: &MatrixWeight, path: &Path) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        f,
        "mwlab-weight-table v1 dim={} depth={} n={}",
        w.grid.dim, w.grid.depth, w.n
    )?;
    for (c, m) in w.cells.iter().enumerate() {
        write!(f, "{c}")?;
        for i in 0..w.n {
            for j in 0..w.n {
                write!(f, " {:.16e} {:.16e}", m[(i, j)].re, m[(i, j)].im)?;
            }
        }
        writeln!(f)?;
    }
    Ok(())
}

fn parse_err(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        reason: reason.into(),
    }
}

/// Reads the weight-table format written by [`write_weight_table`].
pub fn read_weight_table(path: &Path) -> Result<MatrixWeight> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))??;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 5 || tokens[0] != "mwlab-weight-table" || tokens[1] != "v1" {
        return Err(parse_err(path, 1, "expected header 'mwlab-weight-table v1 dim=<d> depth=<L> n=<n>'"));
    }
    let field = |tok: &str, name: &str| -> Result<u64> {
        tok.strip_prefix(&format!("{name}="))
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| parse_err(path, 1, format!("bad {name} field")))
    };
    let dim = field(tokens[2], "dim")? as usize;
    let depth = field(tokens[3], "depth")? as u32;
    let n = field(tokens[4], "n")? as usize;
    let grid = GridSpec::new(dim, depth)?;
    let mut cells = vec![None; grid.cell_count()];
    for (lno, line) in lines.enumerate() {
        let line = line?;
        let lno = lno + 2;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 1 + 2 * n * n {
            return Err(parse_err(
                path,
                lno,
                format!("expected cell index plus {} floats", 2 * n * n),
            ));
        }
        let idx: usize = parts[0]
            .parse()
            .map_err(|_| parse_err(path, lno, "bad cell index"))?;
        if idx >= grid.cell_count() {
            return Err(parse_err(path, lno, format!("cell index {idx} out of range")));
        }
        let mut m = CMat::zeros(n, n);
        let mut k = 1;
        for i in 0..n {
            for j in 0..n {
                let re: f64 = parts[k]
                    .parse()
                    .map_err(|_| parse_err(path, lno, "bad float"))?;
                let im: f64 = parts[k + 1]
                    .parse()
                    .map_err(|_| parse_err(path, lno, "bad float"))?;
                m[(i, j)] = Complex64::new(re, im);
                k += 2;
            }
        }
        if cells[idx].replace(m).is_some() {
            return Err(parse_err(path, lno, format!("duplicate cell {idx}")));
        }
    }
    let mut out = Vec::with_capacity(cells.len());
    for (i, c) in cells.into_iter().enumerate() {
        out.push(c.ok_or_else(|| parse_err(path, 0, format!("missing cell {i}")))?);
    }
    MatrixWeight::from_cells(&grid, n, out)
}
