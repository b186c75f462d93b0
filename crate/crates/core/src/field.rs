//! Piecewise-constant vector and matrix fields on the cell grid: the
//! functions the operators act on and the symbols B they commute with.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

use crate::dyadic::DyadicLattice;
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::linalg::{CMat, CVec};

/// Per-cell complex n-vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    grid: GridSpec,
    n: usize,
    cells: Vec<CVec>,
}

/// Per-cell complex n×n matrix field (no definiteness assumed).
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixField {
    grid: GridSpec,
    n: usize,
    cells: Vec<CMat>,
}

fn complex_gaussian(rng: &mut ChaCha20Rng) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) / 2.0f64.sqrt()
}

impl VectorField {
    pub fn zero(grid: &GridSpec, n: usize) -> Self {
        VectorField {
            grid: *grid,
            n,
            cells: vec![CVec::zeros(n); grid.cell_count()],
        }
    }

    pub fn from_cells(grid: &GridSpec, n: usize, cells: Vec<CVec>) -> Result<Self> {
        if cells.len() != grid.cell_count() {
            return Err(Error::SizeMismatch {
                context: "vector field cells",
                expected: grid.cell_count(),
                got: cells.len(),
            });
        }
        for v in &cells {
            if v.len() != n {
                return Err(Error::SizeMismatch {
                    context: "vector field entry",
                    expected: n,
                    got: v.len(),
                });
            }
            if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidParam("non-finite vector field entry".into()));
            }
        }
        Ok(VectorField {
            grid: *grid,
            n,
            cells,
        })
    }

    /// Scalar (n = 1) field from complex cell values.
    pub fn scalar(grid: &GridSpec, values: &[Complex64]) -> Result<Self> {
        let cells = values.iter().map(|&z| CVec::from_element(1, z)).collect();
        Self::from_cells(grid, 1, cells)
    }

    /// Deterministic standard complex Gaussian entries.
    pub fn random(grid: &GridSpec, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let cells = (0..grid.cell_count())
            .map(|_| CVec::from_fn(n, |_, _| complex_gaussian(&mut rng)))
            .collect();
        VectorField {
            grid: *grid,
            n,
            cells,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn cell(&self, i: usize) -> &CVec {
        &self.cells[i]
    }

    pub fn cell_mut(&mut self, i: usize) -> &mut CVec {
        &mut self.cells[i]
    }

    pub fn cells(&self) -> &[CVec] {
        &self.cells
    }

    pub fn map(&self, f: impl Fn(&CVec) -> CVec) -> VectorField {
        VectorField {
            grid: self.grid,
            n: self.n,
            cells: self.cells.iter().map(f).collect(),
        }
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &VectorField) -> VectorField {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, c: Complex64) -> VectorField {
        self.map(|v| v * c)
    }

    fn zip(&self, other: &VectorField, f: impl Fn(&CVec, &CVec) -> CVec) -> VectorField {
        VectorField {
            grid: self.grid,
            n: self.n,
            cells: self
                .cells
                .iter()
                .zip(&other.cells)
                .map(|(a, b)| f(a, b))
                .collect(),
        }
    }

    /// Mean vector over the whole grid.
    pub fn mean(&self) -> CVec {
        let mut acc = CVec::zeros(self.n);
        for v in &self.cells {
            acc += v;
        }
        acc / Complex64::new(self.cells.len() as f64, 0.0)
    }

    /// Mean vector over the listed cells.
    pub fn mean_over(&self, cells: &[usize]) -> CVec {
        let mut acc = CVec::zeros(self.n);
        for &c in cells {
            acc += &self.cells[c];
        }
        acc / Complex64::new(cells.len() as f64, 0.0)
    }

    /// Subtracts the global mean (projects onto mean-zero fields).
    pub fn remove_mean(&self) -> VectorField {
        let m = self.mean();
        self.map(|v| v - &m)
    }

    /// `L^2` inner product, conjugate-linear in `self`.
    pub fn inner(&self, other: &VectorField) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in self.cells.iter().zip(&other.cells) {
            acc += a.dotc(b);
        }
        acc * Complex64::new(self.grid.cell_volume(), 0.0)
    }

    /// `(∫ |f|^p)^{1/p}` with the Euclidean vector magnitude per cell.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let s: f64 = self.cells.iter().map(|v| v.norm().powf(p)).sum();
        (s * self.grid.cell_volume()).powf(1.0 / p)
    }

    pub fn l2_norm(&self) -> f64 {
        self.lp_norm(2.0)
    }

    /// Largest Euclidean cell magnitude.
    pub fn max_norm(&self) -> f64 {
        self.cells.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }
}

impl MatrixField {
    pub fn zero(grid: &GridSpec, n: usize) -> Self {
        MatrixField {
            grid: *grid,
            n,
            cells: vec![CMat::zeros(n, n); grid.cell_count()],
        }
    }

    pub fn constant(grid: &GridSpec, m: &CMat) -> Self {
        MatrixField {
            grid: *grid,
            n: m.nrows(),
            cells: vec![m.clone(); grid.cell_count()],
        }
    }

    pub fn from_cells(grid: &GridSpec, n: usize, cells: Vec<CMat>) -> Result<Self> {
        if cells.len() != grid.cell_count() {
            return Err(Error::SizeMismatch {
                context: "matrix field cells",
                expected: grid.cell_count(),
                got: cells.len(),
            });
        }
        for m in &cells {
            if m.nrows() != n || m.ncols() != n {
                return Err(Error::SizeMismatch {
                    context: "matrix field entry",
                    expected: n,
                    got: m.nrows(),
                });
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return Err(Error::InvalidParam("non-finite matrix field entry".into()));
            }
        }
        Ok(MatrixField {
            grid: *grid,
            n,
            cells,
        })
    }

    /// Scalar symbol embedded as 1×1 matrices.
    pub fn scalar(grid: &GridSpec, values: &[Complex64]) -> Result<Self> {
        let cells = values
            .iter()
            .map(|&z| CMat::from_element(1, 1, z))
            .collect();
        Self::from_cells(grid, 1, cells)
    }

    /// Deterministic standard complex Gaussian entries.
    pub fn random(grid: &GridSpec, n: usize, seed: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let cells = (0..grid.cell_count())
            .map(|_| CMat::from_fn(n, n, |_, _| complex_gaussian(&mut rng)))
            .collect();
        MatrixField {
            grid: *grid,
            n,
            cells,
        }
    }

    /// Random field constant on the bottom-level cubes of a lattice, so
    /// Haar reconstruction over that lattice is exact.
    pub fn random_resolved(lattice: &DyadicLattice, n: usize, seed: u64) -> Self {
        let grid = *lattice.grid();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut cells = vec![CMat::zeros(n, n); grid.cell_count()];
        for cube in lattice.level(lattice.depth()) {
            let m = CMat::from_fn(n, n, |_, _| complex_gaussian(&mut rng));
            for c in cube.cells(&grid) {
                cells[c] = m.clone();
            }
        }
        MatrixField {
            grid,
            n,
            cells,
        }
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

    pub fn cell_mut(&mut self, i: usize) -> &mut CMat {
        &mut self.cells[i]
    }

    pub fn cells(&self) -> &[CMat] {
        &self.cells
    }

    pub fn map(&self, f: impl Fn(&CMat) -> CMat) -> MatrixField {
        MatrixField {
            grid: self.grid,
            n: self.n,
            cells: self.cells.iter().map(f).collect(),
        }
    }

    pub fn add(&self, other: &MatrixField) -> MatrixField {
        MatrixField {
            grid: self.grid,
            n: self.n,
            cells: self
                .cells
                .iter()
                .zip(&other.cells)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> MatrixField {
        self.map(|m| m * c)
    }

    /// Entrywise adjoint field `B*`.
    pub fn adjoint(&self) -> MatrixField {
        self.map(|m| m.adjoint())
    }

    /// Pointwise product `B(x) f(x)`.
    pub fn apply(&self, f: &VectorField) -> Result<VectorField> {
        if f.n() != self.n {
            return Err(Error::SizeMismatch {
                context: "matrix field applied to vector field",
                expected: self.n,
                got: f.n(),
            });
        }
        Ok(VectorField {
            grid: self.grid,
            n: self.n,
            cells: self
                .cells
                .iter()
                .zip(f.cells())
                .map(|(m, v)| m * v)
                .collect(),
        })
    }

    pub fn mean(&self) -> CMat {
        let mut acc = CMat::zeros(self.n, self.n);
        for m in &self.cells {
            acc += m;
        }
        acc / Complex64::new(self.cells.len() as f64, 0.0)
    }

    pub fn mean_over(&self, cells: &[usize]) -> CMat {
        crate::weights::average_of(&self.cells, cells)
    }

    pub fn sub_constant(&self, m: &CMat) -> MatrixField {
        self.map(|c| c - m)
    }

    /// Largest entrywise modulus over all cells.
    pub fn max_abs(&self) -> f64 {
        self.cells
            .iter()
            .flat_map(|m| m.iter())
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// Writes the field format: header
/// `mwlab-field v1 dim=<d> depth=<L> kind=<vector|matrix> n=<n>`, then one
/// line per cell with the cell index and `re im` pairs (vector entries, or
/// row-major matrix entries).
pub fn write_vector_field(f: &VectorField, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "mwlab-field v1 dim={} depth={} kind=vector n={}",
        f.grid.dim, f.grid.depth, f.n
    )?;
    for (c, v) in f.cells.iter().enumerate() {
        write!(out, "{c}")?;
        for z in v.iter() {
            write!(out, " {:.16e} {:.16e}", z.re, z.im)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_matrix_field(f: &MatrixField, path: &Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        out,
        "mwlab-field v1 dim={} depth={} kind=matrix n={}",
        f.grid.dim, f.grid.depth, f.n
    )?;
    for (c, m) in f.cells.iter().enumerate() {
        write!(out, "{c}")?;
        for i in 0..f.n {
            for j in 0..f.n {
                write!(out, " {:.16e} {:.16e}", m[(i, j)].re, m[(i, j)].im)?;
            }
        }
        writeln!(out)?;
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

struct FieldHeader {
    grid: GridSpec,
    kind: &'static str,
    n: usize,
}

fn read_field_lines(
    path: &Path,
    per_cell: impl Fn(usize) -> usize,
) -> Result<(FieldHeader, Vec<Vec<Complex64>>)> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))??;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() != 6 || tokens[0] != "mwlab-field" || tokens[1] != "v1" {
        return Err(parse_err(
            path,
            1,
            "expected header 'mwlab-field v1 dim=<d> depth=<L> kind=<vector|matrix> n=<n>'",
        ));
    }
    let field = |tok: &str, name: &str| -> Result<String> {
        tok.strip_prefix(&format!("{name}="))
            .map(str::to_string)
            .ok_or_else(|| parse_err(path, 1, format!("bad {name} field")))
    };
    let dim: usize = field(tokens[2], "dim")?
        .parse()
        .map_err(|_| parse_err(path, 1, "bad dim"))?;
    let depth: u32 = field(tokens[3], "depth")?
        .parse()
        .map_err(|_| parse_err(path, 1, "bad depth"))?;
    let kind_s = field(tokens[4], "kind")?;
    let kind = match kind_s.as_str() {
        "vector" => "vector",
        "matrix" => "matrix",
        other => return Err(parse_err(path, 1, format!("unknown kind '{other}'"))),
    };
    let n: usize = field(tokens[5], "n")?
        .parse()
        .map_err(|_| parse_err(path, 1, "bad n"))?;
    let grid = GridSpec::new(dim, depth)?;
    let want = per_cell(n);
    let mut cells: Vec<Option<Vec<Complex64>>> = vec![None; grid.cell_count()];
    for (lno, line) in lines.enumerate() {
        let line = line?;
        let lno = lno + 2;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 1 + 2 * want {
            return Err(parse_err(
                path,
                lno,
                format!("expected cell index plus {} floats", 2 * want),
            ));
        }
        let idx: usize = parts[0]
            .parse()
            .map_err(|_| parse_err(path, lno, "bad cell index"))?;
        if idx >= grid.cell_count() {
            return Err(parse_err(path, lno, format!("cell index {idx} out of range")));
        }
        let mut entries = Vec::with_capacity(want);
        for k in 0..want {
            let re: f64 = parts[1 + 2 * k]
                .parse()
                .map_err(|_| parse_err(path, lno, "bad float"))?;
            let im: f64 = parts[2 + 2 * k]
                .parse()
                .map_err(|_| parse_err(path, lno, "bad float"))?;
            entries.push(Complex64::new(re, im));
        }
        if cells[idx].replace(entries).is_some() {
            return Err(parse_err(path, lno, format!("duplicate cell {idx}")));
        }
    }
    let mut out = Vec::with_capacity(cells.len());
    for (i, c) in cells.into_iter().enumerate() {
        out.push(c.ok_or_else(|| parse_err(path, 0, format!("missing cell {i}")))?);
    }
    Ok((FieldHeader { grid, kind, n }, out))
}

pub fn read_vector_field(path: &Path) -> Result<VectorField> {
    let (h, rows) = read_field_lines(path, |n| n)?;
    if h.kind != "vector" {
        return Err(parse_err(path, 1, "expected kind=vector"));
    }
    let cells = rows.into_iter().map(CVec::from_vec).collect();
    VectorField::from_cells(&h.grid, h.n, cells)
}

pub fn read_matrix_field(path: &Path) -> Result<MatrixField> {
    let (h, rows) = read_field_lines(path, |n| n * n)?;
    if h.kind != "matrix" {
        return Err(parse_err(path, 1, "expected kind=matrix"));
    }
    let n = h.n;
    let cells = rows
        .into_iter()
        .map(|r| CMat::from_fn(n, n, |i, j| r[i * n + j]))
        .collect();
    MatrixField::from_cells(&h.grid, n, cells)
}
