//! Periodic Calderón–Zygmund operators realized as Fourier multipliers on
//! the cell grid via the FFT.
//!
//! Frequencies are the signed integers obtained by folding DFT bin `k` to
//! `k - N` for `k > N/2`, so the Nyquist bin (present when the axis length
//! is even) carries `+N/2`. Every multiplier below is purely imaginary and
//! unimodular away from the zero frequency, which makes the operators
//! exactly anti-self-adjoint and exactly norm-preserving on mean-zero
//! fields in the discrete `L^2` inner product.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::{CellSet, GridSpec};

/// Convolution kernel choice for [`apply_czo`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CzoKind {
    /// Multiplier `-i·sgn(ξ)`; dimension 1 only.
    Hilbert,
    /// `ℓ`-th Riesz transform, multiplier `-i·ξ_ℓ/|ξ|` with value 0 at the
    /// zero frequency; `ℓ` is 1-based and at most the grid dimension.
    Riesz(usize),
}

impl CzoKind {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match *self {
            CzoKind::Hilbert if dim == 1 => Ok(()),
            CzoKind::Hilbert => Err(Error::InvalidParam(
                "Hilbert transform requires a one-dimensional grid".into(),
            )),
            CzoKind::Riesz(l) if 1 <= l && l <= dim => Ok(()),
            CzoKind::Riesz(l) => Err(Error::InvalidParam(format!(
                "Riesz component {l} out of range for dimension {dim}"
            ))),
        }
    }

    /// Multiplier value at signed frequency `xi` (second entry unused in
    /// dimension 1).
    pub fn multiplier(&self, xi: [i64; 2], dim: usize) -> Complex64 {
        let l = match *self {
            CzoKind::Hilbert => 1,
            CzoKind::Riesz(l) => l,
        };
        let norm = match dim {
            1 => (xi[0] * xi[0]) as f64,
            _ => (xi[0] * xi[0] + xi[1] * xi[1]) as f64,
        }
        .sqrt();
        if norm == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        Complex64::new(0.0, -(xi[l - 1] as f64) / norm)
    }
}

fn signed_frequency(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

type PlanKey = (usize, bool);

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<PlanKey, Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("fft plan cache poisoned");
    guard
        .entry((n, inverse))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// Unnormalized forward or inverse DFT along every axis, in place.
fn fft_grid(data: &mut [Complex64], grid: &GridSpec, inverse: bool) {
    let n = grid.cells_per_axis();
    let fft = plan(n, inverse);
    match grid.dim {
        1 => fft.process(data),
        _ => {
            for row in data.chunks_exact_mut(n) {
                fft.process(row);
            }
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for x in 0..n {
                for y in 0..n {
                    col[y] = data[y * n + x];
                }
                fft.process(&mut col);
                for y in 0..n {
                    data[y * n + x] = col[y];
                }
            }
        }
    }
}

fn zero_outside(f: &VectorField, set: &CellSet) -> VectorField {
    let n = f.n();
    let mut out = f.clone();
    for c in 0..f.grid().cell_count() {
        if !set.contains(c) {
            *out.cell_mut(c) = crate::linalg::CVec::zeros(n);
        }
    }
    out
}

/// Applies the operator componentwise (`T ⊗ I_n` on vector fields). With a
/// restriction set `E` the result is `1_E T (1_E f)`.
pub fn apply_czo(
    kind: CzoKind,
    f: &VectorField,
    restriction: Option<&CellSet>,
) -> Result<VectorField> {
    let grid = *f.grid();
    kind.validate(grid.dim)?;
    if let Some(set) = restriction {
        if set.domain_size() != grid.cell_count() {
            return Err(Error::SizeMismatch {
                context: "restriction set",
                expected: grid.cell_count(),
                got: set.domain_size(),
            });
        }
        let inner = apply_czo(kind, &zero_outside(f, set), None)?;
        return Ok(zero_outside(&inner, set));
    }

    let n = grid.cells_per_axis();
    let cell_count = grid.cell_count();
    let scale = Complex64::new(1.0 / cell_count as f64, 0.0);
    let mut out = VectorField::zero(&grid, f.n());
    let mut buf = vec![Complex64::new(0.0, 0.0); cell_count];
    for comp in 0..f.n() {
        for (c, slot) in buf.iter_mut().enumerate() {
            *slot = f.cell(c)[comp];
        }
        fft_grid(&mut buf, &grid, false);
        match grid.dim {
            1 => {
                for (k, v) in buf.iter_mut().enumerate() {
                    *v *= kind.multiplier([signed_frequency(k, n), 0], 1);
                }
            }
            _ => {
                for ky in 0..n {
                    let sy = signed_frequency(ky, n);
                    for kx in 0..n {
                        let sx = signed_frequency(kx, n);
                        buf[ky * n + kx] *= kind.multiplier([sx, sy], 2);
                    }
                }
            }
        }
        fft_grid(&mut buf, &grid, true);
        for (c, &v) in buf.iter().enumerate() {
            out.cell_mut(c)[comp] = v * scale;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::TAU;

    fn scalar_field(grid: &GridSpec, f: impl Fn(f64, f64) -> Complex64) -> VectorField {
        let vals: Vec<Complex64> = (0..grid.cell_count())
            .map(|c| {
                let x = grid.cell_center(c);
                f(x[0], x[1])
            })
            .collect();
        VectorField::scalar(grid, &vals).unwrap()
    }

    /// Direct quadratic-time DFT evaluation of the same multiplier, as an
    /// independent check on the FFT path.
    fn brute_apply(kind: CzoKind, f: &VectorField) -> VectorField {
        let grid = *f.grid();
        let n = grid.cells_per_axis();
        let cell_count = grid.cell_count();
        let mut out = VectorField::zero(&grid, f.n());
        let freq_of = |c: usize| -> [i64; 2] {
            match grid.dim {
                1 => [signed_frequency(c, n), 0],
                _ => [signed_frequency(c % n, n), signed_frequency(c / n, n)],
            }
        };
        let phase = |k: [i64; 2], c: usize| -> Complex64 {
            let x = grid.cell_coords(c);
            let t = (k[0] * x[0] as i64 + k[1] * x[1] as i64) as f64 / n as f64;
            Complex64::from_polar(1.0, TAU * t)
        };
        for comp in 0..f.n() {
            let mut hat = vec![Complex64::new(0.0, 0.0); cell_count];
            for (kc, h) in hat.iter_mut().enumerate() {
                let k = freq_of(kc);
                for c in 0..cell_count {
                    *h += f.cell(c)[comp] * phase(k, c).conj();
                }
                *h *= kind.multiplier(k, grid.dim);
            }
            for c in 0..cell_count {
                let mut acc = Complex64::new(0.0, 0.0);
                for (kc, h) in hat.iter().enumerate() {
                    acc += h * phase(freq_of(kc), c);
                }
                out.cell_mut(c)[comp] = acc / cell_count as f64;
            }
        }
        out
    }

    #[test]
    fn hilbert_maps_cosine_to_sine() {
        let grid = GridSpec::new(1, 3).unwrap();
        let f = scalar_field(&grid, |x, _| Complex64::new((TAU * x).cos(), 0.0));
        let want = scalar_field(&grid, |x, _| Complex64::new((TAU * x).sin(), 0.0));
        let got = apply_czo(CzoKind::Hilbert, &f, None).unwrap();
        assert!(got.sub(&want).max_norm() < 1e-12);
    }

    #[test]
    fn fft_path_matches_direct_dft() {
        let grid1 = GridSpec::new(1, 1).unwrap();
        let f1 = VectorField::random(&grid1, 2, 11);
        let fast = apply_czo(CzoKind::Hilbert, &f1, None).unwrap();
        let slow = brute_apply(CzoKind::Hilbert, &f1);
        assert!(fast.sub(&slow).max_norm() < 1e-12);

        let grid2 = GridSpec::new(2, 1).unwrap();
        let f2 = VectorField::random(&grid2, 1, 12);
        for l in 1..=2 {
            let fast = apply_czo(CzoKind::Riesz(l), &f2, None).unwrap();
            let slow = brute_apply(CzoKind::Riesz(l), &f2);
            assert!(fast.sub(&slow).max_norm() < 1e-12);
        }
    }

    #[test]
    fn riesz_squares_sum_to_minus_identity_on_mean_zero() {
        let grid = GridSpec::new(2, 1).unwrap();
        let f = VectorField::random(&grid, 2, 21).remove_mean();
        let mut acc = VectorField::zero(&grid, 2);
        for l in 1..=2 {
            let once = apply_czo(CzoKind::Riesz(l), &f, None).unwrap();
            let twice = apply_czo(CzoKind::Riesz(l), &once, None).unwrap();
            acc = acc.add(&twice);
        }
        assert!(acc.add(&f).max_norm() < 1e-12);
    }

    #[test]
    fn anti_self_adjoint_and_energy_preserving() {
        let grid = GridSpec::new(1, 2).unwrap();
        let f = VectorField::random(&grid, 2, 31);
        let g = VectorField::random(&grid, 2, 32);
        let tf = apply_czo(CzoKind::Hilbert, &f, None).unwrap();
        let tg = apply_czo(CzoKind::Hilbert, &g, None).unwrap();
        let lhs = tf.inner(&g);
        let rhs = f.inner(&tg);
        assert_relative_eq!(lhs.re, -rhs.re, epsilon = 1e-12);
        assert_relative_eq!(lhs.im, -rhs.im, epsilon = 1e-12);

        let fz = f.remove_mean();
        let tfz = apply_czo(CzoKind::Hilbert, &fz, None).unwrap();
        assert_relative_eq!(tfz.l2_norm(), fz.l2_norm(), max_relative = 1e-12);
    }

    #[test]
    fn constants_are_annihilated() {
        let grid = GridSpec::new(1, 2).unwrap();
        let c = scalar_field(&grid, |_, _| Complex64::new(2.5, -1.0));
        let got = apply_czo(CzoKind::Hilbert, &c, None).unwrap();
        assert!(got.max_norm() < 1e-13);
    }

    #[test]
    fn restriction_zeroes_complement() {
        let grid = GridSpec::new(1, 2).unwrap();
        let f = VectorField::random(&grid, 1, 41);
        let set = CellSet::from_indices(grid.cell_count(), 0..grid.cell_count() / 2);
        let got = apply_czo(CzoKind::Hilbert, &f, Some(&set)).unwrap();
        for c in 0..grid.cell_count() {
            if !set.contains(c) {
                assert_eq!(got.cell(c).norm(), 0.0);
            }
        }
        let fe = zero_outside(&f, &set);
        let reference = zero_outside(&apply_czo(CzoKind::Hilbert, &fe, None).unwrap(), &set);
        assert!(got.sub(&reference).max_norm() < 1e-13);
    }

    #[test]
    fn kind_validation() {
        assert!(CzoKind::Hilbert.validate(2).is_err());
        assert!(CzoKind::Riesz(0).validate(2).is_err());
        assert!(CzoKind::Riesz(3).validate(2).is_err());
        assert!(CzoKind::Riesz(2).validate(2).is_ok());
    }
}
