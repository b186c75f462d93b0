//! Young functions, Luxemburg averages over cubes, and the Orlicz bump
//! constants: the nested two-variable norms κ1/κ2 and the
//! average-subtracted variants μ1–μ4 with Λ1 = min(μ1, μ2) and
//! Λ2 = min(μ3, μ4).

use rayon::prelude::*;

use crate::bmo::SupQuantity;
use crate::dyadic::CubeFamily;
use crate::error::{Error, Result};
use crate::field::MatrixField;
use crate::linalg::op_norm;
use crate::weights::{check_exponent, MatrixWeight};

/// Relative tolerance of the Luxemburg bisection.
pub const LUXEMBURG_TOL: f64 = 1e-10;

/// A Young function from one of the two constructor families.
///
/// For the bump hypotheses of the commutator bound, take
/// `PowerLogBump { r: p, delta }` with `delta > p - 1` to make the
/// conjugate function a `B_{p'}` Young function (and symmetrically with
/// `p'` for the other slot); the parameter ranges encode membership, it
/// is not verified numerically.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum YoungFunction {
    /// `C(t) = t^r / r` with `r > 1`; self-conjugate family
    /// (`C̄(s) = s^{r'} / r'`).
    Power { r: f64 },
    /// `C(t) = t^r · log(e + t)^δ` with `r > 1`, `δ ≥ 0`.
    PowerLogBump { r: f64, delta: f64 },
}

impl YoungFunction {
    pub fn power(r: f64) -> Result<Self> {
        if !(r.is_finite() && r > 1.0) {
            return Err(Error::InvalidParam(format!(
                "power Young function needs r > 1, got {r}"
            )));
        }
        Ok(YoungFunction::Power { r })
    }

    pub fn power_log_bump(r: f64, delta: f64) -> Result<Self> {
        if !(r.is_finite() && r > 1.0) {
            return Err(Error::InvalidParam(format!(
                "power-log bump needs r > 1, got {r}"
            )));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::InvalidParam(format!(
                "power-log bump needs δ ≥ 0, got {delta}"
            )));
        }
        Ok(YoungFunction::PowerLogBump { r, delta })
    }

    pub fn eval(&self, t: f64) -> f64 {
        debug_assert!(t >= 0.0);
        match *self {
            YoungFunction::Power { r } => t.powf(r) / r,
            YoungFunction::PowerLogBump { r, delta } => {
                t.powf(r) * (std::f64::consts::E + t).ln().powf(delta)
            }
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        match *self {
            YoungFunction::Power { r } => t.powf(r - 1.0),
            YoungFunction::PowerLogBump { r, delta } => {
                let l = (std::f64::consts::E + t).ln();
                r * t.powf(r - 1.0) * l.powf(delta)
                    + t.powf(r) * delta * l.powf(delta - 1.0) / (std::f64::consts::E + t)
            }
        }
    }

    /// Legendre conjugate `C̄(s) = sup_{t ≥ 0} (s·t - C(t))`; closed form
    /// for the power family, solved numerically otherwise.
    pub fn conjugate_eval(&self, s: f64) -> f64 {
        debug_assert!(s >= 0.0);
        if s == 0.0 {
            return 0.0;
        }
        match *self {
            YoungFunction::Power { r } => {
                let rc = r / (r - 1.0);
                s.powf(rc) / rc
            }
            _ => {
                // C' is increasing and onto (0, ∞); the supremum is at
                // C'(t) = s.
                let mut hi = 1.0f64;
                while self.derivative(hi) < s {
                    hi *= 2.0;
                    if hi > 1e300 {
                        break;
                    }
                }
                let mut lo = 0.0f64;
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.derivative(mid) < s {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                    if hi - lo <= 1e-14 * hi.max(1.0) {
                        break;
                    }
                }
                let t = 0.5 * (lo + hi);
                s * t - self.eval(t)
            }
        }
    }
}

/// Luxemburg norm `inf{λ > 0 : avg C(v_i / λ) ≤ 1}` of nonnegative
/// samples with uniform weights, by bisection to relative tolerance
/// `LUXEMBURG_TOL`; 0 for all-zero input.
pub fn luxemburg(values: &[f64], c: &YoungFunction) -> f64 {
    debug_assert!(values.iter().all(|v| *v >= 0.0 && v.is_finite()));
    let max = values.iter().cloned().fold(0.0f64, f64::max);
    if max == 0.0 {
        return 0.0;
    }
    let count = values.len() as f64;
    let excess = |lambda: f64| -> bool {
        // avg C(v/λ) > 1, with early exit.
        let mut acc = 0.0;
        for &v in values {
            acc += c.eval(v / lambda);
            if acc > count {
                return true;
            }
        }
        acc > count
    };
    let mut hi = max;
    while excess(hi) {
        hi *= 2.0;
    }
    let mut lo = hi;
    loop {
        let next = lo / 2.0;
        if !excess(next) {
            lo = next;
            if lo < 1e-300 {
                return 0.0;
            }
        } else {
            lo = next;
            break;
        }
    }
    while hi - lo > LUXEMBURG_TOL * hi {
        let mid = 0.5 * (lo + hi);
        if excess(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// The eight bump quantities over a cube family, with attaining cubes.
#[derive(Debug, Clone)]
pub struct BumpReport {
    pub p: f64,
    pub family: String,
    /// `sup_Q ‖‖V^{1/p}(x)(B(x)-B(y))U^{-1/p}(y)‖_{C_x,Q}‖_{D_y,Q}`.
    pub kappa1: SupQuantity,
    /// Same integrand with the nesting order swapped.
    pub kappa2: SupQuantity,
    /// `B(x) - m_Q B` variant, inner `E_x` then outer `F_y`.
    pub mu1: SupQuantity,
    /// `B(x) - m_Q B` variant, inner `F_y` then outer `E_x`.
    pub mu2: SupQuantity,
    /// `B(y) - m_Q B` variant, inner `C_x` then outer `D_y`.
    pub mu3: SupQuantity,
    /// `B(y) - m_Q B` variant, inner `D_y` then outer `C_x`.
    pub mu4: SupQuantity,
    /// `min(mu1, mu2)`.
    pub lambda1: f64,
    /// `min(mu3, mu4)`.
    pub lambda2: f64,
}

/// Per-cube nested Luxemburg norm of a two-variable kernel given by
/// `value(i, j)` over index pairs in `0..len`: inner norm over the first
/// index for each fixed second index, then outer norm over the second.
fn nested_luxemburg(
    len: usize,
    value: &dyn Fn(usize, usize) -> f64,
    inner: &YoungFunction,
    outer: &YoungFunction,
) -> f64 {
    let mut outer_values = Vec::with_capacity(len);
    let mut buf = vec![0.0f64; len];
    for j in 0..len {
        for (i, slot) in buf.iter_mut().enumerate() {
            *slot = value(i, j);
        }
        outer_values.push(luxemburg(&buf, inner));
    }
    luxemburg(&outer_values, outer)
}

/// Computes κ1, κ2, μ1–μ4, Λ1, Λ2 for the symbol `B` between the weights
/// `U` and `V`. `C`/`D` norm the difference kernel in the x and y slots,
/// `E`/`F` the average-subtracted variants.
#[allow(clippy::too_many_arguments)]
pub fn bump_constants(
    b: &MatrixField,
    u: &MatrixWeight,
    v: &MatrixWeight,
    p: f64,
    c: &YoungFunction,
    d: &YoungFunction,
    e: &YoungFunction,
    f: &YoungFunction,
    family: &CubeFamily,
) -> Result<BumpReport> {
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
    let vp = v.power_field(1.0 / p);
    let um = u.power_field(-1.0 / p);

    let mut terms: Vec<(String, [f64; 6])> = Vec::new();
    for (li, lattice) in family.lattices().iter().enumerate() {
        let cube_terms: Vec<(String, [f64; 6])> = lattice
            .ids()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|id| {
                let label = family.cube_label(li, id);
                let cells = lattice.cube(id).cells(&grid);
                let len = cells.len();
                let mean = b.mean_over(&cells);

                let diff = |x: usize, y: usize| {
                    op_norm(&(&vp[cells[x]] * (b.cell(cells[x]) - b.cell(cells[y])) * &um[cells[y]]))
                };
                let sub_x = |x: usize, y: usize| {
                    op_norm(&(&vp[cells[x]] * (b.cell(cells[x]) - &mean) * &um[cells[y]]))
                };
                let sub_y = |x: usize, y: usize| {
                    op_norm(&(&vp[cells[x]] * (b.cell(cells[y]) - &mean) * &um[cells[y]]))
                };

                let kappa1 = nested_luxemburg(len, &|x, y| diff(x, y), c, d);
                let kappa2 = nested_luxemburg(len, &|y, x| diff(x, y), d, c);
                let mu1 = nested_luxemburg(len, &|x, y| sub_x(x, y), e, f);
                let mu2 = nested_luxemburg(len, &|y, x| sub_x(x, y), f, e);
                let mu3 = nested_luxemburg(len, &|x, y| sub_y(x, y), c, d);
                let mu4 = nested_luxemburg(len, &|y, x| sub_y(x, y), d, c);
                (label, [kappa1, kappa2, mu1, mu2, mu3, mu4])
            })
            .collect();
        terms.extend(cube_terms);
    }

    let pick = |k: usize| {
        let mut best = SupQuantity {
            value: 0.0,
            argmax: String::new(),
        };
        for (label, vals) in &terms {
            if best.argmax.is_empty() || vals[k] > best.value {
                best = SupQuantity {
                    value: vals[k],
                    argmax: label.clone(),
                };
            }
        }
        best
    };
    let mu1 = pick(2);
    let mu2 = pick(3);
    let mu3 = pick(4);
    let mu4 = pick(5);
    Ok(BumpReport {
        p,
        family: family.descriptor(),
        kappa1: pick(0),
        kappa2: pick(1),
        lambda1: mu1.value.min(mu2.value),
        lambda2: mu3.value.min(mu4.value),
        mu1,
        mu2,
        mu3,
        mu4,
    })
}
