//! Two-weight matrix BMO quantities: the reducing-matrix norm, the tilde
//! (difference) norms in both orientations, the five equivalent
//! John–Nirenberg forms with their per-cube Hölder majorants, and the
//! scalar Bloom norm.

use rayon::prelude::*;

use crate::dyadic::CubeFamily;
use crate::error::{Error, Result};
pub use crate::field::MatrixField;
use crate::field::VectorField;
use crate::linalg::{op_norm, CMat};
use crate::weights::{check_exponent, conjugate_exponent, reducing_matrices, MatrixWeight};

/// A supremum over a cube family together with the cube attaining it.
#[derive(Debug, Clone)]
pub struct SupQuantity {
    pub value: f64,
    pub argmax: String,
}

impl SupQuantity {
    fn from_terms(terms: impl IntoIterator<Item = (String, f64)>) -> SupQuantity {
        let mut best = SupQuantity {
            value: 0.0,
            argmax: String::new(),
        };
        for (label, value) in terms {
            if best.argmax.is_empty() || value > best.value {
                best = SupQuantity {
                    value,
                    argmax: label,
                };
            }
        }
        best
    }
}

/// Which realization of the matrix BMO norm to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BmoForm {
    /// Reducing matrices `𝒱_Q (B - m_Q B) 𝒰_Q^{-1}`.
    Reducing,
    /// Power means `m_Q(V^{1/p}) (B - m_Q B) (m_Q U^{1/p})^{-1}`.
    PowerMean,
}

/// Orientation of the tilde norm's mixed-exponent double average.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TildeOrientation {
    /// Inner `p'` average in `y`, outer `p/p'` average in `x`.
    Primal,
    /// Inner `p` average in `x`, outer `p'/p` average in `y`.
    Dual,
}

/// Per-cube values of the John–Nirenberg quantities and the Hölder
/// majorant factors linking them.
#[derive(Debug, Clone)]
pub struct JnCubeTerms {
    pub label: String,
    /// `fint_Q ‖𝒱_Q (B - m_Q B) 𝒰_Q^{-1}‖`.
    pub a: f64,
    /// `(fint_Q ‖V^{1/p}(x) (B - m_Q B) 𝒰_Q^{-1}‖^p)^{1/p}`.
    pub b: f64,
    /// `(fint_Q ‖U^{-1/p}(y) (B* - m_Q B*) (𝒱'_Q)^{-1}‖^{p'})^{1/p'}`.
    pub c: f64,
    /// Mixed double average of `‖V^{1/p}(x)(B(x)-B(y))U^{-1/p}(y)‖`,
    /// primal orientation.
    pub d: f64,
    /// Same integrand, dual orientation.
    pub e: f64,
    /// `(fint_Q ‖U^{1/p}(y) 𝒰_Q^{-1}‖^p)^{1/p}`: per-cube factor with
    /// `b ≤ d · holder_b`.
    pub holder_b: f64,
    /// `(fint_Q ‖V^{-1/p}(x) (𝒱'_Q)^{-1}‖^{p'})^{1/p'}`: per-cube factor
    /// with `c ≤ e · holder_c`.
    pub holder_c: f64,
}

/// All John–Nirenberg-equivalent norms over one cube family.
#[derive(Debug, Clone)]
pub struct BmoReport {
    pub p: f64,
    pub family: String,
    pub a: SupQuantity,
    pub b: SupQuantity,
    pub c: SupQuantity,
    pub d: SupQuantity,
    pub e: SupQuantity,
    /// Pointwise-weight form with the reducing matrix of `U`; coincides
    /// with quantity b).
    pub lambda1: f64,
    /// Adjoint-symbol form with the dual reducing matrix of `V`;
    /// coincides with quantity c).
    pub lambda2: f64,
    /// Tilde norm, primal orientation; coincides with quantity d).
    pub tilde_primal: f64,
    /// Tilde norm, dual orientation; coincides with quantity e).
    pub tilde_dual: f64,
}

fn check_inputs(b: &MatrixField, u: &MatrixWeight, v: &MatrixWeight, p: f64) -> Result<()> {
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
    Ok(())
}

fn invert(m: &CMat, what: &str, cube: &str) -> Result<CMat> {
    m.clone().try_inverse().ok_or_else(|| Error::ReducingFailure {
        cube: cube.to_string(),
        reason: format!("{what} is singular"),
    })
}

/// Matrix BMO norm `sup_Q (fint_Q ‖𝒱_Q (B - m_Q B) 𝒰_Q^{-1}‖)^{1/p}`, or
/// the power-mean variant with `m_Q(V^{1/p})` and `m_Q(U^{1/p})^{-1}`.
pub fn bmo_vu(
    b: &MatrixField,
    u: &MatrixWeight,
    v: &MatrixWeight,
    p: f64,
    family: &CubeFamily,
    form: BmoForm,
) -> Result<SupQuantity> {
    check_inputs(b, u, v, p)?;
    let grid = *b.grid();
    let up = u.power_field(1.0 / p);
    let vp = v.power_field(1.0 / p);

    let mut terms: Vec<(String, f64)> = Vec::new();
    for (li, lattice) in family.lattices().iter().enumerate() {
        let reducing = match form {
            BmoForm::Reducing => Some((
                reducing_matrices(u, lattice, p)?,
                reducing_matrices(v, lattice, p)?,
            )),
            BmoForm::PowerMean => None,
        };
        let cube_terms: Vec<(String, f64)> = lattice
            .ids()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|id| -> Result<(String, f64)> {
                let label = family.cube_label(li, id);
                let cells = lattice.cube(id).cells(&grid);
                let mean = b.mean_over(&cells);
                let (left, right_inv) = match &reducing {
                    Some((ru, rv)) => {
                        let ord = lattice.ordinal(id);
                        (
                            rv[ord].primal.clone(),
                            invert(&ru[ord].primal, "reducing matrix", &label)?,
                        )
                    }
                    None => {
                        let mu = crate::weights::average_of(&up, &cells);
                        let mv = crate::weights::average_of(&vp, &cells);
                        (mv, invert(&mu, "power mean", &label)?)
                    }
                };
                let mut acc = 0.0;
                for &x in &cells {
                    acc += op_norm(&(&left * (b.cell(x) - &mean) * &right_inv));
                }
                let value = (acc / cells.len() as f64).powf(1.0 / p);
                Ok((label, value))
            })
            .collect::<Result<Vec<_>>>()?;
        terms.extend(cube_terms);
    }
    Ok(SupQuantity::from_terms(terms))
}

/// Tilde norm
/// `sup_Q (fint_x (fint_y ‖V^{1/p}(x)(B(x)-B(y))U^{-1/p}(y)‖^{p'})^{p/p'})^{1/p}`
/// or its dual orientation with the roles of x and y (and p, p')
/// exchanged.
pub fn bmo_tilde(
    b: &MatrixField,
    u: &MatrixWeight,
    v: &MatrixWeight,
    p: f64,
    family: &CubeFamily,
    orientation: TildeOrientation,
) -> Result<SupQuantity> {
    check_inputs(b, u, v, p)?;
    let grid = *b.grid();
    let vp = v.power_field(1.0 / p);
    let um = u.power_field(-1.0 / p);

    let mut terms: Vec<(String, f64)> = Vec::new();
    for (li, lattice) in family.lattices().iter().enumerate() {
        let cube_terms: Vec<(String, f64)> = lattice
            .ids()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|id| {
                let label = family.cube_label(li, id);
                let cells = lattice.cube(id).cells(&grid);
                let value = tilde_on_cube(b, &vp, &um, &cells, p, orientation);
                (label, value)
            })
            .collect();
        terms.extend(cube_terms);
    }
    Ok(SupQuantity::from_terms(terms))
}

fn tilde_on_cube(
    b: &MatrixField,
    vp: &[CMat],
    um: &[CMat],
    cells: &[usize],
    p: f64,
    orientation: TildeOrientation,
) -> f64 {
    let q = conjugate_exponent(p);
    let count = cells.len() as f64;
    let (inner_e, outer_pairs) = match orientation {
        TildeOrientation::Primal => (q, p / q),
        TildeOrientation::Dual => (p, q / p),
    };
    let mut outer_acc = 0.0;
    for &outer in cells {
        let mut inner_acc = 0.0;
        for &inner in cells {
            let (x, y) = match orientation {
                TildeOrientation::Primal => (outer, inner),
                TildeOrientation::Dual => (inner, outer),
            };
            let m = &vp[x] * (b.cell(x) - b.cell(y)) * &um[y];
            inner_acc += op_norm(&m).powf(inner_e);
        }
        outer_acc += (inner_acc / count).powf(outer_pairs);
    }
    let outer_exponent = match orientation {
        TildeOrientation::Primal => 1.0 / p,
        TildeOrientation::Dual => 1.0 / q,
    };
    (outer_acc / count).powf(outer_exponent)
}

/// Per-cube John–Nirenberg terms for every cube of the family.
pub fn jn_per_cube(
    b: &MatrixField,
    u: &MatrixWeight,
    v: &MatrixWeight,
    p: f64,
    family: &CubeFamily,
) -> Result<Vec<JnCubeTerms>> {
    check_inputs(b, u, v, p)?;
    let grid = *b.grid();
    let q = conjugate_exponent(p);
    let up = u.power_field(1.0 / p);
    let um = u.power_field(-1.0 / p);
    let vp = v.power_field(1.0 / p);
    let vm = v.power_field(-1.0 / p);
    let b_star = b.adjoint();

    let mut out = Vec::new();
    for (li, lattice) in family.lattices().iter().enumerate() {
        let red_u = reducing_matrices(u, lattice, p)?;
        let red_v = reducing_matrices(v, lattice, p)?;
        let cube_terms: Vec<JnCubeTerms> = lattice
            .ids()
            .collect::<Vec<_>>()
            .into_par_iter()
            .map(|id| -> Result<JnCubeTerms> {
                let label = family.cube_label(li, id);
                let ord = lattice.ordinal(id);
                let cells = lattice.cube(id).cells(&grid);
                let count = cells.len() as f64;
                let mean = b.mean_over(&cells);
                let mean_star = b_star.mean_over(&cells);

                let u_red = &red_u[ord].primal;
                let v_red = &red_v[ord].primal;
                let u_red_inv = invert(u_red, "reducing matrix", &label)?;
                let v_dual_inv = invert(&red_v[ord].dual, "dual reducing matrix", &label)?;

                let mut a_acc = 0.0;
                let mut b_acc = 0.0;
                let mut c_acc = 0.0;
                let mut hb_acc = 0.0;
                let mut hc_acc = 0.0;
                for &x in &cells {
                    let diff = b.cell(x) - &mean;
                    a_acc += op_norm(&(v_red * &diff * &u_red_inv));
                    b_acc += op_norm(&(&vp[x] * &diff * &u_red_inv)).powf(p);
                    let diff_star = b_star.cell(x) - &mean_star;
                    c_acc += op_norm(&(&um[x] * &diff_star * &v_dual_inv)).powf(q);
                    hb_acc += op_norm(&(&up[x] * &u_red_inv)).powf(p);
                    hc_acc += op_norm(&(&vm[x] * &v_dual_inv)).powf(q);
                }

                Ok(JnCubeTerms {
                    a: a_acc / count,
                    b: (b_acc / count).powf(1.0 / p),
                    c: (c_acc / count).powf(1.0 / q),
                    d: tilde_on_cube(b, &vp, &um, &cells, p, TildeOrientation::Primal),
                    e: tilde_on_cube(b, &vp, &um, &cells, p, TildeOrientation::Dual),
                    holder_b: (hb_acc / count).powf(1.0 / p),
                    holder_c: (hc_acc / count).powf(1.0 / q),
                    label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.extend(cube_terms);
    }
    Ok(out)
}

/// The five equivalent John–Nirenberg quantities (with argamax cubes)
/// plus the pointwise-weight forms and both tilde orientations.
pub fn jn_quantities(
    b: &MatrixField,
    u: &MatrixWeight,
    v: &MatrixWeight,
    p: f64,
    family: &CubeFamily,
) -> Result<BmoReport> {
    let terms = jn_per_cube(b, u, v, p, family)?;
    let pick = |f: &dyn Fn(&JnCubeTerms) -> f64| {
        SupQuantity::from_terms(terms.iter().map(|t| (t.label.clone(), f(t))))
    };
    let a = pick(&|t| t.a);
    let b_q = pick(&|t| t.b);
    let c_q = pick(&|t| t.c);
    let d_q = pick(&|t| t.d);
    let e_q = pick(&|t| t.e);
    Ok(BmoReport {
        p,
        family: family.descriptor(),
        lambda1: b_q.value,
        lambda2: c_q.value,
        tilde_primal: d_q.value,
        tilde_dual: e_q.value,
        a,
        b: b_q,
        c: c_q,
        d: d_q,
        e: e_q,
    })
}

/// Scalar Bloom norm `sup_Q ν(Q)^{-1} ∫_Q |b - m_Q b|` with
/// `ν = (u v^{-1})^{1/p}`.
pub fn bloom_scalar(
    b: &VectorField,
    u: &MatrixWeight,
    v: &MatrixWeight,
    p: f64,
    family: &CubeFamily,
) -> Result<SupQuantity> {
    check_exponent(p)?;
    if b.n() != 1 || u.n() != 1 || v.n() != 1 {
        return Err(Error::SizeMismatch {
            context: "bloom norm scalar inputs",
            expected: 1,
            got: b.n().max(u.n()).max(v.n()),
        });
    }
    if b.grid() != u.grid() || b.grid() != v.grid() {
        return Err(Error::GridMismatch("scalar field and weight grids differ"));
    }
    let grid = *b.grid();
    let nu: Vec<f64> = (0..grid.cell_count())
        .map(|c| {
            let uu = u.cell(c)[(0, 0)].re;
            let vv = v.cell(c)[(0, 0)].re;
            (uu / vv).powf(1.0 / p)
        })
        .collect();

    let mut terms: Vec<(String, f64)> = Vec::new();
    for (li, lattice) in family.lattices().iter().enumerate() {
        for id in lattice.ids() {
            let label = family.cube_label(li, id);
            let cells = lattice.cube(id).cells(&grid);
            let mean = b.mean_over(&cells);
            let numer: f64 = cells.iter().map(|&c| (b.cell(c) - &mean).norm()).sum();
            let denom: f64 = cells.iter().map(|&c| nu[c]).sum();
            terms.push((label, numer / denom));
        }
    }
    Ok(SupQuantity::from_terms(terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dyadic::Shift;
    use crate::grid::GridSpec;
    use crate::weights::{generate_weight, WeightKind};
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn indicator_second_half(grid: &GridSpec) -> Vec<Complex64> {
        let n = grid.cells_per_axis();
        (0..grid.cell_count())
            .map(|c| {
                if c % n >= n / 2 {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect()
    }

    fn random_pair(grid: &GridSpec, n: usize, seed: u64) -> (MatrixWeight, MatrixWeight) {
        let u = generate_weight(
            grid,
            &WeightKind::RotatedDiagonal {
                n,
                amplitude: 3.0,
            },
            2.0,
            seed,
        )
        .unwrap();
        let v = generate_weight(
            grid,
            &WeightKind::LogGaussian { n, sigma: 0.5 },
            2.0,
            seed + 1,
        )
        .unwrap();
        (u, v)
    }

    #[test]
    fn constant_symbol_gives_zero_everywhere() {
        let grid = GridSpec::new(1, 1).unwrap();
        let (u, v) = random_pair(&grid, 2, 10);
        let b = MatrixField::constant(
            &grid,
            &CMat::from_element(2, 2, Complex64::new(1.0, -0.5)),
        );
        let family = CubeFamily::all_shifts(&grid);
        let report = jn_quantities(&b, &u, &v, 2.0, &family).unwrap();
        for value in [
            report.a.value,
            report.b.value,
            report.c.value,
            report.d.value,
            report.e.value,
            report.lambda1,
            report.lambda2,
        ] {
            assert!(value < 1e-12, "expected zero, got {value}");
        }
        let norm = bmo_vu(&b, &u, &v, 2.0, &family, BmoForm::Reducing).unwrap();
        assert!(norm.value < 1e-12);
        let tilde = bmo_tilde(&b, &u, &v, 2.0, &family, TildeOrientation::Primal).unwrap();
        assert!(tilde.value < 1e-12);
    }

    #[test]
    fn indicator_oracle_identity_weights() {
        let grid = GridSpec::new(1, 1).unwrap();
        let id = MatrixWeight::identity(&grid, 1);
        let b = MatrixField::scalar(&grid, &indicator_second_half(&grid)).unwrap();
        let family = CubeFamily::single(&grid, Shift::NONE);
        let report = jn_quantities(&b, &id, &id, 2.0, &family).unwrap();
        assert_relative_eq!(report.a.value, 0.5, epsilon = 1e-12);
        assert_relative_eq!(report.b.value, 0.5, epsilon = 1e-12);
        assert_relative_eq!(report.c.value, 0.5, epsilon = 1e-12);
        assert_relative_eq!(report.d.value, 0.5f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(report.e.value, 0.5f64.sqrt(), epsilon = 1e-12);
        assert_eq!(report.a.argmax, report.d.argmax);
        assert!(report.a.argmax.contains(":k0:"));

        let norm = bmo_vu(&b, &id, &id, 2.0, &family, BmoForm::Reducing).unwrap();
        assert_relative_eq!(norm.value, 0.5f64.sqrt(), epsilon = 1e-12);
        let power = bmo_vu(&b, &id, &id, 2.0, &family, BmoForm::PowerMean).unwrap();
        assert_relative_eq!(power.value, norm.value, epsilon = 1e-12);

        let tilde = bmo_tilde(&b, &id, &id, 2.0, &family, TildeOrientation::Primal).unwrap();
        assert_relative_eq!(tilde.value, 0.5f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn primal_and_dual_tilde_agree_at_p2() {
        let grid = GridSpec::new(1, 1).unwrap();
        let (u, v) = random_pair(&grid, 2, 20);
        let b = MatrixField::random(&grid, 2, 21);
        let family = CubeFamily::all_shifts(&grid);
        let primal = bmo_tilde(&b, &u, &v, 2.0, &family, TildeOrientation::Primal).unwrap();
        let dual = bmo_tilde(&b, &u, &v, 2.0, &family, TildeOrientation::Dual).unwrap();
        assert_relative_eq!(primal.value, dual.value, max_relative = 1e-12);
    }

    #[test]
    fn translation_invariance_in_symbol() {
        let grid = GridSpec::new(1, 1).unwrap();
        let (u, v) = random_pair(&grid, 2, 30);
        let b = MatrixField::random(&grid, 2, 31);
        let shifted = b.add(&MatrixField::constant(
            &grid,
            &CMat::from_element(2, 2, Complex64::new(2.0, 1.0)),
        ));
        let family = CubeFamily::single(&grid, Shift::NONE);
        let r1 = jn_quantities(&b, &u, &v, 2.5, &family).unwrap();
        let r2 = jn_quantities(&shifted, &u, &v, 2.5, &family).unwrap();
        assert_relative_eq!(r1.a.value, r2.a.value, max_relative = 1e-10);
        assert_relative_eq!(r1.b.value, r2.b.value, max_relative = 1e-10);
        assert_relative_eq!(r1.c.value, r2.c.value, max_relative = 1e-10);
        assert_relative_eq!(r1.d.value, r2.d.value, max_relative = 1e-10);
        assert_relative_eq!(r1.e.value, r2.e.value, max_relative = 1e-10);
    }

    #[test]
    fn homogeneity_of_tilde_and_power_scaling_of_vu() {
        let grid = GridSpec::new(1, 1).unwrap();
        let (u, v) = random_pair(&grid, 2, 40);
        let b = MatrixField::random(&grid, 2, 41);
        let rb = b.scale(Complex64::new(3.0, 0.0));
        let family = CubeFamily::single(&grid, Shift::NONE);
        let p = 2.5;

        let t1 = bmo_tilde(&b, &u, &v, p, &family, TildeOrientation::Primal).unwrap();
        let t3 = bmo_tilde(&rb, &u, &v, p, &family, TildeOrientation::Primal).unwrap();
        assert_relative_eq!(t3.value, 3.0 * t1.value, max_relative = 1e-10);

        let n1 = bmo_vu(&b, &u, &v, p, &family, BmoForm::Reducing).unwrap();
        let n3 = bmo_vu(&rb, &u, &v, p, &family, BmoForm::Reducing).unwrap();
        assert_relative_eq!(n3.value.powf(p), 3.0 * n1.value.powf(p), max_relative = 1e-10);
    }

    #[test]
    fn per_cube_holder_chain() {
        let grid = GridSpec::new(1, 2).unwrap();
        for p in [2.0, 2.5] {
            let u = generate_weight(
                &grid,
                &WeightKind::RotatedDiagonal {
                    n: 2,
                    amplitude: 3.0,
                },
                p,
                50,
            )
            .unwrap();
            let v = generate_weight(&grid, &WeightKind::LogGaussian { n: 2, sigma: 0.4 }, p, 51)
                .unwrap();
            let b = MatrixField::random(&grid, 2, 52);
            let family = CubeFamily::all_shifts(&grid);
            let terms = jn_per_cube(&b, &u, &v, p, &family).unwrap();
            assert!(!terms.is_empty());
            for t in terms {
                assert!(
                    t.b <= t.d * t.holder_b + 1e-9,
                    "cube {}: b = {} exceeds d·H = {}",
                    t.label,
                    t.b,
                    t.d * t.holder_b
                );
                assert!(
                    t.c <= t.e * t.holder_c + 1e-9,
                    "cube {}: c = {} exceeds e·H' = {}",
                    t.label,
                    t.c,
                    t.e * t.holder_c
                );
            }
        }
    }

    #[test]
    fn bloom_scalar_classical_cases() {
        let grid = GridSpec::new(1, 1).unwrap();
        let id = MatrixWeight::identity(&grid, 1);
        let b = VectorField::scalar(&grid, &indicator_second_half(&grid)).unwrap();
        let family = CubeFamily::single(&grid, Shift::NONE);
        let norm = bloom_scalar(&b, &id, &id, 2.0, &family).unwrap();
        assert_relative_eq!(norm.value, 0.5, epsilon = 1e-12);

        let wvals: Vec<f64> = (0..grid.cell_count()).map(|c| 1.0 + c as f64).collect();
        let w = MatrixWeight::scalar(&grid, &wvals).unwrap();
        let same = bloom_scalar(&b, &w, &w, 2.0, &family).unwrap();
        assert_relative_eq!(same.value, norm.value, max_relative = 1e-12);

        let constant = VectorField::scalar(
            &grid,
            &vec![Complex64::new(4.0, 1.0); grid.cell_count()],
        )
        .unwrap();
        let zero = bloom_scalar(&constant, &id, &id, 2.0, &family).unwrap();
        assert!(zero.value < 1e-14);
    }

    #[test]
    fn scalar_collapse_ratio_is_moderate() {
        let grid = GridSpec::new(1, 2).unwrap();
        let p = 2.0;
        let u = generate_weight(
            &grid,
            &WeightKind::PowerLaw {
                n: 1,
                alpha: 0.4,
                center: [0.5, 0.0],
            },
            p,
            60,
        )
        .unwrap();
        let v = generate_weight(
            &grid,
            &WeightKind::PowerLaw {
                n: 1,
                alpha: -0.3,
                center: [0.25, 0.0],
            },
            p,
            61,
        )
        .unwrap();
        let bvals = indicator_second_half(&grid);
        let b_mat = MatrixField::scalar(&grid, &bvals).unwrap();
        let b_vec = VectorField::scalar(&grid, &bvals).unwrap();
        let family = CubeFamily::all_shifts(&grid);
        let vu = bmo_vu(&b_mat, &u, &v, p, &family, BmoForm::Reducing).unwrap();
        let bloom = bloom_scalar(&b_vec, &u, &v, p, &family).unwrap();
        let ratio = vu.value.powf(p) / bloom.value;
        assert!(ratio.is_finite() && ratio > 0.05 && ratio < 20.0, "ratio {ratio}");
    }
}
