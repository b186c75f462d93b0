//! Randomized invariants over the public API: partition and linearity
//! laws of the dyadic machinery, gauge-norm laws, characteristic
//! invariances, and the structural guarantees of stopping families, all
//! quantified over arbitrary admissible inputs rather than fixed seeds.

use mwlab::dyadic::{sparse_from_stopping, stopping_time};
use mwlab::linalg::CMat;
use mwlab::norms::{opnorm_p2, CzoOp, LinearOp};
use mwlab::orlicz::luxemburg;
use mwlab::weights::{ap_characteristic, generate_weight};
use mwlab::{
    CubeFamily, CubeId, CzoKind, DyadicLattice, GridSpec, HaarSystem, Result, Shift, VectorField,
    WeightKind, YoungFunction,
};
use num_complex::Complex64;
use proptest::prelude::*;

fn weight_kind(n: usize) -> impl Strategy<Value = WeightKind> {
    prop_oneof![
        (0.2f64..1.2).prop_map(move |amplitude| WeightKind::RotatedDiagonal { n, amplitude }),
        (0.05f64..0.4).prop_map(move |sigma| WeightKind::LogGaussian { n, sigma }),
    ]
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.5), Just(2.0), Just(3.0)]
}

struct IdOp {
    grid: GridSpec,
    n: usize,
}

impl LinearOp for IdOp {
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn every_lattice_level_partitions_the_grid(
        dim in 1usize..=2,
        depth_raw in 0u32..=3,
        mask in 0u8..4,
    ) {
        let depth = if dim == 2 { depth_raw.min(2) } else { depth_raw };
        let grid = GridSpec::new(dim, depth).unwrap();
        let shift = Shift::from_mask(mask & ((1 << dim) - 1), dim).unwrap();
        let lattice = DyadicLattice::build(&grid, shift);
        for k in 0..=lattice.depth() {
            let mut seen = vec![false; grid.cell_count()];
            for cube in lattice.level(k) {
                for c in cube.cells(&grid) {
                    prop_assert!(!seen[c], "cell {c} covered twice at level {k}");
                    seen[c] = true;
                }
            }
            prop_assert!(seen.iter().all(|&s| s), "level {k} left cells uncovered");
        }
    }

    #[test]
    fn haar_coefficients_are_linear(
        seed1 in any::<u64>(),
        seed2 in any::<u64>(),
        re in -2.0f64..2.0,
        im in -2.0f64..2.0,
    ) {
        let grid = GridSpec::new(1, 2).unwrap();
        let lattice = DyadicLattice::build(&grid, Shift::NONE);
        let system = HaarSystem::new(&lattice);
        let f = VectorField::random(&grid, 2, seed1);
        let g = VectorField::random(&grid, 2, seed2);
        let a = Complex64::new(re, im);
        let combo = f.scale(a).add(&g);

        let cf = system.vector_coeffs(&f).unwrap();
        let cg = system.vector_coeffs(&g).unwrap();
        let cc = system.vector_coeffs(&combo).unwrap();
        for k in 0..lattice.depth() {
            for (pos, _) in lattice.level(k).iter().enumerate() {
                let id = CubeId { level: k, pos: pos as u32 };
                for eps in 1..=system.sigma() {
                    let want = cf.get(&lattice, id, eps) * a + cg.get(&lattice, id, eps);
                    let got = cc.get(&lattice, id, eps);
                    prop_assert!(
                        (got - &want).norm() <= 1e-10 * (1.0 + want.norm()),
                        "nonlinear coefficient at level {k} pos {pos} eps {eps}"
                    );
                }
            }
        }
    }

    #[test]
    fn luxemburg_norm_is_homogeneous_and_monotone(
        values in prop::collection::vec(0.0f64..8.0, 1..40),
        extra in prop::collection::vec(0.0f64..3.0, 1..40),
        scale in 0.05f64..20.0,
        r in 1.2f64..3.5,
    ) {
        let c = YoungFunction::power_log_bump(r, 0.7).unwrap();
        let base = luxemburg(&values, &c);
        let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
        let got = luxemburg(&scaled, &c);
        prop_assert!(
            (got - scale * base).abs() <= 1e-8 * (1.0 + scale * base),
            "homogeneity gap: {got} vs {}", scale * base
        );
        let bumped: Vec<f64> = values
            .iter()
            .zip(extra.iter().cycle())
            .map(|(v, e)| v + e)
            .collect();
        prop_assert!(
            luxemburg(&bumped, &c) >= base - 1e-8 * (1.0 + base),
            "norm decreased under pointwise increase"
        );
    }

    #[test]
    fn young_pair_satisfies_the_product_inequality(
        r in 1.2f64..3.5,
        delta in 0.0f64..2.0,
        s in 0.0f64..40.0,
        t in 0.0f64..40.0,
    ) {
        let c = YoungFunction::power_log_bump(r, delta).unwrap();
        let rhs = c.eval(t) + c.conjugate_eval(s);
        prop_assert!(
            s * t <= rhs + 1e-9 * (1.0 + rhs),
            "product {} exceeds split bound {rhs}", s * t
        );
    }

    #[test]
    fn characteristic_is_at_least_one_and_scale_invariant(
        kind in weight_kind(2),
        p in exponent(),
        seed in any::<u64>(),
        lambda in 0.1f64..10.0,
    ) {
        let grid = GridSpec::new(1, 2).unwrap();
        let family = CubeFamily::all_shifts(&grid);
        let w = generate_weight(&grid, &kind, p, seed).unwrap();
        let c = ap_characteristic(&w, p, &family, false).unwrap();
        prop_assert!(c >= 1.0 - 1e-10, "characteristic {c} below 1");
        let cs = ap_characteristic(&w.scale(lambda).unwrap(), p, &family, false).unwrap();
        prop_assert!(
            (cs - c).abs() <= 1e-9 * c,
            "scaling by {lambda} moved the characteristic: {c} vs {cs}"
        );
    }

    #[test]
    fn characteristic_ignores_constant_unitary_conjugation(
        kind in weight_kind(2),
        p in exponent(),
        seed in any::<u64>(),
        theta in 0.0f64..std::f64::consts::TAU,
        phase in 0.0f64..std::f64::consts::TAU,
    ) {
        let grid = GridSpec::new(1, 2).unwrap();
        let family = CubeFamily::all_shifts(&grid);
        let w = generate_weight(&grid, &kind, p, seed).unwrap();
        let q = CMat::from_row_slice(2, 2, &[
            Complex64::new(theta.cos(), 0.0),
            -Complex64::from_polar(theta.sin(), phase),
            Complex64::from_polar(theta.sin(), -phase),
            Complex64::new(theta.cos(), 0.0),
        ]);
        let c = ap_characteristic(&w, p, &family, false).unwrap();
        let cq = ap_characteristic(&w.conjugate(&q).unwrap(), p, &family, false).unwrap();
        prop_assert!(
            (cq - c).abs() <= 1e-8 * c,
            "conjugation moved the characteristic: {c} vs {cq}"
        );
    }

    #[test]
    fn identity_operator_has_unit_weighted_norm(
        kind in weight_kind(2),
        seed in any::<u64>(),
    ) {
        let grid = GridSpec::new(1, 2).unwrap();
        let w = generate_weight(&grid, &kind, 2.0, seed).unwrap();
        let op = IdOp { grid, n: 2 };
        let est = opnorm_p2(&op, &w, &w).unwrap();
        prop_assert!(
            (est.value - 1.0).abs() <= 1e-9,
            "identity norm came out as {}", est.value
        );
    }

    #[test]
    fn convolution_kernels_are_antisymmetric_contractions(
        seed in any::<u64>(),
        dim in 1usize..=2,
        axis in 1usize..=2,
    ) {
        let (grid, kind) = if dim == 1 {
            let kind = if axis == 1 { CzoKind::Hilbert } else { CzoKind::Riesz(1) };
            (GridSpec::new(1, 3).unwrap(), kind)
        } else {
            (GridSpec::new(2, 1).unwrap(), CzoKind::Riesz(axis))
        };
        let f = VectorField::random(&grid, 1, seed);
        let g = VectorField::random(&grid, 1, seed ^ 0x5bd1_e995);
        let op = CzoOp { grid, n: 1, kind };
        let tf = op.apply(&f).unwrap();
        let tg = op.apply(&g).unwrap();
        let pairing = tf.inner(&g) + f.inner(&tg);
        prop_assert!(
            pairing.norm() <= 1e-10 * (1.0 + tf.inner(&g).norm()),
            "kernel is not antisymmetric: defect {}", pairing.norm()
        );
        prop_assert!(
            tf.l2_norm() <= f.l2_norm() * (1.0 + 1e-10),
            "kernel expanded the unweighted norm"
        );
    }

    #[test]
    fn stopping_families_stay_half_dense_and_disjoint(
        kind_u in weight_kind(2),
        kind_v in weight_kind(2),
        seed in any::<u64>(),
    ) {
        let grid = GridSpec::new(1, 3).unwrap();
        let lattice = DyadicLattice::build(&grid, Shift::NONE);
        let u = generate_weight(&grid, &kind_u, 2.0, seed).unwrap();
        let v = generate_weight(&grid, &kind_v, 2.0, seed ^ 1).unwrap();
        let root = lattice.root();
        let layers = stopping_time(&u, &v, &lattice, root, 2.0, 2.0).unwrap();

        let mut claimed: Vec<CubeId> = layers.families.concat();
        claimed.sort();
        let mut subtree = lattice.descendants(root);
        subtree.sort();
        prop_assert_eq!(claimed, subtree, "stopping families missed or repeated cubes");

        let sparse = sparse_from_stopping(&lattice, &layers).unwrap();
        prop_assert!(sparse.sparsity <= 2.0 + 1e-12);
        let mut covered = vec![false; grid.cell_count()];
        for member in &sparse.members {
            prop_assert!(
                2 * member.ek_cells >= member.cube_cells,
                "retained set of {:?} fell below half measure", member.id
            );
            for cell in member.ek_cell_set(&lattice).iter() {
                prop_assert!(!covered[cell], "retained sets overlap at cell {cell}");
                covered[cell] = true;
            }
        }
    }
}
