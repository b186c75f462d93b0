//! Seeded instance generation for the experiment suites: weights drawn
//! under a Muckenhoupt cap, random cell sets, and the closed-form p = 2
//! reducing matrices of a cell set.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::dyadic::CubeFamily;
use crate::error::{Error, Result};
use crate::field::VectorField;
use crate::grid::{CellSet, GridSpec};
use crate::linalg::{herm_map, CMat};
use crate::norms::LinearOp;
use crate::weights::{ap_characteristic, average_of, generate_weight, MatrixWeight, WeightKind};

const MAX_DRAWS: usize = 20;

/// Per-attempt shrink applied to the randomness amplitude until the
/// characteristic cap is met.
const SHRINK: f64 = 0.7;

/// Decorrelates instance indices from the base seed; the multiplier is
/// the 64-bit golden-ratio constant, so consecutive indices land far
/// apart in seed space.
pub fn instance_seed(seed: u64, index: usize, salt: u64) -> u64 {
    seed.wrapping_add((index as u64).wrapping_mul(0x9E3779B97F4A7C15))
        .wrapping_add(salt)
}

fn draw_scalar_kind(rng: &mut ChaCha20Rng, dim: usize, p: f64, scale: f64) -> WeightKind {
    if rng.gen::<bool>() {
        let d = dim as f64;
        let t: f64 = rng.gen();
        let alpha = scale * 0.6 * (-d + t * (d * (p - 1.0) + d));
        let mut center = [0.0; crate::grid::MAX_DIM];
        for c in center.iter_mut().take(dim) {
            *c = rng.gen();
        }
        WeightKind::PowerLaw {
            n: 1,
            alpha,
            center,
        }
    } else {
        WeightKind::LogGaussian {
            n: 1,
            sigma: scale * (0.25 + 0.35 * rng.gen::<f64>()),
        }
    }
}

fn draw_matrix_kind(rng: &mut ChaCha20Rng, n: usize, scale: f64) -> WeightKind {
    if rng.gen::<bool>() {
        WeightKind::RotatedDiagonal {
            n,
            amplitude: scale * (0.5 + 0.9 * rng.gen::<f64>()),
        }
    } else {
        WeightKind::LogGaussian {
            n,
            sigma: scale * (0.2 + 0.3 * rng.gen::<f64>()),
        }
    }
}

fn capped_weight(
    grid: &GridSpec,
    p: f64,
    ap_cap: f64,
    family: &CubeFamily,
    seed: u64,
    draw: impl Fn(&mut ChaCha20Rng, f64) -> WeightKind,
) -> Result<MatrixWeight> {
    let mut scale = 1.0;
    for attempt in 0..MAX_DRAWS {
        let s = instance_seed(seed, attempt, 0x77);
        let mut rng = ChaCha20Rng::seed_from_u64(s);
        let kind = draw(&mut rng, scale);
        let w = generate_weight(grid, &kind, p, s)?;
        if ap_characteristic(&w, p, family, false)? <= ap_cap {
            return Ok(w);
        }
        scale *= SHRINK;
    }
    Err(Error::InvalidParam(format!(
        "no weight under characteristic cap {ap_cap} in {MAX_DRAWS} draws"
    )))
}

/// Random scalar weight (as a 1×1 matrix weight) with `[w]_{A_p}` at
/// most `ap_cap` over the given family. Draws alternate between power
/// laws at random centers and log-Gaussian fields, shrinking the
/// oscillation until the cap is met.
pub fn random_scalar_weight(
    grid: &GridSpec,
    p: f64,
    ap_cap: f64,
    family: &CubeFamily,
    seed: u64,
) -> Result<MatrixWeight> {
    let dim = grid.dim;
    capped_weight(grid, p, ap_cap, family, seed, |rng, scale| {
        draw_scalar_kind(rng, dim, p, scale)
    })
}

/// Random n×n matrix weight with `[W]_{A_p}` at most `ap_cap`,
/// alternating rotated-diagonal and log-Gaussian draws.
pub fn random_matrix_weight(
    grid: &GridSpec,
    n: usize,
    p: f64,
    ap_cap: f64,
    family: &CubeFamily,
    seed: u64,
) -> Result<MatrixWeight> {
    capped_weight(grid, p, ap_cap, family, seed, |rng, scale| {
        draw_matrix_kind(rng, n, scale)
    })
}

/// The p = 2 reducing matrices of a cell set: `(m_E W)^{1/2}` and
/// `(m_E W^{-1})^{1/2}`. At p = 2 these are exact, not just comparable.
pub fn set_reducing_p2(w: &MatrixWeight, cells: &[usize]) -> (CMat, CMat) {
    let primal = herm_map(&w.average(cells), f64::sqrt);
    let dual = herm_map(&average_of(&w.power_field(-1.0), cells), f64::sqrt);
    (primal, dual)
}

/// Random nonempty cell set with density drawn from [0.2, 0.9].
pub fn random_cell_set(grid: &GridSpec, seed: u64) -> CellSet {
    let count = grid.cell_count();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    loop {
        let density = 0.2 + 0.7 * rng.gen::<f64>();
        let mut set = CellSet::empty(count);
        for c in 0..count {
            if rng.gen::<f64>() < density {
                set.insert(c);
            }
        }
        if !set.is_empty() {
            return set;
        }
    }
}

/// Random nonempty subset of the given cells, as a set over the full
/// grid domain.
pub fn random_subset(grid: &GridSpec, cells: &[usize], seed: u64) -> CellSet {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    loop {
        let density = 0.3 + 0.6 * rng.gen::<f64>();
        let mut set = CellSet::empty(grid.cell_count());
        for &c in cells {
            if rng.gen::<f64>() < density {
                set.insert(c);
            }
        }
        if !set.is_empty() {
            return set;
        }
    }
}

/// Averaging operator `A_E f = 1_E · fint_E f`; self-adjoint on
/// unweighted L².
pub struct AveragingOp {
    pub grid: GridSpec,
    pub n: usize,
    pub set: CellSet,
}

impl LinearOp for AveragingOp {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn n(&self) -> usize {
        self.n
    }

    fn apply(&self, f: &VectorField) -> Result<VectorField> {
        crate::operators::averaging(f, &self.set)
    }

    fn apply_adjoint(&self, f: &VectorField) -> Result<VectorField> {
        crate::operators::averaging(f, &self.set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::op_norm;

    #[test]
    fn instance_seeds_are_distinct() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..100 {
            for salt in [0u64, 1, 2] {
                assert!(seen.insert(instance_seed(42, i, salt)));
            }
        }
    }

    #[test]
    fn capped_weights_respect_the_cap() {
        let grid = GridSpec::new(1, 3).unwrap();
        let family = CubeFamily::all_shifts(&grid);
        for seed in 0..5u64 {
            let w = random_scalar_weight(&grid, 2.0, 8.0, &family, seed).unwrap();
            assert!(ap_characteristic(&w, 2.0, &family, false).unwrap() <= 8.0);
            let m = random_matrix_weight(&grid, 2, 2.0, 8.0, &family, seed).unwrap();
            assert!(ap_characteristic(&m, 2.0, &family, false).unwrap() <= 8.0);
        }
    }

    #[test]
    fn weight_draws_are_deterministic() {
        let grid = GridSpec::new(1, 3).unwrap();
        let family = CubeFamily::all_shifts(&grid);
        let a = random_matrix_weight(&grid, 2, 2.0, 8.0, &family, 7).unwrap();
        let b = random_matrix_weight(&grid, 2, 2.0, 8.0, &family, 7).unwrap();
        for (x, y) in a.cells().iter().zip(b.cells()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn set_reducing_squares_to_the_averages() {
        let grid = GridSpec::new(1, 2).unwrap();
        let w = random_matrix_weight(
            &grid,
            2,
            2.0,
            8.0,
            &CubeFamily::all_shifts(&grid),
            3,
        )
        .unwrap();
        let cells: Vec<usize> = (0..grid.cell_count()).step_by(2).collect();
        let (primal, dual) = set_reducing_p2(&w, &cells);
        assert!(op_norm(&(&primal * &primal - w.average(&cells))) < 1e-10);
        assert!(op_norm(
            &(&dual * &dual - average_of(&w.power_field(-1.0), &cells))
        ) < 1e-10);
    }

    #[test]
    fn cell_sets_are_nonempty_and_seeded() {
        let grid = GridSpec::new(1, 3).unwrap();
        let a = random_cell_set(&grid, 11);
        let b = random_cell_set(&grid, 11);
        assert!(!a.is_empty());
        let av: Vec<usize> = a.iter().collect();
        let bv: Vec<usize> = b.iter().collect();
        assert_eq!(av, bv);
    }

    #[test]
    fn averaging_is_idempotent_and_self_adjoint() {
        let grid = GridSpec::new(1, 2).unwrap();
        let set = random_cell_set(&grid, 5);
        let op = AveragingOp {
            grid,
            n: 2,
            set,
        };
        let f = VectorField::random(&grid, 2, 9);
        let g = VectorField::random(&grid, 2, 10);
        let af = op.apply(&f).unwrap();
        let aaf = op.apply(&af).unwrap();
        assert!(aaf.sub(&af).l2_norm() < 1e-12);
        let lhs = op.apply(&f).unwrap().inner(&g);
        let rhs = f.inner(&op.apply(&g).unwrap());
        assert!((lhs - rhs).norm() < 1e-10);
    }
}
