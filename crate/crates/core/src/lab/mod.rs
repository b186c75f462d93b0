//! Experiment laboratory: configuration, randomized verification
//! suites, and machine-readable reports.
//!
//! Each suite targets one claim about matrix-weighted commutator
//! quantities. Exact identities and combinatorial invariants become
//! hard checks; comparability claims become fitted constants that must
//! stay within a factor of two across refinement depths and seed
//! batches. `verify all` runs every suite.

pub mod config;
pub mod instances;
pub mod report;
pub mod suites;

use std::sync::Once;

pub use config::{build_symbol, load_config, ExperimentConfig, OperatorSpec, SymbolSpec};
pub use report::{write_report, Check, ExperimentReport, NamedValue, Row, Verdict};

use crate::error::{Error, Result};

/// The claims the registry must cover; the registry test fails if a
/// claim loses its suite.
pub const CLAIMS: [&str; 13] = [
    "averaging_norm_identity",
    "restricted_riesz_average_bound",
    "commutator_upper",
    "commutator_lower",
    "riesz_lower_collection",
    "block_upper_triangle",
    "block_comparability",
    "sparse_representation",
    "orlicz_bump_bound",
    "quantitative_one_weight",
    "carleson_embedding",
    "oscillation_equivalence",
    "stopping_decay",
];

/// A named suite together with the claims it verifies.
pub struct SuiteDef {
    pub name: &'static str,
    pub claims: &'static [&'static str],
    pub run: fn(&ExperimentConfig) -> Result<ExperimentReport>,
}

/// All suites in execution order.
pub fn registry() -> Vec<SuiteDef> {
    vec![
        SuiteDef {
            name: "averaging",
            claims: &["averaging_norm_identity"],
            run: suites::run_averaging,
        },
        SuiteDef {
            name: "averaging_lower",
            claims: &["restricted_riesz_average_bound"],
            run: suites::run_averaging_lower,
        },
        SuiteDef {
            name: "scalar_upper",
            claims: &["commutator_upper"],
            run: suites::run_scalar_upper,
        },
        SuiteDef {
            name: "scalar_lower",
            claims: &["commutator_lower"],
            run: suites::run_scalar_lower,
        },
        SuiteDef {
            name: "matrix_riesz",
            claims: &["riesz_lower_collection", "commutator_lower"],
            run: suites::run_matrix_riesz,
        },
        SuiteDef {
            name: "block_triangle",
            claims: &["block_upper_triangle", "block_comparability"],
            run: suites::run_block_triangle,
        },
        SuiteDef {
            name: "sparse_structure",
            claims: &["sparse_representation"],
            run: suites::run_sparse_structure,
        },
        SuiteDef {
            name: "stopping_decay",
            claims: &["stopping_decay"],
            run: suites::run_stopping_decay,
        },
        SuiteDef {
            name: "carleson_embedding",
            claims: &["carleson_embedding"],
            run: suites::run_carleson_embedding,
        },
        SuiteDef {
            name: "orlicz_pairing",
            claims: &["orlicz_bump_bound"],
            run: suites::run_orlicz_pairing,
        },
        SuiteDef {
            name: "oscillation_equivalence",
            claims: &["oscillation_equivalence"],
            run: suites::run_oscillation_equivalence,
        },
        SuiteDef {
            name: "quantitative_scalar",
            claims: &["quantitative_one_weight"],
            run: suites::run_quantitative_scalar,
        },
    ]
}

/// Runs one suite by name.
pub fn run_suite(name: &str, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    init_threads();
    cfg.validate()?;
    let reg = registry();
    let def = reg.iter().find(|d| d.name == name).ok_or_else(|| {
        let known: Vec<&str> = reg.iter().map(|d| d.name).collect();
        Error::Config(format!(
            "unknown suite '{name}'; known suites: {}",
            known.join(", ")
        ))
    })?;
    (def.run)(cfg)
}

/// Runs every suite in registry order.
pub fn run_all(cfg: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    init_threads();
    cfg.validate()?;
    registry().iter().map(|d| (d.run)(cfg)).collect()
}

static THREAD_INIT: Once = Once::new();

/// Caps the rayon pool at `MWLAB_THREADS` when the variable is set to a
/// positive integer. Later calls and an already-built global pool are
/// both harmless.
pub fn init_threads() {
    THREAD_INIT.call_once(|| {
        if let Some(threads) = std::env::var("MWLAB_THREADS")
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
            .filter(|&t| t > 0)
        {
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build_global();
        }
    });
}
