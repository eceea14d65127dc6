//! Continuation and switching indices for finite-state bandit projects with
//! switching costs.
//!
//! The continuation index of a state is its Gittins index; the switching
//! index charges the startup cost up front. Both are computed by a two-stage
//! method ([`stage1`] then [`stage2`]) and cross-checked against the joint
//! `2n`-state scheme in [`at`] and brute-force enumeration in [`oracle`].
//! [`joint`] solves small multi-project instances exactly so that index
//! policies can be scored against the optimum, and [`study`] runs the
//! resulting experiments.

// `!(x >= 0.0)` style tests are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod at;
pub mod error;
pub mod generate;
pub mod io;
pub mod joint;
pub mod linalg;
pub mod measures;
pub mod model;
pub mod oracle;
pub mod stage1;
pub mod stage2;
pub mod study;
pub mod verify;

pub use at::{at_index_table, build_augmented, AugmentedProjectSpec};
pub use error::{Error, Result};
pub use generate::{generate_instance, CostModel, InstanceEnsembleConfig};
pub use joint::{evaluate_priority_policy, gap_metrics, solve_optimal, GapMetrics, JointMdp, PolicyValue, TieRule};
pub use linalg::Matrix;
pub use model::{normalize, validate, AugmentedState, NormalizedProjectSpec, ProjectSpec, Violation};
pub use oracle::{brute_force_index, verify_measure_lemmas};
pub use stage1::{compute_stage1, gittins_index, Stage1Mode, Stage1Output};
pub use stage2::{compute_index_table, compute_switching_index, IndexTable};
pub use study::{run_bench, run_study, BenchRow, Experiment, StudyConfig, StudyReport};
pub use verify::{run_verify, VerifyLevel, VerifyReport};
