//! Solver suite for multi-stage stochastic transmission expansion planning.
//!
//! The crate couples a multicut Benders decomposition (`benders`) of the
//! node-variable stochastic program with supervised classifiers (`forest`)
//! that filter optimality cuts before they reach the master problem
//! (`mlmbd`). Cut performance data is sampled and labeled by `cutml`, and
//! the linear-programming machinery lives in `linsolve`.

pub mod benders;
pub mod cutml;
pub mod forest;
pub mod instance;
pub mod layout;
pub mod linsolve;
pub mod master;
pub mod mlmbd;
pub mod subproblem;
pub mod synth;
pub mod tol;

pub use benders::{mbd_solve, BendersConfig, IterationRecord, RunTrace, TerminationReason};
pub use cutml::{CpiKind, CpmSample, FeatureVector, LabeledDataset, ThresholdLadder};
pub use forest::{BinaryClassifier, ClassifierEnsemble, ForestParams};
pub use instance::{Instance, InstanceError};
pub use layout::VarLayout;
pub use linsolve::{
    LinearProgram, LpSolution, LpStatus, MipSolution, MipStatus, MixedIntegerProgram,
};
pub use master::{MasterProblem, MasterSolution};
pub use mlmbd::{mlmbd_solve, CascadeDecision, MlMbdConfig, MlVariant};
pub use subproblem::{CutData, EffectiveCapacity, InvestmentVector, OperationLp};

