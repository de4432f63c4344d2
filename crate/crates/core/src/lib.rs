//! Simulation and estimation for budget-constrained crowdsourcing.
//!
//! * [`model`]: Dawid-Skene instances, sparse assignment and answer matrices.
//! * [`estimator`]: majority vote and one-coin EM with per-topic reliabilities.
//! * [`allocator`]: partial mutual information, query gains, and the random,
//!   one-shot and dynamic allocation policies.
//! * [`harness`]: seeded policy trials and Monte-Carlo sweeps.
//! * [`formats`]: plain-text instance, answer and label files.
//!
//! The numeric types are generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix the scalar for the common cases.

pub mod allocator;
pub mod error;
pub mod estimator;
pub mod formats;
pub mod harness;
pub mod model;
pub mod scalar;

pub use allocator::{
    allocate_round, best_user_for_question, dynamic_allocate, expected_gain, joint_probability, one_shot_allocate,
    pmi, random_assignment, AllocationStep, DynamicOutcome, GainMode, PolicyOptions,
    QuestionEvidence, ResponseOracle, RoundRecord,
};
pub use error::{Error, Result};
pub use estimator::{
    e_step, expand_reliabilities, log_likelihood, m_step, majority_vote, map_objective, run_em,
    EmOptions, EmOutcome, ReliabilityEstimate,
};
pub use harness::{
    aggregate, run_policy_trial, sweep, Aggregate, Policy, ResultRow, ResultTable, SweepConfig,
    SweepOutput, SweepPoint, SweepPoints, TrialConfig, TrialResult,
};
pub use model::{
    error_rate, sample_instance, sample_responses, AnswerMatrix, AssignmentMatrix, GroundTruth,
    InstanceConfig, Label, LabelEstimate,
};
pub use scalar::Real;

pub type GroundTruthF64 = GroundTruth<f64>;
pub type GroundTruthF32 = GroundTruth<f32>;
pub type LabelEstimateF64 = LabelEstimate<f64>;
pub type LabelEstimateF32 = LabelEstimate<f32>;
pub type ReliabilityEstimateF64 = ReliabilityEstimate<f64>;
pub type ReliabilityEstimateF32 = ReliabilityEstimate<f32>;
pub type EmOptionsF64 = EmOptions<f64>;
pub type EmOptionsF32 = EmOptions<f32>;
pub type EmOutcomeF64 = EmOutcome<f64>;
pub type QuestionEvidenceF64 = QuestionEvidence<f64>;
pub type QuestionEvidenceF32 = QuestionEvidence<f32>;
pub type PolicyOptionsF64 = PolicyOptions<f64>;
pub type PolicyOptionsF32 = PolicyOptions<f32>;
pub type TrialConfigF64 = TrialConfig<f64>;
pub type TrialConfigF32 = TrialConfig<f32>;
pub type SweepConfigF64 = SweepConfig<f64>;
