//! Rubric-entailment grading.
//!
//! A student response is graded by asking, for every rubric item of its
//! question, whether the response (premise) entails the item (hypothesis).
//! Per-item verdicts are summed into point totals and rubric-aligned
//! feedback. The crate also carries the evaluation harness used to compare
//! backends: multi-seed benchmarks, a score-prediction baseline, held-out
//! question runs and training-fraction sweeps.

pub mod corpus;
pub mod entailment;
pub mod evaluation;
pub mod exec;
pub mod points;
pub mod scoring;
pub mod seeding;
pub mod text;
