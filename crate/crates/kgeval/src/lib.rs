//! Evaluation toolkit for link prediction on inductive knowledge-graph
//! benchmarks.
//!
//! An inductive benchmark pairs a train graph with a test graph over a
//! disjoint entity set; only the relation vocabulary is shared. Models see
//! the test graph's inference split as features and are asked to rank the
//! missing entity of each valid/test triple. This crate provides:
//!
//! * dataset loading and split statistics ([`kg`]),
//! * a rule-based type baseline learned from the train split ([`rules`]),
//! * candidate scorers, including ingestion of external model predictions
//!   ([`ranker`]),
//! * uniform and type-matched negative sampling ([`negatives`]),
//! * three ranking protocols with filtered hits@k / MRR ([`eval`]),
//! * report serialization and model comparison tables ([`report`]).
//!
//! Everything sampled is derived from a master seed per query, so results
//! are reproducible and independent of thread count.

pub mod cli;
pub mod eval;
pub mod kg;
pub mod negatives;
pub mod ranker;
pub mod report;
pub mod rules;
pub mod seeding;

#[cfg(test)]
pub(crate) mod testkit;

pub use eval::{
    evaluate, filtered_rank, hits_at_k, mrr, EvalOptions, MetricReport, Protocol, RankingRecord,
    TieMode,
};
pub use kg::{
    completion_tasks, load_dataset, CompletionTask, DatasetLayout, DatasetStats, Direction,
    EntityId, InductiveDataset, KnowledgeGraph, Position, RelationId, TestGraph, TrainGraph,
    Triple,
};
pub use negatives::{
    gen_random_negatives, gen_tmn, generate_tmn_set, read_negatives, write_negatives,
    LoadedNegatives, NegativeSet, Provenance, TaskNegatives,
};
pub use ranker::{
    baseline_score, ingest_predictions, BaselineScorer, PredictionsScorer, ScoredCandidates,
    Scorer, UniformRandomScorer,
};
pub use report::{average_reports, compare, read_reports, run_config, DeltaRow, DeltaTable};
pub use rules::{
    apply_rules, learn_rules, read_rules, write_rules, LearnOptions, RuleTemplate, TypeRule,
    TypeScores,
};
