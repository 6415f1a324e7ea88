//! Candidate scoring: the type-rule baseline, ingested model predictions,
//! and a uniform-random control.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use crate::kg::{completion_tasks, CompletionTask, EntityId, InductiveDataset};
use crate::rules::TypeScores;
use crate::seeding;

/// Scores for one completion task. `scores` holds explicit entries; any
/// entity absent from the map scores `fill`.
#[derive(Debug, Clone)]
pub struct ScoredCandidates {
    pub task: CompletionTask,
    pub scores: Arc<HashMap<EntityId, f64>>,
    pub fill: f64,
}

impl ScoredCandidates {
    pub fn score(&self, e: EntityId) -> f64 {
        self.scores.get(&e).copied().unwrap_or(self.fill)
    }
}

/// Type-baseline scores for one task: each entity keeps its slot score for
/// (relation, missing position); entities no rule proposes score 0.
pub fn baseline_score(task: &CompletionTask, type_scores: &TypeScores) -> ScoredCandidates {
    let scores = type_scores
        .slot(task.relation, task.direction.missing())
        .map(|s| Arc::clone(&s.scores))
        .unwrap_or_default();
    ScoredCandidates {
        task: *task,
        scores,
        fill: 0.0,
    }
}

/// A model under evaluation. Implementations must be pure functions of
/// (task_index, run, candidate): protocols may score the same task many
/// times, possibly in parallel, and results must not depend on evaluation
/// order or thread count.
pub trait Scorer: Sync {
    fn name(&self) -> &str;

    /// Scores `candidates` positionally for the task at `task_index` (its
    /// index in the dataset's completion-task order).
    fn score(
        &self,
        task_index: usize,
        task: &CompletionTask,
        run: u64,
        candidates: &[EntityId],
    ) -> Vec<f64>;
}

/// The rule-based type baseline.
pub struct BaselineScorer {
    type_scores: TypeScores,
}

impl BaselineScorer {
    pub fn new(type_scores: TypeScores) -> Self {
        BaselineScorer { type_scores }
    }

    pub fn scored(&self, task: &CompletionTask) -> ScoredCandidates {
        baseline_score(task, &self.type_scores)
    }
}

impl Scorer for BaselineScorer {
    fn name(&self) -> &str {
        "baseline"
    }

    fn score(
        &self,
        _task_index: usize,
        task: &CompletionTask,
        _run: u64,
        candidates: &[EntityId],
    ) -> Vec<f64> {
        let sc = self.scored(task);
        candidates.iter().map(|&e| sc.score(e)).collect()
    }
}

#[derive(Deserialize)]
struct PredictionLine {
    triple: (String, String, String),
    heads: Vec<(String, f64)>,
    tails: Vec<(String, f64)>,
}

/// Reads a predictions JSONL file into per-task scores.
///
/// Each line carries one test triple with scored head and tail candidate
/// lists (entity names against the test graph); lines must cover the
/// dataset's test split in file order. An optional leading
/// `{"run_config": ...}` line is skipped. Returns two entries per triple in
/// completion-task order (tail, then head); entities a line does not mention
/// score negative infinity.
pub fn ingest_predictions(path: &Path, dataset: &InductiveDataset) -> Result<Vec<ScoredCandidates>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let graph = &dataset.test.graph;
    let tasks = completion_tasks(&dataset.test.test);

    let mut out = Vec::with_capacity(tasks.len());
    let mut triple_idx = 0usize;
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        if line.trim().is_empty() {
            continue;
        }
        let loc = || format!("{}:{}", path.display(), lineno + 1);
        if lineno == 0 {
            let v: serde_json::Value = serde_json::from_str(&line).with_context(loc)?;
            if v.get("run_config").is_some() && v.get("triple").is_none() {
                continue;
            }
        }
        let parsed: PredictionLine = serde_json::from_str(&line).with_context(loc)?;

        let expected = dataset
            .test
            .test
            .get(triple_idx)
            .ok_or_else(|| anyhow::anyhow!("{}: more lines than test triples", loc()))?;
        let (s, p, o) = graph.name_triple(expected);
        if (s, p, o) != (&*parsed.triple.0, &*parsed.triple.1, &*parsed.triple.2) {
            bail!(
                "{}: triple ({}, {}, {}) does not match test triple #{} ({s}, {p}, {o})",
                loc(),
                parsed.triple.0,
                parsed.triple.1,
                parsed.triple.2,
                triple_idx + 1
            );
        }

        let resolve = |list: &[(String, f64)]| -> Result<HashMap<EntityId, f64>> {
            let mut m = HashMap::with_capacity(list.len());
            for (name, score) in list {
                let id = graph
                    .entity_id(name)
                    .ok_or_else(|| anyhow::anyhow!("{}: unknown entity {name:?}", loc()))?;
                if m.insert(id, *score).is_some() {
                    bail!("{}: entity {name:?} scored twice", loc());
                }
            }
            Ok(m)
        };
        let tails = resolve(&parsed.tails)?;
        let heads = resolve(&parsed.heads)?;

        let base = triple_idx * 2;
        for (task, scores) in [(tasks[base], tails), (tasks[base + 1], heads)] {
            out.push(ScoredCandidates {
                task,
                scores: Arc::new(scores),
                fill: f64::NEG_INFINITY,
            });
        }
        triple_idx += 1;
    }
    if triple_idx != dataset.test.test.len() {
        bail!(
            "{}: {} prediction lines for {} test triples",
            path.display(),
            triple_idx,
            dataset.test.test.len()
        );
    }
    Ok(out)
}

/// Scores read from a predictions file via [`ingest_predictions`].
pub struct PredictionsScorer {
    name: String,
    per_task: Vec<ScoredCandidates>,
}

impl PredictionsScorer {
    pub fn load(path: &Path, dataset: &InductiveDataset) -> Result<Self> {
        Ok(PredictionsScorer {
            name: format!("predictions:{}", path.display()),
            per_task: ingest_predictions(path, dataset)?,
        })
    }

    pub fn from_scored(name: impl Into<String>, per_task: Vec<ScoredCandidates>) -> Self {
        PredictionsScorer {
            name: name.into(),
            per_task,
        }
    }
}

impl Scorer for PredictionsScorer {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(
        &self,
        task_index: usize,
        task: &CompletionTask,
        _run: u64,
        candidates: &[EntityId],
    ) -> Vec<f64> {
        let sc = &self.per_task[task_index];
        debug_assert_eq!(&sc.task, task);
        candidates.iter().map(|&e| sc.score(e)).collect()
    }
}

/// Control model: each (task, run, entity) gets an independent pseudo-random
/// score in [0, 1) derived from `seed`. Under any protocol its hits@k should
/// track k / |candidate pool|.
pub struct UniformRandomScorer {
    pub seed: u64,
}

impl Scorer for UniformRandomScorer {
    fn name(&self) -> &str {
        "uniform-random"
    }

    fn score(
        &self,
        task_index: usize,
        _task: &CompletionTask,
        run: u64,
        candidates: &[EntityId],
    ) -> Vec<f64> {
        candidates
            .iter()
            .map(|&e| {
                let bits =
                    seeding::derive_seed(self.seed, &[task_index as u64, run, u64::from(e.0)]);
                // top 53 bits -> [0, 1)
                (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
            })
            .collect()
    }
}
