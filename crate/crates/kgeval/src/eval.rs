//! Ranking protocols and filtered metrics.
//!
//! Every valid/test triple yields two completion tasks; a protocol decides
//! which candidates the truth is ranked against:
//!
//! * non-sampling: every entity of the test graph,
//! * random-sampling: the truth plus `negatives` uniform draws, repeated for
//!   `runs` independent rounds whose metrics are averaged,
//! * type-matched: the truth plus the negatives read from a file.
//!
//! Ranking is always *filtered*: a candidate other than the truth whose
//! corrupted triple is a known test-side triple is removed before counting.
//! Ties around the truth's score either contribute half their weight
//! (average, the default) or count fully against it (pessimistic).

use std::collections::HashSet;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kg::{completion_tasks, CompletionTask, EntityId, InductiveDataset, Triple};
use crate::negatives::{gen_random_negatives, read_negatives};
use crate::ranker::{ScoredCandidates, Scorer};
use crate::seeding::{self, stream};

/// Candidate-selection protocol for ranking.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Protocol {
    /// Rank against every entity of the test graph.
    NonSampling,
    /// Rank against `negatives` uniform draws per task, averaged over `runs`
    /// rounds. Requires a seed.
    RandomSampling { runs: u64, negatives: usize },
    /// Rank against the negatives stored in a file (see
    /// [`crate::negatives::read_negatives`]).
    TypeMatched { negatives_file: PathBuf },
}

impl Protocol {
    pub fn label(&self) -> &'static str {
        match self {
            Protocol::NonSampling => "non-sampling",
            Protocol::RandomSampling { .. } => "random-sampling",
            Protocol::TypeMatched { .. } => "type-matched",
        }
    }
}

/// How ties at the truth's score are charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum TieMode {
    /// rank = 1 + #better + #tied/2 — an unbiased estimate of the expected
    /// rank under random tie-breaking; fractional ranks are possible.
    Average,
    /// rank = 1 + #better + #tied — every tie counts against the model, so a
    /// constant scorer cannot look better than chance.
    Pessimistic,
}

/// Outcome of ranking one task.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankingRecord {
    /// Filtered rank of the truth (1-based; fractional under average ties).
    pub rank: f64,
    /// Candidates compared against, truth included, after filtering.
    pub candidates: usize,
    /// Candidates removed by the filter.
    pub filtered: usize,
}

fn rank_records(
    task: &CompletionTask,
    truth_score: f64,
    pairs: impl Iterator<Item = (EntityId, f64)>,
    filter: &HashSet<Triple>,
    tie: TieMode,
) -> RankingRecord {
    let mut better = 0usize;
    let mut tied = 0usize;
    let mut kept = 0usize;
    let mut filtered = 0usize;
    for (e, score) in pairs {
        if e == task.truth {
            continue;
        }
        if filter.contains(&task.corrupted(e)) {
            filtered += 1;
            continue;
        }
        kept += 1;
        if score > truth_score {
            better += 1;
        } else if score == truth_score {
            tied += 1;
        }
    }
    let rank = match tie {
        TieMode::Average => 1.0 + better as f64 + tied as f64 / 2.0,
        TieMode::Pessimistic => (1 + better + tied) as f64,
    };
    RankingRecord {
        rank,
        candidates: kept + 1,
        filtered,
    }
}

/// Filtered rank of the truth among `candidates` under `scored`'s scores.
/// The truth itself is always ranked even if listed in `candidates`.
pub fn filtered_rank(
    scored: &ScoredCandidates,
    candidates: &[EntityId],
    filter: &HashSet<Triple>,
    tie: TieMode,
) -> RankingRecord {
    let truth_score = scored.score(scored.task.truth);
    rank_records(
        &scored.task,
        truth_score,
        candidates.iter().map(|&e| (e, scored.score(e))),
        filter,
        tie,
    )
}

fn rank_scored_slice(
    task: &CompletionTask,
    candidates: &[EntityId],
    scores: &[f64],
    filter: &HashSet<Triple>,
    tie: TieMode,
) -> RankingRecord {
    let truth_score = candidates
        .iter()
        .position(|&e| e == task.truth)
        .map(|i| scores[i])
        .expect("protocols always include the truth among candidates");
    rank_records(
        task,
        truth_score,
        candidates.iter().copied().zip(scores.iter().copied()),
        filter,
        tie,
    )
}

/// Fraction of records whose rank is at most k.
pub fn hits_at_k(ranks: &[f64], k: usize) -> f64 {
    assert!(!ranks.is_empty());
    ranks.iter().filter(|&&r| r <= k as f64).count() as f64 / ranks.len() as f64
}

/// Mean reciprocal rank.
pub fn mrr(ranks: &[f64]) -> f64 {
    assert!(!ranks.is_empty());
    ranks.iter().map(|r| 1.0 / r).sum::<f64>() / ranks.len() as f64
}

#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// hits@k cutoffs to report.
    pub ks: Vec<usize>,
    /// Master seed; required by the random-sampling protocol.
    pub seed: Option<u64>,
    pub tie: TieMode,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            ks: vec![10],
            seed: None,
            tie: TieMode::Average,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HitsEntry {
    pub k: usize,
    pub value: f64,
}

/// Metrics for one (dataset, model, protocol) evaluation. Multi-run
/// protocols average per-run metric values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_config: Option<serde_json::Value>,
    pub dataset: String,
    pub model: String,
    pub protocol: String,
    pub runs: u64,
    /// Ranking records per run (2 per test triple).
    pub tasks: usize,
    pub hits: Vec<HitsEntry>,
    pub mrr: f64,
    pub mean_rank: f64,
    /// Mean candidate-pool size after filtering, truth included.
    pub mean_candidates: f64,
    /// Mean number of candidates removed by the filter per task.
    pub mean_filtered: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negatives: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tmn_sha256: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub undersized_tasks: Option<usize>,
}

impl MetricReport {
    pub fn hits_at(&self, k: usize) -> Option<f64> {
        self.hits.iter().find(|h| h.k == k).map(|h| h.value)
    }
}

struct RunAverages {
    hits: Vec<f64>,
    mrr: f64,
    mean_rank: f64,
    mean_candidates: f64,
    mean_filtered: f64,
}

fn summarize_runs(records: &[RankingRecord], runs: u64, ks: &[usize]) -> RunAverages {
    let per_run = records.len() / runs as usize;
    let mut acc = RunAverages {
        hits: vec![0.0; ks.len()],
        mrr: 0.0,
        mean_rank: 0.0,
        mean_candidates: 0.0,
        mean_filtered: 0.0,
    };
    for run in records.chunks_exact(per_run) {
        let ranks: Vec<f64> = run.iter().map(|r| r.rank).collect();
        for (i, &k) in ks.iter().enumerate() {
            acc.hits[i] += hits_at_k(&ranks, k);
        }
        acc.mrr += mrr(&ranks);
        acc.mean_rank += ranks.iter().sum::<f64>() / ranks.len() as f64;
        acc.mean_candidates +=
            run.iter().map(|r| r.candidates as f64).sum::<f64>() / run.len() as f64;
        acc.mean_filtered += run.iter().map(|r| r.filtered as f64).sum::<f64>() / run.len() as f64;
    }
    let n = runs as f64;
    for h in &mut acc.hits {
        *h /= n;
    }
    acc.mrr /= n;
    acc.mean_rank /= n;
    acc.mean_candidates /= n;
    acc.mean_filtered /= n;
    acc
}

/// Ranks every completion task of `dataset`'s test split under `protocol`
/// and aggregates filtered metrics.
pub fn evaluate(
    scorer: &dyn Scorer,
    dataset: &InductiveDataset,
    protocol: &Protocol,
    opts: &EvalOptions,
) -> Result<MetricReport> {
    let tasks = completion_tasks(&dataset.test.test);
    if tasks.is_empty() {
        bail!("dataset {} has an empty test split", dataset.name);
    }
    if opts.ks.is_empty() {
        bail!("no hits@k cutoffs requested");
    }
    let filter = dataset.test.known();

    let mut negatives_used = None;
    let mut tmn_sha256 = None;
    let mut undersized = None;

    let (records, runs) = match protocol {
        Protocol::NonSampling => {
            let all: Vec<EntityId> = dataset.test.graph.all_entities().collect();
            let records: Vec<RankingRecord> = tasks
                .par_iter()
                .enumerate()
                .map(|(i, task)| {
                    let scores = scorer.score(i, task, 0, &all);
                    rank_scored_slice(task, &all, &scores, filter, opts.tie)
                })
                .collect();
            (records, 1)
        }
        Protocol::RandomSampling { runs, negatives } => {
            if *runs == 0 {
                bail!("random-sampling protocol needs at least one run");
            }
            let seed = opts
                .seed
                .context("random-sampling protocol requires a seed")?;
            let entity_count = dataset.test.graph.entity_count();
            let n_tasks = tasks.len();
            let records: Vec<RankingRecord> = (0..*runs as usize * n_tasks)
                .into_par_iter()
                .map(|flat| {
                    let (run, i) = ((flat / n_tasks) as u64, flat % n_tasks);
                    let task = &tasks[i];
                    let mut rng =
                        seeding::rng_for(seed, &[stream::RANDOM_NEGATIVES, run, i as u64]);
                    let mut candidates = Vec::with_capacity(negatives + 1);
                    candidates.push(task.truth);
                    candidates.extend(gen_random_negatives(
                        task.truth,
                        entity_count,
                        *negatives,
                        &mut rng,
                    ));
                    let scores = scorer.score(i, task, run, &candidates);
                    rank_scored_slice(task, &candidates, &scores, filter, opts.tie)
                })
                .collect();
            negatives_used = Some(*negatives);
            (records, *runs)
        }
        Protocol::TypeMatched { negatives_file } => {
            let loaded = read_negatives(negatives_file, dataset)?;
            negatives_used = Some(loaded.requested);
            undersized = Some(loaded.undersized_tasks());
            tmn_sha256 = Some(loaded.sha256.clone());
            let records: Vec<RankingRecord> = tasks
                .par_iter()
                .enumerate()
                .map(|(i, task)| {
                    let mut candidates = Vec::with_capacity(loaded.per_task[i].len() + 1);
                    candidates.push(task.truth);
                    candidates.extend(&loaded.per_task[i]);
                    let scores = scorer.score(i, task, 0, &candidates);
                    rank_scored_slice(task, &candidates, &scores, filter, opts.tie)
                })
                .collect();
            (records, 1)
        }
    };

    let avg = summarize_runs(&records, runs, &opts.ks);
    Ok(MetricReport {
        run_config: None,
        dataset: dataset.name.clone(),
        model: scorer.name().to_string(),
        protocol: protocol.label().to_string(),
        runs,
        tasks: tasks.len(),
        hits: opts
            .ks
            .iter()
            .zip(&avg.hits)
            .map(|(&k, &value)| HitsEntry { k, value })
            .collect(),
        mrr: avg.mrr,
        mean_rank: avg.mean_rank,
        mean_candidates: avg.mean_candidates,
        mean_filtered: avg.mean_filtered,
        negatives: negatives_used,
        tmn_sha256,
        undersized_tasks: undersized,
    })
}
