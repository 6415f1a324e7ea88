//! Shared fixtures and independent oracle implementations.
//!
//! The oracles work directly on `(subject, relation, object)` string rows
//! with plain set arithmetic — no ids, no indexes, no code shared with the
//! library — so agreement between the two is evidence, not tautology.

#![allow(dead_code)] // each test target uses its own subset

use std::collections::{BTreeSet, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use kgeval::{load_dataset, DatasetLayout, InductiveDataset};

pub type Row = (String, String, String);

pub fn row(s: &str, p: &str, o: &str) -> Row {
    (s.to_string(), p.to_string(), o.to_string())
}

/// Committed copy of the 14-triple geography fixture.
pub fn toy_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/toy_geo")
}

/// Where benchmark downloads are expected: `data/` at the repository root,
/// overridable with `KGEVAL_DATA`.
pub fn data_root() -> PathBuf {
    match std::env::var_os("KGEVAL_DATA") {
        Some(v) => PathBuf::from(v),
        None => Path::new(env!("CARGO_MANIFEST_DIR"))
            .ancestors()
            .nth(2)
            .unwrap()
            .join("data"),
    }
}

pub fn load_toy() -> InductiveDataset {
    load_dataset(toy_dir(), "toy_geo", &DatasetLayout::default()).unwrap()
}

pub fn write_tsv(path: &Path, rows: &[Row]) {
    let mut f = File::create(path).unwrap();
    for (s, p, o) in rows {
        writeln!(f, "{s}\t{p}\t{o}").unwrap();
    }
}

/// Writes the six split files for an inductive dataset whose train side has
/// empty valid/test splits, and loads it back.
pub fn write_dataset(
    dir: &Path,
    train: &[Row],
    inference: &[Row],
    valid: &[Row],
    test: &[Row],
) -> InductiveDataset {
    write_tsv(&dir.join("train.txt"), train);
    write_tsv(&dir.join("valid.txt"), &[]);
    write_tsv(&dir.join("test.txt"), &[]);
    write_tsv(&dir.join("train_ind.txt"), inference);
    write_tsv(&dir.join("valid_ind.txt"), valid);
    write_tsv(&dir.join("test_ind.txt"), test);
    load_dataset(dir, "synthetic", &DatasetLayout::default()).unwrap()
}

// ---------------------------------------------------------------------------
// Brute-force rule oracle
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRule {
    pub head: String,
    pub body: String,
    /// Two letters: slot of the shared variable in the head, then in the
    /// body ('S' subject, 'O' object).
    pub template: String,
    pub numerator: usize,
    pub denominator: usize,
    pub confidence: f64,
}

fn slot_entities<'a>(rows: &'a [Row], relation: &str, slot: char) -> BTreeSet<&'a str> {
    rows.iter()
        .filter(|(_, p, _)| p == relation)
        .map(|(s, _, o)| if slot == 'S' { s.as_str() } else { o.as_str() })
        .collect()
}

/// Every rule `head(·X·) <- body(·X·)` over distinct relation pairs, scored
/// as |head-slot entities ∩ body-slot entities| / |body-slot entities|.
pub fn oracle_rules(rows: &[Row], min_support: usize, min_confidence: f64) -> Vec<OracleRule> {
    let relations: BTreeSet<&str> = rows.iter().map(|(_, p, _)| p.as_str()).collect();
    let mut out = Vec::new();
    for head in &relations {
        for body in &relations {
            if head == body {
                continue;
            }
            for (head_slot, body_slot) in [('S', 'S'), ('S', 'O'), ('O', 'S'), ('O', 'O')] {
                let head_set = slot_entities(rows, head, head_slot);
                let body_set = slot_entities(rows, body, body_slot);
                if body_set.is_empty() {
                    continue;
                }
                let numerator = head_set.intersection(&body_set).count();
                let denominator = body_set.len();
                let confidence = numerator as f64 / denominator as f64;
                if numerator < min_support || confidence < min_confidence {
                    continue;
                }
                out.push(OracleRule {
                    head: head.to_string(),
                    body: body.to_string(),
                    template: format!("{head_slot}{body_slot}"),
                    numerator,
                    denominator,
                    confidence,
                });
            }
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Naive non-sampling evaluator
// ---------------------------------------------------------------------------

pub struct NaiveOutcome {
    /// Average-tie filtered rank per task, tail then head per test row.
    pub ranks: Vec<f64>,
    pub hits10: f64,
    pub mrr: f64,
    pub mean_candidates: f64,
}

/// Scores every test-graph entity against every completion task by scanning
/// rows: the score of entity `e` for slot (p, slot) is the best confidence
/// among oracle rules with that head whose body slot contains `e` in the
/// inference rows. Ranks are recomputed from scratch with the expected-rank
/// tie convention.
pub fn naive_baseline_non_sampling(
    train: &[Row],
    inference: &[Row],
    valid: &[Row],
    test: &[Row],
) -> NaiveOutcome {
    let rules = oracle_rules(train, 1, 0.0);
    // (head relation, head slot, confidence, entities seen in the body slot)
    let grounded: Vec<(&str, char, f64, BTreeSet<&str>)> = rules
        .iter()
        .map(|r| {
            let head_slot = r.template.as_bytes()[0] as char;
            let body_slot = r.template.as_bytes()[1] as char;
            (
                r.head.as_str(),
                head_slot,
                r.confidence,
                slot_entities(inference, &r.body, body_slot),
            )
        })
        .collect();
    let score = |relation: &str, slot: char, e: &str| -> f64 {
        grounded
            .iter()
            .filter(|(h, hs, _, set)| *h == relation && *hs == slot && set.contains(e))
            .map(|(_, _, c, _)| *c)
            .fold(0.0, f64::max)
    };

    let known: HashSet<(&str, &str, &str)> = inference
        .iter()
        .chain(valid)
        .chain(test)
        .map(|(s, p, o)| (s.as_str(), p.as_str(), o.as_str()))
        .collect();
    let entities: BTreeSet<&str> = inference
        .iter()
        .chain(valid)
        .chain(test)
        .flat_map(|(s, _, o)| [s.as_str(), o.as_str()])
        .collect();

    let mut ranks = Vec::new();
    let mut pool_sizes = Vec::new();
    for (s, p, o) in test {
        // tail task p(s, ?) fills the object slot; head task p(?, o) the
        // subject slot
        for (slot, anchor, truth) in [('O', s.as_str(), o.as_str()), ('S', o.as_str(), s.as_str())]
        {
            let truth_score = score(p, slot, truth);
            let mut better = 0usize;
            let mut tied = 0usize;
            let mut kept = 0usize;
            for &e in &entities {
                if e == truth {
                    continue;
                }
                let corrupted = if slot == 'O' {
                    (anchor, p.as_str(), e)
                } else {
                    (e, p.as_str(), anchor)
                };
                if known.contains(&corrupted) {
                    continue;
                }
                kept += 1;
                let se = score(p, slot, e);
                if se > truth_score {
                    better += 1;
                } else if se == truth_score {
                    tied += 1;
                }
            }
            ranks.push(1.0 + better as f64 + tied as f64 / 2.0);
            pool_sizes.push(kept + 1);
        }
    }

    let n = ranks.len() as f64;
    NaiveOutcome {
        hits10: ranks.iter().filter(|r| **r <= 10.0).count() as f64 / n,
        mrr: ranks.iter().map(|r| 1.0 / *r).sum::<f64>() / n,
        mean_candidates: pool_sizes.iter().sum::<usize>() as f64 / n,
        ranks,
    }
}

// ---------------------------------------------------------------------------
// Seeded synthetic datasets
// ---------------------------------------------------------------------------

pub struct SyntheticRows {
    pub train: Vec<Row>,
    pub inference: Vec<Row>,
    pub valid: Vec<Row>,
    pub test: Vec<Row>,
}

fn random_rows(
    rng: &mut ChaCha8Rng,
    prefix: &str,
    relations: &[String],
    max_entities: usize,
    max_triples: usize,
) -> Vec<Row> {
    let n_e = rng.gen_range(3..=max_entities.max(3));
    let n_t = rng.gen_range(1..=max_triples.max(1));
    let mut rows = BTreeSet::new();
    for _ in 0..n_t {
        let s = rng.gen_range(0..n_e);
        let o = rng.gen_range(0..n_e);
        let r = &relations[rng.gen_range(0..relations.len())];
        rows.insert((format!("{prefix}{s}"), r.clone(), format!("{prefix}{o}")));
    }
    rows.into_iter().collect()
}

/// A random inductive dataset: a train graph over `a*` entities and an
/// entity-disjoint test graph over `b*` entities sharing the relation
/// vocabulary, with roughly 15% of test-side rows held out as targets.
pub fn random_dataset_rows(seed: u64) -> SyntheticRows {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_r = rng.gen_range(2..=5);
    let relations: Vec<String> = (0..n_r).map(|i| format!("r{i}")).collect();
    let train = random_rows(&mut rng, "a", &relations, 50, 200);
    let mut side = random_rows(&mut rng, "b", &relations, 40, 150);
    side.shuffle(&mut rng);
    let n = side.len();
    let n_test = (n / 6).max(1);
    let n_valid = (n / 10).min(n - n_test);
    let test = side.split_off(n - n_test);
    let valid = side.split_off(side.len() - n_valid);
    SyntheticRows {
        train,
        inference: side,
        valid,
        test,
    }
}

/// A directed ring: entity `c{i}` links to `c{i+1}` under one relation. With
/// the last `targets` edges as the test split nothing is ever filtered, so
/// candidate pools have an exact, known size.
pub fn ring_dataset_rows(entities: usize, targets: usize) -> SyntheticRows {
    assert!(targets < entities);
    let edge = |i: usize| {
        (
            format!("c{i}"),
            "next".to_string(),
            format!("c{}", (i + 1) % entities),
        )
    };
    let split = entities - targets;
    SyntheticRows {
        train: (0..10)
            .map(|i| (format!("a{i}"), "next".to_string(), format!("a{}", (i + 1) % 10)))
            .collect(),
        inference: (0..split).map(edge).collect(),
        valid: vec![],
        test: (split..entities).map(edge).collect(),
    }
}
