//! Negative sampling: uniform negatives for the random protocol and
//! type-matched negatives (TMN) for the hard protocol.
//!
//! A type-matched negative for a task is an entity the type rules consider
//! plausible for the missing slot but whose corrupted triple is not a known
//! triple on the test side. Candidates are bucketed by type confidence
//! (high ≥ 0.75 > mid ≥ 0.25 > low) and drawn without replacement from the
//! highest bucket down; if the buckets run dry the set is topped up with
//! uniformly random true negatives and the task is flagged undersized when
//! even that cannot reach the requested count.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::kg::{completion_tasks, CompletionTask, EntityId, InductiveDataset, Triple};
use crate::rules::TypeScores;
use crate::seeding::{self, stream};

/// Bucket boundaries on type confidence.
pub const HIGH_CONFIDENCE: f64 = 0.75;
pub const MID_CONFIDENCE: f64 = 0.25;

/// How a type-matched negative was selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    BucketHigh,
    BucketMid,
    BucketLow,
    RandomFill,
}

/// Samples up to `n` distinct entities uniformly from `0..entity_count`,
/// excluding `truth`. Returns fewer when the graph is too small.
pub fn gen_random_negatives(
    truth: EntityId,
    entity_count: usize,
    n: usize,
    rng: &mut impl Rng,
) -> Vec<EntityId> {
    let pool = entity_count.saturating_sub(1);
    let take = n.min(pool);
    // sample from a range with the truth's slot removed, then shift ids at or
    // above it back up so the truth can never be drawn
    rand::seq::index::sample(rng, pool, take)
        .iter()
        .map(|i| {
            let i = i as u32;
            EntityId(if i >= truth.0 { i + 1 } else { i })
        })
        .collect()
}

/// Negatives for a single completion task, in selection order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskNegatives {
    pub entities: Vec<EntityId>,
    pub provenance: Vec<Provenance>,
}

impl TaskNegatives {
    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }
}

/// Type-matched negatives for one task.
///
/// `known` is the full test-side membership: any candidate whose corrupted
/// triple appears there is a false negative and is never drawn, not even by
/// the random fill.
pub fn gen_tmn(
    task: &CompletionTask,
    type_scores: &TypeScores,
    entity_count: usize,
    known: &HashSet<Triple>,
    n: usize,
    rng: &mut impl Rng,
) -> TaskNegatives {
    let eligible =
        |e: EntityId| e != task.truth && !known.contains(&task.corrupted(e));

    // Bucket the type-scored candidates. Map iteration order is arbitrary, so
    // buckets are sorted by id before sampling to keep runs reproducible.
    let mut high = Vec::new();
    let mut mid = Vec::new();
    let mut low = Vec::new();
    if let Some(slot) = type_scores.slot(task.relation, task.direction.missing()) {
        for (&e, &score) in slot.scores.iter() {
            if !eligible(e) {
                continue;
            }
            if score >= HIGH_CONFIDENCE {
                high.push(e);
            } else if score >= MID_CONFIDENCE {
                mid.push(e);
            } else {
                low.push(e);
            }
        }
    }

    let mut entities = Vec::with_capacity(n);
    let mut provenance = Vec::with_capacity(n);
    for (mut bucket, tag) in [
        (high, Provenance::BucketHigh),
        (mid, Provenance::BucketMid),
        (low, Provenance::BucketLow),
    ] {
        let want = n - entities.len();
        if want == 0 {
            break;
        }
        bucket.sort_unstable();
        for idx in rand::seq::index::sample(rng, bucket.len(), want.min(bucket.len())) {
            entities.push(bucket[idx]);
            provenance.push(tag);
        }
    }

    if entities.len() < n {
        // Random fill: any true negative will do, type-valid or not.
        let picked: HashSet<EntityId> = entities.iter().copied().collect();
        let pool: Vec<EntityId> = (0..entity_count as u32)
            .map(EntityId)
            .filter(|&e| !picked.contains(&e) && eligible(e))
            .collect();
        let want = n - entities.len();
        for idx in rand::seq::index::sample(rng, pool.len(), want.min(pool.len())) {
            entities.push(pool[idx]);
            provenance.push(Provenance::RandomFill);
        }
    }

    TaskNegatives {
        entities,
        provenance,
    }
}

/// Negatives for both tasks of one test triple.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TripleNegatives {
    pub triple: Triple,
    pub tail: TaskNegatives,
    pub head: TaskNegatives,
}

/// Type-matched negatives for every test triple of a dataset.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NegativeSet {
    pub requested: usize,
    pub entries: Vec<TripleNegatives>,
}

impl NegativeSet {
    /// Tasks that could not be filled to the requested size.
    pub fn undersized_tasks(&self) -> usize {
        self.entries
            .iter()
            .flat_map(|e| [&e.tail, &e.head])
            .filter(|t| t.len() < self.requested)
            .count()
    }

    /// Totals per provenance class: [high, mid, low, random fill].
    pub fn provenance_counts(&self) -> [usize; 4] {
        let mut counts = [0usize; 4];
        for t in self.entries.iter().flat_map(|e| [&e.tail, &e.head]) {
            for p in &t.provenance {
                let i = match p {
                    Provenance::BucketHigh => 0,
                    Provenance::BucketMid => 1,
                    Provenance::BucketLow => 2,
                    Provenance::RandomFill => 3,
                };
                counts[i] += 1;
            }
        }
        counts
    }
}

/// Generates type-matched negatives for every test triple. Each task draws
/// from its own seed stream, so output is deterministic in `seed` and
/// independent of thread count.
pub fn generate_tmn_set(
    dataset: &InductiveDataset,
    type_scores: &TypeScores,
    n: usize,
    seed: u64,
) -> NegativeSet {
    let tasks = completion_tasks(&dataset.test.test);
    let known = dataset.test.known();
    let entity_count = dataset.test.graph.entity_count();
    let per_task: Vec<TaskNegatives> = tasks
        .par_iter()
        .enumerate()
        .map(|(i, task)| {
            let mut rng = seeding::rng_for(seed, &[stream::TYPE_MATCHED, i as u64]);
            gen_tmn(task, type_scores, entity_count, known, n, &mut rng)
        })
        .collect();

    let mut per_task = per_task.into_iter();
    let entries = dataset
        .test
        .test
        .iter()
        .map(|&triple| {
            let tail = per_task.next().expect("two tasks per triple");
            let head = per_task.next().expect("two tasks per triple");
            TripleNegatives { triple, tail, head }
        })
        .collect();
    NegativeSet {
        requested: n,
        entries,
    }
}

#[derive(Serialize, Deserialize)]
struct NegativesLine {
    triple: (String, String, String),
    head_negatives: Vec<String>,
    tail_negatives: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<ProvenanceLine>,
}

#[derive(Serialize, Deserialize)]
struct ProvenanceLine {
    head: Vec<Provenance>,
    tail: Vec<Provenance>,
}

/// Writes a negative set as JSONL: one object per test triple with entity
/// names and per-negative provenance, preceded by a `{"run_config": ...}`
/// header when a config is given.
pub fn write_negatives(
    path: &Path,
    set: &NegativeSet,
    dataset: &InductiveDataset,
    run_config: Option<&serde_json::Value>,
) -> Result<()> {
    let graph = &dataset.test.graph;
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    if let Some(cfg) = run_config {
        writeln!(w, "{}", serde_json::json!({ "run_config": cfg }))?;
    }
    let names = |ids: &[EntityId]| -> Vec<String> {
        ids.iter().map(|&e| graph.entity_name(e).to_string()).collect()
    };
    for entry in &set.entries {
        let (s, p, o) = graph.name_triple(&entry.triple);
        let line = NegativesLine {
            triple: (s.to_string(), p.to_string(), o.to_string()),
            head_negatives: names(&entry.head.entities),
            tail_negatives: names(&entry.tail.entities),
            provenance: Some(ProvenanceLine {
                head: entry.head.provenance.clone(),
                tail: entry.tail.provenance.clone(),
            }),
        };
        writeln!(w, "{}", serde_json::to_string(&line)?)?;
    }
    w.flush()?;
    Ok(())
}

/// A negatives file resolved against a dataset, aligned to completion-task
/// order (tail, then head, per test triple).
#[derive(Debug, Clone)]
pub struct LoadedNegatives {
    pub per_task: Vec<Vec<EntityId>>,
    /// Present only for files that carry provenance (ours do; third-party
    /// files may not).
    pub provenance: Vec<Option<Vec<Provenance>>>,
    /// Requested set size: taken from the embedded run config when present,
    /// otherwise the largest observed set.
    pub requested: usize,
    /// SHA-256 of the file bytes, for tagging reports.
    pub sha256: String,
}

impl LoadedNegatives {
    pub fn undersized_tasks(&self) -> usize {
        self.per_task
            .iter()
            .filter(|t| t.len() < self.requested)
            .count()
    }
}

/// Reads a negatives JSONL file and aligns it with `dataset`'s test triples.
///
/// The file must contain exactly one entry per test triple (any order);
/// entity names must resolve in the test graph and no set may repeat an
/// entity. Provenance and the run-config header are optional so that files
/// produced elsewhere can be evaluated too.
pub fn read_negatives(path: &Path, dataset: &InductiveDataset) -> Result<LoadedNegatives> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let sha256 = hex(Sha256::digest(&bytes).as_slice());
    let graph = &dataset.test.graph;

    let mut requested_hint = None;
    let mut by_triple: HashMap<Triple, NegativesLine> = HashMap::new();
    for (lineno, line) in BufReader::new(&bytes[..]).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let loc = || format!("{}:{}", path.display(), lineno + 1);
        if lineno == 0 {
            let v: serde_json::Value = serde_json::from_str(&line).with_context(loc)?;
            if let Some(cfg) = v.get("run_config") {
                if v.get("triple").is_none() {
                    requested_hint = cfg
                        .get("num_negatives")
                        .or_else(|| cfg.pointer("/args/num_negatives"))
                        .and_then(|n| n.as_u64())
                        .map(|n| n as usize);
                    continue;
                }
            }
        }
        let parsed: NegativesLine = serde_json::from_str(&line).with_context(loc)?;
        let (s, p, o) = parsed.triple.clone();
        let triple = graph
            .triple_from_names(&s, &p, &o)
            .ok_or_else(|| anyhow::anyhow!("{}: triple ({s}, {p}, {o}) not in the test graph", loc()))?;
        if let Some(prov) = &parsed.provenance {
            if prov.head.len() != parsed.head_negatives.len()
                || prov.tail.len() != parsed.tail_negatives.len()
            {
                bail!("{}: provenance length does not match negatives", loc());
            }
        }
        if by_triple.insert(triple, parsed).is_some() {
            bail!("{}: duplicate entry for ({s}, {p}, {o})", loc());
        }
    }

    let mut per_task = Vec::with_capacity(dataset.test.test.len() * 2);
    let mut provenance = Vec::with_capacity(dataset.test.test.len() * 2);
    for triple in &dataset.test.test {
        let (s, p, o) = graph.name_triple(triple);
        let entry = by_triple.remove(triple).ok_or_else(|| {
            anyhow::anyhow!("{}: no negatives for test triple ({s}, {p}, {o})", path.display())
        })?;
        for (names, prov) in [
            (&entry.tail_negatives, entry.provenance.as_ref().map(|p| p.tail.clone())),
            (&entry.head_negatives, entry.provenance.as_ref().map(|p| p.head.clone())),
        ] {
            let mut ids = Vec::with_capacity(names.len());
            let mut seen = HashSet::with_capacity(names.len());
            for name in names {
                let id = graph.entity_id(name).ok_or_else(|| {
                    anyhow::anyhow!("{}: unknown entity {name:?}", path.display())
                })?;
                if !seen.insert(id) {
                    bail!("{}: duplicate negative {name:?} for ({s}, {p}, {o})", path.display());
                }
                ids.push(id);
            }
            per_task.push(ids);
            provenance.push(prov);
        }
    }
    if !by_triple.is_empty() {
        bail!(
            "{}: {} entries do not correspond to any test triple",
            path.display(),
            by_triple.len()
        );
    }

    let requested = requested_hint
        .or_else(|| per_task.iter().map(Vec::len).max())
        .unwrap_or(0);
    Ok(LoadedNegatives {
        per_task,
        provenance,
        requested,
        sha256,
    })
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
