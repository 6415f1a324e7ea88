//! Knowledge graphs, inductive dataset loading, and completion tasks.
//!
//! A dataset directory holds six TSV files (`s<TAB>p<TAB>o` per line): three
//! splits forming the train graph and three forming the test graph. The two
//! graphs share their relation vocabulary but are expected to be
//! entity-disjoint; the test graph's first split is the inference graph whose
//! triples are visible to models as features, while its valid/test triples
//! are the prediction targets.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;

/// Interned entity. Ids are dense and local to one [`KnowledgeGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EntityId(pub u32);

/// Interned relation. Ids are dense and local to one [`KnowledgeGraph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RelationId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Subject or object slot of a triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Position {
    Subject,
    Object,
}

impl Position {
    pub fn flip(self) -> Position {
        match self {
            Position::Subject => Position::Object,
            Position::Object => Position::Subject,
        }
    }
}

/// Which entity a completion task asks for: `Tail` is p(s, ?), `Head` is
/// p(?, o).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Tail,
    Head,
}

impl Direction {
    /// Slot being predicted.
    pub fn missing(self) -> Position {
        match self {
            Direction::Tail => Position::Object,
            Direction::Head => Position::Subject,
        }
    }

    /// Slot the anchor entity occupies.
    pub fn anchored(self) -> Position {
        self.missing().flip()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub subject: EntityId,
    pub relation: RelationId,
    pub object: EntityId,
}

impl Triple {
    pub fn entity_at(&self, pos: Position) -> EntityId {
        match pos {
            Position::Subject => self.subject,
            Position::Object => self.object,
        }
    }
}

/// Name interner: dense u32 ids in first-seen order.
#[derive(Debug, Clone, Default)]
pub struct SymbolTable {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl SymbolTable {
    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = u32::try_from(self.names.len()).expect("symbol table overflow");
        self.names.push(name.to_string());
        self.ids.insert(name.to_string(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

static NO_ENTITIES: BTreeSet<EntityId> = BTreeSet::new();

/// Per-relation subject/object entity sets plus whole-graph membership.
#[derive(Debug, Clone, Default)]
pub struct RelationIndex {
    subjects: Vec<BTreeSet<EntityId>>,
    objects: Vec<BTreeSet<EntityId>>,
    membership: HashSet<Triple>,
}

impl RelationIndex {
    fn build(relation_count: usize, triples: &[Triple]) -> Self {
        let mut subjects = vec![BTreeSet::new(); relation_count];
        let mut objects = vec![BTreeSet::new(); relation_count];
        let mut membership = HashSet::with_capacity(triples.len());
        for &t in triples {
            subjects[t.relation.index()].insert(t.subject);
            objects[t.relation.index()].insert(t.object);
            membership.insert(t);
        }
        RelationIndex {
            subjects,
            objects,
            membership,
        }
    }

    /// Distinct entities appearing in `pos` of `relation`'s triples.
    pub fn entities(&self, relation: RelationId, pos: Position) -> &BTreeSet<EntityId> {
        let side = match pos {
            Position::Subject => &self.subjects,
            Position::Object => &self.objects,
        };
        side.get(relation.index()).unwrap_or(&NO_ENTITIES)
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.membership.contains(t)
    }
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: SymbolTable,
    relations: SymbolTable,
    triples: Vec<Triple>,
    index: RelationIndex,
    duplicate_count: usize,
}

#[derive(Default)]
struct GraphBuilder {
    entities: SymbolTable,
    relations: SymbolTable,
    triples: Vec<Triple>,
    seen: HashSet<Triple>,
    duplicates: usize,
}

impl GraphBuilder {
    fn add(&mut self, s: &str, p: &str, o: &str) -> Triple {
        let t = Triple {
            subject: EntityId(self.entities.intern(s)),
            relation: RelationId(self.relations.intern(p)),
            object: EntityId(self.entities.intern(o)),
        };
        if self.seen.insert(t) {
            self.triples.push(t);
        } else {
            self.duplicates += 1;
        }
        t
    }

    /// Parses one TSV file. Returns its triples in file order with exact
    /// within-file duplicates dropped; empty lines are skipped.
    fn add_file(&mut self, path: &Path) -> Result<Vec<Triple>> {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        let mut out = Vec::new();
        let mut in_file = HashSet::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.with_context(|| format!("reading {}", path.display()))?;
            let line = line.strip_suffix('\r').unwrap_or(&line);
            if line.is_empty() {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(s), Some(p), Some(o), None) =
                (fields.next(), fields.next(), fields.next(), fields.next())
            else {
                bail!(
                    "{}:{}: expected 3 tab-separated fields",
                    path.display(),
                    lineno + 1
                );
            };
            let t = self.add(s, p, o);
            if in_file.insert(t) {
                out.push(t);
            }
        }
        Ok(out)
    }

    fn finish(self) -> KnowledgeGraph {
        let index = RelationIndex::build(self.relations.len(), &self.triples);
        KnowledgeGraph {
            entities: self.entities,
            relations: self.relations,
            triples: self.triples,
            index,
            duplicate_count: self.duplicates,
        }
    }
}

impl KnowledgeGraph {
    /// Loads one graph from TSV files, interning entities and relations in
    /// first-seen order across all files. Exact duplicate triples are dropped
    /// and counted.
    pub fn load<P: AsRef<Path>>(paths: &[P]) -> Result<Self> {
        if paths.is_empty() {
            bail!("no input files given");
        }
        let mut b = GraphBuilder::default();
        for p in paths {
            b.add_file(p.as_ref())?;
        }
        Ok(b.finish())
    }

    /// Builds a graph from in-memory (subject, relation, object) names.
    pub fn from_named_triples<'a, I>(triples: I) -> Self
    where
        I: IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    {
        let mut b = GraphBuilder::default();
        for (s, p, o) in triples {
            b.add(s, p, o);
        }
        b.finish()
    }

    /// A view of this graph limited to `subset`, sharing the same interned
    /// ids. The index and membership cover only the subset, so rule
    /// statistics or body matches computed on the result see nothing else.
    pub fn restricted(&self, subset: &[Triple]) -> KnowledgeGraph {
        let mut seen = HashSet::with_capacity(subset.len());
        let mut triples = Vec::with_capacity(subset.len());
        let mut duplicates = 0;
        for &t in subset {
            if seen.insert(t) {
                triples.push(t);
            } else {
                duplicates += 1;
            }
        }
        let index = RelationIndex::build(self.relations.len(), &triples);
        KnowledgeGraph {
            entities: self.entities.clone(),
            relations: self.relations.clone(),
            triples,
            index,
            duplicate_count: duplicates,
        }
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relations.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn duplicate_count(&self) -> usize {
        self.duplicate_count
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relations.get(name).map(RelationId)
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entities.name(id.0)
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        self.relations.name(id.0)
    }

    pub fn entity_names(&self) -> &[String] {
        self.entities.names()
    }

    pub fn relation_names(&self) -> &[String] {
        self.relations.names()
    }

    /// Every interned entity id, in id order.
    pub fn all_entities(&self) -> impl Iterator<Item = EntityId> {
        (0..self.entities.len() as u32).map(EntityId)
    }

    pub fn contains(&self, t: &Triple) -> bool {
        self.index.contains(t)
    }

    /// Membership set over this graph's triples.
    pub fn membership(&self) -> &HashSet<Triple> {
        &self.index.membership
    }

    /// Distinct entities in `pos` of `relation`'s triples.
    pub fn entities_in(&self, relation: RelationId, pos: Position) -> &BTreeSet<EntityId> {
        self.index.entities(relation, pos)
    }

    /// Resolves names to an id triple, if all three are interned here.
    pub fn triple_from_names(&self, s: &str, p: &str, o: &str) -> Option<Triple> {
        Some(Triple {
            subject: self.entity_id(s)?,
            relation: self.relation_id(p)?,
            object: self.entity_id(o)?,
        })
    }

    /// Names of a triple's components.
    pub fn name_triple(&self, t: &Triple) -> (&str, &str, &str) {
        (
            self.entity_name(t.subject),
            self.relation_name(t.relation),
            self.entity_name(t.object),
        )
    }
}

/// File names of the six split files inside a dataset directory, in the
/// order train, valid, test, inference, inference-valid, inference-test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DatasetLayout {
    pub train: String,
    pub valid: String,
    pub test: String,
    pub inference: String,
    pub inference_valid: String,
    pub inference_test: String,
}

impl Default for DatasetLayout {
    fn default() -> Self {
        DatasetLayout {
            train: "train.txt".into(),
            valid: "valid.txt".into(),
            test: "test.txt".into(),
            inference: "train_ind.txt".into(),
            inference_valid: "valid_ind.txt".into(),
            inference_test: "test_ind.txt".into(),
        }
    }
}

impl DatasetLayout {
    /// Parses the comma-separated form used by the CLI: six file names in
    /// the order train,valid,test,inference,inference-valid,inference-test.
    pub fn parse(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 6 || parts.iter().any(|p| p.is_empty()) {
            bail!("layout must be 6 comma-separated file names, got {s:?}");
        }
        Ok(DatasetLayout {
            train: parts[0].into(),
            valid: parts[1].into(),
            test: parts[2].into(),
            inference: parts[3].into(),
            inference_valid: parts[4].into(),
            inference_test: parts[5].into(),
        })
    }
}

/// Transductive side of a dataset: the graph rules are learned from.
#[derive(Debug, Clone)]
pub struct TrainGraph {
    /// Union of the three splits.
    pub graph: KnowledgeGraph,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

impl TrainGraph {
    /// Graph restricted to the train split; rule statistics count here.
    pub fn rule_graph(&self) -> KnowledgeGraph {
        self.graph.restricted(&self.train)
    }
}

/// Inductive side of a dataset: new entities, shared relation vocabulary.
#[derive(Debug, Clone)]
pub struct TestGraph {
    /// Union of inference, valid and test splits.
    pub graph: KnowledgeGraph,
    pub inference: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

impl TestGraph {
    /// Graph restricted to the inference split; rule bodies match here.
    pub fn inference_graph(&self) -> KnowledgeGraph {
        self.graph.restricted(&self.inference)
    }

    /// Every triple known on the test side. This set is both the filter
    /// applied when ranking and the true-negative check when sampling.
    pub fn known(&self) -> &HashSet<Triple> {
        self.graph.membership()
    }
}

#[derive(Debug, Clone)]
pub struct InductiveDataset {
    pub name: String,
    pub train: TrainGraph,
    pub test: TestGraph,
    /// Sanity-check findings from loading; never fatal.
    pub warnings: Vec<String>,
}

fn overlap(a: &[Triple], b: &[Triple]) -> usize {
    let set: HashSet<&Triple> = a.iter().collect();
    b.iter().filter(|t| set.contains(t)).count()
}

fn split_overlap_warnings(side: &str, splits: &[(&str, &[Triple])], out: &mut Vec<String>) {
    for (i, (name_a, a)) in splits.iter().enumerate() {
        for (name_b, b) in &splits[i + 1..] {
            let n = overlap(a, b);
            if n > 0 {
                out.push(format!(
                    "{side} side: {n} triples appear in both {name_a} and {name_b} splits"
                ));
            }
        }
    }
}

/// Loads an inductive dataset from `dir` using `layout`'s file names.
///
/// Consistency problems (shared entities across sides, split overlaps,
/// relations unseen at train time, duplicate lines) are reported as warnings
/// on the returned dataset and logged, not treated as errors: several
/// published benchmark splits ship with small amounts of each.
pub fn load_dataset(
    dir: impl AsRef<Path>,
    name: impl Into<String>,
    layout: &DatasetLayout,
) -> Result<InductiveDataset> {
    let dir = dir.as_ref();
    let path = |f: &String| dir.join(f);

    let mut tb = GraphBuilder::default();
    let train = tb.add_file(&path(&layout.train))?;
    let valid = tb.add_file(&path(&layout.valid))?;
    let test = tb.add_file(&path(&layout.test))?;
    let train_side = TrainGraph {
        graph: tb.finish(),
        train,
        valid,
        test,
    };

    let mut ib = GraphBuilder::default();
    let inference = ib.add_file(&path(&layout.inference))?;
    let ivalid = ib.add_file(&path(&layout.inference_valid))?;
    let itest = ib.add_file(&path(&layout.inference_test))?;
    let test_side = TestGraph {
        graph: ib.finish(),
        inference,
        valid: ivalid,
        test: itest,
    };

    let mut warnings = Vec::new();

    let shared_entities = train_side
        .graph
        .entity_names()
        .iter()
        .filter(|n| test_side.graph.entity_id(n).is_some())
        .count();
    if shared_entities > 0 {
        warnings.push(format!(
            "train and test graphs share {shared_entities} entities; inductive splits should be entity-disjoint"
        ));
    }

    let unseen: Vec<&String> = test_side
        .graph
        .relation_names()
        .iter()
        .filter(|n| train_side.graph.relation_id(n).is_none())
        .collect();
    if !unseen.is_empty() {
        let mut sample: Vec<&str> = unseen.iter().take(5).map(|s| s.as_str()).collect();
        if unseen.len() > sample.len() {
            sample.push("...");
        }
        warnings.push(format!(
            "{} test-graph relations never appear in the train graph: {}",
            unseen.len(),
            sample.join(", ")
        ));
    }

    split_overlap_warnings(
        "train",
        &[
            ("train", &train_side.train),
            ("valid", &train_side.valid),
            ("test", &train_side.test),
        ],
        &mut warnings,
    );
    split_overlap_warnings(
        "test",
        &[
            ("inference", &test_side.inference),
            ("valid", &test_side.valid),
            ("test", &test_side.test),
        ],
        &mut warnings,
    );

    for (side, graph) in [("train", &train_side.graph), ("test", &test_side.graph)] {
        if graph.duplicate_count() > 0 {
            warnings.push(format!(
                "{side} graph: {} duplicate triples dropped",
                graph.duplicate_count()
            ));
        }
    }

    let name = name.into();
    for w in &warnings {
        log::warn!("{name}: {w}");
    }

    Ok(InductiveDataset {
        name,
        train: train_side,
        test: test_side,
        warnings,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct SplitCount {
    pub split: String,
    pub triples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct SideStats {
    pub entities: usize,
    pub relations: usize,
    pub splits: Vec<SplitCount>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetStats {
    pub dataset: String,
    pub train: SideStats,
    pub test: SideStats,
    pub warnings: Vec<String>,
}

impl InductiveDataset {
    pub fn stats(&self) -> DatasetStats {
        let count = |split: &str, triples: &[Triple]| SplitCount {
            split: split.to_string(),
            triples: triples.len(),
        };
        DatasetStats {
            dataset: self.name.clone(),
            train: SideStats {
                entities: self.train.graph.entity_count(),
                relations: self.train.graph.relation_count(),
                splits: vec![
                    count("train", &self.train.train),
                    count("valid", &self.train.valid),
                    count("test", &self.train.test),
                ],
            },
            test: SideStats {
                entities: self.test.graph.entity_count(),
                relations: self.test.graph.relation_count(),
                splits: vec![
                    count("inference", &self.test.inference),
                    count("valid", &self.test.valid),
                    count("test", &self.test.test),
                ],
            },
            warnings: self.warnings.clone(),
        }
    }
}

/// One ranking query: predict the entity missing from one side of a test
/// triple. Tail tasks ask p(anchor, ?), head tasks p(?, anchor).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompletionTask {
    pub direction: Direction,
    pub relation: RelationId,
    pub anchor: EntityId,
    pub truth: EntityId,
}

impl CompletionTask {
    /// The triple obtained by filling the missing slot with `candidate`.
    pub fn corrupted(&self, candidate: EntityId) -> Triple {
        match self.direction {
            Direction::Tail => Triple {
                subject: self.anchor,
                relation: self.relation,
                object: candidate,
            },
            Direction::Head => Triple {
                subject: candidate,
                relation: self.relation,
                object: self.anchor,
            },
        }
    }

    /// The uncorrupted triple.
    pub fn original(&self) -> Triple {
        self.corrupted(self.truth)
    }
}

/// Expands triples into ranking queries: for each triple (s, p, o) in order,
/// the tail task p(s, ?) with truth o, then the head task p(?, o) with truth
/// s. Always exactly 2·|triples| tasks, in this order.
pub fn completion_tasks(triples: &[Triple]) -> Vec<CompletionTask> {
    let mut out = Vec::with_capacity(triples.len() * 2);
    for t in triples {
        out.push(CompletionTask {
            direction: Direction::Tail,
            relation: t.relation,
            anchor: t.subject,
            truth: t.object,
        });
        out.push(CompletionTask {
            direction: Direction::Head,
            relation: t.relation,
            anchor: t.object,
            truth: t.subject,
        });
    }
    out
}
