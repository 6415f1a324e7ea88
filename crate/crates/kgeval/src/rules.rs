//! Type rules: learning, serialization, and application.
//!
//! A type rule `h(..X..) <- b(..X..)` pairs one slot of a head relation with
//! one slot of a body relation through a shared variable. Its confidence is
//! measured on a training graph as
//!
//! ```text
//! conf = |entities(h, head slot)  ∩  entities(b, body slot)|
//!        ---------------------------------------------------
//!                    |entities(b, body slot)|
//! ```
//!
//! over *distinct* entities. Applying rules against another graph (typically
//! the inference split of the test graph) scores every entity occupying the
//! body slot there as a candidate for the head slot; when several rules
//! propose the same entity, the highest confidence wins.

use std::collections::hash_map::Entry;
use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::kg::{EntityId, KnowledgeGraph, Position, RelationId};

/// The four slot pairings. The first letter is the head slot the shared
/// variable occupies, the second the body slot: `SO` reads h(X, A) <- b(B, X).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RuleTemplate {
    SS,
    SO,
    OS,
    OO,
}

impl RuleTemplate {
    pub const ALL: [RuleTemplate; 4] = [
        RuleTemplate::SS,
        RuleTemplate::SO,
        RuleTemplate::OS,
        RuleTemplate::OO,
    ];

    /// Slot of the head relation the shared variable occupies.
    pub fn head_position(self) -> Position {
        match self {
            RuleTemplate::SS | RuleTemplate::SO => Position::Subject,
            RuleTemplate::OS | RuleTemplate::OO => Position::Object,
        }
    }

    /// Slot of the body relation the shared variable occupies.
    pub fn body_position(self) -> Position {
        match self {
            RuleTemplate::SS | RuleTemplate::OS => Position::Subject,
            RuleTemplate::SO | RuleTemplate::OO => Position::Object,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            RuleTemplate::SS => "SS",
            RuleTemplate::SO => "SO",
            RuleTemplate::OS => "OS",
            RuleTemplate::OO => "OO",
        }
    }

    pub fn from_code(s: &str) -> Result<Self> {
        Ok(match s {
            "SS" => RuleTemplate::SS,
            "SO" => RuleTemplate::SO,
            "OS" => RuleTemplate::OS,
            "OO" => RuleTemplate::OO,
            other => bail!("unknown rule template {other:?}"),
        })
    }
}

impl fmt::Display for RuleTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One learned rule. Relations are stored by name because rules are learned
/// on one graph and applied to another with its own interning; `numerator`
/// and `denominator` are the distinct-entity overlap and body-set size the
/// confidence came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeRule {
    pub head: String,
    pub body: String,
    pub template: RuleTemplate,
    pub confidence: f64,
    pub numerator: u32,
    pub denominator: u32,
}

impl fmt::Display for TypeRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (h, b) = match self.template {
            RuleTemplate::SS => ("(X, A)", "(X, B)"),
            RuleTemplate::SO => ("(X, A)", "(B, X)"),
            RuleTemplate::OS => ("(A, X)", "(X, B)"),
            RuleTemplate::OO => ("(A, X)", "(B, X)"),
        };
        write!(
            f,
            "{}{} <- {}{} [{} = {}/{}]",
            self.head, h, self.body, b, self.confidence, self.numerator, self.denominator
        )
    }
}

/// Filters applied while learning. Rules with a distinct-entity overlap below
/// `min_support` or confidence below `min_confidence` are dropped.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LearnOptions {
    pub min_support: u32,
    pub min_confidence: f64,
}

impl Default for LearnOptions {
    fn default() -> Self {
        LearnOptions {
            min_support: 1,
            min_confidence: 0.0,
        }
    }
}

/// Learns every type rule over `graph` (all head/body relation pairs with
/// head ≠ body, all four templates) and returns the survivors sorted by
/// (head, body, template code) so output is stable across runs and thread
/// counts.
pub fn learn_rules(graph: &KnowledgeGraph, opts: LearnOptions) -> Vec<TypeRule> {
    let relations: Vec<RelationId> = (0..graph.relation_count() as u32).map(RelationId).collect();
    let mut rules: Vec<TypeRule> = relations
        .par_iter()
        .flat_map_iter(|&head| {
            let mut out = Vec::new();
            for &body in &relations {
                if head == body {
                    continue;
                }
                for template in RuleTemplate::ALL {
                    let head_set = graph.entities_in(head, template.head_position());
                    let body_set = graph.entities_in(body, template.body_position());
                    if body_set.is_empty() {
                        continue;
                    }
                    let numerator = head_set.intersection(body_set).count() as u32;
                    let denominator = body_set.len() as u32;
                    let confidence = f64::from(numerator) / f64::from(denominator);
                    if numerator >= opts.min_support && confidence >= opts.min_confidence {
                        out.push(TypeRule {
                            head: graph.relation_name(head).to_string(),
                            body: graph.relation_name(body).to_string(),
                            template,
                            confidence,
                            numerator,
                            denominator,
                        });
                    }
                }
            }
            out
        })
        .collect();
    rules.sort_unstable_by(|a, b| {
        (a.head.as_str(), a.body.as_str(), a.template.code())
            .cmp(&(b.head.as_str(), b.body.as_str(), b.template.code()))
    });
    rules
}

/// Best-confidence score per entity for one (relation, position) slot.
#[derive(Debug, Clone, Default)]
pub struct SlotScores {
    /// Entity -> max confidence over rules proposing it.
    pub scores: Arc<HashMap<EntityId, f64>>,
    /// Entity -> index (into the rule list) of the first rule reaching that
    /// max, for explaining scores.
    pub best_rule: Arc<HashMap<EntityId, usize>>,
}

/// Scores for every (relation, position) slot at least one rule fires on.
#[derive(Debug, Clone, Default)]
pub struct TypeScores {
    slots: HashMap<(RelationId, Position), SlotScores>,
}

impl TypeScores {
    pub fn slot(&self, relation: RelationId, pos: Position) -> Option<&SlotScores> {
        self.slots.get(&(relation, pos))
    }

    /// Score of one entity for a slot; 0 when no rule proposes it.
    pub fn score(&self, relation: RelationId, pos: Position, entity: EntityId) -> f64 {
        self.slot(relation, pos)
            .and_then(|s| s.scores.get(&entity).copied())
            .unwrap_or(0.0)
    }

    /// Index of the rule behind an entity's score, if any rule proposed it.
    pub fn best_rule(&self, relation: RelationId, pos: Position, entity: EntityId) -> Option<usize> {
        self.slot(relation, pos)
            .and_then(|s| s.best_rule.get(&entity).copied())
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }
}

/// Applies `rules` against `graph`: for each rule, every entity in the body
/// slot's entity set is proposed for the head slot at the rule's confidence;
/// an entity proposed by several rules keeps the maximum (ties keep the
/// earliest rule). Rules whose head or body relation is not interned in
/// `graph` are skipped.
pub fn apply_rules(rules: &[TypeRule], graph: &KnowledgeGraph) -> TypeScores {
    type SlotAccum = (HashMap<EntityId, f64>, HashMap<EntityId, usize>);
    let mut slots: HashMap<(RelationId, Position), SlotAccum> = HashMap::new();
    for (i, rule) in rules.iter().enumerate() {
        let (Some(head), Some(body)) = (graph.relation_id(&rule.head), graph.relation_id(&rule.body))
        else {
            continue;
        };
        let proposals = graph.entities_in(body, rule.template.body_position());
        if proposals.is_empty() {
            continue;
        }
        let (scores, best) = slots
            .entry((head, rule.template.head_position()))
            .or_default();
        for &e in proposals {
            match scores.entry(e) {
                Entry::Vacant(v) => {
                    v.insert(rule.confidence);
                    best.insert(e, i);
                }
                Entry::Occupied(mut o) => {
                    if rule.confidence > *o.get() {
                        o.insert(rule.confidence);
                        best.insert(e, i);
                    }
                }
            }
        }
    }
    TypeScores {
        slots: slots
            .into_iter()
            .map(|(k, (scores, best))| {
                (
                    k,
                    SlotScores {
                        scores: Arc::new(scores),
                        best_rule: Arc::new(best),
                    },
                )
            })
            .collect(),
    }
}

/// Writes rules as TSV: head, template, body, confidence, numerator,
/// denominator. `f64` confidences print in shortest-round-trip form, so a
/// read-back is bit-identical. `run_config`, when given, is embedded as a
/// leading `# run_config=...` comment.
pub fn write_rules(path: &Path, rules: &[TypeRule], run_config: Option<&serde_json::Value>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    if let Some(cfg) = run_config {
        writeln!(w, "# run_config={cfg}")?;
    }
    for r in rules {
        for name in [&r.head, &r.body] {
            if name.contains('\t') || name.contains('\n') {
                bail!("relation name {name:?} contains a tab or newline and cannot be written as TSV");
            }
        }
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.head, r.template, r.body, r.confidence, r.numerator, r.denominator
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Reads rules back from TSV, skipping `#` comments and empty lines.
pub fn read_rules(path: &Path) -> Result<Vec<TypeRule>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.with_context(|| format!("reading {}", path.display()))?;
        let line = line.strip_suffix('\r').unwrap_or(&line);
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = || format!("{}:{}", path.display(), lineno + 1);
        let fields: Vec<&str> = line.split('\t').collect();
        let [head, template, body, confidence, numerator, denominator] = fields[..] else {
            bail!("{}: expected 6 tab-separated fields", loc());
        };
        out.push(TypeRule {
            head: head.to_string(),
            body: body.to_string(),
            template: RuleTemplate::from_code(template).with_context(loc)?,
            confidence: confidence
                .parse()
                .with_context(|| format!("{}: bad confidence {confidence:?}", loc()))?,
            numerator: numerator
                .parse()
                .with_context(|| format!("{}: bad numerator {numerator:?}", loc()))?,
            denominator: denominator
                .parse()
                .with_context(|| format!("{}: bad denominator {denominator:?}", loc()))?,
        });
    }
    Ok(out)
}
