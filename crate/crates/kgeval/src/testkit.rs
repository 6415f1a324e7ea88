//! Shared fixtures for unit tests.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use tempfile::TempDir;

use crate::kg::{load_dataset, DatasetLayout, InductiveDataset, KnowledgeGraph};

/// Small geography graph: three capitals, a containment hierarchy, two
/// currencies. Dense enough that every rule template fires somewhere.
pub const TOY_TRIPLES: [(&str, &str, &str); 14] = [
    ("paris", "capital", "france"),
    ("washington-d.c.", "capital", "usa"),
    ("amsterdam", "capital", "netherlands"),
    ("paris", "locatedIn", "ile-de-france"),
    ("ile-de-france", "locatedIn", "france"),
    ("amsterdam", "locatedIn", "noord-holland"),
    ("noord-holland", "locatedIn", "netherlands"),
    ("chicago", "locatedIn", "illinois"),
    ("illinois", "locatedIn", "usa"),
    ("washington-d.c.", "locatedIn", "district-of-columbia"),
    ("district-of-columbia", "locatedIn", "usa"),
    ("netherlands", "currency", "euro"),
    ("france", "currency", "euro"),
    ("usa", "currency", "dollar"),
];

pub fn toy_graph() -> KnowledgeGraph {
    KnowledgeGraph::from_named_triples(TOY_TRIPLES)
}

pub fn write_tsv(path: &Path, triples: &[(&str, &str, &str)]) {
    let mut f = File::create(path).unwrap();
    for (s, p, o) in triples {
        writeln!(f, "{s}\t{p}\t{o}").unwrap();
    }
}

/// An inductive dataset built from the toy graph: the train side is the toy
/// graph itself, the test side is an isomorphic copy with every entity name
/// suffixed `-2` (so the sides are entity-disjoint). The test side's currency
/// triples are held out as valid/test targets; everything else is inference.
pub fn toy_dataset() -> (TempDir, InductiveDataset) {
    let dir = tempfile::tempdir().unwrap();
    let ds = toy_dataset_in(dir.path());
    (dir, ds)
}

pub fn toy_dataset_in(dir: &Path) -> InductiveDataset {
    let train: Vec<(String, String, String)> = TOY_TRIPLES
        .iter()
        .map(|(s, p, o)| (s.to_string(), p.to_string(), o.to_string()))
        .collect();
    let renamed: Vec<(String, String, String)> = TOY_TRIPLES
        .iter()
        .map(|(s, p, o)| (format!("{s}-2"), p.to_string(), format!("{o}-2")))
        .collect();

    let (currency, rest): (Vec<_>, Vec<_>) =
        renamed.into_iter().partition(|(_, p, _)| p == "currency");
    // currency has 3 triples: 1 to valid, 2 to test
    let valid_ind = &currency[..1];
    let test_ind = &currency[1..];

    type Named = Vec<(String, String, String)>;
    let files: [(&str, Named); 6] = [
        ("train.txt", train),
        ("valid.txt", vec![]),
        ("test.txt", vec![]),
        ("train_ind.txt", rest),
        ("valid_ind.txt", valid_ind.to_vec()),
        ("test_ind.txt", test_ind.to_vec()),
    ];
    for (name, triples) in &files {
        let rows: Vec<(&str, &str, &str)> = triples
            .iter()
            .map(|(s, p, o)| (s.as_str(), p.as_str(), o.as_str()))
            .collect();
        write_tsv(&dir.join(name), &rows);
    }
    load_dataset(dir, "toy-geo", &DatasetLayout::default()).unwrap()
}
