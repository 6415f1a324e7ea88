//! Report plumbing: run-config embedding, report files, model comparison
//! tables, and text rendering.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::{json, Value};

use crate::eval::{HitsEntry, MetricReport};
use crate::kg::DatasetStats;

/// Builds the run-config value embedded in every artifact: the subcommand,
/// its arguments, and the crate version.
pub fn run_config(command: &str, args: impl Serialize) -> Value {
    json!({
        "command": command,
        "args": serde_json::to_value(args).expect("CLI arguments serialize"),
        "version": env!("CARGO_PKG_VERSION"),
    })
}

/// Writes one or more metric reports as a JSON document: a bare object for a
/// single report, `{"run_config": ..., "reports": [...]}` for several.
pub fn write_reports(path: &Path, reports: &[MetricReport], cfg: &Value) -> Result<()> {
    let doc = match reports {
        [single] => serde_json::to_value(single)?,
        many => json!({ "run_config": cfg, "reports": many }),
    };
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &doc)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

/// Reads reports back from a file written by [`write_reports`]: accepts a
/// single report object, a `{"reports": [...]}` wrapper, or a JSON array.
pub fn read_reports(path: &Path) -> Result<Vec<MetricReport>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let list = match value {
        Value::Array(items) => items,
        Value::Object(ref map) if map.contains_key("reports") => {
            match value.get("reports").cloned() {
                Some(Value::Array(items)) => items,
                _ => bail!("{}: \"reports\" is not an array", path.display()),
            }
        }
        other => vec![other],
    };
    list.into_iter()
        .enumerate()
        .map(|(i, v)| {
            serde_json::from_value(v)
                .with_context(|| format!("{}: report #{}", path.display(), i + 1))
        })
        .collect()
}

/// Unweighted mean of reports over the same (model, protocol, ks) grid,
/// labeled `dataset_label` — the cross-version summary row.
pub fn average_reports(reports: &[MetricReport], dataset_label: &str) -> Result<MetricReport> {
    let [first, rest @ ..] = reports else {
        bail!("nothing to average");
    };
    let ks: Vec<usize> = first.hits.iter().map(|h| h.k).collect();
    for r in rest {
        if r.model != first.model || r.protocol != first.protocol {
            bail!(
                "cannot average reports for different models/protocols ({}/{} vs {}/{})",
                first.model,
                first.protocol,
                r.model,
                r.protocol
            );
        }
        let rks: Vec<usize> = r.hits.iter().map(|h| h.k).collect();
        if rks != ks {
            bail!("cannot average reports with different hits@k cutoffs");
        }
    }
    let n = reports.len() as f64;
    let mean = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    Ok(MetricReport {
        run_config: None,
        dataset: dataset_label.to_string(),
        model: first.model.clone(),
        protocol: first.protocol.clone(),
        runs: first.runs,
        tasks: reports.iter().map(|r| r.tasks).sum(),
        hits: ks
            .iter()
            .enumerate()
            .map(|(i, &k)| HitsEntry {
                k,
                value: reports.iter().map(|r| r.hits[i].value).sum::<f64>() / n,
            })
            .collect(),
        mrr: mean(|r| r.mrr),
        mean_rank: mean(|r| r.mean_rank),
        mean_candidates: mean(|r| r.mean_candidates),
        mean_filtered: mean(|r| r.mean_filtered),
        negatives: first.negatives.filter(|_| reports.iter().all(|r| r.negatives == first.negatives)),
        tmn_sha256: None,
        undersized_tasks: reports
            .iter()
            .map(|r| r.undersized_tasks)
            .try_fold(0usize, |acc, u| u.map(|u| acc + u)),
    })
}

/// One metric of one report, with its difference to the reference model
/// under the same protocol.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaRow {
    pub model: String,
    pub protocol: String,
    /// "hits" (with `k` set) or "mrr" (`k` empty).
    pub metric: String,
    pub k: Option<usize>,
    pub value: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeltaTable {
    pub dataset: String,
    pub reference: String,
    pub rows: Vec<DeltaRow>,
}

fn metric_values(r: &MetricReport) -> Vec<(String, Option<usize>, f64)> {
    let mut out: Vec<(String, Option<usize>, f64)> = r
        .hits
        .iter()
        .map(|h| ("hits".to_string(), Some(h.k), h.value))
        .collect();
    out.push(("mrr".to_string(), None, r.mrr));
    out
}

/// Builds a model-comparison table: every metric of every report, with the
/// delta against the `reference` model's report under the same protocol.
/// All reports must carry the same dataset label — comparing across datasets
/// is a category error this refuses to make.
pub fn compare(reports: &[MetricReport], reference: &str) -> Result<DeltaTable> {
    let [first, ..] = reports else {
        bail!("no reports to compare");
    };
    let dataset = first.dataset.clone();
    if let Some(other) = reports.iter().find(|r| r.dataset != dataset) {
        bail!(
            "reports cover different datasets ({} vs {}); compare one dataset at a time",
            dataset,
            other.dataset
        );
    }

    let mut baselines: HashMap<(String, String, Option<usize>), f64> = HashMap::new();
    for r in reports.iter().filter(|r| r.model == reference) {
        for (metric, k, value) in metric_values(r) {
            baselines.insert((r.protocol.clone(), metric, k), value);
        }
    }
    if baselines.is_empty() {
        bail!("no report for reference model {reference:?}");
    }

    let mut rows = Vec::new();
    for r in reports {
        for (metric, k, value) in metric_values(r) {
            let Some(&base) = baselines.get(&(r.protocol.clone(), metric.clone(), k)) else {
                bail!(
                    "reference model {reference:?} has no {metric}{} under protocol {}",
                    k.map(|k| format!("@{k}")).unwrap_or_default(),
                    r.protocol
                );
            };
            rows.push(DeltaRow {
                model: r.model.clone(),
                protocol: r.protocol.clone(),
                metric,
                k,
                value,
                delta: value - base,
            });
        }
    }
    Ok(DeltaTable {
        dataset,
        reference: reference.to_string(),
        rows,
    })
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Writes a delta table as CSV with the columns
/// `model,protocol,metric,k,value,delta` (k empty for MRR rows), preceded by
/// a `# run_config=...` comment when a config is given.
pub fn write_delta_csv(path: &Path, table: &DeltaTable, run_config: Option<&Value>) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    if let Some(cfg) = run_config {
        writeln!(w, "# run_config={cfg}")?;
    }
    writeln!(w, "model,protocol,metric,k,value,delta")?;
    for row in &table.rows {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            csv_field(&row.model),
            csv_field(&row.protocol),
            csv_field(&row.metric),
            row.k.map(|k| k.to_string()).unwrap_or_default(),
            row.value,
            row.delta
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Aligned text table of dataset statistics.
pub fn render_stats(stats: &[DatasetStats]) -> String {
    let mut out = String::new();
    let header = [
        "dataset", "#R", "train #E", "train", "valid", "test", "test #E", "inference", "valid",
        "test",
    ];
    let mut rows: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for s in stats {
        rows.push(vec![
            s.dataset.clone(),
            s.train.relations.to_string(),
            s.train.entities.to_string(),
            s.train.splits[0].triples.to_string(),
            s.train.splits[1].triples.to_string(),
            s.train.splits[2].triples.to_string(),
            s.test.entities.to_string(),
            s.test.splits[0].triples.to_string(),
            s.test.splits[1].triples.to_string(),
            s.test.splits[2].triples.to_string(),
        ]);
    }
    render_table(&mut out, &rows);
    for s in stats {
        for w in &s.warnings {
            let _ = writeln!(out, "warning [{}]: {}", s.dataset, w);
        }
    }
    out
}

/// Aligned text table of metric reports.
pub fn render_reports(reports: &[MetricReport]) -> String {
    let mut out = String::new();
    let ks: Vec<usize> = reports
        .first()
        .map(|r| r.hits.iter().map(|h| h.k).collect())
        .unwrap_or_default();
    let mut header = vec![
        "dataset".to_string(),
        "model".to_string(),
        "protocol".to_string(),
        "tasks".to_string(),
        "runs".to_string(),
    ];
    header.extend(ks.iter().map(|k| format!("hits@{k}")));
    header.push("mrr".to_string());
    header.push("mean rank".to_string());
    header.push("candidates".to_string());
    let mut rows = vec![header];
    for r in reports {
        let mut row = vec![
            r.dataset.clone(),
            r.model.clone(),
            r.protocol.clone(),
            r.tasks.to_string(),
            r.runs.to_string(),
        ];
        for k in &ks {
            row.push(
                r.hits_at(*k)
                    .map(|v| format!("{v:.3}"))
                    .unwrap_or_else(|| "-".into()),
            );
        }
        row.push(format!("{:.3}", r.mrr));
        row.push(format!("{:.1}", r.mean_rank));
        row.push(format!("{:.1}", r.mean_candidates));
        rows.push(row);
    }
    render_table(&mut out, &rows);
    for r in reports {
        if let Some(u) = r.undersized_tasks {
            if u > 0 {
                let _ = writeln!(
                    out,
                    "note [{}]: {u} of {} tasks have fewer than {} negatives",
                    r.dataset,
                    r.tasks,
                    r.negatives.unwrap_or(0)
                );
            }
        }
        if let Some(sha) = &r.tmn_sha256 {
            let _ = writeln!(out, "note [{}]: negatives file sha256 {sha}", r.dataset);
        }
    }
    out
}

/// Aligned text rendering of a delta table.
pub fn render_delta(table: &DeltaTable) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "dataset {} (deltas vs {})",
        table.dataset, table.reference
    );
    let mut rows = vec![vec![
        "model".to_string(),
        "protocol".to_string(),
        "metric".to_string(),
        "value".to_string(),
        "delta".to_string(),
    ]];
    for row in &table.rows {
        let metric = match row.k {
            Some(k) => format!("{}@{k}", row.metric),
            None => row.metric.clone(),
        };
        rows.push(vec![
            row.model.clone(),
            row.protocol.clone(),
            metric,
            format!("{:.3}", row.value),
            format!("{:+.3}", row.delta),
        ]);
    }
    render_table(&mut out, &rows);
    out
}

fn render_table(out: &mut String, rows: &[Vec<String>]) {
    let columns = rows.iter().map(Vec::len).max().unwrap_or(0);
    let mut widths = vec![0usize; columns];
    for row in rows {
        for (i, cell) in row.iter().enumerate() {
            widths[i] = widths[i].max(cell.len());
        }
    }
    for row in rows {
        let line: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(i, cell)| format!("{cell:<width$}", width = widths[i]))
            .collect();
        let _ = writeln!(out, "{}", line.join("  ").trim_end());
    }
}
