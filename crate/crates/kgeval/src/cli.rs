//! Command-line interface. Every flag can also come from a `KGEVAL_`
//! environment variable, so CI pipelines can pin seeds and paths without
//! editing command lines.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::eval::{evaluate, EvalOptions, Protocol, TieMode};
use crate::kg::{load_dataset, DatasetLayout, InductiveDataset};
use crate::negatives::{generate_tmn_set, write_negatives};
use crate::ranker::{BaselineScorer, PredictionsScorer, Scorer};
use crate::report::{
    average_reports, compare, read_reports, render_delta, render_reports, render_stats,
    run_config, write_delta_csv, write_reports,
};
use crate::rules::{apply_rules, learn_rules, read_rules, LearnOptions, TypeRule};

#[derive(Parser)]
#[command(
    name = "kgeval",
    version,
    about = "Evaluate link prediction on inductive knowledge-graph benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print split statistics for one or more dataset versions
    Stats(StatsArgs),
    /// Learn type rules from a dataset's train split and write them as TSV
    LearnRules(LearnRulesArgs),
    /// Generate type-matched negatives for a dataset's test triples
    GenNegatives(GenNegativesArgs),
    /// Rank test triples under a protocol and report filtered hits@k / MRR
    Evaluate(EvaluateArgs),
    /// Compare metric reports against a reference model
    Compare(CompareArgs),
}

#[derive(Args, Serialize)]
struct DatasetArgs {
    /// Dataset directory; with --versions, the family base path (version
    /// directories are <dataset>_<version>)
    #[arg(long, env = "KGEVAL_DATASET")]
    dataset: PathBuf,

    /// Comma-separated version suffixes, e.g. v1,v2,v3,v4
    #[arg(long, env = "KGEVAL_VERSIONS", value_delimiter = ',')]
    versions: Vec<String>,

    /// Split file names, in the order
    /// train,valid,test,inference,inference-valid,inference-test
    #[arg(
        long,
        env = "KGEVAL_LAYOUT",
        default_value = "train.txt,valid.txt,test.txt,train_ind.txt,valid_ind.txt,test_ind.txt"
    )]
    layout: String,
}

struct Resolved {
    name: String,
    version: String,
    dir: PathBuf,
}

impl DatasetArgs {
    fn stem(&self) -> String {
        self.dataset
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| self.dataset.display().to_string())
    }

    fn resolve(&self) -> Vec<Resolved> {
        if self.versions.is_empty() {
            vec![Resolved {
                name: self.stem(),
                version: String::new(),
                dir: self.dataset.clone(),
            }]
        } else {
            self.versions
                .iter()
                .map(|v| Resolved {
                    name: format!("{}_{v}", self.stem()),
                    version: v.clone(),
                    dir: PathBuf::from(format!("{}_{v}", self.dataset.display())),
                })
                .collect()
        }
    }

    fn load(&self, r: &Resolved) -> Result<InductiveDataset> {
        let layout = DatasetLayout::parse(&self.layout)?;
        load_dataset(&r.dir, r.name.clone(), &layout)
            .with_context(|| format!("loading dataset {}", r.name))
    }

    fn load_single(&self) -> Result<InductiveDataset> {
        let resolved = self.resolve();
        let [one] = &resolved[..] else {
            bail!("this command works on one dataset version at a time; drop --versions and point --dataset at a version directory");
        };
        self.load(one)
    }
}

#[derive(Args, Serialize)]
struct LearnArgs {
    /// Drop rules whose distinct-entity overlap is below this
    #[arg(long, env = "KGEVAL_MIN_SUPPORT", default_value_t = 1)]
    min_support: u32,

    /// Drop rules whose confidence is below this
    #[arg(long, env = "KGEVAL_MIN_CONFIDENCE", default_value_t = 0.0)]
    min_confidence: f64,
}

impl LearnArgs {
    fn options(&self) -> LearnOptions {
        LearnOptions {
            min_support: self.min_support,
            min_confidence: self.min_confidence,
        }
    }
}

#[derive(Args, Serialize)]
struct StatsArgs {
    #[command(flatten)]
    data: DatasetArgs,

    /// Also write the statistics as JSON
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct LearnRulesArgs {
    #[command(flatten)]
    data: DatasetArgs,

    #[command(flatten)]
    learn: LearnArgs,

    /// Output TSV path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct GenNegativesArgs {
    #[command(flatten)]
    data: DatasetArgs,

    #[command(flatten)]
    learn: LearnArgs,

    /// Reuse rules from a TSV instead of learning them
    #[arg(long)]
    rules: Option<PathBuf>,

    /// Negatives per completion task
    #[arg(long, env = "KGEVAL_NUM_NEGATIVES", default_value_t = 50)]
    num_negatives: usize,

    /// Master seed for sampling
    #[arg(long, env = "KGEVAL_SEED")]
    seed: u64,

    /// Output JSONL path
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::ValueEnum, Clone, Copy, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ProtocolKind {
    /// Rank against every test-graph entity
    NonSampling,
    /// Rank against uniformly sampled negatives, averaged over runs
    Random,
    /// Rank against type-matched negatives from --tmn-file
    Tmn,
}

#[derive(Args, Serialize)]
struct EvaluateArgs {
    #[command(flatten)]
    data: DatasetArgs,

    #[command(flatten)]
    learn: LearnArgs,

    /// Candidate-selection protocol
    #[arg(long, value_enum, env = "KGEVAL_PROTOCOL", default_value = "non-sampling")]
    protocol: ProtocolKind,

    /// Rounds for the random protocol
    #[arg(long, env = "KGEVAL_RUNS", default_value_t = 100)]
    runs: u64,

    /// Negatives per task for the random protocol
    #[arg(long, env = "KGEVAL_NUM_NEGATIVES", default_value_t = 49)]
    num_negatives: usize,

    /// Negatives file for the tmn protocol ({version} is substituted)
    #[arg(long, env = "KGEVAL_TMN_FILE")]
    tmn_file: Option<PathBuf>,

    /// hits@k cutoffs
    #[arg(long = "k", env = "KGEVAL_K", value_delimiter = ',', default_value = "10")]
    ks: Vec<usize>,

    /// Master seed; required by the random protocol
    #[arg(long, env = "KGEVAL_SEED")]
    seed: Option<u64>,

    /// "baseline" or "predictions:<path>" ({version} is substituted)
    #[arg(long, env = "KGEVAL_MODEL", default_value = "baseline")]
    model: String,

    /// Tie handling around the truth's score
    #[arg(long, value_enum, env = "KGEVAL_TIE", default_value = "average")]
    tie: TieMode,

    /// Write the reports as JSON
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CompareArgs {
    /// Report JSON files produced by `evaluate`
    #[arg(required = true)]
    reports: Vec<PathBuf>,

    /// Model the deltas are measured against
    #[arg(long, env = "KGEVAL_REFERENCE", default_value = "baseline")]
    reference: String,

    /// Keep only reports with this dataset label before comparing
    #[arg(long)]
    dataset: Option<String>,

    /// Write the table as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Stats(args) => cmd_stats(args),
        Command::LearnRules(args) => cmd_learn_rules(args),
        Command::GenNegatives(args) => cmd_gen_negatives(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Compare(args) => cmd_compare(args),
    }
}

fn cmd_stats(args: StatsArgs) -> Result<()> {
    let cfg = run_config("stats", &args);
    let mut stats = Vec::new();
    for r in args.data.resolve() {
        stats.push(args.data.load(&r)?.stats());
    }
    print!("{}", render_stats(&stats));
    if let Some(out) = &args.out {
        let doc = serde_json::json!({ "run_config": cfg, "stats": stats });
        std::fs::write(out, format!("{:#}\n", doc))
            .with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn cmd_learn_rules(args: LearnRulesArgs) -> Result<()> {
    let cfg = run_config("learn-rules", &args);
    let ds = args.data.load_single()?;
    let rules = learn_rules(&ds.train.rule_graph(), args.learn.options());
    log::info!("{}: {} rules", ds.name, rules.len());
    match &args.out {
        Some(out) => {
            crate::rules::write_rules(out, &rules, Some(&cfg))?;
            println!("wrote {} rules to {}", rules.len(), out.display());
        }
        None => {
            println!("# run_config={cfg}");
            for r in &rules {
                println!(
                    "{}\t{}\t{}\t{}\t{}\t{}",
                    r.head, r.template, r.body, r.confidence, r.numerator, r.denominator
                );
            }
        }
    }
    Ok(())
}

fn load_or_learn_rules(
    ds: &InductiveDataset,
    rules_file: Option<&Path>,
    opts: LearnOptions,
) -> Result<Vec<TypeRule>> {
    match rules_file {
        Some(path) => read_rules(path),
        None => Ok(learn_rules(&ds.train.rule_graph(), opts)),
    }
}

fn cmd_gen_negatives(args: GenNegativesArgs) -> Result<()> {
    let cfg = run_config("gen-negatives", &args);
    let ds = args.data.load_single()?;
    let rules = load_or_learn_rules(&ds, args.rules.as_deref(), args.learn.options())?;
    let scores = apply_rules(&rules, &ds.test.inference_graph());
    let set = generate_tmn_set(&ds, &scores, args.num_negatives, args.seed);
    write_negatives(&args.out, &set, &ds, Some(&cfg))?;

    let [high, mid, low, fill] = set.provenance_counts();
    println!(
        "wrote negatives for {} test triples ({} tasks) to {}",
        set.entries.len(),
        set.entries.len() * 2,
        args.out.display()
    );
    println!(
        "provenance: bucket_high={high} bucket_mid={mid} bucket_low={low} random_fill={fill}"
    );
    let undersized = set.undersized_tasks();
    if undersized > 0 {
        println!(
            "warning: {undersized} tasks have fewer than {} negatives (candidate pools exhausted)",
            set.requested
        );
    }
    Ok(())
}

fn build_scorer(
    model: &str,
    version: &str,
    ds: &InductiveDataset,
    learn: LearnOptions,
) -> Result<Box<dyn Scorer>> {
    if model == "baseline" {
        let rules = learn_rules(&ds.train.rule_graph(), learn);
        let scores = apply_rules(&rules, &ds.test.inference_graph());
        Ok(Box::new(BaselineScorer::new(scores)))
    } else if let Some(path) = model.strip_prefix("predictions:") {
        let path = path.replace("{version}", version);
        Ok(Box::new(PredictionsScorer::load(Path::new(&path), ds)?))
    } else {
        bail!("--model must be \"baseline\" or \"predictions:<path>\", got {model:?}");
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<()> {
    let cfg = run_config("evaluate", &args);
    let opts = EvalOptions {
        ks: args.ks.clone(),
        seed: args.seed,
        tie: args.tie,
    };

    let mut reports = Vec::new();
    for r in args.data.resolve() {
        let ds = args.data.load(&r)?;
        let scorer = build_scorer(&args.model, &r.version, &ds, args.learn.options())?;
        let protocol = match args.protocol {
            ProtocolKind::NonSampling => Protocol::NonSampling,
            ProtocolKind::Random => Protocol::RandomSampling {
                runs: args.runs,
                negatives: args.num_negatives,
            },
            ProtocolKind::Tmn => {
                let file = args
                    .tmn_file
                    .as_ref()
                    .context("the tmn protocol requires --tmn-file")?;
                let file = file
                    .to_string_lossy()
                    .replace("{version}", &r.version);
                Protocol::TypeMatched {
                    negatives_file: PathBuf::from(file),
                }
            }
        };
        let mut report = evaluate(scorer.as_ref(), &ds, &protocol, &opts)
            .with_context(|| format!("evaluating {}", r.name))?;
        report.run_config = Some(cfg.clone());
        reports.push(report);
    }

    if reports.len() > 1 {
        let mut avg = average_reports(&reports, &args.data.stem())?;
        avg.run_config = Some(cfg.clone());
        reports.push(avg);
    }

    print!("{}", render_reports(&reports));
    if let Some(out) = &args.out {
        write_reports(out, &reports, &cfg)?;
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs) -> Result<()> {
    let cfg = run_config("compare", &args);
    let mut reports = Vec::new();
    for path in &args.reports {
        reports.extend(read_reports(path)?);
    }
    if let Some(label) = &args.dataset {
        reports.retain(|r| &r.dataset == label);
        if reports.is_empty() {
            bail!("no reports with dataset label {label:?}");
        }
    }
    let table = compare(&reports, &args.reference)?;
    print!("{}", render_delta(&table));
    if let Some(out) = &args.out {
        write_delta_csv(out, &table, Some(&cfg))?;
        println!("wrote {} rows to {}", table.rows.len(), out.display());
    }
    Ok(())
}
