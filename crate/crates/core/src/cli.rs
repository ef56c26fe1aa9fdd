//! `gsal simulate | score | report`.
//!
//! Exit codes: 0 success, 1 invalid input, 2 failure at run time.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::baselines::StrategyKind;
use crate::concept_graph::ConceptGraph;
use crate::config::RunConfig;
use crate::error::{GsalError, Result};
use crate::fusion::{score_round, select_from_breakdowns};
use crate::generative::{FileProvider, ReconTerms, ReconstructionTrajectory, ScoreEntry};
use crate::pool::{Proposal, Sample};
use crate::rarity::compute_thresholds;
use crate::report::{
    self, aggregate, render_aggregate, render_summary, AggregateRow, Checkpoint, RoundReport, SelectionReport,
};
use crate::simulator::{self, generate_pool, RoundObserver};

#[derive(Debug, Parser)]
#[command(name = "gsal", version, about = "Rarity-aware generative active learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run strategies on synthetic long-tailed pools and write round reports.
    Simulate(SimulateArgs),
    /// Score an imported pool once and write the ranking.
    Score(ScoreArgs),
    /// Render the round reports under a run directory.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Replaces the configured seed list.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replaces the configured strategies; comma separated.
    #[arg(long, value_delimiter = ',')]
    pub strategy: Vec<StrategyKind>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Continue runs that have a checkpoint in the output directory.
    #[arg(long)]
    pub resume: bool,
    /// Also write each seed's pool, scores and graph for use with `score`.
    #[arg(long)]
    pub export_pool: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// JSON Lines pool file.
    #[arg(long)]
    pub pool: Option<PathBuf>,
    /// Concept graph JSON.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    /// `id,R,V` CSV or trajectory JSON Lines.
    #[arg(long)]
    pub scores: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Run directory written by `simulate`.
    pub dir: PathBuf,
    /// Write the summary here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn exit_code(err: &GsalError) -> i32 {
    if err.is_validation() {
        1
    } else {
        2
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args).map(|_| ()),
        Command::Score(args) => cmd_score(&args).map(|_| ()),
        Command::Report(args) => {
            let summary = cmd_report(&args.dir)?;
            match &args.out {
                Some(path) => fs::write(path, summary).map_err(|e| GsalError::io(path, e)),
                None => {
                    print!("{summary}");
                    Ok(())
                }
            }
        }
    }
}

fn load_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seeds = vec![seed];
    }
    if !common.strategy.is_empty() {
        cfg.strategies = common.strategy.clone();
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GsalError::io(dir, e))
}

pub fn checkpoint_file(run_dir: &Path) -> PathBuf {
    run_dir.join("checkpoint.json")
}

/// Writes round files and checkpoints as runs progress.
struct DirectoryObserver {
    out: PathBuf,
}

impl RoundObserver for DirectoryObserver {
    fn on_round(&self, report: &RoundReport, checkpoint: &Checkpoint) -> Result<()> {
        let dir = report::run_dir(&self.out, report.strategy, report.seed);
        report::write_round(&dir, report)?;
        report::write_json(&checkpoint_file(&dir), checkpoint)?;
        log::info!(
            "{} seed {} round {}: {} labeled, rare {}/{}",
            report.strategy,
            report.seed,
            report.round,
            report.labeled,
            report.rare_coverage,
            report.rare_total
        );
        Ok(())
    }
}

/// Runs the configured experiment; returns the aggregate table.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<Vec<AggregateRow>> {
    let cfg = load_config(&args.common)?;
    let out = cfg.out.clone().unwrap_or_else(|| PathBuf::from("runs"));
    create_dir(&out)?;
    let exp = cfg.experiment();

    let mut checkpoints = HashMap::new();
    for &strategy in &exp.strategies {
        for &seed in &exp.seeds {
            let dir = report::run_dir(&out, strategy, seed);
            let cp_path = checkpoint_file(&dir);
            if !cp_path.exists() {
                continue;
            }
            if !args.resume {
                return Err(GsalError::param(
                    "out",
                    format!("{} already holds a run; pass --resume or choose another directory", dir.display()),
                ));
            }
            let cp: Checkpoint = report::read_json(&cp_path)?;
            checkpoints.insert((strategy, seed), cp);
        }
    }

    if args.export_pool {
        for &seed in &exp.seeds {
            let world = generate_pool(&exp.spec_for_seed(seed))?;
            let dir = out.join("pools").join(format!("seed_{seed}"));
            create_dir(&dir)?;
            let provider = world.provider(exp.reconstructions, exp.synthetic);
            let scores = |id: &str, latent: &[f64]| -> Result<ReconTerms> {
                Ok(provider.trajectory(id, latent)?.terms())
            };
            write_pool(&dir.join("pool.jsonl"), world.samples(), Some(&scores))?;
            let graph = dir.join("graph.json");
            fs::write(&graph, world.graph().to_json()).map_err(|e| GsalError::io(&graph, e))?;
        }
    }

    let observer = DirectoryObserver { out: out.clone() };
    simulator::run_experiment_resuming(&exp, &observer, &checkpoints)?;

    let mut reports = Vec::new();
    for &strategy in &exp.strategies {
        for &seed in &exp.seeds {
            reports.extend(report::load_reports(&report::run_dir(&out, strategy, seed))?);
        }
    }
    let rows = aggregate(&reports);
    report::write_json(&out.join("aggregate.json"), &rows)?;
    let csv_path = out.join("aggregate.csv");
    let mut w = csv::Writer::from_path(&csv_path)?;
    for row in &rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| GsalError::io(&csv_path, e))?;
    print!("{}", render_aggregate(&rows));
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProposalRecord {
    id: String,
    z: Vec<f64>,
    embedding: Vec<f64>,
    confidence: f64,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    recon: Option<Vec<Vec<f64>>>,
}

/// One line of a pool file. `R`/`V` or `recon` are optional inline scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SampleRecord {
    id: String,
    z: Vec<f64>,
    embedding: Vec<f64>,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    r: Option<f64>,
    #[serde(rename = "V", default, skip_serializing_if = "Option::is_none")]
    v: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    recon: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    proposals: Vec<ProposalRecord>,
}

fn inline_entry(
    id: &str,
    z: &[f64],
    r: Option<f64>,
    v: Option<f64>,
    recon: Option<Vec<Vec<f64>>>,
) -> std::result::Result<Option<ScoreEntry>, String> {
    match (r, v, recon) {
        (None, None, None) => Ok(None),
        (Some(r), Some(v), None) => ReconTerms::new(r, v)
            .map(|t| Some(ScoreEntry::Terms(t)))
            .map_err(|e| e.to_string()),
        (None, None, Some(recon)) => ReconstructionTrajectory::new(z.to_vec(), recon)
            .map(|t| Some(ScoreEntry::Trajectory(t)))
            .map_err(|e| e.to_string()),
        _ => Err(format!("`{id}` needs both R and V, or recon alone")),
    }
}

/// Reads a JSON Lines pool; inline scores go into the returned provider.
pub fn read_pool(path: &Path) -> Result<(Vec<Sample>, FileProvider)> {
    let file = File::open(path).map_err(|e| GsalError::io(path, e))?;
    let mut samples = Vec::new();
    let mut provider = FileProvider::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let row = i + 1;
        let line = line.map_err(|e| GsalError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |reason: String| GsalError::Report {
            path: path.to_path_buf(),
            reason: format!("line {row}: {reason}"),
        };
        let rec: SampleRecord = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
        if let Some(entry) = inline_entry(&rec.id, &rec.z, rec.r, rec.v, rec.recon).map_err(bad)? {
            provider.insert(rec.id.clone(), entry, row)?;
        }
        let mut proposals = Vec::with_capacity(rec.proposals.len());
        for p in rec.proposals {
            if let Some(entry) = inline_entry(&p.id, &p.z, p.r, p.v, p.recon).map_err(bad)? {
                provider.insert(p.id.clone(), entry, row)?;
            }
            proposals.push(Proposal {
                id: p.id,
                parent: rec.id.clone(),
                latent: p.z,
                embedding: p.embedding,
                confidence: p.confidence,
            });
        }
        samples.push(Sample {
            id: rec.id,
            latent: rec.z,
            embedding: rec.embedding,
            proposals,
        });
    }
    Ok((samples, provider))
}

type ScoreFn<'a> = &'a dyn Fn(&str, &[f64]) -> Result<ReconTerms>;

/// Writes a pool file, with inline `R`/`V` when `scores` is given.
pub fn write_pool(path: &Path, samples: &[Sample], scores: Option<ScoreFn<'_>>) -> Result<()> {
    let file = File::create(path).map_err(|e| GsalError::io(path, e))?;
    let mut w = BufWriter::new(file);
    let terms = |id: &str, z: &[f64]| -> Result<(Option<f64>, Option<f64>)> {
        match scores {
            Some(f) => f(id, z).map(|t| (Some(t.r), Some(t.v))),
            None => Ok((None, None)),
        }
    };
    for s in samples {
        let (r, v) = terms(&s.id, &s.latent)?;
        let proposals = s
            .proposals
            .iter()
            .map(|p| {
                let (r, v) = terms(&p.id, &p.latent)?;
                Ok(ProposalRecord {
                    id: p.id.clone(),
                    z: p.latent.clone(),
                    embedding: p.embedding.clone(),
                    confidence: p.confidence,
                    r,
                    v,
                    recon: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let rec = SampleRecord {
            id: s.id.clone(),
            z: s.latent.clone(),
            embedding: s.embedding.clone(),
            r,
            v,
            recon: None,
            proposals,
        };
        serde_json::to_writer(&mut w, &rec)?;
        writeln!(w).map_err(|e| GsalError::io(path, e))?;
    }
    w.flush().map_err(|e| GsalError::io(path, e))
}

fn read_scores(path: &Path, into: &mut FileProvider) -> Result<()> {
    let file = File::open(path).map_err(|e| GsalError::io(path, e))?;
    let loaded = if path.extension().is_some_and(|e| e == "csv") {
        FileProvider::from_csv(file)?
    } else {
        FileProvider::from_jsonl(BufReader::new(file))?
    };
    into.merge(loaded)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedSample {
    pub rank: usize,
    /// Within the configured batch size `k`.
    pub selected: bool,
    #[serde(flatten)]
    pub selection: SelectionReport,
}

/// Scores every sample of an imported pool; nothing is annotated.
pub fn cmd_score(args: &ScoreArgs) -> Result<Vec<RankedSample>> {
    let cfg = load_config(&args.common)?;
    let pool_path = args
        .pool
        .clone()
        .or_else(|| cfg.import.pool.clone())
        .ok_or_else(|| GsalError::param("pool", "no pool file given (--pool or import.pool)"))?;
    let graph_path = args
        .graph
        .clone()
        .or_else(|| cfg.import.graph.clone())
        .ok_or_else(|| GsalError::param("graph", "no concept graph given (--graph or import.graph)"))?;
    let strategy = match args.common.strategy.as_slice() {
        [] => StrategyKind::Gsal,
        [s] if s.uses_scoring() => *s,
        [s] => {
            return Err(GsalError::param(
                "strategy",
                format!("`{s}` does not produce scores; use gsal, diffusion_only or coverage_only"),
            ))
        }
        _ => return Err(GsalError::param("strategy", "score takes a single strategy")),
    };

    let graph_text = fs::read_to_string(&graph_path).map_err(|e| GsalError::io(&graph_path, e))?;
    let graph = ConceptGraph::from_json(&graph_text)?;
    let (samples, mut provider) = read_pool(&pool_path)?;
    if let Some(path) = args.scores.clone().or_else(|| cfg.import.scores.clone()) {
        read_scores(&path, &mut provider)?;
    }

    let acq = strategy.acquisition_config(&cfg.acquisition);
    let thresholds = compute_thresholds(&graph, cfg.percentile)?;
    let refs: Vec<&Sample> = samples.iter().collect();
    let breakdowns = score_round(&refs, &graph, &thresholds, &provider, &acq)?;
    let order = select_from_breakdowns(&breakdowns, breakdowns.len())?;
    let by_id: HashMap<&str, usize> = breakdowns
        .iter()
        .enumerate()
        .map(|(i, b)| (b.sample_id.as_str(), i))
        .collect();
    let ranked = order
        .iter()
        .enumerate()
        .map(|(rank, id)| {
            let b = &breakdowns[by_id[id.as_str()]];
            let s = &samples[by_id[id.as_str()]];
            let path = graph.assign(&s.embedding, acq.similarity)?;
            let ind = crate::rarity::rarity_indicators(&path, &graph, &thresholds)?;
            Ok(RankedSample {
                rank: rank + 1,
                selected: rank < acq.fusion.k,
                selection: SelectionReport::from_breakdown(&graph, b, (&path, &ind)),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let json = serde_json::to_string_pretty(&ranked)?;
    match &cfg.out {
        Some(out) => {
            create_dir(out)?;
            let path = out.join("scores.json");
            fs::write(&path, json).map_err(|e| GsalError::io(&path, e))?;
        }
        None => println!("{json}"),
    }
    Ok(ranked)
}

/// Summary text for every round report under `dir`.
pub fn cmd_report(dir: &Path) -> Result<String> {
    if !dir.is_dir() {
        return Err(GsalError::param("dir", format!("{} is not a directory", dir.display())));
    }
    let reports = report::load_reports(dir)?;
    Ok(render_summary(&reports))
}
