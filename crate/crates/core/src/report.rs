//! Round reports, checkpoints, aggregate tables and their text rendering.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::StrategyKind;
use crate::concept_graph::{ConceptGraph, ConceptPath, Level, NamedPath};
use crate::error::{GsalError, Result};
use crate::fusion::ScoreBreakdown;
use crate::rarity::{RarityIndicators, RarityThresholds};

/// One concept path behind a selection and which of its nodes were rare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationaleEntry {
    /// Proposal or sample the path was assigned from.
    pub source: String,
    pub path: NamedPath,
    pub fine_rare: bool,
    pub coarse_rare: bool,
    pub rare_abstracts: Vec<String>,
}

impl RationaleEntry {
    pub fn new(source: &str, graph: &ConceptGraph, path: &ConceptPath, ind: &RarityIndicators) -> Self {
        let named = graph.named(path);
        let rare_abstracts = named
            .abstracts
            .iter()
            .zip(&ind.abstracts)
            .filter(|(_, &fired)| fired)
            .map(|(a, _)| a.clone())
            .collect();
        Self {
            source: source.to_string(),
            path: named,
            fine_rare: ind.fine,
            coarse_rare: ind.coarse,
            rare_abstracts,
        }
    }

    pub fn any_fired(&self) -> bool {
        self.fine_rare || self.coarse_rare || !self.rare_abstracts.is_empty()
    }

    /// `fine → coarse → [abstracts]` with rare nodes starred.
    pub fn render(&self) -> String {
        let star = |s: &str, rare: bool| if rare { format!("{s}*") } else { s.to_string() };
        let abstracts: Vec<String> = self
            .path
            .abstracts
            .iter()
            .map(|a| star(a, self.rare_abstracts.contains(a)))
            .collect();
        format!(
            "{} → {} → [{}]",
            star(&self.path.fine, self.fine_rare),
            star(&self.path.coarse, self.coarse_rare),
            abstracts.join(", ")
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProposalReport {
    pub id: String,
    pub r: f64,
    pub v: f64,
    pub u_prop: f64,
    pub bonus: f64,
    pub u_prop_norm: f64,
    pub bonus_norm: f64,
    pub combined: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakdownReport {
    pub r_img: f64,
    pub v_img: f64,
    pub u_img: f64,
    pub u_img_norm: f64,
    pub s_prop: Option<f64>,
    pub u_g: f64,
    pub bonus_img: f64,
    pub bonus_img_norm: f64,
    pub final_score: f64,
    pub proposals: Vec<ProposalReport>,
}

impl From<&ScoreBreakdown> for BreakdownReport {
    fn from(b: &ScoreBreakdown) -> Self {
        Self {
            r_img: b.r_img,
            v_img: b.v_img,
            u_img: b.u_img,
            u_img_norm: b.u_img_norm,
            s_prop: b.s_prop,
            u_g: b.u_g,
            bonus_img: b.bonus_img,
            bonus_img_norm: b.bonus_img_norm,
            final_score: b.final_score,
            proposals: b
                .proposals
                .iter()
                .map(|p| ProposalReport {
                    id: p.id.clone(),
                    r: p.r,
                    v: p.v,
                    u_prop: p.u_prop,
                    bonus: p.bonus,
                    u_prop_norm: p.u_prop_norm,
                    bonus_norm: p.bonus_norm,
                    combined: p.combined,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub id: String,
    pub score: Option<f64>,
    pub rationale: Vec<RationaleEntry>,
    pub breakdown: Option<BreakdownReport>,
}

impl SelectionReport {
    /// Report for a scored selection; falls back to `image_path` when the
    /// image had no proposals.
    pub fn from_breakdown(
        graph: &ConceptGraph,
        b: &ScoreBreakdown,
        image_path: (&ConceptPath, &RarityIndicators),
    ) -> Self {
        let mut rationale: Vec<RationaleEntry> = b
            .proposals
            .iter()
            .map(|p| RationaleEntry::new(&p.id, graph, &p.path, &p.indicators))
            .collect();
        if rationale.is_empty() {
            rationale.push(RationaleEntry::new(&b.sample_id, graph, image_path.0, image_path.1));
        }
        Self {
            id: b.sample_id.clone(),
            score: Some(b.final_score),
            rationale,
            breakdown: Some(b.into()),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageHistogram {
    pub fine: BTreeMap<String, u64>,
    pub coarse: BTreeMap<String, u64>,
    #[serde(rename = "abstract")]
    pub abstract_: BTreeMap<String, u64>,
}

impl CoverageHistogram {
    pub fn of(graph: &ConceptGraph) -> Self {
        let level = |l: Level| {
            graph
                .ids_at(l)
                .map(|id| (graph.id_of(id).to_string(), graph.coverage(id)))
                .collect()
        };
        Self {
            fine: level(Level::Fine),
            coarse: level(Level::Coarse),
            abstract_: level(Level::Abstract),
        }
    }

    pub fn all(&self) -> impl Iterator<Item = (&String, &u64)> {
        self.fine.iter().chain(&self.coarse).chain(&self.abstract_)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundReport {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub round: usize,
    pub budget: f64,
    pub labeled: usize,
    pub pool_size: usize,
    /// Selection was random because nothing was labeled yet.
    pub cold_start: bool,
    pub percentile: f64,
    pub thresholds: RarityThresholds,
    pub selections: Vec<SelectionReport>,
    /// Counts after this round's annotations.
    pub coverage: CoverageHistogram,
    pub rare_coverage: usize,
    pub rare_total: usize,
    pub anomalies_retrieved: usize,
}

impl RoundReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} seed {} round {}  budget {:.1}%  labeled {}/{}{}",
            self.strategy,
            self.seed,
            self.round,
            self.budget * 100.0,
            self.labeled,
            self.pool_size,
            if self.cold_start { "  (cold start: random)" } else { "" }
        );
        let _ = writeln!(
            out,
            "thresholds (p{}): fine {:.6}  coarse {:.6}  abstract {:.6}",
            self.percentile, self.thresholds.tau_fine, self.thresholds.tau_coarse, self.thresholds.tau_abstract
        );
        let _ = writeln!(
            out,
            "rare coverage {}/{}  anomalies retrieved {}",
            self.rare_coverage, self.rare_total, self.anomalies_retrieved
        );
        let _ = writeln!(out, "{:>4}  {:<14} {:>10}  {:>9} {:>9} {:>9}  rationale", "rank", "id", "score", "U_g", "B~", "S_prop");
        for (i, s) in self.selections.iter().enumerate() {
            let score = s.score.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
            let (ug, bn, sp) = match &s.breakdown {
                Some(b) => (
                    format!("{:.4}", b.u_g),
                    format!("{:.4}", b.bonus_img_norm),
                    b.s_prop.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into()),
                ),
                None => ("-".into(), "-".into(), "-".into()),
            };
            // lead with a path that fired, if any
            let lead = s.rationale.iter().find(|r| r.any_fired()).or(s.rationale.first());
            let path = lead.map(RationaleEntry::render).unwrap_or_default();
            let _ = writeln!(out, "{:>4}  {:<14} {:>10}  {:>9} {:>9} {:>9}  {}", i + 1, s.id, score, ug, bn, sp, path);
        }
        out
    }
}

/// State needed to resume a run after `completed_rounds` rounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub completed_rounds: usize,
    pub labeled_ids: Vec<String>,
    pub counts: BTreeMap<String, u64>,
    /// Round seeds derive from (seed, round), so this is the stream position.
    pub next_round: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub strategy: StrategyKind,
    pub round: usize,
    pub budget: f64,
    pub runs: usize,
    pub rare_coverage_mean: f64,
    pub rare_coverage_std: f64,
    pub anomalies_mean: f64,
    pub anomalies_std: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Mean and sample standard deviation over seeds, per strategy and round.
pub fn aggregate<'a>(reports: impl IntoIterator<Item = &'a RoundReport>) -> Vec<AggregateRow> {
    let mut groups: BTreeMap<(StrategyKind, usize), (f64, Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in reports {
        let g = groups
            .entry((r.strategy, r.round))
            .or_insert_with(|| (r.budget, Vec::new(), Vec::new()));
        g.1.push(r.rare_coverage as f64);
        g.2.push(r.anomalies_retrieved as f64);
    }
    groups
        .into_iter()
        .map(|((strategy, round), (budget, rare, anom))| {
            let (rm, rs) = mean_std(&rare);
            let (am, asd) = mean_std(&anom);
            AggregateRow {
                strategy,
                round,
                budget,
                runs: rare.len(),
                rare_coverage_mean: rm,
                rare_coverage_std: rs,
                anomalies_mean: am,
                anomalies_std: asd,
            }
        })
        .collect()
}

pub fn render_aggregate(rows: &[AggregateRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<18} {:>6} {:>8} {:>5}  {:>16}  {:>16}",
        "strategy", "round", "budget", "runs", "rare coverage", "anomalies"
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{:<18} {:>6} {:>7.1}% {:>5}  {:>8.2} ± {:<5.2}  {:>8.2} ± {:<5.2}",
            r.strategy.name(),
            r.round,
            r.budget * 100.0,
            r.runs,
            r.rare_coverage_mean,
            r.rare_coverage_std,
            r.anomalies_mean,
            r.anomalies_std
        );
    }
    out
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text).map_err(|e| GsalError::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| GsalError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| GsalError::Report {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub fn run_dir(out: &Path, strategy: StrategyKind, seed: u64) -> PathBuf {
    out.join(strategy.name()).join(format!("seed_{seed}"))
}

pub fn round_file(dir: &Path, round: usize) -> PathBuf {
    dir.join(format!("round_{round:03}.json"))
}

/// Writes the JSON report and its text rendering.
pub fn write_round(dir: &Path, report: &RoundReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GsalError::io(dir, e))?;
    let json = round_file(dir, report.round);
    write_json(&json, report)?;
    let txt = json.with_extension("txt");
    fs::write(&txt, report.render()).map_err(|e| GsalError::io(&txt, e))
}

/// Every `round_*.json` under `dir`, sorted by path.
pub fn find_round_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        let entries = fs::read_dir(&d).map_err(|e| GsalError::io(&d, e))?;
        for entry in entries {
            let entry = entry.map_err(|e| GsalError::io(&d, e))?;
            let path = entry.path();
            if path.is_dir() {
                stack.push(path);
            } else if path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("round_") && n.ends_with(".json"))
            {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}

/// Loads every round report under `dir`; all unreadable files are named.
pub fn load_reports(dir: &Path) -> Result<Vec<RoundReport>> {
    let mut reports = Vec::new();
    let mut bad = Vec::new();
    for path in find_round_files(dir)? {
        match read_json::<RoundReport>(&path) {
            Ok(r) => reports.push(r),
            Err(e) => bad.push(e.to_string()),
        }
    }
    if !bad.is_empty() {
        return Err(GsalError::Report {
            path: dir.to_path_buf(),
            reason: format!("unreadable round reports:\n  {}", bad.join("\n  ")),
        });
    }
    Ok(reports)
}

/// Per-round tables followed by fine-level coverage across rounds.
pub fn render_summary(reports: &[RoundReport]) -> String {
    let mut runs: BTreeMap<(StrategyKind, u64), Vec<&RoundReport>> = BTreeMap::new();
    for r in reports {
        runs.entry((r.strategy, r.seed)).or_default().push(r);
    }
    let mut out = String::new();
    if runs.is_empty() {
        out.push_str("no round reports found\n");
        return out;
    }
    for ((strategy, seed), mut rounds) in runs {
        rounds.sort_by_key(|r| r.round);
        let _ = writeln!(out, "=== {strategy} / seed {seed} ===");
        for r in &rounds {
            out.push_str(&r.render());
            out.push('\n');
        }
        let _ = writeln!(out, "fine coverage over rounds:");
        let concepts: Vec<&String> = rounds[0].coverage.fine.keys().collect();
        let _ = write!(out, "{:<16}", "concept");
        for r in &rounds {
            let _ = write!(out, " {:>5}", format!("r{}", r.round));
        }
        out.push('\n');
        for c in concepts {
            let _ = write!(out, "{c:<16}");
            for r in &rounds {
                let _ = write!(out, " {:>5}", r.coverage.fine.get(c).copied().unwrap_or(0));
            }
            out.push('\n');
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report(strategy: StrategyKind, seed: u64, round: usize, rare: usize) -> RoundReport {
        RoundReport {
            strategy,
            seed,
            round,
            budget: 0.01 * (round + 1) as f64,
            labeled: 10 * (round + 1),
            pool_size: 100,
            cold_start: round == 0,
            percentile: 20.0,
            thresholds: RarityThresholds {
                tau_fine: 1e-6,
                tau_coarse: 2.5,
                tau_abstract: 0.1,
            },
            selections: vec![SelectionReport {
                id: "img_1".into(),
                score: Some(1.25),
                rationale: vec![RationaleEntry {
                    source: "img_1/p00".into(),
                    path: NamedPath {
                        fine: "void".into(),
                        coarse: "subsurface".into(),
                        abstracts: vec!["dark".into(), "round".into()],
                    },
                    fine_rare: true,
                    coarse_rare: false,
                    rare_abstracts: vec!["round".into()],
                }],
                breakdown: None,
            }],
            coverage: CoverageHistogram::default(),
            rare_coverage: rare,
            rare_total: 3,
            anomalies_retrieved: rare * 2,
        }
    }

    #[test]
    fn rationale_marks_rare_nodes() {
        let r = report(StrategyKind::Gsal, 0, 1, 1);
        let line = r.selections[0].rationale[0].render();
        assert_eq!(line, "void* → subsurface → [dark, round*]");
        assert!(r.render().contains("void*"));
    }

    #[test]
    fn aggregate_statistics() {
        let reps = [
            report(StrategyKind::Gsal, 0, 0, 1),
            report(StrategyKind::Gsal, 1, 0, 3),
            report(StrategyKind::Random, 0, 0, 2),
        ];
        let rows = aggregate(&reps);
        assert_eq!(rows.len(), 2);
        let g = rows.iter().find(|r| r.strategy == StrategyKind::Gsal).unwrap();
        assert_eq!(g.runs, 2);
        assert_eq!(g.rare_coverage_mean, 2.0);
        assert!((g.rare_coverage_std - 2f64.sqrt()).abs() < 1e-12);
        let r = rows.iter().find(|r| r.strategy == StrategyKind::Random).unwrap();
        assert_eq!(r.rare_coverage_std, 0.0);
    }

    #[test]
    fn summary_of_nothing() {
        assert!(render_summary(&[]).contains("no round reports"));
    }
}
