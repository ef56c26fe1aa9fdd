//! Acquisition strategies behind one `select` entry point.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::concept_graph::ConceptGraph;
use crate::error::{GsalError, Result};
use crate::exec::{self, Execution};
use crate::fusion::{score_round, select_batch, AcquisitionConfig, ScoreBreakdown};
use crate::generative::DifficultyProvider;
use crate::pool::Sample;
use crate::rarity::RarityThresholds;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    Random,
    Entropy,
    CoreSet,
    UniformByLabel,
    DiffusionOnly,
    CoverageOnly,
    Gsal,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 7] = [
        StrategyKind::Random,
        StrategyKind::Entropy,
        StrategyKind::CoreSet,
        StrategyKind::UniformByLabel,
        StrategyKind::DiffusionOnly,
        StrategyKind::CoverageOnly,
        StrategyKind::Gsal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Random => "random",
            StrategyKind::Entropy => "entropy",
            StrategyKind::CoreSet => "core_set",
            StrategyKind::UniformByLabel => "uniform_by_label",
            StrategyKind::DiffusionOnly => "diffusion_only",
            StrategyKind::CoverageOnly => "coverage_only",
            StrategyKind::Gsal => "gsal",
        }
    }

    /// Whether the strategy runs the generative/coverage scoring pipeline.
    pub fn uses_scoring(self) -> bool {
        matches!(self, StrategyKind::Gsal | StrategyKind::DiffusionOnly | StrategyKind::CoverageOnly)
    }

    /// The acquisition config this strategy scores with.
    pub fn acquisition_config(self, base: &AcquisitionConfig) -> AcquisitionConfig {
        let mut cfg = *base;
        match self {
            StrategyKind::DiffusionOnly => {
                cfg.fusion.eta = 0.0;
                cfg.fusion.bonus_in_pool = false;
            }
            StrategyKind::CoverageOnly => cfg.fusion.use_generative = false,
            _ => {}
        }
        cfg
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StrategyKind {
    type Err = GsalError;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.to_ascii_lowercase().replace('-', "_");
        let norm = match norm.as_str() {
            "coreset" => "core_set",
            other => other,
        };
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.name() == norm)
            .ok_or_else(|| GsalError::param("strategy", format!("unknown strategy `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyAggregation {
    #[default]
    Max,
    Mean,
}

/// Inputs shared by every strategy for one round.
pub struct RoundInputs<'a> {
    pub unlabeled: &'a [&'a Sample],
    pub labeled: &'a [&'a Sample],
    pub graph: &'a ConceptGraph,
    pub thresholds: &'a RarityThresholds,
    pub provider: &'a dyn DifficultyProvider,
    pub config: &'a AcquisitionConfig,
    pub entropy_aggregation: EntropyAggregation,
    /// Seed for this round's random choices.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub ids: Vec<String>,
    /// Strategy score per selected id, when the strategy produces one.
    pub scores: Vec<Option<f64>>,
    /// Full breakdowns of the selected ids for scoring strategies.
    pub breakdowns: Vec<ScoreBreakdown>,
}

impl Selection {
    fn unscored(ids: Vec<String>) -> Self {
        let scores = vec![None; ids.len()];
        Self {
            ids,
            scores,
            breakdowns: Vec::new(),
        }
    }
}

pub fn select(kind: StrategyKind, inputs: &RoundInputs<'_>, k: usize) -> Result<Selection> {
    let pool = inputs.unlabeled;
    if k > pool.len() {
        return Err(GsalError::BatchTooLarge { k, pool: pool.len() });
    }
    if k == 0 {
        return Ok(Selection::unscored(Vec::new()));
    }
    let prefilter = inputs.config.fusion.prefilter;
    match kind {
        StrategyKind::Random => select_random(pool, k, inputs.seed).map(Selection::unscored),
        StrategyKind::Entropy => {
            let scores = entropy_scores(pool, prefilter, inputs.entropy_aggregation)?;
            let pairs: Vec<(&str, f64)> = pool.iter().map(|s| s.id.as_str()).zip(scores).collect();
            let ids = select_batch(&pairs, k)?;
            let lookup: BTreeMap<&str, f64> = pairs.iter().copied().collect();
            let scores = ids.iter().map(|id| Some(lookup[id.as_str()])).collect();
            Ok(Selection {
                ids,
                scores,
                breakdowns: Vec::new(),
            })
        }
        StrategyKind::CoreSet => {
            let labeled: Vec<&[f64]> = inputs.labeled.iter().map(|s| s.embedding.as_slice()).collect();
            select_coreset(pool, &labeled, k, inputs.config.execution).map(Selection::unscored)
        }
        StrategyKind::UniformByLabel => {
            select_uniform_by_label(pool, inputs.graph, k, inputs.seed, inputs.config).map(Selection::unscored)
        }
        StrategyKind::Gsal | StrategyKind::DiffusionOnly | StrategyKind::CoverageOnly => {
            let cfg = kind.acquisition_config(inputs.config);
            let breakdowns = score_round(pool, inputs.graph, inputs.thresholds, inputs.provider, &cfg)?;
            let pairs: Vec<(&str, f64)> = breakdowns
                .iter()
                .map(|b| (b.sample_id.as_str(), b.final_score))
                .collect();
            let ids = select_batch(&pairs, k)?;
            let mut by_id: BTreeMap<&str, &ScoreBreakdown> =
                breakdowns.iter().map(|b| (b.sample_id.as_str(), b)).collect();
            let picked: Vec<ScoreBreakdown> = ids
                .iter()
                .map(|id| by_id.remove(id.as_str()).expect("selected ids were scored").clone())
                .collect();
            Ok(Selection {
                scores: picked.iter().map(|b| Some(b.final_score)).collect(),
                ids,
                breakdowns: picked,
            })
        }
    }
}

/// Uniform sample without replacement.
pub fn select_random(pool: &[&Sample], k: usize, seed: u64) -> Result<Vec<String>> {
    if k > pool.len() {
        return Err(GsalError::BatchTooLarge { k, pool: pool.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(index::sample(&mut rng, pool.len(), k)
        .into_iter()
        .map(|i| pool[i].id.clone())
        .collect())
}

/// Binary entropy in nats, with `0·ln 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |x: f64| if x > 0.0 { -x * x.ln() } else { 0.0 };
    term(p) + term(1.0 - p)
}

/// Image-level entropy score from its retained proposals; 0 without proposals.
pub fn entropy_scores(pool: &[&Sample], prefilter: usize, agg: EntropyAggregation) -> Result<Vec<f64>> {
    pool.iter()
        .map(|s| {
            let props = s.top_proposals(prefilter);
            let mut hs = Vec::with_capacity(props.len());
            for p in props {
                if !(0.0..=1.0).contains(&p.confidence) {
                    return Err(GsalError::ConfidenceRange {
                        id: p.id.clone(),
                        value: p.confidence,
                    });
                }
                hs.push(binary_entropy(p.confidence));
            }
            Ok(match (agg, hs.is_empty()) {
                (_, true) => 0.0,
                (EntropyAggregation::Max, false) => hs.iter().copied().fold(0.0, f64::max),
                (EntropyAggregation::Mean, false) => hs.iter().sum::<f64>() / hs.len() as f64,
            })
        })
        .collect()
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// k-center greedy over embeddings.
///
/// With an empty labeled set the first pick is the lexicographically first id.
pub fn select_coreset(pool: &[&Sample], labeled: &[&[f64]], k: usize, execution: Execution) -> Result<Vec<String>> {
    if pool.is_empty() {
        return Err(GsalError::EmptyInput);
    }
    if k > pool.len() {
        return Err(GsalError::BatchTooLarge { k, pool: pool.len() });
    }
    let dim = pool[0].embedding.len();
    for e in pool.iter().map(|s| s.embedding.as_slice()).chain(labeled.iter().copied()) {
        if e.len() != dim {
            return Err(GsalError::DimensionMismatch {
                expected: dim,
                actual: e.len(),
            });
        }
    }
    let mut nearest: Vec<f64> = exec::map_indexed(pool, execution, |_, s| {
        labeled
            .iter()
            .map(|l| euclidean(&s.embedding, l))
            .fold(f64::INFINITY, f64::min)
    });
    let mut taken = vec![false; pool.len()];
    let mut picks = Vec::with_capacity(k);
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for (i, s) in pool.iter().enumerate() {
            if taken[i] {
                continue;
            }
            best = match best {
                None => Some(i),
                Some(b) => {
                    let better = nearest[i] > nearest[b] || (nearest[i] == nearest[b] && s.id < pool[b].id);
                    Some(if better { i } else { b })
                }
            };
        }
        let b = best.expect("k ≤ pool size");
        taken[b] = true;
        picks.push(pool[b].id.clone());
        let center = &pool[b].embedding;
        let updated = exec::map_indexed(pool, execution, |i, s| nearest[i].min(euclidean(&s.embedding, center)));
        nearest = updated;
    }
    Ok(picks)
}

/// Round-robin over predicted fine concepts, one random sample per concept per cycle.
pub fn select_uniform_by_label(
    pool: &[&Sample],
    graph: &ConceptGraph,
    k: usize,
    seed: u64,
    cfg: &AcquisitionConfig,
) -> Result<Vec<String>> {
    if k > pool.len() {
        return Err(GsalError::BatchTooLarge { k, pool: pool.len() });
    }
    let assigned = exec::map_indexed(pool, cfg.execution, |_, s| graph.assign_fine(&s.embedding, cfg.similarity));
    let mut groups: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (s, fine) in pool.iter().zip(assigned) {
        groups.entry(graph.id_of(fine?)).or_default().push(s.id.as_str());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut queues: Vec<std::vec::IntoIter<&str>> = groups
        .into_values()
        .map(|mut ids| {
            ids.sort_unstable();
            ids.shuffle(&mut rng);
            ids.into_iter()
        })
        .collect();
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        for q in queues.iter_mut() {
            if out.len() == k {
                break;
            }
            if let Some(id) = q.next() {
                out.push(id.to_string());
            }
        }
    }
    Ok(out)
}
