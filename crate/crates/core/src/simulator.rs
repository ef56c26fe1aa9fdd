//! Synthetic long-tailed pools, the oracle annotator and the round loop.
//!
//! A [`SimulatedWorld`] owns the ground truth. Strategies only ever receive
//! [`Sample`] values, which carry no hidden fields; truth is read back
//! through the world when annotating and when computing metrics.
//!
//! Pool model, per sample:
//! - fine concept drawn from a Zipf head plus a rare tail of fixed prevalence
//! - image embedding = concept embedding + Gaussian noise
//! - one object proposal plus background proposals near the same concept
//! - subtle anomalies get high atypicality and near-certain detector
//!   confidence on their object proposal, so entropy ranks them low
//! - anomalies are mostly hard-but-common samples; rare concepts have their
//!   own (lower) anomaly rate

use std::collections::{BTreeMap, HashMap};

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::baselines::{self, EntropyAggregation, RoundInputs, StrategyKind};
use crate::concept_graph::{ConceptGraph, NodeId};
use crate::error::{GsalError, Result};
use crate::exec::{self, Execution};
use crate::fusion::AcquisitionConfig;
use crate::generative::{item_seed, SyntheticModel, SyntheticProvider};
use crate::pool::{PoolState, Proposal, Sample};
use crate::rarity::{compute_thresholds, rarity_indicators, DEFAULT_PERCENTILE};
use crate::report::{Checkpoint, CoverageHistogram, RationaleEntry, RoundReport, SelectionReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PoolSpec {
    pub pool_size: usize,
    pub fine_concepts: usize,
    pub coarse_concepts: usize,
    pub abstract_concepts: usize,
    /// The last `rare_concepts` fine concepts form the rare tail.
    pub rare_concepts: usize,
    pub rare_prevalence: f64,
    /// Exponent of the Zipf head over common concepts.
    pub zipf_exponent: f64,
    /// Anomaly probability for samples of common concepts.
    pub anomaly_rate: f64,
    /// Anomaly probability for samples of rare concepts.
    pub rare_anomaly_rate: f64,
    pub anomaly_atypicality: [f64; 2],
    pub common_atypicality: [f64; 2],
    /// Inclusive range of proposals per image.
    pub proposals_per_image: [usize; 2],
    pub latent_dim: usize,
    pub embedding_dim: usize,
    pub embedding_noise: f64,
    pub background_noise: f64,
    /// Beta parameters of detector confidence on anomaly proposals.
    pub anomaly_confidence: [f64; 2],
    pub object_confidence: [f64; 2],
    pub background_confidence: [f64; 2],
    pub seed: u64,
}

impl Default for PoolSpec {
    fn default() -> Self {
        Self {
            pool_size: 2000,
            fine_concepts: 12,
            coarse_concepts: 4,
            abstract_concepts: 6,
            rare_concepts: 3,
            rare_prevalence: 0.01,
            zipf_exponent: 1.0,
            anomaly_rate: 0.2,
            rare_anomaly_rate: 0.05,
            anomaly_atypicality: [0.7, 1.0],
            common_atypicality: [0.0, 0.3],
            proposals_per_image: [3, 8],
            latent_dim: 16,
            embedding_dim: 32,
            embedding_noise: 0.15,
            background_noise: 0.25,
            anomaly_confidence: [8.0, 1.0],
            object_confidence: [2.0, 2.0],
            background_confidence: [1.0, 8.0],
            seed: 0,
        }
    }
}

impl PoolSpec {
    /// Concept frequencies: Zipf head scaled to `1 − rare·prevalence`, then the rare tail.
    pub fn frequencies(&self) -> Vec<f64> {
        let common = self.fine_concepts.saturating_sub(self.rare_concepts);
        let head: Vec<f64> = (1..=common).map(|r| (r as f64).powf(-self.zipf_exponent)).collect();
        let total: f64 = head.iter().sum();
        let mass = 1.0 - self.rare_concepts as f64 * self.rare_prevalence;
        head.iter()
            .map(|w| w / total * mass)
            .chain(std::iter::repeat_n(self.rare_prevalence, self.rare_concepts))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let infeasible = |msg: String| Err(GsalError::InfeasibleSpec(msg));
        if self.pool_size == 0 {
            return infeasible("pool_size must be positive".into());
        }
        if self.fine_concepts == 0 || self.coarse_concepts == 0 || self.abstract_concepts == 0 {
            return infeasible("every concept level needs at least one node".into());
        }
        if self.rare_concepts > self.pool_size {
            return infeasible(format!(
                "{} rare concepts cannot appear in a pool of {}",
                self.rare_concepts, self.pool_size
            ));
        }
        if self.rare_concepts >= self.fine_concepts && self.rare_concepts > 0 {
            return infeasible("at least one fine concept must be common".into());
        }
        if self.rare_concepts > 0 && !(self.rare_prevalence > 0.0) {
            return infeasible("rare_prevalence must be positive".into());
        }
        if self.rare_concepts as f64 * self.rare_prevalence >= 1.0 {
            return infeasible("rare concepts take all probability mass".into());
        }
        let freqs = self.frequencies();
        let sum: f64 = freqs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return infeasible(format!("frequencies sum to {sum}"));
        }
        let common = self.fine_concepts - self.rare_concepts;
        if self.rare_concepts > 0 && freqs[..common].iter().any(|&f| f <= self.rare_prevalence) {
            return infeasible("rare prevalence must be below every common concept's frequency".into());
        }
        for (name, p) in [("anomaly_rate", self.anomaly_rate), ("rare_anomaly_rate", self.rare_anomaly_rate)] {
            if !(0.0..=1.0).contains(&p) {
                return infeasible(format!("{name} must lie in [0, 1]"));
            }
        }
        for (name, [lo, hi]) in [
            ("anomaly_atypicality", self.anomaly_atypicality),
            ("common_atypicality", self.common_atypicality),
        ] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return infeasible(format!("{name} must be a range within [0, 1]"));
            }
        }
        let [pmin, pmax] = self.proposals_per_image;
        if pmin > pmax {
            return infeasible("proposals_per_image range is empty".into());
        }
        if self.latent_dim == 0 || self.embedding_dim == 0 {
            return infeasible("dimensions must be positive".into());
        }
        for (name, [a, b]) in [
            ("anomaly_confidence", self.anomaly_confidence),
            ("object_confidence", self.object_confidence),
            ("background_confidence", self.background_confidence),
        ] {
            if !(a > 0.0 && b > 0.0) {
                return infeasible(format!("{name} Beta parameters must be positive"));
            }
        }
        if !(self.embedding_noise >= 0.0 && self.background_noise >= 0.0) {
            return infeasible("noise scales must be nonnegative".into());
        }
        Ok(())
    }
}

/// Ground truth for one sample, never shown to strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenTruth {
    pub fine: NodeId,
    pub atypicality: f64,
    pub is_anomaly: bool,
}

#[derive(Debug, Clone)]
pub struct SimulatedWorld {
    spec: PoolSpec,
    graph: ConceptGraph,
    samples: Vec<Sample>,
    truth: Vec<HiddenTruth>,
    atypicality: HashMap<String, f64>,
    rare: Vec<NodeId>,
}

fn concept_graph(spec: &PoolSpec, embeddings: &[Vec<f64>]) -> Result<ConceptGraph> {
    let n_abs = spec.abstract_concepts;
    // rare concepts get attributes of their own when there is room
    let rare_attrs = spec.rare_concepts.min(n_abs.saturating_sub(1));
    let common_attrs = n_abs - rare_attrs;
    let common = spec.fine_concepts - spec.rare_concepts;
    let mut b = ConceptGraph::builder();
    for c in 0..spec.coarse_concepts {
        b = b.coarse(&format!("coarse_{c}"), &[]);
    }
    for a in 0..n_abs {
        b = b.abstract_node(&format!("attr_{a}"));
    }
    for (i, embedding) in embeddings.iter().enumerate() {
        let mut attrs = vec![i % common_attrs];
        if i < common {
            if common_attrs > 1 {
                attrs.push((i + 1) % common_attrs);
            }
        } else if rare_attrs > 0 {
            attrs.push(common_attrs + (i - common) % rare_attrs);
        }
        attrs.dedup();
        let names: Vec<String> = attrs.iter().map(|a| format!("attr_{a}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        b = b.fine(
            &format!("fine_{i:02}"),
            &format!("coarse_{}", i % spec.coarse_concepts),
            &refs,
            embedding.clone(),
        );
    }
    b.build()
}

fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize, sd: f64) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let e: f64 = StandardNormal.sample(rng);
            sd * e
        })
        .collect()
}

fn noisy(center: &[f64], rng: &mut ChaCha8Rng, sd: f64) -> Vec<f64> {
    center
        .iter()
        .map(|c| {
            let e: f64 = StandardNormal.sample(rng);
            c + sd * e
        })
        .collect()
}

fn uniform(rng: &mut ChaCha8Rng, [lo, hi]: [f64; 2]) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

fn beta(params: [f64; 2]) -> Result<Beta<f64>> {
    Beta::new(params[0], params[1]).map_err(|e| GsalError::InfeasibleSpec(e.to_string()))
}

pub fn generate_pool(spec: &PoolSpec) -> Result<SimulatedWorld> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let embeddings: Vec<Vec<f64>> = (0..spec.fine_concepts)
        .map(|_| {
            let v = gaussian_vec(&mut rng, spec.embedding_dim, 1.0);
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            v.into_iter().map(|x| x / n).collect()
        })
        .collect();
    let graph = concept_graph(spec, &embeddings)?;
    let fine_nodes: Vec<NodeId> = (0..spec.fine_concepts)
        .map(|i| graph.lookup(&format!("fine_{i:02}")).expect("fine node exists"))
        .collect();
    let common = spec.fine_concepts - spec.rare_concepts;
    let rare = fine_nodes[common..].to_vec();

    let concept_dist =
        WeightedIndex::new(spec.frequencies()).map_err(|e| GsalError::InfeasibleSpec(e.to_string()))?;
    let anomaly_conf = beta(spec.anomaly_confidence)?;
    let object_conf = beta(spec.object_confidence)?;
    let background_conf = beta(spec.background_confidence)?;

    let mut samples = Vec::with_capacity(spec.pool_size);
    let mut truth = Vec::with_capacity(spec.pool_size);
    let mut atypicality = HashMap::new();
    for i in 0..spec.pool_size {
        let id = format!("img_{i:05}");
        let c = concept_dist.sample(&mut rng);
        let is_rare = c >= common;
        let rate = if is_rare { spec.rare_anomaly_rate } else { spec.anomaly_rate };
        let is_anomaly = rng.random_bool(rate);
        let a = uniform(
            &mut rng,
            if is_anomaly { spec.anomaly_atypicality } else { spec.common_atypicality },
        );
        let latent = gaussian_vec(&mut rng, spec.latent_dim, 1.0);
        let embedding = noisy(&embeddings[c], &mut rng, spec.embedding_noise);
        let n_props = rng.random_range(spec.proposals_per_image[0]..=spec.proposals_per_image[1]);
        let mut proposals = Vec::with_capacity(n_props);
        for j in 0..n_props {
            let pid = format!("{id}/p{j:02}");
            let object = j == 0;
            let (emb_sd, conf, pa) = if object {
                let conf = if is_anomaly {
                    anomaly_conf.sample(&mut rng)
                } else {
                    object_conf.sample(&mut rng)
                };
                (spec.embedding_noise, conf, a)
            } else {
                (
                    spec.background_noise,
                    background_conf.sample(&mut rng),
                    uniform(&mut rng, spec.common_atypicality),
                )
            };
            let p_latent = gaussian_vec(&mut rng, spec.latent_dim, 1.0);
            let p_emb = noisy(&embeddings[c], &mut rng, emb_sd);
            atypicality.insert(pid.clone(), pa);
            proposals.push(Proposal {
                id: pid,
                parent: id.clone(),
                latent: p_latent,
                embedding: p_emb,
                confidence: conf.clamp(0.0, 1.0),
            });
        }
        atypicality.insert(id.clone(), a);
        samples.push(Sample {
            id,
            latent,
            embedding,
            proposals,
        });
        truth.push(HiddenTruth {
            fine: fine_nodes[c],
            atypicality: a,
            is_anomaly,
        });
    }
    Ok(SimulatedWorld {
        spec: spec.clone(),
        graph,
        samples,
        truth,
        atypicality,
        rare,
    })
}

impl SimulatedWorld {
    pub fn spec(&self) -> &PoolSpec {
        &self.spec
    }

    /// The concept graph with zero coverage.
    pub fn graph(&self) -> &ConceptGraph {
        &self.graph
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn rare_concepts(&self) -> Vec<String> {
        self.rare.iter().map(|&r| self.graph.id_of(r).to_string()).collect()
    }

    /// Ground truth, for metrics and tests only.
    pub fn truth(&self, sample_id: &str) -> Option<&HiddenTruth> {
        self.samples.iter().position(|s| s.id == sample_id).map(|i| &self.truth[i])
    }

    pub fn truths(&self) -> &[HiddenTruth] {
        &self.truth
    }

    pub fn fresh_pool(&self) -> PoolState {
        PoolState::new(self.samples.clone(), self.spec.seed).expect("generated pools are valid")
    }

    pub fn provider(&self, reconstructions: usize, model: SyntheticModel) -> SyntheticProvider {
        let mut p = SyntheticProvider::new(reconstructions, self.spec.seed, model);
        for (id, &a) in &self.atypicality {
            p.insert(id.clone(), a);
        }
        p
    }

    /// Reveals fine labels of `batch` and moves it to the labeled set.
    pub fn oracle_annotate<S: AsRef<str>>(&self, pool: &mut PoolState, batch: &[S]) -> Result<Vec<(String, String)>> {
        let idx = pool.mark_labeled(batch)?;
        Ok(idx
            .into_iter()
            .map(|i| (self.samples[i].id.clone(), self.graph.id_of(self.truth[i].fine).to_string()))
            .collect())
    }

    fn labeled_truth<'a>(&'a self, pool: &'a PoolState) -> impl Iterator<Item = &'a HiddenTruth> + 'a {
        (0..pool.len()).filter(|&i| pool.is_labeled(i)).map(|i| &self.truth[i])
    }

    pub fn rare_coverage(&self, pool: &PoolState) -> usize {
        let concepts: Vec<&str> = self.labeled_truth(pool).map(|t| self.graph.id_of(t.fine)).collect();
        rare_coverage(concepts, &self.rare_concepts())
    }

    pub fn anomalies_retrieved(&self, pool: &PoolState) -> usize {
        self.labeled_truth(pool).filter(|t| t.is_anomaly).count()
    }
}

/// Rare concepts with at least one labeled sample.
pub fn rare_coverage<'a>(labeled_concepts: impl IntoIterator<Item = &'a str>, rare: &[String]) -> usize {
    let mut hit = vec![false; rare.len()];
    for c in labeled_concepts {
        if let Some(i) = rare.iter().position(|r| r == c) {
            hit[i] = true;
        }
    }
    hit.into_iter().filter(|&h| h).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub spec: PoolSpec,
    pub strategies: Vec<StrategyKind>,
    /// Labeled fractions after each round, increasing.
    pub budgets: Vec<f64>,
    pub seeds: Vec<u64>,
    pub acquisition: AcquisitionConfig,
    pub percentile: f64,
    pub reconstructions: usize,
    pub synthetic: SyntheticModel,
    pub entropy_aggregation: EntropyAggregation,
    /// Parallelism across (strategy, seed) runs.
    pub runs_execution: Execution,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            spec: PoolSpec::default(),
            strategies: vec![StrategyKind::Gsal, StrategyKind::Random, StrategyKind::Entropy],
            budgets: (1..=15).map(|i| i as f64 / 100.0).collect(),
            seeds: vec![0],
            acquisition: AcquisitionConfig::default(),
            percentile: DEFAULT_PERCENTILE,
            reconstructions: 4,
            synthetic: SyntheticModel::default(),
            entropy_aggregation: EntropyAggregation::default(),
            runs_execution: Execution::Parallel,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.acquisition.validate()?;
        if self.budgets.is_empty() {
            return Err(GsalError::param("budgets", "at least one budget is required"));
        }
        let mut prev = 0.0;
        for &b in &self.budgets {
            if !(b > prev && b <= 1.0) {
                return Err(GsalError::param("budgets", "must be strictly increasing within (0, 1]"));
            }
            prev = b;
        }
        if self.seeds.is_empty() {
            return Err(GsalError::param("seeds", "at least one seed is required"));
        }
        if self.strategies.is_empty() {
            return Err(GsalError::param("strategies", "at least one strategy is required"));
        }
        if self.reconstructions == 0 {
            return Err(GsalError::param("reconstructions", "must be at least 1"));
        }
        if !(self.percentile > 0.0 && self.percentile < 100.0) {
            return Err(GsalError::param("percentile", "must lie in (0, 100)"));
        }
        Ok(())
    }

    pub fn spec_for_seed(&self, seed: u64) -> PoolSpec {
        PoolSpec {
            seed,
            ..self.spec.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub strategy: StrategyKind,
    pub seed: u64,
    pub rounds: Vec<RoundReport>,
}

impl RunResult {
    pub fn at_budget(&self, budget: f64) -> Option<&RoundReport> {
        self.rounds.iter().find(|r| (r.budget - budget).abs() < 1e-12)
    }
}

/// Called after every round with the report and a resumable checkpoint.
pub trait RoundObserver: Sync {
    fn on_round(&self, report: &RoundReport, checkpoint: &Checkpoint) -> Result<()>;
}

pub struct NoObserver;

impl RoundObserver for NoObserver {
    fn on_round(&self, _: &RoundReport, _: &Checkpoint) -> Result<()> {
        Ok(())
    }
}

fn round_seed(seed: u64, round: usize, tag: &str) -> u64 {
    item_seed(seed, &format!("round{round}/{tag}"))
}

/// Runs one strategy on one world, optionally resuming from a checkpoint.
pub fn run_single(
    world: &SimulatedWorld,
    strategy: StrategyKind,
    config: &ExperimentConfig,
    observer: &dyn RoundObserver,
    resume: Option<&Checkpoint>,
) -> Result<RunResult> {
    let seed = world.spec.seed;
    let mut pool = world.fresh_pool();
    let mut graph = world.graph.clone();
    let provider = world.provider(config.reconstructions, config.synthetic);
    let n = pool.len();
    let mut start = 0;
    if let Some(cp) = resume {
        if cp.strategy != strategy || cp.seed != seed {
            return Err(GsalError::param("checkpoint", "belongs to a different run"));
        }
        pool.mark_labeled(&cp.labeled_ids)?;
        graph.set_counts(&cp.counts.clone().into_iter().collect())?;
        start = cp.next_round;
    }
    let rare_total = world.rare.len();
    let mut rounds = Vec::new();
    for (round, &budget) in config.budgets.iter().enumerate().skip(start) {
        pool.round = round;
        let target = ((budget * n as f64).round() as usize).min(n);
        let k = target.saturating_sub(pool.labeled_count());
        let thresholds = compute_thresholds(&graph, config.percentile)?;
        let cold_start = pool.labeled_count() == 0;
        let unlabeled = pool.unlabeled();
        let selections: Vec<SelectionReport>;
        let ids: Vec<String>;
        if cold_start || !strategy.uses_scoring() {
            ids = if cold_start {
                baselines::select_random(&unlabeled, k, round_seed(seed, round, "cold"))?
            } else {
                let labeled = pool.labeled();
                let inputs = RoundInputs {
                    unlabeled: &unlabeled,
                    labeled: &labeled,
                    graph: &graph,
                    thresholds: &thresholds,
                    provider: &provider,
                    config: &config.acquisition,
                    entropy_aggregation: config.entropy_aggregation,
                    seed: round_seed(seed, round, strategy.name()),
                };
                baselines::select(strategy, &inputs, k)?.ids
            };
            selections = ids
                .iter()
                .map(|id| {
                    let s = pool.sample(id).expect("selected from pool");
                    let path = graph.assign(&s.embedding, config.acquisition.similarity)?;
                    let ind = rarity_indicators(&path, &graph, &thresholds)?;
                    Ok(SelectionReport {
                        id: id.clone(),
                        score: None,
                        rationale: vec![RationaleEntry::new(id, &graph, &path, &ind)],
                        breakdown: None,
                    })
                })
                .collect::<Result<_>>()?;
        } else {
            let labeled = pool.labeled();
            let inputs = RoundInputs {
                unlabeled: &unlabeled,
                labeled: &labeled,
                graph: &graph,
                thresholds: &thresholds,
                provider: &provider,
                config: &config.acquisition,
                entropy_aggregation: config.entropy_aggregation,
                seed: round_seed(seed, round, strategy.name()),
            };
            let sel = baselines::select(strategy, &inputs, k)?;
            selections = sel
                .breakdowns
                .iter()
                .map(|b| {
                    let s = pool.sample(&b.sample_id).expect("selected from pool");
                    let path = graph.assign(&s.embedding, config.acquisition.similarity)?;
                    let ind = rarity_indicators(&path, &graph, &thresholds)?;
                    Ok(SelectionReport::from_breakdown(&graph, b, (&path, &ind)))
                })
                .collect::<Result<_>>()?;
            ids = sel.ids;
        }
        drop(unlabeled);

        for (_, fine) in world.oracle_annotate(&mut pool, &ids)? {
            let path = graph.ancestors(&fine)?;
            graph.increment_coverage(&path)?;
        }

        let report = RoundReport {
            strategy,
            seed,
            round,
            budget,
            labeled: pool.labeled_count(),
            pool_size: n,
            cold_start,
            percentile: config.percentile,
            thresholds,
            selections,
            coverage: CoverageHistogram::of(&graph),
            rare_coverage: world.rare_coverage(&pool),
            rare_total,
            anomalies_retrieved: world.anomalies_retrieved(&pool),
        };
        let checkpoint = Checkpoint {
            strategy,
            seed,
            completed_rounds: round + 1,
            labeled_ids: pool.labeled_ids(),
            counts: graph.count_map().into_iter().collect::<BTreeMap<_, _>>(),
            next_round: round + 1,
        };
        observer.on_round(&report, &checkpoint)?;
        rounds.push(report);
    }
    Ok(RunResult { strategy, seed, rounds })
}

/// Every (strategy, seed) pair; pools are generated once per seed.
pub fn run_experiment(config: &ExperimentConfig, observer: &dyn RoundObserver) -> Result<Vec<RunResult>> {
    run_experiment_resuming(config, observer, &HashMap::new())
}

/// As [`run_experiment`], continuing any run that has a checkpoint.
pub fn run_experiment_resuming(
    config: &ExperimentConfig,
    observer: &dyn RoundObserver,
    checkpoints: &HashMap<(StrategyKind, u64), Checkpoint>,
) -> Result<Vec<RunResult>> {
    config.validate()?;
    let worlds = exec::map_indexed(&config.seeds, config.runs_execution, |_, &seed| {
        generate_pool(&config.spec_for_seed(seed))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let pairs: Vec<(usize, StrategyKind)> = (0..worlds.len())
        .flat_map(|w| config.strategies.iter().map(move |&s| (w, s)))
        .collect();
    let mut results = exec::map_indexed(&pairs, config.runs_execution, |_, &(w, strategy)| {
        let cp = checkpoints.get(&(strategy, worlds[w].spec.seed));
        run_single(&worlds[w], strategy, config, observer, cp)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    results.sort_by_key(|r| (r.strategy, r.seed));
    Ok(results)
}
