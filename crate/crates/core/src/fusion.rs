//! Round-level normalization, proposal pooling, score fusion and top-k selection.
//!
//! [`score_round`] runs in two phases. [`raw_terms`] computes every
//! per-sample and per-proposal quantity independently (parallel over
//! samples). [`fuse_round`] then z-scores each term across the whole round,
//! pools proposals and fuses the result. No raw term changes after the first
//! phase returns.

use serde::{Deserialize, Serialize};

use crate::concept_graph::{ConceptGraph, ConceptPath, Similarity};
use crate::error::{GsalError, Result};
use crate::exec::{self, Execution};
use crate::generative::{DifficultyProvider, GenerativeWeights, ReconTerms};
use crate::pool::Sample;
use crate::rarity::{rarity_indicators, symbolic_bonus, BonusWeights, RarityIndicators, RarityThresholds};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FusionConfig {
    /// Generalized-mean exponent, ≥ 1.
    pub rho: f64,
    /// Weight of image-level difficulty against pooled proposals, in [0, 1].
    pub gamma: f64,
    /// Weight of the image-level bonus in the final score.
    pub eta: f64,
    /// Weight of the proposal bonus inside the pool.
    pub lambda_fusion: f64,
    pub epsilon_norm: f64,
    /// Batch size for one-shot scoring.
    pub k: usize,
    /// Proposals kept per image, by detector confidence.
    pub prefilter: usize,
    pub bonus_in_pool: bool,
    pub bonus_in_final: bool,
    /// When false, generative terms are zeroed and only the bonus ranks.
    pub use_generative: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            rho: 2.0,
            gamma: 0.5,
            eta: 0.5,
            lambda_fusion: 1.0,
            epsilon_norm: 1e-8,
            k: 20,
            prefilter: 32,
            bonus_in_pool: true,
            bonus_in_final: true,
            use_generative: true,
        }
    }
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho.is_finite() && self.rho >= 1.0) {
            return Err(GsalError::param("rho", format!("must be ≥ 1, got {}", self.rho)));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(GsalError::param("gamma", format!("must lie in [0, 1], got {}", self.gamma)));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(GsalError::param("eta", "must be finite and nonnegative"));
        }
        if !(self.lambda_fusion.is_finite() && self.lambda_fusion >= 0.0) {
            return Err(GsalError::param("lambda_fusion", "must be finite and nonnegative"));
        }
        if !(self.epsilon_norm.is_finite() && self.epsilon_norm > 0.0) {
            return Err(GsalError::param("epsilon_norm", "must be positive"));
        }
        if self.prefilter == 0 {
            return Err(GsalError::param("prefilter", "must keep at least one proposal"));
        }
        Ok(())
    }
}

/// Everything one round of scoring needs besides the pool and graph.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcquisitionConfig {
    pub fusion: FusionConfig,
    pub bonus: BonusWeights,
    pub generative: GenerativeWeights,
    pub similarity: Similarity,
    pub execution: Execution,
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        self.fusion.validate()?;
        self.bonus.validate()?;
        self.generative.validate()
    }
}

/// `(x − μ) / (σ + ε)` with the population standard deviation.
pub fn zscore_normalize(values: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if values.is_empty() {
        return Err(GsalError::EmptyInput);
    }
    if !(epsilon > 0.0) {
        return Err(GsalError::param("epsilon", "must be positive"));
    }
    // exact zeros for constant input; the mean of equal values can round away from them
    if values.iter().all(|&x| x == values[0]) {
        return Ok(vec![0.0; values.len()]);
    }
    let n = values.len() as f64;
    let rough = values.iter().sum::<f64>() / n;
    let mean = rough + values.iter().map(|x| x - rough).sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let denom = var.sqrt() + epsilon;
    Ok(values.iter().map(|x| (x - mean) / denom).collect())
}

/// Power mean `((1/N) Σ xᵢ^ρ)^(1/ρ)` of nonnegative values.
pub fn generalized_mean(values: &[f64], rho: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(GsalError::EmptyInput);
    }
    if !(rho.is_finite() && rho >= 1.0) {
        return Err(GsalError::param("rho", format!("must be ≥ 1, got {rho}")));
    }
    if let Some(x) = values.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(GsalError::param("pool", format!("values must be finite and nonnegative, got {x}")));
    }
    let n = values.len() as f64;
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let m = if rho == 1.0 {
        values.iter().sum::<f64>() / n
    } else {
        (values.iter().map(|x| x.powf(rho)).sum::<f64>() / n).powf(rho.recip())
    };
    // rounding in powf can step just outside the data range
    Ok(m.clamp(lo, hi))
}

/// Pools normalized proposal terms `(Ũ, B̃)` as the power mean of `Ũ + λ·B̃`.
///
/// Returns `None` for an image without proposals.
pub fn pool_proposals(proposals: &[(f64, f64)], rho: f64, lambda_fusion: f64) -> Result<Option<f64>> {
    if proposals.is_empty() {
        return Ok(None);
    }
    let combined: Vec<f64> = proposals.iter().map(|(u, b)| u + lambda_fusion * b).collect();
    generalized_mean(&combined, rho).map(Some)
}

pub fn fuse_image_score(s_prop: f64, u_img_norm: f64, gamma: f64) -> f64 {
    (1.0 - gamma) * s_prop + gamma * u_img_norm
}

pub fn final_score(u_g: f64, bonus_norm: f64, eta: f64) -> f64 {
    u_g + eta * bonus_norm
}

/// The `k` highest-scoring ids, by descending score then ascending id.
pub fn select_batch<S: AsRef<str>>(scores: &[(S, f64)], k: usize) -> Result<Vec<String>> {
    if k > scores.len() {
        return Err(GsalError::BatchTooLarge { k, pool: scores.len() });
    }
    if let Some((id, s)) = scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(GsalError::param("scores", format!("score of `{}` is {s}", id.as_ref())));
    }
    let mut order: Vec<&(S, f64)> = scores.iter().collect();
    order.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.as_ref().cmp(b.0.as_ref())));
    Ok(order.into_iter().take(k).map(|(id, _)| id.as_ref().to_string()).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawProposal {
    pub id: String,
    pub terms: ReconTerms,
    pub u_prop: f64,
    pub bonus: f64,
    pub path: ConceptPath,
    pub indicators: RarityIndicators,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawSample {
    pub id: String,
    pub terms: ReconTerms,
    pub u_img: f64,
    pub proposals: Vec<RawProposal>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProposalScore {
    pub id: String,
    pub r: f64,
    pub v: f64,
    pub u_prop: f64,
    pub bonus: f64,
    pub u_prop_norm: f64,
    pub bonus_norm: f64,
    /// `Ũ + λ·B̃` before the round shift.
    pub combined: f64,
    pub path: ConceptPath,
    pub indicators: RarityIndicators,
}

/// Every intermediate quantity behind one sample's acquisition score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreBreakdown {
    pub sample_id: String,
    pub r_img: f64,
    pub v_img: f64,
    pub u_img: f64,
    pub u_img_norm: f64,
    pub proposals: Vec<ProposalScore>,
    /// Pooled proposal score; `None` without proposals.
    pub s_prop: Option<f64>,
    pub u_g: f64,
    /// Pooled image-level bonus before normalization.
    pub bonus_img: f64,
    pub bonus_img_norm: f64,
    pub final_score: f64,
}

impl ScoreBreakdown {
    /// Concept paths with their rarity flags, one per retained proposal.
    pub fn rationale(&self) -> impl Iterator<Item = (&ConceptPath, &RarityIndicators)> {
        self.proposals.iter().map(|p| (&p.path, &p.indicators))
    }
}

/// Phase one: per-sample generative terms, concept assignment and bonuses.
///
/// Provider misses are collected across the whole pool before failing.
pub fn raw_terms(
    samples: &[&Sample],
    graph: &ConceptGraph,
    thresholds: &RarityThresholds,
    provider: &dyn DifficultyProvider,
    cfg: &AcquisitionConfig,
) -> Result<Vec<RawSample>> {
    let per_sample = |_: usize, s: &&Sample| -> std::result::Result<RawSample, GsalError> {
        let mut missing = Vec::new();
        let mut first_err = None;
        let mut terms_of = |id: &str, latent: &[f64]| match provider.terms(id, latent) {
            Ok(t) => Some(t),
            Err(GsalError::ProviderMiss { ids }) => {
                missing.extend(ids);
                None
            }
            Err(e) => {
                first_err.get_or_insert(e);
                None
            }
        };
        let img = terms_of(&s.id, &s.latent);
        let mut proposals = Vec::new();
        let mut prop_terms = Vec::new();
        for p in s.top_proposals(cfg.fusion.prefilter) {
            prop_terms.push((p, terms_of(&p.id, &p.latent)));
        }
        if let Some(e) = first_err {
            return Err(e);
        }
        if !missing.is_empty() {
            return Err(GsalError::ProviderMiss { ids: missing });
        }
        for (p, t) in prop_terms {
            let terms = t.expect("misses handled above");
            let path = graph.assign(&p.embedding, cfg.similarity)?;
            let indicators = rarity_indicators(&path, graph, thresholds)?;
            proposals.push(RawProposal {
                id: p.id.clone(),
                terms,
                u_prop: cfg.generative.difficulty(terms),
                bonus: symbolic_bonus(&indicators, cfg.bonus),
                path,
                indicators,
            });
        }
        let terms = img.expect("misses handled above");
        Ok(RawSample {
            id: s.id.clone(),
            terms,
            u_img: cfg.generative.difficulty(terms),
            proposals,
        })
    };
    exec::try_map_indexed(samples, cfg.execution, per_sample).map_err(|errs| {
        let mut ids = Vec::new();
        for e in errs {
            match e {
                GsalError::ProviderMiss { ids: more } => ids.extend(more),
                other => return other,
            }
        }
        GsalError::ProviderMiss { ids }
    })
}

/// Phase two: round-level normalization, pooling and fusion.
pub fn fuse_round(raw: &[RawSample], cfg: &AcquisitionConfig) -> Result<Vec<ScoreBreakdown>> {
    cfg.validate()?;
    if raw.is_empty() {
        return Err(GsalError::EmptyInput);
    }
    let f = &cfg.fusion;
    let eps = f.epsilon_norm;
    let gen_weight = if f.use_generative { 1.0 } else { 0.0 };
    let bonus_weight = if f.bonus_in_pool { f.lambda_fusion } else { 0.0 };

    let u_img_norm = zscore_normalize(&raw.iter().map(|s| s.u_img).collect::<Vec<_>>(), eps)?;

    let flat: Vec<&RawProposal> = raw.iter().flat_map(|s| &s.proposals).collect();
    let (u_prop_norm, bonus_norm) = if flat.is_empty() {
        (Vec::new(), Vec::new())
    } else {
        (
            zscore_normalize(&flat.iter().map(|p| p.u_prop).collect::<Vec<_>>(), eps)?,
            zscore_normalize(&flat.iter().map(|p| p.bonus).collect::<Vec<_>>(), eps)?,
        )
    };
    let combined: Vec<f64> = u_prop_norm
        .iter()
        .zip(&bonus_norm)
        .map(|(u, b)| gen_weight * u + bonus_weight * b)
        .collect();
    // one shift for the whole round keeps every pooled base nonnegative
    let shift = combined.iter().copied().fold(f64::INFINITY, f64::min);
    let bonus_shift = bonus_norm.iter().copied().fold(f64::INFINITY, f64::min);

    let mut offsets = Vec::with_capacity(raw.len());
    let mut at = 0;
    for s in raw {
        offsets.push(at);
        at += s.proposals.len();
    }

    let pooled = exec::map_indexed(raw, cfg.execution, |i, s| -> Result<(Option<f64>, Option<f64>)> {
        let range = offsets[i]..offsets[i] + s.proposals.len();
        if range.is_empty() {
            return Ok((None, None));
        }
        let shifted: Vec<f64> = combined[range.clone()].iter().map(|c| (c - shift).max(0.0)).collect();
        let bonuses: Vec<f64> = bonus_norm[range].iter().map(|b| (b - bonus_shift).max(0.0)).collect();
        Ok((
            Some(generalized_mean(&shifted, f.rho)?),
            Some(generalized_mean(&bonuses, f.rho)?),
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let with_props: Vec<f64> = pooled.iter().filter_map(|(_, b)| *b).collect();
    let bonus_img_norm_vals = if with_props.is_empty() {
        Vec::new()
    } else {
        zscore_normalize(&with_props, eps)?
    };
    let mut next_bonus = bonus_img_norm_vals.into_iter();

    let mut out = Vec::with_capacity(raw.len());
    for (i, s) in raw.iter().enumerate() {
        let (s_prop, bonus_img) = pooled[i];
        let u_img_n = gen_weight * u_img_norm[i];
        let u_g = match s_prop {
            Some(sp) => fuse_image_score(sp, u_img_n, f.gamma),
            None => u_img_n,
        };
        let bonus_img_norm = if bonus_img.is_some() {
            next_bonus.next().expect("one normalized bonus per sample with proposals")
        } else {
            0.0
        };
        let eta = if f.bonus_in_final { f.eta } else { 0.0 };
        let final_score = final_score(u_g, bonus_img_norm, eta);
        let base = offsets[i];
        let proposals = s
            .proposals
            .iter()
            .enumerate()
            .map(|(j, p)| ProposalScore {
                id: p.id.clone(),
                r: p.terms.r,
                v: p.terms.v,
                u_prop: p.u_prop,
                bonus: p.bonus,
                u_prop_norm: u_prop_norm[base + j],
                bonus_norm: bonus_norm[base + j],
                combined: combined[base + j],
                path: p.path.clone(),
                indicators: p.indicators.clone(),
            })
            .collect();
        out.push(ScoreBreakdown {
            sample_id: s.id.clone(),
            r_img: s.terms.r,
            v_img: s.terms.v,
            u_img: s.u_img,
            u_img_norm: u_img_norm[i],
            proposals,
            s_prop,
            u_g,
            bonus_img: bonus_img.unwrap_or(0.0),
            bonus_img_norm,
            final_score,
        });
    }
    Ok(out)
}

/// Scores every sample in `samples` for one acquisition round.
pub fn score_round(
    samples: &[&Sample],
    graph: &ConceptGraph,
    thresholds: &RarityThresholds,
    provider: &dyn DifficultyProvider,
    cfg: &AcquisitionConfig,
) -> Result<Vec<ScoreBreakdown>> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(GsalError::EmptyInput);
    }
    let raw = raw_terms(samples, graph, thresholds, provider, cfg)?;
    fuse_round(&raw, cfg)
}

/// Top-k over a round's breakdowns.
pub fn select_from_breakdowns(breakdowns: &[ScoreBreakdown], k: usize) -> Result<Vec<String>> {
    let scores: Vec<(&str, f64)> = breakdowns
        .iter()
        .map(|b| (b.sample_id.as_str(), b.final_score))
        .collect();
    select_batch(&scores, k)
}
