//! Per-level rarity thresholds and the symbolic coverage bonus.

use serde::{Deserialize, Serialize};

use crate::concept_graph::{ConceptGraph, ConceptPath, Level};
use crate::error::{GsalError, Result};

/// Added to a zero-valued threshold so uncovered concepts still count as rare.
pub const THRESHOLD_EPSILON: f64 = 1e-6;

pub const DEFAULT_PERCENTILE: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RarityThresholds {
    pub tau_fine: f64,
    pub tau_coarse: f64,
    pub tau_abstract: f64,
}

impl RarityThresholds {
    pub fn get(&self, level: Level) -> f64 {
        match level {
            Level::Fine => self.tau_fine,
            Level::Coarse => self.tau_coarse,
            Level::Abstract => self.tau_abstract,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BonusWeights {
    pub lambda_abstract: f64,
}

impl Default for BonusWeights {
    fn default() -> Self {
        Self { lambda_abstract: 1.0 }
    }
}

impl BonusWeights {
    pub fn validate(&self) -> Result<()> {
        if !self.lambda_abstract.is_finite() || self.lambda_abstract < 0.0 {
            return Err(GsalError::param("lambda_abstract", "must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Linear interpolation between closest ranks, `h = p/100 · (n − 1)`.
pub fn percentile(values: &[f64], p: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(GsalError::EmptyInput);
    }
    if !(p > 0.0 && p < 100.0) {
        return Err(GsalError::param("percentile", format!("{p} is outside (0, 100)")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = p / 100.0 * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

/// Threshold for one level's coverage counts.
///
/// When the percentile lands on a minimum count of zero it is raised by
/// [`THRESHOLD_EPSILON`], so zero-coverage nodes satisfy the strict `<`.
pub fn level_threshold(counts: &[u64], p: f64) -> Result<f64> {
    let values: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let tau = percentile(&values, p)?;
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 && tau <= min {
        Ok(min + THRESHOLD_EPSILON)
    } else {
        Ok(tau)
    }
}

pub fn compute_thresholds(graph: &ConceptGraph, p: f64) -> Result<RarityThresholds> {
    let tau = |level: Level| {
        let counts = graph.counts_at(level);
        if counts.is_empty() {
            return Err(GsalError::EmptyLevel(level.name()));
        }
        level_threshold(&counts, p)
    };
    Ok(RarityThresholds {
        tau_fine: tau(Level::Fine)?,
        tau_coarse: tau(Level::Coarse)?,
        tau_abstract: tau(Level::Abstract)?,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RarityIndicators {
    pub fine: bool,
    pub coarse: bool,
    pub abstracts: Vec<bool>,
}

impl RarityIndicators {
    pub fn any(&self) -> bool {
        self.fine || self.coarse || self.abstracts.iter().any(|&a| a)
    }
}

pub fn rarity_indicators(
    path: &ConceptPath,
    graph: &ConceptGraph,
    tau: &RarityThresholds,
) -> Result<RarityIndicators> {
    let count = |id: crate::concept_graph::NodeId, level: Level| -> Result<f64> {
        let node = graph
            .nodes()
            .get(id.index())
            .ok_or_else(|| GsalError::UnknownNode(format!("#{}", id.index())))?;
        if node.level() != level {
            return Err(GsalError::WrongLevel {
                id: node.id().to_string(),
                expected: level.name(),
                actual: node.level().name(),
            });
        }
        Ok(node.coverage_count() as f64)
    };
    Ok(RarityIndicators {
        fine: count(path.fine, Level::Fine)? < tau.tau_fine,
        coarse: count(path.coarse, Level::Coarse)? < tau.tau_coarse,
        abstracts: path
            .abstracts
            .iter()
            .map(|&a| Ok(count(a, Level::Abstract)? < tau.tau_abstract))
            .collect::<Result<_>>()?,
    })
}

pub fn symbolic_bonus(ind: &RarityIndicators, w: BonusWeights) -> f64 {
    let fired = ind.abstracts.iter().filter(|&&a| a).count() as f64;
    f64::from(u8::from(ind.fine)) + f64::from(u8::from(ind.coarse)) + w.lambda_abstract * fired
}
