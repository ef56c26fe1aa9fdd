//! Strategy-facing pool types.
//!
//! Nothing in here carries ground truth; the simulator keeps that on its side.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{GsalError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Proposal {
    pub id: String,
    pub parent: String,
    pub latent: Vec<f64>,
    pub embedding: Vec<f64>,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub latent: Vec<f64>,
    pub embedding: Vec<f64>,
    pub proposals: Vec<Proposal>,
}

impl Sample {
    /// The `m` most confident proposals, ties broken by id.
    pub fn top_proposals(&self, m: usize) -> Vec<&Proposal> {
        let mut props: Vec<&Proposal> = self.proposals.iter().collect();
        if props.len() > m {
            props.sort_by(|a, b| b.confidence.total_cmp(&a.confidence).then_with(|| a.id.cmp(&b.id)));
            props.truncate(m);
        }
        props
    }
}

/// Labeled/unlabeled partition over a fixed sample list.
#[derive(Debug, Clone)]
pub struct PoolState {
    samples: Vec<Sample>,
    index: HashMap<String, usize>,
    labeled: Vec<bool>,
    pub round: usize,
    pub seed: u64,
}

impl PoolState {
    pub fn new(samples: Vec<Sample>, seed: u64) -> Result<Self> {
        let mut index = HashMap::with_capacity(samples.len());
        for (i, s) in samples.iter().enumerate() {
            if index.insert(s.id.clone(), i).is_some() {
                return Err(GsalError::InvalidParameter {
                    name: "pool",
                    reason: format!("duplicate sample id `{}`", s.id),
                });
            }
            for p in &s.proposals {
                if !(0.0..=1.0).contains(&p.confidence) {
                    return Err(GsalError::ConfidenceRange {
                        id: p.id.clone(),
                        value: p.confidence,
                    });
                }
            }
        }
        let labeled = vec![false; samples.len()];
        Ok(Self {
            samples,
            index,
            labeled,
            round: 0,
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn sample(&self, id: &str) -> Option<&Sample> {
        self.index_of(id).map(|i| &self.samples[i])
    }

    pub fn is_labeled(&self, idx: usize) -> bool {
        self.labeled[idx]
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled.iter().filter(|&&l| l).count()
    }

    pub fn unlabeled_count(&self) -> usize {
        self.len() - self.labeled_count()
    }

    pub fn unlabeled(&self) -> Vec<&Sample> {
        self.samples
            .iter()
            .zip(&self.labeled)
            .filter(|(_, &l)| !l)
            .map(|(s, _)| s)
            .collect()
    }

    pub fn labeled(&self) -> Vec<&Sample> {
        self.samples
            .iter()
            .zip(&self.labeled)
            .filter(|(_, &l)| l)
            .map(|(s, _)| s)
            .collect()
    }

    pub fn labeled_ids(&self) -> Vec<String> {
        self.labeled().into_iter().map(|s| s.id.clone()).collect()
    }

    /// Marks every id labeled; fails without changes if any is unknown or
    /// already labeled.
    pub fn mark_labeled<S: AsRef<str>>(&mut self, ids: &[S]) -> Result<Vec<usize>> {
        let mut idx = Vec::with_capacity(ids.len());
        for id in ids {
            let id = id.as_ref();
            let i = self.index_of(id).ok_or_else(|| GsalError::UnknownSample(id.to_string()))?;
            if self.labeled[i] || idx.contains(&i) {
                return Err(GsalError::AlreadyLabeled(id.to_string()));
            }
            idx.push(i);
        }
        for &i in &idx {
            self.labeled[i] = true;
        }
        Ok(idx)
    }
}
