//! Reconstruction-based generative difficulty.
//!
//! A reconstruction trajectory is an item's latent `z` plus `T` stochastic
//! reconstructions of it. Two statistics are taken around the reconstruction
//! mean `z̄`: the reconstruction error `‖z − z̄‖²` and the spread
//! `(1/T) Σ ‖ẑₜ − z̄‖²`. Image and proposal difficulty are the same weighted
//! sum of the two.
//!
//! Trajectories come from a [`DifficultyProvider`]: either the
//! [`SyntheticProvider`] used in simulation or a [`FileProvider`] holding
//! externally computed values.

use std::collections::HashMap;
use std::io::{BufRead, Read};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{GsalError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructionTrajectory {
    original: Vec<f64>,
    reconstructions: Vec<Vec<f64>>,
}

impl ReconstructionTrajectory {
    pub fn new(original: Vec<f64>, reconstructions: Vec<Vec<f64>>) -> Result<Self> {
        if reconstructions.is_empty() {
            return Err(GsalError::InvalidTrajectory("at least one reconstruction is required".into()));
        }
        let d = original.len();
        if let Some((t, r)) = reconstructions.iter().enumerate().find(|(_, r)| r.len() != d) {
            return Err(GsalError::InvalidTrajectory(format!(
                "reconstruction {t} has dimension {}, latent has {d}",
                r.len()
            )));
        }
        let finite = original.iter().chain(reconstructions.iter().flatten()).all(|x| x.is_finite());
        if !finite {
            return Err(GsalError::InvalidTrajectory("non-finite latent value".into()));
        }
        Ok(Self {
            original,
            reconstructions,
        })
    }

    pub fn original(&self) -> &[f64] {
        &self.original
    }

    pub fn reconstructions(&self) -> &[Vec<f64>] {
        &self.reconstructions
    }

    pub fn len(&self) -> usize {
        self.reconstructions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn mean_reconstruction(&self) -> Vec<f64> {
        let t = self.reconstructions.len() as f64;
        let mut mean = vec![0.0; self.original.len()];
        for r in &self.reconstructions {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x;
            }
        }
        mean.iter_mut().for_each(|m| *m /= t);
        mean
    }

    pub fn terms(&self) -> ReconTerms {
        let mean = self.mean_reconstruction();
        ReconTerms {
            r: squared_distance(&self.original, &mean),
            v: spread_around(&self.reconstructions, &mean),
        }
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn spread_around(recons: &[Vec<f64>], mean: &[f64]) -> f64 {
    recons.iter().map(|r| squared_distance(r, mean)).sum::<f64>() / recons.len() as f64
}

pub fn reconstruction_error(traj: &ReconstructionTrajectory) -> f64 {
    squared_distance(&traj.original, &traj.mean_reconstruction())
}

pub fn denoising_variance(traj: &ReconstructionTrajectory) -> f64 {
    spread_around(&traj.reconstructions, &traj.mean_reconstruction())
}

/// Reconstruction error `r` and denoising variance `v` of one item.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReconTerms {
    pub r: f64,
    pub v: f64,
}

impl ReconTerms {
    pub fn new(r: f64, v: f64) -> Result<Self> {
        if !(r.is_finite() && v.is_finite() && r >= 0.0 && v >= 0.0) {
            return Err(GsalError::param("R/V", format!("must be finite and nonnegative, got ({r}, {v})")));
        }
        Ok(Self { r, v })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerativeWeights {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for GenerativeWeights {
    fn default() -> Self {
        Self { alpha: 1.0, beta: 1.0 }
    }
}

impl GenerativeWeights {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let w = Self { alpha, beta };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.alpha) || !ok(self.beta) {
            return Err(GsalError::param("alpha/beta", "must be finite and nonnegative"));
        }
        if self.alpha == 0.0 && self.beta == 0.0 {
            return Err(GsalError::param("alpha/beta", "must not both be zero"));
        }
        Ok(())
    }

    pub fn difficulty(&self, terms: ReconTerms) -> f64 {
        self.alpha * terms.r + self.beta * terms.v
    }
}

pub fn generative_difficulty(traj: &ReconstructionTrajectory, w: GenerativeWeights) -> f64 {
    w.difficulty(traj.terms())
}

/// Source of reconstruction statistics for images and proposal crops.
pub trait DifficultyProvider: Sync {
    fn terms(&self, item_id: &str, latent: &[f64]) -> Result<ReconTerms>;
}

/// Stable 64-bit seed derived from a run seed and an item id.
pub fn item_seed(seed: u64, item_id: &str) -> u64 {
    // FNV-1a over the id, then a splitmix64 finalizer
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in item_id.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix(h ^ splitmix(seed))
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticModel {
    /// Length of the bias vector at atypicality 1.
    pub bias_scale: f64,
    /// Per-coordinate noise standard deviation at atypicality 1.
    pub noise_scale: f64,
}

impl Default for SyntheticModel {
    fn default() -> Self {
        Self {
            bias_scale: 1.0,
            noise_scale: 0.5,
        }
    }
}

/// Draws `t` reconstructions `z + a·b·u + a·s·ε` with `u = 1/√d` and `ε ~ N(0, I)`.
pub fn synthetic_trajectory(
    latent: &[f64],
    atypicality: f64,
    t: usize,
    seed: u64,
    model: SyntheticModel,
) -> Result<ReconstructionTrajectory> {
    if t == 0 {
        return Err(GsalError::InvalidTrajectory("at least one reconstruction is required".into()));
    }
    if !(0.0..=1.0).contains(&atypicality) {
        return Err(GsalError::param("atypicality", format!("{atypicality} is outside [0, 1]")));
    }
    let d = latent.len();
    let bias = atypicality * model.bias_scale / (d.max(1) as f64).sqrt();
    let sd = atypicality * model.noise_scale;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let recons = (0..t)
        .map(|_| {
            latent
                .iter()
                .map(|&z| {
                    let e: f64 = StandardNormal.sample(&mut rng);
                    z + bias + sd * e
                })
                .collect()
        })
        .collect();
    ReconstructionTrajectory::new(latent.to_vec(), recons)
}

/// Simulation stand-in for a latent diffusion model.
///
/// Each item's trajectory is a pure function of its atypicality, the
/// provider seed and the item id.
#[derive(Debug, Clone)]
pub struct SyntheticProvider {
    atypicality: HashMap<String, f64>,
    reconstructions: usize,
    seed: u64,
    model: SyntheticModel,
}

impl SyntheticProvider {
    pub fn new(reconstructions: usize, seed: u64, model: SyntheticModel) -> Self {
        Self {
            atypicality: HashMap::new(),
            reconstructions,
            seed,
            model,
        }
    }

    pub fn insert(&mut self, item_id: impl Into<String>, atypicality: f64) {
        self.atypicality.insert(item_id.into(), atypicality);
    }

    pub fn reconstructions(&self) -> usize {
        self.reconstructions
    }

    pub fn trajectory(&self, item_id: &str, latent: &[f64]) -> Result<ReconstructionTrajectory> {
        let a = *self.atypicality.get(item_id).ok_or_else(|| GsalError::ProviderMiss {
            ids: vec![item_id.to_string()],
        })?;
        synthetic_trajectory(latent, a, self.reconstructions, item_seed(self.seed, item_id), self.model)
    }
}

impl DifficultyProvider for SyntheticProvider {
    fn terms(&self, item_id: &str, latent: &[f64]) -> Result<ReconTerms> {
        Ok(self.trajectory(item_id, latent)?.terms())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScoreEntry {
    Terms(ReconTerms),
    Trajectory(ReconstructionTrajectory),
}

impl ScoreEntry {
    pub fn terms(&self) -> ReconTerms {
        match self {
            ScoreEntry::Terms(t) => *t,
            ScoreEntry::Trajectory(traj) => traj.terms(),
        }
    }
}

/// Precomputed scores keyed by item id.
#[derive(Debug, Clone, Default)]
pub struct FileProvider {
    entries: HashMap<String, ScoreEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrajectoryRecord {
    id: String,
    z: Vec<f64>,
    recon: Vec<Vec<f64>>,
}

impl FileProvider {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ScoreEntry> {
        self.entries.get(id)
    }

    pub fn lookup(&self, id: &str) -> Option<ReconTerms> {
        self.entries.get(id).map(ScoreEntry::terms)
    }

    /// Adds an entry; `row` is used in the duplicate-id error.
    pub fn insert(&mut self, id: String, entry: ScoreEntry, row: usize) -> Result<()> {
        if self.entries.contains_key(&id) {
            return Err(GsalError::ScoreRow {
                row,
                reason: format!("duplicate id `{id}`"),
            });
        }
        self.entries.insert(id, entry);
        Ok(())
    }

    /// Moves every entry of `other` in; an id present in both is an error.
    pub fn merge(&mut self, other: FileProvider) -> Result<()> {
        let mut entries: Vec<_> = other.entries.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for (id, entry) in entries {
            if self.entries.contains_key(&id) {
                return Err(GsalError::param("scores", format!("`{id}` is scored both inline and in the score file")));
            }
            self.entries.insert(id, entry);
        }
        Ok(())
    }

    /// Ids from `ids` that have no entry.
    pub fn missing<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Vec<String> {
        ids.into_iter()
            .filter(|id| !self.entries.contains_key(*id))
            .map(str::to_string)
            .collect()
    }

    /// Reads `id,R,V` rows. Row numbers in errors are file line numbers.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut out = Self::new();
        let headers = rdr.headers()?.clone();
        if headers.is_empty() {
            log::warn!("score file is empty");
            return Ok(out);
        }
        let cols: Vec<&str> = headers.iter().collect();
        if cols != ["id", "R", "V"] {
            return Err(GsalError::ScoreRow {
                row: 1,
                reason: format!("expected header `id,R,V`, found `{}`", cols.join(",")),
            });
        }
        for record in rdr.records() {
            let record = record?;
            let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
            let bad = |reason: String| GsalError::ScoreRow { row, reason };
            if record.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", record.len())));
            }
            let parse = |i: usize, name: &str| -> Result<f64> {
                let v: f64 = record[i]
                    .parse()
                    .map_err(|_| bad(format!("{name} `{}` is not a number", &record[i])))?;
                if !v.is_finite() || v < 0.0 {
                    return Err(bad(format!("{name} must be finite and nonnegative, got {v}")));
                }
                Ok(v)
            };
            let id = record[0].to_string();
            if id.is_empty() {
                return Err(bad("empty id".into()));
            }
            let terms = ReconTerms {
                r: parse(1, "R")?,
                v: parse(2, "V")?,
            };
            out.insert(id, ScoreEntry::Terms(terms), row)?;
        }
        if out.is_empty() {
            log::warn!("score file has no rows");
        }
        Ok(out)
    }

    /// Reads JSON Lines `{id, z, recon}` trajectory records.
    pub fn from_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut out = Self::new();
        for (i, line) in reader.lines().enumerate() {
            let row = i + 1;
            let line = line.map_err(|e| GsalError::ScoreRow {
                row,
                reason: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TrajectoryRecord = serde_json::from_str(&line).map_err(|e| GsalError::ScoreRow {
                row,
                reason: e.to_string(),
            })?;
            let traj = ReconstructionTrajectory::new(rec.z, rec.recon).map_err(|e| GsalError::ScoreRow {
                row,
                reason: e.to_string(),
            })?;
            out.insert(rec.id, ScoreEntry::Trajectory(traj), row)?;
        }
        if out.is_empty() {
            log::warn!("trajectory file has no records");
        }
        Ok(out)
    }
}

impl DifficultyProvider for FileProvider {
    fn terms(&self, item_id: &str, _latent: &[f64]) -> Result<ReconTerms> {
        self.lookup(item_id).ok_or_else(|| GsalError::ProviderMiss {
            ids: vec![item_id.to_string()],
        })
    }
}
