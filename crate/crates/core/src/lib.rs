//! Active learning acquisition that ranks unlabeled images by generative
//! difficulty fused with a rarity bonus from a three-level concept graph.
//!
//! The pipeline per round:
//! 1. assign images and proposals to fine concepts and their ancestors
//! 2. flag rare nodes from labeled-coverage percentiles
//! 3. score reconstruction error plus denoising variance
//! 4. normalize, pool proposals with a generalized mean, select top-k

pub mod baselines;
pub mod cli;
pub mod concept_graph;
pub mod config;
pub mod error;
pub mod exec;
pub mod fusion;
pub mod generative;
pub mod pool;
pub mod rarity;
pub mod report;
pub mod simulator;

pub use baselines::{EntropyAggregation, StrategyKind};
pub use concept_graph::{ConceptGraph, ConceptPath, Level, NodeId, Similarity};
pub use error::{GsalError, Result};
pub use exec::Execution;
pub use fusion::{score_round, select_batch, AcquisitionConfig, FusionConfig, ScoreBreakdown};
pub use generative::{DifficultyProvider, FileProvider, ReconTerms, SyntheticModel, SyntheticProvider};
pub use pool::{PoolState, Proposal, Sample};
pub use rarity::{compute_thresholds, BonusWeights, RarityThresholds};
pub use simulator::{generate_pool, run_experiment, ExperimentConfig, PoolSpec, SimulatedWorld};
