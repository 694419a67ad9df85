//! Multi-relational knowledge-graph embeddings in the Poincaré ball (MuRP)
//! and in Euclidean space (MuRE).
//!
//! - [`geometry`]: Poincaré ball operations (Möbius addition, exp/log maps,
//!   distance, Riemannian gradient rescaling).
//! - [`model`]: score functions and their analytic gradients.
//! - [`trainer`]: reciprocal augmentation, negative sampling, SGD/RSGD.
//! - [`evaluator`]: filtered MRR and hits@k.
//! - [`dataset`]: triple files, hierarchy analytics, subset construction.
//! - [`checkpoint`]: the binary model file format.

pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod evaluator;
pub mod geometry;
pub mod model;
pub mod synthetic;
pub mod trainer;

pub use checkpoint::Checkpoint;
pub use dataset::{KnowledgeGraph, Triple, Vocab};
pub use error::{Error, Result};
pub use evaluator::{evaluate, rank_triple, Metrics, RankingReport, TieMode, TruthIndex};
pub use geometry::{BallPoint, Curvature, PoincareBall, TangentVector};
pub use model::{score_mure, score_murp, GeometryKind, GradientBundle, ModelParams, Score};
pub use trainer::{train, TrainConfig, TrainOutcome};
