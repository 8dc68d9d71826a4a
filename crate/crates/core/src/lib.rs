//! Mines visual-grounding attention labels from region descriptions and
//! object annotations and turns them into grid attention maps that can
//! supervise the attention of a VQA model.
//!
//! * [`lexicon`]: WordNet index/exception parsing, morphy, word matching.
//! * [`dataset`]: region, object and QA corpus loading.
//! * [`miner`]: region/object grounding selection per QA triplet.
//! * [`attention`]: rasterization, normalization and evaluation kernels.
//! * [`schedule`]: attention-loss weighting over training steps.
//! * [`toy`]: a small differentiable attention model trained with that loss.

pub mod attention;
pub mod dataset;
pub mod lexicon;
pub mod miner;
pub mod schedule;
pub mod toy;

pub use attention::{AttentionMap, GlimpseStack, MapError};
pub use dataset::{BoundingBox, Dataset, ObjectAnnotation, QaTriplet, RegionAnnotation};
pub use lexicon::{Lexicon, MatchCondition, MatchResult, Pos};
pub use miner::{GroundingLabel, Miner, MinerConfig};
pub use schedule::{AlphaMode, LossBreakdown, Schedule};
pub use toy::{ToyConfig, ToyModelParams, ToySample};
