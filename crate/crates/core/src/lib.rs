//! Inertial-sensor activity recognition pipeline.
//!
//! The crate turns public IMU dataset distributions into fixed-length windows,
//! summarizes each window with per-channel time and frequency statistics, and
//! feeds those summaries either to classical baselines or to a language-model
//! backend through compact text prompts.
//!
//! Stages, in pipeline order:
//!
//! * [`ingest`] parses dataset layouts into canonical [`ingest::SampleRecord`]s.
//! * [`windowing`] cuts per-session streams into overlapping [`windowing::Window`]s.
//! * [`features`] computes the 7-statistic [`features::FeatureVector`] per channel.
//! * [`classifiers`] trains random forest, linear SVM and feed-forward baselines.
//! * [`prompting`] renders features into prompts and instruction-tuning pairs.
//! * [`llm_client`] talks to a chat-completion server or a deterministic mock.
//! * [`evaluation`] builds splits, confusion matrices and metric reports.
//! * [`analysis`] computes correlation, PCA and histogram tables.

pub mod analysis;
pub mod classifiers;
pub mod evaluation;
pub mod features;
pub mod ingest;
pub mod llm_client;
pub mod numfmt;
pub mod prompting;
pub mod synthetic;
pub mod windowing;

pub use ingest::{ChannelId, DatasetId, SampleRecord};
