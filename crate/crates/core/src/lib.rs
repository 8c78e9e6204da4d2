//! Annotator modeling from self-disclosure statements.
//!
//! The pipeline ingests a corpus of posts, comments and verdicts, extracts
//! self-disclosures from each annotator's comment history, retrieves a
//! small context per (annotator, post) pair and trains a verdict classifier
//! on the post embedding concatenated with the pooled context.

pub mod corpus;
pub mod disclosure;
pub mod embed;
pub mod cluster;
pub mod sampler;
pub mod model;
pub mod synthgen;
pub mod pipeline;
