//! Corpus-robustness toolkit for binary text classification.
//!
//! The crate measures token-level text quality as the fraction of
//! whitespace tokens that contain an error, injects controlled misspelling
//! and missing-whitespace errors into clean corpora with a replayable
//! ledger, detects and corrects errors through a chat-completion service
//! (or a deterministic ledger-backed oracle), and quantifies how the error
//! rate degrades TF-IDF and embedding feature representations and the
//! ROC-AUC of classifiers trained on them.
//!
//! The pieces compose into a single pipeline, driven either from code or
//! from the `textq` command line:
//!
//! 1. [`corpus`] loads JSONL note corpora and builds prediction instances.
//! 2. [`corrupt`] plans and applies seeded corruption at a target rate.
//! 3. [`quality`] computes error rates and scores detectors against truth.
//! 4. [`llm`] talks to the correction service and provides the offline oracle.
//! 5. [`features`] produces TF-IDF and averaged-embedding design matrices.
//! 6. [`learn`] trains logistic regression, random forests, and boosted
//!    trees and evaluates them with ROC-AUC.
//! 7. [`experiment`] sweeps corruption rates and emits degradation reports.

pub mod corpus;
pub mod corrupt;
pub mod error;
pub mod experiment;
pub mod features;
pub mod learn;
pub mod llm;
pub mod quality;
pub mod rng;
pub mod tokenize;

pub use error::{Error, Result};
