//! Detection of likely coordinated posting campaigns across social platforms.
//!
//! The pipeline combines three signals about a collection of posts:
//! text embeddings, embeddings of the user-post-video-channel interaction
//! network, and posting-time locality. Posts are clustered on the combined
//! embeddings, each cluster is subdivided by a second density clustering on
//! timestamps, singleton clusters are dropped, and the surviving clusters
//! are scored with silhouette and factuality-dispersion metrics.
//!
//! Modules follow the stages:
//!
//! - [`data`]: dataset model and file ingestion
//! - [`graph`]: multipartite network and random-walk corpora
//! - [`embed`]: skip-gram training, PV-DBOW, external vectors, PCA alignment
//! - [`cluster`]: k-means, density clustering, temporal subdivision
//! - [`topics`]: class-based TF-IDF topic terms with diversity re-ranking
//! - [`eval`]: silhouette, factuality dispersion, distributions, ablation
//! - [`synth`]: synthetic campaign generator and detection scoring
//! - [`pipeline`]: end-to-end orchestration from a config file

pub mod cluster;
pub mod data;
pub mod embed;
pub mod error;
pub mod eval;
pub mod graph;
pub mod pipeline;
pub mod synth;
pub mod text;
pub mod topics;

pub use error::{Error, Result};
