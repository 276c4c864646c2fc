//! Clustering of crowd-sourced user stories: topic models, embedding
//! geometry and transport distances, projected to 2-D and scored against
//! domain labels.

pub mod corpus;
pub mod docgeom;
pub mod embed;
pub mod evalcluster;
pub mod lda;
pub mod project;
pub mod textprep;
pub mod vectorize;
pub mod wmd;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
