//! Align molecules with free-text mechanism descriptions through a small
//! contrastive bridge over frozen encoders.
//!
//! The pipeline: [`data_ingest`] cleans drug/target records, [`smiles`] and
//! [`fingerprint`] turn structures into ECFP bit vectors, [`text_embed`]
//! loads or hashes text vectors, [`scaffold`] builds leakage-free splits,
//! [`bridge`] trains the two projection heads and [`eval`] scores retrieval.
//!
//! Numeric code is generic over [`Scalar`]; training uses `f32`, gradient
//! verification `f64`.

pub mod bridge;
pub mod data_ingest;
pub mod error;
pub mod eval;
pub mod fingerprint;
pub mod hash;
pub mod linalg;
pub mod rng;
pub mod scaffold;
pub mod scalar;
pub mod smiles;
pub mod text_embed;

pub use bridge::{TrainConfig, TrainHistory};
pub use data_ingest::{Dataset, DrugRecord};
pub use error::{Error, Result};
pub use eval::{Direction, EvalOptions, EvalReport, RetrievalReport};
pub use fingerprint::{ecfp, Fingerprint};
pub use linalg::Matrix;
pub use rng::Xoshiro256StarStar;
pub use scaffold::{molecule_scaffold_key, scaffold_key, ScaffoldKey, SplitAssignment};
pub use scalar::Scalar;
pub use smiles::{parse_smiles, MoleculeGraph};
pub use text_embed::EmbeddingMatrix;

pub type Matrix32 = Matrix<f32>;
pub type Matrix64 = Matrix<f64>;
pub type BridgeParams32 = bridge::BridgeParams<f32>;
pub type BridgeParams64 = bridge::BridgeParams<f64>;
pub type Batch64 = bridge::Batch<f64>;
