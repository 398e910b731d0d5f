//! Gender classification of micro-blog users with transferred sentiment
//! representations.
//!
//! The pipeline: users' posts are merged into virtual documents and
//! embedded ([`embed`]); an LSTM sentiment classifier is trained on
//! similarity-selected review data ([`domainsel`], [`sentiment`]); its
//! hidden state is concatenated with the averaged document vector and fed to
//! an MLP gender classifier ([`gender`]) evaluated with stratified k-fold
//! cross-validation and SMOTE rebalancing ([`resample`], [`eval`]).

pub mod corpus;
pub mod domainsel;
pub mod embed;
pub mod error;
pub mod eval;
pub mod gender;
pub mod nncore;
pub mod resample;
pub mod sentiment;
pub mod synth;

pub use error::{Error, Result};
