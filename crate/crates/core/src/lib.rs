//! Strategy-inversion toolkit: biological strategy texts in, ranked
//! engineering strategy frames out.
//!
//! - [`knowledge`]: the F-B-Cs-in-E frame schema, validation, the ⊕ operator
//!   and the JSON document format.
//! - [`corpus`]: segmentation, multi-label classification, sample generation
//!   and the batch review procedure.
//! - [`llm`]: schema-validated chat-completion client plus an offline mock.
//! - [`inversion`]: frame building, gerund normalization, noun substitution
//!   and designer screening.
//! - [`decision`]: G1 weighting, VIKOR ranking and similarity clustering.

pub mod corpus;
pub mod decision;
pub mod inversion;
pub mod knowledge;
pub mod llm;
pub mod text;
pub mod verbs;
