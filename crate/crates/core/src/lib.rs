//! Hidden Markov models augmented with odometric relations between states.
//!
//! The crate learns topological maps from sequences of discrete observations
//! and noisy pose changes. Learning is a generalized EM loop whose M-step
//! keeps the relation matrix geometrically consistent (zero self relations,
//! anti-symmetry and, optionally, additivity).

pub mod circstats;
pub mod error;
pub mod estimation;
pub mod evalkl;
pub mod experiment;
pub mod inference;
pub mod init;
pub mod io;
pub mod model;
pub mod render;
pub mod simgen;

pub use error::{GeoError, Result};
pub use model::{
    check_consistency, embed_relations, relation_density, transform_point, ConsistencyReport,
    ConstraintLevel, CoordinateMode, ExperienceSequence, GeoHmm, Reading, RelationEntry, Step,
};
