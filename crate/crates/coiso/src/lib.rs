//! Chart-based engine for pre-symplectic structures, their coisotropic
//! embeddings and the Poisson brackets that do (or do not) descend from them.
//!
//! The pipeline is: a [`presympl::PreSymplecticStructure`] plus a
//! [`connection::Connection`] on its kernel bundle produce a
//! [`embedding::CoisotropicEmbedding`], whose inverse is a
//! [`poisson::PoissonStructure`]. Depending on the curvature class of the
//! connection the bracket either projects back to the base or leaves an
//! anomaly.

pub mod connection;
pub mod embedding;
pub mod error;
pub mod geomcore;
pub mod linalg;
pub mod models;
pub mod obs;
pub mod pca;
pub mod poisson;
pub mod presympl;
pub mod sampling;
pub mod sweep;

pub use error::{Error, Result};
pub use geomcore::{
    AltTensor, Bivector, Chart, DiffBackend, DiffMode, KForm, Point, ScalarField, VectorField,
};
