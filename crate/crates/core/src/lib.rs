//! Numerical laboratory for equivariant Szego projector kernels on model
//! quantized manifolds (projective spaces and products), their conic
//! reductions, and the induced maps into spheres.
//!
//! The crate is organized around the pipeline
//!
//! ```text
//! lie  ->  geometry  ->  hardy  ->  reduction  ->  asymptotics / immersion
//! ```
//!
//! * [`lie`] — compact groups (tori of rank <= 2, SU(2)): characters, Weyl
//!   dimensions, Haar quadrature, coadjoint-orbit data.
//! * [`geometry`] — CP^d models: Fubini-Study structures, the unit circle
//!   bundle realized as the unit sphere, Heisenberg charts, linear group
//!   actions and moment maps.
//! * [`hardy`] — monomial Hardy-space bases, level kernels in closed form,
//!   isotype bases and the equivariant kernel by two independent routes.
//! * [`reduction`] — cone loci, tangent splittings, the density `Psi_nu`, and
//!   the reduced structures `g1`, `g2`, `omega2`.
//! * [`asymptotics`] — rescaled kernels, the leading-term formula, Gaussian
//!   factors, and exponent/constant/rate fitting over k-sweeps.
//! * [`immersion`] — pullback metrics from second derivatives of the log
//!   kernel, horizontal Laplacians, and the immersion/isometry/minimality
//!   verdicts.
//! * [`config`] / [`runner`] / [`scenario`] — reproducible experiment runner
//!   with bundled scenario presets, CSV/JSON reports.
//!
//! All types are immutable after construction and all operations are pure;
//! everything can be shared across threads freely.

pub mod asymptotics;
pub mod config;
pub mod geometry;
pub mod hardy;
pub mod immersion;
pub mod lie;
pub mod reduction;
pub mod runner;
pub mod scenario;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid weight: {0}")]
    InvalidWeight(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("moment map vanishes on M (min |Phi| = {min_norm:.3e}); pick a linearization shift")]
    MomentMapVanishes { min_norm: f64 },
    #[error("displacement norm {norm:.3} exceeds chart radius {radius}")]
    ChartRadius { norm: f64, radius: f64 },
    #[error("rescaled displacement |v| = {norm:.3} outside the window C*k^eps = {bound:.3}")]
    WindowViolation { norm: f64, bound: f64 },
    #[error("isotype level enumeration exceeded bound {bound} (is 0 in Phi(M)?)")]
    EnumerationBound { bound: usize },
    #[error("isotype dimension mismatch: enumeration {enumeration} vs character quadrature {character}")]
    DimensionMismatch { enumeration: usize, character: usize },
    #[error("quadrature rule degree {have} insufficient, need {need}")]
    QuadratureDegree { have: usize, need: usize },
    #[error("cone locus solve failed after {iterations} iterations, residual {residual:.3e}")]
    LocusSolveFailed { iterations: usize, residual: f64 },
    #[error("group action not free at the point (sigma_min = {sigma_min:.3e})")]
    NonFreeAction { sigma_min: f64 },
    #[error("degenerate frame: {0}")]
    FrameDegenerate(String),
    #[error("phi map vanishes at the point (x in the base locus of the isotype)")]
    ZeroPhiMap,
    #[error("finite differences hit the kernel zero set")]
    KernelZero,
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
