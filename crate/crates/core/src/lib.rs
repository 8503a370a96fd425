//! Spectra and essential spectra of band operators on Z^n-periodic graphs.
//!
//! The pipeline runs from a periodic graph ([`graph`]) to band operators in
//! quotient matrix form ([`operator`]), their torus symbols and certified
//! spectral bands ([`symbol`]), limit-operator families and essential spectra
//! ([`limits`]), the two-light-particle assembly ([`multiparticle`]), and a
//! dense finite-section oracle ([`finite_section`]).

pub mod finite_section;
pub mod graph;
pub mod interval;
pub mod lattice;
pub mod limits;
pub mod linalg;
pub mod multiparticle;
pub mod operator;
pub mod potential;
pub mod report;
pub mod symbol;

pub use nalgebra::Complex;

/// Complex scalar used throughout.
pub type C64 = Complex<f64>;
