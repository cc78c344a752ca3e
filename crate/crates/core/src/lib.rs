pub mod domain;
pub mod error;
pub mod feynman_kac;
pub mod kernels;
pub mod quad;
pub mod rng;
pub mod sampling;
pub mod spectral;
pub mod stats;
pub mod verification;
