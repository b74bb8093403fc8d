//! Special functions, quadrature and seeded sampling.

mod gamma;
mod legendre;
mod quadrature;
mod sampling;

pub use gamma::{log_gamma, unit_ball_volume};
pub(crate) use gamma::log_gamma_unchecked;
pub use legendre::{harmonic_space_dim, legendre_poly};
pub(crate) use legendre::legendre_unchecked;
pub use quadrature::{integrate_1d, integrate_nodes, Node, QuadratureSpec, Scheme};
pub use sampling::{
    draw_uniform_ball, sample_ball_into, sample_sphere_into, SampleStream, CHUNK_DRAWS,
};
