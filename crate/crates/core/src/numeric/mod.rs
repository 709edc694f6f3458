//! Internal numerical kernels: adaptive quadrature, bracketed root
//! finding and finite-difference derivatives.

pub mod fd;
pub mod quad;
pub mod root;
