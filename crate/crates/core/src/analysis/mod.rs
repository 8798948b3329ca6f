//! Lyapunov functions, homogeneity checks and trace metrics.

pub mod homogeneity;
pub mod lyapunov;
pub mod metrics;
