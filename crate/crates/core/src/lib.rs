//! Phase accumulated by a self-gravitating mesoscopic sphere in a
//! Stern–Gerlach interferometer, from Gaussian-packet closed forms and an
//! independent split-step grid solver.

pub mod exec;
pub mod gaussian;
pub mod ode;
pub mod oracle;
pub mod params;
pub mod phase;
pub mod potential;
pub mod trajectories;
