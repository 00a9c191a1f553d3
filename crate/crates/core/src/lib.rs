//! Biorthogonal matrix polynomials on the complex plane, their Christoffel,
//! Geronimus and Uvarov transformations, and the 2D Toda flows they carry.

pub mod cli;
pub mod factor;
pub mod gen;
pub mod kernels;
pub mod linalg;
pub mod matpoly;
pub mod toda;
pub mod transforms;

use serde::{Deserialize, Serialize};

/// Numerical thresholds used across the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// identity checks
    pub id: f64,
    /// residual checks
    pub res: f64,
    /// eigenvalue clustering radius
    pub clust: f64,
    /// reciprocal condition below which a block counts as singular
    pub sing: f64,
    /// factorization reconstruction
    pub fac: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { id: 1e-10, res: 1e-10, clust: 1e-7, sing: 1e-12, fac: 1e-9 }
    }
}

impl Tolerances {
    pub const ENV: &'static str = "MBOP_TOLERANCES";

    /// Defaults overridden by a JSON object in `MBOP_TOLERANCES`, if set.
    pub fn from_env() -> Result<Self, String> {
        match std::env::var(Self::ENV) {
            Ok(s) => serde_json::from_str(&s).map_err(|e| format!("{}: {e}", Self::ENV)),
            Err(_) => Ok(Self::default()),
        }
    }
}
