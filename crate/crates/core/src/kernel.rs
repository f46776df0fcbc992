//! Smoothing kernels on [-1, 1], each integrating to one.

use serde::{Deserialize, Serialize};

/// Kernel family for hazard smoothing and conditional weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    /// 0.75 (1 - x^2) on [-1, 1].
    Epanechnikov,
    /// 0.5 on [-1, 1].
    Uniform,
    /// (15/16) (1 - x^2)^2 on [-1, 1].
    Biweight,
}

impl Kernel {
    /// Kernel weight at x; zero outside [-1, 1].
    pub fn weight(self, x: f64) -> f64 {
        if !(-1.0..=1.0).contains(&x) {
            return 0.0;
        }
        match self {
            Kernel::Epanechnikov => 0.75 * (1.0 - x * x),
            Kernel::Uniform => 0.5,
            Kernel::Biweight => {
                let u = 1.0 - x * x;
                15.0 / 16.0 * u * u
            }
        }
    }
}

impl std::str::FromStr for Kernel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "uniform" => Ok(Kernel::Uniform),
            "biweight" => Ok(Kernel::Biweight),
            other => Err(format!(
                "unknown kernel '{other}' (expected epanechnikov, uniform, or biweight)"
            )),
        }
    }
}
