//! Energy grids shared by the spectral modules and the CLI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite, ordered set of energies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum EnergyGrid {
    /// `points` equally spaced energies from `start` to `end` inclusive.
    Uniform {
        start: f64,
        end: f64,
        points: usize,
    },
    Explicit {
        energies: Vec<f64>,
    },
}

impl EnergyGrid {
    pub fn uniform(start: f64, end: f64, points: usize) -> Self {
        EnergyGrid::Uniform { start, end, points }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EnergyGrid::Uniform { start, end, points } => {
                if !start.is_finite() || !end.is_finite() {
                    return Err(Error::InvalidInput("grid bounds must be finite".into()));
                }
                if *points == 0 {
                    return Err(Error::InvalidInput("grid must have at least one point".into()));
                }
                if *points > 1 && end <= start {
                    return Err(Error::InvalidInput(format!("grid end {end} must exceed start {start}")));
                }
                Ok(())
            }
            EnergyGrid::Explicit { energies } => {
                if energies.is_empty() {
                    return Err(Error::InvalidInput("grid must have at least one point".into()));
                }
                if energies.iter().any(|e| !e.is_finite()) {
                    return Err(Error::InvalidInput("grid energies must be finite".into()));
                }
                if energies.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidInput("grid energies must be strictly increasing".into()));
                }
                Ok(())
            }
        }
    }

    /// Materialise the grid. Uniform grids hit both endpoints exactly.
    pub fn energies(&self) -> Vec<f64> {
        match self {
            EnergyGrid::Uniform { start, end, points } => match *points {
                0 => Vec::new(),
                1 => vec![*start],
                n => {
                    let h = (end - start) / (n - 1) as f64;
                    (0..n).map(|i| if i == n - 1 { *end } else { start + h * i as f64 }).collect()
                }
            },
            EnergyGrid::Explicit { energies } => energies.clone(),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            EnergyGrid::Uniform { points, .. } => *points,
            EnergyGrid::Explicit { energies } => energies.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
