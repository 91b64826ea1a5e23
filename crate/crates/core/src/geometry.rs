//! Uniform strip decomposition of `(0, 1)` in `x`.
//!
//! Subdomain `j` (0-based here) is `(a_j, b_j)` with `a_j = j H`,
//! `b_j = (j + 1) H + L` and `H = (1 − L)/N`, so every strip has width
//! `H + L`, neighbours share exactly `L`, and the strips cover `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decomposition {
    n_subdomains: usize,
    overlap: f64,
    pitch: f64,
    intervals: Vec<(f64, f64)>,
}

impl Decomposition {
    /// Builds `N` strips of width `H + L`.
    pub fn new(n_subdomains: usize, overlap: f64) -> Result<Self> {
        if n_subdomains < 2 {
            return Err(Error::InvalidSubdomainCount(n_subdomains));
        }
        if !(overlap.is_finite() && (0.0..1.0).contains(&overlap)) {
            return Err(Error::InvalidOverlap(overlap));
        }
        let pitch = (1.0 - overlap) / n_subdomains as f64;
        if n_subdomains >= 3 && overlap >= pitch {
            return Err(Error::TripleOverlap { overlap, pitch });
        }
        let intervals = (0..n_subdomains)
            .map(|j| {
                let a = j as f64 * pitch;
                let b = if j + 1 == n_subdomains {
                    1.0
                } else {
                    (j + 1) as f64 * pitch + overlap
                };
                (a, b)
            })
            .collect();
        Ok(Self {
            n_subdomains,
            overlap,
            pitch,
            intervals,
        })
    }

    pub fn n_subdomains(&self) -> usize {
        self.n_subdomains
    }

    /// Overlap width `L`.
    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    /// Non-overlapping pitch `H = (1 − L)/N`.
    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    /// Subdomain width `H + L`.
    pub fn width(&self) -> f64 {
        self.pitch + self.overlap
    }

    pub fn intervals(&self) -> &[(f64, f64)] {
        &self.intervals
    }

    pub fn interval(&self, j: usize) -> (f64, f64) {
        self.intervals[j]
    }

    /// Number of interface unknowns of the parallel iteration, `2N − 2`.
    pub fn interface_count(&self) -> usize {
        2 * self.n_subdomains - 2
    }
}
