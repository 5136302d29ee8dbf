//! Axis-aligned box regions and quasi-random sampling inside them.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::CounterRng;

/// Axis-aligned box `[lower, upper]` standing in for a compact set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Region {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(Error::InvalidInput(
                "region lower bound exceeds upper bound".into(),
            ));
        }
        Ok(Self { lower, upper })
    }

    /// Symmetric box `[-radius, radius]^dim`.
    pub fn centered(dim: usize, radius: f64) -> Self {
        Self {
            lower: alloc::vec![-radius; dim],
            upper: alloc::vec![radius; dim],
        }
    }

    /// Box of the given radius around a point.
    pub fn around(center: &[f64], radius: f64) -> Self {
        Self {
            lower: center.iter().map(|c| c - radius).collect(),
            upper: center.iter().map(|c| c + radius).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= *l && *v <= *u)
    }

    /// Euclidean diameter of the box.
    pub fn diameter(&self) -> f64 {
        libm::sqrt(
            self.lower
                .iter()
                .zip(&self.upper)
                .map(|(l, u)| (u - l) * (u - l))
                .sum(),
        )
    }

    pub fn is_degenerate(&self) -> bool {
        self.diameter() == 0.0
    }

    /// `index`-th point of a seeded low-discrepancy sequence in the box.
    ///
    /// Additive recurrence with the generalized golden-ratio increments;
    /// the seed only shifts the starting phase, so sample sets are nested:
    /// the first `n` points do not depend on how many more are requested.
    pub fn low_discrepancy_point(&self, seed: u64, index: u64) -> Vec<f64> {
        let d = self.dim();
        let alphas = golden_increments(d);
        let rng = CounterRng::new(seed, crate::rng::stream::SAMPLING);
        (0..d)
            .map(|j| {
                let offset = rng.uniform(j as u64, 0);
                let t = fract(offset + alphas[j] * (index as f64 + 1.0));
                self.lower[j] + (self.upper[j] - self.lower[j]) * t
            })
            .collect()
    }

    /// Plain uniform sample (counter-based, reproducible).
    pub fn uniform_point(&self, rng: &CounterRng, k: u64, base_draw: u64) -> Vec<f64> {
        (0..self.dim())
            .map(|j| rng.uniform_in(k, base_draw + j as u64, self.lower[j], self.upper[j]))
            .collect()
    }
}

fn fract(x: f64) -> f64 {
    x - libm::floor(x)
}

/// Increments `1/phi_d^j` where `phi_d` solves `x^{d+1} = x + 1`.
fn golden_increments(d: usize) -> Vec<f64> {
    let mut phi = 1.5_f64;
    for _ in 0..64 {
        phi = libm::pow(1.0 + phi, 1.0 / (d as f64 + 1.0));
    }
    let mut out = Vec::with_capacity(d);
    let mut inc = 1.0;
    for _ in 0..d {
        inc /= phi;
        out.push(inc);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn rejects_inverted_bounds() {
        assert!(Region::new(vec![1.0], vec![0.0]).is_err());
    }

    #[test]
    fn low_discrepancy_points_stay_inside() {
        let r = Region::new(vec![-1.0, 0.0], vec![2.0, 0.5]).unwrap();
        for i in 0..1000 {
            assert!(r.contains(&r.low_discrepancy_point(5, i)));
        }
    }

    #[test]
    fn low_discrepancy_sequence_is_nested_and_seeded() {
        let r = Region::centered(3, 2.0);
        assert_eq!(
            r.low_discrepancy_point(5, 10),
            r.low_discrepancy_point(5, 10)
        );
        assert_ne!(
            r.low_discrepancy_point(5, 10),
            r.low_discrepancy_point(6, 10)
        );
    }

    #[test]
    fn low_discrepancy_covers_the_box() {
        // Crude equidistribution check: every quadrant of the unit square
        // receives a reasonable share of 4000 points.
        let r = Region::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let mut counts = [0usize; 4];
        let n = 4000;
        for i in 0..n {
            let p = r.low_discrepancy_point(1, i);
            let q = (p[0] >= 0.5) as usize * 2 + (p[1] >= 0.5) as usize;
            counts[q] += 1;
        }
        for &c in &counts {
            assert!(c > n as usize / 8, "quadrant count {c} too small");
        }
    }
}
