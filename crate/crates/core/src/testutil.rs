//! Shared fixtures for unit tests: cheap synthetic objectives over the
//! default space.

use crate::error::EvalError;
use crate::eval::Objective;
use crate::space::{default_space, Candidate};

/// Smooth landscape: all three goals improve together as the candidate
/// approaches the low corner of the grid, so that corner dominates.
pub struct Landscape;

impl Objective for Landscape {
    fn dataset_id(&self) -> &str {
        "landscape"
    }
    fn target_id(&self) -> &str {
        "commits"
    }
    fn compute(&self, c: &Candidate) -> Result<Vec<f64>, EvalError> {
        let s = default_space();
        let d: f64 = c
            .indices()
            .iter()
            .zip(s.params())
            .map(|(&i, p)| {
                let x = i as f64 / (p.grid_size() - 1).max(1) as f64;
                x * x
            })
            .sum::<f64>()
            .sqrt();
        Ok(vec![d, 1.0 - d / 3.0, 100.0 * (1.0 - d)])
    }
}

/// Landscape with a sweet spot in the grid interior and mild deterministic
/// ripple, so searches cannot win by just walking to a corner.
pub struct Ripple {
    pub center: Vec<f64>,
}

impl Default for Ripple {
    fn default() -> Self {
        Self {
            center: vec![0.3, 0.7, 0.2, 0.5, 0.0],
        }
    }
}

impl Objective for Ripple {
    fn dataset_id(&self) -> &str {
        "ripple"
    }
    fn target_id(&self) -> &str {
        "commits"
    }
    fn compute(&self, c: &Candidate) -> Result<Vec<f64>, EvalError> {
        let s = default_space();
        let mut d = 0.0;
        for ((&i, p), &ctr) in c.indices().iter().zip(s.params()).zip(&self.center) {
            let x = i as f64 / (p.grid_size() - 1).max(1) as f64;
            d += (x - ctr) * (x - ctr);
        }
        let d = d.sqrt();
        let ripple = ((c.id() % 97) as f64 / 97.0 - 0.5) * 0.05;
        Ok(vec![
            d + ripple,
            (1.0 - d).clamp(0.0, 1.0),
            100.0 * (1.0 - d) - ripple * 40.0,
        ])
    }
}
