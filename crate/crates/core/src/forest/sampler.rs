use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geom::{Bounds, Point};

/// Gaussian redraws before a heuristic sample is clamped into the map.
pub const MAX_REDRAWS: usize = 100;

/// Uniform point over the map rectangle.
pub fn uniform_sample<R: Rng + ?Sized>(bounds: &Bounds, rng: &mut R) -> Point {
    let x = bounds.min.x + rng.random::<f64>() * bounds.width();
    let y = bounds.min.y + rng.random::<f64>() * bounds.height();
    Point::new(x, y)
}

/// Which part of the mixture produced a sample.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SampleBranch {
    /// Drawn around the component with this index.
    Gaussian(usize),
    Uniform,
}

/// Equal-weight mixture of isotropic Gaussians around heuristic path nodes,
/// blended with the uniform map distribution:
/// `h_r / L * sum_k N(mu_k, sigma^2) + (1 - h_r) * U(map)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeuristicDistribution {
    components: Vec<Point>,
    sigma: f64,
    h_r: f64,
    bounds: Bounds,
}

impl HeuristicDistribution {
    pub fn new(components: Vec<Point>, sigma: f64, h_r: f64, bounds: Bounds) -> Result<Self, ConfigError> {
        if components.is_empty() {
            return Err(ConfigError::invalid("components", "heuristic path is empty"));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(ConfigError::invalid("sigma_kappa", format!("{sigma} must be positive")));
        }
        if !(0.0..=1.0).contains(&h_r) {
            return Err(ConfigError::invalid("h_r", format!("{h_r} outside [0, 1]")));
        }
        Ok(Self {
            components,
            sigma,
            h_r,
            bounds,
        })
    }

    pub fn components(&self) -> &[Point] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn h_r(&self) -> f64 {
        self.h_r
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        self.sample_traced(rng).0
    }

    /// Draws one point and reports the branch it came from. With `h_r = 0`
    /// the random stream is consumed exactly like [`uniform_sample`].
    pub fn sample_traced<R: Rng + ?Sized>(&self, rng: &mut R) -> (Point, SampleBranch) {
        let gaussian = if self.h_r <= 0.0 {
            false
        } else if self.h_r >= 1.0 {
            true
        } else {
            rng.random::<f64>() < self.h_r
        };
        if !gaussian {
            return (uniform_sample(&self.bounds, rng), SampleBranch::Uniform);
        }
        let k = rng.random_range(0..self.components.len());
        let mu = self.components[k];
        let mut p = mu;
        for _ in 0..MAX_REDRAWS {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            p = Point::new(mu.x + self.sigma * dx, mu.y + self.sigma * dy);
            if self.bounds.contains(&p) {
                break;
            }
        }
        (self.bounds.clamp(p), SampleBranch::Gaussian(k))
    }
}
