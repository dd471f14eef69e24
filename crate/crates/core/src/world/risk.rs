use crate::error::RiskError;
use crate::geom::Point;

use super::crowd::PredictionStep;

/// Collision probability with one predicted obstacle.
///
/// Certain collision when the discs overlap; beyond contact the probability
/// decays as `exp(-(d - R)^2 / (2 sigma^2))` with `R` the sum of radii.
pub fn dynamic_risk_single(step: &PredictionStep, position: Point, robot_radius: f64, obstacle_radius: f64) -> f64 {
    let reach = robot_radius + obstacle_radius;
    let d = position.distance(&step.mean);
    if d <= reach {
        1.0
    } else {
        let gap = d - reach;
        (-(gap * gap) / (2.0 * step.sigma * step.sigma)).exp()
    }
}

/// `P_rs + (1 - P_rs) * P_rd` with `P_rd = 1 - prod(1 - p_i)`.
pub fn combined_risk(p_rs: f64, p_rd: &[f64]) -> Result<f64, RiskError> {
    let check = |p: f64| {
        if (0.0..=1.0).contains(&p) {
            Ok(p)
        } else {
            Err(RiskError { value: p })
        }
    };
    check(p_rs)?;
    let mut survive = 1.0;
    for &p in p_rd {
        survive *= 1.0 - check(p)?;
    }
    Ok(combine_unchecked(p_rs, 1.0 - survive))
}

#[inline]
pub(crate) fn combine_unchecked(p_rs: f64, p_rd: f64) -> f64 {
    (p_rs + (1.0 - p_rs) * p_rd).clamp(0.0, 1.0)
}
