use crate::error::{Error, Result};

/// Per-step reward shaping.
///
/// Indoor: `goal_reward * [at goal] - step_penalty + clearance_weight * min(scan)`.
/// Aerial: `goal_reward * [at goal] - displacement_weight * displacement - step_penalty`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardConfig {
    pub goal_reward: f64,
    pub step_penalty: f64,
    pub clearance_weight: f64,
    pub displacement_weight: f64,
    /// Discount in `(0, 1]`.
    pub discount: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            goal_reward: 1.0,
            step_penalty: 0.01,
            clearance_weight: 0.01,
            displacement_weight: 0.1,
            discount: 0.99,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "discount must lie in (0, 1], got {}",
                self.discount
            )));
        }
        Ok(())
    }

    pub fn indoor(&self, goal_distance: f64, tolerance: f64, clearance: f64) -> f64 {
        self.goal_term(goal_distance, tolerance) - self.step_penalty + self.clearance_weight * clearance
    }

    pub fn aerial(&self, goal_distance: f64, tolerance: f64, displacement: f64) -> f64 {
        self.goal_term(goal_distance, tolerance) - self.displacement_weight * displacement - self.step_penalty
    }

    fn goal_term(&self, goal_distance: f64, tolerance: f64) -> f64 {
        if goal_distance <= tolerance {
            self.goal_reward
        } else {
            0.0
        }
    }
}
