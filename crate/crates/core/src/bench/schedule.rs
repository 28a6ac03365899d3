use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Linear warmup to `peak`, then cosine decay to `min` at `total_steps`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrSchedule {
    pub peak: f64,
    pub min: f64,
    pub warmup_steps: u64,
    pub total_steps: u64,
}

impl LrSchedule {
    pub fn new(peak: f64, min: f64, warmup_steps: u64, total_steps: u64) -> Result<Self> {
        let s = Self {
            peak,
            min,
            warmup_steps,
            total_steps,
        };
        s.validate()?;
        Ok(s)
    }

    /// Constant rate `lr` for `total_steps`.
    pub fn constant(lr: f64, total_steps: u64) -> Result<Self> {
        Self::new(lr, lr, 0, total_steps)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.peak.is_finite() && self.min >= 0.0 && self.min <= self.peak) {
            return Err(invalid(format!(
                "learning rates need 0 <= min <= peak, got min {} peak {}",
                self.min, self.peak
            )));
        }
        if self.total_steps == 0 || self.warmup_steps > self.total_steps {
            return Err(invalid("schedule needs 0 <= warmup <= total and total >= 1"));
        }
        Ok(())
    }
}

/// Learning rate at step `t`, counted from 1.
pub fn lr_at(s: &LrSchedule, t: u64) -> Result<f64> {
    if t == 0 || t > s.total_steps {
        return Err(invalid(format!("step {t} outside 1..={}", s.total_steps)));
    }
    if t <= s.warmup_steps {
        return Ok(s.peak * t as f64 / s.warmup_steps as f64);
    }
    let progress = (t - s.warmup_steps) as f64 / (s.total_steps - s.warmup_steps) as f64;
    Ok(s.min + 0.5 * (s.peak - s.min) * (1.0 + (PI * progress).cos()))
}
