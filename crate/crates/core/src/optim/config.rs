use std::fmt;
use std::str::FromStr;

use crate::error::{invalid, Error, Result};
use crate::lowrank::{RankPolicy, Sampling};

/// Which update rule drives a parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    AdamW,
    /// Rank-1 row/column second moment.
    Adafactor,
    Adapprox,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 3] = [Self::AdamW, Self::Adafactor, Self::Adapprox];

    pub fn name(self) -> &'static str {
        match self {
            Self::AdamW => "adamw",
            Self::Adafactor => "adafactor",
            Self::Adapprox => "adapprox",
        }
    }
}

impl fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for OptimizerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "adamw" | "adam" => Ok(Self::AdamW),
            "adafactor" => Ok(Self::Adafactor),
            "adapprox" => Ok(Self::Adapprox),
            _ => Err(invalid(format!("unknown optimizer `{s}`"))),
        }
    }
}

/// Hyperparameters shared by the three optimizers.
///
/// AdamW reads only `beta1`, `beta2`, `epsilon` and `weight_decay`. The
/// factored optimizers use everything.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdapproxConfig {
    /// First-moment decay; `0` disables the first moment.
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// RMS clipping threshold `d`; `None` turns clipping off.
    pub clip_d: Option<f64>,
    pub weight_decay: f64,
    pub rank_policy: RankPolicy,
    pub sampling: Sampling,
    pub cosine_guidance: bool,
    /// Bound `c` on the guidance factor, which is kept in `[1/c, c]`.
    pub guidance_clamp: Option<f64>,
    /// Parameters with `min(m, n)` below this keep a dense second moment.
    pub factor_min_dim: usize,
}

impl Default for AdapproxConfig {
    /// `β1 = 0.9`, `β2 = 0.999`, `ε = 1e-8`, `d = 1`, `λ = 0.1`, `l = 5`,
    /// `p = 5`, guidance off with clamp 10, dense below 128.
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            clip_d: Some(1.0),
            weight_decay: 0.1,
            rank_policy: RankPolicy::default(),
            sampling: Sampling::default(),
            cosine_guidance: false,
            guidance_clamp: Some(10.0),
            factor_min_dim: 128,
        }
    }
}

impl AdapproxConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(invalid(format!("beta1 must lie in [0, 1), got {}", self.beta1)));
        }
        if !(self.beta2 > 0.0 && self.beta2 < 1.0) {
            return Err(invalid(format!("beta2 must lie in (0, 1), got {}", self.beta2)));
        }
        if !(self.epsilon > 0.0) {
            return Err(invalid("epsilon must be positive"));
        }
        if let Some(d) = self.clip_d {
            if !(d > 0.0) {
                return Err(invalid("clip threshold must be positive"));
            }
        }
        if !(self.weight_decay >= 0.0) {
            return Err(invalid("weight decay must be non-negative"));
        }
        if self.sampling.power_iters == 0 {
            return Err(invalid("power iteration count must be at least 1"));
        }
        if self.cosine_guidance && self.beta1 == 0.0 {
            return Err(invalid("cosine guidance requires beta1 > 0"));
        }
        if let Some(c) = self.guidance_clamp {
            if !(c >= 1.0) {
                return Err(invalid("guidance clamp must be at least 1"));
            }
        }
        if self.factor_min_dim == 0 {
            return Err(invalid("factor_min_dim must be at least 1"));
        }
        self.rank_policy.validate()
    }

    /// Whether an `rows x cols` parameter gets a factored second moment.
    pub fn is_factored(&self, rows: usize, cols: usize) -> bool {
        rows.min(cols) >= self.factor_min_dim
    }
}
