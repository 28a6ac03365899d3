use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::optim::config::{AdapproxConfig, OptimizerKind};

const MIB: f64 = 1024.0 * 1024.0;

fn default_element_bytes() -> usize {
    4
}

/// One named parameter tensor.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamShape {
    pub name: String,
    pub dims: Vec<usize>,
}

impl ParamShape {
    pub fn new(name: impl Into<String>, dims: &[usize]) -> Self {
        Self {
            name: name.into(),
            dims: dims.to_vec(),
        }
    }

    pub fn size(&self) -> usize {
        self.dims.iter().product()
    }
}

/// Parameter inventory used for analytic state accounting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShapeManifest {
    #[serde(default)]
    pub name: Option<String>,
    pub params: Vec<ParamShape>,
    #[serde(default = "default_element_bytes")]
    pub element_bytes: usize,
}

impl ShapeManifest {
    pub fn new(params: Vec<ParamShape>) -> Self {
        Self {
            name: None,
            params,
            element_bytes: default_element_bytes(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.params.is_empty() {
            return Err(invalid("manifest lists no parameters"));
        }
        if self.element_bytes == 0 {
            return Err(invalid("element_bytes must be positive"));
        }
        for p in &self.params {
            if p.dims.is_empty() || p.dims.contains(&0) {
                return Err(invalid(format!("parameter `{}` has an empty dimension", p.name)));
            }
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(ParamShape::size).sum()
    }
}

/// Rank assumed for every factored Adapprox parameter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankMode {
    KInit,
    KMax,
}

impl RankMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::KInit => "k_init",
            Self::KMax => "k_max",
        }
    }
}

/// Optimizer state size for one manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct MemoryReport {
    pub optimizer: OptimizerKind,
    /// Only meaningful for Adapprox.
    pub rank_mode: RankMode,
    pub elements: u64,
    pub bytes: u64,
    pub adamw_bytes: u64,
}

impl MemoryReport {
    pub fn mib(&self) -> f64 {
        self.bytes as f64 / MIB
    }

    /// Size relative to AdamW, in percent.
    pub fn percent_of_adamw(&self) -> f64 {
        100.0 * self.bytes as f64 / self.adamw_bytes as f64
    }

    pub fn label(&self) -> String {
        match self.optimizer {
            OptimizerKind::Adapprox => format!("adapprox ({})", self.rank_mode.name()),
            k => k.name().to_string(),
        }
    }
}

fn state_elements(p: &ParamShape, kind: OptimizerKind, cfg: &AdapproxConfig, mode: RankMode) -> u64 {
    let s = p.size() as u64;
    let first = if cfg.beta1 > 0.0 { s } else { 0 };
    let matrix = match p.dims.as_slice() {
        &[m, n] if cfg.is_factored(m, n) => Some((m, n)),
        _ => None,
    };
    match (kind, matrix) {
        (OptimizerKind::AdamW, _) => 2 * s,
        (_, None) => first + s,
        (OptimizerKind::Adafactor, Some((m, n))) => first + (m + n) as u64,
        (OptimizerKind::Adapprox, Some((m, n))) => {
            let k = match mode {
                RankMode::KInit => cfg.rank_policy.k_start(m, n),
                RankMode::KMax => cfg.rank_policy.k_max(m, n),
            };
            first + (k * (m + n)) as u64
        }
    }
}

/// Analytic optimizer-state size of `manifest` under `kind`.
///
/// Two-dimensional parameters whose dimensions both reach
/// `cfg.factor_min_dim` are factored; everything else keeps a dense second
/// moment. The first moment is counted only when `β1 > 0`, except for AdamW
/// which always stores `2·size`.
pub fn memory_bytes(
    manifest: &ShapeManifest,
    kind: OptimizerKind,
    cfg: &AdapproxConfig,
    mode: RankMode,
) -> Result<MemoryReport> {
    manifest.validate()?;
    let count = |k: OptimizerKind| -> u64 {
        manifest.params.iter().map(|p| state_elements(p, k, cfg, mode)).sum()
    };
    let elements = count(kind);
    let eb = manifest.element_bytes as u64;
    Ok(MemoryReport {
        optimizer: kind,
        rank_mode: mode,
        elements,
        bytes: elements * eb,
        adamw_bytes: count(OptimizerKind::AdamW) * eb,
    })
}
