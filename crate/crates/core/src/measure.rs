use serde::{Deserialize, Serialize};

/// A statistic that may be undefined on degenerate input (zero variance, 0/0).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Measure {
    Defined { value: f64 },
    Undefined { reason: String },
}

impl Measure {
    pub fn defined(value: f64) -> Self {
        Measure::Defined { value }
    }

    pub fn undefined(reason: impl Into<String>) -> Self {
        Measure::Undefined { reason: reason.into() }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Measure::Defined { value } => Some(*value),
            Measure::Undefined { .. } => None,
        }
    }

    /// Ratio `num / den`, undefined when `den` is zero.
    pub fn ratio(num: f64, den: f64, reason: &str) -> Self {
        if den == 0.0 {
            Measure::undefined(reason)
        } else {
            Measure::defined(num / den)
        }
    }
}

/// Pearson correlation, undefined for fewer than two pairs or zero variance.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Measure {
    debug_assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n < 2 {
        return Measure::undefined("fewer than two observations");
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Measure::undefined("zero variance");
    }
    Measure::defined((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}
