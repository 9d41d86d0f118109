//! Per-link user cost functions.
//!
//! Every supported form factors as `J(x, f) = w * x * T(f)` where `x` is the
//! user's own flow on the link, `f` the total link flow and `T` a per-unit
//! latency. That keeps value, marginal and curvature evaluation exact.

use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CostForm {
    /// M/M/1 delay `1 / (c - f)`; infinite once `f >= c`.
    Mm1 { capacity: f64 },
    /// `a + b f`
    Linear { a: f64, b: f64 },
    /// `a + b f^d`
    Power { a: f64, b: f64, d: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub form: CostForm,
    pub weight: f64,
}

impl CostModel {
    pub fn mm1(capacity: f64) -> Self {
        Self::new(CostForm::Mm1 { capacity })
    }

    pub fn linear(a: f64, b: f64) -> Self {
        Self::new(CostForm::Linear { a, b })
    }

    pub fn power(a: f64, b: f64, d: f64) -> Self {
        Self::new(CostForm::Power { a, b, d })
    }

    fn new(form: CostForm) -> Self {
        Self { form, weight: 1.0 }
    }

    pub fn weighted(mut self, weight: f64) -> Self {
        self.weight = weight;
        self
    }

    /// Checks the parameter ranges under which the form is a standard cost.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.weight.is_finite() && self.weight > 0.0) {
            return Err(format!("weight must be positive and finite, got {}", self.weight));
        }
        match self.form {
            CostForm::Mm1 { capacity } => {
                if !(capacity.is_finite() && capacity > 0.0) {
                    return Err(format!("mm1 capacity must be positive, got {capacity}"));
                }
            }
            CostForm::Linear { a, b } => {
                if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
                    return Err(format!("linear({a},{b}) needs a, b >= 0"));
                }
                if b == 0.0 {
                    return Err("linear cost needs b > 0 for strictly increasing marginals".into());
                }
            }
            CostForm::Power { a, b, d } => {
                if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= 0.0) {
                    return Err(format!("power({a},{b},{d}) needs a, b >= 0"));
                }
                if b == 0.0 {
                    return Err("power cost needs b > 0 for strictly increasing marginals".into());
                }
                if !(d.is_finite() && d >= 1.0) {
                    return Err(format!("power exponent must be >= 1, got {d}"));
                }
            }
        }
        Ok(())
    }

    /// Capacity beyond which the cost is infinite, if any.
    pub fn capacity(&self) -> Option<f64> {
        match self.form {
            CostForm::Mm1 { capacity } => Some(capacity),
            _ => None,
        }
    }

    /// Weighted per-unit latency `w T(f)`.
    pub fn latency(&self, total: f64) -> f64 {
        self.weight * self.unit_latency(total)
    }

    /// Weighted `w T'(f)`.
    pub fn latency_slope(&self, total: f64) -> f64 {
        self.weight * self.unit_slope(total)
    }

    fn unit_latency(&self, f: f64) -> f64 {
        match self.form {
            CostForm::Mm1 { capacity } => {
                if f < capacity {
                    1.0 / (capacity - f)
                } else {
                    f64::INFINITY
                }
            }
            CostForm::Linear { a, b } => a + b * f,
            CostForm::Power { a, b, d } => a + b * f.powf(d),
        }
    }

    fn unit_slope(&self, f: f64) -> f64 {
        match self.form {
            CostForm::Mm1 { capacity } => {
                if f < capacity {
                    let r = capacity - f;
                    1.0 / (r * r)
                } else {
                    f64::INFINITY
                }
            }
            CostForm::Linear { b, .. } => b,
            CostForm::Power { b, d, .. } => {
                if d == 1.0 {
                    b
                } else {
                    b * d * f.powf(d - 1.0)
                }
            }
        }
    }

    fn unit_curvature(&self, f: f64) -> f64 {
        match self.form {
            CostForm::Mm1 { capacity } => {
                if f < capacity {
                    let r = capacity - f;
                    2.0 / (r * r * r)
                } else {
                    f64::INFINITY
                }
            }
            CostForm::Linear { .. } => 0.0,
            CostForm::Power { b, d, .. } => {
                if d == 1.0 {
                    0.0
                } else if d == 2.0 {
                    2.0 * b
                } else {
                    b * d * (d - 1.0) * f.powf(d - 2.0)
                }
            }
        }
    }

    /// `J(own, total)`. Zero own flow costs nothing, even on a saturated link.
    pub fn value(&self, own: f64, total: f64) -> f64 {
        if own == 0.0 {
            return 0.0;
        }
        own * self.latency(total)
    }

    /// Derivative of `J` in the user's own flow, with the total moving
    /// along: `w (T(f) + x T'(f))`.
    pub fn marginal(&self, own: f64, total: f64) -> f64 {
        let t = self.latency(total);
        if own == 0.0 {
            return t;
        }
        t + own * self.latency_slope(total)
    }

    /// Derivative of [`Self::marginal`] in own flow: `w (2 T'(f) + x T''(f))`.
    pub fn marginal_slope(&self, own: f64, total: f64) -> f64 {
        let s = 2.0 * self.unit_slope(total);
        let c = if own == 0.0 {
            0.0
        } else {
            own * self.unit_curvature(total)
        };
        self.weight * (s + c)
    }

    /// Partial derivative of `J` in the total flow with own flow held fixed.
    pub fn total_partial(&self, own: f64, total: f64) -> f64 {
        if own == 0.0 {
            return 0.0;
        }
        own * self.latency_slope(total)
    }

    /// True when `total` lies in the finite-cost domain.
    pub fn admits(&self, total: f64) -> bool {
        match self.form {
            CostForm::Mm1 { capacity } => total < capacity,
            _ => true,
        }
    }
}

impl fmt::Display for CostModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.form {
            CostForm::Mm1 { capacity } => write!(f, "mm1({capacity})")?,
            CostForm::Linear { a, b } => write!(f, "linear({a},{b})")?,
            CostForm::Power { a, b, d } => write!(f, "power({a},{b},{d})")?,
        }
        if self.weight != 1.0 {
            write!(f, " * {}", self.weight)?;
        }
        Ok(())
    }
}
