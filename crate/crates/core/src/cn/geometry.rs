use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    #[serde(default = "one")]
    pub confidence: f64,
}

fn one() -> f64 {
    1.0
}

impl BoundingBox {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, confidence: f64) -> Result<Self> {
        let b = Self {
            x_min,
            y_min,
            x_max,
            y_max,
            confidence,
        };
        b.validate()?;
        Ok(b)
    }

    /// Ground-truth box, confidence 1.
    pub fn truth(x_min: f64, y_min: f64, x_max: f64, y_max: f64) -> Result<Self> {
        Self::new(x_min, y_min, x_max, y_max, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return Err(Error::invalid_input(format!(
                "degenerate box ({}, {})-({}, {})",
                self.x_min, self.y_min, self.x_max, self.y_max
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::invalid_input(format!(
                "box confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }
}

/// Intersection over union; 0 for disjoint or edge-touching boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let w = a.x_max.min(b.x_max) - a.x_min.max(b.x_min);
    let h = a.y_max.min(b.y_max) - a.y_min.max(b.y_min);
    if w <= 0.0 || h <= 0.0 {
        return 0.0;
    }
    let inter = w * h;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}
