use serde::{Deserialize, Serialize};

use crate::error::{shape_check, Error, Result};

/// Per-feature affine map of `[min, max]` onto `[-1, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeScaler {
    pub names: Vec<String>,
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl RangeScaler {
    pub fn fit(names: &[String], rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Config("cannot fit a scaler on zero rows".into()));
        }
        let d = names.len();
        let mut min = vec![f64::INFINITY; d];
        let mut max = vec![f64::NEG_INFINITY; d];
        for row in rows {
            shape_check("scaler row", d, row.len())?;
            for k in 0..d {
                min[k] = min[k].min(row[k]);
                max[k] = max[k].max(row[k]);
            }
        }
        if let Some(k) = (0..d).find(|&k| max[k] <= min[k]) {
            return Err(Error::Config(format!(
                "feature '{}' is constant ({}) on the training partition",
                names[k], min[k]
            )));
        }
        Ok(Self {
            names: names.to_vec(),
            min,
            max,
        })
    }

    pub fn fit_column(name: &str, values: &[f64]) -> Result<Self> {
        let rows: Vec<Vec<f64>> = values.iter().map(|&v| vec![v]).collect();
        Self::fit(&[name.to_string()], &rows)
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn scale(&self, k: usize, x: f64) -> f64 {
        2.0 * (x - self.min[k]) / (self.max[k] - self.min[k]) - 1.0
    }

    pub fn unscale(&self, k: usize, y: f64) -> f64 {
        (y + 1.0) * 0.5 * (self.max[k] - self.min[k]) + self.min[k]
    }

    /// Half-width of feature `k`'s range, i.e. `dx/dy` of [`Self::unscale`].
    pub fn half_range(&self, k: usize) -> f64 {
        0.5 * (self.max[k] - self.min[k])
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        shape_check("scaler input", self.dim(), x.len())?;
        Ok(x.iter().enumerate().map(|(k, &v)| self.scale(k, v)).collect())
    }

    pub fn invert(&self, y: &[f64]) -> Result<Vec<f64>> {
        shape_check("scaler input", self.dim(), y.len())?;
        Ok(y.iter().enumerate().map(|(k, &v)| self.unscale(k, v)).collect())
    }
}
