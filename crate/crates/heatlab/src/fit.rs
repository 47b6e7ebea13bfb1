//! Extrapolation carrier for small-time limits.

use crate::error::{HeatLabError, Result};
use crate::numeric::affine_fit;

/// Values v(t) on a strictly decreasing time grid together with the
/// extrapolated limit: the intercept of the least-squares affine fit
/// v ~ a + b t over the three smallest grid times.
#[derive(Debug, Clone)]
pub struct LimitFit {
    pub t_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub fitted_limit: f64,
    pub fit_slope: f64,
    pub fit_residual: f64,
}

pub fn check_t_grid(t_grid: &[f64]) -> Result<()> {
    if t_grid.len() < 3 {
        return Err(HeatLabError::BadTimeGrid { min: 3 });
    }
    for w in t_grid.windows(2) {
        if !(w[1] < w[0]) {
            return Err(HeatLabError::BadTimeGrid { min: 3 });
        }
    }
    if !(t_grid[t_grid.len() - 1] > 0.0) {
        return Err(HeatLabError::BadTimeGrid { min: 3 });
    }
    Ok(())
}

impl LimitFit {
    pub fn new(t_grid: Vec<f64>, values: Vec<f64>) -> Result<LimitFit> {
        check_t_grid(&t_grid)?;
        assert_eq!(t_grid.len(), values.len());
        let k = t_grid.len();
        // grid is decreasing: the three smallest times are the last three
        let ts = &t_grid[k - 3..];
        let vs = &values[k - 3..];
        let (a, b, res) = affine_fit(ts, vs);
        Ok(LimitFit {
            t_grid,
            values,
            fitted_limit: a,
            fit_slope: b,
            fit_residual: res,
        })
    }
}
