//! Regular grids and the per-point sweeps behind gain and error maps.

use rayon::prelude::*;

use crate::allocation::precision_gain;
use crate::error::{Error, Result};
use crate::estimators::{EstimationContext, Estimator, TargetSpec};
use crate::model::Field;

/// Points per axis when none is given.
pub const DEFAULT_RESOLUTION: usize = 101;

/// Tensor grid over an axis-aligned box.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    pub bounds: Vec<(f64, f64)>,
    pub counts: Vec<usize>,
}

impl Grid {
    pub fn new(bounds: Vec<(f64, f64)>, counts: Vec<usize>) -> Result<Grid> {
        if bounds.is_empty() || bounds.len() != counts.len() {
            return Err(Error::SizeMismatch(format!(
                "{} bounds for {} axis counts",
                bounds.len(),
                counts.len()
            )));
        }
        if counts.contains(&0) {
            return Err(Error::InvalidArgument(
                "grid counts must be positive".into(),
            ));
        }
        if bounds
            .iter()
            .any(|(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo <= hi))
        {
            return Err(Error::InvalidArgument(
                "grid bounds must be finite with lo ≤ hi".into(),
            ));
        }
        Ok(Grid { bounds, counts })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn len(&self) -> usize {
        self.counts.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn coordinate(&self, axis: usize, i: usize) -> f64 {
        let (lo, hi) = self.bounds[axis];
        let n = self.counts[axis];
        if n == 1 {
            lo
        } else if i + 1 == n {
            hi
        } else {
            lo + (hi - lo) * i as f64 / (n - 1) as f64
        }
    }

    /// Grid point number `k`, with the first axis varying slowest.
    pub fn point(&self, mut k: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for axis in (0..self.dim()).rev() {
            let n = self.counts[axis];
            out[axis] = self.coordinate(axis, k % n);
            k /= n;
        }
        out
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }
}

fn interpolate(ctx: &EstimationContext, point: &[f64]) -> Result<Estimator> {
    let e = ctx.estimate(&TargetSpec::Interpolate {
        point: point.to_vec(),
    })?;
    if !e.error_free {
        return Err(Error::Undetermined(format!(
            "interpolation at {point:?}: {}",
            e.warnings.join("; ")
        )));
    }
    Ok(e)
}

fn sweep<F>(grid: &Grid, f: F) -> Result<Vec<(Vec<f64>, f64)>>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    (0..grid.len())
        .into_par_iter()
        .map(|k| {
            let p = grid.point(k);
            f(&p).map(|v| (p, v))
        })
        .collect()
}

/// Precision gain of the interpolation estimator at every grid point.
pub fn gain_map(ctx: &EstimationContext, grid: &Grid) -> Result<Vec<(Vec<f64>, f64)>> {
    sweep(grid, |p| precision_gain(&interpolate(ctx, p)?.c))
}

/// Interpolation residual against a known field at every grid point.
pub fn error_map(
    ctx: &EstimationContext,
    field: &dyn Field,
    grid: &Grid,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let values = ctx
        .points
        .iter()
        .map(|p| field.value(p))
        .collect::<Result<Vec<f64>>>()?;
    sweep(grid, |p| {
        let e = interpolate(ctx, p)?;
        Ok((e.apply(&values)? - field.value(p)?).abs())
    })
}
