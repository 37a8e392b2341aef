//! Kernel regression plug-ins for the martingale transform.
//!
//! Nadaraya-Watson smoothing of conditional means along a one-dimensional
//! projection. The conditional residual variance is floored at a fraction of
//! the mean squared residual so the transform never divides by a vanishing
//! variance estimate in sparse regions.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Smoothing kernels. `Quartic` is the compactly supported biweight
/// (15/16)(1 - u^2)^2 on [-1, 1]; `Gaussian` is the standard normal density.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kernel {
    Gaussian,
    Quartic,
}

impl Kernel {
    /// Kernel weight at scaled distance `u`.
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt(),
            Kernel::Quartic => {
                if u.abs() <= 1.0 {
                    let w = 1.0 - u * u;
                    15.0 / 16.0 * w * w
                } else {
                    0.0
                }
            }
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "gaussian" => Ok(Kernel::Gaussian),
            "quartic" => Ok(Kernel::Quartic),
            other => Err(Error::invalid(format!(
                "unknown kernel '{other}' (expected gaussian or quartic)"
            ))),
        }
    }
}

/// Kernel and bandwidth choice for the smoothers. A `None` bandwidth selects
/// the normal-reference rule 1.06 sd n^(-1/5) on the projection values.
#[derive(Clone, Copy, Debug)]
pub struct SmoothingConfig {
    pub kernel: Kernel,
    pub bandwidth: Option<f64>,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig { kernel: Kernel::Gaussian, bandwidth: None }
    }
}

impl SmoothingConfig {
    /// Resolve the bandwidth for the given projection sample.
    pub fn resolve_bandwidth(&self, points: &[f64]) -> Result<f64> {
        match self.bandwidth {
            Some(h) if h > 0.0 && h.is_finite() => Ok(h),
            Some(h) => Err(Error::invalid(format!("bandwidth must be positive, got {h}"))),
            None => {
                let h = normal_reference_bandwidth(points);
                if h <= 0.0 {
                    return Err(Error::degenerate(
                        "projection sample has zero spread, no data-driven bandwidth",
                    ));
                }
                Ok(h)
            }
        }
    }
}

/// Normal-reference bandwidth 1.06 sd n^(-1/5) with the divisor-n standard
/// deviation.
pub fn normal_reference_bandwidth(points: &[f64]) -> f64 {
    let n = points.len();
    if n < 2 {
        return 0.0;
    }
    let mean = points.iter().sum::<f64>() / n as f64;
    let var = points.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    1.06 * var.sqrt() * (n as f64).powf(-0.2)
}

/// Nadaraya-Watson estimate of E[w | point = v] at each `at` value.
///
/// The estimate is a weight-convex combination of in-window `weights`, so it
/// stays inside their range. When every kernel weight vanishes (or
/// underflows) at an evaluation point, the value of the nearest sample point
/// is used instead.
pub fn nw(points: &[f64], weights: &[f64], at: &[f64], kernel: Kernel, bandwidth: f64) -> Result<Vec<f64>> {
    if points.len() != weights.len() {
        return Err(Error::invalid("points and weights lengths differ"));
    }
    if points.is_empty() {
        return Err(Error::invalid("empty smoothing sample"));
    }
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::invalid(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let mut out = Vec::with_capacity(at.len());
    for &v in at {
        let mut num = 0.0;
        let mut den = 0.0;
        for (&pt, &w) in points.iter().zip(weights) {
            let k = kernel.eval((v - pt) / bandwidth);
            num += k * w;
            den += k;
        }
        if den > 0.0 {
            out.push(num / den);
        } else {
            // Empty window: fall back to the nearest point's weight.
            let mut arg = 0;
            let mut best = f64::INFINITY;
            for (i, &pt) in points.iter().enumerate() {
                let dist = (v - pt).abs();
                if dist < best {
                    best = dist;
                    arg = i;
                }
            }
            out.push(weights[arg]);
        }
    }
    Ok(out)
}

/// Conditional moment estimates along a projection.
#[derive(Clone, Debug)]
pub struct ConditionalMoments {
    /// Floored conditional variance of the residuals at each projection point.
    pub sigma2: Vec<f64>,
    /// Conditional mean of each predictor column at each projection point
    /// (rows follow the projection sample), present only when requested.
    pub r_hat: Option<DMatrix<f64>>,
    /// Bandwidth actually used.
    pub bandwidth: f64,
    /// The variance floor 0.05 mean(residual^2).
    pub floor: f64,
    /// How many sigma2 values were raised to the floor.
    pub floor_active: usize,
}

/// Estimate sigma^2(v) = E[e^2 | projection = v] at the sample points, and
/// optionally r(v) = E[x | projection = v] column by column.
///
/// All-zero residuals are a degenerate fit: the variance target is
/// identically zero and the transform built on it is undefined.
pub fn conditional_moments(
    projections: &[f64],
    residuals: &[f64],
    x: Option<&DMatrix<f64>>,
    config: &SmoothingConfig,
) -> Result<ConditionalMoments> {
    let n = projections.len();
    if residuals.len() != n {
        return Err(Error::invalid("projections and residuals lengths differ"));
    }
    if n == 0 {
        return Err(Error::invalid("empty sample"));
    }
    let mean_sq = residuals.iter().map(|e| e * e).sum::<f64>() / n as f64;
    if mean_sq == 0.0 {
        return Err(Error::degenerate("all residuals are zero"));
    }
    let bandwidth = config.resolve_bandwidth(projections)?;
    let sq: Vec<f64> = residuals.iter().map(|e| e * e).collect();
    let raw = nw(projections, &sq, projections, config.kernel, bandwidth)?;
    let floor = 0.05 * mean_sq;
    let mut floor_active = 0;
    let sigma2: Vec<f64> = raw
        .into_iter()
        .map(|v| {
            if v < floor {
                floor_active += 1;
                floor
            } else {
                v
            }
        })
        .collect();
    let r_hat = match x {
        Some(x) => {
            if x.nrows() != n {
                return Err(Error::invalid("x rows and projections length differ"));
            }
            let p = x.ncols();
            let mut r = DMatrix::zeros(n, p);
            for j in 0..p {
                let col: Vec<f64> = x.column(j).iter().copied().collect();
                let sm = nw(projections, &col, projections, config.kernel, bandwidth)?;
                for i in 0..n {
                    r[(i, j)] = sm[i];
                }
            }
            Some(r)
        }
        None => None,
    };
    Ok(ConditionalMoments { sigma2, r_hat, bandwidth, floor, floor_active })
}
