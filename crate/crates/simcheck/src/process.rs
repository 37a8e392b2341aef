//! Residual-marked empirical process and its empirical martingale transform.
//!
//! The marked process cumulates scaled residuals over half-lines of a
//! one-dimensional projection of the predictors. Under a correct model it
//! converges to a Brownian-type limit plus an estimation drift; the
//! transform subtracts an empirical compensator built from plug-in
//! conditional moments so that, inside a trimmed range of the projection,
//! the transformed process behaves like time-changed Brownian motion no
//! matter which parametric family was fitted.
//!
//! Two transform variants are provided. The spherical mode compensates with
//! the scalar product `g1(u k) u k` of the fitted link derivative and the
//! rescaled projection (k is the reciprocal fitted index norm); it is the
//! default and is exact for index-only alternatives. The general mode uses
//! the full score vector with a smoothed conditional predictor mean, at the
//! price of a matrix pseudo-inverse per jump point.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::kernel::{conditional_moments, SmoothingConfig};
use crate::model::{Dataset, ModelFamily};
use crate::nls::FitResult;

/// Residual-marked empirical process along one projection,
/// V(u) = n^(-1/2) sum_i e_i 1(u_i <= u), stored at its jump points.
#[derive(Clone, Debug)]
pub struct MarkedProcess {
    /// Projection values sorted ascending; ties keep input order.
    pub jump_points: Vec<f64>,
    /// Process values at the jump points. Tied points share one value that
    /// includes every mark of the tie group.
    pub values: Vec<f64>,
    /// Marks (residuals) in sorted-projection order.
    pub marks: Vec<f64>,
    /// Original observation index of each sorted position.
    pub order: Vec<usize>,
}

impl MarkedProcess {
    pub fn len(&self) -> usize {
        self.jump_points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_points.is_empty()
    }
}

/// Build the marked process from projections and residual marks.
pub fn marked_process(projections: &[f64], residuals: &[f64]) -> Result<MarkedProcess> {
    let n = projections.len();
    if n == 0 {
        return Err(Error::invalid("empty projection sample"));
    }
    if residuals.len() != n {
        return Err(Error::invalid("projections and residuals lengths differ"));
    }
    if projections.iter().chain(residuals).any(|v| !v.is_finite()) {
        return Err(Error::invalid("non-finite projection or residual"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| projections[a].partial_cmp(&projections[b]).expect("finite"));
    let jump_points: Vec<f64> = order.iter().map(|&i| projections[i]).collect();
    let marks: Vec<f64> = order.iter().map(|&i| residuals[i]).collect();
    let scale = 1.0 / (n as f64).sqrt();
    let mut values = vec![0.0; n];
    let mut cum = 0.0;
    let mut k = 0;
    while k < n {
        let mut j = k;
        while j < n && jump_points[j] == jump_points[k] {
            cum += marks[j] * scale;
            j += 1;
        }
        for slot in &mut values[k..j] {
            *slot = cum;
        }
        k = j;
    }
    Ok(MarkedProcess { jump_points, values, marks, order })
}

/// Which compensator the martingale transform uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformMode {
    /// Scalar compensator from the link derivative times the rescaled
    /// projection. Default.
    Spherical,
    /// Full score compensator with a smoothed conditional predictor mean.
    General,
}

/// Configuration of [`transform`].
#[derive(Clone, Debug)]
pub struct TransformConfig {
    pub mode: TransformMode,
    pub smoothing: SmoothingConfig,
    /// Jump points up to this empirical-distribution quantile are retained.
    pub u0_quantile: f64,
}

impl Default for TransformConfig {
    fn default() -> Self {
        TransformConfig {
            mode: TransformMode::Spherical,
            smoothing: SmoothingConfig::default(),
            u0_quantile: 0.99,
        }
    }
}

/// Plug-in ingredients of the transform, one row per sorted jump point.
#[derive(Clone, Debug)]
pub struct TransformPlugins {
    /// Floored conditional residual variance at each jump point.
    pub sigma2: Vec<f64>,
    /// Weighting vectors a(u_k) (n x m; m = 1 in spherical mode).
    pub a_rows: DMatrix<f64>,
    /// Integrand vectors of the compensator matrix A (n x m).
    pub w_rows: DMatrix<f64>,
    /// Bandwidth used by the conditional-moment smoother.
    pub bandwidth: f64,
    /// How many variance values were raised to the floor.
    pub floor_active: usize,
}

/// The transformed process at the jump points of its marked process.
#[derive(Clone, Debug)]
pub struct TransformedProcess {
    /// Sorted projection values (copied from the marked process).
    pub jump_points: Vec<f64>,
    /// Original observation index per sorted position.
    pub order: Vec<usize>,
    /// Transformed process values at the jump points.
    pub values: Vec<f64>,
    /// Untransformed marked-process values.
    pub raw_values: Vec<f64>,
    /// Conditional variance plug-in at the jump points.
    pub sigma2: Vec<f64>,
    /// Plug-in a vectors, n x m.
    pub a_values: DMatrix<f64>,
    /// Compensator matrices A(u_k), row-major flattened to n x m^2.
    pub a_matrices: DMatrix<f64>,
    /// Whether a jump point enters statistics: inside the trimmed range and
    /// with a non-degenerate compensator.
    pub retained: Vec<bool>,
    /// Largest retained projection value (the trimming point).
    pub u0: f64,
    pub retained_count: usize,
    /// In-range points dropped for a degenerate compensator.
    pub dropped_degenerate: usize,
    pub mode: TransformMode,
    pub bandwidth: f64,
    pub floor_active: usize,
}

/// Relative floor for the general-mode compensator matrix: a jump point is
/// dropped once the smallest singular value of its compensator falls below
/// this fraction of the full-range scale, and the same fraction regularizes
/// the pseudo-inverse of the matrices that are kept.
const GENERAL_PINV_CUTOFF: f64 = 1e-8;
/// A spherical compensator below this fraction of its full-sample value is
/// treated as degenerate.
const SPHERICAL_DEGENERATE: f64 = 1e-10;

/// Compute the plug-in ingredients for transforming `mp`.
///
/// The variance smoother runs on the marks of `mp`; in general mode the
/// conditional predictor mean is smoothed along the same projection.
pub fn transform_plugins(
    mp: &MarkedProcess,
    data: &Dataset,
    family: &ModelFamily,
    fit: &FitResult,
    config: &TransformConfig,
) -> Result<TransformPlugins> {
    let n = mp.len();
    if data.n() != n {
        return Err(Error::invalid("marked process and data sizes differ"));
    }
    let beta_norm = fit.gamma_hat.beta.norm();
    if !(beta_norm > 0.0) {
        return Err(Error::estimation("fitted index coefficient is zero"));
    }
    let theta = &fit.gamma_hat.theta;
    let p = data.p();
    let d = family.d();

    let need_rhat = config.mode == TransformMode::General;
    let x_sorted = if need_rhat {
        Some(DMatrix::from_fn(n, p, |r, c| data.x()[(mp.order[r], c)]))
    } else {
        None
    };
    let moments = conditional_moments(&mp.jump_points, &mp.marks, x_sorted.as_ref(), &config.smoothing)?;

    let m = match config.mode {
        TransformMode::Spherical => 1,
        TransformMode::General => p + d,
    };
    let mut a_rows = DMatrix::zeros(n, m);
    let mut w_rows = DMatrix::zeros(n, m);
    match config.mode {
        TransformMode::Spherical => {
            for k in 0..n {
                // Index scale recovered through the reciprocal norm of beta.
                let t = mp.jump_points[k] * beta_norm;
                let b = family.link_d1(t, theta) * t;
                a_rows[(k, 0)] = b / moments.sigma2[k];
                w_rows[(k, 0)] = b;
            }
        }
        TransformMode::General => {
            let r_hat = moments.r_hat.as_ref().expect("requested above");
            for k in 0..n {
                let t = mp.jump_points[k] * beta_norm;
                let g1 = family.link_d1(t, theta);
                for j in 0..p {
                    a_rows[(k, j)] = g1 * r_hat[(k, j)] / moments.sigma2[k];
                }
                if d > 0 {
                    let g2 = family.link_dtheta(t, theta);
                    for j in 0..d {
                        a_rows[(k, p + j)] = g2[j] / moments.sigma2[k];
                    }
                }
                let xi = data.x().row(mp.order[k]).transpose();
                let score = family.score(&fit.gamma_hat, &xi)?;
                for j in 0..m {
                    w_rows[(k, j)] = score[j];
                }
            }
        }
    }
    Ok(TransformPlugins {
        sigma2: moments.sigma2,
        a_rows,
        w_rows,
        bandwidth: moments.bandwidth,
        floor_active: moments.floor_active,
    })
}

/// Tie-group boundaries (start, one-past-end) of a sorted slice.
fn tie_groups(sorted: &[f64]) -> Vec<(usize, usize)> {
    let n = sorted.len();
    let mut groups = Vec::new();
    let mut k = 0;
    while k < n {
        let mut j = k;
        while j < n && sorted[j] == sorted[k] {
            j += 1;
        }
        groups.push((k, j));
        k = j;
    }
    groups
}

struct CoreOutput {
    values: Vec<f64>,
    retained: Vec<bool>,
    u0: f64,
    retained_count: usize,
    dropped: usize,
    a_matrices: DMatrix<f64>,
}

/// Shared compensator arithmetic: subtract
/// sum_{i: u_i <= u} sigma2_i a_i' pinv(A_i) W_i / n from the process,
/// where A_i = (1/n) sum_{j: u_j >= u_i} a_j w_j' and
/// W_i = sum_{j: u_j >= u_i} a_j delta_j.
fn transform_core(
    u: &[f64],
    delta: &[f64],
    f_values: &[f64],
    a_rows: &DMatrix<f64>,
    w_rows: &DMatrix<f64>,
    sigma2: &[f64],
    u0_quantile: f64,
) -> Result<CoreOutput> {
    let n = u.len();
    let m = a_rows.ncols();
    if !(u0_quantile > 0.0 && u0_quantile <= 1.0) {
        return Err(Error::invalid("trimming quantile must lie in (0, 1]"));
    }
    let groups = tie_groups(u);

    // Trimmed range: empirical CDF at the point must not exceed the quantile.
    let mut in_range = vec![false; n];
    let mut u0 = f64::NEG_INFINITY;
    for &(s, e) in &groups {
        let ecdf = e as f64 / n as f64;
        if ecdf <= u0_quantile + 1e-12 {
            for slot in &mut in_range[s..e] {
                *slot = true;
            }
            u0 = u[s];
        }
    }
    if u0 == f64::NEG_INFINITY {
        return Err(Error::estimation("no jump points inside the trimmed range"));
    }

    let mut a_matrices = DMatrix::zeros(n, m * m);
    let mut increments = vec![0.0; n];
    let mut dropped_flags = vec![false; n];
    let mut dropped = 0usize;

    if m == 1 {
        // Scalar fast path: suffix sums right to left, tie groups first.
        let mut a_suf = 0.0f64;
        let mut w_suf = 0.0f64;
        let mut a_point = vec![0.0; n];
        let mut w_point = vec![0.0; n];
        for &(s, e) in groups.iter().rev() {
            for k in s..e {
                a_suf += a_rows[(k, 0)] * w_rows[(k, 0)];
                w_suf += a_rows[(k, 0)] * delta[k];
            }
            for k in s..e {
                a_point[k] = a_suf / n as f64;
                w_point[k] = w_suf;
            }
        }
        let a_full = a_point[0];
        for k in 0..n {
            a_matrices[(k, 0)] = a_point[k];
            if a_point[k].abs() <= SPHERICAL_DEGENERATE * a_full.abs() {
                dropped_flags[k] = true;
                if in_range[k] {
                    dropped += 1;
                }
                continue;
            }
            increments[k] = sigma2[k] * a_rows[(k, 0)] * w_point[k] / (a_point[k] * n as f64);
        }
    } else {
        let mut a_suf = DMatrix::zeros(m, m);
        let mut w_suf = DVector::zeros(m);
        let mut a_point: Vec<DMatrix<f64>> = vec![DMatrix::zeros(0, 0); n];
        let mut w_point: Vec<DVector<f64>> = vec![DVector::zeros(0); n];
        for &(s, e) in groups.iter().rev() {
            for k in s..e {
                let a_k = a_rows.row(k).transpose();
                let w_k = w_rows.row(k).transpose();
                a_suf += &a_k * w_k.transpose();
                w_suf += a_k * delta[k];
            }
            for k in s..e {
                a_point[k] = &a_suf / n as f64;
                w_point[k] = w_suf.clone();
            }
        }
        let full_scale = a_point[0].clone().svd(false, false).singular_values.max();
        for k in 0..n {
            for r in 0..m {
                for c in 0..m {
                    a_matrices[(k, r * m + c)] = a_point[k][(r, c)];
                }
            }
            let svd = a_point[k].clone().svd(true, true);
            let smax = svd.singular_values.max();
            let smin = svd.singular_values.min();
            // The compensator matrices shrink (in the positive semidefinite
            // order) along the sorted sample, so once the smallest singular
            // value falls under the floor it stays there: the dropped points
            // form a suffix. Every retained increment therefore inverts a
            // genuinely nonsingular matrix, which is what keeps the
            // estimation-drift cancellation exact in floating point.
            if smin <= GENERAL_PINV_CUTOFF * full_scale {
                dropped_flags[k] = true;
                if in_range[k] {
                    dropped += 1;
                }
                continue;
            }
            let pinv = svd
                .pseudo_inverse(GENERAL_PINV_CUTOFF * smax)
                .map_err(|e| Error::estimation(format!("compensator pseudo-inverse failed: {e}")))?;
            let a_k = a_rows.row(k).transpose();
            increments[k] = sigma2[k] * a_k.dot(&(&pinv * &w_point[k])) / n as f64;
        }
    }

    // Cumulative compensator, shared across tie groups.
    let mut values = vec![0.0; n];
    let mut cum = 0.0;
    for &(s, e) in &groups {
        for k in s..e {
            cum += increments[k];
        }
        for k in s..e {
            values[k] = f_values[k] - cum;
        }
    }

    let mut retained = vec![false; n];
    let mut retained_count = 0;
    for k in 0..n {
        retained[k] = in_range[k] && !dropped_flags[k];
        if retained[k] {
            retained_count += 1;
        }
    }
    if retained_count == 0 {
        return Err(Error::estimation("every jump point was dropped as degenerate"));
    }
    Ok(CoreOutput { values, retained, u0, retained_count, dropped, a_matrices })
}

/// Transform a marked process with externally supplied plug-ins.
///
/// The transform is linear in the marks of `mp` when the plug-ins are held
/// fixed, which is what makes the compensator annihilate estimation drift.
pub fn transform_with_plugins(
    mp: &MarkedProcess,
    plugins: &TransformPlugins,
    mode: TransformMode,
    u0_quantile: f64,
) -> Result<TransformedProcess> {
    let n = mp.len();
    if plugins.sigma2.len() != n || plugins.a_rows.nrows() != n || plugins.w_rows.nrows() != n {
        return Err(Error::invalid("plug-in rows and marked process length differ"));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let delta: Vec<f64> = mp.marks.iter().map(|e| e * scale).collect();
    let core = transform_core(
        &mp.jump_points,
        &delta,
        &mp.values,
        &plugins.a_rows,
        &plugins.w_rows,
        &plugins.sigma2,
        u0_quantile,
    )?;
    Ok(TransformedProcess {
        jump_points: mp.jump_points.clone(),
        order: mp.order.clone(),
        values: core.values,
        raw_values: mp.values.clone(),
        sigma2: plugins.sigma2.clone(),
        a_values: plugins.a_rows.clone(),
        a_matrices: core.a_matrices,
        retained: core.retained,
        u0: core.u0,
        retained_count: core.retained_count,
        dropped_degenerate: core.dropped,
        mode,
        bandwidth: plugins.bandwidth,
        floor_active: plugins.floor_active,
    })
}

/// Martingale-transform a residual-marked process.
pub fn transform(
    mp: &MarkedProcess,
    data: &Dataset,
    family: &ModelFamily,
    fit: &FitResult,
    config: &TransformConfig,
) -> Result<TransformedProcess> {
    let plugins = transform_plugins(mp, data, family, fit, config)?;
    transform_with_plugins(mp, &plugins, config.mode, config.u0_quantile)
}

/// Result of applying the transform to the smoothed score drift.
#[derive(Clone, Debug)]
pub struct AnnihilationReport {
    /// Largest absolute transformed drift value over retained jump points.
    pub max_abs: f64,
    /// Norm of the coefficient vector the drift was built from.
    pub c_norm: f64,
    pub n: usize,
}

/// Apply the transform to the deterministic drift
/// u -> (1/n) sum_i c' b(u_i) 1(u_i <= u), where b is the smoothed score
/// used by the compensator. The result is zero in exact arithmetic because
/// the compensator matrix is built from the same sample quantities; the
/// reported maximum is pure floating-point noise and should be at most
/// about 1e-8 ||c|| sqrt(n).
///
/// In spherical mode the drift is scalar and `c` may be omitted (taken as
/// 1); in general mode `c` must have length p + d.
pub fn annihilation_check(
    data: &Dataset,
    family: &ModelFamily,
    fit: &FitResult,
    projections: &[f64],
    config: &TransformConfig,
    c: Option<&DVector<f64>>,
) -> Result<AnnihilationReport> {
    let n = data.n();
    let residuals: Vec<f64> = fit.residuals.iter().copied().collect();
    let mp = marked_process(projections, &residuals)?;
    let beta_norm = fit.gamma_hat.beta.norm();
    if !(beta_norm > 0.0) {
        return Err(Error::estimation("fitted index coefficient is zero"));
    }
    let theta = &fit.gamma_hat.theta;
    let p = data.p();
    let d = family.d();

    let (m, c_vec) = match config.mode {
        TransformMode::Spherical => {
            let c_vec = match c {
                Some(v) if v.len() == 1 => v.clone(),
                Some(_) => return Err(Error::invalid("spherical drift takes a scalar coefficient")),
                None => DVector::from_element(1, 1.0),
            };
            (1, c_vec)
        }
        TransformMode::General => match c {
            Some(v) if v.len() == p + d => (p + d, v.clone()),
            _ => return Err(Error::invalid("general drift needs a coefficient of length p + d")),
        },
    };

    let x_sorted = (config.mode == TransformMode::General)
        .then(|| DMatrix::from_fn(n, p, |r, col| data.x()[(mp.order[r], col)]));
    let moments = conditional_moments(&mp.jump_points, &mp.marks, x_sorted.as_ref(), &config.smoothing)?;

    // Smoothed score rows; the compensator uses the same rows, which is what
    // makes the cancellation exact.
    let mut b_rows = DMatrix::zeros(n, m);
    for k in 0..n {
        let t = mp.jump_points[k] * beta_norm;
        match config.mode {
            TransformMode::Spherical => {
                b_rows[(k, 0)] = family.link_d1(t, theta) * t;
            }
            TransformMode::General => {
                let r_hat = moments.r_hat.as_ref().expect("requested above");
                let g1 = family.link_d1(t, theta);
                for j in 0..p {
                    b_rows[(k, j)] = g1 * r_hat[(k, j)];
                }
                if d > 0 {
                    let g2 = family.link_dtheta(t, theta);
                    for j in 0..d {
                        b_rows[(k, p + j)] = g2[j];
                    }
                }
            }
        }
    }
    let mut a_rows = b_rows.clone();
    for k in 0..n {
        for j in 0..m {
            a_rows[(k, j)] /= moments.sigma2[k];
        }
    }

    // Drift jumps and values.
    let mut delta = vec![0.0; n];
    for k in 0..n {
        let mut dot = 0.0;
        for j in 0..m {
            dot += b_rows[(k, j)] * c_vec[j];
        }
        delta[k] = dot / n as f64;
    }
    let groups = tie_groups(&mp.jump_points);
    let mut f_values = vec![0.0; n];
    let mut cum = 0.0;
    for &(s, e) in &groups {
        for k in s..e {
            cum += delta[k];
        }
        for k in s..e {
            f_values[k] = cum;
        }
    }

    let core = transform_core(
        &mp.jump_points,
        &delta,
        &f_values,
        &a_rows,
        &b_rows,
        &moments.sigma2,
        config.u0_quantile,
    )?;
    let mut max_abs = 0.0f64;
    for k in 0..n {
        if core.retained[k] {
            max_abs = max_abs.max(core.values[k].abs());
        }
    }
    Ok(AnnihilationReport { max_abs, c_norm: c_vec.norm(), n })
}

/// Deterministic grid of unit directions with nonnegative first coordinate.
#[derive(Clone, Debug)]
pub struct DirectionSet {
    pub q: usize,
    /// Unit direction vectors; the first is always the first coordinate axis.
    pub directions: Vec<DVector<f64>>,
}

/// Build the direction grid on the half-sphere {a: ||a|| = 1, a_1 >= 0}.
///
/// q = 1 yields the single direction (1). q = 2 uses an evenly spaced
/// angular grid of the half-circle. Higher q maps a Halton sequence through
/// the normal quantile function to the sphere, mirroring points into the
/// half-sphere. The first coordinate axis is always included, so the grid
/// sup is never below the reference-direction value.
pub fn direction_grid(q: usize, n_directions: usize) -> Result<DirectionSet> {
    if q == 0 {
        return Err(Error::invalid("direction dimension must be positive"));
    }
    if n_directions == 0 {
        return Err(Error::invalid("need at least one direction"));
    }
    let mut directions = Vec::new();
    let mut e1 = DVector::zeros(q);
    e1[0] = 1.0;
    directions.push(e1);
    if q == 1 {
        return Ok(DirectionSet { q, directions });
    }
    if q == 2 {
        for j in 0..n_directions {
            let phi = -std::f64::consts::FRAC_PI_2
                + std::f64::consts::PI * (j as f64 + 0.5) / n_directions as f64;
            directions.push(DVector::from_column_slice(&[phi.cos(), phi.sin()]));
        }
        return Ok(DirectionSet { q, directions });
    }
    let normal = Normal::standard();
    let bases = primes(q);
    let mut index = 1u64;
    while directions.len() < n_directions + 1 {
        let mut v = DVector::zeros(q);
        for (j, &b) in bases.iter().enumerate() {
            let u = halton(index, b);
            v[j] = normal.inverse_cdf(u.clamp(1e-12, 1.0 - 1e-12));
        }
        index += 1;
        let norm = v.norm();
        if norm < 1e-9 {
            continue;
        }
        v /= norm;
        if v[0] < 0.0 {
            v = -v;
        }
        directions.push(v);
    }
    Ok(DirectionSet { q, directions })
}

fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while out.len() < count {
        if (2..candidate).take_while(|d| d * d <= candidate).all(|d| candidate % d != 0) {
            out.push(candidate);
        }
        candidate += 1;
    }
    out
}

/// Radical-inverse (van der Corput) value of `index` in base `base`.
fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// Direction-wise supremum of the transformed process, collected per
/// observation.
#[derive(Clone, Debug)]
pub struct SupProcess {
    /// Largest absolute transformed value at each observation's jump point
    /// across all directions in which the point was retained.
    pub sup_abs: Vec<f64>,
    /// Whether the observation was retained in at least one direction.
    pub retained: Vec<bool>,
    /// Variance plug-in at the direction attaining the supremum.
    pub sigma2: Vec<f64>,
    pub n_directions: usize,
    /// Total in-range points dropped for degenerate compensators.
    pub dropped_degenerate: usize,
    /// Bandwidth of the first (reference) direction.
    pub bandwidth: f64,
    /// Variance-floor activations summed over directions.
    pub floor_active: usize,
    /// Trimming point of the first (reference) direction.
    pub u0: f64,
}

/// Evaluate the transform along every direction of `dirs` applied to the
/// projections x' basis and take the pointwise maximum of absolute values.
///
/// With a single direction this reduces to one transformed process.
pub fn sup_process(
    data: &Dataset,
    family: &ModelFamily,
    fit: &FitResult,
    basis: &DMatrix<f64>,
    dirs: &DirectionSet,
    config: &TransformConfig,
) -> Result<SupProcess> {
    let n = data.n();
    if basis.nrows() != data.p() || basis.ncols() != dirs.q {
        return Err(Error::invalid("basis dimensions do not match data and directions"));
    }
    if fit.residuals.len() != n {
        return Err(Error::invalid("fit residual length differs from sample size"));
    }
    let residuals: Vec<f64> = fit.residuals.iter().copied().collect();
    let xb = data.x() * basis;
    let mut sup_abs = vec![0.0; n];
    let mut retained = vec![false; n];
    let mut sigma2 = vec![0.0; n];
    let mut dropped = 0usize;
    let mut floor_active = 0usize;
    let mut bandwidth = 0.0;
    let mut u0 = f64::NAN;
    for (di, alpha) in dirs.directions.iter().enumerate() {
        let proj_vec = &xb * alpha;
        let projections: Vec<f64> = proj_vec.iter().copied().collect();
        let mp = marked_process(&projections, &residuals)?;
        let tp = transform(&mp, data, family, fit, config)?;
        if di == 0 {
            bandwidth = tp.bandwidth;
            u0 = tp.u0;
        }
        dropped += tp.dropped_degenerate;
        floor_active += tp.floor_active;
        for k in 0..n {
            if !tp.retained[k] {
                continue;
            }
            let obs = tp.order[k];
            let v = tp.values[k].abs();
            if !retained[obs] {
                retained[obs] = true;
                sup_abs[obs] = v;
                sigma2[obs] = tp.sigma2[k];
            } else if v > sup_abs[obs] {
                sup_abs[obs] = v;
                sigma2[obs] = tp.sigma2[k];
            }
        }
    }
    Ok(SupProcess {
        sup_abs,
        retained,
        sigma2,
        n_directions: dirs.directions.len(),
        dropped_degenerate: dropped,
        bandwidth,
        floor_active,
        u0,
    })
}
