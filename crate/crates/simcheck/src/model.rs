//! Parametric single-index model families and their derivatives.
//!
//! A family describes a regression function `g(b'x, theta)` through closures
//! for the link `g` and its first and second partial derivatives in the
//! index argument and in `theta`. Estimation and testing only ever touch the
//! model through this record, so the derivative closures must be mutually
//! consistent; [`ModelFamily::validate_derivatives`] checks them against
//! central finite differences at randomized probe points.
//!
//! Built-in families: `linear` (g(t) = t), `cubic` (g(t) = t^3),
//! `exponential` (g(t) = exp(t)) and `quadpoly`
//! (g(t, theta) = theta1 + theta2 t + theta3 t^2).

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Regression data with observations in rows.
#[derive(Clone, Debug)]
pub struct Dataset {
    x: DMatrix<f64>,
    y: DVector<f64>,
}

impl Dataset {
    /// Wrap a predictor matrix (n rows, p columns) and a response vector.
    ///
    /// All entries must be finite and dimensions must agree.
    pub fn new(x: DMatrix<f64>, y: DVector<f64>) -> Result<Self> {
        if x.nrows() == 0 || x.ncols() == 0 {
            return Err(Error::invalid("predictor matrix must be non-empty"));
        }
        if x.nrows() != y.len() {
            return Err(Error::invalid(format!(
                "predictor rows ({}) and response length ({}) differ",
                x.nrows(),
                y.len()
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("predictor matrix contains non-finite entries"));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("response vector contains non-finite entries"));
        }
        Ok(Dataset { x, y })
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    /// New dataset with rows reordered by `perm` (row k takes old row perm[k]).
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n() {
            return Err(Error::invalid("permutation length differs from sample size"));
        }
        let mut seen = vec![false; self.n()];
        for &i in perm {
            if i >= self.n() || seen[i] {
                return Err(Error::invalid("not a permutation of row indices"));
            }
            seen[i] = true;
        }
        let x = DMatrix::from_fn(self.n(), self.p(), |r, c| self.x[(perm[r], c)]);
        let y = DVector::from_fn(self.n(), |r, _| self.y[perm[r]]);
        Ok(Dataset { x, y })
    }
}

/// Index coefficients `beta` and link parameters `theta`, kept separate
/// because they play different roles in scores and transforms.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector {
    pub beta: DVector<f64>,
    pub theta: DVector<f64>,
}

impl ParamVector {
    pub fn new(beta: DVector<f64>, theta: DVector<f64>) -> Self {
        ParamVector { beta, theta }
    }

    /// Total parameter count p + d.
    pub fn len(&self) -> usize {
        self.beta.len() + self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Concatenate into a single vector, beta first.
    pub fn stacked(&self) -> DVector<f64> {
        let mut out = DVector::zeros(self.len());
        out.rows_mut(0, self.beta.len()).copy_from(&self.beta);
        out.rows_mut(self.beta.len(), self.theta.len()).copy_from(&self.theta);
        out
    }

    /// Split a stacked vector back into (beta, theta) with `p` index slots.
    pub fn from_stacked(stacked: &DVector<f64>, p: usize) -> Result<Self> {
        if stacked.len() < p {
            return Err(Error::invalid("stacked parameter vector shorter than p"));
        }
        Ok(ParamVector {
            beta: stacked.rows(0, p).into_owned(),
            theta: stacked.rows(p, stacked.len() - p).into_owned(),
        })
    }
}

type LinkFn = Arc<dyn Fn(f64, &DVector<f64>) -> f64 + Send + Sync>;
type LinkVecFn = Arc<dyn Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync>;
type LinkMatFn = Arc<dyn Fn(f64, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Second derivative blocks of `g(b'x, theta)` at one observation.
#[derive(Clone, Debug)]
pub struct HessianBlocks {
    /// d2 g / d beta d beta', a p x p matrix.
    pub beta_beta: DMatrix<f64>,
    /// d2 g / d beta d theta', a p x d matrix.
    pub beta_theta: DMatrix<f64>,
    /// d2 g / d theta d theta', a d x d matrix.
    pub theta_theta: DMatrix<f64>,
}

impl HessianBlocks {
    /// Assemble the full symmetric (p+d) x (p+d) Hessian.
    pub fn full(&self) -> DMatrix<f64> {
        let p = self.beta_beta.nrows();
        let d = self.theta_theta.nrows();
        let mut out = DMatrix::zeros(p + d, p + d);
        out.view_mut((0, 0), (p, p)).copy_from(&self.beta_beta);
        out.view_mut((0, p), (p, d)).copy_from(&self.beta_theta);
        out.view_mut((p, 0), (d, p)).copy_from(&self.beta_theta.transpose());
        out.view_mut((p, p), (d, d)).copy_from(&self.theta_theta);
        out
    }
}

/// A single-index regression family `g(b'x, theta)` with analytic
/// derivatives. `d` is the dimension of `theta`.
#[derive(Clone)]
pub struct ModelFamily {
    name: String,
    d: usize,
    /// True only for the identity link; lets the fitter use plain least
    /// squares and is required for exact scale equivariance.
    identity_link: bool,
    g: LinkFn,
    g1: LinkFn,
    g2: LinkVecFn,
    g11: LinkFn,
    g12: LinkVecFn,
    g22: LinkMatFn,
}

impl fmt::Debug for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModelFamily")
            .field("name", &self.name)
            .field("d", &self.d)
            .finish()
    }
}

impl ModelFamily {
    /// Assemble a family from its derivative closures.
    #[allow(clippy::too_many_arguments)]
    pub fn custom(
        name: impl Into<String>,
        d: usize,
        g: impl Fn(f64, &DVector<f64>) -> f64 + Send + Sync + 'static,
        g1: impl Fn(f64, &DVector<f64>) -> f64 + Send + Sync + 'static,
        g2: impl Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        g11: impl Fn(f64, &DVector<f64>) -> f64 + Send + Sync + 'static,
        g12: impl Fn(f64, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        g22: impl Fn(f64, &DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        ModelFamily {
            name: name.into(),
            d,
            identity_link: false,
            g: Arc::new(g),
            g1: Arc::new(g1),
            g2: Arc::new(g2),
            g11: Arc::new(g11),
            g12: Arc::new(g12),
            g22: Arc::new(g22),
        }
    }

    /// g(t) = t.
    pub fn linear() -> Self {
        let mut fam = Self::custom(
            "linear",
            0,
            |t, _| t,
            |_, _| 1.0,
            |_, _| DVector::zeros(0),
            |_, _| 0.0,
            |_, _| DVector::zeros(0),
            |_, _| DMatrix::zeros(0, 0),
        );
        fam.identity_link = true;
        fam
    }

    /// g(t) = t^3.
    pub fn cubic() -> Self {
        Self::custom(
            "cubic",
            0,
            |t, _| t * t * t,
            |t, _| 3.0 * t * t,
            |_, _| DVector::zeros(0),
            |t, _| 6.0 * t,
            |_, _| DVector::zeros(0),
            |_, _| DMatrix::zeros(0, 0),
        )
    }

    /// g(t) = exp(t).
    pub fn exponential() -> Self {
        Self::custom(
            "exponential",
            0,
            |t, _| t.exp(),
            |t, _| t.exp(),
            |_, _| DVector::zeros(0),
            |t, _| t.exp(),
            |_, _| DVector::zeros(0),
            |_, _| DMatrix::zeros(0, 0),
        )
    }

    /// g(t, theta) = theta1 + theta2 t + theta3 t^2.
    pub fn quadpoly() -> Self {
        Self::custom(
            "quadpoly",
            3,
            |t, th| th[0] + th[1] * t + th[2] * t * t,
            |t, th| th[1] + 2.0 * th[2] * t,
            |t, _| DVector::from_column_slice(&[1.0, t, t * t]),
            |_, th| 2.0 * th[2],
            |t, _| DVector::from_column_slice(&[0.0, 1.0, 2.0 * t]),
            |_, _| DMatrix::zeros(3, 3),
        )
    }

    /// Look a built-in family up by name.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "linear" => Ok(Self::linear()),
            "cubic" => Ok(Self::cubic()),
            "exponential" => Ok(Self::exponential()),
            "quadpoly" => Ok(Self::quadpoly()),
            other => Err(Error::invalid(format!(
                "unknown model family '{other}' (built-ins: linear, cubic, exponential, quadpoly)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Dimension of the link parameter theta.
    pub fn d(&self) -> usize {
        self.d
    }

    /// Whether the family is the identity link (fit reduces to least squares).
    pub fn is_identity_link(&self) -> bool {
        self.identity_link
    }

    fn check_theta(&self, gamma: &ParamVector) -> Result<()> {
        if gamma.theta.len() != self.d {
            return Err(Error::invalid(format!(
                "family '{}' expects {} link parameters, got {}",
                self.name,
                self.d,
                gamma.theta.len()
            )));
        }
        Ok(())
    }

    /// Link value at a raw index `t`.
    pub fn link(&self, t: f64, theta: &DVector<f64>) -> f64 {
        (self.g)(t, theta)
    }

    /// First derivative of the link in its index argument.
    pub fn link_d1(&self, t: f64, theta: &DVector<f64>) -> f64 {
        (self.g1)(t, theta)
    }

    /// Gradient of the link in theta.
    pub fn link_dtheta(&self, t: f64, theta: &DVector<f64>) -> DVector<f64> {
        (self.g2)(t, theta)
    }

    /// Regression function `g(b'x, theta)` at one observation.
    pub fn evaluate(&self, gamma: &ParamVector, x: &DVector<f64>) -> Result<f64> {
        self.check_theta(gamma)?;
        if x.len() != gamma.beta.len() {
            return Err(Error::invalid("x and beta dimensions differ"));
        }
        Ok((self.g)(gamma.beta.dot(x), &gamma.theta))
    }

    /// Gradient of the regression function in (beta, theta), stacked beta
    /// first: (g1(b'x, theta) x', g2(b'x, theta)')'.
    pub fn score(&self, gamma: &ParamVector, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_theta(gamma)?;
        if x.len() != gamma.beta.len() {
            return Err(Error::invalid("x and beta dimensions differ"));
        }
        let t = gamma.beta.dot(x);
        let p = x.len();
        let mut out = DVector::zeros(p + self.d);
        let g1 = (self.g1)(t, &gamma.theta);
        for i in 0..p {
            out[i] = g1 * x[i];
        }
        if self.d > 0 {
            out.rows_mut(p, self.d).copy_from(&(self.g2)(t, &gamma.theta));
        }
        Ok(out)
    }

    /// Second derivative blocks of the regression function at one
    /// observation: g11 x x', x g12', and g22.
    pub fn hessian_blocks(&self, gamma: &ParamVector, x: &DVector<f64>) -> Result<HessianBlocks> {
        self.check_theta(gamma)?;
        if x.len() != gamma.beta.len() {
            return Err(Error::invalid("x and beta dimensions differ"));
        }
        let t = gamma.beta.dot(x);
        let p = x.len();
        let g11 = (self.g11)(t, &gamma.theta);
        let beta_beta = DMatrix::from_fn(p, p, |i, j| g11 * x[i] * x[j]);
        let g12 = (self.g12)(t, &gamma.theta);
        let beta_theta = DMatrix::from_fn(p, self.d, |i, j| x[i] * g12[j]);
        let theta_theta = (self.g22)(t, &gamma.theta);
        if theta_theta.nrows() != self.d || theta_theta.ncols() != self.d {
            return Err(Error::invalid("g22 closure returned a wrongly sized matrix"));
        }
        Ok(HessianBlocks { beta_beta, beta_theta, theta_theta })
    }

    /// Fitted values over a whole predictor matrix.
    pub fn predict(&self, gamma: &ParamVector, x: &DMatrix<f64>) -> Result<DVector<f64>> {
        self.check_theta(gamma)?;
        if x.ncols() != gamma.beta.len() {
            return Err(Error::invalid("x and beta dimensions differ"));
        }
        let idx = x * &gamma.beta;
        Ok(DVector::from_fn(x.nrows(), |i, _| (self.g)(idx[i], &gamma.theta)))
    }

    /// Check the analytic derivative closures against central finite
    /// differences at `probes` randomized points.
    ///
    /// Probes draw the index and theta from scaled standard normals seeded by
    /// `seed`; every first and second derivative has to match its finite
    /// difference to relative tolerance `tol` (with an absolute floor for
    /// values near zero).
    pub fn validate_derivatives(&self, probes: usize, seed: u64, tol: f64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        // Step chosen for ~1e-11 truncation + rounding error on f64.
        let step = 1e-5;
        let close = |fd: f64, an: f64| (fd - an).abs() <= tol * an.abs().max(1.0);
        for probe in 0..probes {
            let t: f64 = {
                let z: f64 = rng.sample(StandardNormal);
                1.5 * z
            };
            let theta = DVector::from_fn(self.d, |_, _| rng.sample::<f64, _>(StandardNormal));

            let g1_fd = ((self.g)(t + step, &theta) - (self.g)(t - step, &theta)) / (2.0 * step);
            if !close(g1_fd, (self.g1)(t, &theta)) {
                return Err(Error::invalid(format!(
                    "family '{}': g1 disagrees with finite difference at probe {probe} (t = {t:.4})",
                    self.name
                )));
            }
            let g11_fd = ((self.g1)(t + step, &theta) - (self.g1)(t - step, &theta)) / (2.0 * step);
            if !close(g11_fd, (self.g11)(t, &theta)) {
                return Err(Error::invalid(format!(
                    "family '{}': g11 disagrees with finite difference at probe {probe} (t = {t:.4})",
                    self.name
                )));
            }
            let g12_an = (self.g12)(t, &theta);
            let g2_hi = (self.g2)(t + step, &theta);
            let g2_lo = (self.g2)(t - step, &theta);
            for k in 0..self.d {
                let fd = (g2_hi[k] - g2_lo[k]) / (2.0 * step);
                if !close(fd, g12_an[k]) {
                    return Err(Error::invalid(format!(
                        "family '{}': g12[{k}] disagrees with finite difference at probe {probe}",
                        self.name
                    )));
                }
            }
            for k in 0..self.d {
                let mut hi = theta.clone();
                let mut lo = theta.clone();
                hi[k] += step;
                lo[k] -= step;
                let fd = ((self.g)(t, &hi) - (self.g)(t, &lo)) / (2.0 * step);
                if !close(fd, (self.g2)(t, &theta)[k]) {
                    return Err(Error::invalid(format!(
                        "family '{}': g2[{k}] disagrees with finite difference at probe {probe}",
                        self.name
                    )));
                }
                let fd1 = ((self.g1)(t, &hi) - (self.g1)(t, &lo)) / (2.0 * step);
                if !close(fd1, (self.g12)(t, &theta)[k]) {
                    return Err(Error::invalid(format!(
                        "family '{}': g12[{k}] (theta route) disagrees at probe {probe}",
                        self.name
                    )));
                }
                let g22_an = (self.g22)(t, &theta);
                let g2_hi_k = (self.g2)(t, &hi);
                let g2_lo_k = (self.g2)(t, &lo);
                for l in 0..self.d {
                    let fd2 = (g2_hi_k[l] - g2_lo_k[l]) / (2.0 * step);
                    if !close(fd2, g22_an[(l, k)]) {
                        return Err(Error::invalid(format!(
                            "family '{}': g22[{l},{k}] disagrees with finite difference at probe {probe}",
                            self.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}
