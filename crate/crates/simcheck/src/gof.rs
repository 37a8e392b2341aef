//! Lack-of-fit statistic, its limit distribution, and the full test
//! pipeline.
//!
//! The statistic is a Cramer-von Mises functional of the transformed
//! residual-marked process, normalized so that inside the trimmed range it
//! converges to the integral of squared standard Brownian motion on [0, 1]
//! whatever the fitted family. Critical values of that limit come from a
//! cached Monte Carlo table of its spectral representation
//! sum_k Z_k^2 / ((k - 1/2)^2 pi^2), cross-checkable against direct
//! Brownian-path simulation.

use std::sync::OnceLock;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec;
use crate::kernel::SmoothingConfig;
use crate::model::{Dataset, ModelFamily};
use crate::nls::{fit, FitOptions, FitResult};
use crate::process::{direction_grid, sup_process, SupProcess, TransformConfig, TransformMode};
use crate::sdr;

/// Options of the full test pipeline.
#[derive(Clone, Debug)]
pub struct TestOptions {
    pub mode: TransformMode,
    pub smoothing: SmoothingConfig,
    /// Trimming quantile of the projection distribution.
    pub u0_quantile: f64,
    /// Direction-grid size used when the estimated dimension exceeds one.
    pub n_directions: usize,
    /// Use the heteroscedastic normalization instead of the default
    /// homoscedastic one.
    pub heteroscedastic: bool,
    pub fit: FitOptions,
    /// Significance levels the report states decisions for.
    pub levels: Vec<f64>,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions {
            mode: TransformMode::Spherical,
            smoothing: SmoothingConfig::default(),
            u0_quantile: 0.99,
            n_directions: 128,
            heteroscedastic: false,
            fit: FitOptions::default(),
            levels: vec![0.10, 0.05, 0.01],
        }
    }
}

impl TestOptions {
    pub(crate) fn transform_config(&self) -> TransformConfig {
        TransformConfig {
            mode: self.mode,
            smoothing: self.smoothing.clone(),
            u0_quantile: self.u0_quantile,
        }
    }
}

/// The normalized statistic and its ingredients.
#[derive(Clone, Debug)]
pub struct AcmBreakdown {
    /// Normalized statistic.
    pub acm2: f64,
    /// Unnormalized Cramer-von Mises value
    /// (1/n) sum_i sup^2 over retained points.
    pub cm2: f64,
    /// Normalizer: sigma2 F^2 (homoscedastic) or psi^2 (heteroscedastic).
    pub scale: f64,
    pub retained_count: usize,
    pub retained_fraction: f64,
}

/// Normalize per-observation sup values into the test statistic.
///
/// `sup_abs`, `retained` and `sigma2` are indexed by original observation,
/// as produced by [`sup_process`](crate::process::sup_process).
pub fn acm_statistic(
    sup_abs: &[f64],
    retained: &[bool],
    sigma2: &[f64],
    residuals: &DVector<f64>,
    heteroscedastic: bool,
) -> Result<AcmBreakdown> {
    let n = sup_abs.len();
    if n == 0 {
        return Err(Error::invalid("empty sup process"));
    }
    if retained.len() != n || sigma2.len() != n || residuals.len() != n {
        return Err(Error::invalid("sup process arrays have inconsistent lengths"));
    }
    let retained_count = retained.iter().filter(|r| **r).count();
    if retained_count == 0 {
        return Err(Error::estimation("no retained jump points"));
    }
    let nf = n as f64;
    let sigma2_all = residuals.iter().map(|e| e * e).sum::<f64>() / nf;
    if sigma2_all == 0.0 {
        return Err(Error::degenerate("all residuals are zero"));
    }
    let mut cm2 = 0.0;
    for i in 0..n {
        if retained[i] {
            cm2 += sup_abs[i] * sup_abs[i];
        }
    }
    cm2 /= nf;
    let retained_fraction = retained_count as f64 / nf;
    let (acm2, scale) = if heteroscedastic {
        let psi = residuals
            .iter()
            .enumerate()
            .filter(|(i, _)| retained[*i])
            .map(|(_, e)| e * e)
            .sum::<f64>()
            / nf;
        let mut weighted = 0.0;
        for i in 0..n {
            if retained[i] {
                weighted += sup_abs[i] * sup_abs[i] * sigma2[i];
            }
        }
        weighted /= nf;
        (weighted / (psi * psi), psi * psi)
    } else {
        let scale = sigma2_all * retained_fraction * retained_fraction;
        (cm2 / scale, scale)
    };
    Ok(AcmBreakdown { acm2, cm2, scale, retained_count, retained_fraction })
}

/// Statistic plus the sup process it came from.
#[derive(Clone, Debug)]
pub struct AcmCore {
    pub breakdown: AcmBreakdown,
    pub sup: SupProcess,
    /// Projection-space dimension the directions ranged over.
    pub q: usize,
}

/// Run the direction sup and the normalization for a given projection basis.
///
/// This is the shared computational core of the main adaptive test (basis
/// from sufficient dimension reduction) and of the fixed-direction
/// competitor that projects on the fitted index only.
pub fn acm_from_basis(
    data: &Dataset,
    family: &ModelFamily,
    fit_result: &FitResult,
    basis: &DMatrix<f64>,
    options: &TestOptions,
) -> Result<AcmCore> {
    let q = basis.ncols();
    let dirs = direction_grid(q, options.n_directions)?;
    let sup = sup_process(data, family, fit_result, basis, &dirs, &options.transform_config())?;
    let breakdown = acm_statistic(
        &sup.sup_abs,
        &sup.retained,
        &sup.sigma2,
        &fit_result.residuals,
        options.heteroscedastic,
    )?;
    Ok(AcmCore { breakdown, sup, q })
}

// ---------------------------------------------------------------------------
// Limit distribution: integral of squared standard Brownian motion on [0, 1].
// ---------------------------------------------------------------------------

/// Default level grid of the cached quantile table, from loose to strict.
pub const CVM_TABLE_LEVELS: &[f64] = &[
    0.999, 0.995, 0.99, 0.975, 0.95, 0.90, 0.85, 0.80, 0.75, 0.70, 0.65, 0.60, 0.55, 0.50, 0.45,
    0.40, 0.35, 0.30, 0.25, 0.20, 0.15, 0.10, 0.075, 0.05, 0.04, 0.03, 0.025, 0.02, 0.015, 0.01,
    0.005, 0.0025, 0.001,
];

/// Upper-tail quantile table of the limit distribution with the metadata of
/// its construction.
#[derive(Clone, Debug)]
pub struct CvmDistribution {
    /// Upper-tail levels, strictly decreasing.
    pub levels: Vec<f64>,
    /// Critical values, one per level, strictly increasing.
    pub values: Vec<f64>,
    /// Series-truncation order of the spectral Monte Carlo.
    pub terms: usize,
    pub draws: usize,
    pub seed: u64,
    /// Sample mean of the Monte Carlo draws (population value 1/2).
    pub mean: f64,
}

/// Monte Carlo quantile estimates at requested levels, plus the sample mean.
#[derive(Clone, Debug)]
pub struct CvmSample {
    pub values: Vec<f64>,
    pub mean: f64,
}

fn upper_quantiles(mut draws_vec: Vec<f64>, levels: &[f64]) -> Result<Vec<f64>> {
    let n = draws_vec.len();
    if n == 0 {
        return Err(Error::invalid("no Monte Carlo draws"));
    }
    draws_vec.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite draws"));
    levels
        .iter()
        .map(|&level| {
            if !(level > 0.0 && level < 1.0) {
                return Err(Error::invalid("quantile levels must lie in (0, 1)"));
            }
            let rank = ((1.0 - level) * n as f64).ceil() as usize;
            Ok(draws_vec[rank.clamp(1, n) - 1])
        })
        .collect()
}

/// Draw the limit distribution through its spectral representation
/// sum_{k=1..terms} Z_k^2 / ((k - 1/2)^2 pi^2) and return upper-tail
/// quantiles. Deterministic for a given seed, independent of worker count.
pub fn cvm_quantiles_mc(
    levels: &[f64],
    terms: usize,
    draws: usize,
    seed: u64,
    workers: usize,
) -> Result<CvmSample> {
    if terms == 0 || draws == 0 {
        return Err(Error::invalid("need at least one term and one draw"));
    }
    let weights: Vec<f64> = (1..=terms)
        .map(|k| {
            let freq = (k as f64 - 0.5) * std::f64::consts::PI;
            1.0 / (freq * freq)
        })
        .collect();
    const CHUNK: usize = 4096;
    let chunks = draws.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = exec::map_indexed(chunks, workers, |chunk| {
        let mut rng = ChaCha8Rng::seed_from_u64(exec::mix_seed(seed, chunk as u64));
        let count = CHUNK.min(draws - chunk * CHUNK);
        (0..count)
            .map(|_| {
                weights
                    .iter()
                    .map(|w| {
                        let z: f64 = rng.sample(StandardNormal);
                        w * z * z
                    })
                    .sum()
            })
            .collect()
    });
    let all: Vec<f64> = parts.into_iter().flatten().collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let values = upper_quantiles(all, levels)?;
    Ok(CvmSample { values, mean })
}

/// Independent check of [`cvm_quantiles_mc`]: simulate discretized Brownian
/// paths and average the squared path over its steps.
pub fn cvm_quantiles_path(
    levels: &[f64],
    steps: usize,
    paths: usize,
    seed: u64,
    workers: usize,
) -> Result<CvmSample> {
    if steps == 0 || paths == 0 {
        return Err(Error::invalid("need at least one step and one path"));
    }
    let sqrt_dt = (1.0 / steps as f64).sqrt();
    const CHUNK: usize = 256;
    let chunks = paths.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = exec::map_indexed(chunks, workers, |chunk| {
        let mut rng = ChaCha8Rng::seed_from_u64(exec::mix_seed(seed ^ 0x9E37_0001, chunk as u64));
        let count = CHUNK.min(paths - chunk * CHUNK);
        (0..count)
            .map(|_| {
                let mut b = 0.0f64;
                let mut sum = 0.0f64;
                for _ in 0..steps {
                    let z: f64 = rng.sample(StandardNormal);
                    b += z * sqrt_dt;
                    sum += b * b;
                }
                sum / steps as f64
            })
            .collect()
    });
    let all: Vec<f64> = parts.into_iter().flatten().collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let values = upper_quantiles(all, levels)?;
    Ok(CvmSample { values, mean })
}

impl CvmDistribution {
    /// Build a fresh table by spectral Monte Carlo at the given levels.
    pub fn generate(levels: &[f64], terms: usize, draws: usize, seed: u64, workers: usize) -> Result<Self> {
        let mut sorted = levels.to_vec();
        sorted.sort_unstable_by(|a, b| b.partial_cmp(a).expect("finite levels"));
        sorted.dedup();
        if sorted.is_empty() {
            return Err(Error::invalid("no quantile levels requested"));
        }
        let sample = cvm_quantiles_mc(&sorted, terms, draws, seed, workers)?;
        Ok(CvmDistribution {
            levels: sorted,
            values: sample.values,
            terms,
            draws,
            seed,
            mean: sample.mean,
        })
    }

    /// The cached table shipped with the crate (spectral Monte Carlo,
    /// 1000 terms, one million draws, fixed seed).
    pub fn builtin() -> &'static CvmDistribution {
        static TABLE: OnceLock<CvmDistribution> = OnceLock::new();
        TABLE.get_or_init(|| {
            CvmDistribution::from_table_text(include_str!("cvm_quantiles.txt"))
                .expect("embedded quantile table is well-formed")
        })
    }

    /// Parse a table in the cache-file format.
    pub fn from_table_text(text: &str) -> Result<Self> {
        let mut terms = 0usize;
        let mut draws = 0usize;
        let mut seed = 0u64;
        let mut mean = f64::NAN;
        let mut levels = Vec::new();
        let mut values = Vec::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(meta) = line.strip_prefix('#') {
                for token in meta.split_whitespace() {
                    if let Some((key, value)) = token.split_once('=') {
                        match key {
                            "terms" => terms = value.parse().map_err(|_| bad_meta(key))?,
                            "draws" => draws = value.parse().map_err(|_| bad_meta(key))?,
                            "seed" => seed = value.parse().map_err(|_| bad_meta(key))?,
                            "mean" => mean = value.parse().map_err(|_| bad_meta(key))?,
                            _ => {}
                        }
                    }
                }
                continue;
            }
            let (level, value) = line
                .split_once(',')
                .ok_or_else(|| Error::invalid(format!("malformed table line: {line}")))?;
            levels.push(
                level
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad level in line: {line}")))?,
            );
            values.push(
                value
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad value in line: {line}")))?,
            );
        }
        let table = CvmDistribution { levels, values, terms, draws, seed, mean };
        table.validate()?;
        Ok(table)
    }

    /// Render the table in the cache-file format.
    pub fn to_table_text(&self) -> String {
        let mut out = String::new();
        out.push_str("# upper-tail critical values of the integral of squared standard brownian motion on [0,1]\n");
        out.push_str(&format!(
            "# method=spectral-monte-carlo terms={} draws={} seed={} mean={:.6}\n",
            self.terms, self.draws, self.seed, self.mean
        ));
        out.push_str("# columns: level,critical_value\n");
        for (level, value) in self.levels.iter().zip(&self.values) {
            out.push_str(&format!("{level},{value:.6}\n"));
        }
        out
    }

    fn validate(&self) -> Result<()> {
        if self.levels.len() != self.values.len() || self.levels.is_empty() {
            return Err(Error::invalid("quantile table is empty or ragged"));
        }
        for w in self.levels.windows(2) {
            if !(w[0] > w[1]) {
                return Err(Error::invalid("table levels must strictly decrease"));
            }
        }
        for w in self.values.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::invalid("table critical values must strictly increase"));
            }
        }
        if self.levels.iter().any(|l| !(*l > 0.0 && *l < 1.0)) {
            return Err(Error::invalid("table levels must lie in (0, 1)"));
        }
        Ok(())
    }

    /// Critical value at an upper-tail level, log-linear in the level
    /// between grid points. Errors outside the tabulated range.
    pub fn critical_value(&self, level: f64) -> Result<f64> {
        let first = *self.levels.first().expect("validated nonempty");
        let last = *self.levels.last().expect("validated nonempty");
        if !(level <= first && level >= last) {
            return Err(Error::invalid(format!(
                "level {level} outside the tabulated range [{last}, {first}]"
            )));
        }
        for (i, w) in self.levels.windows(2).enumerate() {
            if level <= w[0] && level >= w[1] {
                if level == w[0] {
                    return Ok(self.values[i]);
                }
                if level == w[1] {
                    return Ok(self.values[i + 1]);
                }
                let t = (level.ln() - w[0].ln()) / (w[1].ln() - w[0].ln());
                return Ok(self.values[i] + t * (self.values[i + 1] - self.values[i]));
            }
        }
        Ok(*self.values.last().expect("validated nonempty"))
    }

    /// P-value of a statistic by the inverse of the same interpolation.
    ///
    /// The boolean is true when the statistic exceeds the strictest grid
    /// point, in which case the returned value is only an upper bound
    /// (report it as "less than" that level).
    pub fn p_value(&self, stat: f64) -> (f64, bool) {
        let values = &self.values;
        let levels = &self.levels;
        if stat <= values[0] {
            return (levels[0], false);
        }
        let last = values.len() - 1;
        if stat >= values[last] {
            return (levels[last], stat > values[last]);
        }
        for i in 0..last {
            if stat >= values[i] && stat < values[i + 1] {
                if stat == values[i] {
                    return (levels[i], false);
                }
                let t = (stat - values[i]) / (values[i + 1] - values[i]);
                let ln_p = levels[i].ln() + t * (levels[i + 1].ln() - levels[i].ln());
                return (ln_p.exp(), false);
            }
        }
        (levels[last], false)
    }
}

fn bad_meta(key: &str) -> Error {
    Error::invalid(format!("bad metadata value for {key}"))
}

// ---------------------------------------------------------------------------
// Full pipeline.
// ---------------------------------------------------------------------------

/// Per-run diagnostics attached to a report.
#[derive(Clone, Debug)]
pub struct Diagnostics {
    pub converged: bool,
    pub iterations: usize,
    pub rss: f64,
    /// Dimension-reduction kernel eigenvalues, descending.
    pub eigenvalues: Vec<f64>,
    pub n_directions: usize,
    pub retained_count: usize,
    pub retained_fraction: f64,
    pub dropped_degenerate: usize,
    pub bandwidth: f64,
    pub floor_active: usize,
}

/// Outcome of the adaptive lack-of-fit test.
#[derive(Clone, Debug)]
pub struct TestReport {
    /// Normalized statistic.
    pub acm2: f64,
    pub cm2: f64,
    /// Estimated structural dimension the directions ranged over.
    pub q_hat: usize,
    /// Trimming point of the reference direction.
    pub u0: f64,
    pub mode: TransformMode,
    pub heteroscedastic: bool,
    pub levels: Vec<f64>,
    pub critical_values: Vec<f64>,
    /// reject[i] is true iff acm2 > critical_values[i].
    pub rejects: Vec<bool>,
    pub p_value: f64,
    /// True when the statistic exceeds the strictest tabulated level, making
    /// `p_value` an upper bound.
    pub p_value_is_floor: bool,
    pub diagnostics: Diagnostics,
}

/// Fit the family, estimate the index space, transform, and test.
pub fn run_test(data: &Dataset, family: &ModelFamily, options: &TestOptions) -> Result<TestReport> {
    let n = data.n();
    if n <= data.p() + family.d() {
        return Err(Error::invalid("need more observations than parameters"));
    }
    let fit_result = fit(data, family, &options.fit)?;
    let sdr_result = sdr::reduce(data.x(), data.y(), Some(&fit_result.gamma_hat.beta))?;
    let core = acm_from_basis(data, family, &fit_result, &sdr_result.basis, options)?;
    report_from_core(&fit_result, &sdr_result.eigenvalues, sdr_result.q_hat, core, options)
}

/// Assemble a report from a computed statistic core.
pub(crate) fn report_from_core(
    fit_result: &FitResult,
    eigenvalues: &[f64],
    q_hat: usize,
    core: AcmCore,
    options: &TestOptions,
) -> Result<TestReport> {
    let table = CvmDistribution::builtin();
    let mut critical_values = Vec::with_capacity(options.levels.len());
    let mut rejects = Vec::with_capacity(options.levels.len());
    for &level in &options.levels {
        let cv = table.critical_value(level)?;
        rejects.push(core.breakdown.acm2 > cv);
        critical_values.push(cv);
    }
    let (p_value, p_value_is_floor) = table.p_value(core.breakdown.acm2);
    Ok(TestReport {
        acm2: core.breakdown.acm2,
        cm2: core.breakdown.cm2,
        q_hat,
        u0: core.sup.u0,
        mode: options.mode,
        heteroscedastic: options.heteroscedastic,
        levels: options.levels.clone(),
        critical_values,
        rejects,
        p_value,
        p_value_is_floor,
        diagnostics: Diagnostics {
            converged: fit_result.converged,
            iterations: fit_result.iterations,
            rss: fit_result.rss,
            eigenvalues: eigenvalues.to_vec(),
            n_directions: core.sup.n_directions,
            retained_count: core.breakdown.retained_count,
            retained_fraction: core.breakdown.retained_fraction,
            dropped_degenerate: core.sup.dropped_degenerate,
            bandwidth: core.sup.bandwidth,
            floor_active: core.sup.floor_active,
        },
    })
}
