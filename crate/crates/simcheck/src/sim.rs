//! Simulation scenarios and the replication driver for size/power tables.
//!
//! Seven data-generating processes share the design X ~ N(0, I_p) with
//! standard normal noise and an amplitude knob `a` (a = 0 is the null).
//! Alternatives H11 to H14 depart from a linear index model, H21 from a
//! cubic index model, H22 from an exponential index model, and LOCAL shrinks
//! a centered nonlinear departure at the n^(-1/2) rate. The predictor
//! dimension follows the diverging rule p = floor(4 n^(1/4)) - 5 unless
//! overridden.
//!
//! The study driver runs replications in parallel; every replication draws
//! its own generator seeded from (study seed, scenario, replication index),
//! so tables are bit-identical for any worker count.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::baselines::{self, GwzOptions, IcmOptions, ZhengOptions};
use crate::error::{Error, Result};
use crate::exec;
use crate::gof::{acm_from_basis, CvmDistribution, TestOptions};
use crate::model::{Dataset, ModelFamily};
use crate::nls::fit;
use crate::sdr;

/// The data-generating processes of the power studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// Linear index plus a exp(-(index)^2).
    H11,
    /// Linear index plus a cos(0.6 pi index), a high-frequency departure.
    H12,
    /// Linear index in one direction plus a (second index)^2.
    H13,
    /// Linear index in one direction plus a exp(second index).
    H14,
    /// Cubic index plus a (second index)^2.
    H21,
    /// Exponential index plus a linear second index.
    H22,
    /// Linear index plus a n^(-1/2) (exp(-(index)^2) - mean), a local
    /// alternative shrinking at the parametric rate.
    Local,
}

impl ScenarioKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_uppercase().as_str() {
            "H11" => Ok(ScenarioKind::H11),
            "H12" => Ok(ScenarioKind::H12),
            "H13" => Ok(ScenarioKind::H13),
            "H14" => Ok(ScenarioKind::H14),
            "H21" => Ok(ScenarioKind::H21),
            "H22" => Ok(ScenarioKind::H22),
            "LOCAL" => Ok(ScenarioKind::Local),
            _ => Err(Error::invalid(format!(
                "unknown scenario {name}; expected one of H11, H12, H13, H14, H21, H22, LOCAL"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::H11 => "H11",
            ScenarioKind::H12 => "H12",
            ScenarioKind::H13 => "H13",
            ScenarioKind::H14 => "H14",
            ScenarioKind::H21 => "H21",
            ScenarioKind::H22 => "H22",
            ScenarioKind::Local => "LOCAL",
        }
    }

    fn id(self) -> u64 {
        match self {
            ScenarioKind::H11 => 1,
            ScenarioKind::H12 => 2,
            ScenarioKind::H13 => 3,
            ScenarioKind::H14 => 4,
            ScenarioKind::H21 => 5,
            ScenarioKind::H22 => 6,
            ScenarioKind::Local => 7,
        }
    }

    /// The parametric family each scenario tests the fit of.
    pub fn null_family(self) -> ModelFamily {
        match self {
            ScenarioKind::H11 | ScenarioKind::H12 | ScenarioKind::H13 | ScenarioKind::H14 | ScenarioKind::Local => {
                ModelFamily::linear()
            }
            ScenarioKind::H21 => ModelFamily::cubic(),
            ScenarioKind::H22 => ModelFamily::exponential(),
        }
    }
}

/// One cell of the study design: a process, an amplitude, and sizes.
#[derive(Clone, Copy, Debug)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Alternative amplitude; zero is the null.
    pub a: f64,
    pub n: usize,
    pub p: usize,
}

impl Scenario {
    /// Scenario with the default diverging dimension rule.
    pub fn new(kind: ScenarioKind, a: f64, n: usize) -> Result<Self> {
        Ok(Scenario { kind, a, n, p: dims_for(n)? })
    }

    /// Scenario with an explicit predictor dimension.
    pub fn with_dimension(kind: ScenarioKind, a: f64, n: usize, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("predictor dimension must be positive"));
        }
        if !(a >= 0.0) {
            return Err(Error::invalid("amplitude must be nonnegative"));
        }
        Ok(Scenario { kind, a, n, p })
    }

    fn id(&self) -> u64 {
        let mut h = exec::mix_seed(self.kind.id(), self.a.to_bits());
        h = exec::mix_seed(h, self.n as u64);
        exec::mix_seed(h, self.p as u64)
    }
}

/// Diverging predictor dimension: floor(4 n^(1/4)) - 5.
pub fn dims_for(n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    // sqrt twice is correctly rounded, so perfect fourth powers stay exact.
    let root = (n as f64).sqrt().sqrt();
    let p = (4.0 * root + 1e-9).floor() as i64 - 5;
    if p < 1 {
        return Err(Error::invalid(format!("dimension rule gives p = {p} < 1 at n = {n}")));
    }
    Ok(p as usize)
}

/// Unit vector of ones, the null index direction.
pub fn beta_null(p: usize) -> DVector<f64> {
    DVector::from_element(p, 1.0 / (p as f64).sqrt())
}

/// Unit vector over the first floor(p/2) coordinates.
pub fn beta_one(p: usize) -> DVector<f64> {
    let p1 = p / 2;
    let scale = 1.0 / (p1 as f64).sqrt();
    DVector::from_fn(p, |i, _| if i < p1 { scale } else { 0.0 })
}

/// Unit vector over the last floor(p/2) coordinates, orthogonal to
/// [`beta_one`].
pub fn beta_two(p: usize) -> DVector<f64> {
    let p1 = p / 2;
    let scale = 1.0 / (p1 as f64).sqrt();
    DVector::from_fn(p, |i, _| if i >= p - p1 { scale } else { 0.0 })
}

/// Nodes and weights of Gauss-Hermite quadrature (physicists' weight
/// exp(-x^2)), computed from the Jacobi matrix eigendecomposition.
fn gauss_hermite(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut jacobi = DMatrix::zeros(m, m);
    for k in 1..m {
        let off = (k as f64 / 2.0).sqrt();
        jacobi[(k - 1, k)] = off;
        jacobi[(k, k - 1)] = off;
    }
    let eig = nalgebra::SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let weight = std::f64::consts::PI.sqrt() * eig.eigenvectors[(0, i)].powi(2);
            (node, weight)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
    pairs.into_iter().unzip()
}

/// E[f(T)] for standard normal T by 64-node Gauss-Hermite quadrature.
pub fn normal_expectation(f: impl Fn(f64) -> f64) -> f64 {
    let (nodes, weights) = gauss_hermite(64);
    let scale = 1.0 / std::f64::consts::PI.sqrt();
    nodes
        .iter()
        .zip(&weights)
        .map(|(t, w)| scale * w * f(std::f64::consts::SQRT_2 * t))
        .sum()
}

/// Centering constant of the local alternative: E exp(-T^2) for standard
/// normal T (analytically 1 / sqrt(3)).
pub fn local_centering_constant() -> f64 {
    normal_expectation(|t| (-t * t).exp())
}

/// Draw one dataset from a scenario. Deterministic given the seed: the
/// predictor matrix is drawn row by row, then the noise vector.
pub fn generate(scenario: &Scenario, seed: u64) -> Result<Dataset> {
    let n = scenario.n;
    let p = scenario.p;
    let a = scenario.a;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            x[(i, j)] = rng.sample(StandardNormal);
        }
    }
    let eps = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));

    let b0 = beta_null(p);
    let b1 = beta_one(p);
    let b2 = beta_two(p);
    let mut y = DVector::zeros(n);
    let local_center = match scenario.kind {
        ScenarioKind::Local => local_centering_constant(),
        _ => 0.0,
    };
    for i in 0..n {
        let row = x.row(i).transpose();
        let signal = match scenario.kind {
            ScenarioKind::H11 => {
                let t = b0.dot(&row);
                t + a * (-t * t).exp()
            }
            ScenarioKind::H12 => {
                let t = b0.dot(&row);
                t + a * (0.6 * std::f64::consts::PI * t).cos()
            }
            ScenarioKind::H13 => {
                let s = b2.dot(&row);
                b1.dot(&row) + a * s * s
            }
            ScenarioKind::H14 => b1.dot(&row) + a * b2.dot(&row).exp(),
            ScenarioKind::H21 => {
                let t = b1.dot(&row);
                let s = b2.dot(&row);
                t * t * t + a * s * s
            }
            ScenarioKind::H22 => b1.dot(&row).exp() + a * b2.dot(&row),
            ScenarioKind::Local => {
                let t = b0.dot(&row);
                t + a / (n as f64).sqrt() * ((-t * t).exp() - local_center)
            }
        };
        y[i] = signal + eps[i];
    }
    Dataset::new(x, y)
}

/// Which tests a study runs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TestKind {
    /// The adaptive transform test.
    Acm,
    /// Fixed-direction transform test on the fitted index.
    StuteZhu,
    /// Full-dimensional kernel moment test.
    Zheng,
    /// Dimension-reduced kernel moment test.
    Gwz,
    /// Integrated conditional moment test with wild bootstrap.
    Icm,
}

impl TestKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "acm" => Ok(TestKind::Acm),
            "sz" => Ok(TestKind::StuteZhu),
            "zheng" => Ok(TestKind::Zheng),
            "gwz" => Ok(TestKind::Gwz),
            "icm" => Ok(TestKind::Icm),
            _ => Err(Error::invalid(format!(
                "unknown test {name}; expected one of acm, sz, zheng, gwz, icm"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TestKind::Acm => "acm",
            TestKind::StuteZhu => "sz",
            TestKind::Zheng => "zheng",
            TestKind::Gwz => "gwz",
            TestKind::Icm => "icm",
        }
    }
}

/// Study design: scenarios to cross with tests and levels.
#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub scenarios: Vec<Scenario>,
    pub tests: Vec<TestKind>,
    pub levels: Vec<f64>,
    pub reps: usize,
    pub seed: u64,
    /// 0 = one worker per core, 1 = sequential, otherwise a pool cap.
    pub workers: usize,
    /// Options of the transform tests (adaptive and fixed-direction).
    pub options: TestOptions,
}

impl StudyConfig {
    pub fn new(scenarios: Vec<Scenario>, tests: Vec<TestKind>, reps: usize, seed: u64) -> Self {
        StudyConfig {
            scenarios,
            tests,
            levels: vec![0.10, 0.05, 0.01],
            reps,
            seed,
            workers: 0,
            options: TestOptions::default(),
        }
    }
}

/// One (scenario, test, level) cell of the output table.
#[derive(Clone, Debug)]
pub struct SizePowerRow {
    pub scenario: ScenarioKind,
    pub a: f64,
    pub n: usize,
    pub p: usize,
    pub test: TestKind,
    pub level: f64,
    pub rejection_rate: f64,
    /// Replications the rate is based on (requested minus failures).
    pub reps_used: usize,
    pub failures: usize,
}

/// Rejection-rate table over the full study design.
#[derive(Clone, Debug)]
pub struct SizePowerTable {
    pub rows: Vec<SizePowerRow>,
    pub reps: usize,
    pub seed: u64,
}

impl SizePowerTable {
    /// Flat machine-readable rendering, one row per cell.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scenario,a,n,p,test,level,rejection_rate,reps_used,failures\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.scenario.name(),
                r.a,
                r.n,
                r.p,
                r.test.name(),
                r.level,
                r.rejection_rate,
                r.reps_used,
                r.failures
            ));
        }
        out
    }

    /// Aligned text rendering grouped the way the study tables are usually
    /// read: one block per (scenario, level), tests as columns, amplitude
    /// and sample size as rows.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut blocks: Vec<(ScenarioKind, f64)> = Vec::new();
        for r in &self.rows {
            if !blocks.iter().any(|(k, l)| *k == r.scenario && *l == r.level) {
                blocks.push((r.scenario, r.level));
            }
        }
        let mut tests: Vec<TestKind> = Vec::new();
        for r in &self.rows {
            if !tests.contains(&r.test) {
                tests.push(r.test);
            }
        }
        for (kind, level) in blocks {
            out.push_str(&format!("{} at level {}\n", kind.name(), level));
            out.push_str(&format!("{:>8} {:>6} {:>4}", "a", "n", "p"));
            for t in &tests {
                out.push_str(&format!(" {:>8}", t.name()));
            }
            out.push('\n');
            let mut cells: Vec<(f64, usize, usize)> = Vec::new();
            for r in &self.rows {
                if r.scenario == kind && r.level == level && !cells.contains(&(r.a, r.n, r.p)) {
                    cells.push((r.a, r.n, r.p));
                }
            }
            for (a, n, p) in cells {
                out.push_str(&format!("{a:>8} {n:>6} {p:>4}"));
                for t in &tests {
                    let rate = self
                        .rows
                        .iter()
                        .find(|r| {
                            r.scenario == kind
                                && r.level == level
                                && r.a == a
                                && r.n == n
                                && r.p == p
                                && r.test == *t
                        })
                        .map(|r| r.rejection_rate);
                    match rate {
                        Some(v) => out.push_str(&format!(" {v:>8.4}")),
                        None => out.push_str(&format!(" {:>8}", "-")),
                    }
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }
}

/// Outcome of one replication: per-test, per-level decisions, or a failure.
struct RepOutcome {
    rejects: Vec<Vec<bool>>,
    failed: bool,
}

/// Run every scenario of the study and tabulate rejection rates.
///
/// Failed replications (non-convergent fits or degenerate statistics) are
/// excluded from the denominators and counted; a failure rate above 1% in
/// any scenario aborts the study with an error.
pub fn run_study(config: &StudyConfig) -> Result<SizePowerTable> {
    if config.reps == 0 {
        return Err(Error::invalid("need at least one replication"));
    }
    if config.scenarios.is_empty() || config.tests.is_empty() {
        return Err(Error::invalid("need at least one scenario and one test"));
    }
    for &level in &config.levels {
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::invalid("significance levels must lie in (0, 1)"));
        }
    }
    let table = CvmDistribution::builtin();
    let cvm_criticals: Vec<f64> = config
        .levels
        .iter()
        .map(|&l| table.critical_value(l))
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for scenario in &config.scenarios {
        let family = scenario.kind.null_family();
        let scenario_seed = exec::mix_seed(config.seed, scenario.id());
        let outcomes: Vec<RepOutcome> = exec::map_indexed(config.reps, config.workers, |rep| {
            run_replication(
                scenario,
                &family,
                exec::mix_seed(scenario_seed, rep as u64),
                config,
                &cvm_criticals,
            )
            .unwrap_or(RepOutcome { rejects: Vec::new(), failed: true })
        });

        let failures = outcomes.iter().filter(|o| o.failed).count();
        let used = config.reps - failures;
        if failures as f64 > 0.01 * config.reps as f64 {
            return Err(Error::estimation(format!(
                "scenario {} (a={}, n={}): {failures} of {} replications failed",
                scenario.kind.name(),
                scenario.a,
                scenario.n,
                config.reps
            )));
        }
        if used == 0 {
            return Err(Error::estimation("every replication failed"));
        }
        for (ti, test) in config.tests.iter().enumerate() {
            for (li, &level) in config.levels.iter().enumerate() {
                let rejections = outcomes
                    .iter()
                    .filter(|o| !o.failed && o.rejects[ti][li])
                    .count();
                rows.push(SizePowerRow {
                    scenario: scenario.kind,
                    a: scenario.a,
                    n: scenario.n,
                    p: scenario.p,
                    test: *test,
                    level,
                    rejection_rate: rejections as f64 / used as f64,
                    reps_used: used,
                    failures,
                });
            }
        }
    }
    Ok(SizePowerTable { rows, reps: config.reps, seed: config.seed })
}

fn run_replication(
    scenario: &Scenario,
    family: &ModelFamily,
    rep_seed: u64,
    config: &StudyConfig,
    cvm_criticals: &[f64],
) -> Result<RepOutcome> {
    let data = generate(scenario, rep_seed)?;
    let fit_result = fit(&data, family, &config.options.fit)?;
    if !fit_result.converged {
        return Ok(RepOutcome { rejects: Vec::new(), failed: true });
    }
    let needs_sdr = config
        .tests
        .iter()
        .any(|t| matches!(t, TestKind::Acm | TestKind::Gwz));
    let sdr_result = if needs_sdr {
        Some(sdr::reduce(data.x(), data.y(), Some(&fit_result.gamma_hat.beta))?)
    } else {
        None
    };
    let residuals: Vec<f64> = fit_result.residuals.iter().copied().collect();

    let mut rejects = Vec::with_capacity(config.tests.len());
    for test in &config.tests {
        let decisions = match test {
            TestKind::Acm => {
                let sdr_result = sdr_result.as_ref().expect("computed above");
                let core = acm_from_basis(&data, family, &fit_result, &sdr_result.basis, &config.options)?;
                cvm_criticals.iter().map(|cv| core.breakdown.acm2 > *cv).collect()
            }
            TestKind::StuteZhu => {
                let report = baselines::stute_zhu(&data, family, &fit_result, &config.options)?;
                let mut opts_levels = Vec::with_capacity(config.levels.len());
                for (li, _) in config.levels.iter().enumerate() {
                    opts_levels.push(report.statistic > cvm_criticals[li]);
                }
                opts_levels
            }
            TestKind::Zheng => {
                let options = ZhengOptions { levels: config.levels.clone(), ..ZhengOptions::default() };
                baselines::zheng(&data, &residuals, &options)?.rejects
            }
            TestKind::Gwz => {
                let sdr_result = sdr_result.as_ref().expect("computed above");
                let options = GwzOptions { levels: config.levels.clone(), ..GwzOptions::default() };
                baselines::gwz(&data, &residuals, sdr_result, &options)?.rejects
            }
            TestKind::Icm => {
                let options = IcmOptions {
                    seed: exec::mix_seed(rep_seed, 0x1C41),
                    levels: config.levels.clone(),
                    ..IcmOptions::default()
                };
                baselines::icm(&data, &residuals, &options)?.rejects
            }
        };
        rejects.push(decisions);
    }
    Ok(RepOutcome { rejects, failed: false })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_rule_matches_design_points() {
        assert_eq!(dims_for(100).unwrap(), 7);
        assert_eq!(dims_for(200).unwrap(), 10);
        assert_eq!(dims_for(400).unwrap(), 12);
        assert_eq!(dims_for(800).unwrap(), 16);
    }

    #[test]
    fn dimension_rule_exact_fourth_power() {
        // 4 * 625^(1/4) = 20 exactly; the floor must not lose it.
        assert_eq!(dims_for(625).unwrap(), 15);
    }

    #[test]
    fn dimension_rule_rejects_tiny_samples() {
        assert!(dims_for(2).is_err());
    }

    #[test]
    fn index_directions_are_unit_and_orthogonal() {
        for p in [4, 7, 10, 13] {
            let b0 = beta_null(p);
            let b1 = beta_one(p);
            let b2 = beta_two(p);
            assert!((b0.norm() - 1.0).abs() < 1e-12);
            assert!((b1.norm() - 1.0).abs() < 1e-12);
            assert!((b2.norm() - 1.0).abs() < 1e-12);
            assert!(b1.dot(&b2).abs() < 1e-15);
        }
    }

    #[test]
    fn null_generation_is_linear_plus_noise() {
        let scenario = Scenario::new(ScenarioKind::H11, 0.0, 100).unwrap();
        let data = generate(&scenario, 7).unwrap();
        assert_eq!(data.n(), 100);
        assert_eq!(data.p(), 7);
        // With the amplitude off, Y - b0'X is exactly the noise vector.
        let b0 = beta_null(7);
        let idx = data.x() * &b0;
        let noise = data.y() - idx;
        let mean = noise.mean();
        assert!(mean.abs() < 0.5, "noise mean {mean}");
    }

    #[test]
    fn noise_variance_near_one() {
        let scenario = Scenario::new(ScenarioKind::H11, 0.0, 1000).unwrap();
        let data = generate(&scenario, 99).unwrap();
        let b0 = beta_null(scenario.p);
        let noise = data.y() - data.x() * &b0;
        let mean = noise.mean();
        let var = noise.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / 1000.0;
        assert!((var - 1.0).abs() < 0.1, "noise variance {var}");
    }

    #[test]
    fn h13_noise_free_departure_is_nonnegative() {
        let mut scenario = Scenario::new(ScenarioKind::H13, 1.0, 50).unwrap();
        scenario.p = 6;
        // Replicate the generator with the noise stripped off by regenerating
        // and subtracting: instead, draw and check Y - b1'X - eps >= 0 via
        // the generator's own noise draw order. Simpler: amplitude 1 with a
        // fresh seed, then Y - b1'X >= eps, so Y - b1'X - (Y_null - b1'X) =
        // a (b2'X)^2 >= 0 comparing paired seeds.
        let alt = generate(&scenario, 11).unwrap();
        let null_scenario = Scenario { a: 0.0, ..scenario };
        let null = generate(&null_scenario, 11).unwrap();
        for i in 0..50 {
            let departure = alt.y()[i] - null.y()[i];
            assert!(departure >= -1e-12, "negative departure {departure}");
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let scenario = Scenario::new(ScenarioKind::H14, 0.5, 120).unwrap();
        let a = generate(&scenario, 5).unwrap();
        let b = generate(&scenario, 5).unwrap();
        assert_eq!(a.x(), b.x());
        assert_eq!(a.y(), b.y());
        let c = generate(&scenario, 6).unwrap();
        assert_ne!(a.y(), c.y());
    }

    #[test]
    fn local_centering_matches_closed_form() {
        // E exp(-T^2) = 1/sqrt(3) for standard normal T.
        let c = local_centering_constant();
        assert!((c - 1.0 / 3.0f64.sqrt()).abs() < 1e-10, "constant {c}");
    }

    #[test]
    fn local_alternative_shrinks_with_n() {
        let s_small = Scenario::new(ScenarioKind::Local, 1.0, 100).unwrap();
        let s_null = Scenario { a: 0.0, ..s_small };
        let alt = generate(&s_small, 3).unwrap();
        let null = generate(&s_null, 3).unwrap();
        let max_dep = (alt.y() - null.y()).amax();
        // The departure is at most n^(-1/2) (1 - 1/sqrt(3)) plus centering.
        assert!(max_dep <= (1.0 + 1.0) / 10.0, "departure {max_dep}");
        assert!(max_dep > 0.0);
    }

    #[test]
    fn scenario_ids_distinguish_design_points() {
        let a = Scenario::new(ScenarioKind::H11, 0.0, 100).unwrap();
        let b = Scenario::new(ScenarioKind::H11, 0.25, 100).unwrap();
        let c = Scenario::new(ScenarioKind::H12, 0.0, 100).unwrap();
        assert_ne!(a.id(), b.id());
        assert_ne!(a.id(), c.id());
        assert_ne!(b.id(), c.id());
    }

    #[test]
    fn tiny_study_runs_and_is_deterministic_across_workers() {
        let scenario = Scenario::with_dimension(ScenarioKind::H11, 0.0, 60, 4).unwrap();
        let mut config = StudyConfig::new(vec![scenario], vec![TestKind::Zheng], 8, 42);
        config.workers = 1;
        let a = run_study(&config).unwrap();
        config.workers = 3;
        let b = run_study(&config).unwrap();
        assert_eq!(a.rows.len(), b.rows.len());
        for (ra, rb) in a.rows.iter().zip(&b.rows) {
            assert_eq!(ra.rejection_rate, rb.rejection_rate);
            assert_eq!(ra.reps_used, rb.reps_used);
        }
        for row in &a.rows {
            assert!(row.rejection_rate >= 0.0 && row.rejection_rate <= 1.0);
        }
    }

    #[test]
    fn single_rep_rate_is_zero_or_one() {
        let scenario = Scenario::with_dimension(ScenarioKind::H11, 0.0, 60, 4).unwrap();
        let config = StudyConfig::new(vec![scenario], vec![TestKind::Zheng], 1, 9);
        let table = run_study(&config).unwrap();
        for row in &table.rows {
            assert!(row.rejection_rate == 0.0 || row.rejection_rate == 1.0);
        }
    }

    #[test]
    fn csv_rendering_has_header_and_rows() {
        let scenario = Scenario::with_dimension(ScenarioKind::H11, 0.0, 60, 4).unwrap();
        let config = StudyConfig::new(vec![scenario], vec![TestKind::Zheng], 2, 1);
        let table = run_study(&config).unwrap();
        let csv = table.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 3);
        assert!(lines[0].starts_with("scenario,"));
        assert!(lines[1].starts_with("H11,"));
        let text = table.to_text();
        assert!(text.contains("H11 at level"));
    }
}
