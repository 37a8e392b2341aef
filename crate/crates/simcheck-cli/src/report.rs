//! Report rendering. Text output is for reading; key-value output is
//! line-oriented `key=value` with a stable key set; CSV is for tables.
//! Numeric values in key-value and CSV output use the shortest
//! representation that parses back to the same number, so emission is
//! lossless.

use simcheck::baselines::{BaselineReport, DecisionMethod};
use simcheck::gof::TestReport;
use simcheck::nls::FitResult;
use simcheck::process::TransformMode;
use simcheck::sdr::SdrResult;
use simcheck::sim::SizePowerTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    /// Human-readable report.
    Text,
    /// Line-oriented key=value pairs with a stable key set.
    Kv,
    /// Comma-separated table (tabular commands only).
    Csv,
}

fn mode_name(mode: TransformMode) -> &'static str {
    match mode {
        TransformMode::Spherical => "spherical",
        TransformMode::General => "general",
    }
}

fn method_name(method: DecisionMethod) -> &'static str {
    match method {
        DecisionMethod::CvmTable => "cvm-table",
        DecisionMethod::AsymptoticNormal => "asymptotic-normal",
        DecisionMethod::WildBootstrap => "wild-bootstrap",
    }
}

/// Key suffix for a significance level: 0.05 -> "0.05".
fn level_key(level: f64) -> String {
    format!("{level}")
}

pub fn fit_text(model: &str, n: usize, p: usize, names: &[String], fit: &FitResult) -> String {
    let mut out = String::new();
    out.push_str(&format!("least-squares fit of model \"{model}\" on {n} observations, {p} predictors\n"));
    out.push_str(&format!(
        "converged: {} after {} iterations, rss {:.6}\n",
        if fit.converged { "yes" } else { "no" },
        fit.iterations,
        fit.rss
    ));
    out.push_str("index coefficients:\n");
    for (j, name) in names.iter().enumerate() {
        out.push_str(&format!("  beta[{name}] = {:+.6}\n", fit.gamma_hat.beta[j]));
    }
    for j in 0..fit.gamma_hat.theta.len() {
        out.push_str(&format!("  theta[{}] = {:+.6}\n", j + 1, fit.gamma_hat.theta[j]));
    }
    out
}

pub fn fit_kv(model: &str, n: usize, p: usize, fit: &FitResult) -> String {
    let mut out = String::new();
    out.push_str(&format!("model={model}\n"));
    out.push_str(&format!("n={n}\n"));
    out.push_str(&format!("p={p}\n"));
    out.push_str(&format!("converged={}\n", fit.converged));
    out.push_str(&format!("iterations={}\n", fit.iterations));
    out.push_str(&format!("rss={}\n", fit.rss));
    for j in 0..fit.gamma_hat.beta.len() {
        out.push_str(&format!("beta_{}={}\n", j + 1, fit.gamma_hat.beta[j]));
    }
    for j in 0..fit.gamma_hat.theta.len() {
        out.push_str(&format!("theta_{}={}\n", j + 1, fit.gamma_hat.theta[j]));
    }
    out
}

pub fn test_text(model: &str, n: usize, p: usize, report: &TestReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "adaptive lack-of-fit test of model \"{model}\" on {n} observations, {p} predictors\n"
    ));
    out.push_str(&format!(
        "statistic: {:.6} (unnormalized {:.6}, {} normalization)\n",
        report.acm2,
        report.cm2,
        if report.heteroscedastic { "heteroscedastic" } else { "homoscedastic" }
    ));
    out.push_str(&format!(
        "estimated index-space dimension: {} ({} mode, trimming point {:.4})\n",
        report.q_hat,
        mode_name(report.mode),
        report.u0
    ));
    out.push_str(&format!(
        "p-value: {}{:.4}\n",
        if report.p_value_is_floor { "<= " } else { "" },
        report.p_value
    ));
    for (i, &level) in report.levels.iter().enumerate() {
        out.push_str(&format!(
            "at level {:>5}: critical value {:.6} -> {}\n",
            level,
            report.critical_values[i],
            if report.rejects[i] { "reject" } else { "do not reject" }
        ));
    }
    let d = &report.diagnostics;
    out.push_str(&format!(
        "fit: converged {} in {} iterations, rss {:.6}\n",
        if d.converged { "yes" } else { "no" },
        d.iterations,
        d.rss
    ));
    out.push_str(&format!(
        "diagnostics: {} retained jump points ({:.1}%), {} dropped degenerate, smoothing bandwidth {:.4}, variance floor hits {}\n",
        d.retained_count,
        100.0 * d.retained_fraction,
        d.dropped_degenerate,
        d.bandwidth,
        d.floor_active
    ));
    out
}

pub fn test_kv(model: &str, n: usize, p: usize, report: &TestReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("model={model}\n"));
    out.push_str(&format!("n={n}\n"));
    out.push_str(&format!("p={p}\n"));
    out.push_str(&format!("acm2={}\n", report.acm2));
    out.push_str(&format!("cm2={}\n", report.cm2));
    out.push_str(&format!("q_hat={}\n", report.q_hat));
    out.push_str(&format!("u0={}\n", report.u0));
    out.push_str(&format!("mode={}\n", mode_name(report.mode)));
    out.push_str(&format!("heteroscedastic={}\n", report.heteroscedastic));
    out.push_str(&format!("p_value={}\n", report.p_value));
    out.push_str(&format!("p_value_is_floor={}\n", report.p_value_is_floor));
    for (i, &level) in report.levels.iter().enumerate() {
        out.push_str(&format!("critical_value_{}={}\n", level_key(level), report.critical_values[i]));
        out.push_str(&format!("reject_{}={}\n", level_key(level), report.rejects[i]));
    }
    let d = &report.diagnostics;
    out.push_str(&format!("converged={}\n", d.converged));
    out.push_str(&format!("iterations={}\n", d.iterations));
    out.push_str(&format!("rss={}\n", d.rss));
    for (j, ev) in d.eigenvalues.iter().enumerate() {
        out.push_str(&format!("eigenvalue_{}={}\n", j + 1, ev));
    }
    out.push_str(&format!("n_directions={}\n", d.n_directions));
    out.push_str(&format!("retained_count={}\n", d.retained_count));
    out.push_str(&format!("retained_fraction={}\n", d.retained_fraction));
    out.push_str(&format!("dropped_degenerate={}\n", d.dropped_degenerate));
    out.push_str(&format!("bandwidth={}\n", d.bandwidth));
    out.push_str(&format!("floor_active={}\n", d.floor_active));
    out
}

pub fn baseline_text(model: &str, n: usize, p: usize, report: &BaselineReport, seed: Option<u64>) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "baseline test \"{}\" of model \"{model}\" on {n} observations, {p} predictors\n",
        report.name
    ));
    out.push_str(&format!(
        "statistic: {:.6} (decision by {})\n",
        report.statistic,
        method_name(report.method)
    ));
    if let Some(h) = report.bandwidth {
        out.push_str(&format!("bandwidth: {h:.6}\n"));
    }
    if let Some(q) = report.q_hat {
        out.push_str(&format!("projection dimension: {q}\n"));
    }
    if let Some(seed) = seed {
        out.push_str(&format!("bootstrap seed: {seed}\n"));
    }
    out.push_str(&format!(
        "p-value: {}{:.4}\n",
        if report.p_value_is_floor { "<= " } else { "" },
        report.p_value
    ));
    for (i, &level) in report.levels.iter().enumerate() {
        out.push_str(&format!(
            "at level {:>5}: critical value {:.6} -> {}\n",
            level,
            report.critical_values[i],
            if report.rejects[i] { "reject" } else { "do not reject" }
        ));
    }
    out
}

pub fn baseline_kv(model: &str, n: usize, p: usize, report: &BaselineReport, seed: Option<u64>) -> String {
    let mut out = String::new();
    out.push_str(&format!("test={}\n", report.name));
    out.push_str(&format!("model={model}\n"));
    out.push_str(&format!("n={n}\n"));
    out.push_str(&format!("p={p}\n"));
    out.push_str(&format!("statistic={}\n", report.statistic));
    out.push_str(&format!("method={}\n", method_name(report.method)));
    if let Some(h) = report.bandwidth {
        out.push_str(&format!("bandwidth={h}\n"));
    }
    if let Some(q) = report.q_hat {
        out.push_str(&format!("q_hat={q}\n"));
    }
    if let Some(seed) = seed {
        out.push_str(&format!("seed={seed}\n"));
    }
    out.push_str(&format!("p_value={}\n", report.p_value));
    out.push_str(&format!("p_value_is_floor={}\n", report.p_value_is_floor));
    for (i, &level) in report.levels.iter().enumerate() {
        out.push_str(&format!("critical_value_{}={}\n", level_key(level), report.critical_values[i]));
        out.push_str(&format!("reject_{}={}\n", level_key(level), report.rejects[i]));
    }
    out
}

pub fn sdr_text(n: usize, p: usize, names: &[String], result: &SdrResult) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "cumulative slicing estimate on {n} observations, {p} predictors\n"
    ));
    out.push_str(&format!("selected dimension: {}\n", result.q_hat));
    out.push_str("kernel eigenvalues (descending):");
    for ev in &result.eigenvalues {
        out.push_str(&format!(" {ev:.6}"));
    }
    out.push('\n');
    out.push_str("directions (original scale, unit columns):\n");
    for (j, name) in names.iter().enumerate() {
        out.push_str(&format!("  {name:>12}"));
        for q in 0..result.q_hat {
            out.push_str(&format!(" {:+10.6}", result.basis[(j, q)]));
        }
        out.push('\n');
    }
    out
}

pub fn sdr_kv(n: usize, p: usize, result: &SdrResult) -> String {
    let mut out = String::new();
    out.push_str(&format!("n={n}\n"));
    out.push_str(&format!("p={p}\n"));
    out.push_str(&format!("q_hat={}\n", result.q_hat));
    for (j, ev) in result.eigenvalues.iter().enumerate() {
        out.push_str(&format!("eigenvalue_{}={}\n", j + 1, ev));
    }
    for q in 0..result.q_hat {
        for j in 0..p {
            out.push_str(&format!("basis_{}_{}={}\n", q + 1, j + 1, result.basis[(j, q)]));
        }
    }
    out
}

pub fn study_text(table: &SizePowerTable) -> String {
    format!(
        "size/power study: {} replications per cell, seed {}\n{}",
        table.reps,
        table.seed,
        table.to_text()
    )
}
