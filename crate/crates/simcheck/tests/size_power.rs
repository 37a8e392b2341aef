//! Monte Carlo checks of the competitor tests and of cross-variant
//! consistency of the main statistic. Every run is seeded, so the observed
//! rates are exactly reproducible.

use simcheck::gof::{run_test, TestOptions};
use simcheck::sim::{generate, run_study, Scenario, ScenarioKind, StudyConfig, TestKind};

fn rate_at(table: &simcheck::sim::SizePowerTable, test: TestKind, a: f64, level: f64) -> f64 {
    table
        .rows
        .iter()
        .find(|r| r.test == test && (r.a - a).abs() < 1e-12 && (r.level - level).abs() < 1e-9)
        .expect("requested cell missing")
        .rejection_rate
}

#[test]
fn baseline_sizes_on_linear_null() {
    let scenario = Scenario::new(ScenarioKind::H11, 0.0, 100).unwrap();
    let tests = vec![TestKind::StuteZhu, TestKind::Zheng, TestKind::Gwz];
    let config = StudyConfig::new(vec![scenario], tests, 2000, 314_159);
    let table = run_study(&config).unwrap();

    let sz = rate_at(&table, TestKind::StuteZhu, 0.0, 0.05);
    assert!((0.031..=0.071).contains(&sz), "fixed-direction test size {sz}");

    // The local smoothing test without dimension reduction is known to be
    // conservative in this design.
    let zheng = rate_at(&table, TestKind::Zheng, 0.0, 0.05);
    assert!((0.010..=0.050).contains(&zheng), "local smoothing test size {zheng}");

    let gwz = rate_at(&table, TestKind::Gwz, 0.0, 0.05);
    assert!((0.0325..=0.0725).contains(&gwz), "reduced-dimension smoothing test size {gwz}");
}

#[test]
fn reduced_dimension_smoothing_test_has_power_on_high_frequency_alternative() {
    let scenario = Scenario::new(ScenarioKind::H12, 0.5, 200).unwrap();
    let config = StudyConfig::new(vec![scenario], vec![TestKind::Gwz], 2000, 314_159);
    let table = run_study(&config).unwrap();
    let power = rate_at(&table, TestKind::Gwz, 0.5, 0.05);
    assert!(power >= 0.88, "power {power}");
}

#[test]
fn power_rises_sharply_from_null_to_moderate_alternative() {
    let scenarios = vec![
        Scenario::new(ScenarioKind::H11, 0.0, 100).unwrap(),
        Scenario::new(ScenarioKind::H11, 0.5, 100).unwrap(),
    ];
    let config = StudyConfig::new(scenarios, vec![TestKind::Acm], 2000, 271_828);
    let table = run_study(&config).unwrap();
    let size = rate_at(&table, TestKind::Acm, 0.0, 0.05);
    let power = rate_at(&table, TestKind::Acm, 0.5, 0.05);
    assert!(power > size + 0.3, "power {power} vs size {size}");
}

#[test]
fn heteroscedastic_variant_agrees_on_homoscedastic_data() {
    let scenario = Scenario::new(ScenarioKind::H11, 0.0, 400).unwrap();
    let family = ScenarioKind::H11.null_family();
    let reps = 100;
    let mut ratios = Vec::with_capacity(reps);
    for rep in 0..reps {
        let data = generate(&scenario, 67_000 + rep as u64).unwrap();
        let hom = run_test(&data, &family, &TestOptions::default()).unwrap();
        let het_options = TestOptions { heteroscedastic: true, ..TestOptions::default() };
        let het = run_test(&data, &family, &het_options).unwrap();
        ratios.push(het.acm2 / hom.acm2);
    }
    let mean_dev = ratios.iter().map(|r| (r - 1.0).abs()).sum::<f64>() / reps as f64;
    let mut sorted = ratios.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[reps / 2];
    assert!(mean_dev <= 0.05, "mean |het/hom - 1| = {mean_dev}");
    assert!((0.95..=1.05).contains(&median), "median ratio {median}");
}
