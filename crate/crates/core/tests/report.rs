use std::fs;

use roughflow::report::{report, CsvTable};
use roughflow::scenario::{run, RunOptions, Scenario};
use roughflow::Error;

#[test]
fn smoothing_plot_annotates_the_csv_slope() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = Scenario::builtin("smoothing-rates").unwrap();
    let opts = RunOptions { resolution: Some(32), out: Some(tmp.path().to_path_buf()), plots: true, ..RunOptions::default() };
    let outcome = run(&scn, &opts).unwrap();
    let fits = CsvTable::read(&outcome.dir.join("n32/smoothing_rates_fits.csv")).unwrap();
    let svg = fs::read_to_string(outcome.dir.join("plots/n32_smoothing_rates.svg")).unwrap();
    for k in ["grad1", "grad2"] {
        let slope = fits.lookup("name", k, "slope").unwrap();
        assert!(svg.contains(&format!("{k} slope = {slope}")), "{k} {slope}");
    }
    let again = report(&outcome.dir, false).unwrap();
    assert_eq!(again.passed, outcome.passed());
    assert!(again.text.contains("grad1_rate"));
}

#[test]
fn missing_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    match report(tmp.path(), false) {
        Err(Error::ManifestMissing(p)) => assert!(p.ends_with("manifest.toml")),
        other => panic!("{other:?}"),
    }
}

#[test]
fn beta_weak_heatmap_is_written() {
    let tmp = tempfile::tempdir().unwrap();
    let scn = Scenario::builtin("beta-weak-smooth").unwrap();
    let opts = RunOptions { resolution: Some(32), out: Some(tmp.path().to_path_buf()), plots: true, ..RunOptions::default() };
    run(&scn, &opts).unwrap();
    let svg = fs::read_to_string(tmp.path().join("plots/n32_beta_weak.svg")).unwrap();
    assert!(svg.contains("<rect"));
}
