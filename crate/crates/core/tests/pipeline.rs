use std::path::PathBuf;

use lagmeter::pipeline::{render_report, run_pipeline, ExperimentConfig, ReportFormat};
use lagmeter::Error;

fn data() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data")
}

fn experiment() -> ExperimentConfig {
    ExperimentConfig::load(data().join("exp/experiment.toml")).unwrap()
}

/// Set `LAGMETER_BLESS=1` to rewrite the expected files.
fn golden(name: &str, actual: &str) {
    let path = data().join(name);
    if std::env::var_os("LAGMETER_BLESS").is_some() {
        std::fs::write(&path, actual).unwrap();
    }
    let expected = std::fs::read_to_string(&path).unwrap();
    assert_eq!(
        actual,
        expected,
        "{} differs; rerun with LAGMETER_BLESS=1 to update",
        path.display()
    );
}

#[test]
fn markdown_report_matches_golden() {
    let report = run_pipeline(&experiment()).unwrap();
    assert!(report.failures.is_empty(), "{:?}", report.failures);
    golden(
        "expected_report.md",
        &render_report(&report, ReportFormat::Markdown),
    );
}

#[test]
fn report_is_deterministic() {
    let cfg = experiment();
    let a = render_report(&run_pipeline(&cfg).unwrap(), ReportFormat::Json);
    let b = render_report(&run_pipeline(&cfg).unwrap(), ReportFormat::Json);
    assert_eq!(a, b);
}

#[test]
fn report_contents() {
    let report = run_pipeline(&experiment()).unwrap();
    assert_eq!(report.documents, ["d1", "d2", "d3"]);
    let names: Vec<&str> = report.latency.iter().map(|r| r.system.as_str()).collect();
    assert_eq!(
        names,
        ["cs-int", "de-int", "en-cs", "de-cs", "de-cs [de-int leg]"]
    );
    for row in &report.latency {
        assert!(row
            .report
            .percentiles
            .windows(2)
            .all(|w| w[0].value <= w[1].value));
        assert!(
            row.report.samples.iter().all(|s| s.latency >= 0.0),
            "{}",
            row.system
        );
        assert!(!row.documents.is_empty());
    }
    assert_eq!(report.bleu.len(), 2);
    for b in &report.bleu {
        assert!(b.agg.score > 0.0 && b.agg.score < 100.0, "{}", b.system);
    }
    // de-cs output is token-identical to the reference
    let reference = report
        .compression
        .iter()
        .find(|c| c.system == "cs-ref")
        .unwrap();
    let relay = report
        .compression
        .iter()
        .find(|c| c.system == "de-cs")
        .unwrap();
    assert_eq!(reference.report, relay.report);
    assert_eq!(report.z_tests.len(), 1);
    assert_eq!(report.annotations.len(), 3);
    assert_eq!(report.provenance.config_hash.len(), 64);
}

#[test]
fn broken_documents_are_reported_not_fatal() {
    let dir = tempfile::tempdir().unwrap();
    let exp = data().join("exp");
    std::fs::write(
        dir.path().join("bad.cs.tsv"),
        "d9\tint\t0\tx\tnot-a-time\t1.0\n",
    )
    .unwrap();
    std::fs::write(dir.path().join("d9.en.tsv"), "d9\tsrc\t0\tcat\t0.0\t0.2\n").unwrap();
    let text = std::fs::read_to_string(exp.join("experiment.toml"))
        .unwrap()
        .replace("annotations = \"annotations.tsv\"\n", "")
        .replace("\"d1.", &format!("\"{}/d1.", exp.display()))
        .replace("\"d2.", &format!("\"{}/d2.", exp.display()))
        .replace("\"d3.", &format!("\"{}/d3.", exp.display()))
        .replace("\"cs-corpus", &format!("\"{}/cs-corpus", exp.display()))
        + "\n[[documents]]\ndoc_id = \"d9\"\nsource = \"d9.en.tsv\"\noutputs = { cs-int = \"bad.cs.tsv\" }\n";
    let cfg = ExperimentConfig::from_toml(&text, dir.path()).unwrap();
    let report = run_pipeline(&cfg).unwrap();
    assert_eq!(report.documents, ["d1", "d2", "d3", "d9"]);
    assert_eq!(report.failures.len(), 1);
    assert_eq!(report.failures[0].doc_id, "d9");
    assert_eq!(report.failures[0].system.as_deref(), Some("cs-int"));
    assert!(!report.latency.is_empty());
    let md = render_report(&report, ReportFormat::Markdown);
    assert!(md.contains("## Failures"));
}

#[test]
fn missing_paths_fail_validation() {
    let cfg = ExperimentConfig::from_toml(
        "source_language = \"en\"\n[[documents]]\ndoc_id = \"x\"\nsource = \"nope.tsv\"\n",
        data(),
    )
    .unwrap();
    assert!(matches!(run_pipeline(&cfg), Err(Error::ConfigInvalid(_))));
}

#[test]
fn csv_has_every_latency_row() {
    let report = run_pipeline(&experiment()).unwrap();
    let csv = render_report(&report, ReportFormat::Csv);
    for row in &report.latency {
        assert!(csv.contains(&format!("latency,{},avg,{}", row.system, row.report.avg)));
    }
}
