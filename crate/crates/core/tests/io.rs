use endoselect::chain_dump::{read_chain_csv, write_chain_csv};
use endoselect::counterfactual::{CounterfactualReport, EvaluationMode};
use endoselect::dataset::{parse_dataset, parse_reader};
use endoselect::mala::{run_chain, MalaConfig, MetricAdaptation};
use endoselect::posterior::IsotropicNormal;
use endoselect::report::{emit_report, read_json, to_json_string, ReportFormat};
use endoselect::scenario::{benchmark_covariates, benchmark_model, benchmark_truth, parameters_from_names};
use endoselect::simulate::simulate_dataset;
use endoselect::summary::{convergence_table, posterior_summary};
use endoselect::Error;

#[test]
fn simulate_write_parse_reproduces_records() {
    let covspec = benchmark_covariates(3_000, 21);
    let params = parameters_from_names(&covspec.design().unwrap().layout, &benchmark_truth(-0.35)).unwrap();
    let data = simulate_dataset(&params, &covspec).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("data.csv");
    data.write_csv(&path).unwrap();
    let (back, report) = parse_dataset(&path, &benchmark_model()).unwrap();
    assert_eq!(report.rows_in, 3_000);
    assert_eq!(report.rows_dropped(), 0);
    assert_eq!(back.records, data.records);
    assert_eq!(back.design.layout, data.design.layout);
    assert_eq!(back.labels("lang").unwrap(), data.labels("lang").unwrap());
}

#[test]
fn ingestion_conservation_with_mixed_defects() {
    let mut csv = String::from("incentivized,click,install,lang,wifi,volume,resolution,version\n");
    let rows = [
        "1,1,1,EN,yes,0.5,0.1,0.2",
        "0,0,1,ES,no,0.2,0.3,0.1",
        "1,1,0,,yes,0.4,0.0,0.0",
        "0,1,0,ZH,no,abc,0.0,0.0",
        "1,0,0,ZH,yes,0.9,-1.0,0.5",
        "0,1,1,ES,no,0.1,1.5,-0.5",
        "1,0,0,EN,no,0.3,0.2,0.9",
        "0,0,0,ZH,yes,0.7,-0.3,-0.2",
        "1,1,1,ES,yes,0.6,0.4,0.3",
        "0,1,0,EN,yes,0.8,-0.8,0.7",
    ];
    for r in rows {
        csv.push_str(r);
        csv.push('\n');
    }
    let (ds, rep) = parse_reader(csv.as_bytes(), &benchmark_model()).unwrap();
    assert_eq!(rep.rows_in, rep.rows_kept + rep.rows_dropped());
    assert_eq!(rep.rows_kept, ds.len());
    assert_eq!(rep.dropped.len(), 3);
}

fn small_chain() -> endoselect::mala::PosteriorChain {
    let target = IsotropicNormal {
        mean: vec![1.0, -2.0],
        sd: 0.5,
    };
    let cfg = MalaConfig {
        iterations: 600,
        adapt_until: 300,
        seed: 3,
        metric: MetricAdaptation::Identity,
        initial_step: 0.3,
        ..MalaConfig::default()
    };
    run_chain(&target, vec![0.0, 0.0], vec!["a".into(), "theta_tilde".into()], &cfg).unwrap()
}

#[test]
fn chain_dump_round_trip_is_exact() {
    let chain = small_chain();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("chain.csv");
    write_chain_csv(&chain, &path).unwrap();
    assert_eq!(read_chain_csv(&path).unwrap(), chain);
}

#[test]
fn reports_are_byte_identical_and_round_trip() {
    let chain = small_chain();
    let summary = posterior_summary(&chain, 0.5).unwrap();
    let table = convergence_table(&chain, 0.5, 0.05).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = emit_report(dir.path(), "a", &(summary.clone(), table.clone()), ReportFormat::Json).unwrap();
    let b = emit_report(dir.path(), "b", &(summary, table), ReportFormat::Json).unwrap();
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    type Pair = (endoselect::summary::PosteriorSummary, Vec<endoselect::summary::ConvergenceRow>);
    let back: Pair = read_json(&a).unwrap();
    assert_eq!(to_json_string(&back).unwrap().into_bytes(), bytes);
    let c1 = emit_report(dir.path(), "c", &back, ReportFormat::Csv).unwrap();
    let first = std::fs::read(&c1).unwrap();
    emit_report(dir.path(), "c", &back, ReportFormat::Csv).unwrap();
    assert_eq!(std::fs::read(&c1).unwrap(), first);
}

#[test]
fn cpm_field_from_reported_ate() {
    let r = CounterfactualReport::from_quantities(
        EvaluationMode::PosteriorMean,
        1000,
        500,
        0.000795,
        0.000724,
        Default::default(),
        0.0,
        0.00292,
        0.52,
    )
    .unwrap();
    assert!((r.cpm_equivalents["ate"] - 0.4134).abs() < 5e-4);
    let json = to_json_string(&r).unwrap();
    assert!(json.contains("\"ate\": 0.4134"), "{json}");
}

#[test]
fn empty_dataset_is_an_empty_result() {
    let csv = "incentivized,click,install,lang,wifi,volume,resolution,version\n";
    let err = parse_reader(csv.as_bytes(), &benchmark_model()).unwrap_err();
    assert!(matches!(err, Error::Empty(_)));
    assert!(err.to_string().contains("empty result"));
}
