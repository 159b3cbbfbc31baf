use breakscope_core::report::{
    assemble_report, hurst_section, mi_section, HurstOptions, MiOptions, OutputFormat, Report,
    ReportError, ReportInputs, SectionOutcome,
};
use breakscope_core::series::{apply_transform, Transform};
use breakscope_core::synth::fixture_panel;

fn inputs() -> ReportInputs {
    let panel = fixture_panel(400, 11).unwrap();
    let logs = panel
        .map_series(|s| apply_transform(s, Transform::Log))
        .unwrap();
    let rets = panel
        .map_series(|s| apply_transform(s, Transform::LogReturn))
        .unwrap();
    ReportInputs {
        seed: 11,
        hurst: SectionOutcome::from_result(hurst_section(&logs, &HurstOptions::default())),
        mi: SectionOutcome::from_result(mi_section(&rets, &MiOptions::default())),
        ..ReportInputs::default()
    }
}

#[test]
fn json_is_stable_under_a_round_trip() {
    let report = assemble_report(inputs()).unwrap();
    assert_eq!(report.sections.present(), vec!["hurst", "mi"]);
    let text = report.to_json_string().unwrap();
    let back = Report::from_json_str(&text).unwrap();
    assert_eq!(back.to_json_string().unwrap(), text);
}

#[test]
fn failed_section_keeps_the_rest() {
    let mut inp = inputs();
    inp.events = SectionOutcome::Failed("no catalog".into());
    match assemble_report(inp) {
        Err(ReportError::PartialFailure { missing, partial }) => {
            assert_eq!(missing.len(), 1);
            assert_eq!(missing[0].section, "events");
            let partial = partial.expect("partial report");
            assert_eq!(partial.sections.present(), vec!["hurst", "mi"]);
            assert_eq!(partial.missing, missing);
        }
        other => panic!("expected partial failure, got {other:?}"),
    }
}

#[test]
fn empty_run_is_a_partial_failure() {
    assert!(matches!(
        assemble_report(ReportInputs::default()),
        Err(ReportError::PartialFailure { .. })
    ));
}

#[test]
fn bundle_files_match_the_manifest() {
    let report = assemble_report(inputs()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let written = report
        .write_bundle(dir.path(), &[OutputFormat::Json, OutputFormat::Csv])
        .unwrap();
    for entry in &report.manifest {
        let path = dir.path().join(&entry.file);
        assert!(written.contains(&path), "{}", entry.file);
        let text = std::fs::read_to_string(&path).unwrap();
        let header = text.lines().next().unwrap();
        assert_eq!(header, entry.columns.join(","));
    }
    assert!(dir.path().join("report.json").exists());
    assert!(dir.path().join("manifest.csv").exists());
}
