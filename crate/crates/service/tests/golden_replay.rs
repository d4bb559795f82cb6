use std::path::{Path, PathBuf};

use hitl_core::sim::Zone;
use hitl_service::session::{replay, ReplayError};
use hitl_service::trace::{TraceError, TraceFile};

const DEVICES: [&str; 4] = ["direct", "switch", "voice", "semg"];

fn golden(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden").join(name)
}

fn pinned_hash(device: &str) -> String {
    let text = std::fs::read_to_string(golden("hashes.txt")).unwrap();
    text.lines()
        .find_map(|l| l.strip_prefix(device).and_then(|rest| rest.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no pinned hash for {device}"))
        .trim()
        .to_string()
}

#[test]
fn every_golden_places_all_objects() {
    for device in DEVICES {
        let file = TraceFile::load(&golden(&format!("{device}.jsonl"))).unwrap();
        assert!(file.is_script(), "{device}");
        let a = replay(&file).unwrap();
        let b = replay(&file).unwrap();
        assert_eq!(a.trials_done, 4, "{device}");
        assert_eq!(a.scene.in_zone(Zone::PlaceArea).count(), 4, "{device}");
        assert_eq!(a.faults, 0, "{device}");
        assert_eq!(a.hash, b.hash, "{device}");
        assert_eq!(a.hash, pinned_hash(device), "{device} drifted from its pinned hash");
    }
}

#[test]
fn full_trace_of_a_golden_replays_line_for_line() {
    let file = TraceFile::load(&golden("switch.jsonl")).unwrap();
    let produced = replay(&file).unwrap();
    let lines = produced.lines.unwrap();
    let full = TraceFile::parse(lines.join("\n").as_bytes()).unwrap();
    assert!(!full.is_script());
    assert_eq!(replay(&full).unwrap().hash, produced.hash);
}

#[test]
fn timestamp_regression_reports_its_line() {
    let text = std::fs::read_to_string(golden("direct.jsonl")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines.swap(3, 4);
    match TraceFile::parse(lines.join("\n").as_bytes()) {
        Err(TraceError::Regression { line: 5, .. }) => {}
        other => panic!("expected regression at line 5, got {other:?}"),
    }
}

#[test]
fn edited_full_trace_is_caught() {
    let file = TraceFile::load(&golden("direct.jsonl")).unwrap();
    let lines = replay(&file).unwrap().lines.unwrap();
    let i = lines.iter().position(|l| l.contains(r#""rec":"outcome""#)).unwrap();
    let mut edited = lines.clone();
    edited[i] = edited[i].replace(r#""success":true"#, r#""success":false"#);
    let file = TraceFile::parse(edited.join("\n").as_bytes()).unwrap();
    match replay(&file) {
        Err(ReplayError::Diverged { line }) => assert_eq!(line, i + 1),
        other => panic!("expected divergence, got {:?}", other.map(|t| t.hash)),
    }
}

#[test]
fn edited_header_is_rejected() {
    let text = std::fs::read_to_string(golden("voice.jsonl")).unwrap();
    let edited = text.replacen(r#""max_aperture":120.0"#, r#""max_aperture":60.0"#, 1);
    assert_ne!(edited, text);
    assert!(matches!(TraceFile::parse(edited.as_bytes()), Err(TraceError::Header(_))));
}
