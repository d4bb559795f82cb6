use hitl_core::metrics::export::{export, Format};
use hitl_core::metrics::{DeviceColumn, ObjectClass};
use hitl_core::par::Execution;
use hitl_core::sim::SimConfig;
use hitl_service::bench::{run, write_reports, BenchConfig, BenchDevice, FailureOverride};

fn devices(list: &str) -> Vec<BenchDevice> {
    BenchDevice::parse_list(list).unwrap()
}

#[test]
fn no_failures_means_every_cell_is_full() {
    let mut cfg = BenchConfig::new(devices("mouse,voice,switch,semg"), 4, 11);
    cfg.sim = SimConfig::ideal();
    let out = run(&cfg).unwrap();
    for column in [DeviceColumn::Mouse, DeviceColumn::Alexa, DeviceColumn::Switch, DeviceColumn::SemgForearm] {
        for object in ObjectClass::ALL {
            assert_eq!(out.report.success_pct(column, object), Some(100.0), "{column:?} {object:?}");
        }
    }
    assert_eq!(out.report.total_trials(), 64);
    assert!(out.sessions.iter().all(|s| s.incomplete == 0 && s.faults == 0));
}

#[test]
fn ycb_failure_of_one_third_over_fifteen_sessions() {
    let mut cfg = BenchConfig::new(devices("mouse"), 15, 2);
    cfg.failures.push(FailureOverride::parse("mouse:ycb:0.3333333333").unwrap());
    let out = run(&cfg).unwrap();
    let cell = out.report.cell(DeviceColumn::Mouse, ObjectClass::Ycb).unwrap();
    assert_eq!((cell.successes, cell.trials), (10, 15));
    assert_eq!(out.report.success_pct(DeviceColumn::Mouse, ObjectClass::Block1), Some(100.0));
}

#[test]
fn ycb_failure_rate_converges() {
    let mut cfg = BenchConfig::new(devices("mouse"), 300, 5);
    cfg.failures.push(FailureOverride::parse("mouse:ycb:0.3333333333").unwrap());
    let out = run(&cfg).unwrap();
    let cell = out.report.cell(DeviceColumn::Mouse, ObjectClass::Ycb).unwrap();
    let rate = cell.successes as f64 / cell.trials as f64;
    // Three standard deviations of a binomial proportion at n = 300.
    assert!((rate - 2.0 / 3.0).abs() < 0.082, "{rate}");
}

#[test]
fn same_seed_gives_identical_report_files() {
    let mut cfg = BenchConfig::new(devices("mouse,alexa,switch,semg,semg-ear"), 3, 42);
    cfg.failures.push(FailureOverride::parse("switch:ycb:0.2").unwrap());
    let dirs: Vec<_> = (0..2).map(|i| std::env::temp_dir().join(format!("hitl-bench-det-{}-{i}", std::process::id()))).collect();
    for dir in &dirs {
        write_reports(&run(&cfg).unwrap(), dir).unwrap();
    }
    for name in ["report.txt", "report.csv", "report.json", "sessions.csv"] {
        let a = std::fs::read(dirs[0].join(name)).unwrap();
        let b = std::fs::read(dirs[1].join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    for dir in dirs {
        let _ = std::fs::remove_dir_all(dir);
    }
}

#[test]
fn sequential_and_parallel_agree() {
    let mut cfg = BenchConfig::new(devices("mouse,switch,semg"), 3, 8);
    cfg.mode = Execution::Sequential;
    let seq = run(&cfg).unwrap();
    cfg.mode = Execution::Parallel;
    let par = run(&cfg).unwrap();
    assert_eq!(seq.sessions, par.sessions);
    assert_eq!(export(&seq.report, Format::Structured), export(&par.report, Format::Structured));
}

#[test]
fn retry_reruns_cut_off_sessions() {
    let mut cfg = BenchConfig::new(devices("mouse"), 2, 3);
    // Every recognition misses everything, so no session can finish cleanly.
    cfg.sim.recognition_failure = 1.0;
    cfg.retry_on_failure = true;
    let out = run(&cfg).unwrap();
    assert!(out.sessions.iter().all(|s| s.attempts == 1), "abandoned objects are failures, not faults");
    assert_eq!(out.report.success_pct(DeviceColumn::Mouse, ObjectClass::Block2), Some(0.0));
}

#[test]
fn unknown_device_is_a_usage_error() {
    assert!(BenchDevice::parse_list("mouse,trackball").is_err());
}
