//! Report documents: aligned text tables, long-format CSV and JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{Cell, DeviceColumn, MetricsError, MetricsReport, ObjectClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    AlignedTable,
    Csv,
    Structured,
}

impl Format {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "aligned-table" | "table" | "txt" => Some(Format::AlignedTable),
            "comma-separated" | "csv" => Some(Format::Csv),
            "structured" | "json" => Some(Format::Structured),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            Format::AlignedTable => "txt",
            Format::Csv => "csv",
            Format::Structured => "json",
        }
    }
}

pub fn export(report: &MetricsReport, format: Format) -> String {
    match format {
        Format::AlignedTable => {
            let mut out = timing_table(report);
            out.push('\n');
            out.push_str(&success_table(report));
            out
        }
        Format::Csv => to_csv(report),
        Format::Structured => to_structured(report),
    }
}

fn row_label(o: ObjectClass) -> &'static str {
    match o {
        ObjectClass::Block1 => "Block 1",
        ObjectClass::Block2 => "Block 2",
        ObjectClass::Block3 => "Block 3",
        ObjectClass::Ycb => "YCB Object",
    }
}

fn timing_label(o: ObjectClass) -> &'static str {
    match o {
        ObjectClass::Block1 => "block 1",
        ObjectClass::Block2 => "block 2",
        ObjectClass::Block3 => "block 3",
        ObjectClass::Ycb => "YCB object",
    }
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.2}%"))
}

fn secs(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

/// Pads cells into columns joined by ` | `; the first column is
/// left-aligned, the rest right-aligned.
pub fn align(rows: &[Vec<String>]) -> String {
    let cols = rows.iter().map(Vec::len).max().unwrap_or(0);
    let widths: Vec<usize> = (0..cols)
        .map(|c| rows.iter().filter_map(|r| r.get(c)).map(|s| s.chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        out.push_str(cells.join(" | ").trim_end());
        out.push('\n');
    }
    out
}

fn omitted_note(out: &mut String, names: &[&str]) {
    for name in names {
        let _ = writeln!(out, "* {name}: column omitted, no trials recorded");
    }
}

/// Success percentages, devices across and objects down.
pub fn success_table(report: &MetricsReport) -> String {
    let devices = report.devices();
    let mut rows = Vec::new();
    let mut head = vec!["Activity".to_string()];
    head.extend(devices.iter().map(|d| d.heading().to_string()));
    head.push("Average".into());
    rows.push(head);
    for o in ObjectClass::ALL {
        let mut row = vec![row_label(o).to_string()];
        row.extend(devices.iter().map(|d| pct(report.success_pct(*d, o))));
        row.push(pct(report.object_average(o)));
        rows.push(row);
    }
    let mut avg = vec!["Average".to_string()];
    avg.extend(devices.iter().map(|d| pct(report.device_average(*d))));
    avg.push(pct(report.overall()));
    rows.push(avg);

    let mut trials = vec!["Trials".to_string()];
    trials.extend(devices.iter().map(|d| {
        let n: u32 = ObjectClass::ALL.iter().filter_map(|o| report.cell(*d, *o)).map(|c| c.trials).sum();
        n.to_string()
    }));
    trials.push(report.total_trials().to_string());
    rows.push(trials);

    let mut out = align(&rows);
    let missing: Vec<&str> =
        DeviceColumn::ALL.iter().filter(|d| !devices.contains(d)).map(|d| d.heading()).collect();
    omitted_note(&mut out, &missing);
    out
}

/// Columns of the timing table: both sEMG sites pool into one.
const TIMING_COLUMNS: [(&str, &[DeviceColumn]); 4] = [
    ("Mouse (s)", &[DeviceColumn::Mouse]),
    ("Alexa (s)", &[DeviceColumn::Alexa]),
    ("Switch (s)", &[DeviceColumn::Switch]),
    ("sEMG (s)", &[DeviceColumn::SemgForearm, DeviceColumn::SemgEar]),
];

fn pooled(report: &MetricsReport, devices: &[DeviceColumn], o: ObjectClass) -> Cell {
    let mut c = Cell::default();
    for d in devices {
        if let Some(x) = report.cell(*d, o) {
            c.merge(x);
        }
    }
    c
}

/// Mean user and robot seconds per device and object.
pub fn timing_table(report: &MetricsReport) -> String {
    let present: Vec<_> = TIMING_COLUMNS
        .iter()
        .filter(|(_, ds)| ds.iter().any(|d| report.has_device(*d)))
        .collect();
    let mut rows = Vec::new();
    let mut head = vec!["Activity".to_string()];
    head.extend(present.iter().map(|(h, _)| h.to_string()));
    rows.push(head);
    for o in ObjectClass::ALL {
        let cells: Vec<Cell> = present.iter().map(|(_, ds)| pooled(report, ds, o)).collect();
        let mut user = vec![format!("user {}", timing_label(o))];
        user.extend(cells.iter().map(|c| secs(c.mean_user_time())));
        let mut robot = vec![format!("robot {}", timing_label(o))];
        robot.extend(cells.iter().map(|c| secs(c.mean_robot_time())));
        rows.push(user);
        rows.push(robot);
    }
    let mut out = align(&rows);
    let missing: Vec<&str> = TIMING_COLUMNS
        .iter()
        .filter(|(_, ds)| !ds.iter().any(|d| report.has_device(*d)))
        .map(|(h, _)| *h)
        .collect();
    omitted_note(&mut out, &missing);
    out
}

pub const CSV_HEADER: &str = "device,object,trials,successes,user_time_us,robot_time_us";

pub fn to_csv(report: &MetricsReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for ((d, o), c) in &report.cells {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            d.key(),
            o.label(),
            c.trials,
            c.successes,
            c.user_time_us,
            c.robot_time_us
        );
    }
    out
}

pub fn from_csv(text: &str) -> Result<MetricsReport, MetricsError> {
    let bad = |line: usize, what: &str| MetricsError::Parse(format!("line {line}: {what}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => return Err(bad(1, "missing header")),
    }
    let mut report = MetricsReport::default();
    for (i, line) in lines {
        let n = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 6 {
            return Err(bad(n, "expected 6 fields"));
        }
        let d = DeviceColumn::parse(f[0]).ok_or_else(|| bad(n, "unknown device"))?;
        let o = ObjectClass::parse(f[1]).ok_or_else(|| bad(n, "unknown object"))?;
        let num = |s: &str| s.parse::<u64>().map_err(|_| bad(n, "bad number"));
        let cell = Cell {
            trials: u32::try_from(num(f[2])?).map_err(|_| bad(n, "trials overflow"))?,
            successes: u32::try_from(num(f[3])?).map_err(|_| bad(n, "successes overflow"))?,
            user_time_us: num(f[4])?,
            robot_time_us: num(f[5])?,
        };
        if cell.successes > cell.trials {
            return Err(bad(n, "more successes than trials"));
        }
        if report.cells.insert((d, o), cell).is_some() {
            return Err(bad(n, "duplicate cell"));
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CellDoc {
    device: DeviceColumn,
    object: ObjectClass,
    #[serde(flatten)]
    cell: Cell,
    success_pct: Option<f64>,
    mean_user_time: Option<f64>,
    mean_robot_time: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ReportDoc {
    cells: Vec<CellDoc>,
    device_average: BTreeMap<DeviceColumn, f64>,
    object_average: BTreeMap<ObjectClass, f64>,
    object_weighted: BTreeMap<ObjectClass, f64>,
    overall: Option<f64>,
}

pub fn to_structured(report: &MetricsReport) -> String {
    let doc = ReportDoc {
        cells: report
            .cells
            .iter()
            .map(|((d, o), c)| CellDoc {
                device: *d,
                object: *o,
                cell: *c,
                success_pct: c.success_pct(),
                mean_user_time: c.mean_user_time(),
                mean_robot_time: c.mean_robot_time(),
            })
            .collect(),
        device_average: DeviceColumn::ALL
            .iter()
            .filter_map(|d| report.device_average(*d).map(|v| (*d, v)))
            .collect(),
        object_average: ObjectClass::ALL
            .iter()
            .filter_map(|o| report.object_average(*o).map(|v| (*o, v)))
            .collect(),
        object_weighted: ObjectClass::ALL
            .iter()
            .filter_map(|o| report.object_weighted(*o).map(|v| (*o, v)))
            .collect(),
        overall: report.overall(),
    };
    let mut s = serde_json::to_string_pretty(&doc).expect("report serializes");
    s.push('\n');
    s
}

/// Reads the integer cells back; derived figures are recomputed.
pub fn from_structured(text: &str) -> Result<MetricsReport, MetricsError> {
    let doc: ReportDoc = serde_json::from_str(text).map_err(|e| MetricsError::Parse(e.to_string()))?;
    let mut report = MetricsReport::default();
    for c in doc.cells {
        report.cells.insert((c.device, c.object), c.cell);
    }
    Ok(report)
}
