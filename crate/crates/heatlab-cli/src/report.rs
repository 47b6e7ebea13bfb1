//! Result bundles and their byte-stable emission.
//!
//! Floats are printed with 17 significant digits, rows keep construction
//! order, and line endings are fixed, so identical (config, seed) pairs
//! produce identical bytes.

use serde::Serialize;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

pub const SCHEMA: &str = "heatlab-bundle-v1";

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_float(x: f64) -> String {
    if x.is_nan() {
        "nan".to_string()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Flag(bool),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_float(*x),
            Cell::Int(k) => k.to_string(),
            Cell::Flag(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Table {
        Table {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(
            row.len(),
            self.header.len(),
            "table {} row width",
            self.name
        );
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{}", self.header.join(","));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }
}

/// One checked statement: what was measured, the tolerance it was held to,
/// and whether it passed.
#[derive(Debug, Clone, Serialize)]
pub struct Assertion {
    pub name: String,
    pub tolerance: f64,
    pub measured: f64,
    pub pass: bool,
}

impl Assertion {
    /// |measured| <= tolerance
    pub fn abs_within(name: &str, measured: f64, tolerance: f64) -> Assertion {
        Assertion {
            name: name.to_string(),
            tolerance,
            measured,
            pass: measured.abs() <= tolerance,
        }
    }

    /// measured <= bound (reported as measured - bound vs 0)
    pub fn at_most(name: &str, measured: f64, bound: f64) -> Assertion {
        Assertion {
            name: name.to_string(),
            tolerance: bound,
            measured,
            pass: measured <= bound,
        }
    }

    pub fn flag(name: &str, pass: bool) -> Assertion {
        Assertion {
            name: name.to_string(),
            tolerance: 0.0,
            measured: if pass { 1.0 } else { 0.0 },
            pass,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ResultBundle {
    pub schema: String,
    pub experiment: String,
    pub seed: u64,
    pub config_echo: String,
    pub tables: Vec<Table>,
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ResultBundle {
    pub fn new(experiment: &str, seed: u64, config_echo: String) -> ResultBundle {
        ResultBundle {
            schema: SCHEMA.to_string(),
            experiment: experiment.to_string(),
            seed,
            config_echo,
            tables: Vec::new(),
            assertions: Vec::new(),
        }
    }

    pub fn pass(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    /// One line per assertion plus a verdict, for terminal output.
    pub fn render_summary_lines(&self) -> String {
        let mut out = String::new();
        for a in &self.assertions {
            let _ = writeln!(
                out,
                "[{}] {}: measured {} vs tolerance {}",
                if a.pass { "pass" } else { "FAIL" },
                a.name,
                fmt_float(a.measured),
                fmt_float(a.tolerance),
            );
        }
        let _ = writeln!(
            out,
            "{}: {}",
            self.experiment,
            if self.pass() { "PASS" } else { "FAIL" }
        );
        out
    }

    /// The summary in the machine-readable format: JSON through serde (field
    /// order is the struct order, stable) or a flat CSV.
    pub fn summary_text(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => {
                let mut s =
                    serde_json::to_string_pretty(&SummaryView::from(self)).expect("serializable");
                s.push('\n');
                s
            }
            ReportFormat::Csv => {
                let mut out = String::from("name,tolerance,measured,pass\n");
                for a in &self.assertions {
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        a.name,
                        fmt_float(a.tolerance),
                        fmt_float(a.measured),
                        a.pass
                    );
                }
                out
            }
        }
    }

    /// Writes `<experiment>__<table>.csv` per table plus
    /// `summary.{json|csv}` and `config_echo.txt` into `dir`.
    pub fn emit(&self, dir: &Path, format: ReportFormat) -> io::Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        for table in &self.tables {
            let path = dir.join(format!("{}__{}.csv", self.experiment, table.name));
            std::fs::write(&path, table.to_csv())?;
            written.push(path);
        }
        let summary = dir.join(match format {
            ReportFormat::Json => "summary.json",
            ReportFormat::Csv => "summary.csv",
        });
        std::fs::write(&summary, self.summary_text(format))?;
        written.push(summary);
        let echo = dir.join("config_echo.txt");
        std::fs::write(&echo, &self.config_echo)?;
        written.push(echo);
        Ok(written)
    }
}

/// Serialization view with floats rendered at fixed precision so the JSON
/// bytes are reproducible.
#[derive(Serialize)]
struct SummaryView {
    schema: String,
    experiment: String,
    seed: u64,
    pass: bool,
    assertions: Vec<AssertionView>,
    config_echo: String,
}

#[derive(Serialize)]
struct AssertionView {
    name: String,
    tolerance: String,
    measured: String,
    pass: bool,
}

impl From<&ResultBundle> for SummaryView {
    fn from(b: &ResultBundle) -> SummaryView {
        SummaryView {
            schema: b.schema.clone(),
            experiment: b.experiment.clone(),
            seed: b.seed,
            pass: b.pass(),
            assertions: b
                .assertions
                .iter()
                .map(|a| AssertionView {
                    name: a.name.clone(),
                    tolerance: fmt_float(a.tolerance),
                    measured: fmt_float(a.measured),
                    pass: a.pass,
                })
                .collect(),
            config_echo: b.config_echo.clone(),
        }
    }
}
