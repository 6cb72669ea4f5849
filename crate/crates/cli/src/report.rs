//! Report model and its CSV / JSON forms.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::spec::Resolved;
use crate::CliError;

pub const CSV_HEADER: &str = "command,n,p_or_partition,tau,scheme,dt,n_paths,seed,estimate,stderr,exact_value,lower_bound,upper_bound,flag";

/// One CSV line. Absent values are empty cells in CSV and `null` in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Row {
    pub command: String,
    pub n: usize,
    pub p_or_partition: String,
    pub tau: f64,
    pub scheme: Option<String>,
    pub dt: Option<f64>,
    pub n_paths: Option<u64>,
    pub seed: Option<u64>,
    pub estimate: Option<f64>,
    pub stderr: Option<f64>,
    pub exact_value: Option<f64>,
    pub lower_bound: Option<f64>,
    pub upper_bound: Option<f64>,
    pub flag: String,
}

impl Row {
    pub fn new(command: &str, n: usize, label: impl Into<String>, tau: f64) -> Self {
        Self {
            command: command.to_string(),
            n,
            p_or_partition: label.into(),
            tau,
            scheme: None,
            dt: None,
            n_paths: None,
            seed: None,
            estimate: None,
            stderr: None,
            exact_value: None,
            lower_bound: None,
            upper_bound: None,
            flag: String::new(),
        }
    }

    fn csv_fields(&self) -> [String; 14] {
        let num = |x: Option<f64>| x.filter(|v| v.is_finite()).map(fmt17).unwrap_or_default();
        let int = |x: Option<u64>| x.map(|v| v.to_string()).unwrap_or_default();
        [
            self.command.clone(),
            self.n.to_string(),
            self.p_or_partition.clone(),
            fmt17(self.tau),
            self.scheme.clone().unwrap_or_default(),
            num(self.dt),
            int(self.n_paths),
            int(self.seed),
            num(self.estimate),
            num(self.stderr),
            num(self.exact_value),
            num(self.lower_bound),
            num(self.upper_bound),
            self.flag.clone(),
        ]
    }
}

/// 17 significant digits, which round-trips every `f64`.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Data behind one chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Series {
    /// `ln E (tr G)^p` against `tau` with the two growth bounds.
    Moments {
        n: usize,
        p: u32,
        tau: Vec<f64>,
        exact: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// Truncated mean against `tau_star`.
    Nontight {
        n: usize,
        tau_star: Vec<f64>,
        mean: Vec<f64>,
        stderr: Vec<f64>,
    },
    /// Histogram of `ln |F|^2` with the Gaussian reference.
    Histogram {
        n: usize,
        tau: f64,
        edges: Vec<f64>,
        density: Vec<f64>,
        reference_mean: f64,
        reference_var: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub dt: f64,
    pub n_paths: u64,
    pub workers: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Report {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub spec: Resolved,
    pub summary: Vec<String>,
    pub rows: Vec<Row>,
    pub checks: Vec<Check>,
    pub series: Vec<Series>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Labels containing commas or quotes are quoted.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::with_capacity(128 * (self.rows.len() + 1)));
        w.write_record(CSV_HEADER.split(','))
            .expect("in-memory write");
        for r in &self.rows {
            w.write_record(r.csv_fields()).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("fields are UTF-8")
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Parses a JSON report; errors name the failing record.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| {
            let record = locate_record(text, e.line());
            CliError::Report(format!("{e}{record}"))
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))?;
        Self::from_json(&text)
    }
}

/// Points the error at a `rows`, `checks` or `series` entry when the line
/// falls inside one.
fn locate_record(text: &str, line: usize) -> String {
    let mut section: Option<&str> = None;
    let mut index: i64 = -1;
    for (k, l) in text.lines().enumerate() {
        if k + 1 > line {
            break;
        }
        let t = l.trim_start();
        let indent = l.len() - t.len();
        if indent == 2 {
            section = ["rows", "checks", "series"]
                .into_iter()
                .find(|s| t.starts_with(&format!("\"{s}\"")));
            index = -1;
        } else if indent == 4 && t.starts_with('{') && section.is_some() {
            index += 1;
        }
    }
    match section {
        Some(s) if index >= 0 => format!(" (in {s}[{index}])"),
        _ => String::new(),
    }
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Io(dir.clone(), e))?;
    let mut tmp =
        tempfile::NamedTempFile::new_in(&dir).map_err(|e| CliError::Io(dir.clone(), e))?;
    tmp.write_all(contents.as_bytes())
        .map_err(|e| CliError::Io(path.to_path_buf(), e))?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(path.to_path_buf(), e.error))?;
    Ok(())
}


#[cfg(test)]
mod csv_tests {
    use super::*;

    #[test]
    fn labels_with_commas_are_quoted() {
        let spec = crate::spec::ExperimentSpec::new(crate::spec::Command::Qvcheck)
            .resolve()
            .unwrap();
        let mut row = Row::new("qvcheck", 3, "mean dB[0,1]", 0.001);
        row.flag = "pass".into();
        let report = Report {
            schema_version: 1,
            provenance: Provenance {
                command: "qvcheck".into(),
                version: "0".into(),
                seed: 1,
                dt: 0.001,
                n_paths: 10,
                workers: 1,
                wall_time_s: 0.0,
            },
            spec,
            summary: vec![],
            rows: vec![row],
            checks: vec![],
            series: vec![],
        };
        let csv = report.to_csv();
        assert!(csv.contains("\"mean dB[0,1]\""), "{csv}");
        let mut rd = csv::Reader::from_reader(csv.as_bytes());
        let rec = rd.records().next().unwrap().unwrap();
        assert_eq!(&rec[2], "mean dB[0,1]");
        assert_eq!(rec.len(), 14);
    }
}
