//! Report envelope, provenance and the JSON/TSV writers.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::UNIX_EPOCH;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use secondchange::montecarlo::StudyResult;
use secondchange::{RelevantTestReport, TestReport};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Where a report came from. Everything here is a pure function of the
/// inputs, so rerunning a command reproduces the output byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub input_path: Option<String>,
    pub input_sha256: Option<String>,
    /// Modification time of the input file (seconds since the epoch).
    pub input_modified_unix: Option<u64>,
    pub column: Option<String>,
    pub n: Option<usize>,
    pub threads: Option<usize>,
}

impl Provenance {
    pub fn new(command: &str) -> Self {
        Provenance {
            tool: "secondchange".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            input_path: None,
            input_sha256: None,
            input_modified_unix: None,
            column: None,
            n: None,
            threads: None,
        }
    }

    pub fn threads(mut self, threads: Option<usize>) -> Self {
        self.threads = threads;
        self
    }

    pub fn with_input(mut self, path: &Path, column: &str, n: usize) -> Result<Self, CliError> {
        let bytes = std::fs::read(path)
            .map_err(|e| CliError::data(format!("cannot hash {}: {e}", path.display())))?;
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        self.input_sha256 = Some(format!("{:x}", hasher.finalize()));
        self.input_path = Some(path.display().to_string());
        self.input_modified_unix = std::fs::metadata(path)
            .ok()
            .and_then(|m| m.modified().ok())
            .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
            .map(|d| d.as_secs());
        self.column = Some(column.to_string());
        self.n = Some(n);
        Ok(self)
    }
}

/// One point of a relevance-margin sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaCurvePoint {
    pub delta: f64,
    pub p_value: f64,
    pub reject: Vec<bool>,
}

/// Top-level JSON document for the four test subcommands.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportEnvelope {
    pub schema_version: u32,
    pub provenance: Provenance,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub classical: Option<TestReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub relevant: Option<RelevantTestReport>,
    /// p-values over a grid of relevance margins (relevant tests invoked
    /// with several --delta values).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_curve: Option<Vec<DeltaCurvePoint>>,
}

impl ReportEnvelope {
    pub fn classical(provenance: Provenance, report: TestReport) -> Self {
        ReportEnvelope {
            schema_version: SCHEMA_VERSION,
            provenance,
            classical: Some(report),
            relevant: None,
            delta_curve: None,
        }
    }

    pub fn relevant(
        provenance: Provenance,
        report: RelevantTestReport,
        curve: Option<Vec<DeltaCurvePoint>>,
    ) -> Self {
        ReportEnvelope {
            schema_version: SCHEMA_VERSION,
            provenance,
            classical: None,
            relevant: Some(report),
            delta_curve: curve,
        }
    }
}

/// Simulation-study document.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyEnvelope {
    pub schema_version: u32,
    pub provenance: Provenance,
    pub study: StudyResult,
}

pub fn write_output(out: Option<&PathBuf>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => std::fs::write(path, content)
            .map_err(|e| CliError::data(format!("cannot write {}: {e}", path.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| CliError::data(format!("cannot write stdout: {e}")))
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

/// TSV rendering of a test report: one key/value pair per line, full double
/// precision. A delta sweep renders as a two-column table instead.
pub fn envelope_to_tsv(env: &ReportEnvelope) -> String {
    if let Some(curve) = &env.delta_curve {
        let mut s = String::from("delta\tp_value\n");
        for point in curve {
            s.push_str(&format!("{}\t{}\n", point.delta, point.p_value));
        }
        return s;
    }
    let mut s = String::new();
    if let Some(rep) = &env.classical {
        s.push_str(&format!("test\t{}\n", rep.test));
        s.push_str(&format!("n\t{}\n", rep.n));
        s.push_str(&format!("statistic\t{}\n", rep.statistic));
        for d in &rep.decisions {
            s.push_str(&format!(
                "critical_value_{}\t{}\n",
                d.alpha, d.critical_value
            ));
            s.push_str(&format!("reject_{}\t{}\n", d.alpha, d.reject));
        }
        s.push_str(&format!("p_value\t{}\n", rep.p_value));
    }
    if let Some(rep) = &env.relevant {
        s.push_str(&format!("test\t{}\n", rep.test));
        s.push_str(&format!("n\t{}\n", rep.n));
        s.push_str(&format!("statistic\t{}\n", rep.statistic));
        s.push_str(&format!("delta\t{}\n", rep.delta_threshold));
        s.push_str(&format!("delta_estimate\t{}\n", rep.delta_estimate.delta));
        s.push_str(&format!("change_point\t{}\n", rep.change_point.fraction));
        for d in &rep.decisions {
            s.push_str(&format!("threshold_{}\t{}\n", d.alpha, d.threshold));
            s.push_str(&format!("reject_{}\t{}\n", d.alpha, d.reject));
        }
        s.push_str(&format!("p_value\t{}\n", rep.p_value));
    }
    s
}

pub fn study_to_tsv(env: &StudyEnvelope) -> String {
    let mut s = String::from(
        "model\ttest\tn\truns\treplicates\tbandwidth\talpha\trejection_rate\tstandard_error\n",
    );
    for row in &env.study.rows {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            env.study.model,
            env.study.test,
            env.study.n,
            env.study.runs,
            env.study.replicates,
            env.study.mean_bandwidth_rule,
            row.alpha,
            row.rejection_rate,
            row.standard_error
        ));
    }
    s
}
