//! Verification report assembly and serialization.
//!
//! JSON is the canonical machine format; CSV flattens the witness map into
//! one column; the text format prints failing rows first so a broken run
//! explains itself at the top of the page.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Status {
    /// The check ran and the claim held exactly.
    Pass,
    /// The check ran and the claim failed; the witness reproduces it.
    Fail,
    /// The check did not apply here (invalid prime, empty slice); harmless.
    SkippedBenign,
    /// The check was requested but exceeded a cap; the run cannot vouch for
    /// it, and the exit code says so.
    SkippedFatal,
    /// The check ran on a scenario marked report-only and the outcome is
    /// recorded without being asserted.
    Observed,
}

impl Status {
    pub fn label(self) -> &'static str {
        match self {
            Status::Pass => "pass",
            Status::Fail => "FAIL",
            Status::SkippedBenign => "skipped",
            Status::SkippedFatal => "SKIPPED-FATAL",
            Status::Observed => "observed",
        }
    }
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// One verified claim instance. `check` names the concrete instance,
/// `anchor` is the stable identifier of the claim family, and `witness`
/// carries every integer needed to redo the computation by hand.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub suite: String,
    pub check: String,
    pub anchor: String,
    pub status: Status,
    pub witness: BTreeMap<String, String>,
}

impl ReportRow {
    pub fn new(
        scenario: &str,
        suite: &str,
        check: impl Into<String>,
        anchor: &str,
        status: Status,
    ) -> ReportRow {
        ReportRow {
            scenario: scenario.to_string(),
            suite: suite.to_string(),
            check: check.into(),
            anchor: anchor.to_string(),
            status,
            witness: BTreeMap::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> ReportRow {
        self.witness.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub toolkit_version: String,
    /// Seeds of any randomized structural checks, keyed by check name, so
    /// reports are reproducible bit for bit.
    pub seeds: BTreeMap<String, u64>,
    pub rows: Vec<ReportRow>,
    pub summary: BTreeMap<String, usize>,
    /// Wall-clock duration of the run. Excluded from canonical comparisons:
    /// two runs of the same toolkit on the same config must agree on
    /// everything else.
    pub wall_ms: u128,
}

impl VerificationReport {
    pub fn new(rows: Vec<ReportRow>, seeds: BTreeMap<String, u64>, wall_ms: u128) -> Self {
        let mut summary = BTreeMap::new();
        for row in &rows {
            *summary.entry(row.status.label().to_string()).or_insert(0) += 1;
        }
        VerificationReport {
            toolkit_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds,
            rows,
            summary,
            wall_ms,
        }
    }

    pub fn merge(reports: Vec<VerificationReport>) -> VerificationReport {
        let mut rows = Vec::new();
        let mut seeds = BTreeMap::new();
        let mut wall = 0;
        for r in reports {
            rows.extend(r.rows);
            seeds.extend(r.seeds);
            wall += r.wall_ms;
        }
        VerificationReport::new(rows, seeds, wall)
    }

    /// Exit code contract: 0 iff every non-skipped check passed and nothing
    /// fatal was skipped.
    pub fn exit_code(&self) -> i32 {
        let bad = self
            .rows
            .iter()
            .any(|r| matches!(r.status, Status::Fail | Status::SkippedFatal));
        i32::from(bad)
    }

    /// The report with wall time normalized away, for comparisons.
    pub fn canonical(&self) -> VerificationReport {
        let mut c = self.clone();
        c.wall_ms = 0;
        c
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<VerificationReport, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        wtr.write_record(["scenario", "suite", "check", "anchor", "status", "witness"])
            .expect("csv header");
        for row in self.ordered_rows() {
            let witness = row
                .witness
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join("; ");
            wtr.write_record([
                row.scenario.as_str(),
                row.suite.as_str(),
                row.check.as_str(),
                row.anchor.as_str(),
                row.status.label(),
                witness.as_str(),
            ])
            .expect("csv row");
        }
        String::from_utf8(wtr.into_inner().expect("csv flush")).expect("csv utf8")
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for row in self.ordered_rows() {
            let witness = row
                .witness
                .iter()
                .map(|(k, v)| format!("{k}={v}"))
                .collect::<Vec<_>>()
                .join(" ");
            out.push_str(&format!(
                "[{}] {} / {} / {} ({}) {}\n",
                row.status, row.scenario, row.suite, row.check, row.anchor, witness
            ));
        }
        out.push_str(&format!(
            "\n{} rows: {}; wall {} ms, toolkit {}\n",
            self.rows.len(),
            self.summary
                .iter()
                .map(|(k, v)| format!("{v} {k}"))
                .collect::<Vec<_>>()
                .join(", "),
            self.wall_ms,
            self.toolkit_version,
        ));
        out
    }

    pub fn emit(&self, format: OutputFormat) -> String {
        match format {
            OutputFormat::Json => self.to_json(),
            OutputFormat::Csv => self.to_csv(),
            OutputFormat::Text => self.to_text(),
        }
    }

    /// Rows with failures and fatal skips first, otherwise in run order.
    fn ordered_rows(&self) -> Vec<&ReportRow> {
        let mut rows: Vec<&ReportRow> = self.rows.iter().collect();
        rows.sort_by_key(|r| match r.status {
            Status::Fail => 0,
            Status::SkippedFatal => 1,
            _ => 2,
        });
        rows
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Json,
    Csv,
    Text,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<OutputFormat, String> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "text" => Ok(OutputFormat::Text),
            other => Err(format!("unknown format '{other}'")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_report() -> VerificationReport {
        let rows = vec![
            ReportRow::new(
                "demo",
                "lemma41",
                "identity p=3 w=1",
                "orbit-count-identity",
                Status::Pass,
            )
            .with("prime", 3)
            .with("orbit", 12),
            ReportRow::new(
                "demo",
                "dims21",
                "degree w=1,2",
                "slice-dimension",
                Status::Fail,
            )
            .with("expected_degree", 2)
            .with("fit", "t + 1"),
            ReportRow::new(
                "demo",
                "dims21",
                "degree w=1 p=2",
                "slice-dimension",
                Status::SkippedBenign,
            ),
        ];
        VerificationReport::new(
            rows,
            BTreeMap::from([("hecke-associativity".into(), 7u64)]),
            42,
        )
    }

    #[test]
    fn json_round_trip_is_identical() {
        let r = demo_report();
        let back = VerificationReport::from_json(&r.to_json()).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn summary_counts_by_status() {
        let r = demo_report();
        assert_eq!(r.summary.get("pass"), Some(&1));
        assert_eq!(r.summary.get("FAIL"), Some(&1));
        assert_eq!(r.summary.get("skipped"), Some(&1));
        assert_eq!(r.exit_code(), 1);
    }

    #[test]
    fn text_format_puts_failures_first() {
        let text = demo_report().to_text();
        let first = text.lines().next().unwrap();
        assert!(first.starts_with("[FAIL]"), "{first}");
    }

    #[test]
    fn csv_has_one_line_per_row_plus_header() {
        let csv = demo_report().to_csv();
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.lines().next().unwrap().starts_with("scenario,"));
    }

    #[test]
    fn exit_code_is_zero_for_benign_outcomes() {
        let rows = vec![
            ReportRow::new("demo", "s", "a", "x", Status::Pass),
            ReportRow::new("demo", "s", "b", "x", Status::SkippedBenign),
            ReportRow::new("demo", "s", "c", "x", Status::Observed),
        ];
        let r = VerificationReport::new(rows, BTreeMap::new(), 1);
        assert_eq!(r.exit_code(), 0);
        let rows = vec![ReportRow::new("demo", "s", "d", "x", Status::SkippedFatal)];
        let r = VerificationReport::new(rows, BTreeMap::new(), 1);
        assert_eq!(r.exit_code(), 1);
    }
}
