//! The `mms-1` space file format and run reports.
//!
//! `mms-1` layout, whitespace-separated:
//!
//! ```text
//! mms-1
//! N
//! label_0 ... label_{N-1}
//! weight_0 ... weight_{N-1}
//! d(0,0) ... d(0,N-1)
//! ...
//! d(N-1,0) ... d(N-1,N-1)
//! ```
//!
//! Numbers are written with 17 significant digits, which round-trips every
//! `f64` exactly: `parse_space(emit_space(s)) == s` bit for bit.
//!
//! Reports are JSON objects with a fixed field order (`command`,
//! `parameters`, `results`, `wall_time_s`). Identical command and seed give
//! byte-identical reports regardless of worker count; `wall_time_s` is the
//! one field excluded from that guarantee. Concentration profiles can also
//! be rendered as CSV.

use serde::Serialize;
use std::io::Write;
use std::path::Path;

use crate::concentration::ConcentrationProfile;
use crate::discretize::DiscretizationResult;
use crate::space::{validate_space, MetricMeasureSpace, RawSpace};
use crate::{Error, Result};

const FORMAT_VERSION: &str = "mms-1";

/// Parse an `mms-1` document into a validated space.
pub fn parse_space(text: &str) -> Result<MetricMeasureSpace> {
    let mut lines = text.lines().enumerate();
    let mut next_content = || -> Option<(usize, &str)> {
        lines.by_ref().find(|(_, l)| !l.trim().is_empty())
    };
    let syntax = |line: usize, msg: String| Error::Syntax { line: line + 1, msg };

    let (ln, header) = next_content().ok_or_else(|| syntax(0, "empty file".into()))?;
    if header.trim() != FORMAT_VERSION {
        return Err(syntax(
            ln,
            format!("expected header `{FORMAT_VERSION}`, got `{}`", header.trim()),
        ));
    }
    let (ln, size_line) = next_content().ok_or_else(|| syntax(ln, "missing size line".into()))?;
    let n: usize = size_line
        .trim()
        .parse()
        .map_err(|_| syntax(ln, format!("invalid size `{}`", size_line.trim())))?;
    if n == 0 {
        return Err(syntax(ln, "size must be positive".into()));
    }

    let (ln, label_line) = next_content().ok_or_else(|| syntax(ln, "missing labels".into()))?;
    let labels: Vec<String> = label_line.split_whitespace().map(String::from).collect();
    if labels.len() != n {
        return Err(syntax(
            ln,
            format!("expected {n} labels, got {}", labels.len()),
        ));
    }

    let (ln, weight_line) = next_content().ok_or_else(|| syntax(ln, "missing weights".into()))?;
    let weights = parse_floats(weight_line, n, ln, "weights")?;

    let mut dist = Vec::with_capacity(n * n);
    let mut last_ln = ln;
    for row in 0..n {
        let (ln, row_line) = next_content()
            .ok_or_else(|| syntax(last_ln, format!("missing distance row {row}")))?;
        last_ln = ln;
        dist.extend(parse_floats(row_line, n, ln, "distances")?);
    }
    if let Some((ln, extra)) = next_content() {
        return Err(syntax(ln, format!("unexpected trailing content `{extra}`")));
    }

    validate_space(RawSpace {
        labels,
        dist,
        weights,
    })
}

fn parse_floats(line: &str, expected: usize, ln: usize, what: &str) -> Result<Vec<f64>> {
    let values: Vec<f64> = line
        .split_whitespace()
        .map(|tok| {
            tok.parse::<f64>().map_err(|_| Error::Syntax {
                line: ln + 1,
                msg: format!("invalid number `{tok}` in {what}"),
            })
        })
        .collect::<Result<_>>()?;
    if values.len() != expected {
        return Err(Error::Syntax {
            line: ln + 1,
            msg: format!("expected {expected} {what}, got {}", values.len()),
        });
    }
    Ok(values)
}

/// 17 significant digits: enough to reproduce any `f64` exactly.
fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Render a validated space as an `mms-1` document.
pub fn emit_space(space: &MetricMeasureSpace) -> String {
    let n = space.len();
    let mut out = String::new();
    out.push_str(FORMAT_VERSION);
    out.push('\n');
    out.push_str(&n.to_string());
    out.push('\n');
    out.push_str(&space.labels().join(" "));
    out.push('\n');
    let weights: Vec<String> = space.weights().iter().map(|&w| fmt_f64(w)).collect();
    out.push_str(&weights.join(" "));
    out.push('\n');
    for i in 0..n {
        let row: Vec<String> = (0..n).map(|j| fmt_f64(space.dist(i, j))).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Write text to `path` atomically: temp file in the same directory, then
/// rename.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let mut tmp = match dir {
        Some(dir) => tempfile::NamedTempFile::new_in(dir)?,
        None => tempfile::NamedTempFile::new_in(".")?,
    };
    tmp.write_all(text.as_bytes())?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn read_space(path: &Path) -> Result<MetricMeasureSpace> {
    parse_space(&std::fs::read_to_string(path)?)
}

/// Discretization metadata embedded in reports: everything needed to
/// reproduce the run and to budget its Monte Carlo noise.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscretizationMeta {
    pub size: usize,
    pub covering_radius: f64,
    pub mc_samples: u64,
    pub seed: u64,
    pub method: crate::discretize::CenterMethod,
    pub test_grid_size: usize,
    pub stderr_min: f64,
    pub stderr_max: f64,
    pub stderr_mean: f64,
    pub weight_min: f64,
    pub weight_max: f64,
}

impl DiscretizationMeta {
    pub fn from_result(res: &DiscretizationResult) -> DiscretizationMeta {
        let n = res.space.len() as f64;
        let weights = res.space.weights();
        DiscretizationMeta {
            size: res.space.len(),
            covering_radius: res.covering_radius,
            mc_samples: res.mc_samples,
            seed: res.seed,
            method: res.method,
            test_grid_size: res.test_grid_size,
            stderr_min: res.weight_stderr.iter().copied().fold(f64::INFINITY, f64::min),
            stderr_max: res.weight_stderr.iter().copied().fold(0.0, f64::max),
            stderr_mean: res.weight_stderr.iter().sum::<f64>() / n,
            weight_min: weights.iter().copied().fold(f64::INFINITY, f64::min),
            weight_max: weights.iter().copied().fold(0.0, f64::max),
        }
    }
}

/// One row of a `bounds` table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundsRow {
    pub r: f64,
    pub bound_thm1: f64,
    pub bound_improved: Option<f64>,
}

/// The payload of a run report.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReportPayload {
    Validate {
        size: usize,
        diameter: f64,
    },
    Diameter {
        diameter: f64,
        witness: (usize, usize),
    },
    Intermediate {
        indices: Vec<u32>,
        labels: Vec<String>,
        measure: f64,
    },
    BmCheck(crate::bm::BMCheckResult),
    BmVerify(crate::bm::BMVerifyReport),
    Profile(ConcentrationProfile),
    Bounds {
        n: f64,
        rows: Vec<BoundsRow>,
    },
    Discretization(DiscretizationMeta),
    TheoremReport {
        diameter: f64,
        diameter_witness: (usize, usize),
        diameter_admissible: bool,
        bm: crate::bm::BMVerifyReport,
        profile: ConcentrationProfile,
        bounds: Vec<BoundsRow>,
        /// `refuted` when any instance (or the diameter) contradicts
        /// ε-BM(n−1, n); `consistent` otherwise.
        verdict: String,
    },
}

/// A self-describing run record: the command, every parameter needed to
/// reproduce it, and its result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    /// Sorted-key map of reproduction-relevant parameters (seeds included,
    /// worker counts deliberately excluded).
    pub parameters: serde_json::Map<String, serde_json::Value>,
    pub results: ReportPayload,
    /// Wall time of the run; the only field allowed to differ between
    /// otherwise identical runs.
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "json" => Ok(ReportFormat::Json),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(format!("unknown format `{other}` (json|csv)")),
        }
    }
}

/// Render a report. CSV is defined only for concentration profiles and
/// bounds tables; everything else is JSON-only.
pub fn emit_report(report: &RunReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => {
            let mut text =
                serde_json::to_string_pretty(report).expect("report serialization cannot fail");
            text.push('\n');
            Ok(text)
        }
        ReportFormat::Csv => match &report.results {
            ReportPayload::Profile(profile) => Ok(profile_csv(profile)),
            ReportPayload::Bounds { rows, .. } => Ok(bounds_csv(rows)),
            _ => Err(Error::UnsupportedFormat("csv")),
        },
    }
}

/// CSV columns: `r, alpha, exactness, bound_thm1, bound_improved`.
pub fn profile_csv(profile: &ConcentrationProfile) -> String {
    let mut out = String::from("r,alpha,exactness,bound_thm1,bound_improved\n");
    for i in 0..profile.r_values.len() {
        let improved = profile.bound_improved[i]
            .map(|v| v.to_string())
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            profile.r_values[i],
            profile.alpha[i],
            profile.exactness[i].as_str(),
            profile.bound_thm1[i],
            improved,
        ));
    }
    out
}

fn bounds_csv(rows: &[BoundsRow]) -> String {
    let mut out = String::from("r,bound_thm1,bound_improved\n");
    for row in rows {
        let improved = row.bound_improved.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", row.r, row.bound_thm1, improved));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concentration::{concentration_profile, ProfileStrategy};
    use crate::space::tests::two_point;

    #[test]
    fn parse_minimal_file() {
        let text = "mms-1\n2\na b\n0.5 0.5\n0 1\n1 0\n";
        let s = parse_space(text).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.dist(0, 1), 1.0);
        assert_eq!(s.labels(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn parse_reports_missing_row() {
        let text = "mms-1\n3\na b c\n0.4 0.3 0.3\n0 1 1\n1 0 1\n";
        match parse_space(text) {
            Err(Error::Syntax { line, msg }) => {
                assert!(msg.contains("distance row"), "line {line}: {msg}");
            }
            other => panic!("expected syntax error, got {other:?}"),
        }
    }

    #[test]
    fn parse_rejects_bad_header_and_numbers() {
        assert!(matches!(
            parse_space("mms-2\n1\na\n1\n0\n"),
            Err(Error::Syntax { line: 1, .. })
        ));
        assert!(matches!(
            parse_space("mms-1\n1\na\nxyz\n0\n"),
            Err(Error::Syntax { .. })
        ));
        assert!(matches!(
            parse_space("mms-1\n1\na\n1\n0\nextra\n"),
            Err(Error::Syntax { .. })
        ));
    }

    #[test]
    fn round_trip_is_exact() {
        let s = two_point(1.0 / 3.0);
        let again = parse_space(&emit_space(&s)).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn round_trip_discretized_sphere() {
        let mut cfg = crate::discretize::DiscretizeConfig::new(2, 12, 1000, 3);
        cfg.test_grid_size = 1000;
        let res = crate::discretize::discretize_sphere(&cfg).unwrap();
        let again = parse_space(&emit_space(&res.space)).unwrap();
        assert_eq!(again, res.space);
    }

    #[test]
    fn profile_csv_shape() {
        let s = two_point(1.0);
        let p = concentration_profile(&s, &[0.25, 0.5, 0.75], 2.0, ProfileStrategy::Auto).unwrap();
        let csv = profile_csv(&p);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[0], "r,alpha,exactness,bound_thm1,bound_improved");
        for line in &lines[1..] {
            assert!(line.starts_with("0."));
            assert!(line.contains(",0.5,exact,"));
        }
        let empty = concentration_profile(&s, &[], 2.0, ProfileStrategy::Auto).unwrap();
        assert_eq!(profile_csv(&empty), "r,alpha,exactness,bound_thm1,bound_improved\n");
    }

    #[test]
    fn csv_only_for_tabular_payloads() {
        let s = two_point(1.0);
        let report = RunReport {
            command: "diameter".into(),
            parameters: serde_json::Map::new(),
            results: ReportPayload::Diameter {
                diameter: crate::geometry::diameter(&s),
                witness: (0, 1),
            },
            wall_time_s: 0.0,
        };
        assert!(matches!(
            emit_report(&report, ReportFormat::Csv),
            Err(Error::UnsupportedFormat("csv"))
        ));
        let json = emit_report(&report, ReportFormat::Json).unwrap();
        assert!(json.contains("\"command\": \"diameter\""));
    }

    #[test]
    fn atomic_write_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("space.mms");
        let s = two_point(0.7);
        write_atomic(&path, &emit_space(&s)).unwrap();
        assert_eq!(read_space(&path).unwrap(), s);
    }
}
