//! Evaluation report files and run comparison tables.
//!
//! A report is tab-delimited text: a magic line, metadata, one `episode` row
//! per evaluated episode, a `summary` block with median/SD/quartiles per
//! metric, and the success rate. Absent values (execution time of failed
//! episodes, the spectral band of sub-second episodes) are written as `-`.
//! Numbers use the shortest representation that round-trips, so parsing a
//! written report recovers it exactly.

use std::path::Path;

use crate::eval::EvalEpisode;
use crate::metrics::{summarize, MetricSummary};
use crate::{Error, Result};

const MAGIC_LINE: &str = "# canalrl-eval v1";

/// One evaluated episode as stored in a report file.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeRow {
    pub episode_id: u64,
    pub success: bool,
    pub f_max: f64,
    pub f_integral: f64,
    pub f_fft: Option<f64>,
    pub execution_time: Option<f64>,
}

impl From<&EvalEpisode> for EpisodeRow {
    fn from(e: &EvalEpisode) -> Self {
        Self {
            episode_id: e.episode_id,
            success: e.success,
            f_max: e.f_max,
            f_integral: e.f_integral,
            f_fft: e.f_fft,
            execution_time: e.execution_time,
        }
    }
}

/// Per-metric summaries over the rows of one report.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSummary {
    pub f_max: MetricSummary,
    pub f_integral: MetricSummary,
    /// Absent when no episode was long enough for the band metric.
    pub f_fft: Option<MetricSummary>,
    /// Absent when no episode succeeded.
    pub execution_time: Option<MetricSummary>,
    pub success_rate: f64,
    pub episodes: usize,
}

/// Summarize episode rows (medians, population SD, quartiles, success rate).
pub fn summarize_rows(rows: &[EpisodeRow]) -> Result<RowSummary> {
    if rows.is_empty() {
        return Err(Error::InvalidInput("report needs at least one episode".into()));
    }
    let f_max: Vec<f64> = rows.iter().map(|r| r.f_max).collect();
    let f_integral: Vec<f64> = rows.iter().map(|r| r.f_integral).collect();
    let f_fft: Vec<f64> = rows.iter().filter_map(|r| r.f_fft).collect();
    let t_e: Vec<f64> = rows.iter().filter_map(|r| r.execution_time).collect();
    let successes = rows.iter().filter(|r| r.success).count();
    Ok(RowSummary {
        f_max: summarize(&f_max)?,
        f_integral: summarize(&f_integral)?,
        f_fft: if f_fft.is_empty() {
            None
        } else {
            Some(summarize(&f_fft)?)
        },
        execution_time: if t_e.is_empty() {
            None
        } else {
            Some(summarize(&t_e)?)
        },
        success_rate: successes as f64 / rows.len() as f64,
        episodes: rows.len(),
    })
}

/// A full evaluation report: provenance, per-episode rows, and summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub label: String,
    pub seed: u64,
    pub mode: String,
    pub rows: Vec<EpisodeRow>,
    pub summary: RowSummary,
}

impl EvalReport {
    pub fn new(label: &str, seed: u64, mode: &str, rows: Vec<EpisodeRow>) -> Result<Self> {
        let summary = summarize_rows(&rows)?;
        Ok(Self {
            label: label.to_string(),
            seed,
            mode: mode.to_string(),
            rows,
            summary,
        })
    }
}

fn opt(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => "-".to_string(),
    }
}

fn summary_line(name: &str, s: &MetricSummary) -> String {
    format!(
        "summary\t{name}\t{}\t{}\t{}\t{}\t{}",
        s.median, s.std_dev, s.q1, s.q3, s.count
    )
}

impl EvalReport {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(MAGIC_LINE);
        out.push('\n');
        out.push_str(&format!("label\t{}\n", self.label));
        out.push_str(&format!("seed\t{}\n", self.seed));
        out.push_str(&format!("mode\t{}\n", self.mode));
        out.push_str("columns\tepisode_id\tsuccess\tF_max\tF_i\tF_FFT\tt_e\n");
        for r in &self.rows {
            out.push_str(&format!(
                "episode\t{}\t{}\t{}\t{}\t{}\t{}\n",
                r.episode_id,
                u8::from(r.success),
                r.f_max,
                r.f_integral,
                opt(r.f_fft),
                opt(r.execution_time),
            ));
        }
        out.push_str(&summary_line("F_max", &self.summary.f_max));
        out.push('\n');
        out.push_str(&summary_line("F_i", &self.summary.f_integral));
        out.push('\n');
        if let Some(s) = &self.summary.f_fft {
            out.push_str(&summary_line("F_FFT", s));
            out.push('\n');
        }
        if let Some(s) = &self.summary.execution_time {
            out.push_str(&summary_line("t_e", s));
            out.push('\n');
        }
        out.push_str(&format!("success_rate\t{}\n", self.summary.success_rate));
        out.push_str(&format!("episodes\t{}\n", self.summary.episodes));
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, first) = lines.next().ok_or_else(|| Error::Parse {
            line: 1,
            msg: "empty report file".into(),
        })?;
        if first.trim() != MAGIC_LINE {
            return Err(Error::Parse {
                line: 1,
                msg: format!("expected `{MAGIC_LINE}`, got `{first}`"),
            });
        }
        let mut label = None;
        let mut seed = None;
        let mut mode = None;
        let mut rows = Vec::new();
        for (idx, raw) in lines {
            let line_no = idx + 1;
            let line = raw.trim_end();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            let err = |msg: String| Error::Parse { line: line_no, msg };
            match fields[0] {
                "label" => label = Some(field(&fields, 1, line_no)?.to_string()),
                "seed" => {
                    seed = Some(parse_field::<u64>(&fields, 1, line_no)?);
                }
                "mode" => mode = Some(field(&fields, 1, line_no)?.to_string()),
                "columns" => {}
                "episode" => {
                    if fields.len() != 7 {
                        return Err(err(format!(
                            "episode row needs 7 fields, got {}",
                            fields.len()
                        )));
                    }
                    rows.push(EpisodeRow {
                        episode_id: parse_field(&fields, 1, line_no)?,
                        success: match fields[2] {
                            "0" => false,
                            "1" => true,
                            other => {
                                return Err(err(format!("success flag must be 0 or 1, got {other}")))
                            }
                        },
                        f_max: parse_field(&fields, 3, line_no)?,
                        f_integral: parse_field(&fields, 4, line_no)?,
                        f_fft: parse_opt_field(&fields, 5, line_no)?,
                        execution_time: parse_opt_field(&fields, 6, line_no)?,
                    });
                }
                // Summaries and rates are recomputed from the rows below.
                "summary" | "success_rate" | "episodes" => {}
                other => return Err(err(format!("unknown report row tag `{other}`"))),
            }
        }
        let rows_nonempty = !rows.is_empty();
        let report = EvalReport::new(
            &label.ok_or_else(|| Error::Parse {
                line: 1,
                msg: "report missing label".into(),
            })?,
            seed.ok_or_else(|| Error::Parse {
                line: 1,
                msg: "report missing seed".into(),
            })?,
            &mode.ok_or_else(|| Error::Parse {
                line: 1,
                msg: "report missing mode".into(),
            })?,
            rows,
        );
        if !rows_nonempty {
            return Err(Error::Parse {
                line: 1,
                msg: "report contains no episode rows".into(),
            });
        }
        report
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }
}

fn field<'a>(fields: &[&'a str], idx: usize, line: usize) -> Result<&'a str> {
    fields.get(idx).copied().ok_or_else(|| Error::Parse {
        line,
        msg: format!("missing field {idx}"),
    })
}

fn parse_field<T: std::str::FromStr>(fields: &[&str], idx: usize, line: usize) -> Result<T> {
    let raw = field(fields, idx, line)?;
    raw.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse `{raw}`"),
    })
}

fn parse_opt_field(fields: &[&str], idx: usize, line: usize) -> Result<Option<f64>> {
    let raw = field(fields, idx, line)?;
    if raw == "-" {
        return Ok(None);
    }
    raw.parse().map(Some).map_err(|_| Error::Parse {
        line,
        msg: format!("cannot parse `{raw}`"),
    })
}

/// Side-by-side comparison of several runs: one row per metric and statistic,
/// one column per run. This is the plot-ready data behind box plots.
pub fn comparison_table(reports: &[EvalReport]) -> Result<String> {
    if reports.is_empty() {
        return Err(Error::InvalidInput("comparison needs >= 1 report".into()));
    }
    let mut out = String::new();
    out.push_str("metric\tstat");
    for r in reports {
        out.push('\t');
        out.push_str(&r.label);
    }
    out.push('\n');

    let stats: [(&str, fn(&MetricSummary) -> f64); 4] = [
        ("median", |s| s.median),
        ("sd", |s| s.std_dev),
        ("q1", |s| s.q1),
        ("q3", |s| s.q3),
    ];
    let metrics: [(&str, fn(&RowSummary) -> Option<MetricSummary>); 4] = [
        ("F_max", |s| Some(s.f_max)),
        ("F_i", |s| Some(s.f_integral)),
        ("F_FFT", |s| s.f_fft),
        ("t_e", |s| s.execution_time),
    ];
    for (metric, get) in metrics {
        for (stat, pick) in stats {
            out.push_str(metric);
            out.push('\t');
            out.push_str(stat);
            for r in reports {
                out.push('\t');
                match get(&r.summary) {
                    Some(s) => out.push_str(&format!("{}", pick(&s))),
                    None => out.push('-'),
                }
            }
            out.push('\n');
        }
    }
    out.push_str("success_rate\t-");
    for r in reports {
        out.push_str(&format!("\t{}", r.summary.success_rate));
    }
    out.push('\n');
    Ok(out)
}

/// Per-step force traces for plotting force profiles, one row per sample.
pub fn traces_text(label: &str, episodes: &[EvalEpisode]) -> String {
    let mut out = String::new();
    out.push_str("# canalrl-traces v1\n");
    out.push_str(&format!("# label {label}\n"));
    out.push_str("# columns: episode_id\tt_seconds\tforce_newtons\n");
    for e in episodes {
        for &(t, f) in e.forces.samples() {
            out.push_str(&format!("{}\t{t}\t{f}\n", e.episode_id));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows() -> Vec<EpisodeRow> {
        vec![
            EpisodeRow {
                episode_id: 0,
                success: true,
                f_max: 1.5,
                f_integral: 3.0,
                f_fft: Some(0.7),
                execution_time: Some(8.0),
            },
            EpisodeRow {
                episode_id: 1,
                success: true,
                f_max: 2.5,
                f_integral: 4.0,
                f_fft: None,
                execution_time: Some(12.0),
            },
            EpisodeRow {
                episode_id: 2,
                success: false,
                f_max: 0.5,
                f_integral: 9.0,
                f_fft: Some(1.1),
                execution_time: None,
            },
        ]
    }

    #[test]
    fn report_round_trips_through_text() {
        let report = EvalReport::new("agent", 42, "deterministic", rows()).unwrap();
        let text = report.to_text();
        let parsed = EvalReport::parse(&text).unwrap();
        assert_eq!(parsed, report);
    }

    #[test]
    fn even_count_execution_median_averages_middle_pair() {
        let report = EvalReport::new("x", 0, "oracle", rows()).unwrap();
        let t_e = report.summary.execution_time.unwrap();
        assert_eq!(t_e.median, 10.0);
        assert_eq!(t_e.count, 2);
        assert!((report.summary.success_rate - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = EvalReport::parse("bogus\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 1, .. }));

        let report = EvalReport::new("agent", 1, "oracle", rows()).unwrap();
        let mut text = report.to_text();
        text.push_str("episode\tnot_a_number\t1\t1\t1\t-\t-\n");
        let line_count = text.lines().count();
        match EvalReport::parse(&text).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, line_count),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn single_report_table_reproduces_summary() {
        let report = EvalReport::new("agent", 1, "deterministic", rows()).unwrap();
        let table = comparison_table(std::slice::from_ref(&report)).unwrap();
        let median_line = table
            .lines()
            .find(|l| l.starts_with("F_max\tmedian"))
            .unwrap();
        assert!(median_line.ends_with(&format!("{}", report.summary.f_max.median)));
    }

    #[test]
    fn two_report_table_has_monotone_quartiles() {
        let a = EvalReport::new("agent", 1, "deterministic", rows()).unwrap();
        let mut shifted = rows();
        for r in &mut shifted {
            r.f_max *= 2.0;
        }
        let b = EvalReport::new("oracle", 2, "oracle", shifted).unwrap();
        let table = comparison_table(&[a.clone(), b.clone()]).unwrap();
        // 4 metrics x 4 stats + header + success_rate.
        assert_eq!(table.lines().count(), 18);
        for report in [&a, &b] {
            for s in [&report.summary.f_max, &report.summary.f_integral] {
                assert!(s.q1 <= s.median && s.median <= s.q3);
            }
        }
        // Each data line has one column per report.
        for line in table.lines().skip(1) {
            assert_eq!(line.split('\t').count(), 4, "line `{line}`");
        }
    }
}
