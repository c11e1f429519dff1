//! Replaying a fixed schedule against every ensemble member.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::econ::{discount, EconomicConfig};
use crate::error::{Error, Result};
use crate::ga::Schedule;
use crate::reserve::{ensemble_mean, Parcel};
use crate::risk::schedule_sv;

/// Discounted profit per member (rows) and period (columns) with routing
/// fixed by the schedule.
pub fn evaluate_schedule(
    schedule: &Schedule,
    parcels: &[Parcel],
    econ: &EconomicConfig,
    n_members: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut matrix = vec![vec![0.0; schedule.horizon()]; n_members];
    for entry in &schedule.entries {
        econ.check_period(entry.period)?;
        let parcel = parcels
            .get(entry.parcel)
            .ok_or_else(|| Error::IncompatibleSchedule(format!("no parcel {}", entry.parcel)))?;
        if parcel.grades.len() != n_members {
            return Err(Error::MemberMismatch {
                expected: n_members,
                found: parcel.grades.len(),
            });
        }
        let t = entry.period;
        for (row, g) in matrix.iter_mut().zip(&parcel.grades) {
            let profit = entry.fraction * econ.parcel_profit(parcel, entry.destination, *g, t);
            row[t - 1] += profit;
        }
    }
    for row in &mut matrix {
        for (i, v) in row.iter_mut().enumerate() {
            *v = discount(*v, i + 1, econ.discount_rate);
        }
    }
    Ok(matrix)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColumnStats {
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl ColumnStats {
    pub fn of(values: &[f64]) -> Self {
        let mean = ensemble_mean(values);
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
        Self {
            max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: values.iter().copied().fold(f64::INFINITY, f64::min),
            mean,
            std: var.sqrt(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodRow {
    pub period: usize,
    pub stats: ColumnStats,
    /// Running sum of the mean column.
    pub cum_mean_npv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub periods: Vec<PeriodRow>,
    pub per_member_npv: Vec<f64>,
    /// Statistics of the member NPVs.
    pub totals: ColumnStats,
    pub mean_npv: f64,
    pub total_sv: f64,
}

impl EnsembleReport {
    pub fn horizon(&self) -> usize {
        self.periods.len()
    }
}

/// Per-period max, min, mean and population std across members.
pub fn period_stats(matrix: &[Vec<f64>]) -> Result<Vec<PeriodRow>> {
    let horizon = matrix.first().map(Vec::len).unwrap_or(0);
    if matrix.is_empty() || matrix.iter().any(|r| r.len() != horizon) {
        return Err(Error::DimensionMismatch("profit matrix must be non-empty and rectangular".into()));
    }
    let mut cum = 0.0;
    let mut column = Vec::with_capacity(matrix.len());
    Ok((0..horizon)
        .map(|t| {
            column.clear();
            column.extend(matrix.iter().map(|r| r[t]));
            let stats = ColumnStats::of(&column);
            cum += stats.mean;
            PeriodRow {
                period: t + 1,
                stats,
                cum_mean_npv: cum,
            }
        })
        .collect())
}

/// Member replay, period statistics and total Standard Variance of a schedule.
pub fn build_report(
    schedule: &Schedule,
    parcels: &[Parcel],
    econ: &EconomicConfig,
    n_members: usize,
) -> Result<EnsembleReport> {
    let matrix = evaluate_schedule(schedule, parcels, econ, n_members)?;
    let periods = period_stats(&matrix)?;
    let per_member_npv: Vec<f64> = matrix.iter().map(|r| r.iter().sum()).collect();
    let totals = ColumnStats::of(&per_member_npv);
    Ok(EnsembleReport {
        periods,
        mean_npv: totals.mean,
        totals,
        per_member_npv,
        total_sv: schedule_sv(schedule, parcels, econ)?,
    })
}

#[derive(Serialize, Deserialize)]
struct Summary {
    mean_npv: f64,
    total_sv: f64,
    periods: usize,
    per_member_npv: Vec<f64>,
}

pub const REPORT_HEADER: &str = "period,max,min,mean,std,cum_mean_npv";

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    for line in lines {
        writeln!(out, "{line}").map_err(io)?;
    }
    out.flush().map_err(io)
}

/// Writes the period table to `csv_path` and the summary next to it as JSON;
/// returns the summary path.
pub fn emit_report(report: &EnsembleReport, csv_path: &Path) -> Result<PathBuf> {
    let row = |label: String, s: &ColumnStats, cum: f64| format!("{label},{},{},{},{},{cum}", s.max, s.min, s.mean, s.std);
    let lines = std::iter::once(REPORT_HEADER.to_string())
        .chain(report.periods.iter().map(|p| row(p.period.to_string(), &p.stats, p.cum_mean_npv)))
        .chain(std::iter::once(row("total".into(), &report.totals, report.mean_npv)));
    write_lines(csv_path, lines)?;

    let json_path = csv_path.with_extension("json");
    let summary = Summary {
        mean_npv: report.mean_npv,
        total_sv: report.total_sv,
        periods: report.horizon(),
        per_member_npv: report.per_member_npv.clone(),
    };
    let file = File::create(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, &summary).map_err(|e| Error::json(&json_path, e))?;
    writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::io(&json_path, e))?;
    Ok(json_path)
}

/// Period rows and the totals row of an emitted report CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportTable {
    pub periods: Vec<PeriodRow>,
    pub totals: ColumnStats,
    pub mean_npv: f64,
}

pub fn read_report_csv(path: &Path) -> Result<ReportTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines.next().transpose().map_err(|e| Error::io(path, e))?;
    if header.as_deref() != Some(REPORT_HEADER) {
        return Err(Error::Format {
            path: path.into(),
            message: format!("expected header `{REPORT_HEADER}`"),
        });
    }
    let mut periods = Vec::new();
    let mut totals = None;
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let row = i + 2;
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Format {
                path: path.into(),
                message: format!("row {row}: expected 6 fields, found {}", fields.len()),
            });
        }
        let num = |k: usize| {
            fields[k].parse::<f64>().map_err(|e| Error::Parse {
                path: path.into(),
                row,
                column: REPORT_HEADER.split(',').nth(k).unwrap_or("").into(),
                message: format!("`{}`: {e}", fields[k]),
            })
        };
        let stats = ColumnStats {
            max: num(1)?,
            min: num(2)?,
            mean: num(3)?,
            std: num(4)?,
        };
        if fields[0] == "total" {
            totals = Some((stats, num(5)?));
        } else {
            let period = fields[0].parse().map_err(|e| Error::Parse {
                path: path.into(),
                row,
                column: "period".into(),
                message: format!("`{}`: {e}", fields[0]),
            })?;
            periods.push(PeriodRow {
                period,
                stats,
                cum_mean_npv: num(5)?,
            });
        }
    }
    let (totals, mean_npv) = totals.ok_or_else(|| Error::Format {
        path: path.into(),
        message: "missing totals row".into(),
    })?;
    Ok(ReportTable {
        periods,
        totals,
        mean_npv,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaRow {
    pub period: usize,
    pub mean_a: f64,
    pub mean_b: f64,
    pub std_a: f64,
    pub std_b: f64,
}

impl DeltaRow {
    pub fn std_delta(&self) -> f64 {
        self.std_b - self.std_a
    }

    pub fn mean_delta(&self) -> f64 {
        self.mean_b - self.mean_a
    }
}

/// Period-by-period comparison; a period missing from one side counts as 0.
pub fn compare_reports(a: &EnsembleReport, b: &EnsembleReport) -> Vec<DeltaRow> {
    let get = |r: &EnsembleReport, t: usize| r.periods.get(t).map(|p| p.stats).unwrap_or(ColumnStats {
        max: 0.0,
        min: 0.0,
        mean: 0.0,
        std: 0.0,
    });
    (0..a.horizon().max(b.horizon()))
        .map(|t| {
            let (sa, sb) = (get(a, t), get(b, t));
            DeltaRow {
                period: t + 1,
                mean_a: sa.mean,
                mean_b: sb.mean,
                std_a: sa.std,
                std_b: sb.std,
            }
        })
        .collect()
}

/// Writes the comparison with a totals row carrying NPV and SV(B).
pub fn emit_comparison(a: &EnsembleReport, b: &EnsembleReport, path: &Path) -> Result<()> {
    let header = "period,mean_a,mean_b,mean_delta,std_a,std_b,std_delta".to_string();
    let rows = compare_reports(a, b).into_iter().map(|d| {
        format!(
            "{},{},{},{},{},{},{}",
            d.period,
            d.mean_a,
            d.mean_b,
            d.mean_delta(),
            d.std_a,
            d.std_b,
            d.std_delta()
        )
    });
    let totals = [
        format!(
            "npv,{},{},{},,,",
            a.mean_npv,
            b.mean_npv,
            b.mean_npv - a.mean_npv
        ),
        format!("total_sv,{},{},{},,,", a.total_sv, b.total_sv, b.total_sv - a.total_sv),
    ];
    write_lines(path, std::iter::once(header).chain(rows).chain(totals))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::econ::{EconomicConfig, Recovery};
    use crate::ga::{Destination, PeriodSummary, ScheduledParcel};
    use proptest::prelude::*;

    fn parcel(grades: Vec<f64>, domain: i32) -> Parcel {
        Parcel {
            unit: 0,
            domain,
            bin: usize::from(domain != 0),
            mass: 100.0,
            grades,
            blocks: vec![],
        }
    }

    fn econ() -> EconomicConfig {
        EconomicConfig {
            price: 5000.0.into(),
            selling_cost: 0.0,
            processing_cost: 10.0.into(),
            mining_cost: 2.0.into(),
            rehab_cost: 1.0,
            recovery: Recovery::Uniform(1.0),
            discount_rate: 0.1,
            ..Default::default()
        }
    }

    fn entry(parcel: usize, period: usize, destination: Destination) -> ScheduledParcel {
        ScheduledParcel {
            parcel,
            unit: 0,
            period,
            destination,
            fraction: 1.0,
            mass: 100.0,
        }
    }

    /// Period 1 waste only, period 2 one milled parcel.
    fn fixture(grades: Vec<f64>) -> (Schedule, Vec<Parcel>) {
        let n = grades.len();
        let parcels = vec![parcel(vec![0.0; n], 0), parcel(grades, 1)];
        let schedule = Schedule {
            entries: vec![entry(0, 1, Destination::Waste), entry(1, 2, Destination::Mill)],
            periods: vec![PeriodSummary::default(); 2],
        };
        (schedule, parcels)
    }

    #[test]
    fn replay_matches_hand_values() {
        let (s, p) = fixture(vec![0.01, 0.02]);
        let m = evaluate_schedule(&s, &p, &econ(), 2).unwrap();
        // waste: -100 × 3 / 1.1
        for row in &m {
            assert!((row[0] + 300.0 / 1.1).abs() < 1e-9);
        }
        // member 0: 100 × 0.01 × 5000 − 1200 = 3800; member 1: 8800
        assert!((m[0][1] - 3800.0 / 1.21).abs() < 1e-9);
        assert!((m[1][1] - 8800.0 / 1.21).abs() < 1e-9);
        assert!(matches!(evaluate_schedule(&s, &p, &econ(), 3), Err(Error::MemberMismatch { .. })));
    }

    #[test]
    fn zero_variance_rows_identical() {
        let (s, p) = fixture(vec![0.013; 10]);
        let m = evaluate_schedule(&s, &p, &econ(), 10).unwrap();
        assert_eq!(m.len(), 10);
        assert!(m.iter().all(|r| r == &m[0]));
        let report = build_report(&s, &p, &econ(), 10).unwrap();
        assert!(report.periods.iter().all(|r| r.stats.std == 0.0));
        assert_eq!(report.totals.std, 0.0);
        assert_eq!(report.total_sv, 0.0);
    }

    #[test]
    fn column_stat_examples() {
        let s = ColumnStats::of(&[1.0, 2.0, 3.0]);
        assert_eq!((s.max, s.min, s.mean), (3.0, 1.0, 2.0));
        assert!((s.std - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(ColumnStats::of(&[4.2]).std, 0.0);
        let c = ColumnStats::of(&[0.7; 5]);
        assert_eq!((c.max, c.min, c.mean, c.std), (0.7, 0.7, 0.7, 0.0));
        assert!(period_stats(&[]).is_err());
        assert!(period_stats(&[vec![1.0], vec![]]).is_err());
    }

    fn report_with_periods(n: usize) -> EnsembleReport {
        let matrix: Vec<Vec<f64>> = (0..4)
            .map(|e| (0..n).map(|t| (e * 7 + t * 3) as f64 / 3.0 - 2.5).collect())
            .collect();
        let periods = period_stats(&matrix).unwrap();
        let npv: Vec<f64> = matrix.iter().map(|r| r.iter().sum()).collect();
        let totals = ColumnStats::of(&npv);
        EnsembleReport {
            periods,
            mean_npv: totals.mean,
            totals,
            per_member_npv: npv,
            total_sv: 12.5,
        }
    }

    #[test]
    fn emitted_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let report = report_with_periods(9);
        let path = dir.path().join("r.csv");
        let json = emit_report(&report, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 11);
        assert_eq!(text.lines().next().unwrap(), REPORT_HEADER);
        let back = read_report_csv(&path).unwrap();
        assert_eq!(back.periods, report.periods);
        assert_eq!(back.totals, report.totals);
        let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(json).unwrap()).unwrap();
        assert_eq!(summary["periods"], 9);
        assert_eq!(summary["total_sv"], 12.5);
        assert_eq!(summary["per_member_npv"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn unwritable_path_is_an_error() {
        let report = report_with_periods(2);
        let err = emit_report(&report, Path::new("/nonexistent-dir/r.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn comparison_subtracts_std() {
        let a = report_with_periods(3);
        let mut b = report_with_periods(4);
        b.periods[0].stats.std += 1.5;
        let d = compare_reports(&a, &b);
        assert_eq!(d.len(), 4);
        assert!((d[0].std_delta() - 1.5).abs() < 1e-12);
        assert_eq!(d[3].std_a, 0.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cmp.csv");
        emit_comparison(&a, &b, &path).unwrap();
        let text = std::fs::read_to_string(path).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 + 2);
    }

    proptest! {
        #[test]
        fn stats_match_brute_force(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 5), 1..12)) {
            let periods = period_stats(&rows).unwrap();
            let n = rows.len() as f64;
            let mut cum = 0.0;
            for (t, p) in periods.iter().enumerate() {
                let col: Vec<f64> = rows.iter().map(|r| r[t]).collect();
                let mut max = col[0];
                let mut min = col[0];
                for &v in &col {
                    if v > max { max = v; }
                    if v < min { min = v; }
                }
                let mean = ensemble_mean(&col);
                let std = (col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
                cum += mean;
                prop_assert_eq!(p.stats.max, max);
                prop_assert_eq!(p.stats.min, min);
                prop_assert_eq!(p.stats.mean, mean);
                prop_assert_eq!(p.stats.std, std);
                prop_assert_eq!(p.cum_mean_npv, cum);
                prop_assert!(p.stats.min <= p.stats.mean + 1e-9 * p.stats.mean.abs().max(1.0));
                prop_assert!(p.stats.mean <= p.stats.max + 1e-9 * p.stats.max.abs().max(1.0));
            }
        }

        #[test]
        fn period_means_sum_to_mean_npv(rows in prop::collection::vec(prop::collection::vec(-1e6f64..1e6, 6), 2..10)) {
            let periods = period_stats(&rows).unwrap();
            let npv: Vec<f64> = rows.iter().map(|r| r.iter().sum()).collect();
            let mean_npv = ColumnStats::of(&npv).mean;
            let sum: f64 = periods.iter().map(|p| p.stats.mean).sum();
            prop_assert!((sum - mean_npv).abs() <= 1e-9 * npv.iter().map(|v| v.abs()).sum::<f64>().max(1.0));
        }
    }
}
