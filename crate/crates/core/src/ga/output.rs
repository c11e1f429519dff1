use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::reserve::{CutoffSet, ParcelSet, Reserve, UnitId};

use super::{Destination, EvolveResult, FitnessMode, PeriodSummary, Schedule, ScheduledParcel, TraceRow};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRecord {
    pub unit: UnitId,
    pub parcel: usize,
    pub period: usize,
    pub destination: Destination,
    pub mass_t: f64,
    pub fraction: f64,
}

/// A best schedule as written to disk, with the genome needed to rebuild
/// its parcels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDocument {
    pub fitness_mode: FitnessMode,
    pub fitness: f64,
    pub coefficient: f64,
    pub cutoffs: CutoffSet,
    pub sequence: Vec<UnitId>,
    pub schedule: Vec<EntryRecord>,
    pub periods: Vec<PeriodSummary>,
}

impl ScheduleDocument {
    pub fn from_result(result: &EvolveResult, mode: FitnessMode) -> Self {
        let s = &result.evaluation.schedule;
        Self {
            fitness_mode: mode,
            fitness: result.evaluation.fitness,
            coefficient: result.coefficient,
            cutoffs: result.best.cutoffs.clone(),
            sequence: result.best.sequence.clone(),
            schedule: s
                .entries
                .iter()
                .map(|e| EntryRecord {
                    unit: e.unit,
                    parcel: e.parcel,
                    period: e.period,
                    destination: e.destination,
                    mass_t: e.mass,
                    fraction: e.fraction,
                })
                .collect(),
            periods: s.periods.clone(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut out, self).map_err(|e| Error::json(path, e))?;
        writeln!(out).and_then(|_| out.flush()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::json(path, e))
    }

    /// Rebuilds the parcels from the stored cutoffs and checks that the
    /// entries reference them consistently.
    pub fn resolve(&self, reserve: &Reserve) -> Result<(Schedule, ParcelSet)> {
        let bad = |m: String| Error::IncompatibleSchedule(m);
        self.cutoffs.validate()?;
        reserve.precedence().check_permutation(&self.sequence)?;
        let parcels = reserve.parcels(&self.cutoffs);
        let mut share = vec![0.0; parcels.len()];
        let mut entries = Vec::with_capacity(self.schedule.len());
        for (i, r) in self.schedule.iter().enumerate() {
            let p = parcels
                .parcels
                .get(r.parcel)
                .ok_or_else(|| bad(format!("entry {i} names parcel {} of {}", r.parcel, parcels.len())))?;
            if p.unit != r.unit {
                return Err(bad(format!("entry {i}: parcel {} belongs to unit {}, not {}", r.parcel, p.unit, r.unit)));
            }
            if r.period == 0 || r.period > self.periods.len() {
                return Err(bad(format!("entry {i}: period {} outside 1..={}", r.period, self.periods.len())));
            }
            if ((r.fraction * p.mass - r.mass_t) / p.mass).abs() > 1e-9 {
                return Err(bad(format!("entry {i}: {} t is not {} of the parcel's {} t", r.mass_t, r.fraction, p.mass)));
            }
            share[r.parcel] += r.fraction;
            entries.push(ScheduledParcel {
                parcel: r.parcel,
                unit: r.unit,
                period: r.period,
                destination: r.destination,
                fraction: r.fraction,
                mass: r.mass_t,
            });
        }
        if let Some(k) = share.iter().position(|s| (s - 1.0).abs() > 1e-9) {
            return Err(bad(format!("parcel {k} is scheduled {} times over", share[k])));
        }
        Ok((
            Schedule {
                entries,
                periods: self.periods.clone(),
            },
            parcels,
        ))
    }
}

/// Writes `generation,best,mean` rows.
pub fn write_trace_csv(trace: &[TraceRow], path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    writeln!(out, "generation,best,mean").map_err(io)?;
    for r in trace {
        writeln!(out, "{},{},{}", r.generation, r.best, r.mean).map_err(io)?;
    }
    out.flush().map_err(io)
}
