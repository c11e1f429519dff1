use crate::econ::{EconomicConfig, MiningMode};
use crate::error::{Error, Result};
use crate::reserve::ParcelSet;

use super::{Destination, Genome, PeriodSummary, Schedule, ScheduledParcel};

/// Capacity left below this share of the mill capacity counts as full.
const FULL_TOLERANCE: f64 = 1e-9;

struct Cursor {
    period: usize,
    milled: f64,
    mined: f64,
    /// Ore-first mining stops for the period once the mill is full.
    stopped: bool,
    periods: Vec<PeriodSummary>,
}

impl Cursor {
    fn advance(&mut self) {
        self.period += 1;
        self.milled = 0.0;
        self.mined = 0.0;
        self.stopped = false;
        self.periods.push(PeriodSummary {
            period: self.period,
            ..Default::default()
        });
    }
}

/// Walks the unit sequence and fills periods.
///
/// Parcels in a bin at or above the domain's mill cutoff go to the mill,
/// which takes up to `mill_capacity` tonnes per period; a parcel that does
/// not fit is split across the period boundary. Waste rides along in the
/// current period, bounded only by `mining_capacity` when one is set.
pub fn decode(genome: &Genome, parcels: &ParcelSet, econ: &EconomicConfig) -> Result<Schedule> {
    let mill_cap = econ.mill_capacity;
    let mine_cap = econ.mining_capacity.unwrap_or(f64::INFINITY);
    let eps = FULL_TOLERANCE * mill_cap.min(mine_cap);
    let ore_first = econ.mining_mode == MiningMode::OreFirst;

    let mut cur = Cursor {
        period: 1,
        milled: 0.0,
        mined: 0.0,
        stopped: false,
        periods: vec![PeriodSummary {
            period: 1,
            ..Default::default()
        }],
    };
    let mut entries = Vec::new();
    let mut order = Vec::new();

    for &unit in &genome.sequence {
        let range = parcels.by_unit[unit].clone();
        order.clear();
        order.extend(range.map(|i| {
            let p = &parcels.parcels[i];
            let dest = if genome.cutoffs.is_milled(p.domain, p.bin) {
                Destination::Mill
            } else {
                Destination::Waste
            };
            (i, dest)
        }));
        // ore-first mines a unit's ore before its waste; otherwise waste leads
        order.sort_by_key(|(i, d)| ((*d == Destination::Mill) != ore_first, *i));

        for &(index, dest) in &order {
            let total = parcels.parcels[index].mass;
            let mut left = total;
            while left > 0.0 {
                if cur.stopped {
                    cur.advance();
                }
                let mine_room = mine_cap - cur.mined;
                let room = match dest {
                    Destination::Mill => mine_room.min(mill_cap - cur.milled),
                    Destination::Waste => mine_room,
                };
                if room <= eps {
                    cur.advance();
                    continue;
                }
                // absorb slivers so a parcel never leaves a near-zero remainder
                let take = if left - room <= eps { left } else { room };
                entries.push(ScheduledParcel {
                    parcel: index,
                    unit,
                    period: cur.period,
                    destination: dest,
                    fraction: take / total,
                    mass: take,
                });
                let summary = &mut cur.periods[cur.period - 1];
                summary.mined_t += take;
                cur.mined += take;
                if dest == Destination::Mill {
                    summary.milled_t += take;
                    cur.milled += take;
                    if ore_first && mill_cap - cur.milled <= eps {
                        cur.stopped = true;
                    }
                }
                left -= take;
            }
        }
    }

    let schedule = Schedule {
        entries,
        periods: cur.periods,
    };
    if schedule.horizon() > econ.max_periods {
        return Err(Error::HorizonExceeded {
            required: schedule.horizon(),
            horizon: econ.max_periods,
        });
    }
    Ok(schedule)
}
