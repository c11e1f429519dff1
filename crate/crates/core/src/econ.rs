//! Per-parcel economics and net present value.
//!
//! Periods are numbered from 1 and period `t` is discounted by `(1 + D)^t`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ga::{Destination, Schedule};
use crate::reserve::Parcel;

/// A per-period series, or one value for every period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PerPeriod {
    Constant(f64),
    Series(Vec<f64>),
}

impl PerPeriod {
    /// Value in period `t` (1-based). Series shorter than the horizon are
    /// rejected by [`EconomicConfig::validate`].
    pub fn at(&self, t: usize) -> f64 {
        match self {
            PerPeriod::Constant(v) => *v,
            PerPeriod::Series(v) => v[t - 1],
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            PerPeriod::Constant(v) => std::slice::from_ref(v),
            PerPeriod::Series(v) => v,
        }
    }

    fn scaled(&self, k: f64) -> Self {
        match self {
            PerPeriod::Constant(v) => PerPeriod::Constant(v * k),
            PerPeriod::Series(v) => PerPeriod::Series(v.iter().map(|x| x * k).collect()),
        }
    }
}

impl From<f64> for PerPeriod {
    fn from(v: f64) -> Self {
        PerPeriod::Constant(v)
    }
}

/// Mill recovery, either uniform or keyed by domain code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RecoveryRepr", into = "RecoveryRepr")]
pub enum Recovery {
    Uniform(f64),
    ByDomain(BTreeMap<i32, f64>),
}

/// JSON object keys are strings, which untagged maps cannot parse as `i32`.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum RecoveryRepr {
    Uniform(f64),
    ByDomain(BTreeMap<String, f64>),
}

impl TryFrom<RecoveryRepr> for Recovery {
    type Error = String;

    fn try_from(r: RecoveryRepr) -> std::result::Result<Self, String> {
        Ok(match r {
            RecoveryRepr::Uniform(v) => Recovery::Uniform(v),
            RecoveryRepr::ByDomain(m) => Recovery::ByDomain(
                m.into_iter()
                    .map(|(k, v)| k.parse().map(|d| (d, v)).map_err(|_| format!("domain key `{k}` is not an integer")))
                    .collect::<std::result::Result<_, _>>()?,
            ),
        })
    }
}

impl From<Recovery> for RecoveryRepr {
    fn from(r: Recovery) -> Self {
        match r {
            Recovery::Uniform(v) => RecoveryRepr::Uniform(v),
            Recovery::ByDomain(m) => RecoveryRepr::ByDomain(m.into_iter().map(|(k, v)| (k.to_string(), v)).collect()),
        }
    }
}

impl Recovery {
    pub fn of(&self, domain: i32) -> f64 {
        match self {
            Recovery::Uniform(r) => *r,
            Recovery::ByDomain(m) => m.get(&domain).copied().unwrap_or(0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MiningMode {
    /// Waste of a unit is mined alongside its ore; a full mill does not stop waste mining.
    #[default]
    Simultaneous,
    /// Ore is mined first; once the mill is full all mining stops until the next period.
    OreFirst,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EconomicConfig {
    /// $ per tonne of metal.
    pub price: PerPeriod,
    /// $ per tonne of metal sold.
    pub selling_cost: f64,
    /// $ per tonne of rock milled.
    pub processing_cost: PerPeriod,
    /// $ per tonne of rock mined.
    pub mining_cost: PerPeriod,
    /// $ per tonne of rock sent to waste.
    pub rehab_cost: f64,
    pub recovery: Recovery,
    /// Per period.
    pub discount_rate: f64,
    /// Tonnes of rock per period.
    pub mill_capacity: f64,
    pub mining_capacity: Option<f64>,
    pub max_periods: usize,
    pub mining_mode: MiningMode,
}

impl Default for EconomicConfig {
    /// Copper-style economics for the two-pit test model: both pits pay to
    /// mill, the East pit more so, and the mill takes about two ore benches a
    /// period.
    fn default() -> Self {
        Self {
            price: PerPeriod::Constant(6000.0),
            selling_cost: 500.0,
            processing_cost: PerPeriod::Constant(12.0),
            mining_cost: PerPeriod::Constant(2.5),
            rehab_cost: 0.5,
            recovery: Recovery::Uniform(0.9),
            discount_rate: 0.08,
            mill_capacity: 2.4e6,
            mining_capacity: None,
            max_periods: 30,
            mining_mode: MiningMode::Simultaneous,
        }
    }
}

impl EconomicConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_periods == 0 {
            return Err(Error::param("max_periods", "horizon must be at least one period"));
        }
        if !(self.discount_rate >= 0.0 && self.discount_rate.is_finite()) {
            return Err(Error::param("discount_rate", "must be finite and >= 0"));
        }
        if !(self.mill_capacity > 0.0 && self.mill_capacity.is_finite()) {
            return Err(Error::param("mill_capacity", "must be positive"));
        }
        if let Some(c) = self.mining_capacity {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::param("mining_capacity", "must be positive"));
            }
        }
        let rs: Vec<f64> = match &self.recovery {
            Recovery::Uniform(r) => vec![*r],
            Recovery::ByDomain(m) => m.values().copied().collect(),
        };
        if rs.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::param("recovery", "must lie in [0, 1]"));
        }
        for (name, series) in [
            ("price", &self.price),
            ("processing_cost", &self.processing_cost),
            ("mining_cost", &self.mining_cost),
        ] {
            if let PerPeriod::Series(v) = series {
                if v.len() < self.max_periods {
                    return Err(Error::InvalidParameter {
                        name,
                        message: format!("series has {} values but the horizon is {}", v.len(), self.max_periods),
                    });
                }
            }
            if series.values().iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::InvalidParameter {
                    name,
                    message: "values must be finite and >= 0".into(),
                });
            }
        }
        for (name, v) in [("selling_cost", self.selling_cost), ("rehab_cost", self.rehab_cost)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter {
                    name,
                    message: "must be finite and >= 0".into(),
                });
            }
        }
        Ok(())
    }

    pub fn check_period(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.max_periods {
            return Err(Error::PeriodOutOfRange {
                period: t,
                horizon: self.max_periods,
            });
        }
        Ok(())
    }

    /// Every per-tonne price and cost multiplied by `k`.
    pub fn scaled(&self, k: f64) -> Self {
        Self {
            price: self.price.scaled(k),
            selling_cost: self.selling_cost * k,
            processing_cost: self.processing_cost.scaled(k),
            mining_cost: self.mining_cost.scaled(k),
            rehab_cost: self.rehab_cost * k,
            ..self.clone()
        }
    }

    /// Net metal margin per tonne of metal in period `t`.
    pub fn metal_margin(&self, t: usize) -> f64 {
        self.price.at(t) - self.selling_cost
    }

    /// Grade at which milling pays its processing and mining costs:
    /// `(q + n) / (r (i - c))`.
    pub fn breakeven_cutoff(&self, domain: i32, t: usize) -> f64 {
        let denom = self.recovery.of(domain) * self.metal_margin(t);
        if denom <= 0.0 {
            return 1.0;
        }
        ((self.processing_cost.at(t) + self.mining_cost.at(t)) / denom).min(1.0)
    }

    /// Profit of sending `parcel` in period `t`, evaluated at grade `grade`.
    pub fn parcel_profit(&self, parcel: &Parcel, destination: Destination, grade: f64, t: usize) -> f64 {
        match destination {
            Destination::Mill => {
                processed_profit(parcel.mass, grade, self.recovery.of(parcel.domain), t, self).profit
            }
            Destination::Waste => waste_profit(parcel.mass, t, self),
        }
    }
}

/// Tonnes of recovered metal: `m · g · r`.
pub fn saleable_metal(mass: f64, grade: f64, recovery: f64) -> f64 {
    mass * grade * recovery
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessedProfit {
    /// Value of processing, before mining cost.
    pub value: f64,
    pub profit: f64,
}

pub fn processed_profit(mass: f64, grade: f64, recovery: f64, t: usize, econ: &EconomicConfig) -> ProcessedProfit {
    let metal = saleable_metal(mass, grade, recovery);
    let value = metal * econ.metal_margin(t) - mass * econ.processing_cost.at(t);
    ProcessedProfit {
        value,
        profit: value - mass * econ.mining_cost.at(t),
    }
}

pub fn waste_profit(mass: f64, t: usize, econ: &EconomicConfig) -> f64 {
    -mass * (econ.mining_cost.at(t) + econ.rehab_cost)
}

pub fn discount(value: f64, t: usize, rate: f64) -> f64 {
    value / (1.0 + rate).powi(t as i32)
}

/// Which grade a parcel is evaluated at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradeSource {
    Member(usize),
    EnsembleMean,
}

impl GradeSource {
    pub fn grade(&self, parcel: &Parcel) -> f64 {
        match self {
            GradeSource::Member(e) => parcel.grades[*e],
            GradeSource::EnsembleMean => parcel.mean_grade(),
        }
    }
}

/// Undiscounted profit per period, index 0 holding period 1.
pub fn period_profits(
    schedule: &Schedule,
    parcels: &[Parcel],
    econ: &EconomicConfig,
    source: GradeSource,
) -> Result<Vec<f64>> {
    let mut out = vec![0.0; schedule.horizon()];
    for entry in &schedule.entries {
        econ.check_period(entry.period)?;
        let parcel = &parcels[entry.parcel];
        let full = econ.parcel_profit(parcel, entry.destination, source.grade(parcel), entry.period);
        out[entry.period - 1] += entry.fraction * full;
    }
    Ok(out)
}

/// Sum of discounted per-period values, periods numbered from 1.
pub fn discounted_sum(per_period: &[f64], rate: f64) -> f64 {
    per_period
        .iter()
        .enumerate()
        .map(|(i, v)| discount(*v, i + 1, rate))
        .sum()
}

/// Net present value of `schedule` with grades taken from `source`.
pub fn schedule_npv(
    schedule: &Schedule,
    parcels: &[Parcel],
    econ: &EconomicConfig,
    source: GradeSource,
) -> Result<f64> {
    let per_period = period_profits(schedule, parcels, econ, source)?;
    Ok(discounted_sum(&per_period, econ.discount_rate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ga::{PeriodSummary, ScheduledParcel};
    use proptest::prelude::*;

    fn econ() -> EconomicConfig {
        EconomicConfig {
            price: 9000.0.into(),
            selling_cost: 500.0,
            processing_cost: 10.0.into(),
            mining_cost: 2.0.into(),
            rehab_cost: 0.5,
            recovery: Recovery::Uniform(0.9),
            discount_rate: 0.08,
            mill_capacity: 1000.0,
            mining_capacity: None,
            max_periods: 5,
            mining_mode: MiningMode::Simultaneous,
        }
    }

    fn parcel(mass: f64, grades: Vec<f64>) -> Parcel {
        Parcel {
            unit: 0,
            domain: 1,
            bin: 1,
            mass,
            grades,
            blocks: vec![],
        }
    }

    fn one_entry(period: usize, destination: Destination) -> Schedule {
        Schedule {
            entries: vec![ScheduledParcel {
                parcel: 0,
                unit: 0,
                period,
                destination,
                fraction: 1.0,
                mass: 1000.0,
            }],
            periods: vec![PeriodSummary::default(); period],
        }
    }

    #[test]
    fn saleable_metal_examples() {
        assert!((saleable_metal(1000.0, 0.005, 0.9) - 4.5).abs() < 1e-12);
        assert_eq!(saleable_metal(1000.0, 0.0, 0.9), 0.0);
        assert_eq!(saleable_metal(1000.0, 0.005, 1.0), 1000.0 * 0.005);
    }

    #[test]
    fn processed_profit_examples() {
        let p = processed_profit(1000.0, 0.005, 0.9, 1, &econ());
        assert!((p.value - 28250.0).abs() < 1e-9);
        assert!((p.profit - 26250.0).abs() < 1e-9);
        let barren = processed_profit(1000.0, 0.0, 0.9, 1, &econ());
        assert_eq!(barren.profit, -1000.0 * 12.0);
        let mut flat = econ();
        flat.price = 500.0.into();
        assert_eq!(processed_profit(1000.0, 0.005, 0.9, 1, &flat).profit, -12000.0);
    }

    #[test]
    fn waste_profit_examples() {
        assert_eq!(waste_profit(1000.0, 1, &econ()), -2500.0);
        assert_eq!(waste_profit(0.0, 1, &econ()), 0.0);
        let mut e = econ();
        e.rehab_cost = 0.0;
        assert_eq!(waste_profit(1000.0, 1, &e), -2000.0);
    }

    #[test]
    fn discount_examples() {
        assert!((discount(108.0, 1, 0.08) - 100.0).abs() < 1e-12);
        assert!((discount(116.64, 2, 0.08) - 100.0).abs() < 1e-12);
        assert_eq!(discount(42.0, 3, 0.0), 42.0);
    }

    #[test]
    fn npv_of_single_milled_parcel() {
        let parcels = vec![parcel(1000.0, vec![0.005, 0.005])];
        let s = one_entry(1, Destination::Mill);
        let npv = schedule_npv(&s, &parcels, &econ(), GradeSource::Member(0)).unwrap();
        assert!((npv - 24305.555555555555).abs() < 1e-6);
        let other = schedule_npv(&s, &parcels, &econ(), GradeSource::Member(1)).unwrap();
        assert_eq!(npv, other);
        let waste = schedule_npv(&one_entry(1, Destination::Waste), &parcels, &econ(), GradeSource::EnsembleMean).unwrap();
        assert!(waste < 0.0);
    }

    #[test]
    fn period_outside_horizon_is_an_error() {
        let parcels = vec![parcel(1000.0, vec![0.005])];
        let s = one_entry(6, Destination::Mill);
        assert!(matches!(
            schedule_npv(&s, &parcels, &econ(), GradeSource::Member(0)),
            Err(Error::PeriodOutOfRange { period: 6, .. })
        ));
    }

    #[test]
    fn config_validation() {
        assert!(econ().validate().is_ok());
        assert!(EconomicConfig::default().validate().is_ok());
        let mut e = econ();
        e.discount_rate = -0.1;
        assert!(e.validate().is_err());
        let mut e = econ();
        e.recovery = Recovery::Uniform(1.2);
        assert!(e.validate().is_err());
        let mut e = econ();
        e.price = PerPeriod::Series(vec![1.0; 3]);
        assert!(e.validate().is_err());
        let mut e = econ();
        e.mining_capacity = Some(0.0);
        assert!(e.validate().is_err());
    }

    #[test]
    fn json_accepts_scalars_and_series() {
        let text = r#"{"price":[9000,9100,9200],"selling_cost":500,"processing_cost":10,
            "mining_cost":2,"rehab_cost":0.5,"recovery":{"1":0.9,"2":0.8},"discount_rate":0.08,
            "mill_capacity":1000,"max_periods":3,"mining_mode":"ore-first"}"#;
        let e: EconomicConfig = serde_json::from_str(text).unwrap();
        e.validate().unwrap();
        assert_eq!(e.price.at(2), 9100.0);
        assert_eq!(e.processing_cost.at(3), 10.0);
        assert_eq!(e.recovery.of(2), 0.8);
        assert_eq!(e.mining_mode, MiningMode::OreFirst);
    }

    proptest! {
        #[test]
        fn mill_beats_waste_iff_margin_covers(
            mass in 1.0f64..1e6, grade in 0.0f64..0.02, r in 0.1f64..1.0,
            price in 1000.0f64..10000.0, c in 0.0f64..900.0, q in 0.0f64..30.0,
            n in 0.0f64..10.0, h in 0.0f64..5.0,
        ) {
            let e = EconomicConfig {
                price: price.into(), selling_cost: c, processing_cost: q.into(), mining_cost: n.into(),
                rehab_cost: h, recovery: Recovery::Uniform(r), ..econ()
            };
            let mill = processed_profit(mass, grade, r, 1, &e).profit;
            let waste = waste_profit(mass, 1, &e);
            let lhs = saleable_metal(mass, grade, r) * (price - c);
            let rhs = mass * (q - h);
            // skip razor-thin ties
            prop_assume!((lhs - rhs).abs() > 1e-6 * (lhs.abs() + rhs.abs() + 1.0));
            prop_assert_eq!(mill >= waste, lhs >= rhs);
        }

        #[test]
        fn discount_strictly_decreasing(v in 0.1f64..1e9, t in 1usize..50, d in 0.001f64..0.5) {
            prop_assert!(discount(v, t + 1, d) < discount(v, t, d));
        }

        #[test]
        fn scaling_prices_scales_profit(mass in 1.0f64..1e6, grade in 0.0f64..0.02, k in 0.1f64..10.0) {
            let e = econ();
            let p = processed_profit(mass, grade, 0.9, 1, &e).profit;
            let pk = processed_profit(mass, grade, 0.9, 1, &e.scaled(k)).profit;
            prop_assert!((pk - k * p).abs() <= 1e-9 * (k * p).abs().max(1.0));
            let w = waste_profit(mass, 1, &e);
            prop_assert!((waste_profit(mass, 1, &e.scaled(k)) - k * w).abs() <= 1e-9 * (k * w).abs().max(1.0));
        }
    }
}
