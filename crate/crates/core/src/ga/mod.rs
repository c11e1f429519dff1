//! Genome, spawners, variation operators, decoding and the evolutionary loop.

mod decode;
mod evolve;
mod operators;
mod output;
mod spawn;

use serde::{Deserialize, Serialize};

use crate::econ::EconomicConfig;
use crate::reserve::{CutoffSet, PrecedencePolicy, Reserve, UnitId};

pub use decode::decode;
pub use evolve::{evolve, evaluate, Evaluation, EvolveResult, TraceRow};
pub use operators::{crossover, crossover_with_segment, mutate, MutationRates};
pub use output::{write_trace_csv, EntryRecord, ScheduleDocument};
pub use spawn::{blend_score, spawn_uncertainty_blend, spawn_value_biased, unit_values, weighted_pick};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Destination {
    Mill,
    Waste,
}

/// One parcel, or the share of a parcel, assigned to a period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduledParcel {
    /// Index into the decoded parcel list.
    pub parcel: usize,
    pub unit: UnitId,
    /// 1-based.
    pub period: usize,
    pub destination: Destination,
    /// Share of the parcel's mass carried by this entry.
    pub fraction: f64,
    /// Tonnes.
    pub mass: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PeriodSummary {
    pub period: usize,
    pub milled_t: f64,
    pub mined_t: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schedule {
    pub entries: Vec<ScheduledParcel>,
    pub periods: Vec<PeriodSummary>,
}

impl Schedule {
    /// Number of periods used.
    pub fn horizon(&self) -> usize {
        self.periods.len()
    }

    pub fn milled_in(&self, period: usize) -> impl Iterator<Item = &ScheduledParcel> {
        self.entries
            .iter()
            .filter(move |e| e.period == period && e.destination == Destination::Mill)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Genome {
    pub cutoffs: CutoffSet,
    pub sequence: Vec<UnitId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitnessMode {
    /// NPV on ensemble-mean grades.
    #[default]
    Npv,
    /// NPV with milled profits downrated by uncertainty risk.
    Discounted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub elitism: usize,
    pub tournament: usize,
    pub crossover_rate: f64,
    pub cutoff_mutation_rate: f64,
    pub sequence_mutation_rate: f64,
    /// Standard deviation of cutoff draws and moves; `None` means 10% of
    /// the domain's breakeven cutoff.
    pub cutoff_sigma: Option<f64>,
    /// Mill bin boundaries per ore domain; the first is the mill cutoff.
    pub boundaries_per_domain: usize,
    /// Spawner weight floor as a fraction of the largest absolute unit value.
    pub value_floor: f64,
    pub precedence: PrecedencePolicy,
    pub fitness: FitnessMode,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 100,
            generations: 500,
            elitism: 2,
            tournament: 3,
            crossover_rate: 0.9,
            cutoff_mutation_rate: 0.2,
            sequence_mutation_rate: 0.5,
            cutoff_sigma: None,
            boundaries_per_domain: 2,
            value_floor: 1e-3,
            precedence: PrecedencePolicy::Concurrent,
            fitness: FitnessMode::Npv,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> crate::Result<()> {
        use crate::Error;
        if self.population < 2 {
            return Err(Error::param("population", "must be at least 2"));
        }
        if self.elitism >= self.population {
            return Err(Error::param("elitism", "must be smaller than the population"));
        }
        if self.tournament == 0 {
            return Err(Error::param("tournament", "must be at least 1"));
        }
        if self.boundaries_per_domain == 0 {
            return Err(Error::param("boundaries_per_domain", "must be at least 1"));
        }
        for (name, r) in [
            ("crossover_rate", self.crossover_rate),
            ("cutoff_mutation_rate", self.cutoff_mutation_rate),
            ("sequence_mutation_rate", self.sequence_mutation_rate),
        ] {
            if !(0.0..=1.0).contains(&r) {
                return Err(Error::InvalidParameter {
                    name,
                    message: format!("rate {r} outside [0, 1]"),
                });
            }
        }
        if let Some(s) = self.cutoff_sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::param("cutoff_sigma", "must be positive"));
            }
        }
        if self.value_floor.is_nan() || self.value_floor <= 0.0 {
            return Err(Error::param("value_floor", "must be positive"));
        }
        Ok(())
    }
}

/// Where a domain's cutoffs are drawn: around its breakeven grade.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffPrior {
    pub domain: i32,
    pub center: f64,
    pub sigma: f64,
    pub max: f64,
}

/// Everything the spawners, operators and decoder share for one run.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub reserve: &'a Reserve,
    pub econ: &'a EconomicConfig,
    pub priors: Vec<CutoffPrior>,
    pub boundaries_per_domain: usize,
    pub value_floor: f64,
}

impl<'a> Problem<'a> {
    pub fn new(reserve: &'a Reserve, econ: &'a EconomicConfig, config: &GaConfig) -> Self {
        let priors = reserve
            .ore_domains()
            .iter()
            .map(|&domain| {
                let center = econ.breakeven_cutoff(domain, 1);
                let sigma = config
                    .cutoff_sigma
                    .unwrap_or(0.1 * center)
                    .max(1e-6);
                CutoffPrior {
                    domain,
                    center,
                    sigma,
                    max: reserve.max_grade(domain),
                }
            })
            .collect();
        Self {
            reserve,
            econ,
            priors,
            boundaries_per_domain: config.boundaries_per_domain,
            value_floor: config.value_floor,
        }
    }
}

/// Sorts, clamps to `[0, max]`, and separates equal boundaries by one ulp.
pub(crate) fn normalize_boundaries(bounds: &mut [f64], max: f64) {
    for b in bounds.iter_mut() {
        *b = b.clamp(0.0, max.max(0.0));
    }
    bounds.sort_by(f64::total_cmp);
    for i in 1..bounds.len() {
        if bounds[i] <= bounds[i - 1] {
            bounds[i] = bounds[i - 1].next_up();
        }
    }
    let top = bounds.len();
    if top > 0 && bounds[top - 1] > 1.0 {
        // only reachable with max near 1; walk back down below 1
        bounds[top - 1] = 1.0;
        for i in (0..top - 1).rev() {
            if bounds[i] >= bounds[i + 1] {
                bounds[i] = bounds[i + 1].next_down();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_keeps_strict_order() {
        let mut b = vec![0.004, 0.002, 0.004, -0.1];
        normalize_boundaries(&mut b, 0.01);
        assert_eq!(b[0], 0.0);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        let mut b = vec![0.5, 0.9];
        normalize_boundaries(&mut b, 0.3);
        assert_eq!(b[0], 0.3);
        assert!(b[1] > 0.3);
    }

    #[test]
    fn config_validation() {
        assert!(GaConfig::default().validate().is_ok());
        let bad = [
            GaConfig { population: 1, ..Default::default() },
            GaConfig { elitism: 100, ..Default::default() },
            GaConfig { crossover_rate: 1.5, ..Default::default() },
            GaConfig { cutoff_sigma: Some(0.0), ..Default::default() },
            GaConfig { boundaries_per_domain: 0, ..Default::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
    }
}
