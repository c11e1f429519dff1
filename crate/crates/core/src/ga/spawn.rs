use std::cell::RefCell;
use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::econ::EconomicConfig;
use crate::reserve::{CutoffSet, ParcelSet, Precedence, UnitId};
use crate::risk::RiskAccumulator;

use super::{normalize_boundaries, Destination, Genome, Problem};

/// Index drawn with probability proportional to `weights`.
pub fn weighted_pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut r = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if r < *w {
            return i;
        }
        r -= w;
    }
    weights.len() - 1
}

fn destination(cutoffs: &CutoffSet, domain: i32, bin: usize) -> Destination {
    if cutoffs.is_milled(domain, bin) {
        Destination::Mill
    } else {
        Destination::Waste
    }
}

/// Undiscounted period-1 value of each unit at ensemble-mean grades.
pub fn unit_values(parcels: &ParcelSet, cutoffs: &CutoffSet, econ: &EconomicConfig) -> Vec<f64> {
    (0..parcels.by_unit.len())
        .map(|u| {
            parcels
                .of_unit(u)
                .iter()
                .map(|p| econ.parcel_profit(p, destination(cutoffs, p.domain, p.bin), p.mean_grade(), 1))
                .sum()
        })
        .collect()
}

/// Mill cutoff around the breakeven grade, further boundaries uniform above it.
pub(crate) fn draw_cutoffs<R: Rng + ?Sized>(problem: &Problem, rng: &mut R) -> CutoffSet {
    let mut domains = BTreeMap::new();
    for prior in &problem.priors {
        let normal = Normal::new(prior.center, prior.sigma).expect("positive sigma");
        let first = normal.sample(rng).clamp(0.0, prior.max);
        let mut bounds = vec![first];
        for _ in 1..problem.boundaries_per_domain {
            bounds.push(first + rng.random::<f64>() * (prior.max - first).max(0.0));
        }
        normalize_boundaries(&mut bounds, prior.max);
        domains.insert(prior.domain, bounds);
    }
    CutoffSet::new(domains).expect("normalized boundaries")
}

/// Builds a precedence-valid order, drawing each next unit among the
/// available ones with weight `max(floor, score)`.
fn biased_order<R: Rng + ?Sized>(
    precedence: &Precedence,
    floor: f64,
    rng: &mut R,
    mut score: impl FnMut(UnitId) -> f64,
    mut chosen: impl FnMut(UnitId),
) -> Vec<UnitId> {
    let n = precedence.len();
    let mut missing: Vec<usize> = (0..n).map(|u| precedence.predecessors(u).len()).collect();
    let mut available: Vec<UnitId> = (0..n).filter(|&u| missing[u] == 0).collect();
    let mut sequence = Vec::with_capacity(n);
    let mut weights = Vec::new();
    while !available.is_empty() {
        weights.clear();
        weights.extend(available.iter().map(|&u| score(u).max(floor)));
        let unit = available.remove(weighted_pick(&weights, rng));
        sequence.push(unit);
        chosen(unit);
        for &s in precedence.successors(unit) {
            missing[s] -= 1;
            if missing[s] == 0 {
                available.push(s);
            }
        }
    }
    sequence
}

fn weight_floor(problem: &Problem, values: &[f64]) -> f64 {
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (problem.value_floor * scale).max(f64::MIN_POSITIVE)
}

/// Cutoffs near breakeven; units drawn in proportion to their value.
pub fn spawn_value_biased<R: Rng + ?Sized>(problem: &Problem, rng: &mut R) -> Genome {
    let cutoffs = draw_cutoffs(problem, rng);
    let parcels = problem.reserve.parcels(&cutoffs);
    let values = unit_values(&parcels, &cutoffs, problem.econ);
    let floor = weight_floor(problem, &values);
    let sequence = biased_order(problem.reserve.precedence(), floor, rng, |u| values[u], |_| {});
    Genome { cutoffs, sequence }
}

/// The last `cap` units chosen.
#[derive(Debug, Clone)]
struct Window {
    units: VecDeque<UnitId>,
    cap: usize,
}

impl Window {
    fn new(cap: usize) -> Self {
        Self {
            units: VecDeque::with_capacity(cap + 1),
            cap: cap.max(1),
        }
    }

    fn push(&mut self, unit: UnitId) {
        self.units.push_back(unit);
        if self.units.len() > self.cap {
            self.units.pop_front();
        }
    }

    fn units(&self) -> impl Iterator<Item = UnitId> + '_ {
        self.units.iter().copied()
    }
}

/// Period-1 value and milled-profit deviations of one unit.
#[derive(Debug, Clone)]
struct UnitTerms {
    value: f64,
    risk: RiskAccumulator,
}

fn unit_terms(parcels: &ParcelSet, cutoffs: &CutoffSet, econ: &EconomicConfig, n_members: usize) -> Vec<UnitTerms> {
    let mut profits = Vec::with_capacity(n_members);
    (0..parcels.by_unit.len())
        .map(|u| {
            let mut terms = UnitTerms {
                value: 0.0,
                risk: RiskAccumulator::new(n_members),
            };
            for p in parcels.of_unit(u) {
                let dest = destination(cutoffs, p.domain, p.bin);
                terms.value += econ.parcel_profit(p, dest, p.mean_grade(), 1);
                if dest == Destination::Mill {
                    profits.clear();
                    profits.extend(p.grades.iter().map(|g| econ.parcel_profit(p, dest, *g, 1)));
                    terms.risk.add(&profits, 1.0);
                }
            }
            terms
        })
        .collect()
}

fn window_score<'a>(units: impl Iterator<Item = &'a UnitTerms>, n_members: usize, coefficient: f64) -> f64 {
    let mut value = 0.0;
    let mut risk = RiskAccumulator::new(n_members);
    for t in units {
        value += t.value;
        risk.merge(&t.risk);
    }
    value - coefficient * risk.risk().standard_variance()
}

/// Value of mining `units` together in one nominal period, less
/// `coefficient` times the Standard Variance of their milled parcels.
pub fn blend_score(
    units: &[UnitId],
    parcels: &ParcelSet,
    cutoffs: &CutoffSet,
    econ: &EconomicConfig,
    coefficient: f64,
) -> f64 {
    let n = parcels.n_members().unwrap_or(1);
    let terms = unit_terms(parcels, cutoffs, econ, n);
    window_score(units.iter().map(|&u| &terms[u]), n, coefficient)
}

/// Like [`spawn_value_biased`], but each candidate is weighted by how much
/// it adds to the blend score of the last `window` units mined, which
/// favours material whose profit moves independently of the window's.
pub fn spawn_uncertainty_blend<R: Rng + ?Sized>(
    problem: &Problem,
    coefficient: f64,
    window: usize,
    rng: &mut R,
) -> Genome {
    let cutoffs = draw_cutoffs(problem, rng);
    let parcels = problem.reserve.parcels(&cutoffs);
    let n = problem.reserve.n_members();
    let terms = unit_terms(&parcels, &cutoffs, problem.econ, n);
    let values: Vec<f64> = terms.iter().map(|t| t.value).collect();
    let floor = weight_floor(problem, &values);

    let state = RefCell::new((Window::new(window), 0.0));
    let sequence = biased_order(
        problem.reserve.precedence(),
        floor,
        rng,
        |r| {
            let (w, base) = &*state.borrow();
            window_score(w.units().chain([r]).map(|u| &terms[u]), n, coefficient) - base
        },
        |u| {
            let (w, base) = &mut *state.borrow_mut();
            w.push(u);
            *base = window_score(w.units().map(|u| &terms[u]), n, coefficient);
        },
    );
    Genome { cutoffs, sequence }
}
