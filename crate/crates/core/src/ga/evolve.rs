use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::econ::{schedule_npv, EconomicConfig, GradeSource};
use crate::error::{Error, Result};
use crate::reserve::{ParcelSet, Reserve};
use crate::risk::{discounted_fitness, RiskParams};

use super::{
    crossover, decode, mutate, spawn_uncertainty_blend, spawn_value_biased, FitnessMode, GaConfig, Genome,
    MutationRates, Problem, Schedule,
};

/// A decoded genome with its fitness.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub fitness: f64,
    pub schedule: Schedule,
    pub parcels: ParcelSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub generation: usize,
    pub best: f64,
    /// Mean over feasible individuals.
    pub mean: f64,
}

#[derive(Debug, Clone)]
pub struct EvolveResult {
    pub best: Genome,
    pub evaluation: Evaluation,
    pub trace: Vec<TraceRow>,
    /// Risk coefficient the fitness used; 0 in NPV mode.
    pub coefficient: f64,
}

/// Decodes `genome` and scores it: ensemble-mean NPV, or the
/// uncertainty-discounted NPV with the given coefficient.
pub fn evaluate(
    genome: &Genome,
    reserve: &Reserve,
    econ: &EconomicConfig,
    mode: FitnessMode,
    coefficient: f64,
) -> Result<Evaluation> {
    let parcels = reserve.parcels(&genome.cutoffs);
    let schedule = decode(genome, &parcels, econ)?;
    let fitness = match mode {
        FitnessMode::Npv => schedule_npv(&schedule, &parcels.parcels, econ, GradeSource::EnsembleMean)?,
        FitnessMode::Discounted => discounted_fitness(&schedule, &parcels.parcels, econ, coefficient)?,
    };
    Ok(Evaluation {
        fitness,
        schedule,
        parcels,
    })
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent stream for one individual of one generation.
fn stream(seed: u64, generation: usize, index: usize) -> ChaCha8Rng {
    let s = splitmix(splitmix(splitmix(seed) ^ generation as u64) ^ index as u64);
    ChaCha8Rng::seed_from_u64(s)
}

struct Individual {
    genome: Genome,
    evaluation: Option<Evaluation>,
}

impl Individual {
    fn fitness(&self) -> f64 {
        self.evaluation.as_ref().map_or(f64::NEG_INFINITY, |e| e.fitness)
    }
}

fn tournament<R: Rng + ?Sized>(pop: &[Individual], size: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size {
        let c = rng.random_range(0..pop.len());
        if pop[c].fitness() > pop[best].fitness() || (pop[c].fitness() == pop[best].fitness() && c < best) {
            best = c;
        }
    }
    best
}

fn trace_row(generation: usize, pop: &[Individual]) -> TraceRow {
    let feasible: Vec<f64> = pop.iter().map(Individual::fitness).filter(|f| f.is_finite()).collect();
    TraceRow {
        generation,
        best: pop.iter().map(Individual::fitness).fold(f64::NEG_INFINITY, f64::max),
        mean: if feasible.is_empty() {
            f64::NEG_INFINITY
        } else {
            feasible.iter().sum::<f64>() / feasible.len() as f64
        },
    }
}

/// Generational GA over cutoffs and unit order.
///
/// Individual `i` of generation `g` draws all of its randomness from a
/// stream seeded by `(config.seed, g, i)`, so results do not depend on the
/// thread count. Genomes whose schedule overruns the horizon score −∞.
pub fn evolve(
    reserve: &Reserve,
    econ: &EconomicConfig,
    risk: &RiskParams,
    config: &GaConfig,
) -> Result<EvolveResult> {
    econ.validate()?;
    risk.validate()?;
    config.validate()?;
    if reserve.units().is_empty() {
        return Err(Error::InvalidModel("no staged blocks to schedule".into()));
    }
    let coefficient = match config.fitness {
        FitnessMode::Npv => 0.0,
        FitnessMode::Discounted => risk.coefficient()?,
    };
    let problem = Problem::new(reserve, econ, config);
    let precedence = reserve.precedence();
    let rates = MutationRates {
        cutoff: config.cutoff_mutation_rate,
        sequence: config.sequence_mutation_rate,
    };
    let score = |genome: Genome| {
        let evaluation = evaluate(&genome, reserve, econ, config.fitness, coefficient).ok();
        Individual { genome, evaluation }
    };

    let n_blend = (risk.spawner_mix * config.population as f64).round() as usize;
    let mut pop: Vec<Individual> = (0..config.population)
        .into_par_iter()
        .map(|i| {
            let mut rng = stream(config.seed, 0, i);
            let genome = if i < n_blend {
                spawn_uncertainty_blend(&problem, coefficient, risk.window, &mut rng)
            } else {
                spawn_value_biased(&problem, &mut rng)
            };
            score(genome)
        })
        .collect();
    if pop.iter().all(|ind| ind.evaluation.is_none()) {
        return Err(Error::Infeasible {
            horizon: econ.max_periods,
        });
    }
    let mut trace = vec![trace_row(0, &pop)];

    for generation in 1..=config.generations {
        let mut order: Vec<usize> = (0..pop.len()).collect();
        order.sort_by(|&a, &b| pop[b].fitness().total_cmp(&pop[a].fitness()).then(a.cmp(&b)));

        let children: Vec<Genome> = (config.elitism..config.population)
            .map(|i| {
                let mut rng = stream(config.seed, generation, i);
                let a = &pop[tournament(&pop, config.tournament, &mut rng)].genome;
                let b = &pop[tournament(&pop, config.tournament, &mut rng)].genome;
                let child = if rng.random_bool(config.crossover_rate) {
                    crossover(a, b, precedence, &mut rng)?
                } else {
                    a.clone()
                };
                Ok(mutate(&child, rates, &problem.priors, precedence, &mut rng))
            })
            .collect::<Result<_>>()?;
        let mut next: Vec<Individual> = order[..config.elitism]
            .iter()
            .map(|&i| Individual {
                genome: pop[i].genome.clone(),
                evaluation: pop[i].evaluation.clone(),
            })
            .collect();
        next.par_extend(children.into_par_iter().map(score));
        pop = next;
        trace.push(trace_row(generation, &pop));
    }

    let best = (0..pop.len())
        .max_by(|&a, &b| pop[a].fitness().total_cmp(&pop[b].fitness()).then(b.cmp(&a)))
        .expect("non-empty population");
    let best = pop.swap_remove(best);
    let evaluation = best.evaluation.ok_or(Error::Infeasible {
        horizon: econ.max_periods,
    })?;
    Ok(EvolveResult {
        best: best.genome,
        evaluation,
        trace,
        coefficient,
    })
}
