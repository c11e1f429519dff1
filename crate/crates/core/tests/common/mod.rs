#![allow(dead_code)]

use std::collections::BTreeMap;

use mineplan_core::econ::{EconomicConfig, Recovery};
use mineplan_core::ga::{Destination, Genome, Schedule};
use mineplan_core::model::{Block, BlockModel};
use mineplan_core::reserve::{CutoffSet, ParcelSet, Precedence, Reserve, UnitId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `stages × benches` units, each bench holding three ore blocks of
/// differing grade and one waste block; 1000 t per block.
pub fn tiny_model(stages: u32, benches: u32, members: usize, seed: u64) -> BlockModel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut blocks = Vec::new();
    let mut grades = Vec::new();
    for s in 0..stages {
        for z in 0..benches {
            for k in 0..4u32 {
                let ore = k < 3;
                blocks.push(Block {
                    index: [s * 4 + k, 0, z],
                    domain: i32::from(ore),
                    density: 1.0,
                    stage: s + 1,
                });
                if ore {
                    let base = rng.random_range(0.001..0.012);
                    grades.extend((0..members).map(|_| base * rng.random_range(0.8..1.2)));
                } else {
                    grades.extend(std::iter::repeat_n(0.0, members));
                }
            }
        }
    }
    BlockModel::new([stages * 4, 1, benches], [10.0; 3], blocks, grades, members).unwrap()
}

pub fn tiny_econ() -> EconomicConfig {
    EconomicConfig {
        price: 6000.0.into(),
        selling_cost: 500.0,
        processing_cost: 12.0.into(),
        mining_cost: 2.5.into(),
        rehab_cost: 0.5,
        recovery: Recovery::Uniform(0.9),
        discount_rate: 0.1,
        mill_capacity: 2500.0,
        max_periods: 30,
        ..Default::default()
    }
}

pub fn single_cutoff(c: f64) -> CutoffSet {
    CutoffSet::new(BTreeMap::from([(1, vec![c])])).unwrap()
}

/// Every precedence-valid ordering of the units.
pub fn all_orders(precedence: &Precedence) -> Vec<Vec<UnitId>> {
    fn go(p: &Precedence, placed: &mut Vec<bool>, seq: &mut Vec<UnitId>, out: &mut Vec<Vec<UnitId>>) {
        if seq.len() == p.len() {
            out.push(seq.clone());
            return;
        }
        let avail: Vec<UnitId> = p.available(placed).collect();
        for u in avail {
            placed[u] = true;
            seq.push(u);
            go(p, placed, seq, out);
            seq.pop();
            placed[u] = false;
        }
    }
    let mut out = Vec::new();
    go(precedence, &mut vec![false; precedence.len()], &mut Vec::new(), &mut out);
    out
}

pub fn random_genome<R: Rng>(reserve: &Reserve, econ: &EconomicConfig, rng: &mut R) -> Genome {
    let mut domains = BTreeMap::new();
    for &d in reserve.ore_domains() {
        let g = econ.breakeven_cutoff(d, 1);
        let k = rng.random_range(1..=3);
        let mut b: Vec<f64> = (0..k).map(|_| rng.random_range(0.0..2.5 * g)).collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        domains.insert(d, b);
    }
    let mut seq: Vec<UnitId> = (0..reserve.units().len()).collect();
    use rand::seq::SliceRandom;
    seq.shuffle(rng);
    Genome {
        cutoffs: CutoffSet::new(domains).unwrap(),
        sequence: reserve.precedence().repair(&seq).unwrap(),
    }
}

/// Checks the schedule contract; returns the first violation.
pub fn check_schedule(
    genome: &Genome,
    schedule: &Schedule,
    parcels: &ParcelSet,
    reserve: &Reserve,
    econ: &EconomicConfig,
    n_blocks: usize,
) -> Result<(), String> {
    if !reserve.precedence().is_satisfied(&genome.sequence).map_err(|e| e.to_string())? {
        return Err("sequence breaks precedence".into());
    }
    let mut milled = vec![0.0; schedule.horizon()];
    let mut mined = vec![0.0; schedule.horizon()];
    let mut share = vec![0.0; parcels.len()];
    let mut mass = vec![0.0; parcels.len()];
    for e in &schedule.entries {
        let p = &parcels.parcels[e.parcel];
        if p.unit != e.unit {
            return Err(format!("entry unit {} != parcel unit {}", e.unit, p.unit));
        }
        if ((e.fraction * p.mass - e.mass) / p.mass).abs() > 1e-9 {
            return Err(format!("split not proportional: {} vs {}", e.fraction * p.mass, e.mass));
        }
        let milled_bin = genome.cutoffs.is_milled(p.domain, p.bin);
        if milled_bin != (e.destination == Destination::Mill) {
            return Err("destination disagrees with cutoffs".into());
        }
        if e.destination == Destination::Mill {
            milled[e.period - 1] += e.mass;
        }
        mined[e.period - 1] += e.mass;
        share[e.parcel] += e.fraction;
        mass[e.parcel] += e.mass;
    }
    for (t, m) in milled.iter().enumerate() {
        if *m > econ.mill_capacity * (1.0 + 1e-9) {
            return Err(format!("period {} mills {m} t", t + 1));
        }
        if let Some(cap) = econ.mining_capacity {
            if mined[t] > cap * (1.0 + 1e-9) {
                return Err(format!("period {} mines {} t", t + 1, mined[t]));
            }
        }
    }
    for (i, p) in parcels.parcels.iter().enumerate() {
        if (share[i] - 1.0).abs() > 1e-9 || ((mass[i] - p.mass) / p.mass).abs() > 1e-9 {
            return Err(format!("parcel {i}: share {} mass {} of {}", share[i], mass[i], p.mass));
        }
    }
    let mut seen = vec![0u32; n_blocks];
    for p in &parcels.parcels {
        for &b in &p.blocks {
            seen[b] += 1;
        }
    }
    let staged: Vec<usize> = reserve.units().iter().flat_map(|u| u.blocks.iter().copied()).collect();
    if staged.iter().any(|&b| seen[b] != 1) || seen.iter().sum::<u32>() as usize != staged.len() {
        return Err("a staged block is not in exactly one parcel".into());
    }
    let mut pos = vec![0; genome.sequence.len()];
    for (i, &u) in genome.sequence.iter().enumerate() {
        pos[u] = i;
    }
    let mut last = (0, 1);
    for e in &schedule.entries {
        let key = (pos[e.unit], e.period);
        if key.0 < last.0 || key.1 < last.1 {
            return Err("periods decrease along the sequence".into());
        }
        last = key;
    }
    Ok(())
}
