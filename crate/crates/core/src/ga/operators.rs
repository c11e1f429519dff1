use std::collections::BTreeMap;
use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::reserve::{CutoffSet, Precedence};

use super::{normalize_boundaries, CutoffPrior, Genome};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MutationRates {
    /// Per-boundary probability of a normal move.
    pub cutoff: f64,
    /// Probability of relocating one unit.
    pub sequence: f64,
}

/// Moves cutoff boundaries by normal steps and relocates one unit to a
/// uniformly chosen position between its last predecessor and first
/// successor.
pub fn mutate<R: Rng + ?Sized>(
    genome: &Genome,
    rates: MutationRates,
    priors: &[CutoffPrior],
    precedence: &Precedence,
    rng: &mut R,
) -> Genome {
    let mut child = genome.clone();
    if rates.cutoff > 0.0 {
        for (domain, bounds) in child.cutoffs.boundaries_mut() {
            let Some(prior) = priors.iter().find(|p| p.domain == *domain) else {
                continue;
            };
            let step = Normal::new(0.0, prior.sigma).expect("positive sigma");
            let mut moved = false;
            for b in bounds.iter_mut() {
                if rng.random_bool(rates.cutoff) {
                    *b += step.sample(rng);
                    moved = true;
                }
            }
            if moved {
                normalize_boundaries(bounds, prior.max);
            }
        }
    }
    let n = child.sequence.len();
    if n > 1 && rates.sequence > 0.0 && rng.random_bool(rates.sequence) {
        let from = rng.random_range(0..n);
        let unit = child.sequence.remove(from);
        let mut lo = 0;
        let mut hi = n - 1;
        for (i, &u) in child.sequence.iter().enumerate() {
            if precedence.predecessors(unit).contains(&u) {
                lo = lo.max(i + 1);
            }
            if precedence.successors(unit).contains(&u) {
                hi = hi.min(i);
            }
        }
        let to = rng.random_range(lo..=hi);
        child.sequence.insert(to, unit);
    }
    child
}

/// Order crossover with a random segment of `a`, then precedence repair.
pub fn crossover<R: Rng + ?Sized>(a: &Genome, b: &Genome, precedence: &Precedence, rng: &mut R) -> Result<Genome> {
    let n = a.sequence.len();
    let i = rng.random_range(0..=n);
    let j = rng.random_range(0..=n);
    crossover_with_segment(a, b, i.min(j)..i.max(j), precedence, rng)
}

/// Order crossover keeping `a.sequence[segment]` in place and filling the
/// rest with the remaining units in `b`'s order. Each cutoff boundary is
/// taken from either parent with equal probability.
pub fn crossover_with_segment<R: Rng + ?Sized>(
    a: &Genome,
    b: &Genome,
    segment: Range<usize>,
    precedence: &Precedence,
    rng: &mut R,
) -> Result<Genome> {
    precedence.check_permutation(&a.sequence)?;
    precedence.check_permutation(&b.sequence)?;
    let n = a.sequence.len();
    if segment.end > n || segment.start > segment.end {
        return Err(Error::param("segment", format!("{segment:?} outside 0..{n}")));
    }
    let mut kept = vec![false; n];
    for &u in &a.sequence[segment.clone()] {
        kept[u] = true;
    }
    let mut fill = b.sequence.iter().copied().filter(|&u| !kept[u]);
    let sequence: Vec<_> = (0..n)
        .map(|i| {
            if segment.contains(&i) {
                a.sequence[i]
            } else {
                fill.next().expect("fill covers the complement")
            }
        })
        .collect();
    let sequence = precedence.repair(&sequence)?;

    let mut domains = BTreeMap::new();
    for (domain, ba) in a.cutoffs.domains() {
        let bb = b.cutoffs.boundaries(domain);
        let mut bounds: Vec<f64> = if bb.len() == ba.len() {
            ba.iter()
                .zip(bb)
                .map(|(x, y)| if rng.random_bool(0.5) { *x } else { *y })
                .collect()
        } else if rng.random_bool(0.5) {
            ba.to_vec()
        } else {
            bb.to_vec()
        };
        normalize_boundaries(&mut bounds, 1.0);
        domains.insert(domain, bounds);
    }
    for (domain, bb) in b.cutoffs.domains() {
        domains.entry(domain).or_insert_with(|| bb.to_vec());
    }
    Ok(Genome {
        cutoffs: CutoffSet::new(domains)?,
        sequence,
    })
}
