//! Stage-bench units, domain-bin parcels, and extraction precedence.

use std::collections::{BTreeMap, BinaryHeap};
use std::cmp::Reverse;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BlockModel, UNMINED_STAGE, WASTE_DOMAIN};

pub type UnitId = usize;

/// All blocks of one stage on one bench.
#[derive(Debug, Clone, PartialEq)]
pub struct StageBenchUnit {
    pub id: UnitId,
    pub stage: u32,
    pub bench: u32,
    pub blocks: Vec<usize>,
}

/// Partitions staged blocks by `(stage, bench)`.
///
/// Units are numbered by ascending stage and, within a stage, from the top
/// bench down. Stage-0 blocks are left out.
pub fn build_units(model: &BlockModel) -> Vec<StageBenchUnit> {
    let mut groups: BTreeMap<(u32, Reverse<u32>), Vec<usize>> = BTreeMap::new();
    for (id, block) in model.blocks().iter().enumerate() {
        if block.stage == UNMINED_STAGE {
            continue;
        }
        groups
            .entry((block.stage, Reverse(block.bench())))
            .or_default()
            .push(id);
    }
    groups
        .into_iter()
        .enumerate()
        .map(|(id, ((stage, Reverse(bench)), blocks))| StageBenchUnit {
            id,
            stage,
            bench,
            blocks,
        })
        .collect()
}

/// Mill bin boundaries per lithological domain.
///
/// For a domain with boundaries `b1 < b2 < … < bk` the bins are
/// `[0, b1), [b1, b2), …, [bk, 1]`. The first boundary is the mill cutoff:
/// bin 0 goes to waste and every higher bin to the mill. Domains without an
/// entry (always including the waste domain) form a single waste bin.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CutoffSet {
    domains: BTreeMap<i32, Vec<f64>>,
}

impl CutoffSet {
    pub fn new(domains: BTreeMap<i32, Vec<f64>>) -> Result<Self> {
        let set = Self { domains };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        for (domain, bounds) in &self.domains {
            if *domain == WASTE_DOMAIN {
                return Err(Error::param("cutoffs", "the waste domain cannot carry mill cutoffs"));
            }
            if bounds.is_empty() {
                return Err(Error::param("cutoffs", format!("domain {domain} has no boundaries")));
            }
            if bounds[0] < 0.0 || bounds.iter().any(|b| !b.is_finite() || *b > 1.0) {
                return Err(Error::param(
                    "cutoffs",
                    format!("domain {domain} boundaries must lie in [0, 1]: {bounds:?}"),
                ));
            }
            if bounds.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::param(
                    "cutoffs",
                    format!("domain {domain} boundaries must be strictly increasing: {bounds:?}"),
                ));
            }
        }
        Ok(())
    }

    pub fn domains(&self) -> impl Iterator<Item = (i32, &[f64])> {
        self.domains.iter().map(|(d, b)| (*d, b.as_slice()))
    }

    pub fn boundaries(&self, domain: i32) -> &[f64] {
        self.domains.get(&domain).map(Vec::as_slice).unwrap_or(&[])
    }

    pub(crate) fn boundaries_mut(&mut self) -> impl Iterator<Item = (&i32, &mut Vec<f64>)> {
        self.domains.iter_mut()
    }

    pub fn mill_cutoff(&self, domain: i32) -> Option<f64> {
        self.boundaries(domain).first().copied()
    }

    /// Half-open bin lookup; the top bin is closed at 1.
    pub fn bin_of(&self, domain: i32, grade: f64) -> usize {
        self.boundaries(domain).partition_point(|b| *b <= grade)
    }

    pub fn bin_bounds(&self, domain: i32, bin: usize) -> (f64, f64) {
        let b = self.boundaries(domain);
        let low = if bin == 0 { 0.0 } else { b[bin - 1] };
        let high = b.get(bin).copied().unwrap_or(1.0);
        (low, high)
    }

    pub fn is_milled(&self, domain: i32, bin: usize) -> bool {
        bin >= 1 && !self.boundaries(domain).is_empty()
    }
}

/// Stage-bench-domain-bin material.
#[derive(Debug, Clone, PartialEq)]
pub struct Parcel {
    pub unit: UnitId,
    pub domain: i32,
    pub bin: usize,
    /// Tonnes of rock.
    pub mass: f64,
    /// Mass-weighted mean grade fraction per ensemble member.
    pub grades: Vec<f64>,
    pub blocks: Vec<usize>,
}

impl Parcel {
    /// Ensemble-mean grade. Exact when every member agrees.
    pub fn mean_grade(&self) -> f64 {
        ensemble_mean(&self.grades)
    }
}

pub(crate) fn ensemble_mean(values: &[f64]) -> f64 {
    let first = values[0];
    if values.iter().all(|v| *v == first) {
        return first;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Ensemble-mean grade of a block set, mass weighted. Used only for binning.
pub fn binning_grade(model: &BlockModel, blocks: &[usize]) -> f64 {
    let mut mass = 0.0;
    let mut metal = 0.0;
    for &id in blocks {
        let m = model.block_mass(id);
        mass += m;
        metal += m * ensemble_mean(model.block_grades(id));
    }
    if mass > 0.0 {
        metal / mass
    } else {
        0.0
    }
}

/// Mass, per-member metal and blocks of one parcel under construction.
type Group = (f64, Vec<f64>, Vec<usize>);

/// Splits a unit into domain-bin parcels, ordered by `(domain, bin)`.
pub fn build_parcels(unit: &StageBenchUnit, cutoffs: &CutoffSet, model: &BlockModel) -> Vec<Parcel> {
    let n = model.n_members();
    let mut groups: BTreeMap<(i32, usize), Group> = BTreeMap::new();
    for &id in &unit.blocks {
        let domain = model.block(id).domain;
        let bin = cutoffs.bin_of(domain, binning_grade(model, &[id]));
        let entry = groups
            .entry((domain, bin))
            .or_insert_with(|| (0.0, vec![0.0; n], Vec::new()));
        let m = model.block_mass(id);
        entry.0 += m;
        for (acc, g) in entry.1.iter_mut().zip(model.block_grades(id)) {
            *acc += m * g;
        }
        entry.2.push(id);
    }
    groups
        .into_iter()
        .map(|((domain, bin), (mass, metal, blocks))| Parcel {
            unit: unit.id,
            domain,
            bin,
            mass,
            grades: metal.into_iter().map(|x| x / mass).collect(),
            blocks,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrecedencePolicy {
    /// Benches top-down within each stage; stages may interleave.
    #[default]
    Concurrent,
    /// Additionally, stage `s` is finished before stage `s + 1` starts.
    StrictStage,
}

/// Unit-level precedence DAG.
#[derive(Debug, Clone)]
pub struct Precedence {
    preds: Vec<Vec<UnitId>>,
    succs: Vec<Vec<UnitId>>,
}

impl Precedence {
    /// Expects units as produced by [`build_units`].
    pub fn new(units: &[StageBenchUnit], policy: PrecedencePolicy) -> Self {
        let n = units.len();
        let mut preds = vec![Vec::new(); n];
        let mut succs = vec![Vec::new(); n];
        let mut link = |a: UnitId, b: UnitId| {
            preds[b].push(a);
            succs[a].push(b);
        };
        let mut last_of_prev_stage: Option<UnitId> = None;
        let mut i = 0;
        while i < n {
            let stage = units[i].stage;
            let mut j = i;
            while j < n && units[j].stage == stage {
                j += 1;
            }
            let mut by_bench: Vec<&StageBenchUnit> = units[i..j].iter().collect();
            by_bench.sort_by_key(|u| Reverse(u.bench));
            for w in by_bench.windows(2) {
                link(w[0].id, w[1].id);
            }
            if policy == PrecedencePolicy::StrictStage {
                if let Some(prev) = last_of_prev_stage {
                    link(prev, by_bench[0].id);
                }
            }
            last_of_prev_stage = by_bench.last().map(|u| u.id);
            i = j;
        }
        Self { preds, succs }
    }

    pub fn len(&self) -> usize {
        self.preds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.preds.is_empty()
    }

    pub fn predecessors(&self, unit: UnitId) -> &[UnitId] {
        &self.preds[unit]
    }

    pub fn successors(&self, unit: UnitId) -> &[UnitId] {
        &self.succs[unit]
    }

    pub fn check_permutation(&self, sequence: &[UnitId]) -> Result<()> {
        let n = self.len();
        let mut seen = vec![false; n];
        if sequence.len() != n {
            return Err(Error::NotAPermutation { expected: n });
        }
        for &u in sequence {
            if u >= n || std::mem::replace(&mut seen[u], true) {
                return Err(Error::NotAPermutation { expected: n });
            }
        }
        Ok(())
    }

    /// Whether every unit follows all of its predecessors.
    pub fn is_satisfied(&self, sequence: &[UnitId]) -> Result<bool> {
        self.check_permutation(sequence)?;
        let mut pos = vec![0usize; self.len()];
        for (i, &u) in sequence.iter().enumerate() {
            pos[u] = i;
        }
        Ok(sequence
            .iter()
            .all(|&u| self.preds[u].iter().all(|&p| pos[p] < pos[u])))
    }

    /// Stable topological reordering: repeatedly emits the earliest unit in
    /// `sequence` whose predecessors have all been emitted.
    pub fn repair(&self, sequence: &[UnitId]) -> Result<Vec<UnitId>> {
        self.check_permutation(sequence)?;
        let n = self.len();
        let mut pos = vec![0usize; n];
        for (i, &u) in sequence.iter().enumerate() {
            pos[u] = i;
        }
        let mut missing: Vec<usize> = self.preds.iter().map(Vec::len).collect();
        let mut ready: BinaryHeap<Reverse<(usize, UnitId)>> = (0..n)
            .filter(|&u| missing[u] == 0)
            .map(|u| Reverse((pos[u], u)))
            .collect();
        let mut out = Vec::with_capacity(n);
        while let Some(Reverse((_, u))) = ready.pop() {
            out.push(u);
            for &s in &self.succs[u] {
                missing[s] -= 1;
                if missing[s] == 0 {
                    ready.push(Reverse((pos[s], s)));
                }
            }
        }
        Ok(out)
    }

    /// Units with every predecessor in `placed` and not themselves placed.
    pub fn available<'a>(&'a self, placed: &'a [bool]) -> impl Iterator<Item = UnitId> + 'a {
        (0..self.len()).filter(move |&u| !placed[u] && self.preds[u].iter().all(|&p| placed[p]))
    }
}

pub fn precedence_ok(
    sequence: &[UnitId],
    units: &[StageBenchUnit],
    policy: PrecedencePolicy,
) -> Result<bool> {
    Precedence::new(units, policy).is_satisfied(sequence)
}

/// Per-unit, per-domain blocks sorted by binning grade with prefix sums of
/// mass and metal, so parcels for any cutoff set come from two binary searches.
#[derive(Debug, Clone)]
struct DomainSlice {
    domain: i32,
    blocks: Vec<usize>,
    keys: Vec<f64>,
    /// `prefix_mass[k]` = mass of the first `k` blocks.
    prefix_mass: Vec<f64>,
    /// `(k, member)` row-major prefix metal, `(blocks + 1) × members`.
    prefix_metal: Vec<f64>,
}

/// Units, precedence and a parcel index over one block model.
#[derive(Debug, Clone)]
pub struct Reserve {
    units: Vec<StageBenchUnit>,
    precedence: Precedence,
    slices: Vec<Vec<DomainSlice>>,
    n_members: usize,
    ore_domains: Vec<i32>,
    max_grade: BTreeMap<i32, f64>,
}

impl Reserve {
    pub fn new(model: &BlockModel, policy: PrecedencePolicy) -> Self {
        let units = build_units(model);
        let precedence = Precedence::new(&units, policy);
        let n = model.n_members();
        let mut max_grade: BTreeMap<i32, f64> = BTreeMap::new();
        let slices = units
            .iter()
            .map(|unit| {
                let mut by_domain: BTreeMap<i32, Vec<(f64, usize)>> = BTreeMap::new();
                for &id in &unit.blocks {
                    let domain = model.block(id).domain;
                    let key = binning_grade(model, &[id]);
                    if domain != WASTE_DOMAIN {
                        let g = max_grade.entry(domain).or_insert(0.0);
                        *g = g.max(model.block_grades(id).iter().cloned().fold(0.0, f64::max));
                    }
                    by_domain.entry(domain).or_default().push((key, id));
                }
                by_domain
                    .into_iter()
                    .map(|(domain, mut items)| {
                        items.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                        let mut prefix_mass = Vec::with_capacity(items.len() + 1);
                        let mut prefix_metal = Vec::with_capacity((items.len() + 1) * n);
                        prefix_mass.push(0.0);
                        prefix_metal.extend(std::iter::repeat_n(0.0, n));
                        for (k, &(_, id)) in items.iter().enumerate() {
                            let m = model.block_mass(id);
                            prefix_mass.push(prefix_mass[k] + m);
                            for (e, g) in model.block_grades(id).iter().enumerate() {
                                let prev = prefix_metal[k * n + e];
                                prefix_metal.push(prev + m * g);
                            }
                        }
                        DomainSlice {
                            domain,
                            keys: items.iter().map(|x| x.0).collect(),
                            blocks: items.iter().map(|x| x.1).collect(),
                            prefix_mass,
                            prefix_metal,
                        }
                    })
                    .collect()
            })
            .collect();
        let ore_domains = max_grade.keys().copied().collect();
        Self {
            units,
            precedence,
            slices,
            n_members: n,
            ore_domains,
            max_grade,
        }
    }

    pub fn units(&self) -> &[StageBenchUnit] {
        &self.units
    }

    pub fn precedence(&self) -> &Precedence {
        &self.precedence
    }

    pub fn n_members(&self) -> usize {
        self.n_members
    }

    /// Non-waste domains present in staged blocks.
    pub fn ore_domains(&self) -> &[i32] {
        &self.ore_domains
    }

    /// Highest member grade seen in `domain`.
    pub fn max_grade(&self, domain: i32) -> f64 {
        self.max_grade.get(&domain).copied().unwrap_or(0.0)
    }

    /// Parcels of every unit under `cutoffs`; same content and order as
    /// calling [`build_parcels`] unit by unit.
    pub fn parcels(&self, cutoffs: &CutoffSet) -> ParcelSet {
        let n = self.n_members;
        let mut parcels = Vec::new();
        let mut by_unit = Vec::with_capacity(self.units.len());
        for (unit, slices) in self.units.iter().zip(&self.slices) {
            let start = parcels.len();
            for slice in slices {
                let bounds = cutoffs.boundaries(slice.domain);
                let mut lo = 0;
                for bin in 0..=bounds.len() {
                    let hi = match bounds.get(bin) {
                        Some(b) => slice.keys.partition_point(|k| k < b),
                        None => slice.keys.len(),
                    };
                    if hi > lo {
                        let mass = slice.prefix_mass[hi] - slice.prefix_mass[lo];
                        let grades = (0..n)
                            .map(|e| (slice.prefix_metal[hi * n + e] - slice.prefix_metal[lo * n + e]) / mass)
                            .collect();
                        parcels.push(Parcel {
                            unit: unit.id,
                            domain: slice.domain,
                            bin,
                            mass,
                            grades,
                            blocks: slice.blocks[lo..hi].to_vec(),
                        });
                    }
                    lo = hi;
                }
            }
            by_unit.push(start..parcels.len());
        }
        ParcelSet { parcels, by_unit }
    }
}

/// Parcels of a whole reserve grouped by unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ParcelSet {
    pub parcels: Vec<Parcel>,
    pub by_unit: Vec<Range<usize>>,
}

impl ParcelSet {
    pub fn from_parcels(n_units: usize, mut parcels: Vec<Parcel>) -> Self {
        parcels.sort_by_key(|p| (p.unit, p.domain, p.bin));
        let mut by_unit = Vec::with_capacity(n_units);
        let mut start = 0;
        for u in 0..n_units {
            let end = start + parcels[start..].iter().take_while(|p| p.unit == u).count();
            by_unit.push(start..end);
            start = end;
        }
        Self { parcels, by_unit }
    }

    pub fn of_unit(&self, unit: UnitId) -> &[Parcel] {
        &self.parcels[self.by_unit[unit].clone()]
    }

    pub fn len(&self) -> usize {
        self.parcels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parcels.is_empty()
    }

    pub fn n_members(&self) -> Option<usize> {
        self.parcels.first().map(|p| p.grades.len())
    }
}
