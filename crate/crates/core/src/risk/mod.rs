//! Ensemble profit statistics, the Standard Variance measure and the
//! uncertainty-discounted fitness, plus the chance-constrained subset
//! selection functions they are modelled on.
//!
//! All ensemble moments use population (1/|E|) normalisation.

pub mod quantile;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::econ::{discounted_sum, EconomicConfig};
use crate::error::{Error, Result};
use crate::ga::{Destination, Schedule};
use crate::reserve::{ensemble_mean, Parcel};

pub use quantile::{inverse_normal_cdf, normal_cdf};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RiskMode {
    /// No downrating; coefficient 0.
    None,
    /// Coefficient is the α-quantile of the standard normal.
    #[default]
    Normal,
    /// Coefficient from the one-sided Chebyshev bound, √(α/(1−α)).
    Chebyshev,
    /// User-supplied coefficient.
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskParams {
    #[serde(default)]
    pub mode: RiskMode,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Required for [`RiskMode::Fixed`]; ignored otherwise.
    #[serde(default)]
    pub coefficient: Option<f64>,
    /// Benches remembered by the blending spawner.
    #[serde(default = "default_window")]
    pub window: usize,
    /// Share of the initial population drawn from the blending spawner.
    #[serde(default = "default_mix")]
    pub spawner_mix: f64,
}

fn default_alpha() -> f64 {
    0.9
}

fn default_window() -> usize {
    2
}

fn default_mix() -> f64 {
    0.5
}

impl Default for RiskParams {
    fn default() -> Self {
        Self {
            mode: RiskMode::Normal,
            alpha: default_alpha(),
            coefficient: None,
            window: default_window(),
            spawner_mix: default_mix(),
        }
    }
}

impl RiskParams {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.window == 0 {
            return Err(Error::param("window", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.spawner_mix) {
            return Err(Error::param("spawner_mix", "must lie in [0, 1]"));
        }
        match (self.mode, self.coefficient) {
            (RiskMode::Fixed, None) => Err(Error::param("coefficient", "fixed mode needs a coefficient")),
            (_, Some(k)) if !(k >= 0.0 && k.is_finite()) => {
                Err(Error::param("coefficient", "must be finite and >= 0"))
            }
            _ => Ok(()),
        }
    }

    /// The multiplier applied to the Standard Variance of each period.
    pub fn coefficient(&self) -> Result<f64> {
        self.validate()?;
        match self.mode {
            RiskMode::None => Ok(0.0),
            RiskMode::Normal => f_alpha(self.alpha),
            RiskMode::Chebyshev => c_alpha(self.alpha),
            RiskMode::Fixed => Ok(self.coefficient.unwrap_or(0.0)),
        }
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(0.5..1.0).contains(&alpha) {
        return Err(Error::param("alpha", format!("must lie in [0.5, 1), got {alpha}")));
    }
    Ok(())
}

/// α-quantile of the standard normal.
pub fn f_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(inverse_normal_cdf(alpha))
}

/// One-sided Chebyshev coefficient √(α/(1−α)).
///
/// `1 − α` carries the representation error of a decimal α such as 0.9, so
/// the odds are rounded to 14 significant digits before the square root;
/// this makes `c_alpha(0.9)` exactly 3.
pub fn c_alpha(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let odds: f64 = format!("{:.13e}", alpha / (1.0 - alpha))
        .parse()
        .expect("formatted float parses");
    Ok(odds.sqrt())
}

/// Ensemble profit moments of one parcel in one period.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfitStats {
    pub mean: f64,
    pub variance: f64,
    pub members: Vec<f64>,
}

impl ProfitStats {
    pub fn from_members(members: Vec<f64>) -> Self {
        let mean = ensemble_mean(&members);
        let variance = members.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / members.len() as f64;
        Self {
            mean,
            variance,
            members,
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// Per-member profit of milling `parcel` in period `t`.
pub fn parcel_profit_stats(parcel: &Parcel, t: usize, econ: &EconomicConfig) -> ProfitStats {
    let members = parcel
        .grades
        .iter()
        .map(|g| econ.parcel_profit(parcel, Destination::Mill, *g, t))
        .collect();
    ProfitStats::from_members(members)
}

pub fn pair_covariance(a: &ProfitStats, b: &ProfitStats) -> Result<f64> {
    if a.members.len() != b.members.len() {
        return Err(Error::MemberMismatch {
            expected: a.members.len(),
            found: b.members.len(),
        });
    }
    let sum: f64 = a
        .members
        .iter()
        .zip(&b.members)
        .map(|(x, y)| (x - a.mean) * (y - b.mean))
        .sum();
    Ok(sum / a.members.len() as f64)
}

/// Variance and pairwise covariance totals of one period's milled set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PeriodRisk {
    /// Σ σ² over the set.
    pub variance: f64,
    /// Σ over ordered distinct pairs of the pair covariance.
    pub covariance: f64,
}

impl PeriodRisk {
    /// √(Var + max(0, Cov)).
    pub fn standard_variance(&self) -> f64 {
        (self.variance + self.covariance.max(0.0)).max(0.0).sqrt()
    }
}

/// Variance and covariance totals by explicit pairwise summation.
pub fn period_risk(set: &[ProfitStats]) -> Result<PeriodRisk> {
    let mut risk = PeriodRisk::default();
    for (i, a) in set.iter().enumerate() {
        risk.variance += a.variance;
        for (j, b) in set.iter().enumerate() {
            if i != j {
                risk.covariance += pair_covariance(a, b)?;
            }
        }
    }
    Ok(risk)
}

/// Standard Variance of a milled set; 0 for an empty set.
pub fn standard_variance(set: &[ProfitStats]) -> Result<f64> {
    Ok(period_risk(set)?.standard_variance())
}

/// Streams deviations of many profit vectors so the covariance total is
/// `(1/|E|) Σ_e (Σ_b d_b(e))² − Σ_b σ_b²`, linear in the set size.
#[derive(Debug, Clone)]
pub(crate) struct RiskAccumulator {
    deviation_sums: Vec<f64>,
    variance: f64,
    count: usize,
}

impl RiskAccumulator {
    pub(crate) fn new(n_members: usize) -> Self {
        Self {
            deviation_sums: vec![0.0; n_members],
            variance: 0.0,
            count: 0,
        }
    }

    /// Adds `scale ×` the given member profits.
    pub(crate) fn add(&mut self, values: &[f64], scale: f64) {
        let n = self.deviation_sums.len() as f64;
        let mean = ensemble_mean(values);
        let mut var = 0.0;
        for (acc, p) in self.deviation_sums.iter_mut().zip(values) {
            let d = scale * (p - mean);
            *acc += d;
            var += d * d;
        }
        self.variance += var / n;
        self.count += 1;
    }

    pub(crate) fn merge(&mut self, other: &RiskAccumulator) {
        for (a, b) in self.deviation_sums.iter_mut().zip(&other.deviation_sums) {
            *a += b;
        }
        self.variance += other.variance;
        self.count += other.count;
    }

    pub(crate) fn count(&self) -> usize {
        self.count
    }

    pub(crate) fn risk(&self) -> PeriodRisk {
        let n = self.deviation_sums.len() as f64;
        let total: f64 = self.deviation_sums.iter().map(|d| d * d).sum::<f64>() / n;
        PeriodRisk {
            variance: self.variance,
            covariance: total - self.variance,
        }
    }
}

fn milled_accumulators(schedule: &Schedule, parcels: &[Parcel], econ: &EconomicConfig) -> Result<Vec<RiskAccumulator>> {
    let n_members = parcels.first().map(|p| p.grades.len()).unwrap_or(1);
    let mut acc = vec![RiskAccumulator::new(n_members); schedule.horizon()];
    let mut profits = Vec::with_capacity(n_members);
    for entry in &schedule.entries {
        econ.check_period(entry.period)?;
        if entry.destination != Destination::Mill {
            continue;
        }
        let parcel = &parcels[entry.parcel];
        if parcel.grades.len() != n_members {
            return Err(Error::MemberMismatch {
                expected: n_members,
                found: parcel.grades.len(),
            });
        }
        profits.clear();
        profits.extend(
            parcel
                .grades
                .iter()
                .map(|g| econ.parcel_profit(parcel, Destination::Mill, *g, entry.period)),
        );
        acc[entry.period - 1].add(&profits, entry.fraction);
    }
    Ok(acc)
}

/// Standard Variance of each period's milled set, index 0 holding period 1.
pub fn period_standard_variances(schedule: &Schedule, parcels: &[Parcel], econ: &EconomicConfig) -> Result<Vec<f64>> {
    Ok(milled_accumulators(schedule, parcels, econ)?
        .iter()
        .map(|a| a.risk().standard_variance())
        .collect())
}

/// Total Standard Variance of a schedule: the per-period values summed.
pub fn schedule_sv(schedule: &Schedule, parcels: &[Parcel], econ: &EconomicConfig) -> Result<f64> {
    Ok(period_standard_variances(schedule, parcels, econ)?.iter().sum())
}

/// Per-parcel share `coefficient / |X| · SV` of a period's uncertainty risk.
pub fn uncertainty_risk(set_size: usize, coefficient: f64, sv: f64) -> f64 {
    if set_size == 0 {
        return 0.0;
    }
    coefficient / set_size as f64 * sv
}

/// NPV with every milled parcel's profit downrated by its period's
/// uncertainty risk. Profits are taken at the ensemble-mean grade; waste
/// carries no risk.
pub fn discounted_fitness(
    schedule: &Schedule,
    parcels: &[Parcel],
    econ: &EconomicConfig,
    coefficient: f64,
) -> Result<f64> {
    if schedule.horizon() > econ.max_periods {
        return Err(Error::HorizonExceeded {
            required: schedule.horizon(),
            horizon: econ.max_periods,
        });
    }
    let acc = milled_accumulators(schedule, parcels, econ)?;
    let ur: Vec<f64> = acc
        .iter()
        .map(|a| uncertainty_risk(a.count(), coefficient, a.risk().standard_variance()))
        .collect();
    let mut per_period = vec![0.0; schedule.horizon()];
    for entry in &schedule.entries {
        let parcel = &parcels[entry.parcel];
        let t = entry.period;
        let profit = entry.fraction * econ.parcel_profit(parcel, entry.destination, parcel.mean_grade(), t);
        per_period[t - 1] += match entry.destination {
            Destination::Mill => profit - ur[t - 1],
            Destination::Waste => profit,
        };
    }
    Ok(discounted_sum(&per_period, econ.discount_rate))
}

/// Expected value and variance of a selection under a full covariance matrix.
pub fn selection_moments(x: &[bool], mean: &[f64], cov: &[Vec<f64>]) -> Result<(f64, f64)> {
    let n = x.len();
    if mean.len() != n || cov.len() != n || cov.iter().any(|row| row.len() != n) {
        return Err(Error::DimensionMismatch(format!(
            "selection of {n} items with {} means and a {}-row covariance matrix",
            mean.len(),
            cov.len()
        )));
    }
    let expected = (0..n).filter(|&i| x[i]).map(|i| mean[i]).sum();
    let mut variance = 0.0;
    for i in (0..n).filter(|&i| x[i]) {
        variance += cov[i][i];
        for j in (i + 1..n).filter(|&j| x[j]) {
            variance += 2.0 * cov[i][j];
        }
    }
    Ok((expected, variance))
}

/// `E(x) − K_α √Var[x]` with `K_α` from the normal quantile or the Chebyshev bound.
pub fn knapsack_fitness(x: &[bool], mean: &[f64], cov: &[Vec<f64>], mode: RiskMode, alpha: f64) -> Result<f64> {
    let k = match mode {
        RiskMode::Normal => f_alpha(alpha)?,
        RiskMode::Chebyshev => c_alpha(alpha)?,
        RiskMode::None => 0.0,
        RiskMode::Fixed => {
            return Err(Error::param("mode", "knapsack fitness takes normal or chebyshev"));
        }
    };
    let (e, v) = selection_moments(x, mean, cov)?;
    Ok(e - k * v.max(0.0).sqrt())
}

/// A joint distribution of item profits that can be sampled.
pub trait ProfitDistribution {
    fn n_items(&self) -> usize;
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]);
}

/// Independent normal item profits.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentNormal {
    pub mean: Vec<f64>,
    pub std_dev: Vec<f64>,
}

impl IndependentNormal {
    pub fn covariance(&self) -> Vec<Vec<f64>> {
        let n = self.mean.len();
        (0..n)
            .map(|i| (0..n).map(|j| if i == j { self.std_dev[i].powi(2) } else { 0.0 }).collect())
            .collect()
    }
}

impl ProfitDistribution for IndependentNormal {
    fn n_items(&self) -> usize {
        self.mean.len()
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for ((o, m), s) in out.iter_mut().zip(&self.mean).zip(&self.std_dev) {
            let z: f64 = rng.sample(StandardNormal);
            *o = m + s * z;
        }
    }
}

/// Largest `P` with at least `⌈α N⌉` of the values `>= P`.
pub fn empirical_lower_quantile(values: &mut [f64], alpha: f64) -> f64 {
    let n = values.len();
    let need = ((alpha * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let k = n - need;
    let (_, v, _) = values.select_nth_unstable_by(k, f64::total_cmp);
    *v
}

/// Monte-Carlo estimate of the largest profit `P` guaranteed with
/// probability at least `α` by selection `x`.
pub fn chance_constraint_oracle<D: ProfitDistribution, R: Rng + ?Sized>(
    x: &[bool],
    dist: &D,
    alpha: f64,
    samples: usize,
    rng: &mut R,
) -> Result<f64> {
    check_alpha(alpha)?;
    if samples < 10_000 {
        return Err(Error::param("samples", "at least 10^4 samples are required"));
    }
    if x.len() != dist.n_items() {
        return Err(Error::DimensionMismatch(format!(
            "selection of {} items for a {}-item distribution",
            x.len(),
            dist.n_items()
        )));
    }
    let mut draw = vec![0.0; x.len()];
    let mut totals: Vec<f64> = (0..samples)
        .map(|_| {
            dist.sample(rng, &mut draw);
            draw.iter().zip(x).filter(|(_, s)| **s).map(|(p, _)| p).sum()
        })
        .collect();
    Ok(empirical_lower_quantile(&mut totals, alpha))
}
