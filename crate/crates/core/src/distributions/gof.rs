//! Kolmogorov–Smirnov distances and family selection.

use super::fit::{fit_mle_with, FitOptions, Variate};
use super::{DistributionSpec, Family};
use crate::error::{Error, Result};

pub const MIN_SELECT_SAMPLES: usize = 50;

/// Two-sided KS distance between the empirical step CDF of `samples` and
/// `dist`, evaluated exactly on both sides of every step.
///
/// # Panics
///
/// Panics on an empty sample.
pub fn ks_statistic(samples: &[f64], dist: &DistributionSpec) -> f64 {
    assert!(!samples.is_empty(), "KS statistic of an empty sample");
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .fold(0.0f64, |d, (i, &x)| {
            let f = dist.cdf(x);
            let above = (i + 1) as f64 / n - f;
            let below = f - i as f64 / n;
            d.max(above).max(below)
        })
        .clamp(0.0, 1.0)
}

/// KS distance for count data against the rounded-and-clamped model
/// `P(N <= n) = F(n + 1/2)`, taken over every integer in the count range.
///
/// # Panics
///
/// Panics on an empty sample.
pub fn ks_statistic_discrete(counts: &[f64], dist: &DistributionSpec) -> f64 {
    assert!(!counts.is_empty(), "KS statistic of an empty sample");
    let mut sorted = counts.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let model_cdf = |v: f64| if v < 1.0 { 0.0 } else { dist.cdf(v + 0.5) };
    let mut d = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        let v = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == v {
            j += 1;
        }
        // The gap is extremal either at an observed value or just below it.
        let below = i as f64 / n;
        d = d.max((model_cdf(v - 1.0) - below).abs());
        d = d.max((j as f64 / n - model_cdf(v)).abs());
        i = j;
    }
    // Beyond the largest count the empirical CDF is 1 and the model only grows.
    d.clamp(0.0, 1.0)
}

pub fn ks_statistic_with(samples: &[f64], dist: &DistributionSpec, variate: Variate) -> f64 {
    match variate {
        Variate::Continuous => ks_statistic(samples, dist),
        Variate::Count => ks_statistic_discrete(samples, dist),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub family: Family,
    pub fit: Result<DistributionSpec>,
    /// KS distance of the fitted spec; `None` when the fit failed.
    pub score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub best: DistributionSpec,
    pub scores: Vec<CandidateScore>,
}

impl Selection {
    pub fn best_score(&self) -> f64 {
        self.scores
            .iter()
            .find(|s| s.family == self.best.family())
            .and_then(|s| s.score)
            .unwrap_or(f64::NAN)
    }
}

pub fn select_family(samples: &[f64], candidates: &[Family]) -> Result<Selection> {
    select_family_with(samples, candidates, &FitOptions::default())
}

/// Fits every candidate and keeps the one with the smallest KS distance.
/// Ties go to the family with fewer parameters, then to the earlier
/// [`Family`] variant.
pub fn select_family_with(
    samples: &[f64],
    candidates: &[Family],
    options: &FitOptions,
) -> Result<Selection> {
    if samples.len() < MIN_SELECT_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_SELECT_SAMPLES,
            got: samples.len(),
        });
    }
    let mut families = candidates.to_vec();
    families.sort();
    families.dedup();
    if families.len() < 2 {
        return Err(Error::InvalidInput(
            "family selection needs at least two candidates".into(),
        ));
    }

    let scores: Vec<CandidateScore> = families
        .iter()
        .map(|&family| {
            let fit = fit_mle_with(family, samples, options);
            let score = fit
                .as_ref()
                .ok()
                .map(|spec| ks_statistic_with(samples, spec, options.variate));
            CandidateScore { family, fit, score }
        })
        .collect();

    let best = scores
        .iter()
        .filter_map(|s| Some((s.score?, s)))
        .min_by(|(a, sa), (b, sb)| {
            a.total_cmp(b)
                .then(sa.family.n_params().cmp(&sb.family.n_params()))
                .then(sa.family.cmp(&sb.family))
        })
        .and_then(|(_, s)| s.fit.clone().ok())
        .ok_or(Error::Selection)?;

    Ok(Selection { best, scores })
}
