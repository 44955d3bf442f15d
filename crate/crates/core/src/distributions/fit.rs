//! Maximum-likelihood fitting.
//!
//! Each family starts from a moment estimate (L-moments for the two
//! extreme-value families, ordinary moments for Gamma and Inverse
//! Gaussian) and is refined by Nelder–Mead on the negative log-likelihood
//! in an unconstrained parameterization (log scales, normalized location).
//!
//! Count variates (cluster counts, paths per cluster) are modelled as a
//! continuous draw rounded half away from zero and clamped to at least one.
//! Their likelihood is the probability of each rounding cell, which stays
//! bounded where a continuous density fitted to integer ties would not.

use std::collections::BTreeMap;

use statrs::function::gamma::{gamma, ln_gamma};

use super::{DistributionSpec, Family, SHAPE_ZERO};
use crate::error::{Error, FitFailure, Result};
use crate::optimize::NelderMead;

pub const MIN_FIT_SAMPLES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variate {
    #[default]
    Continuous,
    /// Positive integers produced by [`discretize_count`].
    Count,
}

/// How the GPD lower bound is chosen; it is not estimated by likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum GpdLocation {
    /// `min - 1e-6 * range` for continuous data, `1` for counts.
    #[default]
    Auto,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitOptions {
    pub variate: Variate,
    pub gpd_location: GpdLocation,
    pub optimizer: NelderMead,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            variate: Variate::Continuous,
            gpd_location: GpdLocation::Auto,
            optimizer: NelderMead::default(),
        }
    }
}

impl FitOptions {
    pub fn count() -> Self {
        Self {
            variate: Variate::Count,
            ..Self::default()
        }
    }
}

/// Round half away from zero, then clamp to at least one.
#[inline]
pub(crate) fn discretize_count(x: f64) -> f64 {
    x.round().max(1.0)
}

/// Fits `family` to continuous `samples` by maximum likelihood.
pub fn fit_mle(family: Family, samples: &[f64]) -> Result<DistributionSpec> {
    fit_mle_with(family, samples, &FitOptions::default())
}

pub fn fit_mle_with(
    family: Family,
    samples: &[f64],
    options: &FitOptions,
) -> Result<DistributionSpec> {
    let fail = |reason| Error::Fit {
        family,
        reason,
        best: None,
    };
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(fail(FitFailure::TooFewSamples {
            needed: MIN_FIT_SAMPLES,
            got: samples.len(),
        }));
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(fail(FitFailure::NonFinite));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (min, max) = (sorted[0], sorted[sorted.len() - 1]);
    if min == max {
        return Err(fail(FitFailure::Degenerate));
    }
    if options.variate == Variate::Count {
        if let Some(&bad) = sorted.iter().find(|&&x| x < 1.0 || x.fract() != 0.0) {
            return Err(fail(FitFailure::OutsideSupport(bad)));
        }
    }
    if matches!(family, Family::Gamma | Family::InverseGaussian) && min <= 0.0 {
        return Err(fail(FitFailure::OutsideSupport(min)));
    }

    let problem = Problem::new(family, &sorted, options)?;
    if let Some(spec) = problem.closed_form {
        return Ok(spec);
    }

    let mut x0 = problem.initial.clone();
    if !problem.nll(&x0).is_finite() {
        // Pull the shape toward zero until every sample is in support.
        if let Some(shape) = problem.shape_index {
            for _ in 0..64 {
                x0[shape] *= 0.5;
                if problem.nll(&x0).is_finite() {
                    break;
                }
            }
        }
        if !problem.nll(&x0).is_finite() {
            return Err(fail(FitFailure::Infeasible));
        }
    }

    let min = options
        .optimizer
        .minimize(|x| problem.nll(x), &x0, &problem.step, None);
    let best = problem.to_spec(&min.x);
    match best {
        Some(spec) if min.converged => Ok(spec),
        best => Err(Error::Fit {
            family,
            reason: FitFailure::NonConvergence(min.evals),
            best: best.map(Box::new),
        }),
    }
}

struct Problem<'a> {
    family: Family,
    data: Data<'a>,
    /// Location/scale used to normalize the GEV location coordinate.
    loc0: f64,
    scale0: f64,
    gpd_location: f64,
    initial: Vec<f64>,
    step: Vec<f64>,
    shape_index: Option<usize>,
    closed_form: Option<DistributionSpec>,
}

enum Data<'a> {
    Continuous {
        x: &'a [f64],
        sum: f64,
        sum_ln: f64,
        sum_inv: f64,
    },
    /// `(value, multiplicity)` pairs of a count sample.
    Counts(Vec<(f64, f64)>),
}

impl<'a> Problem<'a> {
    fn new(family: Family, sorted: &'a [f64], options: &FitOptions) -> Result<Self> {
        let n = sorted.len() as f64;
        let data = match options.variate {
            Variate::Continuous => {
                let (mut sum, mut sum_ln, mut sum_inv) = (0.0, 0.0, 0.0);
                for &x in sorted {
                    sum += x;
                    if x > 0.0 {
                        sum_ln += x.ln();
                        sum_inv += 1.0 / x;
                    }
                }
                Data::Continuous {
                    x: sorted,
                    sum,
                    sum_ln,
                    sum_inv,
                }
            }
            Variate::Count => {
                let mut counts: BTreeMap<u64, f64> = BTreeMap::new();
                for &x in sorted {
                    *counts.entry(x as u64).or_default() += 1.0;
                }
                Data::Counts(counts.into_iter().map(|(v, c)| (v as f64, c)).collect())
            }
        };
        let mean = sorted.iter().sum::<f64>() / n;
        let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let min = sorted[0];
        let range = sorted[sorted.len() - 1] - min;
        let gpd_location = match (options.gpd_location, options.variate) {
            (GpdLocation::Fixed(t), _) => t,
            (GpdLocation::Auto, Variate::Count) => 1.0,
            (GpdLocation::Auto, Variate::Continuous) => min - 1e-6 * range,
        };

        let mut problem = Problem {
            family,
            data,
            loc0: 0.0,
            scale0: 1.0,
            gpd_location,
            initial: vec![],
            step: vec![],
            shape_index: None,
            closed_form: None,
        };

        match family {
            Family::Gev => {
                let (k, sigma, mu) = gev_lmoments(sorted);
                problem.loc0 = mu;
                problem.scale0 = sigma;
                problem.initial = vec![k, sigma.ln(), 0.0];
                problem.step = vec![0.1, 0.2, 0.2];
                problem.shape_index = Some(0);
            }
            Family::Gpd => {
                let (k, sigma) = gpd_lmoments(sorted, gpd_location);
                problem.initial = vec![k, sigma.ln()];
                problem.step = vec![0.1, 0.2];
                problem.shape_index = Some(0);
            }
            Family::Gamma => {
                let shape = mean * mean / var;
                let scale = var / mean;
                problem.initial = vec![shape.ln(), scale.ln()];
                problem.step = vec![0.2, 0.2];
            }
            Family::InverseGaussian => {
                let shape = mean * mean * mean / var;
                problem.initial = vec![mean.ln(), shape.ln()];
                problem.step = vec![0.2, 0.2];
            }
            Family::PointMass => {
                let median = sorted[(sorted.len() - 1) / 2];
                problem.closed_form = Some(DistributionSpec::point_mass(median)?);
            }
        }
        Ok(problem)
    }

    fn to_spec(&self, x: &[f64]) -> Option<DistributionSpec> {
        let spec = match self.family {
            Family::Gev => {
                DistributionSpec::gev(x[0], x[1].exp(), self.loc0 + self.scale0 * x[2])
            }
            Family::Gpd => DistributionSpec::gpd(x[0], x[1].exp(), self.gpd_location),
            Family::Gamma => DistributionSpec::gamma(x[0].exp(), x[1].exp()),
            Family::InverseGaussian => DistributionSpec::inverse_gaussian(x[0].exp(), x[1].exp()),
            Family::PointMass => return self.closed_form,
        };
        spec.ok()
    }

    fn nll(&self, x: &[f64]) -> f64 {
        // Shapes at or below -1 make the likelihood unbounded at the upper endpoint.
        if let Some(i) = self.shape_index {
            if !(x[i] > -1.0 && x[i] < 5.0) {
                return f64::INFINITY;
            }
        }
        let Some(spec) = self.to_spec(x) else {
            return f64::INFINITY;
        };
        match &self.data {
            Data::Continuous {
                x: data,
                sum,
                sum_ln,
                sum_inv,
            } => {
                let n = data.len() as f64;
                match self.family {
                    Family::Gev => gev_nll(data, x[0], x[1].exp(), self.loc0 + self.scale0 * x[2]),
                    Family::Gpd => gpd_nll(data, x[0], x[1].exp(), self.gpd_location),
                    Family::Gamma => {
                        let (a, b) = (x[0].exp(), x[1].exp());
                        n * (ln_gamma(a) + a * b.ln()) - (a - 1.0) * sum_ln + sum / b
                    }
                    Family::InverseGaussian => {
                        let (m, l) = (x[0].exp(), x[1].exp());
                        -0.5 * n * l.ln()
                            + 1.5 * sum_ln
                            + 0.5 * n * (2.0 * std::f64::consts::PI).ln()
                            + l / (2.0 * m * m) * (sum - 2.0 * m * n + m * m * sum_inv)
                    }
                    Family::PointMass => f64::INFINITY,
                }
            }
            Data::Counts(counts) => counts
                .iter()
                .map(|&(v, c)| {
                    let p = count_probability(&spec, v);
                    if p > 0.0 {
                        -c * p.ln()
                    } else {
                        f64::INFINITY
                    }
                })
                .sum(),
        }
    }
}

/// Probability that a rounded-and-clamped draw from `spec` equals `v >= 1`.
pub(crate) fn count_probability(spec: &DistributionSpec, v: f64) -> f64 {
    let hi = v + 0.5;
    if v <= 1.0 {
        return spec.cdf(hi);
    }
    let lo = v - 0.5;
    let f_lo = spec.cdf(lo);
    if f_lo > 0.5 {
        spec.sf(lo) - spec.sf(hi)
    } else {
        spec.cdf(hi) - f_lo
    }
}

fn gev_nll(x: &[f64], k: f64, sigma: f64, mu: f64) -> f64 {
    let n = x.len() as f64;
    let mut acc = n * sigma.ln();
    if k.abs() < SHAPE_ZERO {
        for &xi in x {
            let z = (xi - mu) / sigma;
            acc += z + (-z).exp();
        }
        return acc;
    }
    let inv_k = 1.0 / k;
    for &xi in x {
        let s = k * (xi - mu) / sigma;
        if s <= -1.0 {
            return f64::INFINITY;
        }
        let l = s.ln_1p();
        acc += (1.0 + inv_k) * l + (-inv_k * l).exp();
    }
    acc
}

fn gpd_nll(x: &[f64], k: f64, sigma: f64, theta: f64) -> f64 {
    let n = x.len() as f64;
    let mut acc = n * sigma.ln();
    if k.abs() < SHAPE_ZERO {
        for &xi in x {
            let z = (xi - theta) / sigma;
            if z < 0.0 {
                return f64::INFINITY;
            }
            acc += z;
        }
        return acc;
    }
    let c = 1.0 + 1.0 / k;
    for &xi in x {
        let z = (xi - theta) / sigma;
        let s = k * z;
        if z < 0.0 || s <= -1.0 {
            return f64::INFINITY;
        }
        acc += c * s.ln_1p();
    }
    acc
}

/// Sample L-moments `(λ1, λ2, λ3)` of sorted data.
fn lmoments(sorted: &[f64]) -> (f64, f64, f64) {
    let n = sorted.len() as f64;
    let (mut b0, mut b1, mut b2) = (0.0, 0.0, 0.0);
    for (i, &x) in sorted.iter().enumerate() {
        let i = i as f64;
        b0 += x;
        b1 += x * i / (n - 1.0);
        b2 += x * i * (i - 1.0) / ((n - 1.0) * (n - 2.0));
    }
    b0 /= n;
    b1 /= n;
    b2 /= n;
    (b0, 2.0 * b1 - b0, 6.0 * b2 - 6.0 * b1 + b0)
}

/// Hosking's L-moment GEV estimator, returned as `(k, σ, μ)` in the
/// heavy-tail-positive shape convention.
fn gev_lmoments(sorted: &[f64]) -> (f64, f64, f64) {
    let (l1, l2, l3) = lmoments(sorted);
    let l2 = l2.max(f64::MIN_POSITIVE);
    let tau3 = (l3 / l2).clamp(-0.9, 0.9);
    let c = 2.0 / (3.0 + tau3) - std::f64::consts::LN_2 / 3f64.ln();
    // Hosking's kappa is the negated shape; keep it where Γ(1 + κ) is finite.
    let kappa = (7.8590 * c + 2.9554 * c * c).clamp(-0.9, 2.0);
    if kappa.abs() < 1e-6 {
        let sigma = l2 / std::f64::consts::LN_2;
        return (0.0, sigma, l1 - 0.577_215_664_901_532_9 * sigma);
    }
    let g = gamma(1.0 + kappa);
    let sigma = l2 * kappa / ((1.0 - 2f64.powf(-kappa)) * g);
    let mu = l1 - sigma * (1.0 - g) / kappa;
    (-kappa, sigma, mu)
}

/// L-moment GPD estimator with known lower bound, as `(k, σ)`.
fn gpd_lmoments(sorted: &[f64], theta: f64) -> (f64, f64) {
    let (l1, l2, _) = lmoments(sorted);
    let m = l1 - theta;
    if l2 <= 0.0 || m <= 0.0 {
        return (0.0, m.abs().max(1e-12));
    }
    let kappa = (m / l2 - 2.0).clamp(-0.9, 0.9);
    let sigma = (1.0 + kappa) * m;
    (-kappa, sigma)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn identical_samples_fail() {
        for family in Family::CONTINUOUS {
            let err = fit_mle(family, &[7.0; 50]).unwrap_err();
            assert!(
                matches!(
                    err,
                    Error::Fit {
                        reason: FitFailure::Degenerate,
                        ..
                    }
                ),
                "{family}: {err}"
            );
        }
    }

    #[test]
    fn too_few_samples_fail() {
        let err = fit_mle(Family::Gamma, &[1.0, 2.0, 3.0]).unwrap_err();
        assert!(matches!(
            err,
            Error::Fit {
                reason: FitFailure::TooFewSamples { .. },
                ..
            }
        ));
    }

    #[test]
    fn positive_families_reject_nonpositive_samples() {
        let mut xs: Vec<f64> = (1..40).map(f64::from).collect();
        xs[3] = -1.0;
        assert!(fit_mle(Family::Gamma, &xs).is_err());
        assert!(fit_mle(Family::InverseGaussian, &xs).is_err());
    }

    #[test]
    fn lmoment_start_is_close_for_gev() {
        let truth = DistributionSpec::gev(0.2, 2.0, 5.0).unwrap();
        let mut xs = truth.sample(50_000, 3);
        xs.sort_by(f64::total_cmp);
        let (k, s, m) = gev_lmoments(&xs);
        assert!((k - 0.2).abs() < 0.05, "{k}");
        assert!(rel(s, 2.0) < 0.05, "{s}");
        assert!(rel(m, 5.0) < 0.02, "{m}");
    }

    #[test]
    fn recovers_gev_and_gamma() {
        let gev = DistributionSpec::gev(0.5, 2.0, 2.0).unwrap();
        let fit = fit_mle(Family::Gev, &gev.sample(100_000, 11)).unwrap();
        for (a, b) in fit.params().iter().zip(gev.params()) {
            assert!(rel(*a, b) < 0.05, "{fit}");
        }
        let gam = DistributionSpec::gamma(2.0, 3.0).unwrap();
        let fit = fit_mle(Family::Gamma, &gam.sample(100_000, 12)).unwrap();
        for (a, b) in fit.params().iter().zip(gam.params()) {
            assert!(rel(*a, b) < 0.05, "{fit}");
        }
    }

    #[test]
    fn gpd_location_rules() {
        let truth = DistributionSpec::gpd(0.2, 1.5, 4.0).unwrap();
        let xs = truth.sample(5_000, 5);
        let min = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let fit = fit_mle(Family::Gpd, &xs).unwrap();
        assert!(fit.params()[2] < min && fit.params()[2] > min - 1e-3);

        let fixed = FitOptions {
            gpd_location: GpdLocation::Fixed(4.0),
            ..Default::default()
        };
        assert_eq!(fit_mle_with(Family::Gpd, &xs, &fixed).unwrap().params()[2], 4.0);
    }

    #[test]
    fn count_fit_recovers_discretized_gpd() {
        let truth = DistributionSpec::gpd(-0.2, 3.0, 1.0).unwrap();
        let counts: Vec<f64> = truth
            .sample(50_000, 8)
            .into_iter()
            .map(discretize_count)
            .collect();
        let fit = fit_mle_with(Family::Gpd, &counts, &FitOptions::count()).unwrap();
        let p = fit.params();
        assert!((p[0] + 0.2).abs() < 0.03, "{fit}");
        assert!(rel(p[1], 3.0) < 0.05, "{fit}");
        assert_eq!(p[2], 1.0);
    }

    #[test]
    fn count_fit_rejects_non_integers() {
        let xs: Vec<f64> = (0..30).map(|i| 1.5 + i as f64).collect();
        assert!(fit_mle_with(Family::Gev, &xs, &FitOptions::count()).is_err());
    }

    #[test]
    fn count_probabilities_sum_to_one() {
        let spec = DistributionSpec::gev(0.4, 1.2, 2.0).unwrap();
        let total: f64 = (1..200_000).map(|v| count_probability(&spec, v as f64)).sum();
        assert!((total - 1.0).abs() < 1e-4, "{total}");
    }

    #[test]
    fn non_convergence_carries_best_iterate() {
        let gev = DistributionSpec::gev(0.3, 1.0, 0.0).unwrap();
        let options = FitOptions {
            optimizer: NelderMead {
                max_evals: 8,
                ..Default::default()
            },
            ..Default::default()
        };
        match fit_mle_with(Family::Gev, &gev.sample(500, 1), &options) {
            Err(Error::Fit {
                reason: FitFailure::NonConvergence(_),
                best: Some(_),
                ..
            }) => {}
            other => panic!("{other:?}"),
        }
    }
}
