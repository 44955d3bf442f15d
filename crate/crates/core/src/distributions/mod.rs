//! The five distribution families of the model, with closed-form CDFs,
//! quantiles, inverse-transform sampling, maximum-likelihood fitting and
//! goodness-of-fit selection.
//!
//! Shape conventions follow the extreme-value literature with a positive
//! shape meaning a heavy right tail:
//!
//! * GEV: `F(x) = exp(-(1 + k (x - μ) / σ)^(-1/k))`
//! * GPD: `F(x) = 1 - (1 + k (x - θ) / σ)^(-1/k)` for `x >= θ`
//!
//! Both switch to their `k = 0` limits (Gumbel, exponential) when
//! `|k| < 1e-12`.

mod fit;
mod gof;
mod special;

use std::fmt;
use std::str::FromStr;

use statrs::function::erf::erfc_inv;
use statrs::function::gamma::{gamma_lr, gamma_ur, ln_gamma};

use crate::error::{Error, Result};
use crate::rng::UniformStream;

pub use fit::{fit_mle, fit_mle_with, FitOptions, GpdLocation, Variate, MIN_FIT_SAMPLES};
pub use gof::{
    ks_statistic, ks_statistic_discrete, ks_statistic_with, select_family, select_family_with,
    CandidateScore, Selection, MIN_SELECT_SAMPLES,
};

pub(crate) use fit::discretize_count;

/// `|k|` below which GEV/GPD use their `k = 0` limits.
pub const SHAPE_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Family {
    Gev,
    Gpd,
    Gamma,
    InverseGaussian,
    PointMass,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::Gev,
        Family::Gpd,
        Family::Gamma,
        Family::InverseGaussian,
        Family::PointMass,
    ];

    /// The four continuous families compared during fitting.
    pub const CONTINUOUS: [Family; 4] = [
        Family::Gev,
        Family::Gpd,
        Family::Gamma,
        Family::InverseGaussian,
    ];

    pub fn n_params(self) -> usize {
        self.param_names().len()
    }

    /// Parameter names in the order used by [`DistributionSpec::params`].
    pub fn param_names(self) -> &'static [&'static str] {
        match self {
            Family::Gev => &["shape", "scale", "location"],
            Family::Gpd => &["shape", "scale", "location"],
            Family::Gamma => &["shape", "scale"],
            Family::InverseGaussian => &["mean", "shape"],
            Family::PointMass => &["value"],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Family::Gev => "GEV",
            Family::Gpd => "GPD",
            Family::Gamma => "Gamma",
            Family::InverseGaussian => "InverseGaussian",
            Family::PointMass => "PointMass",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "GEV" => Ok(Family::Gev),
            "GPD" => Ok(Family::Gpd),
            "Gamma" => Ok(Family::Gamma),
            "InverseGaussian" => Ok(Family::InverseGaussian),
            "PointMass" => Ok(Family::PointMass),
            other => Err(Error::InvalidInput(format!("unknown family `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Kind {
    Gev { shape: f64, scale: f64, location: f64 },
    Gpd { shape: f64, scale: f64, location: f64 },
    Gamma { shape: f64, scale: f64 },
    InverseGaussian { mean: f64, shape: f64 },
    PointMass { value: f64 },
}

/// A validated member of one of the five families.
///
/// Construction rejects non-finite parameters and non-positive scales, so
/// every value of this type has a proper CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSpec {
    kind: Kind,
}

fn check(family: Family, name: &'static str, value: f64, positive: bool) -> Result<()> {
    if !value.is_finite() || (positive && value <= 0.0) {
        Err(Error::InvalidParameter {
            family,
            name,
            value,
        })
    } else {
        Ok(())
    }
}

impl DistributionSpec {
    pub fn gev(shape: f64, scale: f64, location: f64) -> Result<Self> {
        check(Family::Gev, "shape", shape, false)?;
        check(Family::Gev, "scale", scale, true)?;
        check(Family::Gev, "location", location, false)?;
        Ok(Self {
            kind: Kind::Gev {
                shape,
                scale,
                location,
            },
        })
    }

    pub fn gpd(shape: f64, scale: f64, location: f64) -> Result<Self> {
        check(Family::Gpd, "shape", shape, false)?;
        check(Family::Gpd, "scale", scale, true)?;
        check(Family::Gpd, "location", location, false)?;
        Ok(Self {
            kind: Kind::Gpd {
                shape,
                scale,
                location,
            },
        })
    }

    pub fn gamma(shape: f64, scale: f64) -> Result<Self> {
        check(Family::Gamma, "shape", shape, true)?;
        check(Family::Gamma, "scale", scale, true)?;
        Ok(Self {
            kind: Kind::Gamma { shape, scale },
        })
    }

    pub fn inverse_gaussian(mean: f64, shape: f64) -> Result<Self> {
        check(Family::InverseGaussian, "mean", mean, true)?;
        check(Family::InverseGaussian, "shape", shape, true)?;
        Ok(Self {
            kind: Kind::InverseGaussian { mean, shape },
        })
    }

    pub fn point_mass(value: f64) -> Result<Self> {
        check(Family::PointMass, "value", value, false)?;
        Ok(Self {
            kind: Kind::PointMass { value },
        })
    }

    /// Builds a spec from parameters in [`Family::param_names`] order.
    pub fn from_params(family: Family, params: &[f64]) -> Result<Self> {
        if params.len() != family.n_params() {
            return Err(Error::InvalidInput(format!(
                "{family} takes {} parameters, got {}",
                family.n_params(),
                params.len()
            )));
        }
        match family {
            Family::Gev => Self::gev(params[0], params[1], params[2]),
            Family::Gpd => Self::gpd(params[0], params[1], params[2]),
            Family::Gamma => Self::gamma(params[0], params[1]),
            Family::InverseGaussian => Self::inverse_gaussian(params[0], params[1]),
            Family::PointMass => Self::point_mass(params[0]),
        }
    }

    pub fn family(&self) -> Family {
        match self.kind {
            Kind::Gev { .. } => Family::Gev,
            Kind::Gpd { .. } => Family::Gpd,
            Kind::Gamma { .. } => Family::Gamma,
            Kind::InverseGaussian { .. } => Family::InverseGaussian,
            Kind::PointMass { .. } => Family::PointMass,
        }
    }

    pub fn params(&self) -> Vec<f64> {
        match self.kind {
            Kind::Gev {
                shape,
                scale,
                location,
            }
            | Kind::Gpd {
                shape,
                scale,
                location,
            } => vec![shape, scale, location],
            Kind::Gamma { shape, scale } => vec![shape, scale],
            Kind::InverseGaussian { mean, shape } => vec![mean, shape],
            Kind::PointMass { value } => vec![value],
        }
    }

    /// Closed support interval `(lo, hi)`; either end may be infinite.
    pub fn support(&self) -> (f64, f64) {
        match self.kind {
            Kind::Gev {
                shape,
                scale,
                location,
            } => {
                if shape.abs() < SHAPE_ZERO {
                    (f64::NEG_INFINITY, f64::INFINITY)
                } else if shape > 0.0 {
                    (location - scale / shape, f64::INFINITY)
                } else {
                    (f64::NEG_INFINITY, location - scale / shape)
                }
            }
            Kind::Gpd {
                shape,
                scale,
                location,
            } => {
                if shape < -SHAPE_ZERO {
                    (location, location - scale / shape)
                } else {
                    (location, f64::INFINITY)
                }
            }
            Kind::Gamma { .. } | Kind::InverseGaussian { .. } => (0.0, f64::INFINITY),
            Kind::PointMass { value } => (value, value),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.kind {
            Kind::Gev {
                shape,
                scale,
                location,
            } => match gev_t(shape, (x - location) / scale) {
                GevT::Below => 0.0,
                GevT::Above => 1.0,
                GevT::Inside(ln_t) => (-ln_t.exp()).exp(),
            },
            Kind::Gpd {
                shape,
                scale,
                location,
            } => match gpd_ln_sf(shape, (x - location) / scale) {
                Some(ln_sf) => -ln_sf.exp_m1(),
                None if x < location => 0.0,
                None => 1.0,
            },
            Kind::Gamma { shape, scale } => {
                if x <= 0.0 {
                    0.0
                } else {
                    gamma_lr(shape, x / scale)
                }
            }
            Kind::InverseGaussian { mean, shape } => ig_cdf(mean, shape, x),
            Kind::PointMass { value } => {
                if x < value {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }

    /// Survival function `1 - F(x)`, evaluated without cancellation where
    /// the family allows it.
    pub fn sf(&self, x: f64) -> f64 {
        match self.kind {
            Kind::Gev {
                shape,
                scale,
                location,
            } => match gev_t(shape, (x - location) / scale) {
                GevT::Below => 1.0,
                GevT::Above => 0.0,
                GevT::Inside(ln_t) => -(-ln_t.exp()).exp_m1(),
            },
            Kind::Gpd {
                shape,
                scale,
                location,
            } => match gpd_ln_sf(shape, (x - location) / scale) {
                Some(ln_sf) => ln_sf.exp(),
                None if x < location => 1.0,
                None => 0.0,
            },
            Kind::Gamma { shape, scale } => {
                if x <= 0.0 {
                    1.0
                } else {
                    gamma_ur(shape, x / scale)
                }
            }
            Kind::InverseGaussian { mean, shape } => ig_sf(mean, shape, x),
            Kind::PointMass { value } => {
                if x < value {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Natural log of the density; `-inf` outside the support. A point mass
    /// has no density and returns `-inf` everywhere.
    pub fn ln_pdf(&self, x: f64) -> f64 {
        match self.kind {
            Kind::Gev {
                shape,
                scale,
                location,
            } => match gev_t(shape, (x - location) / scale) {
                GevT::Inside(ln_t) => -scale.ln() + (shape + 1.0) * ln_t - ln_t.exp(),
                _ => f64::NEG_INFINITY,
            },
            Kind::Gpd {
                shape,
                scale,
                location,
            } => {
                let z = (x - location) / scale;
                if z < 0.0 {
                    return f64::NEG_INFINITY;
                }
                if shape.abs() < SHAPE_ZERO {
                    -scale.ln() - z
                } else {
                    let s = shape * z;
                    if s <= -1.0 {
                        f64::NEG_INFINITY
                    } else {
                        -scale.ln() - (1.0 / shape + 1.0) * s.ln_1p()
                    }
                }
            }
            Kind::Gamma { shape, scale } => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    -ln_gamma(shape) - shape * scale.ln() + (shape - 1.0) * x.ln() - x / scale
                }
            }
            Kind::InverseGaussian { mean, shape } => {
                if x <= 0.0 {
                    f64::NEG_INFINITY
                } else {
                    0.5 * (shape / (2.0 * std::f64::consts::PI * x * x * x)).ln()
                        - shape * (x - mean) * (x - mean) / (2.0 * mean * mean * x)
                }
            }
            Kind::PointMass { .. } => f64::NEG_INFINITY,
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        self.ln_pdf(x).exp()
    }

    /// Inverse CDF. `p` must lie strictly between 0 and 1.
    pub fn quantile(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::ProbabilityOutOfRange(p));
        }
        Ok(self.quantile_unchecked(p))
    }

    pub(crate) fn quantile_unchecked(&self, p: f64) -> f64 {
        match self.kind {
            Kind::Gev {
                shape,
                scale,
                location,
            } => {
                let y = -p.ln();
                if shape.abs() < SHAPE_ZERO {
                    location - scale * y.ln()
                } else {
                    location + scale * (-shape * y.ln()).exp_m1() / shape
                }
            }
            Kind::Gpd {
                shape,
                scale,
                location,
            } => {
                let ln_sf = (-p).ln_1p();
                if shape.abs() < SHAPE_ZERO {
                    location - scale * ln_sf
                } else {
                    location + scale * (-shape * ln_sf).exp_m1() / shape
                }
            }
            Kind::Gamma { .. } | Kind::InverseGaussian { .. } => self.numeric_quantile(p),
            Kind::PointMass { value } => value,
        }
    }

    fn numeric_quantile(&self, p: f64) -> f64 {
        let z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
        let guess = match self.kind {
            Kind::Gamma { shape, scale } => {
                let c = 1.0 / (9.0 * shape);
                let wh = shape * (1.0 - c + z * c.sqrt()).powi(3);
                if wh > 0.0 {
                    wh * scale
                } else {
                    scale * (p * shape * ln_gamma(shape).exp()).powf(1.0 / shape)
                }
            }
            Kind::InverseGaussian { mean, shape } => {
                let normal = mean + z * (mean * mean * mean / shape).sqrt();
                if normal > 0.0 {
                    normal
                } else {
                    0.5 * mean
                }
            }
            _ => unreachable!("closed-form families do not use the numeric inverse"),
        };
        let pdf = |x: f64| self.pdf(x);
        if p <= 0.5 {
            special::solve_increasing(|x| self.cdf(x) - p, pdf, 0.0, f64::INFINITY, guess)
        } else {
            let q = 1.0 - p;
            special::solve_increasing(|x| q - self.sf(x), pdf, 0.0, f64::INFINITY, guess)
        }
    }

    /// One inverse-transform draw from `stream`.
    #[inline]
    pub fn draw(&self, stream: &mut UniformStream) -> f64 {
        self.quantile_unchecked(stream.next_open01())
    }

    /// `n` draws from stream `(seed, 0)`. Identical arguments give
    /// bit-identical output.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<f64> {
        let mut stream = UniformStream::new(seed, 0);
        (0..n).map(|_| self.draw(&mut stream)).collect()
    }
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let family = self.family();
        write!(f, "{family}(")?;
        for (i, (name, value)) in family.param_names().iter().zip(self.params()).enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{name}={value:.6e}")?;
        }
        f.write_str(")")
    }
}

enum GevT {
    Below,
    Above,
    /// `ln t(x)` where `F = exp(-t)`.
    Inside(f64),
}

fn gev_t(shape: f64, z: f64) -> GevT {
    if shape.abs() < SHAPE_ZERO {
        return GevT::Inside(-z);
    }
    let s = shape * z;
    if s <= -1.0 {
        return if shape > 0.0 { GevT::Below } else { GevT::Above };
    }
    GevT::Inside(-s.ln_1p() / shape)
}

/// `ln(1 - F)` for the GPD at standardized `z`, or `None` outside the support.
fn gpd_ln_sf(shape: f64, z: f64) -> Option<f64> {
    if z < 0.0 {
        return None;
    }
    if shape.abs() < SHAPE_ZERO {
        return Some(-z);
    }
    let s = shape * z;
    if s <= -1.0 {
        None
    } else {
        Some(-s.ln_1p() / shape)
    }
}

fn ig_terms(mean: f64, shape: f64, x: f64) -> (f64, f64) {
    let r = (shape / x).sqrt();
    let a = r * (x / mean - 1.0);
    let b = r * (x / mean + 1.0);
    // exp(2λ/m) Φ(-b), combined in log space to avoid overflow.
    let tail = (2.0 * shape / mean + special::ln_norm_sf(b)).exp();
    (a, tail)
}

fn ig_cdf(mean: f64, shape: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let (a, tail) = ig_terms(mean, shape, x);
    (special::norm_cdf(a) + tail).min(1.0)
}

fn ig_sf(mean: f64, shape: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let (a, tail) = ig_terms(mean, shape, x);
    (special::norm_cdf(-a) - tail).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gpd_example() -> DistributionSpec {
        DistributionSpec::gpd(-0.36, 2.32, 1.0).unwrap()
    }

    #[test]
    fn gev_cdf_at_location_is_inverse_e() {
        for k in [-0.7, -1e-13, 0.0, 0.31, 0.93, 2.0] {
            let d = DistributionSpec::gev(k, 2.0, 2.0).unwrap();
            assert!((d.cdf(2.0) - (-1f64).exp()).abs() < 1e-15, "k={k}");
        }
    }

    #[test]
    fn gpd_example_values() {
        let d = gpd_example();
        assert_eq!(d.cdf(1.0), 0.0);
        let analytic = 1.0 - (1.0 - 0.36 * 2.0 / 2.32f64).powf(1.0 / 0.36);
        assert!((d.cdf(3.0) - analytic).abs() < 1e-15);
        assert!((d.cdf(3.0) - 0.644).abs() < 5e-4);
    }

    #[test]
    fn gpd_example_cdf_matches_integrated_density() {
        // Composite Simpson on [1, 3] as an independent route to F(3).
        let d = gpd_example();
        let n = 20_000;
        let h = 2.0 / n as f64;
        let mut acc = d.pdf(1.0) + d.pdf(3.0);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * d.pdf(1.0 + i as f64 * h);
        }
        let integral = acc * h / 3.0;
        assert!((integral - d.cdf(3.0)).abs() < 1e-10);
    }

    #[test]
    fn bounded_gpd_is_one_above_its_endpoint() {
        let d = gpd_example();
        let (_, hi) = d.support();
        assert!((hi - (1.0 + 2.32 / 0.36)).abs() < 1e-12);
        assert_eq!(d.cdf(hi + 1e-9), 1.0);
        assert_eq!(d.cdf(1e6), 1.0);
        assert_eq!(d.sf(1e6), 0.0);
    }

    #[test]
    fn quantile_examples() {
        for k in [-0.5, 0.0, 0.5] {
            let d = DistributionSpec::gev(k, 1.7, 3.1).unwrap();
            let q = d.quantile((-1f64).exp()).unwrap();
            assert!((q - 3.1).abs() < 1e-12, "k={k}: {q}");
        }
        let median = gpd_example().quantile(0.5).unwrap();
        // Oracle: bisection on the CDF.
        let (mut lo, mut hi) = (1.0, 10.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gpd_example().cdf(mid) < 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((median - lo).abs() < 1e-12);
        assert!((median - 2.42).abs() < 5e-3);
        assert_eq!(DistributionSpec::point_mass(5.0).unwrap().quantile(0.5).unwrap(), 5.0);
    }

    #[test]
    fn quantile_rejects_probabilities_outside_open_interval() {
        let d = gpd_example();
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(matches!(d.quantile(p), Err(Error::ProbabilityOutOfRange(_))));
        }
    }

    #[test]
    fn construction_rejects_bad_scales() {
        assert!(DistributionSpec::gev(0.1, 0.0, 1.0).is_err());
        assert!(DistributionSpec::gpd(0.1, -1.0, 1.0).is_err());
        assert!(DistributionSpec::gamma(0.0, 1.0).is_err());
        assert!(DistributionSpec::gamma(1.0, -2.0).is_err());
        assert!(DistributionSpec::inverse_gaussian(1.0, 0.0).is_err());
        assert!(DistributionSpec::inverse_gaussian(-1.0, 1.0).is_err());
        assert!(DistributionSpec::gev(f64::NAN, 1.0, 1.0).is_err());
        assert!(DistributionSpec::point_mass(f64::INFINITY).is_err());
    }

    #[test]
    fn point_mass_is_a_step() {
        let d = DistributionSpec::point_mass(3.0).unwrap();
        assert_eq!(d.cdf(2.999), 0.0);
        assert_eq!(d.cdf(3.0), 1.0);
        assert_eq!(d.sample(4, 99), vec![3.0; 4]);
        assert!(d.sample(0, 1).is_empty());
    }

    #[test]
    fn gumbel_limit_is_continuous_in_shape() {
        let zero = DistributionSpec::gev(0.0, 1.0, 0.0).unwrap();
        let tiny = DistributionSpec::gev(1e-9, 1.0, 0.0).unwrap();
        for x in [-2.0, 0.0, 1.5, 4.0] {
            assert!((zero.cdf(x) - tiny.cdf(x)).abs() < 1e-8);
        }
        let exp0 = DistributionSpec::gpd(0.0, 2.0, 0.0).unwrap();
        assert!((exp0.cdf(2.0) - (1.0 - (-1f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn gamma_and_inverse_gaussian_quantiles_invert_cdf() {
        let cases = [
            DistributionSpec::gamma(0.3, 2.0).unwrap(),
            DistributionSpec::gamma(2.0, 3.0).unwrap(),
            DistributionSpec::gamma(80.0, 0.1).unwrap(),
            DistributionSpec::inverse_gaussian(0.07, 0.3).unwrap(),
            DistributionSpec::inverse_gaussian(1.0, 200.0).unwrap(),
        ];
        for d in cases {
            for p in [1e-6, 0.01, 0.25, 0.5, 0.75, 0.99, 1.0 - 1e-6] {
                let x = d.quantile(p).unwrap();
                let back = if p < 0.5 { d.cdf(x) } else { 1.0 - d.sf(x) };
                assert!((back - p).abs() < 1e-12 * p.max(1e-3), "{d} p={p}: {back}");
            }
        }
    }

    #[test]
    fn inverse_gaussian_cdf_reference() {
        // scipy.stats.invgauss(mu=m/λ, scale=λ).cdf(x)
        let d = DistributionSpec::inverse_gaussian(1.0, 2.0).unwrap();
        assert!((d.cdf(1.5) - 0.8244079562051371).abs() < 1e-14);
        assert!((d.cdf(1.5) + d.sf(1.5) - 1.0).abs() < 1e-14);
        let d = DistributionSpec::inverse_gaussian(0.07, 0.3).unwrap();
        assert!((d.cdf(0.05) - 0.3127295839562087).abs() < 1e-14);
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.as_str().parse::<Family>().unwrap(), f);
        }
        assert!("Weibull".parse::<Family>().is_err());
    }
}
