//! Quartile-matching calibration.
//!
//! Parameters are chosen to minimize the weighted sum of squared relative
//! quartile errors. The search is a multi-start Nelder–Mead in internal
//! coordinates: bounded parameters map to `[0, 1]`, unbounded scales to
//! their logarithm, unbounded locations to a shift around a heuristic
//! centre derived from the target.

use super::QuartileTarget;
use crate::distributions::{discretize_count, DistributionSpec, Family};
use crate::error::{Error, Result};
use crate::optimize::NelderMead;
use crate::rng::UniformStream;

pub const DEFAULT_THRESHOLD: f64 = 0.15;
pub const PROBS: [f64; 3] = [0.25, 0.5, 0.75];

/// Weight of the tie-breaking pull toward the target values when a
/// discretized target is met exactly over a whole region.
const PULL: f64 = 1e-4;
/// Weight of the analytic anchor in path-amplitude calibration.
const ANCHOR: f64 = 1e-3;

/// How a continuous quantile maps to the observed quartile.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum QuartileTransform {
    Identity,
    /// Rounded half away from zero, clamped to at least 1.
    Discretized,
    /// Clamped from below, as for delay gaps clamped to one grid period.
    Floor(f64),
    /// Restricted to positive draws, as for redrawn amplitudes.
    PositivePart,
}

impl QuartileTransform {
    fn quantile(self, spec: &DistributionSpec, p: f64) -> f64 {
        match self {
            Self::Identity | Self::Discretized => spec.quantile_unchecked(p),
            Self::Floor(floor) => spec.quantile_unchecked(p).max(floor),
            Self::PositivePart => {
                let f0 = spec.cdf(0.0);
                if f0 >= 1.0 {
                    return f64::NAN;
                }
                let q = spec.quantile_unchecked(f0 + p * (1.0 - f0));
                if q > 0.0 {
                    q
                } else {
                    f64::NAN
                }
            }
        }
    }
}

/// Quartiles a spec produces after `transform`.
pub fn model_quartiles(spec: &DistributionSpec, transform: QuartileTransform) -> [f64; 3] {
    PROBS.map(|p| {
        let q = transform.quantile(spec, p);
        if transform == QuartileTransform::Discretized {
            discretize_count(q)
        } else {
            q
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOptions {
    /// One `(lo, hi)` pair per family parameter; `lo == hi` fixes it.
    pub bounds: Option<Vec<(f64, f64)>>,
    pub transform: QuartileTransform,
    pub weights: [f64; 3],
    pub threshold: f64,
    pub starts: usize,
    pub seed: u64,
    pub optimizer: NelderMead,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        Self {
            bounds: None,
            transform: QuartileTransform::Identity,
            weights: [1.0; 3],
            threshold: DEFAULT_THRESHOLD,
            starts: 12,
            seed: 0x00ca_11b8,
            optimizer: NelderMead {
                max_evals: 3000,
                ftol: 1e-14,
                xtol: 1e-10,
                restarts: 2,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibrated {
    pub spec: DistributionSpec,
    /// Weighted sum of squared relative quartile errors.
    pub residual: f64,
}

/// Calibrates `family` so its quartiles match `target`.
///
/// With `discretize`, quartiles are compared after count discretization and
/// a quartile counts as matched anywhere inside its rounding cell.
pub fn calibrate(
    family: Family,
    target: &QuartileTarget,
    bounds: Option<&[(f64, f64)]>,
    discretize: bool,
) -> Result<Calibrated> {
    let options = CalibrationOptions {
        bounds: bounds.map(<[_]>::to_vec),
        transform: if discretize {
            QuartileTransform::Discretized
        } else {
            QuartileTransform::Identity
        },
        ..CalibrationOptions::default()
    };
    calibrate_with(family, target, &options)
}

pub fn calibrate_with(
    family: Family,
    target: &QuartileTarget,
    options: &CalibrationOptions,
) -> Result<Calibrated> {
    validate_target(target)?;
    let goal = [target.q1, target.q2, target.q3];
    let transform = options.transform;
    let weights = options.weights;
    let pull_goal = spread_ties(&goal);
    let objective = |spec: &DistributionSpec| {
        let fit = quartile_error(spec, &goal, transform, &weights);
        if transform == QuartileTransform::Discretized {
            fit + PULL * relative_error(spec, &pull_goal, QuartileTransform::Identity, &weights)
        } else {
            fit
        }
    };
    let spec = search(family, &goal, options, objective)?;
    let residual = quartile_error(&spec, &goal, transform, &weights);
    finish(spec, residual, options.threshold)
}

/// Calibrates the path-amplitude spec through the cluster composition:
/// path amplitudes are rescaled so their mean equals the cluster amplitude,
/// and it is the rescaled amplitudes whose quartiles must match `target`.
///
/// The rescaling removes the overall scale, so a light anchor on the spec's
/// own quartiles pins it.
pub fn calibrate_path_amplitude(
    family: Family,
    target: &QuartileTarget,
    cluster_amplitude: &DistributionSpec,
    paths_per_cluster: &DistributionSpec,
    max_count: u32,
    options: &CalibrationOptions,
) -> Result<Calibrated> {
    validate_target(target)?;
    let goal = [target.q1, target.q2, target.q3];
    let weights = options.weights;
    let sim = CompositionSim::new(cluster_amplitude, paths_per_cluster, max_count, options.seed);
    let options = &CalibrationOptions {
        starts: options.starts.min(COMPOSITION_STARTS),
        optimizer: NelderMead {
            max_evals: options.optimizer.max_evals.min(COMPOSITION_EVALS),
            ftol: options.optimizer.ftol.max(1e-10),
            xtol: options.optimizer.xtol.max(1e-8),
            restarts: options.optimizer.restarts.min(1),
        },
        ..options.clone()
    };
    let objective = |spec: &DistributionSpec| {
        let fit = sim.error(spec, &goal, &weights);
        fit + ANCHOR * relative_error(spec, &goal, QuartileTransform::PositivePart, &weights)
    };
    let spec = search(family, &goal, options, objective)?;
    let residual = sim.error(&spec, &goal, &weights);
    finish(spec, residual, options.threshold)
}

/// Continuous stand-ins for discretized quartiles: a run of `m` equal
/// counts `q` is spread evenly over the rounding cell `[q - 1/2, q + 1/2)`.
fn spread_ties(goal: &[f64; 3]) -> [f64; 3] {
    let mut out = *goal;
    let mut i = 0;
    while i < 3 {
        let mut j = i;
        while j < 3 && goal[j] == goal[i] {
            j += 1;
        }
        let m = (j - i) as f64;
        if m > 1.0 {
            for (slot, v) in out[i..j].iter_mut().enumerate() {
                *v = goal[i] - 0.5 + (slot as f64 + 0.5) / m;
            }
        }
        i = j;
    }
    out
}

fn finish(spec: DistributionSpec, residual: f64, threshold: f64) -> Result<Calibrated> {
    if !(residual <= threshold) {
        return Err(Error::Calibration {
            residual,
            threshold,
            best: Box::new(spec),
        });
    }
    Ok(Calibrated { spec, residual })
}

fn validate_target(t: &QuartileTarget) -> Result<()> {
    let ok = [t.q1, t.q2, t.q3].iter().all(|q| q.is_finite() && *q > 0.0)
        && t.q1 <= t.q2
        && t.q2 <= t.q3;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidTarget {
            q1: t.q1,
            q2: t.q2,
            q3: t.q3,
        })
    }
}

/// Weighted squared relative error, with discretized quartiles measured
/// from their rounding cell.
pub fn quartile_error(
    spec: &DistributionSpec,
    goal: &[f64; 3],
    transform: QuartileTransform,
    weights: &[f64; 3],
) -> f64 {
    if transform != QuartileTransform::Discretized {
        return relative_error(spec, goal, transform, weights);
    }
    let mut total = 0.0;
    for i in 0..3 {
        let q = spec.quantile_unchecked(PROBS[i]);
        let lo = if goal[i] <= 1.0 {
            f64::NEG_INFINITY
        } else {
            goal[i] - 0.5
        };
        let hi = goal[i] + 0.5;
        let d = if q < lo {
            lo - q
        } else if q >= hi {
            q - hi
        } else {
            0.0
        };
        total += weights[i] * (d / goal[i]).powi(2);
    }
    if total.is_nan() {
        f64::INFINITY
    } else {
        total
    }
}

fn relative_error(
    spec: &DistributionSpec,
    goal: &[f64; 3],
    transform: QuartileTransform,
    weights: &[f64; 3],
) -> f64 {
    let mut total = 0.0;
    for i in 0..3 {
        let q = transform.quantile(spec, PROBS[i]);
        total += weights[i] * ((q - goal[i]) / goal[i]).powi(2);
    }
    if total.is_nan() {
        f64::INFINITY
    } else {
        total
    }
}

#[derive(Debug, Clone, Copy)]
enum Coord {
    Fixed(f64),
    Box(f64, f64),
    Log(f64),
    Shift { center: f64, width: f64 },
    Shape(f64, f64),
}

impl Coord {
    fn value(self, z: f64) -> f64 {
        match self {
            Coord::Fixed(v) => v,
            Coord::Box(lo, hi) => lo + z * (hi - lo),
            Coord::Log(center) => (center + z).exp(),
            Coord::Shift { center, width } => center + z * width,
            Coord::Shape(..) => z,
        }
    }

    fn range(self) -> (f64, f64) {
        match self {
            Coord::Fixed(_) => (0.0, 0.0),
            Coord::Box(..) => (0.0, 1.0),
            Coord::Log(_) => (-20.0, 20.0),
            Coord::Shift { .. } => (-50.0, 50.0),
            Coord::Shape(lo, hi) => (lo, hi),
        }
    }

    fn step(self) -> f64 {
        match self {
            Coord::Fixed(_) => 0.0,
            Coord::Box(..) | Coord::Shape(..) => 0.1,
            Coord::Log(_) | Coord::Shift { .. } => 0.5,
        }
    }

    fn random_start(self, u: f64, first: bool) -> f64 {
        match (self, first) {
            (Coord::Fixed(_), _) => 0.0,
            (Coord::Box(..), true) => 0.5,
            (Coord::Box(..), false) => u,
            (Coord::Shape(lo, _), true) => lo.max(0.1),
            (Coord::Shape(lo, _), false) => lo.max(-0.5) + (1.0 - lo.max(-0.5)) * u,
            (Coord::Log(_) | Coord::Shift { .. }, true) => 0.0,
            (Coord::Log(_) | Coord::Shift { .. }, false) => -2.0 + 4.0 * u,
        }
    }
}

/// Heuristic `[shape, scale, location]`-ordered parameters whose quartiles
/// are roughly those of `goal`.
fn heuristic(family: Family, goal: &[f64; 3]) -> Vec<f64> {
    let [q1, q2, q3] = *goal;
    let iqr = (q3 - q1).max(1e-3 * q2);
    match family {
        Family::Gev => {
            let scale = iqr / 1.5725;
            vec![0.0, scale, q2 + scale * std::f64::consts::LN_2.ln()]
        }
        Family::Gpd => {
            let scale = iqr / 3f64.ln();
            vec![0.0, scale, q2 - scale * std::f64::consts::LN_2]
        }
        Family::Gamma => {
            let sd = iqr / 1.349;
            let shape = (q2 / sd).powi(2);
            vec![shape, q2 / shape]
        }
        Family::InverseGaussian => {
            let sd = iqr / 1.349;
            vec![q2, q2.powi(3) / (sd * sd)]
        }
        Family::PointMass => vec![q2],
    }
}

fn coordinates(
    family: Family,
    goal: &[f64; 3],
    bounds: Option<&[(f64, f64)]>,
    transform: QuartileTransform,
) -> Result<Vec<Coord>> {
    if let Some(b) = bounds {
        if b.len() != family.n_params() {
            return Err(Error::InvalidInput(format!(
                "{family} takes {} bounds, got {}",
                family.n_params(),
                b.len()
            )));
        }
        if b.iter().any(|&(lo, hi)| !(lo <= hi && lo.is_finite() && hi.is_finite())) {
            return Err(Error::InvalidInput("empty or infinite bounds box".into()));
        }
        return Ok(b
            .iter()
            .map(|&(lo, hi)| if lo == hi { Coord::Fixed(lo) } else { Coord::Box(lo, hi) })
            .collect());
    }
    let h = heuristic(family, goal);
    let width = (goal[2] - goal[0]).max(1e-3 * goal[1]);
    Ok(match family {
        // Counts keep a non-negative shape so the upper tail is never cut
        // off below the next integer.
        Family::Gev | Family::Gpd => vec![
            if transform == QuartileTransform::Discretized {
                Coord::Shape(0.0, 5.0)
            } else {
                Coord::Shape(-3.0, 5.0)
            },
            Coord::Log(h[1].ln()),
            Coord::Shift {
                center: h[2],
                width,
            },
        ],
        Family::Gamma | Family::InverseGaussian => vec![Coord::Log(h[0].ln()), Coord::Log(h[1].ln())],
        Family::PointMass => vec![Coord::Shift {
            center: h[0],
            width,
        }],
    })
}

fn search<F>(family: Family, goal: &[f64; 3], options: &CalibrationOptions, objective: F) -> Result<DistributionSpec>
where
    F: Fn(&DistributionSpec) -> f64,
{
    let coords = coordinates(family, goal, options.bounds.as_deref(), options.transform)?;
    let free: Vec<usize> = (0..coords.len())
        .filter(|&i| !matches!(coords[i], Coord::Fixed(_)))
        .collect();
    let build = |z: &[f64]| -> Option<DistributionSpec> {
        let mut params: Vec<f64> = coords.iter().map(|c| c.value(0.0)).collect();
        for (slot, &i) in free.iter().enumerate() {
            params[i] = coords[i].value(z[slot]);
        }
        DistributionSpec::from_params(family, &params).ok()
    };

    if free.is_empty() {
        return build(&[]).ok_or_else(|| Error::InvalidInput("fixed parameters are invalid".into()));
    }

    let ranges: Vec<(f64, f64)> = free.iter().map(|&i| coords[i].range()).collect();
    let steps: Vec<f64> = free.iter().map(|&i| coords[i].step()).collect();
    let f = |z: &[f64]| build(z).map_or(f64::INFINITY, |s| objective(&s));

    let mut rng = UniformStream::new(options.seed, family as u64);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for start in 0..options.starts.max(1) {
        let z0: Vec<f64> = free
            .iter()
            .map(|&i| coords[i].random_start(rng.next_open01(), start == 0))
            .collect();
        let m = options.optimizer.minimize(&f, &z0, &steps, Some(&ranges));
        if best.as_ref().map_or(true, |(v, _)| m.value < *v) {
            best = Some((m.value, m.x));
        }
    }
    let (value, z) = best.expect("at least one start");
    if !value.is_finite() {
        return Err(Error::InvalidInput(format!("no {family} parameters reach the target")));
    }
    Ok(build(&z).expect("finite objective implies a valid spec"))
}

/// Common random numbers for the cluster composition. Path draws use a
/// fixed grid of probabilities so one quantile table per candidate spec
/// serves every cluster.
struct CompositionSim {
    /// Per cluster: amplitude and the path-probability indices.
    clusters: Vec<(f64, Vec<u32>)>,
}

const SIM_CLUSTERS: usize = 2000;
const SIM_GRID: usize = 512;
const COMPOSITION_STARTS: usize = 4;
const COMPOSITION_EVALS: usize = 1500;

impl CompositionSim {
    fn new(cluster_amplitude: &DistributionSpec, paths: &DistributionSpec, max_count: u32, seed: u64) -> Self {
        let mut rng = UniformStream::new(seed, u64::MAX);
        let f0 = cluster_amplitude.cdf(0.0).min(1.0 - 1e-12);
        let clusters = (0..SIM_CLUSTERS)
            .map(|_| {
                let u = rng.next_open01();
                let a = cluster_amplitude.quantile_unchecked(f0 + u * (1.0 - f0));
                let k = discretize_count(paths.draw(&mut rng)).min(max_count as f64) as usize;
                let idx = (0..k)
                    .map(|_| ((rng.next_open01() * SIM_GRID as f64) as u32).min(SIM_GRID as u32 - 1))
                    .collect();
                (a, idx)
            })
            .collect();
        Self { clusters }
    }

    fn error(&self, spec: &DistributionSpec, goal: &[f64; 3], weights: &[f64; 3]) -> f64 {
        let f0 = spec.cdf(0.0);
        if !(f0 < 1.0) {
            return f64::INFINITY;
        }
        let mut table = Vec::with_capacity(SIM_GRID);
        for j in 0..SIM_GRID {
            let p = (j as f64 + 0.5) / SIM_GRID as f64;
            let q = spec.quantile_unchecked(f0 + p * (1.0 - f0));
            if !(q > 0.0 && q.is_finite()) {
                return f64::INFINITY;
            }
            table.push(q);
        }
        let mut pooled = Vec::with_capacity(self.clusters.len() * 4);
        for (a, idx) in &self.clusters {
            let mean = idx.iter().map(|&j| table[j as usize]).sum::<f64>() / idx.len() as f64;
            pooled.extend(idx.iter().map(|&j| a * table[j as usize] / mean));
        }
        let n = pooled.len();
        let mut total = 0.0;
        for i in 0..3 {
            let k = ((PROBS[i] * n as f64).ceil() as usize).clamp(1, n) - 1;
            let (_, q, _) = pooled.select_nth_unstable_by(k, f64::total_cmp);
            total += weights[i] * ((*q - goal[i]) / goal[i]).powi(2);
        }
        total
    }
}
