//! Scenario profiles: the eight measured (scenario, beamwidth) settings,
//! their quartile targets, and the calibrated distributions that drive
//! generation.

mod calibrate;
mod targets;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;

pub use calibrate::{
    calibrate, calibrate_path_amplitude, calibrate_with, model_quartiles, quartile_error, Calibrated,
    CalibrationOptions, QuartileTransform, DEFAULT_THRESHOLD, PROBS,
};
pub use targets::{assigned_family, builtin_target, builtin_targets, published_bounds};

use crate::distributions::{DistributionSpec, Family};
use crate::error::{Error, Result};

/// Default tap grid, seconds.
pub const DEFAULT_TAP_GRID: f64 = 0.24e-9;
pub const DEFAULT_MAX_COUNT: u32 = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Scenario {
    Tunnel,
    ExperimentalHall,
    MechanicalRoom,
    SideTunnel,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Tunnel,
        Scenario::ExperimentalHall,
        Scenario::MechanicalRoom,
        Scenario::SideTunnel,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Tunnel => "tunnel",
            Scenario::ExperimentalHall => "exp-hall",
            Scenario::MechanicalRoom => "mechanical-room",
            Scenario::SideTunnel => "side-tunnel",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "tunnel" => Ok(Scenario::Tunnel),
            "exp-hall" | "experimental-hall" => Ok(Scenario::ExperimentalHall),
            "mechanical-room" | "pipe-room" => Ok(Scenario::MechanicalRoom),
            "side-tunnel" => Ok(Scenario::SideTunnel),
            _ => Err(Error::InvalidProfile(format!("unknown scenario `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ProfileId {
    pub scenario: Scenario,
    pub beamwidth_deg: u32,
}

impl ProfileId {
    pub const fn new(scenario: Scenario, beamwidth_deg: u32) -> Self {
        Self {
            scenario,
            beamwidth_deg,
        }
    }

    /// The eight measured settings.
    pub const BUILTIN: [ProfileId; 8] = [
        ProfileId::new(Scenario::Tunnel, 7),
        ProfileId::new(Scenario::Tunnel, 20),
        ProfileId::new(Scenario::Tunnel, 80),
        ProfileId::new(Scenario::ExperimentalHall, 7),
        ProfileId::new(Scenario::ExperimentalHall, 20),
        ProfileId::new(Scenario::ExperimentalHall, 80),
        ProfileId::new(Scenario::MechanicalRoom, 20),
        ProfileId::new(Scenario::SideTunnel, 20),
    ];
}

impl fmt::Display for ProfileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.scenario, self.beamwidth_deg)
    }
}

/// Parses ids such as `tunnel-7` or `pipe-room-20`.
impl FromStr for ProfileId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidProfile(format!("unknown profile `{s}`"));
        let (scenario, width) = s.rsplit_once('-').ok_or_else(bad)?;
        let scenario: Scenario = scenario.parse().map_err(|_| bad())?;
        let beamwidth_deg: u32 = width.parse().map_err(|_| bad())?;
        Ok(ProfileId::new(scenario, beamwidth_deg))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Parameter {
    NumClusters,
    InterclusterDelay,
    ClusterAmplitude,
    PathsPerCluster,
    PathAmplitude,
}

impl Parameter {
    pub const ALL: [Parameter; 5] = [
        Parameter::NumClusters,
        Parameter::InterclusterDelay,
        Parameter::ClusterAmplitude,
        Parameter::PathsPerCluster,
        Parameter::PathAmplitude,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Parameter::NumClusters => "num_clusters",
            Parameter::InterclusterDelay => "intercluster_delay",
            Parameter::ClusterAmplitude => "cluster_amplitude",
            Parameter::PathsPerCluster => "paths_per_cluster",
            Parameter::PathAmplitude => "path_amplitude",
        }
    }

    pub fn is_count(self) -> bool {
        matches!(self, Parameter::NumClusters | Parameter::PathsPerCluster)
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Parameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Parameter::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::InvalidInput(format!("unknown parameter `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuartileTarget {
    pub q1: f64,
    pub q2: f64,
    pub q3: f64,
    /// Quartiles were measured on discretized counts.
    pub discretized: bool,
}

impl QuartileTarget {
    pub fn as_array(&self) -> [f64; 3] {
        [self.q1, self.q2, self.q3]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioProfile {
    pub id: ProfileId,
    pub num_clusters: DistributionSpec,
    /// Seconds.
    pub intercluster_delay: DistributionSpec,
    pub cluster_amplitude: DistributionSpec,
    pub paths_per_cluster: DistributionSpec,
    pub path_amplitude: DistributionSpec,
    /// Seconds between consecutive intra-cluster paths.
    pub tap_grid: f64,
    /// Upper clamp on drawn counts.
    pub max_count: u32,
    /// Calibration residual per parameter, where calibrated.
    pub residuals: BTreeMap<Parameter, f64>,
    pub provenance: String,
}

impl ScenarioProfile {
    pub fn new(
        id: ProfileId,
        num_clusters: DistributionSpec,
        intercluster_delay: DistributionSpec,
        cluster_amplitude: DistributionSpec,
        paths_per_cluster: DistributionSpec,
        path_amplitude: DistributionSpec,
        tap_grid: f64,
    ) -> Result<Self> {
        let profile = Self {
            id,
            num_clusters,
            intercluster_delay,
            cluster_amplitude,
            paths_per_cluster,
            path_amplitude,
            tap_grid,
            max_count: DEFAULT_MAX_COUNT,
            residuals: BTreeMap::new(),
            provenance: String::new(),
        };
        profile.validate()?;
        Ok(profile)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tap_grid > 0.0 && self.tap_grid.is_finite()) {
            return Err(Error::InvalidProfile(format!("tap grid {}", self.tap_grid)));
        }
        if self.max_count < 1 {
            return Err(Error::InvalidProfile("max_count must be at least 1".into()));
        }
        for parameter in [Parameter::ClusterAmplitude, Parameter::PathAmplitude] {
            if !(self.spec(parameter).support().1 > 0.0) {
                return Err(Error::InvalidProfile(format!(
                    "{parameter} support does not reach positive values"
                )));
            }
        }
        for parameter in Parameter::ALL {
            let spec = self.spec(parameter);
            let lo = spec.quantile_unchecked(1e-9);
            let hi = spec.quantile_unchecked(1.0 - 1e-9);
            if lo.is_nan() || hi.is_nan() {
                return Err(Error::InvalidProfile(format!("{parameter} quantiles are undefined")));
            }
        }
        Ok(())
    }

    pub fn spec(&self, parameter: Parameter) -> &DistributionSpec {
        match parameter {
            Parameter::NumClusters => &self.num_clusters,
            Parameter::InterclusterDelay => &self.intercluster_delay,
            Parameter::ClusterAmplitude => &self.cluster_amplitude,
            Parameter::PathsPerCluster => &self.paths_per_cluster,
            Parameter::PathAmplitude => &self.path_amplitude,
        }
    }

    /// How generation maps a continuous quantile of `parameter` to what a
    /// realization exhibits.
    pub fn transform(&self, parameter: Parameter) -> QuartileTransform {
        match parameter {
            Parameter::NumClusters | Parameter::PathsPerCluster => QuartileTransform::Discretized,
            Parameter::InterclusterDelay => QuartileTransform::Floor(self.tap_grid),
            Parameter::ClusterAmplitude | Parameter::PathAmplitude => QuartileTransform::PositivePart,
        }
    }
}

pub type Registry = BTreeMap<ProfileId, ScenarioProfile>;

/// The eight calibrated profiles. Computed once per process; the result is
/// the same on every run.
pub fn builtin_profiles() -> Result<&'static Registry> {
    static REGISTRY: OnceLock<Result<Registry>> = OnceLock::new();
    REGISTRY.get_or_init(build_registry).as_ref().map_err(Clone::clone)
}

pub fn builtin_profile(id: ProfileId) -> Result<&'static ScenarioProfile> {
    builtin_profiles()?
        .get(&id)
        .ok_or_else(|| Error::InvalidProfile(format!("no built-in profile `{id}`")))
}

/// Calibration settings used for one built-in cell.
pub fn builtin_options(id: ProfileId, parameter: Parameter) -> CalibrationOptions {
    let mut weights = [1.0; 3];
    if id.scenario == Scenario::SideTunnel && parameter == Parameter::InterclusterDelay {
        weights[1] = 0.5;
    }
    let transform = match parameter {
        Parameter::NumClusters | Parameter::PathsPerCluster => QuartileTransform::Discretized,
        Parameter::InterclusterDelay => QuartileTransform::Floor(DEFAULT_TAP_GRID),
        Parameter::ClusterAmplitude | Parameter::PathAmplitude => QuartileTransform::PositivePart,
    };
    CalibrationOptions {
        bounds: published_bounds(id, parameter).map(|b| b.to_vec()),
        transform,
        weights,
        threshold: f64::INFINITY,
        ..CalibrationOptions::default()
    }
}

/// Families tried when the cell has no assigned family.
pub const OPEN_FAMILY_CANDIDATES: [Family; 3] = [Family::Gev, Family::Gpd, Family::Gamma];

fn calibrate_cell(id: ProfileId, parameter: Parameter, target: &QuartileTarget) -> Result<Calibrated> {
    let mut options = builtin_options(id, parameter);
    let Some(family) = assigned_family(id, parameter) else {
        options.bounds = None;
        let mut best: Option<Calibrated> = None;
        for family in OPEN_FAMILY_CANDIDATES {
            let c = calibrate_with(family, target, &options)?;
            let better = match &best {
                None => true,
                Some(b) => {
                    c.residual < b.residual
                        || c.residual == b.residual
                            && (family.n_params(), family) < (b.spec.family().n_params(), b.spec.family())
                }
            };
            if better {
                best = Some(c);
            }
        }
        return Ok(best.expect("non-empty candidate list"));
    };
    calibrate_with(family, target, &options)
}

/// Calibrates all five parameters of `id` against `targets`, falling back
/// to the built-in target for any parameter not given.
///
/// Residuals are recorded in the profile rather than checked against a
/// threshold.
pub fn calibrate_profile(id: ProfileId, targets: &BTreeMap<Parameter, QuartileTarget>) -> Result<ScenarioProfile> {
    let target = |p: Parameter| {
        targets
            .get(&p)
            .copied()
            .or_else(|| builtin_target(id, p))
            .ok_or_else(|| Error::InvalidProfile(format!("no {p} target for {id}")))
    };
    let direct = [
        Parameter::NumClusters,
        Parameter::InterclusterDelay,
        Parameter::ClusterAmplitude,
        Parameter::PathsPerCluster,
    ];
    let goals = direct.map(target);
    let path_goal = target(Parameter::PathAmplitude)?;
    let results: Vec<Result<Calibrated>> = direct
        .par_iter()
        .zip(goals.par_iter())
        .map(|(&p, goal)| {
            let goal = goal.as_ref().map_err(Clone::clone)?;
            calibrate_cell(id, p, goal).map_err(|e| Error::InvalidProfile(format!("{id} {p}: {e}")))
        })
        .collect();
    let mut results = results.into_iter();
    let mut next = || results.next().expect("four cells");
    let (num_clusters, delay, cluster_amplitude, paths) = (next()?, next()?, next()?, next()?);

    let family = assigned_family(id, Parameter::PathAmplitude).expect("always assigned");
    let path_amplitude = calibrate_path_amplitude(
        family,
        &path_goal,
        &cluster_amplitude.spec,
        &paths.spec,
        DEFAULT_MAX_COUNT,
        &builtin_options(id, Parameter::PathAmplitude),
    )
    .map_err(|e| Error::InvalidProfile(format!("{id} {}: {e}", Parameter::PathAmplitude)))?;

    let mut profile = ScenarioProfile::new(
        id,
        num_clusters.spec,
        delay.spec,
        cluster_amplitude.spec,
        paths.spec,
        path_amplitude.spec,
        DEFAULT_TAP_GRID,
    )?;
    profile.residuals = BTreeMap::from([
        (Parameter::NumClusters, num_clusters.residual),
        (Parameter::InterclusterDelay, delay.residual),
        (Parameter::ClusterAmplitude, cluster_amplitude.residual),
        (Parameter::PathsPerCluster, paths.residual),
        (Parameter::PathAmplitude, path_amplitude.residual),
    ]);
    profile.provenance = provenance(id, &profile, targets.is_empty());
    Ok(profile)
}

fn build_registry() -> Result<Registry> {
    let profiles: Vec<Result<ScenarioProfile>> = ProfileId::BUILTIN
        .par_iter()
        .map(|&id| calibrate_profile(id, &BTreeMap::new()))
        .collect();
    profiles
        .into_iter()
        .map(|p| p.map(|p| (p.id, p)))
        .collect()
}

fn provenance(id: ProfileId, profile: &ScenarioProfile, builtin: bool) -> String {
    let source = if builtin { "the built-in targets" } else { "custom targets" };
    let mut notes = vec![format!("{id}: quartile-calibrated against {source}")];
    if published_bounds(id, Parameter::ClusterAmplitude).is_some() {
        notes.push("parameters constrained to the published ranges".into());
    } else {
        notes.push("no published ranges; unbounded calibration".into());
    }
    if assigned_family(id, Parameter::NumClusters).is_none() {
        notes.push(format!(
            "num_clusters family {} chosen by lowest residual among GEV, GPD, Gamma",
            profile.num_clusters.family()
        ));
    }
    if id == ProfileId::new(Scenario::MechanicalRoom, 20) {
        notes.push("intercluster_delay targets identical to tunnel-20, transcribed as published".into());
    }
    if id.scenario == Scenario::SideTunnel {
        notes.push("intercluster_delay median weighted by 1/2 (q1 = median on the tap grid)".into());
    }
    notes.join("; ")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for id in ProfileId::BUILTIN {
            assert_eq!(id.to_string().parse::<ProfileId>().unwrap(), id);
        }
        assert_eq!(
            "pipe-room-20".parse::<ProfileId>().unwrap(),
            ProfileId::new(Scenario::MechanicalRoom, 20)
        );
        assert_eq!(ProfileId::BUILTIN[0].to_string(), "tunnel-7");
        assert!("tunnel".parse::<ProfileId>().is_err());
        assert!("warehouse-7".parse::<ProfileId>().is_err());
    }

    #[test]
    fn parameter_names_round_trip() {
        for p in Parameter::ALL {
            assert_eq!(p.as_str().parse::<Parameter>().unwrap(), p);
        }
    }

    #[test]
    fn profile_validation() {
        let pm = |v| DistributionSpec::point_mass(v).unwrap();
        let id = ProfileId::new(Scenario::Tunnel, 7);
        assert!(ScenarioProfile::new(id, pm(1.0), pm(1e-9), pm(0.1), pm(1.0), pm(0.1), 0.0).is_err());
        assert!(ScenarioProfile::new(id, pm(1.0), pm(1e-9), pm(-0.1), pm(1.0), pm(0.1), 1e-10).is_err());
        assert!(ScenarioProfile::new(id, pm(1.0), pm(1e-9), pm(0.1), pm(1.0), pm(0.1), 1e-10).is_ok());
    }
}
