//! On-disk formats: trace JSON lines, realization dumps and profile files.
//!
//! Every float is written with 17 significant digits, so values read back
//! are bit-identical to the values written.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use mmchan::channel::{ChannelRealization, Cluster, PathTap};
use mmchan::profiles::{Parameter, ProfileId, ScenarioProfile};
use mmchan::taps::{CaptureMeta, Tap, TapSeries};
use mmchan::{DistributionSpec, Family};
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

fn schema_version() -> u32 {
    SCHEMA_VERSION
}

fn check_schema(version: u32) -> Result<(), String> {
    if version == 0 || version > SCHEMA_VERSION {
        return Err(format!("unsupported schema_version {version}"));
    }
    Ok(())
}

struct Exact;

impl serde_json::ser::Formatter for Exact {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Compact JSON with exact float formatting.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Exact);
    value.serialize(&mut ser).expect("in-memory serialization");
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

/// One capture per line of a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub location: String,
    pub beam_id: u8,
    pub scenario: String,
    pub beamwidth_deg: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capture_index: Option<u64>,
    /// `[delay_seconds, amplitude]`, delays ascending.
    pub taps: Vec<[f64; 2]>,
}

impl TraceRecord {
    pub fn from_series(series: &TapSeries) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            location: series.meta.location.clone(),
            beam_id: series.meta.beam_id,
            scenario: series.meta.scenario.clone(),
            beamwidth_deg: series.meta.beamwidth_deg,
            capture_index: Some(series.meta.capture_index),
            taps: series.taps().iter().map(|t| [t.delay, t.amplitude]).collect(),
        }
    }

    /// `default_index` is used when the record carries no capture index.
    pub fn into_series(self, default_index: u64) -> Result<TapSeries, String> {
        check_schema(self.schema_version)?;
        let meta = CaptureMeta {
            location: self.location,
            beam_id: self.beam_id,
            scenario: self.scenario,
            beamwidth_deg: self.beamwidth_deg,
            capture_index: self.capture_index.unwrap_or(default_index),
        };
        let taps = self
            .taps
            .into_iter()
            .map(|[delay, amplitude]| Tap { delay, amplitude })
            .collect();
        TapSeries::new(taps, meta).map_err(|e| e.to_string())
    }
}

pub fn trace_line(series: &TapSeries) -> String {
    to_json(&TraceRecord::from_series(series))
}

/// Parses a trace file. Blank lines are skipped; errors cite the 1-based
/// line number. Captures without an index get their record position.
pub fn parse_traces(text: &str) -> Result<Vec<TapSeries>, CliError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord =
            serde_json::from_str(line).map_err(|e| CliError::Input(format!("line {}: {e}", i + 1)))?;
        let series = record
            .into_series(out.len() as u64)
            .map_err(|e| CliError::Input(format!("line {}: {e}", i + 1)))?;
        out.push(series);
    }
    Ok(out)
}

pub fn read_traces(path: &Path) -> Result<Vec<TapSeries>, CliError> {
    let text = read_to_string(path)?;
    let traces = parse_traces(&text)?;
    if traces.is_empty() {
        return Err(CliError::Input(format!("{}: no captures", path.display())));
    }
    Ok(traces)
}

pub fn read_to_string(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub delay: f64,
    pub amplitude: f64,
    /// `[tau_seconds, alpha]`.
    pub paths: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationRecord {
    pub stream: u64,
    pub clusters: Vec<ClusterRecord>,
}

impl RealizationRecord {
    pub fn from_realization(r: &ChannelRealization) -> Self {
        Self {
            stream: r.stream,
            clusters: r
                .clusters()
                .iter()
                .map(|c| ClusterRecord {
                    delay: c.delay(),
                    amplitude: c.amplitude(),
                    paths: c.paths().iter().map(|p| [p.tau, p.alpha]).collect(),
                })
                .collect(),
        }
    }
}

/// `{"schema_version":..,"profile":..,"seed":..,"tap_grid":..,"realizations":[..]}`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RealizationsFile {
    #[serde(default = "schema_version")]
    pub schema_version: u32,
    pub profile: String,
    pub seed: u64,
    pub tap_grid: f64,
    pub realizations: Vec<RealizationRecord>,
}

impl RealizationsFile {
    pub fn into_realizations(self) -> Result<Vec<ChannelRealization>, CliError> {
        check_schema(self.schema_version).map_err(CliError::Input)?;
        let (profile, seed) = (self.profile, self.seed);
        self.realizations
            .into_iter()
            .map(|r| {
                let clusters = r
                    .clusters
                    .into_iter()
                    .map(|c| {
                        let paths = c.paths.iter().map(|&[tau, alpha]| PathTap::new(tau, alpha)).collect();
                        Cluster::new(c.delay, c.amplitude, paths)
                    })
                    .collect::<mmchan::Result<Vec<_>>>()?;
                Ok(ChannelRealization::new(clusters, profile.clone(), seed, r.stream)?)
            })
            .collect()
    }
}

/// Named parameters in the family's canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedParams(pub DistributionSpec);

impl Serialize for NamedParams {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let names = self.0.family().param_names();
        let values = self.0.params();
        let mut map = serializer.serialize_map(Some(names.len()))?;
        for (name, value) in names.iter().zip(values) {
            map.serialize_entry(name, &value)?;
        }
        map.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpecOut {
    pub family: &'static str,
    pub params: NamedParams,
}

impl SpecOut {
    pub fn new(spec: DistributionSpec) -> Self {
        Self {
            family: spec.family().as_str(),
            params: NamedParams(spec),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ParameterOut {
    family: &'static str,
    params: NamedParams,
    #[serde(skip_serializing_if = "Option::is_none")]
    residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ParametersOut {
    num_clusters: ParameterOut,
    intercluster_delay: ParameterOut,
    cluster_amplitude: ParameterOut,
    paths_per_cluster: ParameterOut,
    path_amplitude: ParameterOut,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct ProfileOut {
    schema_version: u32,
    id: String,
    scenario: String,
    beamwidth_deg: u32,
    tap_grid: f64,
    max_count: u32,
    parameters: ParametersOut,
    provenance: String,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct ParameterIn {
    family: String,
    params: BTreeMap<String, f64>,
    #[serde(default)]
    residual: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProfileIn {
    schema_version: u32,
    id: String,
    #[serde(default)]
    scenario: Option<String>,
    #[serde(default)]
    beamwidth_deg: Option<u32>,
    tap_grid: f64,
    #[serde(default)]
    max_count: Option<u32>,
    parameters: BTreeMap<String, ParameterIn>,
    #[serde(default)]
    provenance: String,
}

/// Serializes a profile as one JSON document.
pub fn profile_json(profile: &ScenarioProfile) -> String {
    let entry = |p: Parameter| ParameterOut {
        family: profile.spec(p).family().as_str(),
        params: NamedParams(*profile.spec(p)),
        residual: profile.residuals.get(&p).copied(),
    };
    let out = ProfileOut {
        schema_version: SCHEMA_VERSION,
        id: profile.id.to_string(),
        scenario: profile.id.scenario.to_string(),
        beamwidth_deg: profile.id.beamwidth_deg,
        tap_grid: profile.tap_grid,
        max_count: profile.max_count,
        parameters: ParametersOut {
            num_clusters: entry(Parameter::NumClusters),
            intercluster_delay: entry(Parameter::InterclusterDelay),
            cluster_amplitude: entry(Parameter::ClusterAmplitude),
            paths_per_cluster: entry(Parameter::PathsPerCluster),
            path_amplitude: entry(Parameter::PathAmplitude),
        },
        provenance: profile.provenance.clone(),
    };
    to_json(&out)
}

pub fn parse_profile(text: &str) -> Result<ScenarioProfile, CliError> {
    let bad = |e: String| CliError::Input(format!("profile: {e}"));
    let raw: ProfileIn = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    check_schema(raw.schema_version).map_err(bad)?;
    let id: ProfileId = raw.id.parse().map_err(|e: mmchan::Error| bad(e.to_string()))?;
    if raw.scenario.is_some_and(|s| s != id.scenario.as_str()) || raw.beamwidth_deg.is_some_and(|b| b != id.beamwidth_deg) {
        return Err(bad(format!("scenario or beamwidth disagrees with id `{id}`")));
    }
    for key in raw.parameters.keys() {
        key.parse::<Parameter>().map_err(|e| bad(e.to_string()))?;
    }
    let mut specs = BTreeMap::new();
    let mut residuals = BTreeMap::new();
    for p in Parameter::ALL {
        let entry = raw
            .parameters
            .get(p.as_str())
            .ok_or_else(|| bad(format!("missing parameter `{p}`")))?;
        let family: Family = entry.family.parse().map_err(|e: mmchan::Error| bad(format!("{p}: {e}")))?;
        let names = family.param_names();
        if entry.params.len() != names.len() {
            return Err(bad(format!("{p}: {family} expects parameters {names:?}")));
        }
        let values = names
            .iter()
            .map(|n| {
                entry
                    .params
                    .get(*n)
                    .copied()
                    .ok_or_else(|| bad(format!("{p}: missing `{n}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let spec = DistributionSpec::from_params(family, &values).map_err(|e| bad(format!("{p}: {e}")))?;
        specs.insert(p, spec);
        if let Some(r) = entry.residual {
            residuals.insert(p, r);
        }
    }
    let mut profile = ScenarioProfile::new(
        id,
        specs[&Parameter::NumClusters],
        specs[&Parameter::InterclusterDelay],
        specs[&Parameter::ClusterAmplitude],
        specs[&Parameter::PathsPerCluster],
        specs[&Parameter::PathAmplitude],
        raw.tap_grid,
    )
    .map_err(|e| bad(e.to_string()))?;
    if let Some(max) = raw.max_count {
        profile.max_count = max;
        profile.validate().map_err(|e| bad(e.to_string()))?;
    }
    profile.residuals = residuals;
    profile.provenance = raw.provenance;
    Ok(profile)
}
