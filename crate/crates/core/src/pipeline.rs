//! From tap traces back to model parameters: thresholding, time-cluster
//! partitioning, parameter extraction and family selection.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::channel::{ChannelRealization, Cluster, PathTap};
use crate::distributions::{
    select_family_with, CandidateScore, DistributionSpec, Family, FitOptions, MIN_SELECT_SAMPLES,
};
use crate::error::{Error, Result};
use crate::profiles::Parameter;
use crate::stats::quartiles;
use crate::taps::{CaptureMeta, TapSeries};

/// Noise floor relative to the strongest tap (-40 dB in amplitude).
pub const DEFAULT_NOISE_FLOOR_RATIO: f64 = 0.01;
/// Default partition gap in tap-grid periods.
pub const DEFAULT_GAP_PERIODS: f64 = 10.0;
pub const CANDIDATE_FAMILIES: [Family; 4] = [Family::Gev, Family::Gpd, Family::Gamma, Family::InverseGaussian];

pub fn default_noise_floor(taps: &TapSeries) -> f64 {
    taps.max_amplitude() * DEFAULT_NOISE_FLOOR_RATIO
}

pub fn default_gap_threshold(tap_grid: f64) -> f64 {
    DEFAULT_GAP_PERIODS * tap_grid
}

/// Drops taps weaker than `noise_floor`.
pub fn threshold_taps(raw: &TapSeries, noise_floor: f64) -> Result<TapSeries> {
    if !(noise_floor > 0.0) {
        return Err(Error::InvalidInput(format!("noise floor {noise_floor} must be positive")));
    }
    let kept: Vec<_> = raw
        .taps()
        .iter()
        .copied()
        .filter(|t| t.amplitude >= noise_floor)
        .collect();
    if kept.is_empty() {
        return Err(Error::EmptySeries);
    }
    TapSeries::new(kept, raw.meta.clone())
}

/// Splits taps into clusters wherever consecutive delays differ by more
/// than `gap_threshold`. Each cluster starts at its first tap; `T + tau`
/// reproduces every input delay exactly.
pub fn partition_clusters(taps: &TapSeries, gap_threshold: f64) -> Result<Vec<Cluster>> {
    if !(gap_threshold > 0.0) {
        return Err(Error::InvalidInput(format!("gap threshold {gap_threshold} must be positive")));
    }
    let mut groups: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for t in taps.taps() {
        if groups.is_empty() || t.delay - last > gap_threshold {
            groups.push(Vec::new());
        }
        groups.last_mut().expect("pushed").push((t.delay, t.amplitude));
        last = t.delay;
    }
    groups
        .into_iter()
        .map(|g| {
            let start = g[0].0;
            let paths = g
                .iter()
                .map(|&(d, a)| PathTap::new(offset(d, start), a))
                .collect();
            Cluster::from_paths(start, paths)
        })
        .collect()
}

/// `d - start`, nudged by at most a few ulps so that `start + tau == d`
/// where any such `tau` exists.
fn offset(d: f64, start: f64) -> f64 {
    let tau = d - start;
    if start + tau == d {
        return tau;
    }
    let (mut up, mut down) = (tau, tau);
    for _ in 0..8 {
        up = up.next_up();
        if start + up == d {
            return up;
        }
        down = down.next_down();
        if start + down == d && down > 0.0 {
            return down;
        }
    }
    tau
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParameterSamples {
    pub num_clusters: Vec<f64>,
    /// Seconds.
    pub intercluster_delays: Vec<f64>,
    pub cluster_amplitudes: Vec<f64>,
    pub paths_per_cluster: Vec<f64>,
    pub path_amplitudes: Vec<f64>,
    /// Seconds; reported descriptively, never fitted.
    pub intra_path_delays: Vec<f64>,
}

impl ParameterSamples {
    pub fn get(&self, parameter: Parameter) -> &[f64] {
        match parameter {
            Parameter::NumClusters => &self.num_clusters,
            Parameter::InterclusterDelay => &self.intercluster_delays,
            Parameter::ClusterAmplitude => &self.cluster_amplitudes,
            Parameter::PathsPerCluster => &self.paths_per_cluster,
            Parameter::PathAmplitude => &self.path_amplitudes,
        }
    }

    fn push_capture(&mut self, clusters: &[Cluster]) {
        self.intercluster_delays
            .extend(clusters.windows(2).map(|w| w[1].delay() - w[0].delay()));
        for c in clusters {
            self.cluster_amplitudes.push(c.amplitude());
            self.paths_per_cluster.push(c.paths().len() as f64);
            self.path_amplitudes.extend(c.paths().iter().map(|p| p.alpha));
            self.intra_path_delays.extend(c.paths().iter().skip(1).map(|p| p.tau));
        }
    }
}

/// Parameters read directly from generated realizations, without export or
/// partitioning.
pub fn realization_parameters(realizations: &[ChannelRealization]) -> ParameterSamples {
    let mut out = ParameterSamples::default();
    for r in realizations {
        out.num_clusters.push(r.clusters().len() as f64);
        out.push_capture(r.clusters());
    }
    out
}

/// Pools every capture's parameters.
pub fn extract_parameters(captures: &[Vec<Cluster>]) -> ParameterSamples {
    let mut out = ParameterSamples::default();
    for clusters in captures {
        out.num_clusters.push(clusters.len() as f64);
        out.push_capture(clusters);
    }
    out
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum PoolingMode {
    /// Cluster counts of captures sharing a location and beam id are
    /// averaged (then rounded) before pooling; everything else is pooled.
    #[default]
    PerBeam,
    /// Every capture contributes directly.
    Pooled,
}

/// Like [`extract_parameters`], with captures labelled by their metadata.
pub fn extract_parameters_with(captures: &[(CaptureMeta, Vec<Cluster>)], mode: PoolingMode) -> ParameterSamples {
    let mut out = ParameterSamples::default();
    match mode {
        PoolingMode::Pooled => {
            for (_, clusters) in captures {
                out.num_clusters.push(clusters.len() as f64);
                out.push_capture(clusters);
            }
        }
        PoolingMode::PerBeam => {
            let mut groups: BTreeMap<(&str, u8), (usize, usize)> = BTreeMap::new();
            let mut order = Vec::new();
            for (meta, clusters) in captures {
                let key = (meta.location.as_str(), meta.beam_id);
                let entry = groups.entry(key).or_insert_with(|| {
                    order.push(key);
                    (0, 0)
                });
                entry.0 += clusters.len();
                entry.1 += 1;
                out.push_capture(clusters);
            }
            for key in order {
                let (total, n) = groups[&key];
                let mean = total as f64 / n as f64;
                out.num_clusters.push(mean.round().max(1.0));
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum FitOutcome {
    Selected {
        best: DistributionSpec,
        scores: Vec<CandidateScore>,
    },
    InsufficientData {
        needed: usize,
        got: usize,
    },
    Failed(Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterFit {
    pub parameter: Parameter,
    pub n_samples: usize,
    pub quartiles: Option<[f64; 3]>,
    pub outcome: FitOutcome,
}

impl ParameterFit {
    pub fn best(&self) -> Option<&DistributionSpec> {
        match &self.outcome {
            FitOutcome::Selected { best, .. } => Some(best),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    pub scenario: String,
    pub beamwidth_deg: f64,
    /// In [`Parameter::ALL`] order.
    pub parameters: Vec<ParameterFit>,
    pub intra_path_delay_quartiles: Option<[f64; 3]>,
    pub intra_path_delay_count: usize,
}

impl FitReport {
    pub fn get(&self, parameter: Parameter) -> &ParameterFit {
        self.parameters
            .iter()
            .find(|f| f.parameter == parameter)
            .expect("every parameter is reported")
    }
}

/// Selects a family per parameter from `candidates`. Counts are fitted with
/// the discretized likelihood. Parameters with fewer than 50 samples get an
/// insufficient-data marker.
pub fn fit_report(samples: &ParameterSamples, candidates: &[Family]) -> FitReport {
    let parameters = Parameter::ALL
        .par_iter()
        .map(|&parameter| fit_parameter(parameter, samples.get(parameter), candidates))
        .collect();
    FitReport {
        scenario: String::new(),
        beamwidth_deg: 0.0,
        parameters,
        intra_path_delay_quartiles: quartiles(&samples.intra_path_delays),
        intra_path_delay_count: samples.intra_path_delays.len(),
    }
}

fn fit_parameter(parameter: Parameter, data: &[f64], candidates: &[Family]) -> ParameterFit {
    let n_samples = data.len();
    let quartiles = quartiles(data);
    let outcome = if n_samples < MIN_SELECT_SAMPLES {
        FitOutcome::InsufficientData {
            needed: MIN_SELECT_SAMPLES,
            got: n_samples,
        }
    } else {
        let options = if parameter.is_count() {
            FitOptions::count()
        } else {
            FitOptions::default()
        };
        match select_family_with(data, candidates, &options) {
            Ok(s) => FitOutcome::Selected {
                best: s.best,
                scores: s.scores,
            },
            Err(e) => FitOutcome::Failed(e),
        }
    };
    ParameterFit {
        parameter,
        n_samples,
        quartiles,
        outcome,
    }
}
