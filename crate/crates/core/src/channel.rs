//! Cluster channel structure and synthetic realizations.
//!
//! A realization is the angle-agnostic impulse response
//!
//! ```text
//! h(t) = Σ_i A_i C_i(t - T_i),    C_i(t) = Σ_k α_ik δ(t - τ_ik)
//! ```
//!
//! stored as clusters with arrival delay `T_i`, amplitude `A_i` and paths
//! `(τ_ik, α_ik)`. The cluster amplitude is the mean of its path amplitudes,
//! so the tap amplitude at `T_i + τ_ik` is `α_ik` itself.

use rayon::prelude::*;

use crate::distributions::{discretize_count, DistributionSpec};
use crate::error::{Error, Result};
use crate::profiles::ScenarioProfile;
use crate::rng::UniformStream;
use crate::taps::{CaptureMeta, Tap, TapSeries};

/// Relative tolerance for `mean(α) == A`.
pub const AMPLITUDE_TOLERANCE: f64 = 1e-9;

/// Redraw limit for non-positive amplitude draws.
pub const MAX_REDRAWS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularInfo {
    pub azimuth_tx: f64,
    pub elevation_tx: f64,
    pub azimuth_rx: f64,
    pub elevation_rx: f64,
}

impl AngularInfo {
    /// Degrees; azimuths in `[-180, 180)`, elevations in `[-90, 90]`.
    pub fn new(azimuth_tx: f64, elevation_tx: f64, azimuth_rx: f64, elevation_rx: f64) -> Result<Self> {
        for az in [azimuth_tx, azimuth_rx] {
            if !(-180.0..180.0).contains(&az) {
                return Err(Error::InvalidInput(format!("azimuth {az} outside [-180, 180)")));
            }
        }
        for el in [elevation_tx, elevation_rx] {
            if !(-90.0..=90.0).contains(&el) {
                return Err(Error::InvalidInput(format!("elevation {el} outside [-90, 90]")));
            }
        }
        Ok(Self {
            azimuth_tx,
            elevation_tx,
            azimuth_rx,
            elevation_rx,
        })
    }

    /// Receive-side direction only; transmit angles set to zero.
    pub fn rx(azimuth: f64, elevation: f64) -> Result<Self> {
        Self::new(0.0, 0.0, azimuth, elevation)
    }

    /// Great-circle angle in degrees between the receive directions.
    pub fn rx_separation(&self, other: &AngularInfo) -> f64 {
        let (a1, e1) = (self.azimuth_rx.to_radians(), self.elevation_rx.to_radians());
        let (a2, e2) = (other.azimuth_rx.to_radians(), other.elevation_rx.to_radians());
        let cos = e1.sin() * e2.sin() + e1.cos() * e2.cos() * (a1 - a2).cos();
        cos.clamp(-1.0, 1.0).acos().to_degrees()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamPattern {
    pub boresight: AngularInfo,
    pub width_deg: f64,
}

impl BeamPattern {
    pub fn new(boresight: AngularInfo, width_deg: f64) -> Result<Self> {
        if !(width_deg > 0.0 && width_deg.is_finite()) {
            return Err(Error::InvalidInput(format!("beam width {width_deg} must be positive")));
        }
        Ok(Self {
            boresight,
            width_deg,
        })
    }

    /// Ideal cone: full gain within half the width of boresight, none outside.
    pub fn covers(&self, direction: &AngularInfo) -> bool {
        self.boresight.rx_separation(direction) <= 0.5 * self.width_deg
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathTap {
    /// Offset from the cluster arrival, seconds.
    pub tau: f64,
    /// Linear amplitude.
    pub alpha: f64,
    pub angles: Option<AngularInfo>,
}

impl PathTap {
    pub fn new(tau: f64, alpha: f64) -> Self {
        Self {
            tau,
            alpha,
            angles: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    delay: f64,
    amplitude: f64,
    paths: Vec<PathTap>,
}

impl Cluster {
    /// Builds a cluster whose amplitude is the mean of its path amplitudes.
    pub fn from_paths(delay: f64, paths: Vec<PathTap>) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidInput("cluster without paths".into()));
        }
        let amplitude = paths.iter().map(|p| p.alpha).sum::<f64>() / paths.len() as f64;
        Self::new(delay, amplitude, paths)
    }

    pub fn new(delay: f64, amplitude: f64, paths: Vec<PathTap>) -> Result<Self> {
        if !(delay.is_finite() && delay >= 0.0) {
            return Err(Error::InvalidInput(format!("cluster delay {delay}")));
        }
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(Error::InvalidInput(format!("cluster amplitude {amplitude}")));
        }
        let Some(first) = paths.first() else {
            return Err(Error::InvalidInput("cluster without paths".into()));
        };
        if first.tau != 0.0 {
            return Err(Error::InvalidInput("first path offset must be 0".into()));
        }
        for (i, p) in paths.iter().enumerate() {
            if !(p.alpha.is_finite() && p.alpha > 0.0) {
                return Err(Error::InvalidInput(format!("path {i} amplitude {}", p.alpha)));
            }
            if i > 0 && !(p.tau > paths[i - 1].tau && p.tau.is_finite()) {
                return Err(Error::InvalidInput("path offsets must increase".into()));
            }
        }
        let mean = paths.iter().map(|p| p.alpha).sum::<f64>() / paths.len() as f64;
        if ((mean - amplitude) / amplitude).abs() > AMPLITUDE_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "cluster amplitude {amplitude} differs from mean path amplitude {mean}"
            )));
        }
        Ok(Self {
            delay,
            amplitude,
            paths,
        })
    }

    /// Arrival delay `T`, seconds.
    pub fn delay(&self) -> f64 {
        self.delay
    }

    /// Amplitude `A`, the mean of the path amplitudes.
    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn paths(&self) -> &[PathTap] {
        &self.paths
    }

    pub fn set_angles(&mut self, angles: AngularInfo) {
        for p in &mut self.paths {
            p.angles = Some(angles);
        }
    }

    fn shifted(&self, by: f64) -> Self {
        Self {
            delay: self.delay - by,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    clusters: Vec<Cluster>,
    pub profile_id: String,
    pub seed: u64,
    /// Sub-stream index within the seed.
    pub stream: u64,
}

impl ChannelRealization {
    /// Clusters must be non-empty, start at delay 0 and arrive in strictly
    /// increasing order.
    pub fn new(clusters: Vec<Cluster>, profile_id: impl Into<String>, seed: u64, stream: u64) -> Result<Self> {
        let Some(first) = clusters.first() else {
            return Err(Error::EmptyChannel);
        };
        if first.delay != 0.0 {
            return Err(Error::InvalidInput("first cluster must arrive at delay 0".into()));
        }
        if clusters.windows(2).any(|w| w[1].delay <= w[0].delay) {
            return Err(Error::InvalidInput("cluster delays must increase".into()));
        }
        Ok(Self {
            clusters,
            profile_id: profile_id.into(),
            seed,
            stream,
        })
    }

    pub fn clusters(&self) -> &[Cluster] {
        &self.clusters
    }

    pub fn clusters_mut(&mut self) -> &mut [Cluster] {
        &mut self.clusters
    }

    /// Consecutive arrival gaps `T_{i+1} - T_i`.
    pub fn intercluster_delays(&self) -> impl Iterator<Item = f64> + '_ {
        self.clusters.windows(2).map(|w| w[1].delay - w[0].delay)
    }

    pub fn path_count(&self) -> usize {
        self.clusters.iter().map(|c| c.paths.len()).sum()
    }
}

/// One realization from sub-stream 0 of `seed`.
pub fn generate_realization(profile: &ScenarioProfile, seed: u64) -> Result<ChannelRealization> {
    generate_in_stream(profile, seed, 0)
}

/// `n` realizations; realization `i` uses sub-stream `i` of `seed`, so the
/// batch is identical whatever the thread count.
pub fn generate_realizations(
    profile: &ScenarioProfile,
    n: usize,
    seed: u64,
) -> Result<Vec<ChannelRealization>> {
    (0..n as u64)
        .into_par_iter()
        .map(|i| generate_in_stream(profile, seed, i))
        .collect()
}

pub fn generate_in_stream(
    profile: &ScenarioProfile,
    seed: u64,
    stream: u64,
) -> Result<ChannelRealization> {
    let mut rng = UniformStream::new(seed, stream);
    let grid = profile.tap_grid;

    let n_clusters = draw_count(&profile.num_clusters, profile.max_count, &mut rng);
    let mut arrivals = Vec::with_capacity(n_clusters);
    let mut t = 0.0;
    arrivals.push(t);
    for _ in 1..n_clusters {
        t += profile.intercluster_delay.draw(&mut rng).max(grid);
        arrivals.push(t);
    }

    let mut clusters = Vec::with_capacity(n_clusters);
    for delay in arrivals {
        let amplitude = draw_positive(&profile.cluster_amplitude, &mut rng)?;
        let k = draw_count(&profile.paths_per_cluster, profile.max_count, &mut rng);
        let mut alphas = Vec::with_capacity(k);
        for _ in 0..k {
            alphas.push(draw_positive(&profile.path_amplitude, &mut rng)?);
        }
        let mean = alphas.iter().sum::<f64>() / k as f64;
        let scale = amplitude / mean;
        let paths = alphas
            .into_iter()
            .enumerate()
            .map(|(j, a)| PathTap::new(j as f64 * grid, a * scale))
            .collect();
        clusters.push(Cluster::new(delay, amplitude, paths)?);
    }
    ChannelRealization::new(clusters, profile.id.to_string(), seed, stream)
}

fn draw_count(spec: &DistributionSpec, max: u32, rng: &mut UniformStream) -> usize {
    let x = discretize_count(spec.draw(rng));
    if x.is_nan() {
        1
    } else {
        x.min(max as f64) as usize
    }
}

fn draw_positive(spec: &DistributionSpec, rng: &mut UniformStream) -> Result<f64> {
    for _ in 0..MAX_REDRAWS {
        let x = spec.draw(rng);
        if x > 0.0 && x.is_finite() {
            return Ok(x);
        }
    }
    Err(Error::ResampleExhausted(spec.family()))
}

/// Absolute taps `T_i + τ_ik` snapped to the nearest multiple of
/// `grid_period`. Paths landing on the same grid point add in power.
pub fn realization_to_taps(r: &ChannelRealization, grid_period: f64) -> Result<TapSeries> {
    let meta = CaptureMeta {
        location: r.profile_id.clone(),
        scenario: r.profile_id.clone(),
        capture_index: r.stream,
        ..CaptureMeta::default()
    };
    realization_to_taps_with(r, grid_period, meta)
}

pub fn realization_to_taps_with(
    r: &ChannelRealization,
    grid_period: f64,
    meta: CaptureMeta,
) -> Result<TapSeries> {
    if !(grid_period > 0.0 && grid_period.is_finite()) {
        return Err(Error::InvalidInput(format!("grid period {grid_period}")));
    }
    let mut bins: Vec<(i64, f64)> = r
        .clusters
        .iter()
        .flat_map(|c| {
            c.paths.iter().map(move |p| {
                let index = ((c.delay + p.tau) / grid_period).round() as i64;
                (index, p.alpha * p.alpha)
            })
        })
        .collect();
    bins.sort_by_key(|&(i, _)| i);
    let mut taps: Vec<Tap> = Vec::with_capacity(bins.len());
    let mut last: Option<i64> = None;
    let mut power = 0.0;
    for (index, p) in bins {
        if last == Some(index) {
            power += p;
            continue;
        }
        if let Some(prev) = last {
            taps.push(Tap {
                delay: prev as f64 * grid_period,
                amplitude: power.sqrt(),
            });
        }
        last = Some(index);
        power = p;
    }
    if let Some(prev) = last {
        taps.push(Tap {
            delay: prev as f64 * grid_period,
            amplitude: power.sqrt(),
        });
    }
    TapSeries::new(taps, meta)
}

/// Keeps the clusters whose first path arrives from inside the beam cone and
/// re-anchors the earliest survivor at delay 0.
pub fn apply_beam_filter(r: &ChannelRealization, beam: &BeamPattern) -> Result<ChannelRealization> {
    let mut kept = Vec::new();
    for (i, c) in r.clusters.iter().enumerate() {
        let angles = c.paths[0].angles.ok_or(Error::MissingAngles(i))?;
        if beam.covers(&angles) {
            kept.push(c);
        }
    }
    let Some(origin) = kept.first().map(|c| c.delay) else {
        return Err(Error::EmptyChannel);
    };
    let clusters = kept.into_iter().map(|c| c.shifted(origin)).collect();
    ChannelRealization::new(clusters, r.profile_id.clone(), r.seed, r.stream)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{ProfileId, Scenario};

    fn point_profile(clusters: f64, paths: f64, amp: f64) -> ScenarioProfile {
        let pm = |v| DistributionSpec::point_mass(v).unwrap();
        ScenarioProfile::new(
            ProfileId::new(Scenario::Tunnel, 7),
            pm(clusters),
            pm(3e-9),
            pm(amp),
            pm(paths),
            pm(amp),
            2.4e-10,
        )
        .unwrap()
    }

    fn with_azimuths(azimuths: &[f64]) -> ChannelRealization {
        let clusters = azimuths
            .iter()
            .enumerate()
            .map(|(i, &az)| {
                let mut c = Cluster::from_paths(
                    i as f64 * 1e-9,
                    vec![PathTap::new(0.0, 0.1 + i as f64 * 0.01)],
                )
                .unwrap();
                c.set_angles(AngularInfo::rx(az, 0.0).unwrap());
                c
            })
            .collect();
        ChannelRealization::new(clusters, "test", 0, 0).unwrap()
    }

    #[test]
    fn point_mass_profile_gives_single_tap() {
        let r = generate_realization(&point_profile(1.0, 1.0, 0.05), 9).unwrap();
        assert_eq!(r.clusters().len(), 1);
        let c = &r.clusters()[0];
        assert_eq!(c.delay(), 0.0);
        assert_eq!(c.paths().len(), 1);
        assert_eq!(c.paths()[0].tau, 0.0);
        assert_eq!(c.paths()[0].alpha, 0.05);
        let taps = realization_to_taps(&r, 2.4e-10).unwrap();
        assert_eq!(taps.len(), 1);
        assert_eq!(taps.taps()[0].delay, 0.0);
    }

    #[test]
    fn paths_sit_on_consecutive_grid_periods() {
        let r = generate_realization(&point_profile(2.0, 3.0, 0.05), 1).unwrap();
        assert_eq!(r.clusters().len(), 2);
        assert_eq!(r.clusters()[1].delay(), 3e-9);
        let taus: Vec<f64> = r.clusters()[0].paths().iter().map(|p| p.tau).collect();
        assert_eq!(taus, vec![0.0, 2.4e-10, 4.8e-10]);
    }

    #[test]
    fn two_paths_one_grid_apart() {
        let c = Cluster::from_paths(0.0, vec![PathTap::new(0.0, 0.05), PathTap::new(0.24e-9, 0.03)]).unwrap();
        let r = ChannelRealization::new(vec![c], "t", 0, 0).unwrap();
        let taps = realization_to_taps(&r, 0.24e-9).unwrap();
        let delays: Vec<f64> = taps.taps().iter().map(|t| t.delay).collect();
        assert_eq!(delays, vec![0.0, 2.4e-10]);
    }

    #[test]
    fn colliding_paths_add_in_power() {
        let a = 0.04;
        let c0 = Cluster::from_paths(0.0, vec![PathTap::new(0.0, a), PathTap::new(1e-9, a)]).unwrap();
        let c1 = Cluster::from_paths(0.9e-9, vec![PathTap::new(0.0, a)]).unwrap();
        let r = ChannelRealization::new(vec![c0, c1], "t", 0, 0).unwrap();
        let taps = realization_to_taps(&r, 1e-9).unwrap();
        assert_eq!(taps.len(), 2);
        assert!((taps.taps()[1].amplitude - a * 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn cluster_invariants_are_enforced() {
        assert!(Cluster::new(0.0, 0.1, vec![]).is_err());
        assert!(Cluster::new(0.0, 0.1, vec![PathTap::new(1e-10, 0.1)]).is_err());
        assert!(Cluster::new(0.0, 0.2, vec![PathTap::new(0.0, 0.1)]).is_err());
        assert!(Cluster::from_paths(0.0, vec![PathTap::new(0.0, 0.1), PathTap::new(0.0, 0.1)]).is_err());
        let ok = Cluster::from_paths(1e-9, vec![PathTap::new(0.0, 0.1), PathTap::new(1e-10, 0.3)]).unwrap();
        assert!((ok.amplitude() - 0.2).abs() < 1e-15);
    }

    #[test]
    fn realization_needs_increasing_delays_from_zero() {
        let c = |t| Cluster::from_paths(t, vec![PathTap::new(0.0, 0.1)]).unwrap();
        assert!(ChannelRealization::new(vec![], "t", 0, 0).is_err());
        assert!(ChannelRealization::new(vec![c(1e-9)], "t", 0, 0).is_err());
        assert!(ChannelRealization::new(vec![c(0.0), c(0.0)], "t", 0, 0).is_err());
    }

    #[test]
    fn beam_filter_examples() {
        let r = with_azimuths(&[0.0, 5.0, 50.0]);
        let bore = AngularInfo::rx(0.0, 0.0).unwrap();
        let wide = BeamPattern::new(bore, 360.0).unwrap();
        assert_eq!(apply_beam_filter(&r, &wide).unwrap().clusters(), r.clusters());

        let narrow = BeamPattern::new(bore, 20.0).unwrap();
        let kept = apply_beam_filter(&r, &narrow).unwrap();
        assert_eq!(kept.clusters().len(), 2);
        assert_eq!(kept.clusters()[0], r.clusters()[0]);
        assert_eq!(kept.clusters()[1], r.clusters()[1]);

        let side = with_azimuths(&[90.0]);
        assert_eq!(apply_beam_filter(&side, &narrow), Err(Error::EmptyChannel));
    }

    #[test]
    fn beam_filter_reanchors_and_is_idempotent() {
        let r = with_azimuths(&[40.0, 2.0, -3.0]);
        let beam = BeamPattern::new(AngularInfo::rx(0.0, 0.0).unwrap(), 20.0).unwrap();
        let once = apply_beam_filter(&r, &beam).unwrap();
        assert_eq!(once.clusters()[0].delay(), 0.0);
        assert_eq!(once.clusters()[1].delay(), 1e-9);
        assert_eq!(apply_beam_filter(&once, &beam).unwrap(), once);
    }

    #[test]
    fn beam_filter_requires_angles() {
        let c = Cluster::from_paths(0.0, vec![PathTap::new(0.0, 0.1)]).unwrap();
        let r = ChannelRealization::new(vec![c], "t", 0, 0).unwrap();
        let beam = BeamPattern::new(AngularInfo::rx(0.0, 0.0).unwrap(), 20.0).unwrap();
        assert_eq!(apply_beam_filter(&r, &beam), Err(Error::MissingAngles(0)));
    }

    #[test]
    fn angle_ranges() {
        assert!(AngularInfo::rx(180.0, 0.0).is_err());
        assert!(AngularInfo::rx(-180.0, 0.0).is_ok());
        assert!(AngularInfo::rx(0.0, 90.5).is_err());
        assert!(BeamPattern::new(AngularInfo::rx(0.0, 0.0).unwrap(), 0.0).is_err());
    }
}
