//! Published quartile targets and parameter ranges.

use std::collections::BTreeMap;

use super::{Parameter, ProfileId, QuartileTarget, Scenario};
use crate::distributions::Family;

type Row = (Scenario, u32, [f64; 3]);

use Scenario::{ExperimentalHall as EH, MechanicalRoom as MR, SideTunnel as ST, Tunnel as TN};

const NUM_CLUSTERS: [Row; 8] = [
    (TN, 7, [2.0, 2.0, 2.0]),
    (TN, 20, [1.0, 2.0, 2.0]),
    (TN, 80, [1.0, 2.0, 3.0]),
    (EH, 7, [2.0, 4.0, 6.0]),
    (EH, 20, [2.0, 2.0, 3.0]),
    (EH, 80, [2.0, 5.0, 8.0]),
    (MR, 20, [2.0, 2.0, 3.0]),
    (ST, 20, [1.0, 1.0, 1.0]),
];

const INTERCLUSTER_DELAY: [Row; 8] = [
    (TN, 7, [2.4e-10, 1.3e-9, 5.8e-9]),
    (TN, 20, [3.6e-10, 1.7e-9, 1.4e-8]),
    (TN, 80, [1.1e-9, 5.1e-9, 2.0e-8]),
    (EH, 7, [1.3e-9, 6.4e-9, 1.6e-8]),
    (EH, 20, [1.1e-9, 3.1e-9, 1.6e-8]),
    (EH, 80, [2.4e-9, 8.7e-9, 2.1e-8]),
    (MR, 20, [3.6e-10, 1.7e-9, 1.4e-8]),
    (ST, 20, [2.4e-10, 2.4e-10, 3.6e-10]),
];

const CLUSTER_AMPLITUDE: [Row; 8] = [
    (TN, 7, [0.030, 0.044, 0.083]),
    (TN, 20, [0.031, 0.041, 0.075]),
    (TN, 80, [0.031, 0.034, 0.046]),
    (EH, 7, [0.014, 0.022, 0.054]),
    (EH, 20, [0.016, 0.024, 0.063]),
    (EH, 80, [0.020, 0.027, 0.035]),
    (MR, 20, [0.028, 0.038, 0.070]),
    (ST, 20, [0.047, 0.065, 0.083]),
];

const PATHS_PER_CLUSTER: [Row; 8] = [
    (TN, 7, [2.0, 3.0, 4.0]),
    (TN, 20, [2.0, 3.0, 4.0]),
    (TN, 80, [2.0, 3.0, 4.0]),
    (EH, 7, [2.0, 3.0, 4.0]),
    (EH, 20, [2.0, 3.0, 4.0]),
    (EH, 80, [1.0, 2.0, 3.0]),
    (MR, 20, [2.0, 3.0, 4.0]),
    (ST, 20, [7.0, 9.0, 10.0]),
];

const PATH_AMPLITUDE: [Row; 8] = [
    (TN, 7, [0.029, 0.041, 0.090]),
    (TN, 20, [0.030, 0.041, 0.090]),
    (TN, 80, [0.031, 0.036, 0.050]),
    (EH, 7, [0.014, 0.025, 0.054]),
    (EH, 20, [0.015, 0.027, 0.065]),
    (EH, 80, [0.020, 0.027, 0.038]),
    (MR, 20, [0.027, 0.037, 0.079]),
    (ST, 20, [0.034, 0.055, 0.095]),
];

fn rows(parameter: Parameter) -> &'static [Row; 8] {
    match parameter {
        Parameter::NumClusters => &NUM_CLUSTERS,
        Parameter::InterclusterDelay => &INTERCLUSTER_DELAY,
        Parameter::ClusterAmplitude => &CLUSTER_AMPLITUDE,
        Parameter::PathsPerCluster => &PATHS_PER_CLUSTER,
        Parameter::PathAmplitude => &PATH_AMPLITUDE,
    }
}

/// The 40 published quartile triples, keyed by profile and parameter.
pub fn builtin_targets() -> BTreeMap<(ProfileId, Parameter), QuartileTarget> {
    let mut out = BTreeMap::new();
    for parameter in Parameter::ALL {
        for &(scenario, beamwidth, [q1, q2, q3]) in rows(parameter) {
            let target = QuartileTarget {
                q1,
                q2,
                q3,
                discretized: parameter.is_count(),
            };
            out.insert((ProfileId::new(scenario, beamwidth), parameter), target);
        }
    }
    out
}

pub fn builtin_target(id: ProfileId, parameter: Parameter) -> Option<QuartileTarget> {
    rows(parameter)
        .iter()
        .find(|r| r.0 == id.scenario && r.1 == id.beamwidth_deg)
        .map(|&(_, _, [q1, q2, q3])| QuartileTarget {
            q1,
            q2,
            q3,
            discretized: parameter.is_count(),
        })
}

/// Family assigned to a cell, or `None` where it must be chosen by
/// calibration (tunnel-80 cluster count).
pub fn assigned_family(id: ProfileId, parameter: Parameter) -> Option<Family> {
    let side = id.scenario == Scenario::SideTunnel;
    Some(match parameter {
        Parameter::NumClusters if id == ProfileId::new(Scenario::Tunnel, 80) => return None,
        Parameter::NumClusters => Family::Gev,
        Parameter::InterclusterDelay if side => Family::Gev,
        Parameter::InterclusterDelay => Family::Gpd,
        Parameter::ClusterAmplitude if side => Family::Gpd,
        Parameter::ClusterAmplitude => Family::Gev,
        Parameter::PathsPerCluster if side => Family::Gamma,
        Parameter::PathsPerCluster => Family::Gpd,
        Parameter::PathAmplitude if side => Family::InverseGaussian,
        Parameter::PathAmplitude => Family::Gev,
    })
}

/// Published `(lo, hi)` box per parameter in `[shape, scale, location]`
/// order, shared by every scenario except the side tunnel. Cluster counts
/// in tunnel-80 are excluded as well.
pub fn published_bounds(id: ProfileId, parameter: Parameter) -> Option<[(f64, f64); 3]> {
    if id.scenario == Scenario::SideTunnel {
        return None;
    }
    match parameter {
        Parameter::NumClusters if id == ProfileId::new(Scenario::Tunnel, 80) => None,
        Parameter::NumClusters => Some([(0.31, 0.93), (0.9, 3.43), (1.42, 2.91)]),
        Parameter::InterclusterDelay => {
            Some([(-0.71, 0.93), (1.63e-9, 22.37e-9), (-214.29e-11, -2.22e-15)])
        }
        Parameter::ClusterAmplitude => Some([(0.27, 0.96), (0.01, 0.03), (0.02, 0.04)]),
        Parameter::PathsPerCluster => Some([(-0.36, -0.12), (2.32, 3.37), (1.0, 1.0)]),
        Parameter::PathAmplitude => Some([(0.37, 0.95), (0.01, 0.03), (0.02, 0.04)]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn forty_targets() {
        let t = builtin_targets();
        assert_eq!(t.len(), 40);
        let tunnel7 = ProfileId::new(Scenario::Tunnel, 7);
        let hall80 = ProfileId::new(Scenario::ExperimentalHall, 80);
        let side = ProfileId::new(Scenario::SideTunnel, 20);
        let q = |id, p| {
            let x: &QuartileTarget = &t[&(id, p)];
            [x.q1, x.q2, x.q3]
        };
        assert_eq!(q(tunnel7, Parameter::NumClusters), [2.0, 2.0, 2.0]);
        assert_eq!(q(hall80, Parameter::InterclusterDelay), [2.4e-9, 8.7e-9, 2.1e-8]);
        assert_eq!(q(side, Parameter::PathsPerCluster), [7.0, 9.0, 10.0]);
        assert!(t.values().all(|x| x.q1 <= x.q2 && x.q2 <= x.q3));
        assert!(t
            .iter()
            .all(|((_, p), x)| x.discretized == p.is_count()));
    }

    #[test]
    fn mechanical_room_delay_row_duplicates_tunnel_20() {
        let a = builtin_target(ProfileId::new(Scenario::MechanicalRoom, 20), Parameter::InterclusterDelay);
        let b = builtin_target(ProfileId::new(Scenario::Tunnel, 20), Parameter::InterclusterDelay);
        assert_eq!(a, b);
    }
}
