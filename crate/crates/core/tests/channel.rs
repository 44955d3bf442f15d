use mmchan::channel::{
    apply_beam_filter, generate_realizations, realization_to_taps, AngularInfo, BeamPattern, ChannelRealization,
    Cluster, PathTap, AMPLITUDE_TOLERANCE,
};
use mmchan::profiles::{builtin_profile, ProfileId};
use proptest::prelude::*;

fn any_builtin() -> impl Strategy<Value = ProfileId> {
    prop::sample::select(ProfileId::BUILTIN.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn generated_channels_keep_their_invariants(id in any_builtin(), seed in any::<u64>()) {
        let profile = builtin_profile(id).unwrap();
        for r in generate_realizations(profile, 16, seed).unwrap() {
            let clusters = r.clusters();
            prop_assert_eq!(clusters[0].delay(), 0.0);
            for w in clusters.windows(2) {
                prop_assert!(w[1].delay() - w[0].delay() >= profile.tap_grid * (1.0 - 1e-12));
            }
            for c in clusters {
                prop_assert!(c.amplitude() > 0.0);
                prop_assert!(c.paths().len() as u32 <= profile.max_count);
                prop_assert_eq!(c.paths()[0].tau, 0.0);
                let mean = c.paths().iter().map(|p| p.alpha).sum::<f64>() / c.paths().len() as f64;
                prop_assert!(((mean - c.amplitude()) / c.amplitude()).abs() <= AMPLITUDE_TOLERANCE);
                for w in c.paths().windows(2) {
                    prop_assert!(w[1].tau > w[0].tau);
                }
            }
        }
    }

    #[test]
    fn batches_are_reproducible(id in any_builtin(), seed in any::<u64>()) {
        let profile = builtin_profile(id).unwrap();
        let a = generate_realizations(profile, 8, seed).unwrap();
        prop_assert_eq!(&a, &generate_realizations(profile, 8, seed).unwrap());
        // A shorter batch is a prefix of a longer one.
        prop_assert_eq!(&a[..3], &generate_realizations(profile, 3, seed).unwrap()[..]);
    }

    #[test]
    fn tap_export_preserves_power(id in any_builtin(), seed in any::<u64>()) {
        let profile = builtin_profile(id).unwrap();
        for r in generate_realizations(profile, 8, seed).unwrap() {
            let taps = realization_to_taps(&r, profile.tap_grid).unwrap();
            let power: f64 = r.clusters().iter().flat_map(|c| c.paths()).map(|p| p.alpha * p.alpha).sum();
            prop_assert!((taps.total_power() - power).abs() <= 1e-12 * power);
            prop_assert!(taps.len() <= r.path_count());
        }
    }

    #[test]
    fn beam_filter_is_idempotent(
        directions in prop::collection::vec((-180.0f64..180.0, -90.0f64..=90.0), 1..12),
        boresight in (-180.0f64..180.0, -60.0f64..=60.0),
        width in 5.0f64..180.0,
    ) {
        let clusters: Vec<Cluster> = directions
            .iter()
            .enumerate()
            .map(|(i, &(az, el))| {
                let mut c = Cluster::from_paths(i as f64 * 1e-9, vec![PathTap::new(0.0, 0.1 + i as f64)]).unwrap();
                c.set_angles(AngularInfo::rx(az, el).unwrap());
                c
            })
            .collect();
        let r = ChannelRealization::new(clusters, "grid", 0, 0).unwrap();
        let beam = BeamPattern::new(AngularInfo::rx(boresight.0, boresight.1).unwrap(), width).unwrap();
        match apply_beam_filter(&r, &beam) {
            Ok(once) => {
                prop_assert_eq!(once.clusters()[0].delay(), 0.0);
                prop_assert!(once.clusters().len() <= r.clusters().len());
                // Survivors are a subset of the input, identified by amplitude.
                for c in once.clusters() {
                    prop_assert!(r.clusters().iter().any(|o| o.amplitude() == c.amplitude()));
                }
                prop_assert_eq!(apply_beam_filter(&once, &beam).unwrap(), once);
            }
            Err(e) => prop_assert!(matches!(e, mmchan::Error::EmptyChannel)),
        }
    }
}

#[test]
fn clusters_reject_inconsistent_amplitudes() {
    assert!(Cluster::new(0.0, 0.07, vec![PathTap::new(0.0, 0.05)]).is_err());
    assert!(Cluster::from_paths(0.0, vec![PathTap::new(1e-9, 0.05)]).is_err());
    assert!(Cluster::from_paths(0.0, vec![]).is_err());
}

#[test]
fn realizations_need_ordered_clusters_from_zero() {
    let c = |t| Cluster::from_paths(t, vec![PathTap::new(0.0, 0.1)]).unwrap();
    assert!(ChannelRealization::new(vec![c(1e-9)], "x", 0, 0).is_err());
    assert!(ChannelRealization::new(vec![c(0.0), c(2e-9), c(1e-9)], "x", 0, 0).is_err());
    assert!(ChannelRealization::new(vec![], "x", 0, 0).is_err());
}

#[test]
fn beam_filter_requires_angles() {
    let r = ChannelRealization::new(
        vec![Cluster::from_paths(0.0, vec![PathTap::new(0.0, 0.1)]).unwrap()],
        "x",
        0,
        0,
    )
    .unwrap();
    let beam = BeamPattern::new(AngularInfo::rx(0.0, 0.0).unwrap(), 20.0).unwrap();
    assert!(matches!(apply_beam_filter(&r, &beam), Err(mmchan::Error::MissingAngles(0))));
}
