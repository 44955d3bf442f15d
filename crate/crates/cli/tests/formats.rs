use mmchan::profiles::{builtin_profiles, ProfileId};
use mmchan_cli::commands::synthetic_capture;
use mmchan_cli::formats::{parse_profile, parse_traces, profile_json, trace_line};
use mmchan::taps::{CaptureMeta, Tap, TapSeries};
use proptest::prelude::*;

#[test]
fn builtin_profiles_round_trip_through_json() {
    for profile in builtin_profiles().unwrap().values() {
        let text = profile_json(profile);
        assert!(text.contains("\"schema_version\":1"));
        assert_eq!(&parse_profile(&text).unwrap(), profile);
    }
}

#[test]
fn profile_json_rejects_bad_documents() {
    let profile = builtin_profiles().unwrap().values().next().unwrap();
    let text = profile_json(profile);
    for bad in [
        text.replace("\"schema_version\":1", "\"schema_version\":9"),
        text.replace("\"scale\"", "\"spread\""),
        text.replace("\"GEV\"", "\"Weibull\""),
        text.replace("\"path_amplitude\"", "\"path_phase\""),
        text.replace("\"tunnel-7\"", "\"tunnel\""),
    ] {
        assert!(parse_profile(&bad).is_err(), "{bad}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn synthetic_traces_reingest_exactly(k in 0usize..8, seed: u64, index in 0u64..1_000_000) {
        let profile = &builtin_profiles().unwrap()[&ProfileId::BUILTIN[k]];
        let series = synthetic_capture(profile, seed, index).unwrap();
        let parsed = parse_traces(&trace_line(&series)).unwrap();
        prop_assert_eq!(parsed, vec![series]);
    }

    #[test]
    fn arbitrary_floats_reingest_exactly(
        raw in prop::collection::vec((1e-15f64..1e-6, 1e-300f64..1e300), 1..16),
        beam in 0u8..32,
        width in 0.1f64..360.0,
    ) {
        let mut delay = 0.0;
        let taps: Vec<Tap> = raw
            .into_iter()
            .map(|(step, amplitude)| {
                delay += step;
                Tap { delay, amplitude }
            })
            .collect();
        let meta = CaptureMeta {
            location: "hall \u{e9}\t\"7\"".into(),
            beam_id: beam,
            scenario: "exp-hall".into(),
            beamwidth_deg: width,
            capture_index: 3,
        };
        let series = TapSeries::new(taps, meta).unwrap();
        let parsed = parse_traces(&trace_line(&series)).unwrap();
        prop_assert_eq!(parsed, vec![series]);
    }
}
