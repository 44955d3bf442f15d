use mmchan::{DistributionSpec, Family};
use proptest::prelude::*;

fn any_spec() -> impl Strategy<Value = DistributionSpec> {
    prop_oneof![
        (-0.45f64..0.45, 0.1f64..5.0, -3.0f64..3.0).prop_map(|(k, s, m)| DistributionSpec::gev(k, s, m).unwrap()),
        (-0.45f64..0.45, 0.1f64..5.0, -3.0f64..3.0).prop_map(|(k, s, t)| DistributionSpec::gpd(k, s, t).unwrap()),
        (0.2f64..20.0, 0.01f64..5.0).prop_map(|(a, b)| DistributionSpec::gamma(a, b).unwrap()),
        (0.05f64..5.0, 0.05f64..50.0).prop_map(|(m, l)| DistributionSpec::inverse_gaussian(m, l).unwrap()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 512, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn quantile_inverts_cdf(spec in any_spec(), p in 0.001f64..0.999) {
        let x = spec.quantile(p).unwrap();
        prop_assert!((spec.cdf(x) - p).abs() < 1e-7, "{spec}: cdf(q({p})) = {}", spec.cdf(x));
    }

    #[test]
    fn cdf_is_monotone_and_bounded(spec in any_spec(), a in -10.0f64..20.0, b in -10.0f64..20.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (flo, fhi) = (spec.cdf(lo), spec.cdf(hi));
        prop_assert!((0.0..=1.0).contains(&flo) && (0.0..=1.0).contains(&fhi));
        prop_assert!(flo <= fhi + 1e-15);
        prop_assert!((spec.cdf(lo) + spec.sf(lo) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn samples_stay_in_support(spec in any_spec(), seed in any::<u64>()) {
        let (lo, hi) = spec.support();
        for x in spec.sample(200, seed) {
            prop_assert!(x >= lo && x <= hi, "{spec}: {x} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn params_round_trip(spec in any_spec()) {
        let back = DistributionSpec::from_params(spec.family(), &spec.params()).unwrap();
        prop_assert_eq!(back, spec);
    }
}

#[test]
fn constructors_reject_bad_parameters() {
    assert!(DistributionSpec::gev(0.1, -1.0, 0.0).is_err());
    assert!(DistributionSpec::gpd(0.1, 0.0, 0.0).is_err());
    assert!(DistributionSpec::gamma(0.0, 1.0).is_err());
    assert!(DistributionSpec::inverse_gaussian(1.0, f64::NAN).is_err());
    assert!(DistributionSpec::from_params(Family::Gamma, &[1.0]).is_err());
}

#[test]
fn point_mass_is_exact() {
    let pm = DistributionSpec::point_mass(2.5).unwrap();
    assert!(pm.sample(100, 3).iter().all(|&x| x == 2.5));
    assert_eq!(pm.cdf(2.5), 1.0);
    assert_eq!(pm.cdf(2.4999), 0.0);
}

// Frozen from scipy.stats: genextreme(c=-0.4, scale=2, loc=2).ppf(0.75) and
// genpareto(c=-0.36, scale=2.32, loc=1).cdf(3).
#[test]
fn reference_values() {
    let gev = DistributionSpec::gev(0.4, 2.0, 2.0).unwrap();
    assert!((gev.quantile(0.75).unwrap() - 5.230_095_692_642_902).abs() < 1e-9);
    let gpd = DistributionSpec::gpd(-0.36, 2.32, 1.0).unwrap();
    assert!((gpd.cdf(3.0) - 0.643_749_445_208_220_4).abs() < 1e-9);
}
