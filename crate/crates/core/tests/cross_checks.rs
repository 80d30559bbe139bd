//! Checks that span modules: samplers against enumeration, and structural
//! properties of the enumerated quantities.

use polymerlab::enumerate::{enumerate_measure, EnumOptions, SignRestriction};
use polymerlab::montecarlo::{estimate_clt, importance_replicas, perm_replicas, McParams, PermParams};
use polymerlab::ratefn::lambda_curve;
use polymerlab::{Exec, Model, StepDistribution};
use proptest::prelude::*;

fn assert_close(what: &str, mc: polymerlab::montecarlo::Estimate, exact: f64) {
    assert!(
        (mc.value - exact).abs() <= 4.0 * mc.stderr,
        "{what}: {} +- {} vs {exact}",
        mc.value,
        mc.stderr
    );
}

#[test]
fn importance_sampling_matches_enumeration() {
    let dist = StepDistribution::uniform_range(2).unwrap();
    let model = Model::DombJoyce { beta: 0.2 };
    let exact = enumerate_measure(&dist, 8, model, &EnumOptions::default()).unwrap();
    let mc = McParams { replicas: 16, seed: 3, exec: Exec::default() };
    let est = estimate_clt(&importance_replicas(&dist, 8, model, 4000, &mc).unwrap()).unwrap();
    assert_close("ln Z", est.log_z, exact.log_z);
    assert_close("theta", est.theta_hat, exact.q_expect(|x| x.abs() as f64) / 8.0);
}

#[test]
fn perm_on_strip_and_attraction_matches_enumeration() {
    let dist = StepDistribution::simple();
    let perm = PermParams { tours: 400, ..PermParams::default() };
    let mc = McParams { replicas: 16, seed: 5, exec: Exec::default() };
    for model in [Model::Strip { width: 1 }, Model::Attraction { beta: 0.5, gamma: 0.2 }] {
        let exact = enumerate_measure(&dist, 8, model, &EnumOptions::default()).unwrap();
        let est = estimate_clt(&perm_replicas(&dist, 8, model, &perm, &mc).unwrap()).unwrap();
        assert_close("ln Z", est.log_z, exact.log_z);
        assert_close("theta", est.theta_hat, exact.q_expect(|x| x.abs() as f64) / 8.0);
    }
}

#[test]
fn sampler_output_does_not_depend_on_execution_mode() {
    let dist = StepDistribution::simple();
    let model = Model::DombJoyce { beta: 0.3 };
    let perm = PermParams { tours: 50, ..PermParams::default() };
    let run = |exec| perm_replicas(&dist, 30, model, &perm, &McParams { replicas: 4, seed: 11, exec }).unwrap();
    assert_eq!(run(Exec::Sequential), run(Exec::Parallel));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn partition_decreases_in_beta(n in 1usize..9, b in 0.0f64..2.0, db in 0.01f64..1.0) {
        let dist = StepDistribution::simple();
        let opts = EnumOptions::sequential();
        let lo = enumerate_measure(&dist, n, Model::DombJoyce { beta: b }, &opts).unwrap();
        let hi = enumerate_measure(&dist, n, Model::DombJoyce { beta: b + db }, &opts).unwrap();
        prop_assert!(hi.z <= lo.z * (1.0 + 1e-12));
    }

    #[test]
    fn cumulant_function_is_convex(n in 2usize..8, beta in 0.0f64..1.0, l in 1u32..3) {
        let dist = StepDistribution::uniform_range(l).unwrap();
        let mus: Vec<f64> = (0..41).map(|i| -2.0 + 0.1 * i as f64).collect();
        for sign in [SignRestriction::None, SignRestriction::NonNegative] {
            let lam = lambda_curve(&dist, n, beta, &mus, sign, &EnumOptions::sequential()).unwrap();
            for w in lam.windows(3) {
                prop_assert!(w[2] - 2.0 * w[1] + w[0] >= -1e-9);
            }
        }
    }
}
