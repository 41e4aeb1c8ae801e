//! Property tests for the determinism, support, and algebraic-identity
//! contracts.

use proptest::prelude::*;

use mvoed::estimators::{estimate_objective, EstimatorConfig};
use mvoed::model::{
    build_sample_bank, sample_prior, DesignConstraint, DesignDomain, DesignPoint, ForwardModel,
    GaussianNoiseModel, Prior, ProblemDefinition, Rect,
};
use mvoed::models;

/// Minimal problem with an obstacle-masked prior (forward model is
/// irrelevant to the support property).
fn masked_problem(obstacles: Vec<Rect>) -> ProblemDefinition {
    ProblemDefinition::new(
        "masked-test",
        Prior::masked_uniform(obstacles).unwrap(),
        ForwardModel::ConstantZero { n: 1, p: 2 },
        GaussianNoiseModel::iid(1.0, 1).unwrap(),
        DesignDomain::new(vec![(0.0, 1.0)]).unwrap(),
        DesignConstraint::BoxOnly,
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Every draw of an obstacle-masked prior lands in the accessible
    /// region, for any seed.
    #[test]
    fn masked_prior_support_holds_for_all_seeds(seed in any::<u64>()) {
        let rect = Rect::new(0.25, 0.55, 0.3, 0.7).unwrap();
        let problem = masked_problem(vec![rect]);
        let draws = sample_prior(&problem, 64, seed).unwrap();
        for s in draws {
            prop_assert!(problem.prior().supports(&s));
            prop_assert!(!rect.contains(s.0[0], s.0[1]));
        }
    }

    /// Banks regenerate bit-identically from their seed.
    #[test]
    fn bank_regeneration_is_bit_identical(seed in any::<u64>(), size in 2usize..128) {
        let problem = models::by_name("lingauss-1d").unwrap();
        let a = build_sample_bank(&problem, size, seed).unwrap();
        let b = build_sample_bank(&problem, size, seed).unwrap();
        prop_assert_eq!(a.prior_samples(), b.prior_samples());
        prop_assert_eq!(a.noise_draws(), b.noise_draws());
    }

    /// The report identities hold bit-exactly for arbitrary seeds,
    /// sample sizes, penalties, and designs.
    #[test]
    fn report_identities_hold_for_random_configs(
        seed in any::<u64>(),
        n in 2usize..64,
        lambda in -2.0f64..2.0,
        xi in 0.0f64..3.0,
    ) {
        let problem = models::by_name("lingauss-1d").unwrap();
        let config = EstimatorConfig::reuse(n, lambda);
        let r = estimate_objective(&problem, &DesignPoint(vec![xi]), &config, seed).unwrap();
        prop_assert_eq!(r.m2_hat.to_bits(), (r.m2a + r.m2b + r.m2c).to_bits());
        prop_assert_eq!(r.v_hat.to_bits(), (r.m2_hat - r.u_hat * r.u_hat).to_bits());
        prop_assert_eq!(r.j_hat.to_bits(), (r.u_hat - lambda * r.v_hat).to_bits());
    }

    /// lambda = 0 reduces the objective to the expected utility.
    #[test]
    fn lambda_zero_reduction(seed in any::<u64>(), n in 2usize..64) {
        let problem = models::by_name("nonlinear-1d").unwrap();
        let config = EstimatorConfig::reuse(n, 0.0);
        let r = estimate_objective(&problem, &DesignPoint(vec![0.4]), &config, seed).unwrap();
        prop_assert_eq!(r.j_hat.to_bits(), r.u_hat.to_bits());
    }
}
