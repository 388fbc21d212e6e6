//! Bulk consistency between the threshold, the rest points, and their
//! spectra, over randomly drawn rate sets.

use hvsis::analyze::characteristic_residual;
use hvsis::{
    dfe, eigenvalues_3x3, endemic_equilibrium, jacobian, local_stability, threshold,
    ControlInputs, HvState, ModelParams, Stability,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn log_uniform(rng: &mut StdRng, lo: f64, hi: f64) -> f64 {
    (lo.ln() + rng.random_range(0.0..1.0) * (hi.ln() - lo.ln())).exp()
}

fn random_params(rng: &mut StdRng) -> ModelParams {
    ModelParams::new(
        log_uniform(rng, 0.05, 2.0),
        log_uniform(rng, 0.05, 2.0),
        log_uniform(rng, 0.05, 2.0),
        log_uniform(rng, 0.05, 2.0),
        log_uniform(rng, 0.05, 2.0),
    )
    .unwrap()
}

/// One threshold decides everything at once: whether the endemic point
/// exists, whether the disease-free point is stable, and whether the
/// endemic point (when present) is stable.
#[test]
fn threshold_decides_existence_and_stability_in_bulk() {
    let mut rng = StdRng::seed_from_u64(42);
    let mut supercritical = 0;
    let mut checked = 0;
    while checked < 200 {
        let p = random_params(&mut rng);
        let sigma = threshold(&p, &ControlInputs::NONE);
        // Stay off the bifurcation, where the verdict is legitimately marginal.
        if (sigma - 1.0).abs() <= 1e-4 {
            continue;
        }
        checked += 1;
        let analysis = local_stability(&p, &ControlInputs::NONE);
        assert_eq!(analysis.dfe.threshold_value, sigma);
        if sigma > 1.0 {
            supercritical += 1;
            assert_eq!(
                analysis.dfe.stability,
                Stability::Unstable,
                "sigma = {sigma}"
            );
            let ee = analysis.ee.expect("endemic point exists above threshold");
            assert_eq!(ee.stability, Stability::ExponentiallyStable, "sigma = {sigma}");
            let pt = &ee.point;
            assert!(pt.x() > 0.0 && pt.x() < 1.0);
            assert!(pt.y() > 0.0 && pt.z() > 0.0);
            let rest = p.vector_rest_level();
            assert!(
                ((pt.y() + pt.z()) - rest).abs() <= 1e-12 * rest.max(1.0),
                "rest-point vector total drifted from the shell"
            );
        } else {
            assert_eq!(
                analysis.dfe.stability,
                Stability::ExponentiallyStable,
                "sigma = {sigma}"
            );
            assert!(analysis.ee.is_none());
        }
    }
    // The draw ranges straddle the threshold; make sure both sides showed up.
    assert!(supercritical > 20 && supercritical < 180);
}

/// Minus the controlled vector death rate is an eigenvalue at any state,
/// inherited from the decoupled total-vector equation.
#[test]
fn dfe_spectrum_always_contains_minus_the_vector_death_rate() {
    let mut rng = StdRng::seed_from_u64(43);
    for _ in 0..50 {
        let p = random_params(&mut rng);
        let u1 = rng.random_range(0.0..0.5);
        let u2 = rng.random_range(0.0..p.beta_h());
        let u = ControlInputs::new(&p, u1, u2).unwrap();
        let j = jacobian(&p, &u, &dfe(&p, &u)).unwrap();
        let lambda = hvsis::Complex64::new(-(p.mu() + u1), 0.0);
        let scale = j.max_abs().max(1.0).powi(3);
        assert!(
            characteristic_residual(&j, lambda) <= 1e-12 * scale,
            "residual {} at mu + u1 = {}",
            characteristic_residual(&j, lambda),
            p.mu() + u1
        );
    }
}

/// Just above the threshold the endemic point is a small perturbation of
/// the disease-free one: the bifurcation is continuous.
#[test]
fn endemic_point_merges_with_disease_free_at_the_threshold() {
    let mu = (0.2 * 0.2 * 0.2 / (0.4 * 1.0001f64)).sqrt();
    let p = ModelParams::new(0.4, 0.2, 0.2, 0.2, mu).unwrap();
    let sigma = threshold(&p, &ControlInputs::NONE);
    assert!((sigma - 1.0001).abs() < 1e-10);
    let ee = endemic_equilibrium(&p, &ControlInputs::NONE).unwrap();
    let free = dfe(&p, &ControlInputs::NONE);
    let gap = (ee.x() - free.x())
        .abs()
        .max((ee.y() - free.y()).abs())
        .max((ee.z() - free.z()).abs());
    assert!(gap < 1e-3, "gap {gap} too large for sigma = {sigma}");
}

/// The auxiliary coordinates are a fixed linear change of variables, so
/// both Jacobians must carry the same spectrum at the same state.
#[test]
fn eigenvalues_match_between_coordinate_systems() {
    let mut rng = StdRng::seed_from_u64(44);
    for _ in 0..20 {
        let p = random_params(&mut rng);
        let s = HvState::new(
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..3.0),
            rng.random_range(0.0..3.0),
        )
        .unwrap();
        let direct = eigenvalues_3x3(&jacobian(&p, &ControlInputs::NONE, &s).unwrap());
        let via_aux = eigenvalues_3x3(
            &hvsis::aux_jacobian(&p, &ControlInputs::NONE, &s.to_aux()).unwrap(),
        );
        for (a, b) in direct.iter().zip(via_aux.iter()) {
            let scale = direct.iter().map(|e| e.norm()).fold(1.0, f64::max);
            assert!(
                (a - b).norm() <= 1e-9 * scale,
                "spectra disagree: {direct:?} vs {via_aux:?}"
            );
        }
    }
}

/// Rest-point reports quote the same threshold the formula gives, also
/// under controls.
#[test]
fn stability_report_quotes_the_controlled_threshold() {
    let mut rng = StdRng::seed_from_u64(45);
    for _ in 0..50 {
        let p = random_params(&mut rng);
        let u1 = rng.random_range(0.0..0.3);
        let u2 = rng.random_range(0.0..p.beta_h());
        let u = ControlInputs::new(&p, u1, u2).unwrap();
        let m = p.mu() + u1;
        let direct = (p.beta_h() - u2) * p.beta_v() * p.omega() / (p.gamma() * m * m);
        let sigma = threshold(&p, &u);
        assert!((sigma - direct).abs() <= 1e-14 * direct.max(1.0));
        let analysis = local_stability(&p, &u);
        assert_eq!(analysis.dfe.threshold_value, sigma);
        assert_eq!(analysis.ee.is_some(), sigma > 1.0);
    }
}
