use cohobs_core::synthesis::mt_report;
use cohobs_core::*;
use nalgebra::{dmatrix, dvector, DMatrix};

fn single_mode() -> QuadratureSystemF64 {
    QuadratureSystem::with_standard_feedthrough(
        DMatrix::from_diagonal(&dvector![-0.4, -0.6]),
        -DMatrix::identity(2, 2),
        DMatrix::identity(2, 2),
    )
    .unwrap()
}

fn separable_start(n: usize, mu_p: nalgebra::DVector<f64>, sp: f64) -> MomentStateF64 {
    MomentState::new(
        0.0,
        mu_p,
        nalgebra::DVector::zeros(n),
        DMatrix::identity(n, n) * sp,
        DMatrix::zeros(n, n),
        DMatrix::identity(n, n) * 2.0,
        1e-12,
    )
    .unwrap()
}

#[test]
fn single_mode_cmt_tracks_and_entangles() {
    let plant = single_mode();
    let (obs, _) = cmt_synthesize(&plant, &DMatrix::identity(2, 2), &SynthesisOptions::default()).unwrap();
    let joint = build_joint_system(&plant, &obs).unwrap();
    let init = separable_start(2, dvector![1.0, 1.0], 1.1);
    let opts = IntegrationOptions { t_final: 8.0, dt: 1e-3, sample_stride: 100 };
    let traj = integrate_joint_moments(&joint, &init, opts).unwrap();
    assert_eq!(traj.psd_warnings, 0);

    assert!((ppt_nu_minus(&traj.states[0].joint_covariance()).unwrap() - 1.1).abs() < 1e-12);
    let last = traj.states.last().unwrap();
    assert!(covariance_error_norm(&last.sigma_p, &last.sigma_o).unwrap() < 1e-6);
    assert!(ppt_nu_minus(&last.joint_covariance()).unwrap() < 1.0);

    let ss = joint.steady_state().unwrap();
    assert!((ss.view((0, 0), (2, 2)) - ss.view((2, 2), (2, 2))).norm() < 1e-10);
    assert!((&ss - last.joint_covariance()).amax() < 1e-2);

    let long = IntegrationOptions { t_final: 30.0, dt: 1e-2, sample_stride: usize::MAX };
    let end = integrate_joint_moments(&joint, &init, long).unwrap();
    assert!((ss - end.states.last().unwrap().joint_covariance()).amax() < 1e-8);
}

#[test]
fn single_mode_mt_observer_fidelity_stays_below_one() {
    let plant = single_mode();
    let k = DMatrix::identity(2, 2) * 3.0;
    let obs = ObserverModel::new(&plant, k, dmatrix![1.0, 0.0; 0.0, -2.0], 2, None, 1e-10).unwrap();
    assert!(mt_report(&plant, &obs).feasible);
    let joint = build_joint_system(&plant, &obs).unwrap();
    let ss = joint.steady_state().unwrap();
    let a = GaussianState::new(nalgebra::DVector::zeros(2), ss.view((0, 0), (2, 2)).into_owned(), 1e-9, true).unwrap();
    let b = GaussianState::new(nalgebra::DVector::zeros(2), ss.view((2, 2), (2, 2)).into_owned(), 1e-9, true).unwrap();
    let f = gaussian_fidelity_single_mode(&a, &b).unwrap();
    assert!(f < 0.9 && f > 0.7, "MT steady fidelity {f}");
}

#[test]
fn two_mode_entanglement_is_tracked() {
    let plant = QuadratureSystem::with_standard_feedthrough(
        dmatrix![-0.4, 0.0, 0.0, 0.0; 0.0, -0.6, 0.0, 0.0; 1.0, 0.0, -1.4, 0.0; 0.0, 1.0, 0.0, -1.6],
        dmatrix![-1.0, 0.0, 0.0, 0.0; 0.0, -1.0, 0.0, 0.0; 1.0, 0.0, 1.0, 0.0; 0.0, 1.0, 0.0, 2.0],
        dmatrix![1.0, 0.0, -1.0, 0.0; 0.0, 1.0, 0.0, -1.0; 0.0, 0.0, -2.0, 0.0; 0.0, 0.0, 0.0, -1.0],
    )
    .unwrap();
    assert!(check_physical_realizability(&plant, 1e-12).passed);
    let k = dmatrix![0.2, 0.0, -0.1, 0.0; 0.0, 0.05, 0.0, -0.1; 0.6, 0.0, -0.1, 0.0; 0.0, 0.4, 0.0, -0.1];
    let (obs, _) = cmt_synthesize(&plant, &k, &SynthesisOptions::default()).unwrap();
    let joint = build_joint_system(&plant, &obs).unwrap();
    let mut init = separable_start(4, nalgebra::DVector::zeros(4), 2.0);
    init.sigma_p = DMatrix::from_diagonal(&dvector![1.1, 1.1, 2.0, 2.0]);
    let opts = IntegrationOptions { t_final: 10.0, dt: 1e-3, sample_stride: 1000 };
    let traj = integrate_joint_moments(&joint, &init, opts).unwrap();
    let last = traj.states.last().unwrap();
    let nu_p = ppt_nu_minus(&last.sigma_p).unwrap();
    let nu_o = ppt_nu_minus(&last.sigma_o).unwrap();
    assert!((nu_p - nu_o).abs() < 1e-3);
    assert!(nu_p < 1.0);
}

#[test]
fn squeezing_plant_admits_no_cmt_observer() {
    let s2 = std::f64::consts::SQRT_2;
    let plant = QuadratureSystem::with_standard_feedthrough(
        dmatrix![-1.0, 1.0; 1.0, -1.0],
        DMatrix::identity(2, 2) * -s2,
        DMatrix::identity(2, 2) * s2,
    )
    .unwrap();
    assert!(check_physical_realizability(&plant, 1e-12).passed);
    assert!(!is_hurwitz(plant.a(), 1e-9).unwrap().stable);

    for g in [0.5, 1.0, 2.0, 3.0] {
        let k = DMatrix::identity(2, 2) * g;
        let obs = mt_synthesize(&plant, &k, &SynthesisOptions::default()).unwrap();
        let joint = build_joint_system(&plant, &obs).unwrap();
        let limit = theorem1_limit(&joint).unwrap();
        assert!(!limit.is_satisfied(1e-6), "gain {g}: {:?}", limit.value);
        assert!(matches!(cmt_synthesize(&plant, &k, &SynthesisOptions::default()), Err(Error::Precondition(_))));
    }
}
