mod common;

use common::*;
use logit_kalman::data::{generate, StreamSpec};
use logit_kalman::lab::run_trace;
use logit_kalman::learners::*;
use logit_kalman::linalg::{max_eigenvalue, norm, sub, SpdMatrix};
use logit_kalman::loss::hessian_weight;
use nalgebra::DVector;
use proptest::prelude::*;

const EKF: LearnerSpec = LearnerSpec::Ekf { p1: 1.0 };

fn stream(n: usize, theta_true: Vec<f64>, seed: u64) -> logit_kalman::data::Stream {
    generate(&StreamSpec::wellspecified(n, theta_true, seed)).unwrap()
}

fn difference(a: &SpdMatrix, b: &SpdMatrix) -> Vec<f64> {
    a.as_row_major().iter().zip(b.as_row_major()).map(|(x, y)| x - y).collect()
}

#[test]
fn ekf_matrices_decrease_in_loewner_order() {
    for (seed, p1) in [(1u64, 1.0), (2, 0.3), (3, 5.0)] {
        let s = stream(1000, vec![1.5, -0.5, 0.8], seed);
        let mut l = LearnerSpec::Ekf { p1 }.build(3).unwrap();
        let top = SpdMatrix::scaled_identity(3, p1);
        let mut prev = l.state().p_matrix.clone();
        for o in &s.observations {
            l.update(o).unwrap();
            let p = &l.state().p_matrix;
            // lambda_max(P_t - P_{t+1}) >= -1e-10 and, more sharply, P_{t+1} <= P_t
            assert!(max_eigenvalue(3, &difference(&prev, p)) >= -1e-10);
            assert!(-max_eigenvalue(3, &difference(p, &prev)) >= -1e-10);
            assert!(-max_eigenvalue(3, &difference(p, &top)) >= -1e-10);
            assert!(p.is_spd());
            prev = p.clone();
        }
    }
}

#[test]
fn ekf_information_identity_by_accumulation() {
    let s = stream(2000, vec![1.0, 2.0, -1.0, 0.5], 7);
    let trace = run_trace(&EKF, &s).unwrap();
    let mut acc = nalgebra::DMatrix::<f64>::zeros(4, 4);
    let mut l = EKF.build(4).unwrap();
    for (t, o) in s.observations.iter().enumerate() {
        let w = hessian_weight(&o.x, trace.theta_at(t + 1)).unwrap();
        let x = DVector::from_column_slice(&o.x);
        acc += &x * x.transpose() * w;
        l.update(o).unwrap();
        if (t + 1) % 250 == 0 {
            let p_inv = dense_inverse(&to_dense(&l.state().p_matrix));
            let lhs = p_inv - nalgebra::DMatrix::<f64>::identity(4, 4);
            assert!(rel_frobenius(&lhs, &acc) <= 1e-8, "t = {}: {}", t + 1, rel_frobenius(&lhs, &acc));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn sos_and_ekf_agree_after_one_step(
        x in prop::collection::vec(-3.0f64..3.0, 1..6),
        pos in any::<bool>(),
        p1 in 0.1f64..10.0,
    ) {
        let d = x.len();
        let o = logit_kalman::loss::Observation::new(x, label(pos)).unwrap();
        let s0 = LearnerState::new(d, p1).unwrap();
        let e = ekf_step(&s0, &o).unwrap();
        let s = sos_step(&s0, &History::from(vec![o.clone()]), &o).unwrap();
        for (a, b) in e.theta.iter().zip(&s.theta) {
            prop_assert!((a - b).abs() <= 1e-14);
        }
        for (a, b) in e.p_matrix.as_row_major().iter().zip(s.p_matrix.as_row_major()) {
            prop_assert!((a - b).abs() <= 1e-14);
        }
    }

    #[test]
    fn second_order_states_stay_positive_definite(seed in 0u64..1000, d in 1usize..5) {
        let tt: Vec<f64> = (0..d).map(|i| if i % 2 == 0 { 1.5 } else { -1.0 }).collect();
        let s = stream(120, tt, seed);
        for spec in [EKF, LearnerSpec::Sos { p1: 1.0 }] {
            let mut l = spec.build(d).unwrap();
            for o in &s.observations {
                l.update(o).unwrap();
                prop_assert!(l.state().p_matrix.is_spd());
            }
        }
    }

    #[test]
    fn ftl_postconditions(seed in 0u64..500, n in 0usize..60, p1 in 0.2f64..5.0) {
        let s = stream(n.max(1), vec![2.0, -1.0], seed);
        let obs = &s.observations[..n];
        let init = [0.3, 0.3];
        let th = ftl_fit(obs, p1, &init).unwrap();
        prop_assert!(norm(&ftl_gradient(obs, p1, &th)) <= 1e-10);
        let (f_end, f_init) = (ftl_objective(obs, p1, &th), ftl_objective(obs, p1, &init));
        prop_assert!(f_end <= f_init + 1e-12 * (1.0 + f_init.abs()));
    }
}

#[test]
fn sos_tracks_the_leader() {
    // standard spec (||theta_true|| = 1): summed distance to the FTL fit over
    // the last 50 steps vs the first 50, pooled over seeds
    let (mut early, mut late) = (0.0, 0.0);
    for seed in 0..20u64 {
        let s = stream(200, vec![1.0, 0.0], seed);
        let trace = run_trace(&LearnerSpec::Sos { p1: 1.0 }, &s).unwrap();
        for t in 1..=200 {
            let leader = ftl_fit(&s.observations[..t - 1], 1.0, &[0.0, 0.0]).unwrap();
            let gap = norm(&sub(trace.theta_at(t), &leader));
            if t <= 50 {
                early += gap;
            } else if t > 150 {
                late += gap;
            }
        }
    }
    assert!(late <= early, "late {late} early {early}");
}

#[test]
fn sos_gap_to_the_leader_shrinks_after_the_transient() {
    let s = stream(2000, vec![1.0, -1.0], 0);
    let trace = run_trace(&LearnerSpec::Sos { p1: 1.0 }, &s).unwrap();
    let gap = |t: usize| {
        let leader = ftl_fit(&s.observations[..t - 1], 1.0, &[0.0, 0.0]).unwrap();
        norm(&sub(trace.theta_at(t), &leader))
    };
    assert_eq!(gap(1), 0.0);
    assert!(gap(2000) < gap(200) && gap(200) < gap(50));
}

#[test]
fn traces_are_bit_identical_across_runs() {
    let s = stream(300, vec![0.5, 0.5, 0.5], 99);
    for spec in [EKF, LearnerSpec::Sos { p1: 1.0 }, LearnerSpec::Ogd { p1: 1.0, rate: RateSchedule::default() }] {
        assert_eq!(run_trace(&spec, &s).unwrap(), run_trace(&spec, &s).unwrap());
    }
}

#[test]
fn ftl_scalar_root_against_bisection() {
    // root of theta (1 + e^theta) = 1
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * (1.0 + mid.exp()) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let th = ftl_fit(&[obs(&[1.0], 1)], 1.0, &[0.0]).unwrap();
    assert!((th[0] - lo).abs() <= 1e-12);
    assert!((th[0] - 0.4012).abs() <= 1e-3);
}

#[test]
fn learner_rejects_non_finite_state() {
    let mut l = EKF.build(2).unwrap();
    l.perturb_theta(&[f64::NAN, 0.0]);
    assert!(l.update(&obs(&[1.0, 0.0], 1)).is_err());
}
