use hpa_core::dde::{
    find_limit_cycle, integrate, CycleOptions, DimensionalParams, History, NondimParams, State,
};
use proptest::prelude::*;

fn quick() -> CycleOptions {
    CycleOptions {
        transient: 100.0,
        detect_window: 12.0,
        step: 1e-3,
    }
}

#[test]
fn rk4_error_drops_by_at_least_twelve_when_step_halves() {
    let p = NondimParams::default();
    let hist = History::Constant(State::new(1.2, 0.8));
    let end = |step: f64| integrate(&p, hist.clone(), 0.0, 5.0, step).unwrap().final_state();
    // every step divides both the delay 0.15 and the horizon 5
    let coarse = 0.005;
    let reference = end(coarse / 8.0);
    let e1 = (end(coarse) - reference).norm_inf();
    let e2 = (end(coarse / 2.0) - reference).norm_inf();
    assert!(e1 / e2 >= 12.0, "ratio {}", e1 / e2);
}

#[test]
fn bounded_box_after_transient() {
    let p = NondimParams::default();
    let traj = integrate(&p, History::Constant(State::new(4.0, 7.0)), 0.0, 60.0, 1e-3).unwrap();
    for (t, s, _) in traj.nodes().filter(|(t, _, _)| *t > 20.0) {
        assert!(s.x <= p.h * p.c2 / p.c1 + 1.0, "x at {t}");
        assert!(s.y <= p.c3 + 1.0, "y at {t}");
    }
}

#[test]
fn cycle_closes_under_reintegration() {
    let p = NondimParams::default();
    let cycle = find_limit_cycle(&p, &quick()).unwrap();
    let w = cycle.period;
    let traj = integrate(&p, cycle.history(1e-3), 0.0, 2.0 * w, 1e-3).unwrap();
    let worst = (0..=400)
        .map(|k| w * k as f64 / 400.0)
        .map(|t| (traj.eval(t) - traj.eval(t + w)).norm_inf())
        .fold(0.0, f64::max);
    assert!(worst <= 1e-5, "{worst}");
    // both hormones oscillate
    let ((x0, x1), (y0, y1)) = cycle.ranges();
    assert!(x1 - x0 > 0.1 && y1 - y0 > 0.1);
}

#[test]
fn consecutive_periods_agree() {
    let p = NondimParams::default();
    let cycle = find_limit_cycle(&p, &quick()).unwrap();
    let w = cycle.period;
    let traj = integrate(&p, cycle.history(1e-3), 0.0, 3.2 * w, 1e-3).unwrap();
    // maxima of x on the re-integrated run
    let xs: Vec<(f64, f64)> = traj.nodes().map(|(t, s, _)| (t, s.x)).collect();
    let peaks: Vec<f64> = xs
        .windows(3)
        .filter(|w| w[1].1 > w[0].1 && w[1].1 >= w[2].1 && w[1].1 > cycle.eval(0.0).x - 0.01)
        .map(|w| {
            let d = w[0].1 - 2.0 * w[1].1 + w[2].1;
            w[1].0 + 0.5 * (w[1].0 - w[0].0) * (w[0].1 - w[2].1) / d
        })
        .collect();
    assert!(peaks.len() >= 3, "{peaks:?}");
    let p1 = peaks[1] - peaks[0];
    let p2 = peaks[2] - peaks[1];
    assert!(((p1 - p2) / p2).abs() <= 1e-4, "{p1} {p2}");
}

#[test]
fn period_is_continuous_in_h() {
    let a = find_limit_cycle(&NondimParams::default(), &quick()).unwrap();
    let b = find_limit_cycle(&NondimParams::default().with_h(7.67), &quick()).unwrap();
    assert!((a.period - b.period).abs() <= 0.05 * a.period);
}

#[test]
fn dimensional_defaults_reach_reference_constants() {
    let p = DimensionalParams::default().nondimensionalize().unwrap();
    assert_eq!(p.c1, 4.0);
    assert!((p.c2 - 1.0 / 0.21).abs() < 1e-12);
    assert!((p.c3 - 1.0 / 0.0611).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn nonnegative_histories_stay_nonnegative(x0 in 0.0f64..5.0, y0 in 0.0f64..8.0, h in 0.0f64..23.0) {
        let p = NondimParams::default().with_h(h);
        let traj = integrate(&p, History::Constant(State::new(x0, y0)), 0.0, 5.0, 1e-3).unwrap();
        for (_, s, _) in traj.nodes() {
            prop_assert!(s.x >= -1e-9 && s.y >= -1e-9);
        }
    }

    #[test]
    fn hermite_evaluation_is_continuous(t in 0.0f64..2.0) {
        let p = NondimParams::default();
        let traj = integrate(&p, History::Constant(State::new(1.0, 1.0)), 0.0, 2.0, 1e-3).unwrap();
        let d = (traj.eval(t + 1e-9) - traj.eval(t)).norm_inf();
        prop_assert!(d < 1e-6);
    }
}
