//! Cross-checks a differentiator run against the autonomous error dynamics.
//!
//! The estimation errors against the divided-difference reference evolve as
//! a standalone discrete system driven by the noise and by the highest-order
//! divided difference. Stepping that system next to the differentiator must
//! reproduce the same trajectory; this pins the two implementations to each
//! other and the reference table to both.

use ired::analysis::{divided_differences, error_states, in_invariant_set, ErrorSystem};
use ired::sim::{NoiseModel, SignalModel};
use ired::{DifferentiatorConfig, Ired};

#[test]
fn run_and_error_system_stay_in_lockstep() {
    let m = 2;
    let t = 0.1;
    let steps = 400;
    let signal = SignalModel::SinMinusCosHalf;
    let big_l = signal.lipschitz_bound(m, steps as f64 * t);
    let cfg = DifferentiatorConfig::new(m, big_l, t, vec![2.0, 2.12, 1.1], 1e-9).unwrap();
    let mut d = Ired::new(cfg.clone()).unwrap();
    let es = ErrorSystem::new(&cfg);
    let table = divided_differences(|tt| signal.extended(tt, m), m, t, steps);
    let mut eta = NoiseModel::Uniform {
        bound: 5e-6,
        seed: 11,
    }
    .sampler();

    let mut x = error_states(&d.state().z, &table, 0).unwrap();
    let mut tail_sliding = true;
    for k in 0..steps {
        let e = eta.next_sample();
        let u = signal.eval(k as f64 * t, 0) + e;
        let out = d.step(u).unwrap();
        let delta = table.get(m + 2, k + 1).unwrap();
        let step = es.step(&x, e, delta).unwrap();
        assert_eq!(out.sliding, step.sliding, "branch mismatch at step {k}");
        let direct = error_states(&d.state().z, &table, k + 1).unwrap();
        for (i, (a, b)) in step.x_next.iter().zip(direct.iter()).enumerate() {
            assert!(
                (a - b).abs() <= 1e-9,
                "error component {i} diverged at step {k}: {a} vs {b}"
            );
        }
        x = step.x_next;
        if k >= 3 * steps / 4 {
            tail_sliding &= out.sliding;
        }
    }
    // The noise is small enough for the terminal sliding regime: the errors
    // end up in the invariant set and every late step slides.
    assert!(in_invariant_set(&x, &cfg));
    assert!(tail_sliding);
}
