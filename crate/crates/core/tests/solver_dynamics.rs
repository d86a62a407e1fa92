use dpdgt::graph::CommGraph;
use dpdgt::problem::{ieee14_problem, AdjacencyPerturbation, AllocationProblem, QuadraticBoxCost};
use dpdgt::schedules::ScheduleSet;
use dpdgt::solver::{
    ddgt_update, Algorithm, BaselineParams, InitialState, RecordLevel, RunOptions, Simulator, SolverState,
};
use nalgebra::DMatrix;

fn noiseless(alpha0: f64, q: f64) -> ScheduleSet {
    ScheduleSet::geometric(alpha0, q, 0.0, 0.995, 0.0, 0.995, 0.8, 0.7).unwrap()
}

/// Independent evaluation: explicit loops, no matrix library.
fn loop_step(
    r: &[[f64; 2]; 2],
    c: &[[f64; 2]; 2],
    s: [f64; 2],
    tw: [f64; 2],
    w: [f64; 2],
    d: [f64; 2],
    (alpha, gamma, phi): (f64, f64, f64),
) -> ([f64; 2], [f64; 2]) {
    let mut s1 = [0.0; 2];
    let mut tw1 = [0.0; 2];
    for i in 0..2 {
        let mut cs = 0.0;
        let mut rw = 0.0;
        for j in 0..2 {
            cs += c[i][j] * s[j];
            rw += r[i][j] * tw[j];
        }
        s1[i] = (1.0 - gamma) * s[i] + gamma * cs - alpha * (w[i] - d[i]);
        tw1[i] = (1.0 - phi) * tw[i] + phi * rw + (s1[i] - s[i]);
    }
    (s1, tw1)
}

#[test]
fn two_agent_steps_match_loop_arithmetic() {
    let ca = QuadraticBoxCost::new(0.5, 1.0, 0.0, -20.0, 20.0);
    let cb = QuadraticBoxCost::new(1.5, -2.0, 0.0, -20.0, 20.0);
    let p = AllocationProblem::scalar([(ca, 3.0), (cb, 5.0)]).unwrap();
    // One-way edge 1 -> 2 in both matrices plus the reverse, uniform weights.
    let g = CommGraph::build_uniform_weights(2, &[(2, 1), (1, 2)], &[(2, 1), (1, 2)]).unwrap();
    let sim = Simulator::new(&p, &g, noiseless(0.1, 0.9)).unwrap();
    let init = InitialState {
        s0: Some(vec![0.25, -0.5]),
        tilde_w0: Some(vec![1.0, -3.0]),
    };
    let t = sim
        .run(
            &RunOptions::new(Algorithm::Dpdgt, 3, 0)
                .init(init)
                .record(RecordLevel::States),
        )
        .unwrap();
    let r = [[0.5, 0.5], [0.5, 0.5]];
    let c = [[0.5, 0.5], [0.5, 0.5]];
    let argmin = |cost: &QuadraticBoxCost, v: f64| ((v - cost.b) / (2.0 * cost.a)).clamp(cost.lo, cost.hi);
    let (mut s, mut tw) = ([0.25, -0.5], [1.0, -3.0]);
    let mut w = [argmin(&ca, tw[0]), argmin(&cb, tw[1])];
    for k in 0..3 {
        let alpha = 0.1 * 0.9f64.powi(k);
        (s, tw) = loop_step(&r, &c, s, tw, w, [3.0, 5.0], (alpha, 0.8, 0.7));
        w = [argmin(&ca, tw[0]), argmin(&cb, tw[1])];
        let st = t.state_at(k as usize + 1).unwrap();
        for i in 0..2 {
            assert!((st.s[(i, 0)] - s[i]).abs() < 1e-14);
            assert!((st.tilde_w[(i, 0)] - tw[i]).abs() < 1e-14);
            assert!((st.w[(i, 0)] - w[i]).abs() < 1e-14);
        }
    }
}

#[test]
fn tracking_identity_holds_at_every_step() {
    let p = ieee14_problem();
    let g = CommGraph::ieee14();
    let sim = Simulator::new(&p, &g, ScheduleSet::benchmark()).unwrap();
    // Arbitrary initial tracker: the identity does not depend on it.
    let init = InitialState {
        s0: Some((0..14).map(|i| (i as f64 - 6.0) * 0.7).collect()),
        tilde_w0: None,
    };
    let t = sim
        .run(
            &RunOptions::new(Algorithm::Dpdgt, 2000, 11)
                .init(init)
                .record(RecordLevel::States),
        )
        .unwrap();
    for k in 0..2000 {
        let a = &t.record(k).unwrap().state;
        let b = t.state_at(k + 1).unwrap();
        let lhs = b.s.sum() - a.s.sum();
        let alpha = 0.015 * 0.991f64.powi(k as i32);
        let rhs = -alpha * (a.w.sum() - 361.0) + 0.8 * t.record(k).unwrap().noise.xi.sum();
        assert!((lhs - rhs).abs() <= 1e-12, "k = {k}: {lhs} vs {rhs}");
    }
}

#[test]
fn baseline_identity_noiseless_and_noisy() {
    let p = ieee14_problem();
    let g = CommGraph::ieee14();
    for sched in [noiseless(0.034, 0.99), ScheduleSet::comparison()] {
        let sim = Simulator::new(&p, &g, sched).unwrap();
        let t = sim
            .run(&RunOptions::new(Algorithm::Ddgt, 1500, 5).record(RecordLevel::States))
            .unwrap();
        let mut acc = 0.0;
        for k in 0..=1500 {
            let st = t.state_at(k).unwrap();
            let expect = -0.034 * (st.w.sum() - 361.0) + acc;
            assert!((st.s.sum() - expect).abs() <= 1e-12, "k = {k}");
            if k < 1500 {
                acc += t.record(k).unwrap().noise.xi.sum();
            }
        }
        if sched.theta_xi.is_zero() {
            assert_eq!(acc, 0.0);
        } else {
            assert!(acc != 0.0);
        }
    }
}

#[test]
fn single_agent_baseline_converges_to_demand() {
    let cost = QuadraticBoxCost::new(0.01, 0.0, 0.0, 0.0, 10.0);
    let p = AllocationProblem::scalar([(cost, 5.0)]).unwrap();
    let g = CommGraph::build_uniform_weights(1, &[], &[]).unwrap();
    let sim = Simulator::new(&p, &g, noiseless(0.034, 0.99)).unwrap();
    let t = sim.run(&RunOptions::new(Algorithm::Ddgt, 10_000, 0)).unwrap();
    // Scalar oracle of the same iteration, with ibeta_k = 0.034 * 0.99^k.
    let (mut tw, mut z) = (0.0f64, 0.0f64);
    let mut w = (tw / 0.02).clamp(0.0, 10.0);
    z -= 0.034 * (w - 5.0);
    let mut hit = None;
    for k in 0..10_000 {
        tw += 0.99f64.powi(k) * z;
        let w_next = (tw / 0.02).clamp(0.0, 10.0);
        z -= 0.034 * (w_next - w);
        w = w_next;
        if hit.is_none() && (w - 5.0).abs() < 1e-6 {
            hit = Some(k);
        }
        assert!((t.metrics[k as usize].allocation[0] - w).abs() < 1e-9);
    }
    assert!(hit.is_some());
    assert!((t.terminal().allocation[0] - 5.0).abs() < 1e-6);
}

#[test]
fn ddgt_update_uses_sender_noise_once() {
    let c = QuadraticBoxCost::new(1.0, 0.0, 0.0, -5.0, 5.0);
    let p = AllocationProblem::scalar([(c, 1.0), (c, 2.0), (c, 3.0)]).unwrap();
    let g = CommGraph::build_uniform_weights(3, &[(2, 1), (3, 2), (1, 3)], &[(2, 1), (3, 2), (1, 3)]).unwrap();
    let state = SolverState {
        s: DMatrix::from_column_slice(3, 1, &[0.1, 0.2, 0.3]),
        tilde_w: DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]),
        w: DMatrix::from_column_slice(3, 1, &[0.5, 1.0, 1.5]),
        k: 0,
    };
    let z_msg = DMatrix::from_column_slice(3, 1, &[0.2, 0.2, 0.2]);
    let w_msg = DMatrix::from_column_slice(3, 1, &[1.5, 2.5, 3.5]);
    let next = ddgt_update(&state, &p, &g, 0.5, 0.034, &z_msg, &w_msg);
    // Ring: agent 2 pulls from 1 with weight 1/2.
    assert!((next.tilde_w[(1, 0)] - (0.5 * 2.5 + 0.5 * 1.5 + 0.5 * 0.2)).abs() < 1e-15);
    let w1 = next.tilde_w[(1, 0)] / 2.0;
    assert!((next.w[(1, 0)] - w1).abs() < 1e-15);
    assert!((next.s[(1, 0)] - (0.2 - 0.034 * (w1 - 1.0))).abs() < 1e-15);
}

#[test]
fn equal_seeds_give_identical_traces() {
    let p = ieee14_problem();
    let g = CommGraph::ieee14();
    let sim = Simulator::new(&p, &g, ScheduleSet::benchmark()).unwrap();
    for alg in [Algorithm::Dpdgt, Algorithm::Ddgt] {
        let opts = RunOptions::new(alg, 300, 42).record(RecordLevel::Audit);
        let a = sim.run(&opts).unwrap();
        let b = sim.run(&opts).unwrap();
        assert_eq!(a, b);
        let c = sim
            .run(&RunOptions::new(alg, 300, 43).record(RecordLevel::Audit))
            .unwrap();
        assert_ne!(a.final_state, c.final_state);
        for r in &a.records {
            let o = r.observables.as_ref().unwrap();
            assert_eq!(o.s, &r.state.s + &r.noise.xi);
            assert_eq!(o.tilde_w, &r.state.tilde_w + &r.noise.zeta);
        }
    }
}

#[test]
fn allocations_stay_in_boxes() {
    let p = ieee14_problem();
    let g = CommGraph::ieee14();
    let noisy = ScheduleSet::geometric(0.015, 0.991, 5.0, 0.995, 5.0, 0.995, 0.8, 0.7).unwrap();
    let sim = Simulator::new(&p, &g, noisy).unwrap();
    let t = sim.run(&RunOptions::new(Algorithm::Dpdgt, 500, 9)).unwrap();
    for m in &t.metrics {
        for (i, &w) in m.allocation.iter().enumerate() {
            let (lo, hi) = dpdgt::problem::CostFunction::bounds(&p.agents()[i].cost);
            assert!(w >= lo && w <= hi);
        }
    }
}

#[test]
fn dual_value_eventually_nonincreasing() {
    let p = ieee14_problem();
    let g = CommGraph::ieee14();
    let spec = g.spectral_analysis(0.8, 0.7).unwrap();
    let overlap = spec.perron_overlap();
    let l = 1.0 / p.mu();
    let bound = 2.0 * overlap / (3.0 * l * overlap * overlap + 1.0 + l * l * 14.0);
    let k0 = (0..).find(|&k| 0.015 * 0.991f64.powi(k) < bound).unwrap() as usize;
    let sim = Simulator::new(&p, &g, noiseless(0.015, 0.991)).unwrap();
    let t = sim.run(&RunOptions::new(Algorithm::Dpdgt, 5000, 0)).unwrap();
    let f: Vec<f64> = t.metrics.iter().map(|m| m.dual_value).collect();
    for k in k0..f.len() - 1 {
        assert!(f[k + 1] <= f[k] + 1e-9 * (1.0 + f[k].abs()), "k = {k}");
    }
}

#[test]
fn noiseless_consensus_residual_decays() {
    let p = ieee14_problem();
    let g = CommGraph::ieee14();
    let sim = Simulator::new(&p, &g, noiseless(0.015, 0.991)).unwrap();
    let init = InitialState {
        s0: None,
        tilde_w0: Some((0..14).map(|i| 2.0 + 0.5 * i as f64).collect()),
    };
    let t = sim.run(&RunOptions::new(Algorithm::Dpdgt, 5000, 0).init(init)).unwrap();
    let r0 = t.initial_metrics.consensus;
    assert!(r0 > 0.0);
    assert!(t.terminal().consensus < 1e-3 * r0);
}

#[test]
fn coupled_run_with_zero_shift_is_identical() {
    let p = ieee14_problem();
    let g = CommGraph::ieee14();
    let sim = Simulator::new(&p, &g, ScheduleSet::benchmark()).unwrap();
    let pert = AdjacencyPerturbation {
        target: 1,
        delta: 1.0,
        db: 0.0,
    };
    let c = sim
        .coupled_adjacent_run(&pert, 300, 3, &InitialState::default())
        .unwrap();
    assert!(c.others_identical);
    assert!(c.delta_s.iter().chain(&c.delta_tilde_w).all(|&v| v == 0.0));
}

#[test]
fn coupled_run_isolates_target_and_obeys_deviation_recursion() {
    let c = QuadraticBoxCost::new(1.0, 0.5, 0.0, -10.0, 10.0);
    let p = AllocationProblem::scalar([(c, 1.0), (c, 2.0), (c, -1.0)]).unwrap();
    let ring = [(2, 1), (3, 2), (1, 3)];
    let g = CommGraph::build_uniform_weights(3, &ring, &ring).unwrap();
    let sched = ScheduleSet::geometric(0.1, 0.8, 0.5, 0.9, 0.5, 0.9, 0.5, 0.5).unwrap();
    let sim = Simulator::new(&p, &g, sched).unwrap();
    let pert = AdjacencyPerturbation {
        target: 0,
        delta: 1.0,
        db: 1.0,
    };
    let run = sim
        .coupled_adjacent_run(&pert, 500, 21, &InitialState::default())
        .unwrap();
    assert!(run.others_identical);
    assert_eq!(run.delta_s.len(), 501);
    assert_eq!(run.delta_s[0], 0.0);
    assert!(run.delta_s[1] > 0.0 || run.delta_tilde_w.iter().any(|&v| v > 0.0));
    let t = dpdgt::privacy::sensitivity_dynamics(&sched, p.mu(), 1.0, 500).unwrap();
    for k in 0..=500 {
        assert!(run.delta_s[k] <= t.phi[k] * (1.0 + 1e-12) + 1e-15, "k = {k}");
        assert!(run.delta_tilde_w[k] <= t.eta[k] * (1.0 + 1e-12) + 1e-15, "k = {k}");
    }
}

#[test]
fn baseline_params_follow_geometric_envelope() {
    let b = BaselineParams::default();
    assert_eq!(b.beta(0), 1.0);
    assert!((b.iota * b.beta(10) - 0.034 * 0.99f64.powi(10)).abs() < 1e-16);
}
