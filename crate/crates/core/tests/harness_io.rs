use std::path::PathBuf;

use dpdgt::harness::{
    cli_compare, cli_privacy, cli_run, cli_sweep, write_run_outputs, AgentSpec, GraphSpec, OutputSpec, Preset,
    ProblemSpec, RunConfig, RunSection, ScheduleSpec, SweepParameter, SweepSpec,
};
use dpdgt::problem::QuadraticBoxCost;
use dpdgt::solver::{Algorithm, InitialState, RecordLevel, RunOptions, Simulator};
use dpdgt::Error;
use proptest::option;
use proptest::prelude::*;

fn short(mut cfg: RunConfig, n_iters: usize) -> RunConfig {
    cfg.run.n_iters = n_iters;
    cfg
}

#[test]
fn csv_has_one_row_per_iteration() {
    let out = cli_run(&short(RunConfig::benchmark(), 250)).unwrap();
    let mut lines = out.csv.lines();
    assert!(lines.next().unwrap().starts_with("# config: {"));
    assert_eq!(
        lines.next().unwrap(),
        "iter,err_sq,supply,demand,consensus,dual_value,w_1,w_2,w_3,w_6,w_8"
    );
    let iters: Vec<usize> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(iters, (1..=250).collect::<Vec<_>>());
}

#[test]
fn config_echo_replays_the_run() {
    let cfg = short(RunConfig::benchmark(), 120);
    let out = cli_run(&cfg).unwrap();
    let echo = out.csv.lines().next().unwrap().trim_start_matches("# config: ");
    let replay = cli_run(&RunConfig::from_json(echo).unwrap()).unwrap();
    assert_eq!(replay.csv, out.csv);
    assert_eq!(replay.trace.final_state, out.trace.final_state);
}

#[test]
fn written_files_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = short(RunConfig::benchmark(), 200);
    cfg.run.audit = true;
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    write_run_outputs(&cli_run(&cfg).unwrap(), &a).unwrap();
    write_run_outputs(&cli_run(&cfg).unwrap(), &b).unwrap();
    for f in ["metrics.csv", "summary.json", "observables.csv"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn zero_iterations_rejected() {
    let cfg = short(RunConfig::benchmark(), 0);
    assert!(matches!(cli_run(&cfg), Err(Error::Config { field, .. }) if field == "run.n_iters"));
}

#[test]
fn infeasible_problem_reported() {
    let c = QuadraticBoxCost::new(1.0, 0.0, 0.0, 0.0, 1.0);
    let mut cfg = short(RunConfig::benchmark(), 10);
    cfg.problem = ProblemSpec::Explicit {
        agents: vec![AgentSpec { cost: c, demand: 3.0 }, AgentSpec { cost: c, demand: 3.0 }],
    };
    cfg.graph = GraphSpec::Explicit {
        n: 2,
        edges_r: vec![(1, 2), (2, 1)],
        edges_c: vec![(1, 2), (2, 1)],
    };
    assert!(matches!(cli_run(&cfg), Err(Error::Infeasible { .. })));
}

#[test]
fn noiseless_sweep_point_has_zero_spread() {
    let mut cfg = short(RunConfig::benchmark(), 400);
    cfg.run.n_seeds = 6;
    let sweep = SweepSpec {
        parameter: SweepParameter::Theta0,
        grid: vec![0.0, 0.05],
    };
    let r = cli_sweep(&cfg, &sweep).unwrap();
    let p0 = &r.points[0];
    assert_eq!(p0.std_err, 0.0);
    assert!(p0.errors.iter().all(|&e| e == p0.errors[0]));
    assert_eq!(p0.inv_theta0, None);
    assert_eq!(r.points[1].inv_theta0, Some(1.0 / 0.05));
    assert!(r.points[1].epsilon.unwrap() > 0.0);
    assert_eq!(r.seeds.len(), 6);
    assert_eq!(cli_sweep(&cfg, &sweep).unwrap(), r);
}

#[test]
fn compare_feeds_identical_noise_to_both_algorithms() {
    let cfg = short(RunConfig::comparison(), 200);
    let p = cfg.build_problem().unwrap();
    let g = cfg.build_graph().unwrap();
    let sim = Simulator::new(&p, &g, cfg.schedule_set().unwrap())
        .unwrap()
        .with_baseline(cfg.baseline());
    let run = |alg| {
        sim.run(
            &RunOptions::new(alg, 200, 17)
                .record(RecordLevel::States)
                .init(InitialState::default()),
        )
        .unwrap()
    };
    let (a, b) = (run(Algorithm::Dpdgt), run(Algorithm::Ddgt));
    for (ra, rb) in a.records.iter().zip(&b.records) {
        assert_eq!(ra.noise, rb.noise);
    }
    let mut cfg = cfg;
    cfg.run.n_seeds = 4;
    let r = cli_compare(&cfg).unwrap();
    assert_eq!(r.dpdgt.len(), 4);
    assert_eq!(r.dpdgt_curve.len(), 200);
    assert_eq!(*r.dpdgt_curve.last().unwrap(), r.dpdgt_mean);
}

#[test]
fn noiseless_ddgt_converges_while_dpdgt_stops_in_a_neighbourhood() {
    // Summable steps freeze DP-DGT's dual estimate short of the optimum;
    // the baseline keeps moving through its tracker.
    let mut cfg = RunConfig::comparison();
    cfg.schedules.theta_xi0 = 0.0;
    cfg.schedules.theta_zeta0 = 0.0;
    cfg.run.n_seeds = 1;
    let r = cli_compare(&cfg).unwrap();
    let w_star_sq = 162.0f64.powi(2);
    assert!(r.dpdgt_mean / w_star_sq < 1e-4, "{}", r.dpdgt_mean);
    assert!(r.dpdgt_mean > 1e-3);
    assert!(r.ddgt_mean < 1e-10, "{}", r.ddgt_mean);
}

#[test]
fn privacy_report_cases() {
    let out = cli_privacy(&RunConfig::benchmark()).unwrap();
    assert!(out.q_c_estimate < 0.991);
    assert!(out.verdicts.closed_form && out.verdicts.combined);
    assert!(out.numeric.as_ref().unwrap().epsilon.is_finite());
    assert!(out.closed_form.as_ref().unwrap().epsilon.is_finite());
    assert!(out.closed_form_dominated);

    let mut cfg = RunConfig::benchmark();
    cfg.schedules.q = cfg.schedules.q_xi;
    let out = cli_privacy(&cfg).unwrap();
    let r = out.numeric.unwrap();
    assert!(r.epsilon.is_infinite() && r.failure.is_some());
    assert!(out.geometric_closed_form.is_err());

    let mut cfg = RunConfig::benchmark();
    cfg.run.delta = 0.0;
    let out = cli_privacy(&cfg).unwrap();
    assert_eq!(out.numeric.unwrap().epsilon, 0.0);
    assert_eq!(out.geometric_closed_form.unwrap(), 0.0);
}

#[test]
fn summary_carries_privacy_report() {
    let out = cli_run(&short(RunConfig::benchmark(), 50)).unwrap();
    assert!(out.summary.privacy.as_ref().unwrap().finite);
    assert_eq!(out.summary.demand, 361.0);
}

fn unit() -> impl Strategy<Value = f64> {
    0.001f64..0.999
}

fn arb_config() -> impl Strategy<Value = RunConfig> {
    let problem = prop_oneof![
        Just(ProblemSpec::Preset { preset: Preset::Ieee14 }),
        prop::collection::vec(
            (0.01f64..5.0, -3.0f64..3.0, -5.0f64..0.0, 1.0f64..10.0, -1.0f64..1.0),
            1..5
        )
        .prop_map(|v| ProblemSpec::Explicit {
            agents: v
                .into_iter()
                .map(|(a, b, lo, hi, d)| AgentSpec {
                    cost: QuadraticBoxCost::new(a, b, 0.0, lo, hi),
                    demand: d,
                })
                .collect(),
        }),
    ];
    let graph = prop_oneof![
        Just(GraphSpec::Preset { preset: Preset::Ieee14 }),
        (1usize..6, prop::collection::vec((1usize..6, 1usize..6), 0..8)).prop_map(|(n, e)| GraphSpec::Explicit {
            n,
            edges_r: e.clone(),
            edges_c: e,
        }),
    ];
    let schedules = (
        (0.0f64..1.0, unit(), 0.0f64..1.0, unit(), 0.0f64..1.0, unit()),
        (unit(), unit(), any::<u64>()),
        (option::of(0.0f64..2.0), option::of(unit()), option::of(unit())),
    )
        .prop_map(
            |((alpha0, q, theta_xi0, q_xi, theta_zeta0, q_zeta), (gamma, phi, seed), (beta0, q_beta, iota))| {
                ScheduleSpec {
                    alpha0,
                    q,
                    theta_xi0,
                    q_xi,
                    theta_zeta0,
                    q_zeta,
                    gamma,
                    phi,
                    seed,
                    beta0,
                    q_beta,
                    iota,
                }
            },
        );
    let sweep = option::of(
        (
            prop_oneof![
                Just(SweepParameter::Theta0),
                Just(SweepParameter::Alpha0),
                Just(SweepParameter::Q)
            ],
            prop::collection::vec(unit(), 1..5),
        )
            .prop_map(|(parameter, grid)| SweepSpec { parameter, grid }),
    );
    let init = option::of(
        (
            option::of(prop::collection::vec(-5.0f64..5.0, 3)),
            option::of(prop::collection::vec(-5.0f64..5.0, 3)),
        )
            .prop_map(|(s0, tilde_w0)| InitialState { s0, tilde_w0 }),
    );
    let run = (
        prop_oneof![Just(Algorithm::Dpdgt), Just(Algorithm::Ddgt)],
        1usize..100_000,
        1usize..3000,
        any::<bool>(),
        0.0f64..10.0,
        init,
        sweep,
        option::of("[a-z]{1,8}"),
    )
        .prop_map(
            |(algorithm, n_iters, n_seeds, audit, delta, init, sweep, dir)| RunSection {
                algorithm,
                n_iters,
                n_seeds,
                audit,
                delta,
                init,
                sweep,
                outputs: OutputSpec {
                    dir: dir.map(PathBuf::from),
                },
            },
        );
    (problem, graph, schedules, run).prop_map(|(problem, graph, schedules, run)| RunConfig {
        problem,
        graph,
        schedules,
        run,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn config_round_trips(cfg in arb_config()) {
        let text = cfg.to_json().unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(&back, &cfg);
        let echo: RunConfig = serde_json::from_str(&cfg.echo().unwrap()).unwrap();
        prop_assert_eq!(echo, cfg);
    }
}
