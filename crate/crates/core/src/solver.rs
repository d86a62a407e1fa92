//! DP-DGT, the noisy DDGT baseline, run traces and coupled adjacent runs.
//!
//! States are `n x m` matrices (one row per agent). Every transmitted
//! message is the sender's value plus one Laplace draw per agent, channel
//! and iteration; all receivers of a sender see the same noisy value.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CommGraph;
use crate::problem::{AdjacencyPerturbation, AllocationProblem, CostFunction};
use crate::schedules::{Channel, GeometricSchedule, NoiseStreams, ScheduleSet};

/// Iterations up to this index are recorded in full; later ones every
/// [`THIN_EVERY`]th.
pub const FULL_RECORD_HORIZON: usize = 10_000;
pub const THIN_EVERY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dpdgt,
    Ddgt,
}

/// Step sizes of the DDGT baseline: `beta_k = beta0 * q_beta^k` and `iota`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineParams {
    pub beta0: f64,
    pub q_beta: f64,
    pub iota: f64,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self {
            beta0: 1.0,
            q_beta: 0.99,
            iota: 0.034,
        }
    }
}

impl BaselineParams {
    pub fn beta(&self, k: usize) -> f64 {
        self.beta0 * self.q_beta.powi(k as i32)
    }
}

/// Optional initial values, row-major `n x m`. Missing entries default to
/// zero; `w_0` is always recovered from `tilde_w_0`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InitialState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tilde_w0: Option<Vec<f64>>,
}

/// Per-agent iterates. For the DDGT baseline `s` holds the tracker `z`.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub s: DMatrix<f64>,
    pub tilde_w: DMatrix<f64>,
    pub w: DMatrix<f64>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepNoise {
    /// Noise on the pushed tracker.
    pub xi: DMatrix<f64>,
    /// Noise on the pulled dual estimate.
    pub zeta: DMatrix<f64>,
}

/// What an eavesdropper sees at one iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Observables {
    pub s: DMatrix<f64>,
    pub tilde_w: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub iter: usize,
    /// `||w_k - w*||_F^2`.
    pub err_sq: f64,
    /// Total allocation over agents and coordinates.
    pub supply: f64,
    pub demand: f64,
    /// `||x_k - 1 xbar_k^T||_F` with `x = -tilde_w` and `xbar = x^T pi_R`.
    pub consensus: f64,
    /// Dual objective at `xbar_k`.
    pub dual_value: f64,
    /// Row-major allocation `w_k`.
    pub allocation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// State at iteration `k`, before the update.
    pub state: SolverState,
    pub noise: StepNoise,
    pub observables: Option<Observables>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RecordLevel {
    /// Metrics only.
    #[default]
    Metrics,
    /// Metrics plus thinned state and noise snapshots.
    States,
    /// As `States`, additionally keeping the transmitted observables.
    Audit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub n_iters: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub init: InitialState,
    pub record: RecordLevel,
}

impl RunOptions {
    pub fn new(algorithm: Algorithm, n_iters: usize, seed: u64) -> Self {
        Self {
            n_iters,
            seed,
            algorithm,
            init: InitialState::default(),
            record: RecordLevel::Metrics,
        }
    }

    pub fn record(mut self, level: RecordLevel) -> Self {
        self.record = level;
        self
    }

    pub fn init(mut self, init: InitialState) -> Self {
        self.init = init;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub n_iters: usize,
    /// Metrics at `k = 0`.
    pub initial_metrics: Metrics,
    /// Metrics at `k = 1..=n_iters`.
    pub metrics: Vec<Metrics>,
    pub records: Vec<IterationRecord>,
    pub final_state: SolverState,
    pub w_star: DMatrix<f64>,
    /// Echo of the configuration that produced the run, when known.
    pub config: Option<serde_json::Value>,
}

impl RunTrace {
    pub fn terminal(&self) -> &Metrics {
        self.metrics.last().unwrap_or(&self.initial_metrics)
    }

    pub fn record(&self, k: usize) -> Option<&IterationRecord> {
        self.records
            .binary_search_by_key(&k, |r| r.k)
            .ok()
            .map(|i| &self.records[i])
    }

    /// State at iteration `k` if it was recorded (or is the final state).
    pub fn state_at(&self, k: usize) -> Option<&SolverState> {
        if k == self.final_state.k {
            Some(&self.final_state)
        } else {
            self.record(k).map(|r| &r.state)
        }
    }

    /// Relative terminal error `||w_K - w*|| / ||w*||`.
    pub fn relative_error(&self) -> f64 {
        self.terminal().err_sq.sqrt() / self.w_star.norm()
    }
}

fn check_dims<F: CostFunction>(state: &SolverState, problem: &AllocationProblem<F>, graph: &CommGraph) -> Result<()> {
    let (n, m) = (problem.n_agents(), problem.dim());
    if graph.n_agents() != n {
        return Err(Error::Dimension(format!(
            "graph has {} agents, problem has {n}",
            graph.n_agents()
        )));
    }
    for (name, mat) in [("s", &state.s), ("tilde_w", &state.tilde_w), ("w", &state.w)] {
        if mat.shape() != (n, m) {
            return Err(Error::Dimension(format!(
                "{name} is {:?}, expected ({n}, {m})",
                mat.shape()
            )));
        }
    }
    Ok(())
}

fn recover<F: CostFunction>(problem: &AllocationProblem<F>, tilde_w: &DMatrix<f64>) -> DMatrix<f64> {
    let agents = problem.agents();
    DMatrix::from_fn(tilde_w.nrows(), tilde_w.ncols(), |i, j| {
        agents[i].cost.conjugate_argmin(tilde_w[(i, j)])
    })
}

/// Draws `xi_k` and `zeta_k` for every agent.
pub fn draw_noise(noise: &mut NoiseStreams, n: usize, m: usize, k: usize, theta_xi: f64, theta_zeta: f64) -> StepNoise {
    let mut xi = DMatrix::zeros(n, m);
    let mut zeta = DMatrix::zeros(n, m);
    let mut buf = vec![0.0; m];
    for i in 0..n {
        noise.fill(i, k, Channel::Push, theta_xi, &mut buf);
        for j in 0..m {
            xi[(i, j)] = buf[j];
        }
        noise.fill(i, k, Channel::Pull, theta_zeta, &mut buf);
        for j in 0..m {
            zeta[(i, j)] = buf[j];
        }
    }
    StepNoise { xi, zeta }
}

/// DP-DGT update given the transmitted messages `s_msg = s + xi` and
/// `w_msg = tilde_w + zeta`. The order is tracker, dual drive, allocation.
#[allow(clippy::too_many_arguments)]
pub fn dpdgt_update<F: CostFunction>(
    state: &SolverState,
    problem: &AllocationProblem<F>,
    graph: &CommGraph,
    gamma: f64,
    phi: f64,
    alpha_k: f64,
    s_msg: &DMatrix<f64>,
    w_msg: &DMatrix<f64>,
    demand: &DMatrix<f64>,
) -> SolverState {
    let s_next = &state.s * (1.0 - gamma) + (graph.c() * s_msg) * gamma - (&state.w - demand) * alpha_k;
    let tilde_w_next = &state.tilde_w * (1.0 - phi) + (graph.r() * w_msg) * phi + (&s_next - &state.s);
    let w_next = recover(problem, &tilde_w_next);
    SolverState {
        s: s_next,
        tilde_w: tilde_w_next,
        w: w_next,
        k: state.k + 1,
    }
}

/// One DP-DGT iteration at `k = state.k`, drawing its own noise.
pub fn dpdgt_step<F: CostFunction>(
    state: &SolverState,
    problem: &AllocationProblem<F>,
    graph: &CommGraph,
    schedules: &ScheduleSet,
    noise: &mut NoiseStreams,
) -> Result<(SolverState, StepNoise)> {
    check_dims(state, problem, graph)?;
    let k = state.k;
    let drawn = draw_noise(
        noise,
        problem.n_agents(),
        problem.dim(),
        k,
        schedules.theta_xi.value(k),
        schedules.theta_zeta.value(k),
    );
    let next = dpdgt_update(
        state,
        problem,
        graph,
        schedules.gamma,
        schedules.phi,
        schedules.alpha.value(k),
        &(&state.s + &drawn.xi),
        &(&state.tilde_w + &drawn.zeta),
        &problem.demand_matrix(),
    );
    Ok((next, drawn))
}

/// DDGT update given the noisy messages:
/// `tilde_w' = R (tilde_w + zeta) + beta_k z`, `w' = argmin`,
/// `z' = C (z + xi) - iota (w' - w)`.
pub fn ddgt_update<F: CostFunction>(
    state: &SolverState,
    problem: &AllocationProblem<F>,
    graph: &CommGraph,
    beta_k: f64,
    iota: f64,
    z_msg: &DMatrix<f64>,
    w_msg: &DMatrix<f64>,
) -> SolverState {
    let tilde_w_next = graph.r() * w_msg + &state.s * beta_k;
    let w_next = recover(problem, &tilde_w_next);
    let z_next = graph.c() * z_msg - (&w_next - &state.w) * iota;
    SolverState {
        s: z_next,
        tilde_w: tilde_w_next,
        w: w_next,
        k: state.k + 1,
    }
}

/// One noisy DDGT iteration at `k = state.k`; `state.s` holds `z`.
pub fn ddgt_baseline_step<F: CostFunction>(
    state: &SolverState,
    problem: &AllocationProblem<F>,
    graph: &CommGraph,
    theta_xi: &GeometricSchedule,
    theta_zeta: &GeometricSchedule,
    baseline: &BaselineParams,
    noise: &mut NoiseStreams,
) -> Result<(SolverState, StepNoise)> {
    check_dims(state, problem, graph)?;
    let k = state.k;
    let drawn = draw_noise(
        noise,
        problem.n_agents(),
        problem.dim(),
        k,
        theta_xi.value(k),
        theta_zeta.value(k),
    );
    let next = ddgt_update(
        state,
        problem,
        graph,
        baseline.beta(k),
        baseline.iota,
        &(&state.s + &drawn.xi),
        &(&state.tilde_w + &drawn.zeta),
    );
    Ok((next, drawn))
}

/// Runs either algorithm over a fixed problem, graph and schedule set.
#[derive(Debug, Clone)]
pub struct Simulator<'a, F: CostFunction> {
    problem: &'a AllocationProblem<F>,
    graph: &'a CommGraph,
    schedules: ScheduleSet,
    baseline: BaselineParams,
    pi_r: DVector<f64>,
    w_star: DMatrix<f64>,
    demand: DMatrix<f64>,
}

impl<'a, F: CostFunction> Simulator<'a, F> {
    pub fn new(problem: &'a AllocationProblem<F>, graph: &'a CommGraph, schedules: ScheduleSet) -> Result<Self> {
        if graph.n_agents() != problem.n_agents() {
            return Err(Error::Dimension(format!(
                "graph has {} agents, problem has {}",
                graph.n_agents(),
                problem.n_agents()
            )));
        }
        let pi_r = graph.left_perron_r()?;
        let w_star = problem.centralized_solve()?.allocation;
        Ok(Self {
            problem,
            graph,
            schedules,
            baseline: BaselineParams::default(),
            pi_r,
            w_star,
            demand: problem.demand_matrix(),
        })
    }

    pub fn with_baseline(mut self, baseline: BaselineParams) -> Self {
        self.baseline = baseline;
        self
    }

    pub fn schedules(&self) -> &ScheduleSet {
        &self.schedules
    }

    pub fn w_star(&self) -> &DMatrix<f64> {
        &self.w_star
    }

    pub fn pi_r(&self) -> &DVector<f64> {
        &self.pi_r
    }

    fn matrix_from(&self, name: &str, v: &Option<Vec<f64>>) -> Result<DMatrix<f64>> {
        let (n, m) = (self.problem.n_agents(), self.problem.dim());
        match v {
            None => Ok(DMatrix::zeros(n, m)),
            Some(v) if v.len() == n * m => Ok(DMatrix::from_row_slice(n, m, v)),
            Some(v) => Err(Error::Dimension(format!(
                "{name} has {} entries, expected {}",
                v.len(),
                n * m
            ))),
        }
    }

    /// Initial state. DDGT starts its tracker at `z_0 = -iota (w_0 - d)`
    /// unless `s0` is given.
    pub fn initial_state(&self, algorithm: Algorithm, init: &InitialState) -> Result<SolverState> {
        let tilde_w = self.matrix_from("tilde_w0", &init.tilde_w0)?;
        let w = recover(self.problem, &tilde_w);
        let s = match (algorithm, &init.s0) {
            (Algorithm::Ddgt, None) => (&w - &self.demand) * (-self.baseline.iota),
            _ => self.matrix_from("s0", &init.s0)?,
        };
        Ok(SolverState { s, tilde_w, w, k: 0 })
    }

    pub fn metrics(&self, state: &SolverState) -> Metrics {
        let x = -&state.tilde_w;
        let xbar = x.transpose() * &self.pi_r;
        let n = x.nrows();
        let spread = &x - DVector::from_element(n, 1.0) * xbar.transpose();
        let xbar: Vec<f64> = xbar.iter().copied().collect();
        Metrics {
            iter: state.k,
            err_sq: (&state.w - &self.w_star).norm_squared(),
            supply: state.w.sum(),
            demand: self.demand.sum(),
            consensus: spread.norm(),
            dual_value: self.problem.dual_value(&xbar),
            allocation: state.w.transpose().iter().copied().collect(),
        }
    }

    pub fn step(
        &self,
        algorithm: Algorithm,
        state: &SolverState,
        noise: &mut NoiseStreams,
    ) -> Result<(SolverState, StepNoise)> {
        match algorithm {
            Algorithm::Dpdgt => dpdgt_step(state, self.problem, self.graph, &self.schedules, noise),
            Algorithm::Ddgt => ddgt_baseline_step(
                state,
                self.problem,
                self.graph,
                &self.schedules.theta_xi,
                &self.schedules.theta_zeta,
                &self.baseline,
                noise,
            ),
        }
    }

    pub fn run(&self, opts: &RunOptions) -> Result<RunTrace> {
        if opts.n_iters == 0 {
            return Err(Error::config("n_iters", "must be at least 1"));
        }
        let mut noise = NoiseStreams::new(opts.seed, self.problem.n_agents(), self.problem.dim());
        let mut state = self.initial_state(opts.algorithm, &opts.init)?;
        let initial_metrics = self.metrics(&state);
        let mut metrics = Vec::with_capacity(opts.n_iters);
        let mut records = Vec::new();
        for k in 0..opts.n_iters {
            let (next, drawn) = self.step(opts.algorithm, &state, &mut noise)?;
            if opts.record != RecordLevel::Metrics && (k <= FULL_RECORD_HORIZON || k % THIN_EVERY == 0) {
                let observables = (opts.record == RecordLevel::Audit).then(|| Observables {
                    s: &state.s + &drawn.xi,
                    tilde_w: &state.tilde_w + &drawn.zeta,
                });
                records.push(IterationRecord {
                    k,
                    state: state.clone(),
                    noise: drawn,
                    observables,
                });
            }
            state = next;
            metrics.push(self.metrics(&state));
        }
        Ok(RunTrace {
            algorithm: opts.algorithm,
            seed: opts.seed,
            n_iters: opts.n_iters,
            initial_metrics,
            metrics,
            records,
            final_state: state,
            w_star: self.w_star.clone(),
            config: None,
        })
    }

    /// Runs DP-DGT on the problem and on its adjacent problem so that every
    /// transmitted message is identical in both executions: agents other
    /// than the target keep their noise, and the target's noise absorbs its
    /// state deviation. Both runs share `s_0`, `tilde_w_0` and `w_0`.
    pub fn coupled_adjacent_run(
        &self,
        perturbation: &AdjacencyPerturbation,
        n_iters: usize,
        seed: u64,
        init: &InitialState,
    ) -> Result<CoupledRun> {
        let adjacent = self.problem.make_adjacent(perturbation)?;
        let target = perturbation.target;
        let (n, m) = (self.problem.n_agents(), self.problem.dim());
        let mut noise = NoiseStreams::new(seed, n, m);
        let mut state = self.initial_state(Algorithm::Dpdgt, init)?;
        let mut other = state.clone();
        let s = &self.schedules;

        let l1_row =
            |a: &DMatrix<f64>, b: &DMatrix<f64>| (0..m).map(|j| (a[(target, j)] - b[(target, j)]).abs()).sum::<f64>();
        let mut delta_s = vec![l1_row(&state.s, &other.s)];
        let mut delta_tilde_w = vec![l1_row(&state.tilde_w, &other.tilde_w)];
        let mut others_identical = true;

        for k in 0..n_iters {
            let drawn = draw_noise(&mut noise, n, m, k, s.theta_xi.value(k), s.theta_zeta.value(k));
            let s_msg = &state.s + &drawn.xi;
            let w_msg = &state.tilde_w + &drawn.zeta;
            let alpha = s.alpha.value(k);
            let next = dpdgt_update(
                &state,
                self.problem,
                self.graph,
                s.gamma,
                s.phi,
                alpha,
                &s_msg,
                &w_msg,
                &self.demand,
            );
            let next_other = dpdgt_update(
                &other,
                &adjacent.problem,
                self.graph,
                s.gamma,
                s.phi,
                alpha,
                &s_msg,
                &w_msg,
                &self.demand,
            );
            for i in (0..n).filter(|&i| i != target) {
                for j in 0..m {
                    let same = [
                        (next.s[(i, j)], next_other.s[(i, j)]),
                        (next.tilde_w[(i, j)], next_other.tilde_w[(i, j)]),
                        (next.w[(i, j)], next_other.w[(i, j)]),
                    ]
                    .iter()
                    .all(|(a, b)| a.to_bits() == b.to_bits());
                    others_identical &= same;
                }
            }
            delta_s.push(l1_row(&next.s, &next_other.s));
            delta_tilde_w.push(l1_row(&next.tilde_w, &next_other.tilde_w));
            state = next;
            other = next_other;
        }
        Ok(CoupledRun {
            target,
            gradient_distance: adjacent.gradient_distance,
            delta_s,
            delta_tilde_w,
            others_identical,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoupledRun {
    pub target: usize,
    pub gradient_distance: f64,
    /// `||Delta s_{i0,k}||_1` for `k = 0..=n_iters`.
    pub delta_s: Vec<f64>,
    /// `||Delta tilde_w_{i0,k}||_1` for `k = 0..=n_iters`.
    pub delta_tilde_w: Vec<f64>,
    /// Non-target agents agreed bit-for-bit at every iteration.
    pub others_identical: bool,
}
