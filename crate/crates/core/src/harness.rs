//! Run configuration, benchmark presets, Monte-Carlo sweeps and report
//! emission.
//!
//! A configuration is a JSON document with the top-level keys `problem`,
//! `graph`, `schedules` and `run`. Problem and graph accept either
//! `{"preset": "ieee14"}` or an explicit description.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::CommGraph;
use crate::privacy::{
    d_eta_kernel_bound, d_eta_numeric, epsilon_corollary2_for, epsilon_theorem3, DEtaMode, NumericDEta, PrivacyReport,
    NUMERIC_K_MAX,
};
use crate::problem::{ieee14_problem, AllocationProblem, QuadraticBoxCost, IEEE14_GENERATOR_BUSES};
use crate::schedules::{check_conditions, ConditionVerdict, ScheduleSet};
use crate::solver::{Algorithm, BaselineParams, InitialState, RecordLevel, RunOptions, RunTrace, Simulator};

/// A value or the reason it could not be computed.
pub type Outcome<T> = std::result::Result<T, String>;

pub const DEFAULT_N_SEEDS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Ieee14,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub cost: QuadraticBoxCost,
    pub demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSpec {
    Preset { preset: Preset },
    Explicit { agents: Vec<AgentSpec> },
}

/// Edge lists hold 1-based `(receiver, sender)` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Preset {
        preset: Preset,
    },
    Explicit {
        n: usize,
        edges_r: Vec<(usize, usize)>,
        edges_c: Vec<(usize, usize)>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSpec {
    pub alpha0: f64,
    pub q: f64,
    pub theta_xi0: f64,
    pub q_xi: f64,
    pub theta_zeta0: f64,
    pub q_zeta: f64,
    pub gamma: f64,
    pub phi: f64,
    /// Root seed of all noise streams.
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iota: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepParameter {
    Theta0,
    Alpha0,
    Q,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OutputSpec {
    /// Directory for emitted files; nothing is written when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

fn default_n_seeds() -> usize {
    DEFAULT_N_SEEDS
}

fn default_delta() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSection {
    pub algorithm: Algorithm,
    pub n_iters: usize,
    #[serde(default = "default_n_seeds")]
    pub n_seeds: usize,
    /// Retain transmitted observables in the trace.
    #[serde(default)]
    pub audit: bool,
    /// Adjacency bound used by the privacy report.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitialState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub outputs: OutputSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    pub graph: GraphSpec,
    pub schedules: ScheduleSpec,
    pub run: RunSection,
}

impl RunConfig {
    fn ieee14_with(alpha0: f64, q: f64, n_iters: usize) -> Self {
        Self {
            problem: ProblemSpec::Preset { preset: Preset::Ieee14 },
            graph: GraphSpec::Preset { preset: Preset::Ieee14 },
            schedules: ScheduleSpec {
                alpha0,
                q,
                theta_xi0: 0.01,
                q_xi: 0.995,
                theta_zeta0: 0.01,
                q_zeta: 0.995,
                gamma: 0.8,
                phi: 0.7,
                seed: 1,
                beta0: None,
                q_beta: None,
                iota: None,
            },
            run: RunSection {
                algorithm: Algorithm::Dpdgt,
                n_iters,
                n_seeds: DEFAULT_N_SEEDS,
                audit: false,
                delta: 1.0,
                init: None,
                sweep: None,
                outputs: OutputSpec::default(),
            },
        }
    }

    /// 14-bus convergence experiment: `alpha_k = 0.015 * 0.991^k`.
    pub fn benchmark() -> Self {
        Self::ieee14_with(0.015, 0.991, 20_000)
    }

    /// 14-bus comparison experiment: `alpha_k = 0.034 * 0.99^k`, baseline
    /// `beta_k = 0.99^k`, `iota = 0.034`.
    pub fn comparison() -> Self {
        let mut c = Self::ieee14_with(0.034, 0.99, 5_000);
        c.schedules.beta0 = Some(1.0);
        c.schedules.q_beta = Some(0.99);
        c.schedules.iota = Some(0.034);
        c.run.n_seeds = 100;
        c
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Single-line echo embedded in emitted files.
    pub fn echo(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// Checks every field without running anything.
    pub fn validate(&self) -> Result<()> {
        if self.run.n_iters == 0 {
            return Err(Error::config("run.n_iters", "must be at least 1"));
        }
        if self.run.n_seeds == 0 {
            return Err(Error::config("run.n_seeds", "must be at least 1"));
        }
        if !(self.run.delta >= 0.0 && self.run.delta.is_finite()) {
            return Err(Error::config("run.delta", "must be finite and >= 0"));
        }
        if let Some(sw) = &self.run.sweep {
            if sw.grid.is_empty() {
                return Err(Error::config("run.sweep.grid", "must be nonempty"));
            }
            for &v in &sw.grid {
                self.schedule_set_with(sw.parameter, v)
                    .map_err(|e| Error::config("run.sweep.grid", e.to_string()))?;
            }
        }
        self.schedule_set()
            .map_err(|e| Error::config("schedules", e.to_string()))?;
        let b = self.baseline();
        if !(b.q_beta > 0.0 && b.q_beta < 1.0 && b.beta0 >= 0.0 && b.iota > 0.0) {
            return Err(Error::config(
                "schedules.beta0/q_beta/iota",
                "need beta0 >= 0, q_beta in (0,1), iota > 0",
            ));
        }
        let n_problem = match &self.problem {
            ProblemSpec::Preset { .. } => 14,
            ProblemSpec::Explicit { agents } if agents.is_empty() => {
                return Err(Error::config("problem.agents", "must be nonempty"))
            }
            ProblemSpec::Explicit { agents } => agents.len(),
        };
        let n_graph = match &self.graph {
            GraphSpec::Preset { .. } => 14,
            GraphSpec::Explicit { n, .. } => *n,
        };
        if n_problem != n_graph {
            return Err(Error::config(
                "graph",
                format!("graph has {n_graph} agents but problem has {n_problem}"),
            ));
        }
        Ok(())
    }

    pub fn schedule_set(&self) -> Result<ScheduleSet> {
        let s = &self.schedules;
        ScheduleSet::geometric(
            s.alpha0,
            s.q,
            s.theta_xi0,
            s.q_xi,
            s.theta_zeta0,
            s.q_zeta,
            s.gamma,
            s.phi,
        )
    }

    /// Schedule set with one swept parameter replaced. Sweeping `theta0`
    /// sets both noise scales.
    pub fn schedule_set_with(&self, parameter: SweepParameter, value: f64) -> Result<ScheduleSet> {
        let mut s = self.schedules.clone();
        match parameter {
            SweepParameter::Theta0 => {
                s.theta_xi0 = value;
                s.theta_zeta0 = value;
            }
            SweepParameter::Alpha0 => s.alpha0 = value,
            SweepParameter::Q => s.q = value,
        }
        ScheduleSet::geometric(
            s.alpha0,
            s.q,
            s.theta_xi0,
            s.q_xi,
            s.theta_zeta0,
            s.q_zeta,
            s.gamma,
            s.phi,
        )
    }

    pub fn baseline(&self) -> BaselineParams {
        let d = BaselineParams::default();
        BaselineParams {
            beta0: self.schedules.beta0.unwrap_or(d.beta0),
            q_beta: self.schedules.q_beta.unwrap_or(d.q_beta),
            iota: self.schedules.iota.unwrap_or(d.iota),
        }
    }

    pub fn build_problem(&self) -> Result<AllocationProblem> {
        match &self.problem {
            ProblemSpec::Preset { preset: Preset::Ieee14 } => Ok(ieee14_problem()),
            ProblemSpec::Explicit { agents } => AllocationProblem::scalar(agents.iter().map(|a| (a.cost, a.demand))),
        }
    }

    pub fn build_graph(&self) -> Result<CommGraph> {
        match &self.graph {
            GraphSpec::Preset { preset: Preset::Ieee14 } => Ok(CommGraph::ieee14()),
            GraphSpec::Explicit { n, edges_r, edges_c } => CommGraph::build_uniform_weights(*n, edges_r, edges_c),
        }
    }

    /// 1-based labels of agents whose allocations are reported.
    fn reported_agents(&self, problem: &AllocationProblem) -> Vec<usize> {
        match &self.problem {
            ProblemSpec::Preset { preset: Preset::Ieee14 } => IEEE14_GENERATOR_BUSES.to_vec(),
            ProblemSpec::Explicit { .. } => problem.active_agents().iter().map(|i| i + 1).collect(),
        }
    }

    fn init_state(&self) -> InitialState {
        self.run.init.clone().unwrap_or_default()
    }
}

/// Seed of replica `i` under root seed `root`.
pub fn replica_seed(root: u64, i: usize) -> u64 {
    root.wrapping_add(i as u64)
}

fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

/// Metrics CSV: a `# config:` comment line, a header, then one row per
/// iteration `1..=n_iters`.
pub fn metrics_csv(trace: &RunTrace, cfg: &RunConfig, problem: &AllocationProblem) -> Result<String> {
    let mut out = format!("# config: {}\n", cfg.echo()?);
    let labels = cfg.reported_agents(problem);
    let m = problem.dim();
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["iter", "err_sq", "supply", "demand", "consensus", "dual_value"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for &l in &labels {
        if m == 1 {
            header.push(format!("w_{l}"));
        } else {
            header.extend((0..m).map(|j| format!("w_{l}_{j}")));
        }
    }
    w.write_record(&header)?;
    for row in &trace.metrics {
        let mut rec = vec![
            row.iter.to_string(),
            fmt_f(row.err_sq),
            fmt_f(row.supply),
            fmt_f(row.demand),
            fmt_f(row.consensus),
            fmt_f(row.dual_value),
        ];
        for &l in &labels {
            rec.extend((0..m).map(|j| fmt_f(row.allocation[(l - 1) * m + j])));
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

/// Transmitted observables of an audited run, one row per agent and
/// recorded iteration.
pub fn observables_csv(trace: &RunTrace) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["k", "agent", "coord", "s_observed", "tilde_w_observed"])?;
    for r in &trace.records {
        let Some(o) = &r.observables else { continue };
        for i in 0..o.s.nrows() {
            for j in 0..o.s.ncols() {
                w.write_record([
                    r.k.to_string(),
                    (i + 1).to_string(),
                    j.to_string(),
                    fmt_f(o.s[(i, j)]),
                    fmt_f(o.tilde_w[(i, j)]),
                ])?;
            }
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub n_iters: usize,
    pub terminal_err_sq: f64,
    pub relative_error: f64,
    pub terminal_supply: f64,
    pub demand: f64,
    pub supply_demand_gap: f64,
    pub w_star: Vec<f64>,
    /// Present when the schedules give a finite budget.
    pub privacy: Option<PrivacyReport>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: RunTrace,
    pub csv: String,
    pub summary: RunSummary,
}

pub fn cli_run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let graph = cfg.build_graph()?;
    let schedules = cfg.schedule_set()?;
    let sim = Simulator::new(&problem, &graph, schedules)?.with_baseline(cfg.baseline());
    let record = if cfg.run.audit {
        RecordLevel::Audit
    } else {
        RecordLevel::Metrics
    };
    let opts = RunOptions::new(cfg.run.algorithm, cfg.run.n_iters, cfg.schedules.seed)
        .init(cfg.init_state())
        .record(record);
    let mut trace = sim.run(&opts)?;
    trace.config = Some(serde_json::to_value(cfg)?);
    let csv = metrics_csv(&trace, cfg, &problem)?;
    let t = trace.terminal();
    let privacy = match cfg.run.algorithm {
        Algorithm::Dpdgt => epsilon_theorem3(&schedules, problem.mu(), cfg.run.delta, DEtaMode::Numeric)
            .ok()
            .filter(|r| r.finite),
        Algorithm::Ddgt => None,
    };
    let summary = RunSummary {
        algorithm: cfg.run.algorithm,
        seed: cfg.schedules.seed,
        n_iters: cfg.run.n_iters,
        terminal_err_sq: t.err_sq,
        relative_error: trace.relative_error(),
        terminal_supply: t.supply,
        demand: t.demand,
        supply_demand_gap: t.supply - t.demand,
        w_star: trace.w_star.transpose().iter().copied().collect(),
        privacy,
    };
    Ok(RunOutput { trace, csv, summary })
}

/// Writes `metrics.csv`, `summary.json` and, for audited runs,
/// `observables.csv` into `dir`.
pub fn write_run_outputs(out: &RunOutput, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("metrics.csv"), &out.csv)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&out.summary)?)?;
    if out.trace.records.iter().any(|r| r.observables.is_some()) {
        fs::write(dir.join("observables.csv"), observables_csv(&out.trace)?)?;
    }
    Ok(())
}

/// Mean and standard error of the mean.
pub fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: f64,
    pub mean_err_sq: f64,
    pub std_err: f64,
    /// Closed-form budget when its hypotheses hold.
    pub epsilon: Option<f64>,
    /// `1 / theta0`; `None` when noise is off.
    pub inv_theta0: Option<f64>,
    /// Terminal squared error per seed, in seed order.
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub parameter: SweepParameter,
    pub grid: Vec<f64>,
    pub n_iters: usize,
    pub seeds: Vec<u64>,
    pub points: Vec<SweepPoint>,
}

/// Runs `n_seeds` replicas per grid point. Replica `i` uses the same seed at
/// every point, so adjacent points can be compared pairwise.
pub fn cli_sweep(cfg: &RunConfig, sweep: &SweepSpec) -> Result<SweepResult> {
    cfg.validate()?;
    if sweep.grid.is_empty() {
        return Err(Error::config("run.sweep.grid", "must be nonempty"));
    }
    let problem = cfg.build_problem()?;
    let graph = cfg.build_graph()?;
    let seeds: Vec<u64> = (0..cfg.run.n_seeds)
        .map(|i| replica_seed(cfg.schedules.seed, i))
        .collect();
    let sets = sweep
        .grid
        .iter()
        .map(|&v| cfg.schedule_set_with(sweep.parameter, v))
        .collect::<Result<Vec<_>>>()?;
    let sims = sets
        .iter()
        .map(|s| Simulator::new(&problem, &graph, *s).map(|sim| sim.with_baseline(cfg.baseline())))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, u64)> = (0..sims.len())
        .flat_map(|p| seeds.iter().map(move |&s| (p, s)))
        .collect();
    let init = cfg.init_state();
    let errors = jobs
        .par_iter()
        .map(|&(p, seed)| {
            let opts = RunOptions::new(cfg.run.algorithm, cfg.run.n_iters, seed).init(init.clone());
            sims[p].run(&opts).map(|t| t.terminal().err_sq)
        })
        .collect::<Result<Vec<f64>>>()?;
    let points = sweep
        .grid
        .iter()
        .zip(&sets)
        .zip(errors.chunks(seeds.len()))
        .map(|((&value, set), errs)| {
            let (mean_err_sq, std_err) = mean_stderr(errs);
            let theta0 = set.theta_xi.initial;
            SweepPoint {
                value,
                mean_err_sq,
                std_err,
                epsilon: epsilon_corollary2_for(set, problem.mu(), cfg.run.delta).ok(),
                inv_theta0: (theta0 > 0.0).then(|| 1.0 / theta0),
                errors: errs.to_vec(),
            }
        })
        .collect();
    Ok(SweepResult {
        parameter: sweep.parameter,
        grid: sweep.grid.clone(),
        n_iters: cfg.run.n_iters,
        seeds,
        points,
    })
}

pub fn sweep_csv(r: &SweepResult) -> Result<String> {
    let opt = |v: Option<f64>| v.map(fmt_f).unwrap_or_default();
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["value", "mean_err_sq", "std_err", "epsilon", "inv_theta0", "n_seeds"])?;
    for p in &r.points {
        w.write_record([
            fmt_f(p.value),
            fmt_f(p.mean_err_sq),
            fmt_f(p.std_err),
            opt(p.epsilon),
            opt(p.inv_theta0),
            p.errors.len().to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompareResult {
    pub seeds: Vec<u64>,
    pub n_iters: usize,
    /// Terminal squared errors per seed.
    pub dpdgt: Vec<f64>,
    pub ddgt: Vec<f64>,
    pub dpdgt_mean: f64,
    pub dpdgt_std_err: f64,
    pub ddgt_mean: f64,
    pub ddgt_std_err: f64,
    /// Mean and standard error of `ddgt - dpdgt` per seed.
    pub paired_diff_mean: f64,
    pub paired_diff_std_err: f64,
    /// Mean error curves over seeds, `k = 1..=n_iters`.
    #[serde(skip)]
    pub dpdgt_curve: Vec<f64>,
    #[serde(skip)]
    pub ddgt_curve: Vec<f64>,
}

/// Runs both algorithms on every replica seed; each pair shares its noise
/// streams.
pub fn cli_compare(cfg: &RunConfig) -> Result<CompareResult> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let graph = cfg.build_graph()?;
    let sim = Simulator::new(&problem, &graph, cfg.schedule_set()?)?.with_baseline(cfg.baseline());
    let seeds: Vec<u64> = (0..cfg.run.n_seeds)
        .map(|i| replica_seed(cfg.schedules.seed, i))
        .collect();
    let init = cfg.init_state();
    let curves = seeds
        .par_iter()
        .map(|&seed| -> Result<(Vec<f64>, Vec<f64>)> {
            let curve = |alg| {
                sim.run(&RunOptions::new(alg, cfg.run.n_iters, seed).init(init.clone()))
                    .map(|t| t.metrics.iter().map(|m| m.err_sq).collect::<Vec<_>>())
            };
            Ok((curve(Algorithm::Dpdgt)?, curve(Algorithm::Ddgt)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = cfg.run.n_iters;
    let mut dpdgt_curve = vec![0.0; n];
    let mut ddgt_curve = vec![0.0; n];
    for (a, b) in &curves {
        for k in 0..n {
            dpdgt_curve[k] += a[k] / seeds.len() as f64;
            ddgt_curve[k] += b[k] / seeds.len() as f64;
        }
    }
    let dpdgt: Vec<f64> = curves.iter().map(|(a, _)| a[n - 1]).collect();
    let ddgt: Vec<f64> = curves.iter().map(|(_, b)| b[n - 1]).collect();
    let diffs: Vec<f64> = dpdgt.iter().zip(&ddgt).map(|(a, b)| b - a).collect();
    let (dpdgt_mean, dpdgt_std_err) = mean_stderr(&dpdgt);
    let (ddgt_mean, ddgt_std_err) = mean_stderr(&ddgt);
    let (paired_diff_mean, paired_diff_std_err) = mean_stderr(&diffs);
    Ok(CompareResult {
        seeds,
        n_iters: n,
        dpdgt,
        ddgt,
        dpdgt_mean,
        dpdgt_std_err,
        ddgt_mean,
        ddgt_std_err,
        paired_diff_mean,
        paired_diff_std_err,
        dpdgt_curve,
        ddgt_curve,
    })
}

/// Paired error curves: `iter, dpdgt_err_sq, ddgt_err_sq` (means over seeds).
pub fn compare_csv(cfg: &RunConfig, r: &CompareResult) -> Result<String> {
    let mut out = format!("# config: {}\n", cfg.echo()?);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["iter", "dpdgt_err_sq", "ddgt_err_sq"])?;
    for (k, (a, b)) in r.dpdgt_curve.iter().zip(&r.ddgt_curve).enumerate() {
        w.write_record([(k + 1).to_string(), fmt_f(*a), fmt_f(*b)])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    out.push_str(&String::from_utf8(bytes).expect("csv output is utf-8"));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyOutput {
    pub mu: f64,
    pub delta: f64,
    pub q_c_estimate: f64,
    pub verdicts: ConditionVerdict,
    /// Budget with the certified numeric supremum of the sensitivity.
    pub numeric: Outcome<PrivacyReport>,
    /// Budget with the two-term closed-form supremum.
    pub closed_form: Outcome<PrivacyReport>,
    /// Direct closed-form evaluation on the geometric parameters.
    pub geometric_closed_form: Outcome<f64>,
    pub numeric_d_eta: Outcome<NumericDEta>,
    /// `2 alpha0 delta / (gamma phi mu - 2 alpha0)`.
    pub kernel_bound: Outcome<f64>,
    /// The numeric supremum exceeds the two-term closed form, so the
    /// closed-form budget is not a certified bound for these inputs.
    pub closed_form_dominated: bool,
}

/// Privacy report for the configured schedules. Divergence and violated
/// hypotheses are reported in the output rather than returned as errors.
pub fn cli_privacy(cfg: &RunConfig) -> Result<PrivacyOutput> {
    cfg.validate()?;
    let problem = cfg.build_problem()?;
    let graph = cfg.build_graph()?;
    let s = cfg.schedule_set()?;
    let (mu, delta) = (problem.mu(), cfg.run.delta);
    let spectral = graph.spectral_analysis(s.gamma, s.phi)?;
    let verdicts = check_conditions(&s, mu, spectral.q_c_estimate);
    let text = |e: Error| e.to_string();
    let numeric_d_eta = d_eta_numeric(&s, mu, delta, NUMERIC_K_MAX).map_err(text);
    let closed_form = epsilon_theorem3(&s, mu, delta, DEtaMode::ClosedForm).map_err(text);
    let closed_form_dominated = match (&numeric_d_eta, &closed_form) {
        (Ok(n), Ok(c)) => n.running_max > c.d_eta,
        _ => false,
    };
    Ok(PrivacyOutput {
        mu,
        delta,
        q_c_estimate: spectral.q_c_estimate,
        verdicts,
        numeric: epsilon_theorem3(&s, mu, delta, DEtaMode::Numeric).map_err(text),
        closed_form,
        geometric_closed_form: epsilon_corollary2_for(&s, mu, delta).map_err(text),
        numeric_d_eta,
        kernel_bound: d_eta_kernel_bound(&s, mu, delta).map_err(text),
        closed_form_dominated,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutput {
    /// Row-major `n x m` optimum.
    pub allocation: Vec<f64>,
    pub multiplier: Vec<f64>,
    pub total_allocation: f64,
    pub total_demand: f64,
    pub cost: f64,
}

pub fn solve(cfg: &RunConfig) -> Result<SolveOutput> {
    let problem = cfg.build_problem()?;
    let sol = problem.centralized_solve()?;
    Ok(SolveOutput {
        allocation: sol.allocation.transpose().iter().copied().collect(),
        multiplier: sol.multiplier.clone(),
        total_allocation: sol.allocation.sum(),
        total_demand: problem.demand_matrix().sum(),
        cost: problem.primal_cost(&sol.allocation),
    })
}
