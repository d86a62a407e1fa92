//! The resource allocation problem, its dual, and adjacent problems.
//!
//! Each agent `i` holds a strongly convex cost `F_i` over a box and a local
//! demand `d_i`; the agents jointly minimise `sum_i F_i(w_i)` subject to
//! `sum_i w_i = sum_i d_i`. The dual variable `x` prices the coupling
//! constraint and every dual quantity reduces to the per-agent primal
//! recovery map [`CostFunction::conjugate_argmin`].

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coordinate-separable strongly convex cost restricted to a box.
///
/// Every method acts on one coordinate; a length-`m` decision applies the
/// same scalar cost to each coordinate.
pub trait CostFunction: Clone + Send + Sync {
    fn value(&self, w: f64) -> f64;
    fn gradient(&self, w: f64) -> f64;
    /// `argmin_{w in box} F(w) - tilde_w * w`.
    fn conjugate_argmin(&self, tilde_w: f64) -> f64;
    /// Strong convexity modulus.
    fn modulus(&self) -> f64;
    fn bounds(&self) -> (f64, f64);
    /// Copy of the cost with the gradient shifted by the constant `db`.
    fn shift_gradient(&self, db: f64) -> Self;

    /// True when the feasible box is a single point; such agents never carry
    /// information about their cost.
    fn is_degenerate(&self) -> bool {
        let (lo, hi) = self.bounds();
        lo == hi
    }
}

/// `F(w) = a w^2 + b w + c` on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticBoxCost {
    pub a: f64,
    pub b: f64,
    #[serde(default)]
    pub c: f64,
    pub lo: f64,
    pub hi: f64,
}

impl QuadraticBoxCost {
    pub fn new(a: f64, b: f64, c: f64, lo: f64, hi: f64) -> Self {
        Self { a, b, c, lo, hi }
    }

    fn validate(&self, agent: usize) -> Result<()> {
        let bad = |reason: &str| Error::InvalidCost {
            agent,
            reason: reason.to_string(),
        };
        if !(self.a > 0.0 && self.a.is_finite()) {
            return Err(bad("quadratic coefficient must be positive"));
        }
        if !(self.lo <= self.hi) {
            return Err(bad("box requires lo <= hi"));
        }
        if !self.b.is_finite() || !self.c.is_finite() || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(bad("coefficients must be finite"));
        }
        Ok(())
    }
}

impl CostFunction for QuadraticBoxCost {
    fn value(&self, w: f64) -> f64 {
        self.a * w * w + self.b * w + self.c
    }

    fn gradient(&self, w: f64) -> f64 {
        2.0 * self.a * w + self.b
    }

    fn conjugate_argmin(&self, tilde_w: f64) -> f64 {
        ((tilde_w - self.b) / (2.0 * self.a)).clamp(self.lo, self.hi)
    }

    fn modulus(&self) -> f64 {
        2.0 * self.a
    }

    fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn shift_gradient(&self, db: f64) -> Self {
        Self {
            b: self.b + db,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Agent<F = QuadraticBoxCost> {
    pub cost: F,
    /// Local demand, one entry per resource coordinate.
    pub demand: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem<F = QuadraticBoxCost> {
    agents: Vec<Agent<F>>,
    m: usize,
    mu: f64,
}

impl AllocationProblem<QuadraticBoxCost> {
    /// Builds a problem from quadratic costs and scalar demands (`m = 1`).
    pub fn scalar(agents: impl IntoIterator<Item = (QuadraticBoxCost, f64)>) -> Result<Self> {
        let agents: Vec<_> = agents
            .into_iter()
            .map(|(cost, d)| Agent { cost, demand: vec![d] })
            .collect();
        for (i, a) in agents.iter().enumerate() {
            a.cost.validate(i)?;
        }
        Self::new(agents)
    }
}

impl<F: CostFunction> AllocationProblem<F> {
    pub fn new(agents: Vec<Agent<F>>) -> Result<Self> {
        let Some(first) = agents.first() else {
            return Err(Error::Dimension("problem has no agents".into()));
        };
        let m = first.demand.len();
        if m == 0 {
            return Err(Error::Dimension("resource dimension must be positive".into()));
        }
        for (i, a) in agents.iter().enumerate() {
            if a.demand.len() != m {
                return Err(Error::Dimension(format!(
                    "agent {i} has {} demand entries, expected {m}",
                    a.demand.len()
                )));
            }
            let (lo, hi) = a.cost.bounds();
            if !(lo <= hi) || !(a.cost.modulus() > 0.0) {
                return Err(Error::InvalidCost {
                    agent: i,
                    reason: "cost must be strongly convex on a nonempty box".into(),
                });
            }
        }
        // Agents with a single-point box have a constant cost on their domain
        // and are excluded from the modulus.
        let mu = agents
            .iter()
            .filter(|a| !a.cost.is_degenerate())
            .map(|a| a.cost.modulus())
            .fold(f64::INFINITY, f64::min);
        let mu = if mu.is_finite() {
            mu
        } else {
            agents.iter().map(|a| a.cost.modulus()).fold(f64::INFINITY, f64::min)
        };
        let p = Self { agents, m, mu };
        p.check_slater()?;
        Ok(p)
    }

    fn check_slater(&self) -> Result<()> {
        for j in 0..self.m {
            let (lo, hi) = self.bounds_sum();
            let d = self.total_demand(j);
            let nondegenerate = self.agents.iter().any(|a| !a.cost.is_degenerate());
            let ok = if nondegenerate {
                lo < d && d < hi
            } else {
                lo <= d && d <= hi
            };
            if !ok {
                return Err(Error::Infeasible { demand: d, lo, hi });
            }
        }
        Ok(())
    }

    fn bounds_sum(&self) -> (f64, f64) {
        self.agents.iter().fold((0.0, 0.0), |(l, h), a| {
            let (lo, hi) = a.cost.bounds();
            (l + lo, h + hi)
        })
    }

    pub fn agents(&self) -> &[Agent<F>] {
        &self.agents
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    /// Global strong convexity modulus over non-degenerate agents.
    pub fn mu(&self) -> f64 {
        self.mu
    }

    /// Indices of agents whose box is not a single point.
    pub fn active_agents(&self) -> Vec<usize> {
        (0..self.agents.len())
            .filter(|&i| !self.agents[i].cost.is_degenerate())
            .collect()
    }

    pub fn total_demand(&self, coord: usize) -> f64 {
        self.agents.iter().map(|a| a.demand[coord]).sum()
    }

    /// `n x m` demand matrix.
    pub fn demand_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.agents.len(), self.m, |i, j| self.agents[i].demand[j])
    }

    /// Primal cost `sum_i F_i(w_i)` of an `n x m` allocation.
    pub fn primal_cost(&self, w: &DMatrix<f64>) -> f64 {
        self.agents
            .iter()
            .enumerate()
            .map(|(i, a)| (0..self.m).map(|j| a.cost.value(w[(i, j)])).sum::<f64>())
            .sum()
    }

    /// Per-agent gradient of the dual objective, `d_i - argmin(F_i + x w)`.
    pub fn dual_gradient(&self, agent: usize, x: &[f64]) -> Vec<f64> {
        dual_gradient(&self.agents[agent].cost, &self.agents[agent].demand, x)
    }

    /// `f(x) = sum_i [ sup_w(-x w - F_i(w)) + x d_i ]`.
    pub fn dual_value(&self, x: &[f64]) -> f64 {
        let mut total = 0.0;
        for a in &self.agents {
            for (&xj, &dj) in x.iter().zip(&a.demand).take(self.m) {
                let w = a.cost.conjugate_argmin(-xj);
                total += -(a.cost.value(w) + xj * w) + xj * dj;
            }
        }
        total
    }

    /// Gradient of [`dual_value`](Self::dual_value).
    pub fn dual_value_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.m];
        for i in 0..self.agents.len() {
            for (gj, v) in g.iter_mut().zip(self.dual_gradient(i, x)) {
                *gj += v;
            }
        }
        g
    }

    /// Centralized optimum by bisection on the balance multiplier of each
    /// coordinate.
    pub fn centralized_solve(&self) -> Result<CentralSolution> {
        self.check_slater()?;
        let n = self.agents.len();
        let mut w = DMatrix::zeros(n, self.m);
        let mut multiplier = Vec::with_capacity(self.m);
        for j in 0..self.m {
            let d = self.total_demand(j);
            let tol = 1e-12 * d.abs().max(1.0);
            let supply = |nu: f64| -> f64 { self.agents.iter().map(|a| a.cost.conjugate_argmin(nu)).sum() };
            // Gradient range over the boxes brackets the multiplier.
            let (mut lo, mut hi) = self
                .agents
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), a| {
                    let (blo, bhi) = a.cost.bounds();
                    (l.min(a.cost.gradient(blo)), h.max(a.cost.gradient(bhi)))
                });
            lo -= 1.0;
            hi += 1.0;
            let mut nu = 0.5 * (lo + hi);
            for _ in 0..200 {
                nu = 0.5 * (lo + hi);
                let gap = supply(nu) - d;
                if gap.abs() <= tol {
                    break;
                }
                if gap < 0.0 {
                    lo = nu;
                } else {
                    hi = nu;
                }
            }
            for (i, a) in self.agents.iter().enumerate() {
                w[(i, j)] = a.cost.conjugate_argmin(nu);
            }
            multiplier.push(nu);
        }
        Ok(CentralSolution {
            allocation: w,
            multiplier,
        })
    }

    /// Builds the delta-adjacent problem that shifts the gradient of one
    /// agent's cost by `db`.
    pub fn make_adjacent(&self, p: &AdjacencyPerturbation) -> Result<AdjacentProblem<F>> {
        if p.target >= self.agents.len() {
            return Err(Error::AgentOutOfRange(p.target, self.agents.len()));
        }
        if !(p.db.abs() <= p.delta) {
            return Err(Error::PerturbationTooLarge {
                db: p.db,
                delta: p.delta,
            });
        }
        let mut agents = self.agents.clone();
        agents[p.target].cost = agents[p.target].cost.shift_gradient(p.db);
        let problem = Self {
            agents,
            m: self.m,
            mu: self.mu,
        };
        // Conditions: identical boxes, differences confined to the target,
        // and a gradient gap bounded by delta across the target's box.
        let distance = gradient_distance(&self.agents[p.target].cost, &problem.agents[p.target].cost);
        debug_assert!(self
            .agents
            .iter()
            .zip(&problem.agents)
            .all(|(a, b)| a.cost.bounds() == b.cost.bounds() && a.demand == b.demand));
        if distance > p.delta * (1.0 + 1e-12) {
            return Err(Error::PerturbationTooLarge {
                db: distance,
                delta: p.delta,
            });
        }
        Ok(AdjacentProblem {
            problem,
            gradient_distance: distance,
        })
    }
}

/// `d - argmin_{w in box} (F(w) + x w)`, coordinatewise.
pub fn dual_gradient<F: CostFunction>(cost: &F, demand: &[f64], x: &[f64]) -> Vec<f64> {
    demand
        .iter()
        .zip(x)
        .map(|(d, xj)| d - cost.conjugate_argmin(-xj))
        .collect()
}

// Sup of |grad F - grad F'| over the shared box; exact for affine gradient
// differences, which are extremal at the box endpoints.
fn gradient_distance<F: CostFunction>(a: &F, b: &F) -> f64 {
    let (lo, hi) = a.bounds();
    let mid = 0.5 * (lo + hi);
    [lo, mid, hi]
        .iter()
        .map(|&w| (a.gradient(w) - b.gradient(w)).abs())
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralSolution {
    /// `n x m` optimal allocation.
    pub allocation: DMatrix<f64>,
    /// Balance multiplier per coordinate; the optimal dual point is its negation.
    pub multiplier: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyPerturbation {
    /// 0-based agent index.
    pub target: usize,
    pub delta: f64,
    pub db: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdjacentProblem<F = QuadraticBoxCost> {
    pub problem: AllocationProblem<F>,
    pub gradient_distance: f64,
}

/// Generator buses of the IEEE 14-bus system (1-based).
pub const IEEE14_GENERATOR_BUSES: [usize; 5] = [1, 2, 3, 6, 8];

/// Local demands in MW at buses 1..=14.
pub const IEEE14_DEMANDS: [f64; 14] = [
    0.0, 9.0, 56.0, 55.0, 27.0, 27.0, 0.0, 0.0, 8.0, 24.0, 53.0, 46.0, 16.0, 40.0,
];

/// The 14-agent economic dispatch problem. Buses without a generator get a
/// `[0, 0]` box; their cost coefficients are placeholders. Constant offsets
/// are zero.
pub fn ieee14_problem() -> AllocationProblem {
    let gens = [
        (1, 0.04, 2.0, 80.0),
        (2, 0.03, 3.0, 90.0),
        (3, 0.035, 4.0, 70.0),
        (6, 0.03, 4.0, 70.0),
        (8, 0.04, 2.5, 80.0),
    ];
    let agents = (1..=14).map(|bus| {
        let cost = gens
            .iter()
            .find(|g| g.0 == bus)
            .map(|&(_, a, b, hi)| QuadraticBoxCost::new(a, b, 0.0, 0.0, hi))
            .unwrap_or(QuadraticBoxCost::new(1.0, 0.0, 0.0, 0.0, 0.0));
        (cost, IEEE14_DEMANDS[bus - 1])
    });
    AllocationProblem::scalar(agents).expect("preset is feasible")
}
