//! Directed communication graphs and their mixing matrices.
//!
//! Two graphs share one node set: the pull graph induced by the
//! row-stochastic matrix `R` (dual estimates are pulled along it) and the
//! push graph induced by the column-stochastic matrix `C` (deviation
//! estimates are pushed along it). Edge pairs use the receiver-first
//! convention: `(i, j)` in the pull list means agent `i` pulls from `j`,
//! and `(i, j)` in the push list means `i` receives pushes from `j`.
//! Public edge lists are 1-based; matrices are 0-based.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};

/// Power-iteration tolerance for deflated spectral radii.
pub const POWER_TOL: f64 = 1e-12;
/// Power-iteration cap.
pub const POWER_MAX_ITERS: usize = 100_000;
/// Largest graph for which the dense eigensolver fallback is used.
pub const DENSE_FALLBACK_MAX_N: usize = 64;

/// Physical links of the IEEE 14-bus communication network, as directed
/// pairs `(from, to)` (1-based).
pub fn ieee14_links() -> Vec<(usize, usize)> {
    let mut links: Vec<(usize, usize)> = (1..=12).flat_map(|i| [(i, i + 1), (i, i + 2)]).collect();
    links.extend_from_slice(&[
        (13, 14),
        (13, 1),
        (14, 1),
        (1, 7),
        (2, 8),
        (3, 2),
        (3, 9),
        (4, 10),
        (5, 2),
        (5, 11),
        (6, 12),
    ]);
    links
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommGraph {
    n: usize,
    edges_r: BTreeSet<(usize, usize)>,
    edges_c: BTreeSet<(usize, usize)>,
    r: DMatrix<f64>,
    c: DMatrix<f64>,
}

fn collect_edges(n: usize, edges: &[(usize, usize)]) -> Result<BTreeSet<(usize, usize)>> {
    let mut set = BTreeSet::new();
    for &(i, j) in edges {
        if i == 0 || j == 0 || i > n || j > n {
            return Err(Error::NodeOutOfRange(i, j, n));
        }
        if i != j {
            set.insert((i - 1, j - 1));
        }
    }
    Ok(set)
}

impl CommGraph {
    /// Builds uniform weights over neighbours plus self.
    ///
    /// `R_ij = 1 / (|in(i)| + 1)` for each in-neighbour `j` of `i` and for
    /// `j = i`; `C_ij = 1 / (|out(j)| + 1)` for each out-neighbour `i` of `j`
    /// and for `i = j`. Self-loops in the input are ignored.
    pub fn build_uniform_weights(
        n_agents: usize,
        edges_r: &[(usize, usize)],
        edges_c: &[(usize, usize)],
    ) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::EmptyGraph);
        }
        let n = n_agents;
        let er = collect_edges(n, edges_r)?;
        let ec = collect_edges(n, edges_c)?;

        let mut in_deg = vec![0usize; n];
        for &(i, _) in &er {
            in_deg[i] += 1;
        }
        let mut out_deg = vec![0usize; n];
        for &(_, j) in &ec {
            out_deg[j] += 1;
        }

        let mut r = DMatrix::zeros(n, n);
        for i in 0..n {
            r[(i, i)] = 1.0 / (in_deg[i] + 1) as f64;
        }
        for &(i, j) in &er {
            r[(i, j)] = 1.0 / (in_deg[i] + 1) as f64;
        }
        let mut c = DMatrix::zeros(n, n);
        for j in 0..n {
            c[(j, j)] = 1.0 / (out_deg[j] + 1) as f64;
        }
        for &(i, j) in &ec {
            c[(i, j)] = 1.0 / (out_deg[j] + 1) as f64;
        }

        Ok(Self {
            n,
            edges_r: er,
            edges_c: ec,
            r,
            c,
        })
    }

    /// The IEEE 14-bus topology. A listed link `(u, v)` carries data from
    /// `u` to `v`: `v` pulls from `u` and `u` pushes to `v`.
    pub fn ieee14() -> Self {
        let pairs: Vec<(usize, usize)> = ieee14_links().into_iter().map(|(u, v)| (v, u)).collect();
        Self::build_uniform_weights(14, &pairs, &pairs).expect("static edge list is valid")
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> &DMatrix<f64> {
        &self.r
    }

    pub fn c(&self) -> &DMatrix<f64> {
        &self.c
    }

    /// Pull edges as 1-based `(receiver, sender)` pairs.
    pub fn edges_r(&self) -> Vec<(usize, usize)> {
        self.edges_r.iter().map(|&(i, j)| (i + 1, j + 1)).collect()
    }

    /// Push edges as 1-based `(receiver, sender)` pairs.
    pub fn edges_c(&self) -> Vec<(usize, usize)> {
        self.edges_c.iter().map(|&(i, j)| (i + 1, j + 1)).collect()
    }

    /// `R_phi = (1 - phi) I + phi R`.
    pub fn r_phi(&self, phi: f64) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n) * (1.0 - phi) + &self.r * phi
    }

    /// `C_gamma = (1 - gamma) I + gamma C`.
    pub fn c_gamma(&self, gamma: f64) -> DMatrix<f64> {
        DMatrix::identity(self.n, self.n) * (1.0 - gamma) + &self.c * gamma
    }

    pub fn max_row_sum_error(&self) -> f64 {
        (0..self.n)
            .map(|i| (self.r.row(i).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_col_sum_error(&self) -> f64 {
        (0..self.n)
            .map(|j| (self.c.column(j).sum() - 1.0).abs())
            .fold(0.0, f64::max)
    }

    // Nodes reachable from `root` when data flows j -> i whenever `flows(i, j)`.
    fn reachable(&self, root: usize, flows: impl Fn(usize, usize) -> bool) -> usize {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        let mut count = 1;
        while let Some(j) = queue.pop_front() {
            for (i, seen_i) in seen.iter_mut().enumerate() {
                if !*seen_i && flows(i, j) {
                    *seen_i = true;
                    count += 1;
                    queue.push_back(i);
                }
            }
        }
        count
    }

    /// Roots of spanning trees of the pull graph `G_R`.
    pub fn roots_r(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&r| self.reachable(r, |i, j| i != j && self.r[(i, j)] > 0.0) == self.n)
            .collect()
    }

    /// Roots of spanning trees of `G_{C^T}`, i.e. nodes every other node can
    /// reach by pushing.
    pub fn roots_ct(&self) -> Vec<usize> {
        (0..self.n)
            .filter(|&r| self.reachable(r, |i, j| i != j && self.c[(j, i)] > 0.0) == self.n)
            .collect()
    }

    /// Spanning-tree condition: both `G_R` and `G_{C^T}` have a spanning tree
    /// and some node is a root of both. The reported root is 1-based.
    pub fn check_assumption2(&self) -> RootCheck {
        let rr = self.roots_r();
        let rc = self.roots_ct();
        let common_root = rr.iter().find(|r| rc.contains(r)).map(|r| r + 1);
        RootCheck {
            holds: common_root.is_some(),
            common_root,
        }
    }

    /// Perron vectors, deflated spectral radii and `q_c` for the given
    /// mixing parameters.
    pub fn spectral_analysis(&self, gamma: f64, phi: f64) -> Result<SpectralData> {
        check_mixing("gamma", gamma)?;
        check_mixing("phi", phi)?;
        if !self.check_assumption2().holds {
            return Err(Error::NoCommonRoot);
        }
        let (pi_r, pi_c, method) = match self.perron_power() {
            Ok((pr, pc)) => (pr, pc, SpectralMethod::PowerIteration),
            Err(e) if self.n > DENSE_FALLBACK_MAX_N => return Err(e),
            Err(_) => {
                let (pr, pc) = self.perron_dense();
                (pr, pc, SpectralMethod::Dense)
            }
        };
        let dr = deflated(&self.r_phi(phi), &DVector::from_element(self.n, 1.0), &pi_r);
        let dc = deflated(&self.c_gamma(gamma), &pi_c, &DVector::from_element(self.n, 1.0));
        let (rho_r, m1) = self.radius(&dr)?;
        let (rho_c, m2) = self.radius(&dc)?;
        let method = match (method, m1, m2) {
            (SpectralMethod::PowerIteration, SpectralMethod::PowerIteration, SpectralMethod::PowerIteration) => {
                SpectralMethod::PowerIteration
            }
            _ => SpectralMethod::Dense,
        };
        Ok(SpectralData {
            pi_r: pi_r.iter().copied().collect(),
            pi_c: pi_c.iter().copied().collect(),
            gamma,
            phi,
            rho_r,
            rho_c,
            q_c_estimate: (1.0 + rho_c * rho_c) / 2.0,
            method,
        })
    }

    /// Spectral radius of `R_phi - 1 pi_R^T`.
    pub fn deflated_radius_r(&self, phi: f64) -> Result<f64> {
        let pi_r = self.left_perron_r()?;
        let d = deflated(&self.r_phi(phi), &DVector::from_element(self.n, 1.0), &pi_r);
        Ok(self.radius(&d)?.0)
    }

    /// Spectral radius of `C_gamma - pi_C 1^T`.
    pub fn deflated_radius_c(&self, gamma: f64) -> Result<f64> {
        let pi_c = self.right_perron_c()?;
        let d = deflated(&self.c_gamma(gamma), &pi_c, &DVector::from_element(self.n, 1.0));
        Ok(self.radius(&d)?.0)
    }

    /// Left Perron vector of `R`, with the dense fallback for small graphs.
    pub fn left_perron_r(&self) -> Result<DVector<f64>> {
        match perron_power(&self.r.transpose()) {
            Ok(v) => Ok(v),
            Err(_) if self.n <= DENSE_FALLBACK_MAX_N => Ok(perron_dense(&self.r.transpose())),
            Err(e) => Err(e),
        }
    }

    /// Right Perron vector of `C`, with the dense fallback for small graphs.
    pub fn right_perron_c(&self) -> Result<DVector<f64>> {
        match perron_power(&self.c) {
            Ok(v) => Ok(v),
            Err(_) if self.n <= DENSE_FALLBACK_MAX_N => Ok(perron_dense(&self.c)),
            Err(e) => Err(e),
        }
    }

    fn perron_power(&self) -> Result<(DVector<f64>, DVector<f64>)> {
        Ok((perron_power(&self.r.transpose())?, perron_power(&self.c)?))
    }

    fn perron_dense(&self) -> (DVector<f64>, DVector<f64>) {
        (perron_dense(&self.r.transpose()), perron_dense(&self.c))
    }

    fn radius(&self, m: &DMatrix<f64>) -> Result<(f64, SpectralMethod)> {
        match power_radius(m) {
            Ok(rho) => Ok((rho, SpectralMethod::PowerIteration)),
            Err(_) if self.n <= DENSE_FALLBACK_MAX_N => Ok((dense_radius(m), SpectralMethod::Dense)),
            Err(e) => Err(e),
        }
    }
}

fn check_mixing(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::MixingParameter { name, value })
    }
}

// m - u v^T
fn deflated(m: &DMatrix<f64>, u: &DVector<f64>, v: &DVector<f64>) -> DMatrix<f64> {
    m - u * v.transpose()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralMethod {
    PowerIteration,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RootCheck {
    pub holds: bool,
    /// 1-based node index.
    pub common_root: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectralData {
    /// Left Perron vector of `R`, entries summing to one.
    pub pi_r: Vec<f64>,
    /// Right Perron vector of `C`, entries summing to one.
    pub pi_c: Vec<f64>,
    pub gamma: f64,
    pub phi: f64,
    /// Spectral radius of `R_phi - 1 pi_R^T`.
    pub rho_r: f64,
    /// Spectral radius of `C_gamma - pi_C 1^T`.
    pub rho_c: f64,
    /// `(1 + rho_c^2) / 2`.
    pub q_c_estimate: f64,
    pub method: SpectralMethod,
}

impl SpectralData {
    /// `pi_C^T pi_R`.
    pub fn perron_overlap(&self) -> f64 {
        self.pi_r.iter().zip(&self.pi_c).map(|(a, b)| a * b).sum()
    }
}

/// Right eigenvector at eigenvalue one of a column-stochastic matrix `m`,
/// normalised to unit sum. Iterates the lazy chain `(I + m) / 2`, which has
/// the same fixed point and no periodic modes.
fn perron_power(m: &DMatrix<f64>) -> Result<DVector<f64>> {
    let n = m.nrows();
    let lazy = (DMatrix::identity(n, n) + m) * 0.5;
    let mut v = DVector::from_element(n, 1.0 / n as f64);
    for _ in 0..POWER_MAX_ITERS {
        let mut next = &lazy * &v;
        let s = next.sum();
        next /= s;
        let change = (&next - &v).amax();
        v = next;
        if change <= 1e-15 {
            let residual = (m * &v - &v).amax();
            if residual <= 1e-12 {
                return Ok(v);
            }
        }
    }
    Err(Error::PowerIterationFailed(POWER_MAX_ITERS))
}

fn perron_dense(m: &DMatrix<f64>) -> DVector<f64> {
    // Solve (m - I) v = 0 with the last equation replaced by 1^T v = 1.
    let n = m.nrows();
    let mut a = m - DMatrix::identity(n, n);
    let mut b = DVector::zeros(n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    b[n - 1] = 1.0;
    let v = a
        .clone()
        .lu()
        .solve(&b)
        .unwrap_or_else(|| a.svd(true, true).solve(&b, 1e-14).expect("svd solve"));
    let s = v.sum();
    v / s
}

/// Spectral radius by power iteration on the norm growth ratio.
pub fn power_radius(m: &DMatrix<f64>) -> Result<f64> {
    let n = m.nrows();
    let mut x = DVector::from_fn(n, |i, _| 1.0 + ((i + 1) as f64).sin() * 0.5);
    x /= x.norm();
    let mut prev = f64::NAN;
    for _ in 0..POWER_MAX_ITERS {
        let y = m * &x;
        let ratio = y.norm();
        if ratio == 0.0 {
            return Ok(0.0);
        }
        if (ratio - prev).abs() <= POWER_TOL * ratio.max(1.0) {
            return Ok(ratio);
        }
        prev = ratio;
        x = y / ratio;
    }
    Err(Error::PowerIterationFailed(POWER_MAX_ITERS))
}

/// Spectral radius from the complex eigenvalues of a real Schur form.
pub fn dense_radius(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}
