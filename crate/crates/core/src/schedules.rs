//! Step-size and noise-scale schedules, Laplace sampling, and summability
//! verdicts for the convergence and privacy conditions.

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `value(k) = initial * ratio^k`.
///
/// A zero initial value is accepted and yields the identically-zero
/// sequence (noise disabled, or a frozen iteration).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricSchedule {
    pub initial: f64,
    pub ratio: f64,
}

impl GeometricSchedule {
    pub fn new(initial: f64, ratio: f64) -> Result<Self> {
        if !(initial >= 0.0 && initial.is_finite()) {
            return Err(Error::Schedule(format!(
                "initial value {initial} must be finite and >= 0"
            )));
        }
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::Schedule(format!("ratio {ratio} must lie in (0, 1)")));
        }
        Ok(Self { initial, ratio })
    }

    pub fn value(&self, k: usize) -> f64 {
        self.initial * self.ratio.powi(k as i32)
    }

    pub fn is_zero(&self) -> bool {
        self.initial == 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSet {
    pub alpha: GeometricSchedule,
    pub theta_xi: GeometricSchedule,
    pub theta_zeta: GeometricSchedule,
    pub gamma: f64,
    pub phi: f64,
}

impl ScheduleSet {
    pub fn new(
        alpha: GeometricSchedule,
        theta_xi: GeometricSchedule,
        theta_zeta: GeometricSchedule,
        gamma: f64,
        phi: f64,
    ) -> Result<Self> {
        for (name, v) in [("gamma", gamma), ("phi", phi)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(Error::MixingParameter { name, value: v });
            }
        }
        Ok(Self {
            alpha,
            theta_xi,
            theta_zeta,
            gamma,
            phi,
        })
    }

    /// Convergence experiment parameters on the 14-bus benchmark.
    pub fn benchmark() -> Self {
        Self::geometric(0.015, 0.991, 0.01, 0.995, 0.01, 0.995, 0.8, 0.7).expect("valid preset")
    }

    /// Comparison experiment parameters (`alpha_k = 0.034 * 0.99^k`).
    pub fn comparison() -> Self {
        Self::geometric(0.034, 0.99, 0.01, 0.995, 0.01, 0.995, 0.8, 0.7).expect("valid preset")
    }

    #[allow(clippy::too_many_arguments)]
    pub fn geometric(
        alpha0: f64,
        q: f64,
        theta_xi0: f64,
        q_xi: f64,
        theta_zeta0: f64,
        q_zeta: f64,
        gamma: f64,
        phi: f64,
    ) -> Result<Self> {
        Self::new(
            GeometricSchedule::new(alpha0, q)?,
            GeometricSchedule::new(theta_xi0, q_xi)?,
            GeometricSchedule::new(theta_zeta0, q_zeta)?,
            gamma,
            phi,
        )
    }
}

/// Inverse-CDF Laplace transform of `u` in `(-1/2, 1/2)`.
pub fn laplace_from_uniform(theta: f64, u: f64) -> f64 {
    -theta * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

/// One zero-mean Laplace draw with scale `theta` (variance `2 theta^2`).
pub fn laplace_sample<R: Rng + ?Sized>(theta: f64, rng: &mut R) -> Result<f64> {
    if !(theta > 0.0) {
        return Err(Error::LaplaceScale(theta));
    }
    let v: f64 = rng.sample(Open01);
    Ok(laplace_from_uniform(theta, v - 0.5))
}

/// Noise channel of a transmitted message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    /// Pushed deviation estimate (`xi`).
    Push = 0,
    /// Pulled dual estimate (`zeta`).
    Pull = 1,
}

/// Counter-based noise source.
///
/// Every `(agent, channel)` pair owns its own ChaCha stream under the root
/// seed, and iteration `k` reads from a fixed word offset inside it, so a
/// draw depends only on `(seed, agent, iteration, channel, coordinate)`.
#[derive(Debug, Clone)]
pub struct NoiseStreams {
    seed: u64,
    m: usize,
    streams: Vec<ChaCha8Rng>,
}

impl NoiseStreams {
    pub fn new(seed: u64, n_agents: usize, m: usize) -> Self {
        let streams = (0..n_agents * 2)
            .map(|id| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(id as u64);
                rng
            })
            .collect();
        Self { seed, m, streams }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Fills `out` (length `m`) with the draws for `(agent, k, channel)`.
    /// A zero scale yields zeros.
    pub fn fill(&mut self, agent: usize, k: usize, channel: Channel, theta: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.m);
        if theta == 0.0 {
            out.fill(0.0);
            return;
        }
        let rng = &mut self.streams[agent * 2 + channel as usize];
        // Each f64 consumes one u64, i.e. two 32-bit words.
        rng.set_word_pos((k as u128) * (self.m as u128) * 2);
        for o in out.iter_mut() {
            *o = laplace_sample(theta, rng).expect("positive scale");
        }
    }
}

/// A series value: finite closed form or divergent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesSum {
    Finite(f64),
    Divergent,
}

impl SeriesSum {
    pub fn is_finite(&self) -> bool {
        matches!(self, SeriesSum::Finite(_))
    }

    pub fn value(&self) -> f64 {
        match self {
            SeriesSum::Finite(v) => *v,
            SeriesSum::Divergent => f64::INFINITY,
        }
    }
}

/// `sum_k c r^k`, with `c >= 0`.
pub fn geometric_series(c: f64, r: f64) -> SeriesSum {
    if c == 0.0 {
        SeriesSum::Finite(0.0)
    } else if r.is_finite() && r < 1.0 {
        SeriesSum::Finite(c / (1.0 - r))
    } else {
        SeriesSum::Divergent
    }
}

// sum_k (num0 nr^k) / (den0 dr^k) for geometric numerator/denominator.
fn ratio_series(num0: f64, nr: f64, den0: f64, dr: f64) -> SeriesSum {
    if num0 == 0.0 {
        SeriesSum::Finite(0.0)
    } else if den0 == 0.0 {
        SeriesSum::Divergent
    } else {
        geometric_series(num0 / den0, nr / dr)
    }
}

/// Heuristic summation of an arbitrary nonnegative sequence: up to
/// `PARTIAL_SUM_TERMS` terms, divergent unless the partial sums settle to
/// within `PARTIAL_SUM_TOL` (relative) over the final block.
pub const PARTIAL_SUM_TERMS: usize = 1_000_000;
pub const PARTIAL_SUM_TOL: f64 = 1e-9;

pub fn numeric_series(term: impl Fn(usize) -> f64) -> SeriesSum {
    let mut sum = 0.0;
    let mut checkpoint = 0.0;
    let block = PARTIAL_SUM_TERMS / 10;
    for k in 0..PARTIAL_SUM_TERMS {
        let t = term(k);
        if !t.is_finite() {
            return SeriesSum::Divergent;
        }
        sum += t;
        if (k + 1) % block == 0 {
            if k + 1 == PARTIAL_SUM_TERMS {
                return if (sum - checkpoint).abs() <= PARTIAL_SUM_TOL * sum.abs().max(1.0) {
                    SeriesSum::Finite(sum)
                } else {
                    SeriesSum::Divergent
                };
            }
            checkpoint = sum;
        }
    }
    unreachable!()
}

/// Verdicts for every summability and ordering condition on a geometric
/// schedule set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionVerdict {
    pub sum_alpha: SeriesSum,
    pub sum_theta_xi_sq: SeriesSum,
    pub sum_theta_zeta_sq: SeriesSum,
    pub sum_theta_xi_sq_over_alpha: SeriesSum,
    pub sum_theta_zeta_sq_over_alpha: SeriesSum,
    pub sum_alpha_over_theta_xi: SeriesSum,
    pub sum_alpha_over_theta_zeta: SeriesSum,
    pub q_c_estimate: f64,
    /// `q_c < q`: the geometric step size certifies the lambda-existence
    /// condition with `beta = 1`, `k0 = 0`.
    pub lambda_exists: bool,
    /// `{q_c, q_xi^2, q_zeta^2} < q < {q_xi, q_zeta} < 1`.
    pub ratio_ordering: bool,
    /// `alpha_0 < mu gamma phi`.
    pub step_bound: bool,
    /// Summability plus lambda condition (dual and primal convergence).
    pub convergence: bool,
    /// `sum alpha`, `D_{alpha,xi}`, `D_{alpha,zeta}` finite.
    pub privacy: bool,
    /// Closed-form privacy budget hypotheses.
    pub closed_form: bool,
    /// Convergence and privacy together.
    pub combined: bool,
}

pub fn check_conditions(s: &ScheduleSet, mu: f64, q_c_estimate: f64) -> ConditionVerdict {
    let (a0, q) = (s.alpha.initial, s.alpha.ratio);
    let (tx, qx) = (s.theta_xi.initial, s.theta_xi.ratio);
    let (tz, qz) = (s.theta_zeta.initial, s.theta_zeta.ratio);

    let sum_alpha = geometric_series(a0, q);
    let sum_theta_xi_sq = geometric_series(tx * tx, qx * qx);
    let sum_theta_zeta_sq = geometric_series(tz * tz, qz * qz);
    let sum_theta_xi_sq_over_alpha = ratio_series(tx * tx, qx * qx, a0, q);
    let sum_theta_zeta_sq_over_alpha = ratio_series(tz * tz, qz * qz, a0, q);
    let sum_alpha_over_theta_xi = ratio_series(a0, q, tx, qx);
    let sum_alpha_over_theta_zeta = ratio_series(a0, q, tz, qz);

    let lambda_exists = q_c_estimate < q;
    let ratio_ordering = lambda_exists && qx * qx < q && qz * qz < q && q < qx && q < qz && qx < 1.0 && qz < 1.0;
    let step_bound = a0 < mu * s.gamma * s.phi;
    let convergence = [
        sum_alpha,
        sum_theta_xi_sq,
        sum_theta_zeta_sq,
        sum_theta_xi_sq_over_alpha,
        sum_theta_zeta_sq_over_alpha,
    ]
    .iter()
    .all(SeriesSum::is_finite)
        && lambda_exists;
    let privacy = sum_alpha.is_finite() && sum_alpha_over_theta_xi.is_finite() && sum_alpha_over_theta_zeta.is_finite();

    ConditionVerdict {
        sum_alpha,
        sum_theta_xi_sq,
        sum_theta_zeta_sq,
        sum_theta_xi_sq_over_alpha,
        sum_theta_zeta_sq_over_alpha,
        sum_alpha_over_theta_xi,
        sum_alpha_over_theta_zeta,
        q_c_estimate,
        lambda_exists,
        ratio_ordering,
        step_bound,
        convergence,
        privacy,
        closed_form: ratio_ordering && step_bound,
        combined: convergence && privacy,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailSums {
    pub d_alpha_xi: f64,
    pub d_alpha_zeta: f64,
}

/// `D_{alpha,xi} = sum_k alpha_k / theta_{xi,k}` and its `zeta` analogue.
pub fn tail_sums(s: &ScheduleSet) -> Result<TailSums> {
    let one = |theta: &GeometricSchedule, name: &str| -> Result<f64> {
        match ratio_series(s.alpha.initial, s.alpha.ratio, theta.initial, theta.ratio) {
            SeriesSum::Finite(v) => Ok(v),
            SeriesSum::Divergent => Err(Error::Divergent(format!(
                "D_alpha_{name}: requires q < q_{name} and a positive noise scale"
            ))),
        }
    };
    Ok(TailSums {
        d_alpha_xi: one(&s.theta_xi, "xi")?,
        d_alpha_zeta: one(&s.theta_zeta, "zeta")?,
    })
}
