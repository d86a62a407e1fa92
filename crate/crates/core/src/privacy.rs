//! Privacy accounting: the sensitivity recursion, bounds on its supremum,
//! and the cumulative epsilon budget. All deviations are measured in l1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedules::{tail_sums, ScheduleSet};

/// Default recursion horizon for the numeric supremum.
pub const NUMERIC_K_MAX: usize = 100_000;

/// `phi_k` bounds `||Delta s_{i0,k}||_1`, `eta_k` bounds `||Delta tilde_w_{i0,k}||_1`.
/// Both have length `k_max + 1` and start at zero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityTrajectory {
    pub phi: Vec<f64>,
    pub eta: Vec<f64>,
    pub k_max: usize,
}

fn check_inputs(s: &ScheduleSet, mu: f64, delta: f64) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::Hypothesis(format!("mu = {mu} must be positive")));
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::Hypothesis(format!("delta = {delta} must be nonnegative")));
    }
    for (name, v) in [("gamma", s.gamma), ("phi", s.phi)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::MixingParameter { name, value: v });
        }
    }
    Ok(())
}

/// One step of
/// `phi' = (1-g) phi + (a/mu) eta + a delta/mu`,
/// `eta' = (2-g) phi + (1-f+a/mu) eta + a delta/mu`.
fn sensitivity_step(gamma: f64, phi_mix: f64, a_over_mu: f64, delta: f64, phi: f64, eta: f64) -> (f64, f64) {
    let drive = a_over_mu * delta;
    (
        (1.0 - gamma) * phi + a_over_mu * eta + drive,
        (2.0 - gamma) * phi + (1.0 - phi_mix + a_over_mu) * eta + drive,
    )
}

pub fn sensitivity_dynamics(s: &ScheduleSet, mu: f64, delta: f64, k_max: usize) -> Result<SensitivityTrajectory> {
    check_inputs(s, mu, delta)?;
    if k_max == 0 {
        return Err(Error::Hypothesis("k_max must be at least 1".into()));
    }
    let mut phi = Vec::with_capacity(k_max + 1);
    let mut eta = Vec::with_capacity(k_max + 1);
    let (mut p, mut e) = (0.0, 0.0);
    phi.push(p);
    eta.push(e);
    for k in 0..k_max {
        (p, e) = sensitivity_step(s.gamma, s.phi, s.alpha.value(k) / mu, delta, p, e);
        phi.push(p);
        eta.push(e);
    }
    Ok(SensitivityTrajectory { phi, eta, k_max })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DEtaMode {
    ClosedForm,
    Numeric,
}

/// `2 alpha0 delta / (gamma phi mu - alpha0)`.
pub fn d_eta_closed_form(s: &ScheduleSet, mu: f64, delta: f64) -> Result<f64> {
    check_inputs(s, mu, delta)?;
    let a0 = s.alpha.initial;
    let gpm = s.gamma * s.phi * mu;
    if a0 >= gpm {
        return Err(Error::Hypothesis(format!(
            "alpha0 = {a0} must be below mu*gamma*phi = {gpm}"
        )));
    }
    Ok(2.0 * a0 * delta / (gpm - a0))
}

/// `2 alpha0 delta / (gamma phi mu - 2 alpha0)`: a valid upper bound on
/// `sup_k eta_k` for any nonincreasing step size, since the impulse
/// response of the linear part sums to `2 / (gamma phi)`.
pub fn d_eta_kernel_bound(s: &ScheduleSet, mu: f64, delta: f64) -> Result<f64> {
    check_inputs(s, mu, delta)?;
    let a0 = s.alpha.initial;
    let gpm = s.gamma * s.phi * mu;
    if 2.0 * a0 >= gpm {
        return Err(Error::Hypothesis(format!(
            "2 alpha0 = {} must be below mu*gamma*phi = {gpm}",
            2.0 * a0
        )));
    }
    Ok(2.0 * a0 * delta / (gpm - 2.0 * a0))
}

/// Certified numeric supremum of `eta_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NumericDEta {
    /// `max(running_max, tail_bound)`: an upper bound on `sup_k eta_k`.
    pub value: f64,
    /// `max_{k <= horizon} eta_k`.
    pub running_max: f64,
    /// Bound on `sup_{k >= horizon} eta_k`.
    pub tail_bound: f64,
    pub horizon: usize,
    /// The tail bound fell below the running max, so `value` is the exact supremum.
    pub exact: bool,
}

/// `sup_j [P^j (1,1)^T]_2` for `P = [[1-g, 0], [2-g, 1-f]]`.
fn kernel_peak(gamma: f64, phi_mix: f64) -> f64 {
    let (mut u, mut v) = (1.0f64, 1.0f64);
    let mut peak = 1.0f64;
    for _ in 0..1_000_000 {
        (u, v) = ((1.0 - gamma) * u, (2.0 - gamma) * u + (1.0 - phi_mix) * v);
        peak = peak.max(v);
        if u.max(v) <= 1e-16 * peak {
            break;
        }
    }
    peak
}

/// Iterates the recursion until a tail certificate holds. For `k >= K` the
/// recursion is dominated by a nonnegative linear system whose forcing is
/// at most `(alpha_K / mu)(delta + sup eta)`, giving
/// `sup_{k>=K} eta_k <= (kappa max(phi_K, eta_K) + c delta) / (1 - c)` with
/// `c = 2 alpha_K / (gamma phi mu)` and `kappa` the kernel peak.
pub fn d_eta_numeric(s: &ScheduleSet, mu: f64, delta: f64, k_max: usize) -> Result<NumericDEta> {
    check_inputs(s, mu, delta)?;
    let gpm = s.gamma * s.phi * mu;
    let kappa = kernel_peak(s.gamma, s.phi);
    let tail = |k: usize, p: f64, e: f64| -> Option<f64> {
        let c = 2.0 * s.alpha.value(k) / gpm;
        (c < 1.0).then(|| (kappa * p.max(e) + c * delta) / (1.0 - c))
    };
    let (mut p, mut e) = (0.0f64, 0.0f64);
    let mut running_max = 0.0f64;
    let mut last_tail = None;
    for k in 0..=k_max {
        if let Some(b) = tail(k, p, e) {
            last_tail = Some(b);
            if b <= running_max {
                return Ok(NumericDEta {
                    value: running_max,
                    running_max,
                    tail_bound: b,
                    horizon: k,
                    exact: true,
                });
            }
        }
        if k == k_max {
            break;
        }
        (p, e) = sensitivity_step(s.gamma, s.phi, s.alpha.value(k) / mu, delta, p, e);
        running_max = running_max.max(e);
    }
    match last_tail {
        Some(b) if tail(k_max, p, e).is_some() => Ok(NumericDEta {
            value: running_max.max(b),
            running_max,
            tail_bound: b,
            horizon: k_max,
            exact: false,
        }),
        _ => Err(Error::Hypothesis(format!(
            "step size does not fall below mu*gamma*phi/2 = {} within {k_max} iterations",
            gpm / 2.0
        ))),
    }
}

pub fn d_eta_bound(s: &ScheduleSet, mu: f64, delta: f64, mode: DEtaMode) -> Result<f64> {
    match mode {
        DEtaMode::ClosedForm => d_eta_closed_form(s, mu, delta),
        DEtaMode::Numeric => d_eta_numeric(s, mu, delta, NUMERIC_K_MAX).map(|d| d.value),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PrivacyReport {
    pub d_eta: f64,
    pub d_alpha_xi: f64,
    pub d_alpha_zeta: f64,
    /// `f64::INFINITY` when a tail sum diverges (serialized as `null`).
    pub epsilon: f64,
    pub finite: bool,
    pub mu: f64,
    pub gamma: f64,
    pub phi_mix: f64,
    pub delta: f64,
    pub method: DEtaMode,
    /// Name of the failed condition when `epsilon` is infinite.
    pub failure: Option<String>,
}

/// `epsilon = (delta + D_eta) / (mu gamma phi) * (D_{alpha,xi} + phi D_{alpha,zeta})`.
pub fn epsilon_theorem3(s: &ScheduleSet, mu: f64, delta: f64, mode: DEtaMode) -> Result<PrivacyReport> {
    check_inputs(s, mu, delta)?;
    let mut report = PrivacyReport {
        d_eta: f64::NAN,
        d_alpha_xi: f64::INFINITY,
        d_alpha_zeta: f64::INFINITY,
        epsilon: f64::INFINITY,
        finite: false,
        mu,
        gamma: s.gamma,
        phi_mix: s.phi,
        delta,
        method: mode,
        failure: None,
    };
    let tails = match tail_sums(s) {
        Ok(t) => t,
        Err(Error::Divergent(why)) => {
            report.failure = Some(why);
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    report.d_alpha_xi = tails.d_alpha_xi;
    report.d_alpha_zeta = tails.d_alpha_zeta;
    report.d_eta = d_eta_bound(s, mu, delta, mode)?;
    report.epsilon = (delta + report.d_eta) / (mu * s.gamma * s.phi) * (tails.d_alpha_xi + s.phi * tails.d_alpha_zeta);
    report.finite = report.epsilon.is_finite();
    Ok(report)
}

/// Closed-form budget for geometric schedules. Requires `alpha0 < mu gamma phi`,
/// positive noise scales and `q < q_xi, q_zeta < 1`; the stricter convergence
/// ordering `q_xi^2 < q` is reported by `check_conditions`.
#[allow(clippy::too_many_arguments)]
pub fn epsilon_corollary2(
    alpha0: f64,
    q: f64,
    theta_xi0: f64,
    q_xi: f64,
    theta_zeta0: f64,
    q_zeta: f64,
    gamma: f64,
    phi_mix: f64,
    mu: f64,
    delta: f64,
) -> Result<f64> {
    let bad = |msg: String| Err(Error::Hypothesis(msg));
    if !(mu > 0.0) || !(delta >= 0.0) {
        return bad(format!("mu = {mu} must be positive and delta = {delta} nonnegative"));
    }
    if !(gamma > 0.0 && gamma <= 1.0 && phi_mix > 0.0 && phi_mix <= 1.0) {
        return bad(format!("gamma = {gamma}, phi = {phi_mix} must lie in (0, 1]"));
    }
    if !(theta_xi0 > 0.0 && theta_zeta0 > 0.0) {
        return bad("noise scales must be positive".into());
    }
    if !(q > 0.0 && q < q_xi && q < q_zeta && q_xi < 1.0 && q_zeta < 1.0) {
        return bad(format!("need 0 < q = {q} < q_xi = {q_xi}, q_zeta = {q_zeta} < 1"));
    }
    let a = gamma * phi_mix * mu;
    if !(alpha0 >= 0.0 && alpha0 < a) {
        return bad(format!("alpha0 = {alpha0} must lie in [0, mu*gamma*phi = {a})"));
    }
    let prefactor = alpha0 * delta * (a + alpha0) / (a * (a - alpha0));
    Ok(prefactor * (q_xi / (theta_xi0 * (q_xi - q)) + phi_mix * q_zeta / (theta_zeta0 * (q_zeta - q))))
}

/// [`epsilon_corollary2`] on the parameters of a schedule set.
pub fn epsilon_corollary2_for(s: &ScheduleSet, mu: f64, delta: f64) -> Result<f64> {
    epsilon_corollary2(
        s.alpha.initial,
        s.alpha.ratio,
        s.theta_xi.initial,
        s.theta_xi.ratio,
        s.theta_zeta.initial,
        s.theta_zeta.ratio,
        s.gamma,
        s.phi,
        mu,
        delta,
    )
}
