//! Closed-form prediction of the circular minimizer.
//!
//! The reduced action is split into a center part weighted by `(1 + lambda)/4`
//! and a mutual part weighted by `(1 - lambda)/4`. Each part is bounded below by
//! a scalar convex function whose minimizer is a circle of radius `R1(lambda)`,
//! respectively `R2(lambda)`. The predicted orbit uses the unique `lambda` in
//! `(-1, 1)` where the two radii agree.
//!
//! Internally `lambda = tanh(z)`. Both `1 + lambda` and `1 - lambda` are then
//! available to full relative precision, which matters when the root crowds
//! against `+-1` (small `m` or small `M`).

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::ActionBreakdown;
use crate::error::{Error, Result};
use crate::params::{sine_power_sum, ProblemParams};

/// Default tolerance on `|F(lambda)|`.
pub const DEFAULT_TOL: f64 = 1e-12;
/// Default bisection budget.
pub const DEFAULT_MAX_BISECTIONS: usize = 200;
/// Bracket width, in the `tanh` parameter, at which bisection hands over to Newton.
const BRACKET_WIDTH: f64 = 1e-13;

/// The splitting parameter with `1 + lambda` and `1 - lambda` kept separately.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub lambda: f64,
    pub one_plus: f64,
    pub one_minus: f64,
}

impl Split {
    pub fn from_lambda(lambda: f64) -> Result<Self> {
        if !(lambda > -1.0 && lambda < 1.0) {
            return Err(Error::domain(format!("lambda {lambda} outside (-1, 1)")));
        }
        Ok(Self {
            lambda,
            one_plus: 1.0 + lambda,
            one_minus: 1.0 - lambda,
        })
    }

    /// `lambda = tanh(z)`.
    pub fn from_logit(z: f64) -> Self {
        Self {
            lambda: z.tanh(),
            one_plus: 2.0 / (1.0 + (-2.0 * z).exp()),
            one_minus: 2.0 / (1.0 + (2.0 * z).exp()),
        }
    }

    fn from_report(report: &PredictReport) -> Self {
        Self {
            lambda: report.lambda_tilde,
            one_plus: report.one_plus_lambda,
            one_minus: report.one_minus_lambda,
        }
    }
}

/// Which formula produced a [`PredictReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Both masses positive: root of `R2 - R1`.
    Split,
    /// `M = 0`: pure choreography, `lambda = -1`.
    NoCenters,
    /// `m = 0`: a single massless loop around the centers, `lambda = 1`.
    NoMutual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictReport {
    pub regime: Regime,
    pub lambda_tilde: f64,
    pub one_plus_lambda: f64,
    pub one_minus_lambda: f64,
    pub r1: f64,
    pub r2: f64,
    pub radius: f64,
    pub f_residual: f64,
    pub iterations: usize,
}

/// `mu_j = (2 sin(j pi / n))^-1`.
pub fn mu(j: usize, n: usize) -> Result<f64> {
    check_index(j, n)?;
    Ok(0.5 / (j as f64 * PI / n as f64).sin())
}

/// `nu_j = mu_j^(2 + alpha) / sum_k mu_k^alpha`.
pub fn nu(j: usize, n: usize, alpha: f64) -> Result<f64> {
    check_index(j, n)?;
    let denom: f64 = (1..n).map(|k| mu_unchecked(k, n).powf(alpha)).sum();
    Ok(mu_unchecked(j, n).powf(2.0 + alpha) / denom)
}

fn mu_unchecked(j: usize, n: usize) -> f64 {
    0.5 / (j as f64 * PI / n as f64).sin()
}

fn check_index(j: usize, n: usize) -> Result<()> {
    if j == 0 || j >= n {
        return Err(Error::domain(format!(
            "index j = {j} outside 1..={}",
            n.saturating_sub(1)
        )));
    }
    Ok(())
}

fn check_center_part(lambda: f64, big_m: f64) -> Result<()> {
    if !(lambda > -1.0) {
        return Err(Error::domain("lambda must exceed -1"));
    }
    if !(big_m > 0.0) {
        return Err(Error::domain("M must be positive"));
    }
    Ok(())
}

/// `Psi(s) = (1 + lambda) s^2 / 4 + 2 M (2 pi)^(beta/2 + 1) s^-beta - (1 + lambda) pi / 2`.
pub fn psi(s: f64, lambda: f64, beta: f64, big_m: f64) -> Result<f64> {
    check_center_part(lambda, big_m)?;
    if !(s > 0.0) {
        return Err(Error::domain("s must be positive"));
    }
    Ok(psi_at(s, 1.0 + lambda, beta, big_m))
}

fn psi_at(s: f64, one_plus: f64, beta: f64, big_m: f64) -> f64 {
    one_plus * s * s / 4.0 + 2.0 * big_m * TAU.powf(beta / 2.0 + 1.0) * s.powf(-beta)
        - one_plus * PI / 2.0
}

/// `s_0 = sqrt(2 pi) (4 beta M / (1 + lambda))^(1/(beta + 2))`.
pub fn psi_argmin(lambda: f64, beta: f64, big_m: f64) -> Result<f64> {
    check_center_part(lambda, big_m)?;
    Ok(psi_argmin_at(1.0 + lambda, beta, big_m))
}

fn psi_argmin_at(one_plus: f64, beta: f64, big_m: f64) -> f64 {
    TAU.sqrt() * (4.0 * beta * big_m / one_plus).powf(1.0 / (beta + 2.0))
}

/// `Phi_j(s) = (1 - lambda) nu_j s / 4 + (2 pi)^(1 + alpha/2) m s^(-alpha/2) / 2`.
pub fn phi(j: usize, s: f64, lambda: f64, params: &ProblemParams) -> Result<f64> {
    let nu_j = nu(j, params.n, params.alpha)?;
    Ok(phi_at(nu_j, s, 1.0 - lambda, params))
}

fn phi_at(nu_j: f64, s: f64, one_minus: f64, params: &ProblemParams) -> f64 {
    one_minus * nu_j * s / 4.0
        + 0.5 * TAU.powf(1.0 + params.alpha / 2.0) * params.m * s.powf(-params.alpha / 2.0)
}

/// Minimizer of `Phi_j`: `2 pi (alpha m / (nu_j (1 - lambda)))^(2/(alpha + 2))`.
pub fn phi_argmin(j: usize, lambda: f64, params: &ProblemParams) -> Result<f64> {
    if !(lambda < 1.0) {
        return Err(Error::domain("lambda must be below 1"));
    }
    let nu_j = nu(j, params.n, params.alpha)?;
    Ok(phi_argmin_at(nu_j, 1.0 - lambda, params))
}

fn phi_argmin_at(nu_j: f64, one_minus: f64, params: &ProblemParams) -> f64 {
    TAU * (params.alpha * params.m / (nu_j * one_minus)).powf(2.0 / (params.alpha + 2.0))
}

/// Radicand `(4 beta M / (1 + lambda))^(2/(beta+2)) - 1` of `R1`.
fn r1_radicand(one_plus: f64, beta: f64, big_m: f64) -> f64 {
    (4.0 * beta * big_m / one_plus).powf(2.0 / (beta + 2.0)) - 1.0
}

/// Radius of the circle minimizing the center part of the split action,
/// `sqrt((4 beta M / (1 + lambda))^(2/(beta+2)) - 1)`.
pub fn radius_r1(lambda: f64, beta: f64, big_m: f64) -> Result<f64> {
    check_center_part(lambda, big_m)?;
    if lambda > 1.0 {
        return Err(Error::domain("lambda must not exceed 1"));
    }
    let radicand = r1_radicand(1.0 + lambda, beta, big_m);
    if radicand < -4.0 * f64::EPSILON {
        return Err(Error::domain(format!(
            "lambda {lambda} beyond 4 beta M - 1 = {}",
            4.0 * beta * big_m - 1.0
        )));
    }
    Ok(radicand.max(0.0).sqrt())
}

/// `R1` extended by zero past the end of its domain.
fn r1_clamped(split: &Split, beta: f64, big_m: f64) -> f64 {
    r1_radicand(split.one_plus, beta, big_m).max(0.0).sqrt()
}

/// Radius of the circle minimizing the mutual part of the split action,
/// `2^(-alpha/(alpha+2)) (alpha m / (1 - lambda) sum_j sin^-alpha(j pi / n))^(1/(alpha+2))`.
pub fn radius_r2(lambda: f64, alpha: f64, m: f64, n: usize) -> Result<f64> {
    if !(-1.0..1.0).contains(&lambda) {
        return Err(Error::domain("lambda must lie in [-1, 1)"));
    }
    if !(m > 0.0) {
        return Err(Error::domain("m must be positive"));
    }
    if n < 2 {
        return Err(Error::domain("n must be at least 2"));
    }
    Ok(r2_at(1.0 - lambda, alpha, m, n))
}

fn r2_at(one_minus: f64, alpha: f64, m: f64, n: usize) -> f64 {
    let sum = sine_power_sum(n, alpha);
    2f64.powf(-alpha / (alpha + 2.0)) * (alpha * m * sum / one_minus).powf(1.0 / (alpha + 2.0))
}

fn check_split_params(params: &ProblemParams) -> Result<ProblemParams> {
    let params = params.validate()?;
    if !(params.m > 0.0) {
        return Err(Error::domain("m must be positive"));
    }
    if !(params.big_m > 0.0) {
        return Err(Error::domain("M must be positive"));
    }
    if !params.has_unit_centers() {
        return Err(Error::domain(
            "closed-form radii assume centers at distance 1 from the origin",
        ));
    }
    Ok(params)
}

fn mismatch_at(split: &Split, p: &ProblemParams) -> f64 {
    r2_at(split.one_minus, p.alpha, p.m, p.n) - r1_clamped(split, p.beta, p.big_m)
}

/// `dF/dz` for `lambda = tanh(z)`.
fn mismatch_slope_logit(split: &Split, p: &ProblemParams) -> f64 {
    let r2 = r2_at(split.one_minus, p.alpha, p.m, p.n);
    let mut slope = r2 * split.one_plus / (p.alpha + 2.0);
    let r1 = r1_clamped(split, p.beta, p.big_m);
    if r1 > 0.0 {
        let expo = 2.0 / (p.beta + 2.0);
        slope += expo * (r1 * r1 + 1.0) * split.one_minus / (2.0 * r1);
    }
    slope
}

/// `F(lambda) = R2(lambda) - R1(lambda)`, with `R1 = 0` where its radicand is negative.
pub fn mismatch_f(lambda: f64, params: &ProblemParams) -> Result<f64> {
    let p = check_split_params(params)?;
    Ok(mismatch_at(&Split::from_lambda(lambda)?, &p))
}

/// Root of `F` on `(-1, 1)` by bisection in `z = atanh(lambda)`, polished by Newton.
pub fn solve_lambda(params: &ProblemParams, tol: f64) -> Result<PredictReport> {
    solve_lambda_with_budget(params, tol, DEFAULT_MAX_BISECTIONS)
}

pub fn solve_lambda_with_budget(
    params: &ProblemParams,
    tol: f64,
    max_bisections: usize,
) -> Result<PredictReport> {
    let p = check_split_params(params)?;
    if !(tol > 0.0) {
        return Err(Error::domain("tolerance must be positive"));
    }
    let f = |z: f64| mismatch_at(&Split::from_logit(z), &p);

    // F -> -inf as z -> -inf and +inf as z -> +inf.
    let mut iterations = 0;
    let (mut lo, mut hi) = (-1.0f64, 1.0f64);
    while f(lo) >= 0.0 {
        lo *= 2.0;
        iterations += 1;
        if lo < -700.0 {
            return Err(Error::Convergence {
                iterations,
                residual: f(lo),
            });
        }
    }
    while f(hi) <= 0.0 {
        hi *= 2.0;
        iterations += 1;
        if hi > 700.0 {
            return Err(Error::Convergence {
                iterations,
                residual: f(hi),
            });
        }
    }

    let mut exact = None;
    while hi - lo > BRACKET_WIDTH {
        if iterations >= max_bisections {
            let residual = f(lo).abs().min(f(hi).abs());
            return Err(Error::Convergence {
                iterations,
                residual,
            });
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        let fm = f(mid);
        if fm == 0.0 {
            exact = Some(mid);
            break;
        }
        if fm < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    let mut best = exact.unwrap_or(if f(lo).abs() <= f(hi).abs() { lo } else { hi });
    let mut best_f = f(best);
    if exact.is_none() {
        for _ in 0..3 {
            if best_f == 0.0 {
                break;
            }
            let split = Split::from_logit(best);
            let step = best_f / mismatch_slope_logit(&split, &p);
            let next = best - step;
            if !(next >= lo && next <= hi) {
                break;
            }
            iterations += 1;
            let fn_ = f(next);
            if fn_.abs() < best_f.abs() {
                best = next;
                best_f = fn_;
            } else {
                break;
            }
        }
    }

    if !(best_f.abs() <= tol) {
        return Err(Error::Convergence {
            iterations,
            residual: best_f.abs(),
        });
    }
    let split = Split::from_logit(best);
    let r1 = r1_clamped(&split, p.beta, p.big_m);
    let r2 = r2_at(split.one_minus, p.alpha, p.m, p.n);
    Ok(PredictReport {
        regime: Regime::Split,
        lambda_tilde: split.lambda,
        one_plus_lambda: split.one_plus,
        one_minus_lambda: split.one_minus,
        r1,
        r2,
        radius: r2,
        f_residual: best_f.abs(),
        iterations,
    })
}

/// [`solve_lambda`] extended to the massless limits: `M = 0` uses `lambda = -1`
/// and `R2(-1)`; `m = 0` uses `lambda = 1` and `sqrt((2 beta M)^(2/(beta+2)) - 1)`.
pub fn predict(params: &ProblemParams, tol: f64) -> Result<PredictReport> {
    let p = params.validate()?;
    if !p.has_unit_centers() {
        return Err(Error::domain(
            "closed-form radii assume centers at distance 1 from the origin",
        ));
    }
    match (p.m > 0.0, p.big_m > 0.0) {
        (true, true) => solve_lambda(&p, tol),
        (true, false) => {
            let r = r2_at(2.0, p.alpha, p.m, p.n);
            Ok(limit_report(Regime::NoCenters, -1.0, r))
        }
        (false, true) => {
            let radicand = (2.0 * p.beta * p.big_m).powf(2.0 / (p.beta + 2.0)) - 1.0;
            if !(radicand > 0.0) {
                return Err(Error::domain(
                    "no circular orbit: 2 beta M must exceed 1 when m = 0",
                ));
            }
            Ok(limit_report(Regime::NoMutual, 1.0, radicand.sqrt()))
        }
        (false, false) => Err(Error::domain("no circular orbit without any mass")),
    }
}

fn limit_report(regime: Regime, lambda: f64, radius: f64) -> PredictReport {
    PredictReport {
        regime,
        lambda_tilde: lambda,
        one_plus_lambda: 1.0 + lambda,
        one_minus_lambda: 1.0 - lambda,
        r1: radius,
        r2: radius,
        radius,
        f_residual: 0.0,
        iterations: 0,
    }
}

/// Centripetal balance on the unit-angular-speed circle of radius `R` in the
/// yoz-plane: `R - [alpha m (2R)^-(alpha+1) sum_j sin^-alpha(j pi/n)
/// + 2 beta M R (R^2 + 1)^-((beta+2)/2)]`.
pub fn force_balance_residual(radius: f64, params: &ProblemParams) -> f64 {
    let p = params;
    let mutual =
        p.alpha * p.m * (2.0 * radius).powf(-(p.alpha + 1.0)) * sine_power_sum(p.n, p.alpha);
    let center =
        2.0 * p.beta * p.big_m * radius * (radius * radius + 1.0).powf(-(p.beta + 2.0) / 2.0);
    radius - (mutual + center)
}

/// Closed-form reduced action of the yoz circle of radius `R`.
pub fn circle_action(radius: f64, params: &ProblemParams) -> ActionBreakdown {
    let p = params;
    let kinetic = PI * radius * radius;
    let center_potential = 4.0 * PI * p.big_m * (radius * radius + 1.0).powf(-p.beta / 2.0);
    let mutual_potential = PI * p.m * (2.0 * radius).powf(-p.alpha) * sine_power_sum(p.n, p.alpha);
    ActionBreakdown {
        kinetic,
        center_potential,
        mutual_potential,
        total: kinetic + center_potential + mutual_potential,
    }
}

/// `min_{s >= sqrt(2 pi)} Psi(s) + sum_j Phi_j(sbar_j)`: a lower bound on the
/// reduced action of every zero-mean collision-free loop, for any split.
pub fn action_lower_bound(params: &ProblemParams, split: &Split) -> Result<f64> {
    let p = check_split_params(params)?;
    let s0 = psi_argmin_at(split.one_plus, p.beta, p.big_m).max(TAU.sqrt());
    let mut bound = psi_at(s0, split.one_plus, p.beta, p.big_m);
    for j in 1..p.n {
        let nu_j = nu(j, p.n, p.alpha)?;
        let s = phi_argmin_at(nu_j, split.one_minus, &p);
        bound += phi_at(nu_j, s, split.one_minus, &p);
    }
    Ok(bound)
}

/// [`action_lower_bound`] at the root recorded in `report`.
pub fn lower_bound_at(params: &ProblemParams, report: &PredictReport) -> Result<f64> {
    action_lower_bound(params, &Split::from_report(report))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: f64,
    pub lambda_tilde: f64,
    pub radius: f64,
    pub f_residual: f64,
}

/// [`solve_lambda`] for each mass in `m_values`, in input order.
pub fn radius_sweep(params: &ProblemParams, m_values: &[f64], tol: f64) -> Result<Vec<SweepRow>> {
    if let Some(&bad) = m_values.iter().find(|m| !(**m > 0.0)) {
        return Err(Error::domain(format!(
            "sweep masses must be positive, got {bad}"
        )));
    }
    m_values
        .par_iter()
        .map(|&m| {
            let p = ProblemParams { m, ..*params };
            solve_lambda(&p, tol)
                .map(|r| SweepRow {
                    m,
                    lambda_tilde: r.lambda_tilde,
                    radius: r.radius,
                    f_residual: r.f_residual,
                })
                .map_err(|e| Error::AtMass {
                    m,
                    source: Box::new(e),
                })
        })
        .collect()
}

/// CSV with header `m,lambda_tilde,radius,f_residual`.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("m,lambda_tilde,radius,f_residual\n");
    for r in rows {
        out.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{:.17e}\n",
            r.m, r.lambda_tilde, r.radius, r.f_residual
        ));
    }
    out
}
