//! Direct descent of the reduced action over truncated Fourier loops.
//!
//! The admissible set is a coordinate subspace of the flattened coefficients
//! (mean removed, and even harmonics removed under the antiperiodic flag), so
//! projection is a mask. Steps that would put any sampled separation under the
//! collision floor are rejected by the line search; the objective is never
//! modified.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{ActionBreakdown, QuadratureSpec, ReducedAction};
use crate::analytic;
use crate::error::{Error, Result};
use crate::params::ProblemParams;
use crate::trajectory::{path_min_separation, FourierPath, DEFAULT_ORDER, DEFAULT_SAMPLES};

const ARMIJO_C1: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
/// Relative size of rounding noise in one action evaluation.
const ACTION_NOISE: f64 = 1e-13;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Steepest descent with Armijo backtracking.
    GradientDescent,
    /// Limited-memory BFGS directions with the same backtracking.
    Lbfgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iters: usize,
    pub grad_tol: f64,
    /// Length, in coefficient space, of the first trial step.
    pub step_init: f64,
    pub use_antiperiodic: bool,
    pub seed: u64,
    pub order: usize,
    pub quad: QuadratureSpec,
    pub method: Method,
    /// Number of curvature pairs kept by L-BFGS.
    pub memory: usize,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iters: 5000,
            grad_tol: 1e-8,
            step_init: 0.1,
            use_antiperiodic: false,
            seed: 0,
            order: DEFAULT_ORDER,
            quad: QuadratureSpec::default(),
            method: Method::Lbfgs,
            memory: 12,
        }
    }
}

impl MinimizeOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::domain("max_iters must be at least 1"));
        }
        if !(self.grad_tol > 0.0) || !(self.step_init > 0.0) {
            return Err(Error::domain("grad_tol and step_init must be positive"));
        }
        if self.order < 1 {
            return Err(Error::domain("order must be at least 1"));
        }
        self.quad.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub iter: usize,
    pub action: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeReport {
    #[serde(with = "path_serde")]
    pub path: crate::trajectory::FourierPath,
    pub action: ActionBreakdown,
    pub grad_norm: f64,
    pub iters: usize,
    /// `false` when `max_iters` ran out first.
    pub converged: bool,
    pub trace: Vec<TraceEntry>,
    pub min_sep: f64,
}

mod path_serde {
    use crate::trajectory::{FourierPath, PathJson};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(path: &FourierPath, s: S) -> Result<S::Ok, S::Error> {
        path.to_json().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<FourierPath, D::Error> {
        let json = PathJson::deserialize(d)?;
        FourierPath::from_json(&json).map_err(serde::de::Error::custom)
    }
}

/// Indices of the flattened coefficient vector that the constraints leave free.
fn free_mask(order: usize, antiperiodic: bool) -> Vec<bool> {
    let mut mask = vec![false; 3 + 6 * order];
    for k in 1..=order {
        if antiperiodic && k % 2 == 0 {
            continue;
        }
        let base = 3 + 6 * (k - 1);
        mask[base..base + 6].iter_mut().for_each(|m| *m = true);
    }
    mask
}

fn apply_mask(v: &mut [f64], mask: &[bool]) {
    v.iter_mut()
        .zip(mask)
        .filter(|(_, m)| !**m)
        .for_each(|(x, _)| *x = 0.0);
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn project(path: &FourierPath, antiperiodic: bool) -> FourierPath {
    if antiperiodic {
        path.project_antiperiodic()
    } else {
        path.project_zero_mean()
    }
}

/// Curvature pairs for the two-loop recursion.
struct Memory {
    pairs: std::collections::VecDeque<(Vec<f64>, Vec<f64>, f64)>,
    capacity: usize,
}

impl Memory {
    fn new(capacity: usize) -> Self {
        Self {
            pairs: Default::default(),
            capacity,
        }
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        if sy <= 1e-12 * norm(&s) * norm(&y) {
            return;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
    }

    fn clear(&mut self) {
        self.pairs.clear();
    }

    /// `-H g` for the implicit inverse-Hessian approximation `H`.
    fn direction(&self, g: &[f64]) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = self.pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            q.iter_mut().for_each(|qi| *qi *= gamma);
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
        }
        q.iter_mut().for_each(|qi| *qi = -*qi);
        q
    }
}

/// Minimizes the reduced action starting from `start` (re-projected and
/// resized to `opts.order`).
pub fn minimize(
    start: &FourierPath,
    params: &ProblemParams,
    opts: &MinimizeOptions,
) -> Result<MinimizeReport> {
    opts.validate()?;
    let params = params.validate()?;
    let order = opts.order;
    let eval = ReducedAction::new(&params, opts.quad, order)?;
    let mask = free_mask(order, opts.use_antiperiodic);

    let start = project(&start.with_order(order), opts.use_antiperiodic);
    let sep = path_min_separation(&start, &params, DEFAULT_SAMPLES.max(opts.quad.nodes));
    if sep.distance < opts.quad.collision_floor {
        return Err(Error::Collision {
            kind: sep.kind,
            separation: sep.distance,
            t: sep.t,
            floor: opts.quad.collision_floor,
        });
    }

    let value_grad = |x: &[f64]| -> Result<(ActionBreakdown, Vec<f64>)> {
        let (b, g) = eval.value_and_gradient(&FourierPath::from_vec(order, x))?;
        let mut g = g.to_vec();
        apply_mask(&mut g, &mask);
        Ok((b, g))
    };

    let mut x = start.to_vec();
    let (mut action, mut g) = value_grad(&x)?;
    let mut gnorm = norm(&g);
    let mut trace = vec![TraceEntry {
        iter: 0,
        action: action.total,
        grad_norm: gnorm,
    }];
    let mut memory = Memory::new(opts.memory.max(1));
    let mut last_step = opts.step_init;
    let mut iters = 0;

    while gnorm > opts.grad_tol && iters < opts.max_iters {
        let mut d = match opts.method {
            Method::Lbfgs => memory.direction(&g),
            Method::GradientDescent => g.iter().map(|v| -v).collect(),
        };
        apply_mask(&mut d, &mask);
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            memory.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -gnorm * gnorm;
        }
        let dnorm = norm(&d);
        let mut step = match opts.method {
            Method::Lbfgs if !memory.pairs.is_empty() => 1.0,
            Method::Lbfgs => (opts.step_init / dnorm).min(1.0),
            Method::GradientDescent => (2.0 * last_step / dnorm).max(f64::MIN_POSITIVE),
        };

        let f0 = action.total;
        let noise = ACTION_NOISE * f0.abs().max(1.0);
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            match value_grad(&trial) {
                Ok((b, gt)) => {
                    let armijo = b.total <= f0 + ARMIJO_C1 * step * slope;
                    // Near the minimum the decrease drops below rounding;
                    // fall back to requiring a smaller gradient.
                    let flat = b.total <= f0 + noise && norm(&gt) < gnorm;
                    if armijo || flat {
                        accepted = Some((trial, b, gt));
                        break;
                    }
                }
                Err(Error::Collision { .. }) => {}
                Err(e) => return Err(e),
            }
            step *= 0.5;
        }

        let Some((trial, b, gt)) = accepted else {
            return Err(Error::Stalled {
                iteration: iters,
                action: action.total,
                grad_norm: gnorm,
            });
        };
        let s: Vec<f64> = trial.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
        last_step = norm(&s);
        if opts.method == Method::Lbfgs {
            memory.push(s, y);
        }
        x = trial;
        action = b;
        g = gt;
        gnorm = norm(&g);
        iters += 1;
        trace.push(TraceEntry {
            iter: iters,
            action: action.total,
            grad_norm: gnorm,
        });
    }

    let path = FourierPath::from_vec(order, &x);
    let min_sep =
        path_min_separation(&path, &params, DEFAULT_SAMPLES.max(opts.quad.nodes)).distance;
    Ok(MinimizeReport {
        path,
        action,
        grad_norm: gnorm,
        iters,
        converged: gnorm <= opts.grad_tol,
        trace,
        min_sep,
    })
}

/// Radius used to scale random starts: the analytic prediction, or 1.
fn reference_radius(params: &ProblemParams) -> f64 {
    analytic::predict(params, analytic::DEFAULT_TOL)
        .map(|r| r.radius)
        .unwrap_or(1.0)
}

/// Seeded random admissible start: harmonics up to order 3 with decaying
/// amplitude, projected, scaled so the RMS radius lies in `[0.5 R, 2 R]`.
/// Candidates closer than `0.1 R` to any collision are redrawn.
pub fn random_start(
    params: &ProblemParams,
    opts: &MinimizeOptions,
    seed: u64,
) -> Result<FourierPath> {
    let params = params.validate()?;
    let radius = reference_radius(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..1000 {
        let raw = project(
            &FourierPath::random(&mut rng, opts.order, 3, 1.0),
            opts.use_antiperiodic,
        );
        let rms = raw.mean_square().sqrt();
        if rms == 0.0 {
            continue;
        }
        let target = radius * rng.random_range(0.5..2.0);
        let path = raw.scale(target / rms);
        let sep = path_min_separation(&path, &params, DEFAULT_SAMPLES);
        if sep.distance >= 0.1 * radius {
            return Ok(path);
        }
    }
    Err(Error::domain("could not draw a collision-free start"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub seed: u64,
    pub action: Option<f64>,
    pub iters: Option<usize>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistartReport {
    pub best: MinimizeReport,
    pub best_seed: u64,
    /// Final actions of every successful start, ascending.
    pub final_actions: Vec<f64>,
    /// Per-start results in seed order.
    pub outcomes: Vec<StartOutcome>,
}

/// Runs [`minimize`] from `n_starts` random starts seeded `opts.seed + i` and
/// keeps the lowest final action (ties go to the earlier seed).
pub fn multistart(
    params: &ProblemParams,
    opts: &MinimizeOptions,
    n_starts: usize,
) -> Result<MultistartReport> {
    if n_starts < 1 {
        return Err(Error::domain("need at least one start"));
    }
    let runs: Vec<(u64, Result<MinimizeReport>)> = (0..n_starts as u64)
        .into_par_iter()
        .map(|i| {
            let seed = opts.seed.wrapping_add(i);
            let run = random_start(params, opts, seed).and_then(|s| minimize(&s, params, opts));
            (seed, run)
        })
        .collect();

    let outcomes: Vec<StartOutcome> = runs
        .iter()
        .map(|(seed, r)| match r {
            Ok(rep) => StartOutcome {
                seed: *seed,
                action: Some(rep.action.total),
                iters: Some(rep.iters),
                error: None,
            },
            Err(e) => StartOutcome {
                seed: *seed,
                action: None,
                iters: None,
                error: Some(e.to_string()),
            },
        })
        .collect();

    let mut final_actions: Vec<f64> = outcomes.iter().filter_map(|o| o.action).collect();
    final_actions.sort_by(f64::total_cmp);

    let mut best: Option<(u64, MinimizeReport)> = None;
    let mut failures = Vec::new();
    for (seed, run) in runs {
        match run {
            Ok(rep) => {
                if best
                    .as_ref()
                    .is_none_or(|(_, b)| rep.action.total < b.action.total)
                {
                    best = Some((seed, rep));
                }
            }
            Err(e) => failures.push((seed, e)),
        }
    }
    match best {
        Some((best_seed, best)) => Ok(MultistartReport {
            best,
            best_seed,
            final_actions,
            outcomes,
        }),
        None => Err(Error::AllStartsFailed { failures }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Point;
    use crate::trajectory::random_vector;
    use approx::assert_relative_eq;

    fn small_opts() -> MinimizeOptions {
        MinimizeOptions {
            order: 6,
            quad: QuadratureSpec::new(96).unwrap(),
            ..Default::default()
        }
    }

    #[test]
    fn critical_start_stops_immediately() {
        let p = ProblemParams::default();
        let r = analytic::solve_lambda(&p, 1e-12).unwrap().radius;
        let start = FourierPath::circle(6, r, 0.0).unwrap();
        let rep = minimize(&start, &p, &small_opts()).unwrap();
        assert!(rep.iters <= 2);
        assert!(rep.grad_norm < 1e-8);
        assert!(rep.converged);
    }

    #[test]
    fn perturbed_circle_relaxes_to_prediction() {
        let p = ProblemParams::default();
        let r = analytic::solve_lambda(&p, 1e-12).unwrap().radius;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mut start = FourierPath::circle(6, 1.2 * r, 0.0).unwrap();
        for k in 1..=4 {
            start.set_cos(k, start.cos_coeff(k) + random_vector(&mut rng) * (0.01 * r));
            start.set_sin(k, start.sin_coeff(k) + random_vector(&mut rng) * (0.01 * r));
        }
        let rep = minimize(&start, &p, &small_opts()).unwrap();
        assert!(rep.converged, "grad {}", rep.grad_norm);
        let fitted = rep.path.mean_square().sqrt();
        assert!((fitted - r).abs() < 1e-4, "{fitted} vs {r}");
        assert_relative_eq!(
            rep.action.total,
            analytic::circle_action(r, &p).total,
            max_relative = 1e-9
        );
    }

    #[test]
    fn trace_is_nonincreasing_and_constraints_hold() {
        let p = ProblemParams::new(1.0, 2.0, 0.5, 1.5, 4);
        let mut opts = small_opts();
        opts.use_antiperiodic = true;
        let start = random_start(&p, &opts, 3).unwrap();
        let rep = minimize(&start, &p, &opts).unwrap();
        for w in rep.trace.windows(2) {
            assert!(w[1].action <= w[0].action + ACTION_NOISE * w[0].action.abs().max(1.0));
        }
        assert!(rep.path.is_antiperiodic());
        assert!(rep.min_sep > 0.0);
    }

    #[test]
    fn colliding_start_is_rejected() {
        let p = ProblemParams::default();
        let mut hit = FourierPath::zeros(6);
        hit.set_cos(1, Point::new(1.0, 0.0, 0.0));
        hit.set_sin(1, Point::new(0.0, 1.0, 0.0));
        let err = minimize(&hit, &p, &small_opts()).unwrap_err();
        assert!(matches!(err, Error::Collision { .. }));
    }

    #[test]
    fn max_iters_is_flagged() {
        let p = ProblemParams::default();
        let mut opts = small_opts();
        opts.max_iters = 2;
        let start = random_start(&p, &opts, 1).unwrap();
        let rep = minimize(&start, &p, &opts).unwrap();
        assert_eq!(rep.iters, 2);
        assert!(!rep.converged);
    }

    #[test]
    fn gradient_descent_reproduces_lbfgs() {
        let p = ProblemParams::new(1.0, 1.0, 1.0, 1.0, 2);
        let r = analytic::solve_lambda(&p, 1e-12).unwrap().radius;
        let start = FourierPath::circle(3, 1.1 * r, 0.2).unwrap().add_scaled(
            &FourierPath::random(&mut ChaCha8Rng::seed_from_u64(2), 3, 3, 0.02),
            1.0,
        );
        let base = MinimizeOptions {
            order: 3,
            quad: QuadratureSpec::new(48).unwrap(),
            grad_tol: 1e-6,
            max_iters: 20000,
            ..Default::default()
        };
        let lbfgs = minimize(&start, &p, &base).unwrap();
        let gd = minimize(
            &start,
            &p,
            &MinimizeOptions {
                method: Method::GradientDescent,
                ..base
            },
        )
        .unwrap();
        assert!(gd.converged && lbfgs.converged);
        assert_relative_eq!(gd.action.total, lbfgs.action.total, max_relative = 1e-10);
        assert!((gd.path.mean_square().sqrt() - r).abs() < 1e-5);
        assert!(lbfgs.iters < gd.iters);
    }

    #[test]
    fn random_starts_are_admissible_and_seeded() {
        let p = ProblemParams::default();
        let opts = small_opts();
        let r = analytic::solve_lambda(&p, 1e-12).unwrap().radius;
        for seed in 0..20 {
            let s = random_start(&p, &opts, seed).unwrap();
            assert_eq!(s.mean(), Point::zeros());
            let rms = s.mean_square().sqrt();
            assert!(rms >= 0.5 * r * (1.0 - 1e-12) && rms <= 2.0 * r * (1.0 + 1e-12));
            assert!((4..=6)
                .all(|k| s.cos_coeff(k) == Point::zeros() && s.sin_coeff(k) == Point::zeros()));
        }
        assert_eq!(
            random_start(&p, &opts, 5).unwrap(),
            random_start(&p, &opts, 5).unwrap()
        );
    }

    #[test]
    fn single_start_equals_minimize() {
        let p = ProblemParams::default();
        let opts = MinimizeOptions {
            seed: 42,
            ..small_opts()
        };
        let multi = multistart(&p, &opts, 1).unwrap();
        let single = minimize(&random_start(&p, &opts, 42).unwrap(), &p, &opts).unwrap();
        assert_eq!(multi.best, single);
        assert_eq!(
            multistart(&p, &opts, 3).unwrap(),
            multistart(&p, &opts, 3).unwrap()
        );
        assert!(multistart(&p, &opts, 0).is_err());
    }
}
