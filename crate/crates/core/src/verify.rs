//! Numerical checks of the inequalities, equality cases and equations of
//! motion behind the circular solution.
//!
//! Checks built only from Parseval sums are exact to rounding; the Jensen
//! bound and the ODE residual sample the loop on a uniform grid.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::action::{QuadratureSpec, ReducedAction, DEFAULT_COLLISION_FLOOR, DEFAULT_NODES};
use crate::analytic::{self, force_balance_residual};
use crate::error::{Error, Result, SeparationKind};
use crate::params::{Point, ProblemParams};
use crate::trajectory::{path_min_separation, FourierPath, SampleGrid};

/// Relative tolerance for identities evaluated by Parseval sums.
pub const PARSEVAL_TOL: f64 = 1e-10;
/// Relative tolerance for identities evaluated by quadrature.
pub const QUADRATURE_TOL: f64 = 1e-8;

/// Verdict of one inequality `lhs >= rhs`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InequalityCheck {
    pub lhs: f64,
    pub rhs: f64,
    /// `lhs - rhs`.
    pub margin: f64,
    /// Absolute tolerance used for both flags.
    pub tolerance: f64,
    pub holds: bool,
    pub equality_case: bool,
}

impl InequalityCheck {
    fn new(lhs: f64, rhs: f64, rel_tol: f64) -> Self {
        let margin = lhs - rhs;
        let tolerance = rel_tol * lhs.abs().max(rhs.abs()).max(1.0);
        Self {
            lhs,
            rhs,
            margin,
            tolerance,
            holds: margin >= -tolerance,
            equality_case: margin.abs() <= tolerance,
        }
    }
}

fn check_theta(theta: f64) -> Result<()> {
    if !(theta > 0.0 && theta < TAU) {
        return Err(Error::domain(format!("theta = {theta} outside (0, 2 pi)")));
    }
    Ok(())
}

fn check_zero_mean(path: &FourierPath) -> Result<()> {
    let scale = path.coeff_norm().max(1.0);
    if path.mean().norm() > 1e-12 * scale {
        return Err(Error::domain("path must have zero mean"));
    }
    Ok(())
}

fn grid_nodes(order: usize) -> usize {
    DEFAULT_NODES.max(8 * order)
}

/// `int |x'|^2 >= mu_theta^2 int |x(t) - x(t + theta)|^2`, with
/// `mu_theta = (2 sin(theta / 2))^-1`.
pub fn check_pw(path: &FourierPath, theta: f64) -> Result<InequalityCheck> {
    check_theta(theta)?;
    check_zero_mean(path)?;
    let mu = 0.5 / (0.5 * theta).sin();
    let lhs = path.kinetic_integral();
    let rhs = mu * mu * path.chord_integral(theta);
    Ok(InequalityCheck::new(lhs, rhs, PARSEVAL_TOL))
}

/// `int |x'|^2 >= sum_j nu_j int |x(t) - x(t + 2 pi j / n)|^2`.
pub fn check_weighted(path: &FourierPath, n: usize, alpha: f64) -> Result<InequalityCheck> {
    if n < 2 {
        return Err(Error::domain("n must be at least 2"));
    }
    if !(alpha > 0.0) {
        return Err(Error::domain("alpha must be positive"));
    }
    check_zero_mean(path)?;
    let lhs = path.kinetic_integral();
    let mut rhs = 0.0;
    for j in 1..n {
        rhs += analytic::nu(j, n, alpha)? * path.chord_integral(TAU * j as f64 / n as f64);
    }
    Ok(InequalityCheck::new(lhs, rhs, PARSEVAL_TOL))
}

/// `int |c(t)|^-p dt >= (2 pi)^(1 + p/2) (int |c|^2)^(-p/2)` for the chord
/// `c(t) = x(t) - x(t + theta)` and `p = exponent`.
pub fn check_jensen(path: &FourierPath, theta: f64, exponent: f64) -> Result<InequalityCheck> {
    check_jensen_with(path, theta, exponent, grid_nodes(path.order()))
}

/// [`check_jensen`] on a grid of `nodes` points.
pub fn check_jensen_with(
    path: &FourierPath,
    theta: f64,
    exponent: f64,
    nodes: usize,
) -> Result<InequalityCheck> {
    if !(exponent > 0.0) {
        return Err(Error::domain("exponent must be positive"));
    }
    let grid = SampleGrid::new(nodes, path.order());
    let sq = chord_squares(&grid, path, theta);
    let (imin, zmin) = sq
        .iter()
        .copied()
        .enumerate()
        .fold(
            (0, f64::INFINITY),
            |acc, (i, z)| if z < acc.1 { (i, z) } else { acc },
        );
    if zmin.sqrt() < DEFAULT_COLLISION_FLOOR {
        return Err(Error::Collision {
            kind: SeparationKind::Mutual,
            separation: zmin.sqrt(),
            t: grid.time(imin),
            floor: DEFAULT_COLLISION_FLOOR,
        });
    }
    let lhs = grid.step() * sq.iter().map(|z| z.powf(-0.5 * exponent)).sum::<f64>();
    let rhs = TAU.powf(1.0 + 0.5 * exponent) * path.chord_integral(theta).powf(-0.5 * exponent);
    let mut check = InequalityCheck::new(lhs, rhs, QUADRATURE_TOL);
    check.equality_case = relative_spread(&sq) <= QUADRATURE_TOL;
    Ok(check)
}

fn chord_squares(grid: &SampleGrid, path: &FourierPath, theta: f64) -> Vec<f64> {
    let x = grid.sample(path);
    let y = grid.sample(&path.shift(theta));
    x.iter()
        .zip(&y)
        .map(|(a, b)| (a - b).norm_squared())
        .collect()
}

/// `(max - min) / mean` of positive samples.
fn relative_spread(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &z| {
            (lo.min(z), hi.max(z))
        });
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    if mean == 0.0 {
        return 0.0;
    }
    (hi - lo) / mean
}

/// `int |x'|^2 >= int |x|^2` for a zero-mean loop.
pub fn pw_averaging_check(path: &FourierPath) -> InequalityCheck {
    InequalityCheck::new(path.kinetic_integral(), path.l2_squared(), PARSEVAL_TOL)
}

/// Outcome of testing a first-harmonic loop for constant chord length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ChordDiagnostic {
    /// Constant chord and a uniform circle: `|a| = |b|`, `a . b = 0`.
    Circle {
        center: [f64; 3],
        normal: [f64; 3],
        radius: f64,
        chord_spread: f64,
    },
    /// The chord length varies, so the hypothesis does not apply.
    HypothesisNotMet { chord_spread: f64 },
    /// Constant chord but the coefficients are not a circle. Never expected.
    Inconsistent {
        chord_spread: f64,
        norm_gap: f64,
        dot: f64,
    },
}

/// For `x = a_0 + a cos t + b sin t`, tests whether `|x(t) - x(t + theta)|`
/// is constant and, if so, that the loop is a uniform circle.
pub fn constant_chord_implies_circle(path: &FourierPath, theta: f64) -> Result<ChordDiagnostic> {
    check_theta(theta)?;
    if !path.is_first_harmonic() {
        return Err(Error::domain("path has harmonics above the first"));
    }
    let a = path.cos_coeff(1);
    let b = path.sin_coeff(1);
    let scale = a.norm().max(b.norm());
    if scale == 0.0 {
        return Err(Error::Degenerate("constant loop".into()));
    }
    let grid = SampleGrid::new(256, path.order());
    let spread = relative_spread(&chord_squares(&grid, path, theta));
    if spread > PARSEVAL_TOL {
        return Ok(ChordDiagnostic::HypothesisNotMet {
            chord_spread: spread,
        });
    }
    let norm_gap = (a.norm() - b.norm()).abs() / scale;
    let dot = a.dot(&b) / (scale * scale);
    if norm_gap > PARSEVAL_TOL || dot.abs() > PARSEVAL_TOL {
        return Ok(ChordDiagnostic::Inconsistent {
            chord_spread: spread,
            norm_gap,
            dot,
        });
    }
    let normal = a.cross(&b).normalize();
    Ok(ChordDiagnostic::Circle {
        center: path.mean().into(),
        normal: normal.into(),
        radius: a.norm(),
        chord_spread: spread,
    })
}

/// Acceleration of body 0 under the attractive inverse-power forces.
fn acceleration(x: &[Point], shifted: &[Vec<Point>], i: usize, params: &ProblemParams) -> Point {
    let p = params;
    let mut acc = Point::zeros();
    if p.m > 0.0 {
        for s in shifted {
            let d = x[i] - s[i];
            acc -= d * (p.alpha * p.m * d.norm().powf(-(p.alpha + 2.0)));
        }
    }
    if p.big_m > 0.0 {
        for c in p.centers() {
            let d = x[i] - c;
            acc -= d * (p.beta * p.big_m * d.norm().powf(-(p.beta + 2.0)));
        }
    }
    acc
}

/// `sup |q'' - a(q)| / max(1, sup |q''|)` for body 0 of the choreography.
pub fn ode_residual(path: &FourierPath, params: &ProblemParams) -> Result<f64> {
    ode_residual_with(path, params, grid_nodes(path.order()))
}

/// [`ode_residual`] on a grid of `nodes` points.
pub fn ode_residual_with(path: &FourierPath, params: &ProblemParams, nodes: usize) -> Result<f64> {
    let params = params.validate()?;
    let sep = path_min_separation(path, &params, nodes);
    let relevant = match sep.kind {
        SeparationKind::Mutual => params.m > 0.0,
        SeparationKind::Center => params.big_m > 0.0,
    };
    if relevant && sep.distance < DEFAULT_COLLISION_FLOOR {
        return Err(Error::Collision {
            kind: sep.kind,
            separation: sep.distance,
            t: sep.t,
            floor: DEFAULT_COLLISION_FLOOR,
        });
    }
    let grid = SampleGrid::new(nodes, path.order());
    let x = grid.sample(path);
    let shifted: Vec<Vec<Point>> = (1..params.n)
        .map(|j| grid.sample(&path.shift(TAU * j as f64 / params.n as f64)))
        .collect();
    let xdd = grid.sample(&path.derivative().derivative());
    let mut worst: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for (i, q) in xdd.iter().enumerate() {
        worst = worst.max((q - acceleration(&x, &shifted, i, &params)).norm());
        scale = scale.max(q.norm());
    }
    Ok(worst / scale.max(1.0))
}

/// Least-squares plane and circle through a sampled loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleFit {
    pub center: [f64; 3],
    pub radius: f64,
    /// Unit normal of the fitted plane, sign chosen so its largest component is positive.
    pub normal: [f64; 3],
    /// Largest distance of a sample from the plane.
    pub planarity_dev: f64,
    /// `(max - min) / mean` of the speed over the samples.
    pub speed_dev: f64,
    /// Largest `| |x - center| - radius | / radius`.
    pub radial_dev: f64,
    pub uniform_circular: bool,
}

pub const CIRCLE_PLANARITY_TOL: f64 = 1e-6;
pub const CIRCLE_SPEED_TOL: f64 = 1e-6;

pub fn circle_fit(path: &FourierPath) -> Result<CircleFit> {
    let nodes = 256.max(8 * path.order());
    let grid = SampleGrid::new(nodes, path.order());
    let pts = grid.sample(path);
    let centroid: Point = pts.iter().sum::<Point>() / nodes as f64;
    let mut cov = Matrix3::zeros();
    for p in &pts {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= nodes as f64;

    let eig = SymmetricEigen::new(cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let top = eig.eigenvalues[order[0]];
    let second = eig.eigenvalues[order[1]];
    if !(top > 0.0) || second <= 1e-20 * top {
        return Err(Error::Degenerate(
            "sampled points do not span a plane".into(),
        ));
    }
    let u: Vector3<f64> = eig.eigenvectors.column(order[0]).into();
    let v: Vector3<f64> = eig.eigenvectors.column(order[1]).into();
    let mut normal: Vector3<f64> = eig.eigenvectors.column(order[2]).into();
    let lead = normal.iamax();
    if normal[lead] < 0.0 {
        normal = -normal;
    }

    // Algebraic fit: p^2 = 2 c . p + d in plane coordinates.
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    let mut planarity_dev: f64 = 0.0;
    for p in &pts {
        let d = p - centroid;
        planarity_dev = planarity_dev.max(d.dot(&normal).abs());
        let (pu, pv) = (d.dot(&u), d.dot(&v));
        let row = Vector3::new(2.0 * pu, 2.0 * pv, 1.0);
        ata += row * row.transpose();
        atb += row * (pu * pu + pv * pv);
    }
    let sol = ata
        .cholesky()
        .ok_or_else(|| Error::Degenerate("circle fit is singular".into()))?
        .solve(&atb);
    let (cu, cv) = (sol[0], sol[1]);
    let radius = (sol[2] + cu * cu + cv * cv).max(0.0).sqrt();
    let center = centroid + u * cu + v * cv;

    let radial_dev = pts
        .iter()
        .map(|p| ((p - center).norm() - radius).abs())
        .fold(0.0, f64::max)
        / radius;
    let speeds: Vec<f64> = grid
        .sample(&path.derivative())
        .iter()
        .map(|d| d.norm())
        .collect();
    let speed_dev = relative_spread(&speeds);

    let uniform_circular = planarity_dev < CIRCLE_PLANARITY_TOL * radius
        && speed_dev < CIRCLE_SPEED_TOL
        && radial_dev < CIRCLE_PLANARITY_TOL;
    Ok(CircleFit {
        center: center.into(),
        radius,
        normal: normal.into(),
        planarity_dev,
        speed_dev,
        radial_dev,
        uniform_circular,
    })
}

/// Random verification campaigns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    /// The four inequalities on random zero-mean loops.
    Inequalities,
    /// ODE residual of analytic circles for random parameters.
    Ode,
    /// Action lower bound on random loops and its attainment by the circle.
    Chain,
}

impl Suite {
    pub const ALL: [Suite; 3] = [Suite::Inequalities, Suite::Ode, Suite::Chain];
}

/// Aggregate of one campaign. `worst_margin` is the smallest signed margin
/// seen; positive means every check passed with room to spare.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CampaignSummary {
    pub checked: usize,
    pub failed: usize,
    pub worst_margin: f64,
}

impl CampaignSummary {
    fn empty() -> Self {
        Self {
            checked: 0,
            failed: 0,
            worst_margin: f64::INFINITY,
        }
    }

    fn record(&mut self, passed: bool, margin: f64) {
        self.checked += 1;
        self.failed += usize::from(!passed);
        self.worst_margin = self.worst_margin.min(margin);
    }

    fn merge(mut self, other: Self) -> Self {
        self.checked += other.checked;
        self.failed += other.failed;
        self.worst_margin = self.worst_margin.min(other.worst_margin);
        self
    }
}

/// Independent stream `index` of the master `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Runs `paths` cases of `suite`; case `i` draws from [`path_rng`]`(seed, i)`.
pub fn run_campaign(suite: Suite, paths: usize, seed: u64) -> CampaignSummary {
    let case = match suite {
        Suite::Inequalities => inequality_case,
        Suite::Ode => ode_case,
        Suite::Chain => chain_case,
    };
    let mut out = (0..paths as u64)
        .into_par_iter()
        .map(|i| case(&mut path_rng(seed, i)))
        .collect::<Vec<_>>()
        .into_iter()
        .fold(CampaignSummary::empty(), CampaignSummary::merge);
    if out.checked == 0 {
        out.worst_margin = 0.0;
    }
    out
}

fn record_check(summary: &mut CampaignSummary, check: Result<InequalityCheck>) {
    match check {
        Ok(c) => summary.record(c.holds, c.margin),
        Err(e) => {
            log::warn!("check failed to run: {e}");
            summary.record(false, f64::NEG_INFINITY);
        }
    }
}

fn inequality_case(rng: &mut ChaCha8Rng) -> CampaignSummary {
    let order = rng.random_range(1..=8);
    let path = FourierPath::random(rng, order, order, 1.0);
    let theta = rng.random_range(1e-3..TAU - 1e-3);
    let n = rng.random_range(2..=8);
    let alpha = [0.5, 1.0, 2.0][rng.random_range(0..3)];
    let mut s = CampaignSummary::empty();
    record_check(&mut s, check_pw(&path, theta));
    record_check(&mut s, check_weighted(&path, n, alpha));
    record_check(&mut s, check_jensen(&path, theta, alpha));
    record_check(&mut s, Ok(pw_averaging_check(&path)));
    s
}

/// Parameters drawn from `alpha, beta in {0.5, 1, 2}`, `m, M in [0.1, 10]`, `n in 2..=6`.
pub fn random_params<R: Rng + ?Sized>(rng: &mut R) -> ProblemParams {
    let pick = [0.5, 1.0, 2.0];
    ProblemParams::new(
        pick[rng.random_range(0..3)],
        pick[rng.random_range(0..3)],
        rng.random_range(0.1..=10.0),
        rng.random_range(0.1..=10.0),
        rng.random_range(2..=6),
    )
}

fn circle_residual_oracle(radius: f64, params: &ProblemParams) -> f64 {
    force_balance_residual(radius, params).abs() / radius.max(1.0)
}

fn ode_case(rng: &mut ChaCha8Rng) -> CampaignSummary {
    let params = random_params(rng);
    let mut s = CampaignSummary::empty();
    let radius = match analytic::solve_lambda(&params, analytic::DEFAULT_TOL) {
        Ok(r) => r.radius,
        Err(e) => {
            log::warn!("solve_lambda failed for {params:?}: {e}");
            s.record(false, f64::NEG_INFINITY);
            return s;
        }
    };
    for (factor, tol) in [(1.0, QUADRATURE_TOL), (1.5, PARSEVAL_TOL)] {
        let r = factor * radius;
        let path = FourierPath::circle(4, r, 0.0).expect("positive radius");
        match ode_residual(&path, &params) {
            Ok(res) if factor == 1.0 => s.record(res <= tol, tol - res),
            Ok(res) => {
                let gap = (res - circle_residual_oracle(r, &params)).abs();
                s.record(gap <= tol, tol - gap);
            }
            Err(e) => {
                log::warn!("ode residual failed: {e}");
                s.record(false, f64::NEG_INFINITY);
            }
        }
    }
    s
}

fn chain_case(rng: &mut ChaCha8Rng) -> CampaignSummary {
    let params = random_params(rng);
    let mut s = CampaignSummary::empty();
    let outcome = (|| -> Result<(f64, f64, f64)> {
        let report = analytic::solve_lambda(&params, analytic::DEFAULT_TOL)?;
        let bound = analytic::lower_bound_at(&params, &report)?;
        let order = rng.random_range(1..=8);
        let eval = ReducedAction::new(&params, QuadratureSpec::default(), order)?;
        let path = random_admissible(rng, &params, order, report.radius)?;
        let action = eval.evaluate(&path)?.total;
        let circle = eval
            .evaluate(&FourierPath::circle(order, report.radius, 0.0)?)?
            .total;
        Ok((bound, action, circle))
    })();
    match outcome {
        Ok((bound, action, circle)) => {
            let tol = QUADRATURE_TOL * bound.abs().max(1.0);
            s.record(action - bound >= -tol, action - bound);
            let gap = (circle - bound).abs();
            s.record(gap <= tol, tol - gap);
        }
        Err(e) => {
            log::warn!("chain case failed for {params:?}: {e}");
            s.record(false, f64::NEG_INFINITY);
        }
    }
    s
}

/// A random zero-mean loop of size comparable to `radius`, kept away from
/// the centers and from self-collisions.
fn random_admissible<R: Rng + ?Sized>(
    rng: &mut R,
    params: &ProblemParams,
    order: usize,
    radius: f64,
) -> Result<FourierPath> {
    let floor = 0.05 * radius.min(1.0);
    for _ in 0..200 {
        let path = FourierPath::random(rng, order, order, radius);
        if path_min_separation(&path, params, DEFAULT_NODES).distance > floor {
            return Ok(path);
        }
    }
    Err(Error::Degenerate(
        "no collision-free random loop found".into(),
    ))
}
