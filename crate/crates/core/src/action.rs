//! The Lagrangian action of the choreography, full and reduced, with the exact
//! gradient of the reduced action in Fourier coefficients.
//!
//! The kinetic part is evaluated by Parseval. Potential parts use the uniform
//! trapezoid rule, which is spectrally accurate for smooth periodic integrands.
//! The gradient is the exact derivative of the discretized functional, so finite
//! differences of [`ReducedAction::evaluate`] reproduce it to rounding.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, SeparationKind};
use crate::params::{Point, ProblemParams};
use crate::trajectory::{ChoreographySystem, FourierPath, SampleGrid};

pub const DEFAULT_NODES: usize = 512;
pub const DEFAULT_COLLISION_FLOOR: f64 = 1e-9;

/// Uniform trapezoid rule on `[0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub nodes: usize,
    /// Separations below this are treated as collisions.
    pub collision_floor: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            nodes: DEFAULT_NODES,
            collision_floor: DEFAULT_COLLISION_FLOOR,
        }
    }
}

impl QuadratureSpec {
    pub fn new(nodes: usize) -> Result<Self> {
        let spec = Self {
            nodes,
            ..Self::default()
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes < 4 {
            return Err(Error::domain("quadrature needs at least 4 nodes"));
        }
        if !(self.collision_floor >= 0.0) {
            return Err(Error::domain("collision floor must be nonnegative"));
        }
        Ok(())
    }

    fn check_resolution(&self, order: usize) {
        if self.nodes < 8 * order {
            log::warn!(
                "{} quadrature nodes under-resolve a path of order {order} (want >= {})",
                self.nodes,
                8 * order
            );
        }
    }
}

/// The three integrals composing the reduced action.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionBreakdown {
    pub kinetic: f64,
    pub center_potential: f64,
    pub mutual_potential: f64,
    pub total: f64,
}

/// Neumaier compensated sum.
#[derive(Debug, Default, Clone, Copy)]
struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Reduced action evaluator with trigonometric tables prepared for one
/// truncation order.
#[derive(Debug, Clone)]
pub struct ReducedAction {
    params: ProblemParams,
    quad: QuadratureSpec,
    grid: SampleGrid,
    centers: [Point; 2],
}

impl ReducedAction {
    pub fn new(params: &ProblemParams, quad: QuadratureSpec, order: usize) -> Result<Self> {
        let params = params.validate()?;
        quad.validate()?;
        quad.check_resolution(order);
        Ok(Self {
            centers: params.centers(),
            grid: SampleGrid::new(quad.nodes, order),
            params,
            quad,
        })
    }

    pub fn params(&self) -> &ProblemParams {
        &self.params
    }

    pub fn quadrature(&self) -> &QuadratureSpec {
        &self.quad
    }

    pub fn order(&self) -> usize {
        self.grid.order()
    }

    fn mutual_phases(&self) -> impl Iterator<Item = (usize, f64)> {
        let n = self.params.n;
        (1..n).map(move |j| (j, 2.0 * PI * j as f64 / n as f64))
    }

    fn collision(&self, kind: SeparationKind, separation: f64, i: usize) -> Error {
        Error::Collision {
            kind,
            separation,
            t: self.grid.time(i),
            floor: self.quad.collision_floor,
        }
    }

    pub fn evaluate(&self, path: &FourierPath) -> Result<ActionBreakdown> {
        self.run(path, false).map(|(b, _)| b)
    }

    pub fn gradient(&self, path: &FourierPath) -> Result<FourierPath> {
        self.run(path, true)
            .map(|(_, g)| g.expect("gradient requested"))
    }

    pub fn value_and_gradient(&self, path: &FourierPath) -> Result<(ActionBreakdown, FourierPath)> {
        self.run(path, true)
            .map(|(b, g)| (b, g.expect("gradient requested")))
    }

    fn run(
        &self,
        path: &FourierPath,
        want_grad: bool,
    ) -> Result<(ActionBreakdown, Option<FourierPath>)> {
        let order = path.order();
        if order > self.grid.order() {
            return Err(Error::domain(format!(
                "path order {order} exceeds evaluator order {}",
                self.grid.order()
            )));
        }
        let big_m = self.params.big_m;
        let m = self.params.m;
        let beta = self.params.beta;
        let alpha = self.params.alpha;
        let floor = self.quad.collision_floor;
        let h = self.grid.step();

        let xs = self.grid.sample(path);
        // d(integrand)/dx(t_i) from every occurrence of x(t_i) itself.
        let mut direct = vec![Point::zeros(); xs.len()];

        let mut center = CompensatedSum::default();
        if big_m > 0.0 {
            for (i, x) in xs.iter().enumerate() {
                for c in &self.centers {
                    let d = x - c;
                    let r = d.norm();
                    if r < floor {
                        return Err(self.collision(SeparationKind::Center, r, i));
                    }
                    let rb = r.powf(-beta);
                    center.add(big_m * rb);
                    if want_grad {
                        direct[i] -= d * (beta * big_m * rb / (r * r));
                    }
                }
            }
        }

        let mut mutual = CompensatedSum::default();
        let mut grad = if want_grad {
            Some(FourierPath::zeros(order))
        } else {
            None
        };
        if m > 0.0 {
            let mut shifted_weights = vec![Point::zeros(); xs.len()];
            for (_, theta) in self.mutual_phases() {
                let ys = self.grid.sample(&path.shift(theta));
                for (i, (x, y)) in xs.iter().zip(&ys).enumerate() {
                    let d = x - y;
                    let r = d.norm();
                    if r < floor {
                        return Err(self.collision(SeparationKind::Mutual, r, i));
                    }
                    let ra = r.powf(-alpha);
                    mutual.add(0.5 * m * ra);
                    if want_grad {
                        // d/dx of (m/2) |x - y|^-alpha, and its negative for y.
                        let g = d * (-0.5 * alpha * m * ra / (r * r));
                        direct[i] += g;
                        shifted_weights[i] = -g;
                    }
                }
                if let Some(grad) = grad.as_mut() {
                    // y(t_i) = x(t_i + theta): re-index the projection back by -theta.
                    let back = self.grid.project(&shifted_weights, order).shift(-theta);
                    *grad = grad.add_scaled(&back, h);
                }
            }
        }

        let kinetic = 0.5 * path.kinetic_integral();
        let center_potential = h * center.value();
        let mutual_potential = h * mutual.value();
        let breakdown = ActionBreakdown {
            kinetic,
            center_potential,
            mutual_potential,
            total: kinetic + center_potential + mutual_potential,
        };

        let grad = grad.map(|g| {
            let mut g = g.add_scaled(&self.grid.project(&direct, order), h);
            for k in 1..=order {
                let w = PI * (k * k) as f64;
                g.set_cos(k, g.cos_coeff(k) + path.cos_coeff(k) * w);
                g.set_sin(k, g.sin_coeff(k) + path.sin_coeff(k) * w);
            }
            g
        });
        Ok((breakdown, grad))
    }
}

/// Reduced action `int 1/2 |x'|^2 + M/|x - c1|^beta + M/|x - c2|^beta
/// + 1/2 sum_j m / |x(t) - x(t + 2 pi j / n)|^alpha dt`.
pub fn action_reduced(
    path: &FourierPath,
    params: &ProblemParams,
    quad: &QuadratureSpec,
) -> Result<ActionBreakdown> {
    ReducedAction::new(params, *quad, path.order())?.evaluate(path)
}

/// Gradient of [`action_reduced`] with respect to every coefficient `a_k`, `b_k`
/// (including the mean `a_0`).
pub fn action_gradient(
    path: &FourierPath,
    params: &ProblemParams,
    quad: &QuadratureSpec,
) -> Result<FourierPath> {
    ReducedAction::new(params, *quad, path.order())?.gradient(path)
}

/// Full action of all `n` bodies, summed body by body and pair by pair.
pub fn action_full(
    sys: &ChoreographySystem,
    params: &ProblemParams,
    quad: &QuadratureSpec,
) -> Result<f64> {
    let params = params.validate()?;
    quad.validate()?;
    if sys.n != params.n {
        return Err(Error::domain(format!(
            "system has {} bodies, parameters say {}",
            sys.n, params.n
        )));
    }
    let grid = SampleGrid::new(quad.nodes, sys.base.order());
    let bodies = sys.bodies();
    let positions: Vec<Vec<Point>> = bodies.iter().map(|b| grid.sample(b)).collect();
    let velocities: Vec<Vec<Point>> = bodies
        .iter()
        .map(|b| grid.sample(&b.derivative()))
        .collect();
    let centers = params.centers();
    let floor = quad.collision_floor;
    let (m, big_m) = (params.m, params.big_m);

    let mut total = CompensatedSum::default();
    for i in 0..quad.nodes {
        let t = grid.time(i);
        let mut lagrangian = 0.0;
        for vel in &velocities {
            lagrangian += 0.5 * m * vel[i].norm_squared();
        }
        for (a, qa) in positions.iter().enumerate() {
            if big_m > 0.0 {
                for c in &centers {
                    let r = (qa[i] - c).norm();
                    if r < floor {
                        return Err(Error::Collision {
                            kind: SeparationKind::Center,
                            separation: r,
                            t,
                            floor,
                        });
                    }
                    lagrangian += m * big_m * r.powf(-params.beta);
                }
            }
            if m > 0.0 {
                for qb in &positions[a + 1..] {
                    let r = (qa[i] - qb[i]).norm();
                    if r < floor {
                        return Err(Error::Collision {
                            kind: SeparationKind::Mutual,
                            separation: r,
                            t,
                            floor,
                        });
                    }
                    lagrangian += m * m * r.powf(-params.alpha);
                }
            }
        }
        total.add(lagrangian);
    }
    Ok(grid.step() * total.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::sine_power_sum;
    use approx::assert_relative_eq;
    use nalgebra::{Rotation3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// On the yoz circle every integrand is constant in t.
    fn circle_oracle(r: f64, p: &ProblemParams) -> (f64, f64, f64) {
        let kinetic = PI * r * r;
        let center = 4.0 * PI * p.big_m * (r * r + 1.0).powf(-p.beta / 2.0);
        let mutual = PI * p.m * (2.0 * r).powf(-p.alpha) * sine_power_sum(p.n, p.alpha);
        (kinetic, center, mutual)
    }

    /// Near-circular loop with small random higher harmonics.
    fn safe_path(rng: &mut ChaCha8Rng, order: usize) -> FourierPath {
        let r = rng.random_range(0.8..1.6);
        let base = FourierPath::circle(order, r, rng.random_range(0.0..6.0)).unwrap();
        let noise = FourierPath::random(rng, order, order.min(5), 0.08);
        base.add_scaled(&noise, 1.0).project_zero_mean()
    }

    #[test]
    fn circle_matches_closed_form() {
        let quad = QuadratureSpec::new(256).unwrap();
        for (r, p) in [
            (1.3, ProblemParams::new(1.0, 1.0, 1.0, 1.0, 3)),
            (0.7, ProblemParams::new(0.5, 2.0, 3.0, 0.2, 5)),
            (2.0, ProblemParams::new(2.0, 0.5, 0.1, 7.0, 2)),
        ] {
            let c = FourierPath::circle(16, r, 0.4).unwrap();
            let a = action_reduced(&c, &p, &quad).unwrap();
            let (k, cp, mp) = circle_oracle(r, &p);
            assert_relative_eq!(a.kinetic, k, max_relative = 1e-12);
            assert_relative_eq!(a.center_potential, cp, max_relative = 1e-10);
            assert_relative_eq!(a.mutual_potential, mp, max_relative = 1e-10);
            assert_relative_eq!(a.total, k + cp + mp, max_relative = 1e-10);
        }
    }

    #[test]
    fn free_unit_circle_is_pi() {
        let p = ProblemParams::new(1.0, 1.0, 0.0, 0.0, 3);
        let c = FourierPath::circle(4, 1.0, 0.0).unwrap();
        let a = action_reduced(&c, &p, &QuadratureSpec::new(64).unwrap()).unwrap();
        assert_relative_eq!(a.total, PI, max_relative = 1e-14);
    }

    #[test]
    fn touching_center_is_collision() {
        let p = ProblemParams::default();
        let mut hit = FourierPath::zeros(2);
        hit.set_cos(1, Point::new(1.0, 0.0, 0.0));
        hit.set_sin(1, Point::new(0.0, 1.0, 0.0));
        let err = action_reduced(&hit, &p, &QuadratureSpec::new(64).unwrap()).unwrap_err();
        assert!(matches!(
            err,
            Error::Collision {
                kind: SeparationKind::Center,
                ..
            }
        ));
        assert!(action_gradient(&hit, &p, &QuadratureSpec::new(64).unwrap()).is_err());
    }

    #[test]
    fn too_few_nodes_rejected() {
        assert!(QuadratureSpec::new(3).is_err());
    }

    #[test]
    fn full_action_reduces_by_mn() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let quad = QuadratureSpec::new(256).unwrap();
        for n in 2..=5 {
            let p = ProblemParams::new(1.5, 0.8, 0.7, 1.3, n);
            let path = safe_path(&mut rng, 6);
            let sys = ChoreographySystem::new(path.clone(), n).unwrap();
            let full = action_full(&sys, &p, &quad).unwrap();
            let reduced = action_reduced(&path, &p, &quad).unwrap().total;
            assert_relative_eq!(full / (p.m * n as f64), reduced, max_relative = 1e-10);
        }
    }

    #[test]
    fn two_body_circle_full_action() {
        let (r, p) = (1.1, ProblemParams::new(1.0, 2.0, 0.6, 0.9, 2));
        let c = FourierPath::circle(8, r, 0.0).unwrap();
        let sys = ChoreographySystem::new(c, 2).unwrap();
        let full = action_full(&sys, &p, &QuadratureSpec::new(128).unwrap()).unwrap();
        let expected = 2.0
            * p.m
            * (PI * r * r
                + 4.0 * PI * p.big_m * (r * r + 1.0).powf(-p.beta / 2.0)
                + PI * p.m * (2.0 * r).powf(-p.alpha));
        assert_relative_eq!(full, expected, max_relative = 1e-10);
    }

    #[test]
    fn free_two_body_matches_pairwise_sum() {
        let p = ProblemParams::new(1.0, 1.0, 1.0, 0.0, 2);
        let r = 2f64.powf(-2.0 / 3.0);
        let c = FourierPath::circle(8, r, 0.0).unwrap();
        let sys = ChoreographySystem::new(c.clone(), 2).unwrap();
        let full = action_full(&sys, &p, &QuadratureSpec::new(128).unwrap()).unwrap();
        // Independent oracle: pointwise evaluation with finite-difference velocity.
        let n = 2000;
        let dt = 2.0 * PI / n as f64;
        let mut oracle = 0.0;
        for i in 0..n {
            let t = i as f64 * dt;
            let q = [c.evaluate(t), c.evaluate(t + PI)];
            let eps = 1e-5;
            let ke: f64 = [0.0, PI]
                .iter()
                .map(|s| {
                    ((c.evaluate(t + s + eps) - c.evaluate(t + s - eps)) / (2.0 * eps))
                        .norm_squared()
                })
                .sum();
            oracle += (0.5 * p.m * ke + p.m * p.m / (q[0] - q[1]).norm()) * dt;
        }
        assert!(full.is_finite());
        assert_relative_eq!(full, oracle, max_relative = 1e-8);
    }

    fn finite_difference(eval: &ReducedAction, path: &FourierPath, step: f64) -> Vec<f64> {
        let base = path.to_vec();
        (0..base.len())
            .map(|i| {
                let mut plus = base.clone();
                let mut minus = base.clone();
                plus[i] += step;
                minus[i] -= step;
                let fp = eval
                    .evaluate(&FourierPath::from_vec(path.order(), &plus))
                    .unwrap()
                    .total;
                let fm = eval
                    .evaluate(&FourierPath::from_vec(path.order(), &minus))
                    .unwrap()
                    .total;
                (fp - fm) / (2.0 * step)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for p in [
            ProblemParams::new(1.0, 1.0, 1.0, 1.0, 3),
            ProblemParams::new(0.5, 2.0, 2.0, 0.3, 4),
            ProblemParams::new(2.0, 0.5, 0.4, 3.0, 2),
        ] {
            let eval = ReducedAction::new(&p, QuadratureSpec::new(96).unwrap(), 6).unwrap();
            for _ in 0..3 {
                let path = safe_path(&mut rng, 6);
                let g = eval.gradient(&path).unwrap().to_vec();
                let fd = finite_difference(&eval, &path, 1e-6);
                for (a, b) in g.iter().zip(&fd) {
                    assert!((a - b).abs() <= 1e-6 * a.abs().max(0.1), "{a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn mean_gradient_is_included() {
        // Off-center loop: the centers pull the mean.
        let p = ProblemParams::new(1.0, 1.0, 1.0, 1.0, 3);
        let eval = ReducedAction::new(&p, QuadratureSpec::new(128).unwrap(), 4).unwrap();
        let mut path = FourierPath::circle(4, 1.2, 0.0).unwrap();
        path.set_cos(0, Point::new(0.3, 0.0, 0.0));
        let g = eval.gradient(&path).unwrap().to_vec();
        let fd = finite_difference(&eval, &path, 1e-6);
        for i in 0..3 {
            assert!((g[i] - fd[i]).abs() < 1e-7);
        }
        assert!(g[0].abs() > 1e-3);
    }

    #[test]
    fn free_kinetic_gradient() {
        let p = ProblemParams::new(1.0, 1.0, 0.0, 0.0, 2);
        let mut path = FourierPath::zeros(3);
        let a1 = Point::new(0.3, -1.2, 0.5);
        path.set_cos(1, a1);
        let g = action_gradient(&path, &p, &QuadratureSpec::new(32).unwrap()).unwrap();
        // d/da_1 of (pi/2) |a_1|^2: along a_1 with magnitude pi |a_1|.
        assert!((g.cos_coeff(1) - a1 * PI).norm() < 1e-14);
        assert_relative_eq!(g.coeff_norm(), PI * a1.norm(), max_relative = 1e-14);
    }

    #[test]
    fn rotation_about_center_axis_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let p = ProblemParams::new(1.0, 1.5, 0.8, 1.2, 3);
        let quad = QuadratureSpec::new(256).unwrap();
        for _ in 0..5 {
            let path = safe_path(&mut rng, 5);
            let rot = Rotation3::from_axis_angle(&Vector3::x_axis(), rng.random_range(0.0..6.0));
            let a = action_reduced(&path, &p, &quad).unwrap().total;
            let b = action_reduced(&path.transform(rot.matrix()), &p, &quad)
                .unwrap()
                .total;
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn reflection_with_half_shift_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let p = ProblemParams::new(1.0, 1.0, 1.0, 1.0, 4);
        let quad = QuadratureSpec::new(256).unwrap();
        for _ in 0..5 {
            let path = safe_path(&mut rng, 5);
            let image = path.shift(PI).scale(-1.0);
            let a = action_reduced(&path, &p, &quad).unwrap().total;
            let b = action_reduced(&image, &p, &quad).unwrap().total;
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn time_shift_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        let p = ProblemParams::new(2.0, 1.0, 1.0, 0.5, 3);
        let quad = QuadratureSpec::new(256).unwrap();
        let path = safe_path(&mut rng, 4);
        let a = action_reduced(&path, &p, &quad).unwrap().total;
        for s in [0.1, 1.7, 3.0, 5.9] {
            let b = action_reduced(&path.shift(s), &p, &quad).unwrap().total;
            assert_relative_eq!(a, b, max_relative = 1e-12);
        }
    }

    #[test]
    fn quadrature_converges_on_doubling() {
        let mut rng = ChaCha8Rng::seed_from_u64(33);
        let p = ProblemParams::default();
        for _ in 0..4 {
            let path = safe_path(&mut rng, 4);
            let a = action_reduced(&path, &p, &QuadratureSpec::new(256).unwrap())
                .unwrap()
                .total;
            let b = action_reduced(&path, &p, &QuadratureSpec::new(512).unwrap())
                .unwrap()
                .total;
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn strictly_increasing_in_masses() {
        let mut rng = ChaCha8Rng::seed_from_u64(34);
        let quad = QuadratureSpec::new(128).unwrap();
        let path = safe_path(&mut rng, 4);
        let at = |m: f64, big_m: f64| {
            action_reduced(&path, &ProblemParams::new(1.0, 1.0, m, big_m, 3), &quad)
                .unwrap()
                .total
        };
        let mut prev = at(0.1, 1.0);
        for m in [0.2, 0.5, 1.0, 4.0] {
            let cur = at(m, 1.0);
            assert!(cur > prev);
            prev = cur;
        }
        let mut prev = at(1.0, 0.1);
        for big_m in [0.2, 0.5, 1.0, 4.0] {
            let cur = at(1.0, big_m);
            assert!(cur > prev);
            prev = cur;
        }
    }

    #[test]
    fn compensated_sum_beats_naive() {
        let mut s = CompensatedSum::default();
        s.add(1.0);
        for _ in 0..10 {
            s.add(1e-16);
        }
        s.add(-1.0);
        assert_relative_eq!(s.value(), 1e-15, max_relative = 1e-10);
    }
}
