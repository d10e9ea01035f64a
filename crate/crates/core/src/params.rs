//! Physical constants of the two-center problem and their admissibility rules.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Point in 3-space.
pub type Point = Vector3<f64>;

fn default_c1() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

fn default_c2() -> [f64; 3] {
    [-1.0, 0.0, 0.0]
}

/// Exponents, masses, body count and fixed-center positions.
///
/// The mutual potential between moving bodies is `m^2 / r^alpha`, the potential
/// between a body and each center is `m M / r^beta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemParams {
    pub alpha: f64,
    pub beta: f64,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
    pub n: usize,
    #[serde(default = "default_c1")]
    pub c1: [f64; 3],
    #[serde(default = "default_c2")]
    pub c2: [f64; 3],
}

impl Default for ProblemParams {
    fn default() -> Self {
        Self::new(1.0, 1.0, 1.0, 1.0, 3)
    }
}

impl ProblemParams {
    /// Parameters with the centers at `(1,0,0)` and `(-1,0,0)`. Not validated.
    pub fn new(alpha: f64, beta: f64, m: f64, big_m: f64, n: usize) -> Self {
        Self {
            alpha,
            beta,
            m,
            big_m,
            n,
            c1: default_c1(),
            c2: default_c2(),
        }
    }

    pub fn with_centers(mut self, c1: [f64; 3], c2: [f64; 3]) -> Self {
        self.c1 = c1;
        self.c2 = c2;
        self
    }

    pub fn center1(&self) -> Point {
        Point::from(self.c1)
    }

    pub fn center2(&self) -> Point {
        Point::from(self.c2)
    }

    pub fn centers(&self) -> [Point; 2] {
        [self.center1(), self.center2()]
    }

    /// Returns the parameters unchanged if every invariant holds.
    pub fn validate(self) -> Result<Self> {
        let finite = [self.alpha, self.beta, self.m, self.big_m]
            .iter()
            .chain(self.c1.iter())
            .chain(self.c2.iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::domain("parameters must be finite"));
        }
        if self.alpha <= 0.0 {
            return Err(Error::domain("alpha must be positive"));
        }
        if self.beta <= 0.0 {
            return Err(Error::domain("beta must be positive"));
        }
        if self.m < 0.0 {
            return Err(Error::domain("m must be nonnegative"));
        }
        if self.big_m < 0.0 {
            return Err(Error::domain("M must be nonnegative"));
        }
        if self.n < 2 {
            return Err(Error::domain("n must be at least 2"));
        }
        let c1 = self.center1();
        let c2 = self.center2();
        let scale = c1.norm().max(c2.norm()).max(1.0);
        if (c1 + c2).norm() > 1e-12 * scale {
            return Err(Error::domain("centers must be antipodal"));
        }
        Ok(self)
    }

    /// Whether the centers sit at the unit normalization `|c1| = 1` that the
    /// closed-form radius formulas assume.
    pub fn has_unit_centers(&self) -> bool {
        (self.center1().norm() - 1.0).abs() <= 1e-12
    }

    /// Index parameter `sum_{j=1}^{n-1} sin^{-alpha}(j pi / n)` shared by the
    /// mutual-potential formulas.
    pub fn mutual_sine_sum(&self) -> f64 {
        sine_power_sum(self.n, self.alpha)
    }
}

/// `sum_{j=1}^{n-1} sin^{-alpha}(j pi / n)`.
pub fn sine_power_sum(n: usize, alpha: f64) -> f64 {
    (1..n)
        .map(|j| {
            (j as f64 * std::f64::consts::PI / n as f64)
                .sin()
                .powf(-alpha)
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_default_scenario() {
        let p = ProblemParams::new(1.0, 1.0, 1.0, 1.0, 3);
        assert_eq!(p.validate().unwrap(), p);
    }

    #[test]
    fn rejects_zero_alpha() {
        let err = ProblemParams::new(0.0, 1.0, 1.0, 1.0, 3)
            .validate()
            .unwrap_err();
        assert_eq!(err, Error::Domain("alpha must be positive".into()));
    }

    #[test]
    fn rejects_asymmetric_centers() {
        let err = ProblemParams::default()
            .with_centers([1.0, 0.0, 0.0], [-2.0, 0.0, 0.0])
            .validate()
            .unwrap_err();
        assert_eq!(err, Error::Domain("centers must be antipodal".into()));
    }

    #[test]
    fn rejects_small_n_and_negative_masses() {
        assert!(ProblemParams::new(1.0, 1.0, 1.0, 1.0, 1)
            .validate()
            .is_err());
        assert!(ProblemParams::new(1.0, -1.0, 1.0, 1.0, 3)
            .validate()
            .is_err());
        assert!(ProblemParams::new(1.0, 1.0, -1.0, 1.0, 3)
            .validate()
            .is_err());
        assert!(ProblemParams::new(1.0, 1.0, 1.0, -1.0, 3)
            .validate()
            .is_err());
        assert!(ProblemParams::new(f64::NAN, 1.0, 1.0, 1.0, 3)
            .validate()
            .is_err());
    }

    #[test]
    fn admits_massless_limits() {
        assert!(ProblemParams::new(1.0, 1.0, 0.0, 1.0, 2).validate().is_ok());
        assert!(ProblemParams::new(1.0, 1.0, 1.0, 0.0, 2).validate().is_ok());
    }

    #[test]
    fn json_centers_default() {
        let p: ProblemParams =
            serde_json::from_str(r#"{"alpha":1,"beta":2,"m":0.5,"M":3,"n":4}"#).unwrap();
        assert_eq!(p, ProblemParams::new(1.0, 2.0, 0.5, 3.0, 4));
    }

    #[test]
    fn validate_is_idempotent() {
        let accepted = [
            ProblemParams::new(0.5, 2.0, 0.1, 10.0, 6),
            ProblemParams::new(2.0, 0.5, 0.0, 0.0, 2),
            ProblemParams::default().with_centers([0.0, 3.0, 0.0], [0.0, -3.0, 0.0]),
        ];
        for p in accepted {
            let once = p.validate().unwrap();
            assert_eq!(once.validate().unwrap(), once);
        }
    }
}
