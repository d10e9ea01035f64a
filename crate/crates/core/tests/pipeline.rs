use choreo2c::action::QuadratureSpec;
use choreo2c::analytic;
use choreo2c::minimize::{minimize, MinimizeOptions, MinimizeReport};
use choreo2c::verify;
use choreo2c::{action_gradient, ChoreographySystem, FourierPath, Point, ProblemParams};

fn params() -> ProblemParams {
    ProblemParams::new(1.0, 1.0, 1.0, 1.0, 3)
}

#[test]
fn analytic_circle_is_critical() {
    for n in 2..=5 {
        let p = ProblemParams { n, ..params() };
        let r = analytic::predict(&p, 1e-12).unwrap().radius;
        let circle = FourierPath::circle(16, r, 0.4).unwrap();
        let g = action_gradient(&circle, &p, &QuadratureSpec::default()).unwrap();
        // The mean is fixed by the constraint, so only harmonics count.
        let harmonics = g.project_zero_mean().coeff_norm();
        assert!(harmonics < 1e-8, "n = {n}: {harmonics:e}");
    }
}

#[test]
fn antiperiodic_descent_finds_the_circle() {
    let p = params();
    let r = analytic::predict(&p, 1e-12).unwrap().radius;
    let mut start = FourierPath::circle(8, 1.3 * r, 0.0).unwrap();
    start.set_cos(3, Point::new(0.05, 0.02, 0.0));
    start.set_cos(2, Point::new(0.1, 0.0, 0.0));
    let opts = MinimizeOptions {
        order: 8,
        use_antiperiodic: true,
        ..Default::default()
    };
    let rep = minimize(&start, &p, &opts).unwrap();
    assert!(rep.converged);
    assert!(rep.path.is_antiperiodic());
    let fit = verify::circle_fit(&rep.path).unwrap();
    assert!(fit.uniform_circular, "{fit:?}");
    assert!((fit.radius - r).abs() < 1e-6);
}

#[test]
fn report_round_trips_through_json() {
    let p = params();
    let start = FourierPath::circle(4, 1.0, 0.0).unwrap();
    let opts = MinimizeOptions {
        order: 4,
        ..Default::default()
    };
    let rep = minimize(&start, &p, &opts).unwrap();
    let text = serde_json::to_string(&rep).unwrap();
    let back: MinimizeReport = serde_json::from_str(&text).unwrap();
    assert_eq!(back, rep);
}

#[test]
fn choreography_csv_has_every_body() {
    let sys = ChoreographySystem::new(FourierPath::circle(2, 1.0, 0.0).unwrap(), 3).unwrap();
    let csv = sys.to_csv(10);
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("body_index,t,x,y,z"));
    assert_eq!(lines.count(), 30);
}
