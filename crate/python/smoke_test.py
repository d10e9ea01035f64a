"""Smoke test for the pychoreo2c extension module.

Build and install first, e.g.
    maturin build --release -m crates/python/Cargo.toml
    pip install target/wheels/pychoreo2c-*.whl
"""

import json
import math

import pychoreo2c as c


def main():
    params = c.ProblemParams(alpha=1.0, beta=1.0, m=1.0, big_m=1.0, n=3)
    report = c.predict(params)
    radius = report["radius"]
    assert abs(report["f_residual"]) <= 1e-12
    assert abs(c.force_balance_residual(radius, params)) <= 1e-8
    print(f"predict: lambda={report['lambda_tilde']:.12f} R*={radius:.12f}")

    circle = c.FourierPath.circle(16, radius)
    action = c.action_reduced(circle, params)
    closed = math.pi * radius**2 + 4 * math.pi / math.sqrt(radius**2 + 1) + math.pi / (2 * radius) * 2 / math.sin(math.pi / 3)
    assert abs(action["total"] - closed) <= 1e-9 * closed, (action, closed)
    grad = c.action_gradient(circle, params)
    assert max(abs(g) for g in grad.to_vec()[3:]) < 1e-8

    best, seed, finals = c.multistart(params, starts=4, seed=1, order=8, nodes=256)
    fit = c.circle_fit(best.path)
    assert best.converged and fit["uniform_circular"], fit
    assert abs(fit["radius"] - radius) < 1e-6
    assert abs(abs(fit["normal"][0]) - 1.0) < 1e-6
    assert c.ode_residual(best.path, params) < 1e-5
    assert min(finals) >= c.action_lower_bound(params) - 1e-8
    print(f"multistart: best seed {seed}, action {best.action:.12f}, {best.iters} iterations")

    unit = c.FourierPath([[0, 0, 0], [0, 1, 0]], [[0, 0, 1]])
    assert c.check_pw(unit, 1.0)["equality_case"]
    assert c.check_weighted(unit, 4, 1.0)["equality_case"]
    assert c.check_jensen(unit, 2.0, 1.0)["equality_case"]
    assert c.pw_averaging_check(unit)["equality_case"]
    assert c.constant_chord_implies_circle(unit, 2.0)["kind"] == "circle"
    summary = c.run_campaign("inequalities", paths=200, seed=7)
    assert summary["failed"] == 0 and summary["checked"] == 800
    print(f"verify: {summary}")

    rows = c.radius_sweep(params, [0.5, 1, 2, 4])
    radii = [r["radius"] for r in rows]
    assert all(a < b for a, b in zip(radii, radii[1:]))

    back = c.FourierPath.from_json(best.path.to_json())
    assert back.to_vec() == best.path.to_vec()
    assert json.loads(best.path.to_json())["order"] == 8

    try:
        c.ProblemParams(n=1)
    except c.DomainError:
        pass
    else:
        raise AssertionError("n = 1 accepted")
    try:
        c.check_pw(unit, 0.0)
    except c.ChoreoError:
        pass
    else:
        raise AssertionError("theta = 0 accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
