"""Smoke test for the funfolio_py extension module.

Build and install first, e.g. `maturin develop -m crates/python/Cargo.toml`
or `pip install --no-build-isolation crates/python`, then run this script.
"""

import json
import math

import funfolio_py as ff


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    w = ff.project([2.0, 0.0, 0.0], -1.0)
    assert all(close(x, y, 1e-12) for x, y in zip(w, [5 / 3, -1 / 3, -1 / 3])), w
    assert close(sum(ff.project([0.3, 9.0, -4.0], 0.0)), 1.0)

    mv = ff.ObjectiveSpec("mv:lambda=z0.9")
    assert close(mv.eval(0.0, 1.0), -1.2815515655446004, 1e-9)
    du, dv = ff.ObjectiveSpec.sharpe(0.0).grad(0.1, 1.0)
    assert du > 0 and dv < 0

    panel = ff.ReturnPanel.simulate("ar", 60, 6, 7)
    assert (panel.n, panel.p) == (60, 6)
    model = ff.MomentModel.fit(panel)
    assert len(model.beta) == 6
    assert ff.MomentModel.from_json(model.to_json()).beta == model.beta

    plug = ff.solve_constant(mv, panel.sample_mean(), panel.sample_second_moment(), -0.2)
    assert close(sum(plug), 1.0, 1e-10)

    policy, trace = ff.run_ascent(panel, mv, lower_bound=-0.2, scheme="block:L=3", b=12, k=5, seed=3)
    assert all(b > a for a, b in zip(trace["G"], trace["G"][1:])), trace["G"]
    weights = policy.evaluate(panel)
    assert close(sum(weights), 1.0, 1e-10) and min(weights) >= -0.2 - 1e-10
    again = ff.FunctionalPolicy.from_json(policy.to_json())
    assert again.evaluate(panel) == weights
    assert set(json.loads(policy.to_json())) >= {"base_rule", "variant", "a", "b", "t", "model"}

    _, p = ff.paired_t_test([1.0, 2.0, 3.0], [0.0, 0.0, 0.0])
    assert close(p, 0.5 - 2 * math.sqrt(3) / (2 * math.sqrt(14)), 1e-10), p

    try:
        ff.project([1.0, 2.0], 0.8)
    except ValueError:
        pass
    else:
        raise AssertionError("infeasible floor accepted")

    print(f"ok: {policy!r}, G {trace['G'][0]:.5f} -> {trace['G'][-1]:.5f}")


if __name__ == "__main__":
    main()
