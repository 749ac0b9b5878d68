"""Smoke test for the extension module. Build it first with
`pip install --no-build-isolation ./crates/py`."""

import math

import aoa_hopper_py as ah


def main():
    params = ah.SlipParams()
    assert abs(params.r_g() - (0.2 - 3.3 * 9.81 / 4000)) < 1e-12

    fps = {}
    for pipeline in ("closed-form", "analytic-numeric", "simulator-numeric"):
        fp = ah.fixed_point(-0.79, 0.64, pipeline=pipeline)
        assert fp.provenance == pipeline
        assert fp.apex.x_dot > 0 and fp.apex.y > params.r0 * 0.5
        fps[pipeline] = fp
        print(fp)

    sim = fps["simulator-numeric"]
    inputs = ah.ControlInputs(-0.79, 0.64)
    nxt = ah.return_map_numeric(sim.apex, inputs)
    assert abs(nxt.x_dot - sim.apex.x_dot) < 1e-6 and abs(nxt.y - sim.apex.y) < 1e-6

    ev = params.m * params.g * 0.25
    exact = ah.angle_of_attack(1.5, ev, 0.6)
    assert abs(ah.angle_of_attack(-1.5, ev, 0.6) + exact) < 1e-12
    assert math.isfinite(ah.angle_of_attack(1.5, ev, 0.6, method="approx"))

    run = ah.run_single(sim.apex, inputs, 3)
    assert len(run["hops"]) == 3 and run["failure"] is None

    report = ah.run_sweep(overrides=["p_bar_count=2", "k_theta_count=2", 'pipelines="closed-form,analytic-numeric"'])
    assert len(report["points"]) == 8

    assert all(passed for _, passed, _ in ah.validate())

    try:
        ah.ApexState(1.0, -0.1)
    except ah.HopperError as e:
        print("rejected:", e)
    else:
        raise AssertionError("negative apex height accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
