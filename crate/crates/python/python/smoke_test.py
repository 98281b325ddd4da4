"""Smoke test for the fockshift_py extension.

Build and install first, e.g. `maturin develop --release` from crates/python.
"""

import json
import math

import fockshift_py as fs


def close(a, b, tol=1e-10):
    return abs(a - b) <= tol


def main():
    thermal, tail = fs.make_state("thermal", 128, mean=2.0)
    assert tail < 1e-10
    assert close(thermal.mean, 2.0)

    # Discrete detection leaves the thermal mean unchanged; a count doubles it.
    assert close(fs.predict_discrete_mean(thermal), 2.0)
    assert close(fs.predict_continuous_mean(thermal), 4.0)
    assert close(fs.subtract(thermal).mean, 2.0)
    assert close(fs.one_count(thermal).mean, 4.0)

    p = fs.Distribution([0.5, 0.3, 0.2])
    assert fs.subtract(p).max_abs_diff(fs.discrete_posterior(p)) < 1e-12
    assert fs.one_count(p).max_abs_diff(fs.continuous_posterior(p)) < 1e-12
    assert close(fs.subtract(p)[0], 0.6) and close(fs.subtract(p)[1], 0.4)

    shifted = fs.add(fs.Distribution([0.7, 0.3, 0.0, 0.0]), 2)
    assert close(shifted[2], 0.7) and close(shifted[3], 0.3)
    mixed = fs.imperfect(p, [(0, 0.25), (1, 0.75)])
    assert close(sum(mixed.probabilities), 1.0)

    rho = fs.DensityMatrix.pure([1.0, 1.0j, 0.0])
    turned = fs.phase_shift(rho, math.pi / 2)
    assert close(turned.trace(), 1.0)
    assert close(fs.one_count_matrix(rho).populations()[0], 1.0)

    try:
        fs.subtract(fs.Distribution.fock(0, 4))
    except ValueError as e:
        assert "cannot subtract" in str(e)
    else:
        raise AssertionError("subtracting from vacuum should fail")

    scenario = """
model = "discrete"
dim = 3
seed = 1
trials = 20000

[initial_state]
family = "custom"
p = [0.5, 0.3, 0.2]

[[operations]]
op = "subtract"
n = 1
"""
    fs.validate_scenario(scenario)
    pipeline = json.loads(fs.run_pipeline(scenario))
    assert close(pipeline["steps"][-1]["distribution"][0], 0.6)
    a = fs.run_campaign(scenario, threads=1)
    b = fs.run_campaign(scenario, threads=4)
    assert a == b
    report = json.loads(a)
    assert report["max_abs_z"] < 5.0

    print(f"fockshift_py {fs.__version__}: smoke test passed")


if __name__ == "__main__":
    main()
