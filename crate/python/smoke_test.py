"""Smoke test for the lgasym_py extension module.

Install with `pip install --no-build-isolation -e crates/lgasym-py`, then run
`python python/smoke_test.py` or `pytest python/`.
"""

import json
import math
from fractions import Fraction

import lgasym_py as lg


def test_exact_numbers():
    assert Fraction(lg.psi([1])) == Fraction(1, 24)
    assert Fraction(lg.psi([7])) == Fraction(1, 82944)
    assert Fraction(lg.psi([0, 0, 0])) == 1
    assert Fraction(lg.theta([1])) == Fraction(3, 128)
    assert Fraction(lg.rspin(3, [1], [1])) == Fraction(1, 12)
    assert Fraction(lg.one_point("airy", 2)) == Fraction(-105, 2048)


def test_correlator_json():
    data = json.loads(lg.correlator_json("airy", 1, 2))
    assert isinstance(data, dict) and data


def test_coefficients():
    assert Fraction(lg.coefficient(1, [0, 2])) == Fraction(-5, 12)
    assert Fraction(lg.coefficient(2, [1, 5])) == Fraction(613, 288)
    assert Fraction(lg.coefficient(1, [0, 0, 1], "bessel")) == Fraction(-1, 4)


def test_estimate_and_experiment():
    ratio = lg.estimate_ratio("airy", [3 * 40 - 2], 3)
    assert abs(ratio - 1) < 1e-5
    header, rows = lg.experiment("g", "airy", 20, 60, k=1, pattern="d=3g-2")
    assert header[0] == "g" and len(rows) == 41
    g = [r[0] for r in rows]
    v = [r[header.index("value")] for r in rows]
    assert abs(lg.fit_rate(g, v, 1.0) + 2) < 0.5


def test_checks_and_errors():
    assert lg.wronskian("rairy", 8, r=3)
    assert all(passed for _, _, passed in lg.self_check(1, 20))
    try:
        lg.psi([5])
    except ValueError:
        pass
    else:
        raise AssertionError("degree mismatch must raise")
    assert math.isfinite(lg.estimate_ratio("bessel", [39], 2))


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"ok {name}")
