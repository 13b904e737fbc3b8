"""Smoke test for the compiled extension.

Build with `cargo build --release -p haarlab-py --features extension-module`
and copy target/release/libhaarlab_py.so to python/haarlab_py.so (or use maturin).
"""
import cmath
import json
import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import haarlab_py as hl


def main():
    g = hl.Grid.interval(3, 4)
    assert (g.dim, g.branching, g.levels, len(g)) == (1, 3, 4, 81)
    assert hl.Grid.from_json(g.to_json()).to_json() == g.to_json()

    values = [complex(math.sin(i), i % 5) for i in range(len(g))]
    levels, avg = hl.analyze(g, values)
    back = hl.synthesize(g, levels, avg)
    assert max(abs(a - b) for a, b in zip(values, back)) < 1e-12
    energy = sum(abs(c) ** 2 for row in levels for c in row) + abs(avg) ** 2
    assert abs(energy - sum(abs(v) ** 2 for v in values) / len(values)) < 1e-9

    assert abs(hl.lorentz_norm([3.0, 4.0], 2.0) - 5.0) < 1e-12
    assert hl.besov_norm(g, [1.0 + 0j] * len(g), 2.0) < 1e-12
    assert hl.bmo_norm(g, [2j] * len(g)) == 0.0

    pts = [cmath.exp(1j * (0.3 + k * math.pi / 2)) for k in range(4)]
    m = hl.complex_median(pts)
    assert m["certified"], m
    assert all(x >= 1.0 - 1e-12 for x in m["masses"]), m

    assert "median_stress" in hl.experiment_names()
    report = json.loads(hl.run_experiment("rank_one_commutator", 7))
    assert report["pass"], report["verdicts"]
    print("smoke test ok")


if __name__ == "__main__":
    main()
