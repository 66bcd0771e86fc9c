"""Smoke test for the scsynth Python extension.

Build and install first:
    pip install maturin
    maturin develop --release -m crates/python/Cargo.toml
"""

import json

import scsynth_py as sc


def main():
    p = sc.Problem.library("multiplier", 4)
    r = p.synthesize(mode="exact")
    assert r.status == "optimal", r
    assert r.sequences[0] == [0, 1, 2, 3]
    assert abs(r.avg_abs_error - 0.03) < 1e-12
    assert p.evaluate(r.sequences)[0] == r.avg_abs_error
    assert json.loads(r.to_json())["objective"] == "3"

    bip = sc.Problem.library("multiplier", 16, "bipolar")
    synth = [6, 13, 1, 10, 8, 3, 15, 4, 11, 0, 12, 7, 5, 14, 2, 9]
    avg, _ = bip.evaluate([list(range(16)), synth])
    assert abs(avg - 0.061) <= 0.0005, avg

    sat = sc.Problem.library("saturating_adder", 8)
    assert sat.synthesize().objective == 0.0

    lp = p.export_lp()
    assert lp.startswith("\\") and "Binaries" in lp and lp.rstrip().endswith("End")

    doc = sc.Problem.from_json(p.to_json())
    assert doc.inputs == ["X", "Y"] and doc.n == 4

    assert sc.baseline("vdc", 8) == [0, 4, 2, 6, 1, 5, 3, 7]
    assert sc.generate([2, 0, 3, 1], 2) == "0101"
    assert sc.scc(list(range(16)), synth) == 0.0

    try:
        sc.Problem.library("multiplier", 4, "ternary")
    except ValueError:
        pass
    else:
        raise AssertionError("bad encoding accepted")
    try:
        p.evaluate([[0, 1, 2, 3]])
    except ValueError:
        pass
    else:
        raise AssertionError("arity mismatch accepted")

    print("smoke test passed:", r)


if __name__ == "__main__":
    main()
