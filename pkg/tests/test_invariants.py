import json

import numpy as np

from holobesov.geometry import ball
from holobesov.invariants import REGISTRY, Check, run_all


def test_registry_covers_every_module():
    modules = {m for _, m, _ in REGISTRY}
    assert modules == {"geometry", "polynomials", "quadrature", "local_approx", "kernels",
                       "continuation", "besov", "cli_harness"}
    assert len(REGISTRY) == 25
    assert len({n for n, _, _ in REGISTRY}) == 25


def test_quick_geometry_and_polynomial_checks_pass():
    checks = run_all(ball(2), "quick", 0, only=["geometry", "polynomials", "quadrature"])
    assert len(checks) == 9
    assert all(c.passed for c in checks), [c for c in checks if not c.passed]


def test_check_serializes_nonfinite_values():
    c = Check("x", "m", np.nan, np.inf, True)
    d = c.to_dict()
    assert d["value"] is None and d["threshold"] is None
    json.dumps(d)


def test_crashing_check_is_a_failure(monkeypatch):
    from holobesov import invariants

    def boom(dom, size, seed):
        raise RuntimeError("broken")

    monkeypatch.setattr(invariants, "REGISTRY", [("boom", "geometry", boom)])
    (c,) = run_all()
    assert not c.passed and "broken" in c.note
