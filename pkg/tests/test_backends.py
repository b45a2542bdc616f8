"""The numba kernels and the numpy fallback must agree."""
from __future__ import annotations

import json
import os
import subprocess
import sys

import numpy as np
import pytest

from mcflab._accel import HAVE_NUMBA

PROBE = r"""
import json
import numpy as np
from mcflab._accel import backend
from mcflab.evolver import BoundarySpec, EvolutionState, RadialGrid, RadialOperator, SchemeConfig, evolve
from mcflab.profiles import integrate_phi
from mcflab.wings import integrate_height_over_axis

g = RadialGrid(3.0, 48)
u0 = 0.4 * np.cos(2 * g.r) + 0.1 * g.r ** 2
bc = BoundarySpec.constant(float(u0[-1]))
s = EvolutionState(g, u0)
out = {"backend": backend()}
out["rhs"] = RadialOperator(g, 3, 1.0).rhs(u0).tolist()
out["jac"] = [a.tolist() for a in RadialOperator(g, 3, 1.0).jacobian(u0)]
out["explicit"] = evolve(s, bc, 0.05, SchemeConfig(cfl=1 / 6), 3).states[-1].u.tolist()
out["implicit"] = evolve(s, bc, 0.05, SchemeConfig(mode="implicit", dt=0.01), 3).states[-1].u.tolist()
out["phi"] = integrate_phi(2, 1.0, 0.3, 10.0, 1e-10).grid_phi.tolist()
out["arc"] = integrate_height_over_axis(2, 1.0).h.tolist()
print(json.dumps(out))
"""


def probe(disable: bool) -> dict:
    env = dict(os.environ)
    env.pop("MCFLAB_DISABLE_NUMBA", None)
    if disable:
        env["MCFLAB_DISABLE_NUMBA"] = "1"
    proc = subprocess.run([sys.executable, "-c", PROBE], capture_output=True, text=True, env=env, check=True)
    return json.loads(proc.stdout)


@pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")
def test_numba_and_numpy_agree():
    fast, plain = probe(False), probe(True)
    assert fast["backend"] == "numba" and plain["backend"] == "numpy"
    for key in ("rhs", "explicit", "implicit", "phi", "arc"):
        a, b = np.asarray(fast[key]), np.asarray(plain[key])
        assert a.shape == b.shape, key
        scale = max(1.0, np.max(np.abs(a)))
        assert np.max(np.abs(a - b)) <= 1e-12 * scale, key
    for a, b in zip(fast["jac"], plain["jac"]):
        np.testing.assert_allclose(a, b, rtol=1e-13, atol=1e-13)


def test_fallback_runs_alone():
    assert probe(True)["backend"] == "numpy"
