import json
import os
import subprocess
import sys

import pytest

from flatline import _accel

PROBE = r"""
import json
from flatline import _accel
from flatline.connections import enumerate_connections
from flatline.slit_torus import build_slit_torus
from flatline.surface import Arc, SurfacePoint, birkhoff_average, cast_vertical_ray
S = build_slit_torus("3/10").surface
conns = enumerate_connections(S, 3.0)
arc = Arc(SurfacePoint(0, 0.0, 0.25), 1.0, (1.0, 0.0))
est = birkhoff_average(S, SurfacePoint(0, 0.2113, 0.731), arc, 500.0, direction=(0.6, 0.8))
ray = cast_vertical_ray(S, SurfacePoint(0, 0.5, 0.75), 3.0)
print(json.dumps({
    "backend": _accel.backend(),
    "holonomies": sorted([round(c.h, 12), round(c.v, 12)] for c in conns),
    "crossings": est.crossings,
    "ray": [ray.hit_at, len(ray.segments)],
}))
"""


def probe(disable):
    env = dict(os.environ, FLATLINE_DISABLE_JIT="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True,
                         check=True)
    return json.loads(out.stdout)


@pytest.mark.slow
def test_jit_and_python_agree():
    pure, jit = probe(True), probe(False)
    assert pure["backend"] == "python"
    assert jit["backend"] == ("numba" if _accel._numba is not None else "python")
    for key in ("holonomies", "crossings", "ray"):
        assert pure[key] == jit[key]


def test_njit_identity_when_disabled(monkeypatch):
    monkeypatch.setattr(_accel, "JIT_ENABLED", False)

    def f(x):
        return x + 1

    assert _accel.njit(f) is f
    assert _accel.njit(cache=False)(f) is f


def test_thread_cap(monkeypatch):
    monkeypatch.setenv("FLATLINE_THREADS", "3")
    assert _accel.thread_cap() == 3
    monkeypatch.setenv("FLATLINE_THREADS", "zero")
    assert _accel.thread_cap() >= 1
