"""Time the numba kernels against the pure-Python fallback.

Each backend runs in its own interpreter because FLATLINE_DISABLE_JIT is read
at import time. Usage: ``python3 benchmarks/bench_kernels.py [--repeat N]``.
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
from flatline import _accel
from flatline.connections import enumerate_connections
from flatline.slit_torus import build_slit_torus
from flatline.surface import Arc, SurfacePoint, birkhoff_average
repeat = int(sys.argv[1])
S = build_slit_torus("sqrt2-1").surface
arc = Arc(SurfacePoint(0, 0.0, 0.25), 1.0, (1.0, 0.0))
start = SurfacePoint(0, 0.2113, 0.731)

def birkhoff():
    return birkhoff_average(S, start, arc, 2e4, direction=(0.6, 0.8)).crossings

def wedges():
    return len(enumerate_connections(S, 6.0))

out = {"backend": _accel.backend()}
for name, fn in (("birkhoff_T2e4", birkhoff), ("enumerate_L6", wedges)):
    t0 = time.perf_counter()
    value = fn()
    first = time.perf_counter() - t0
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    out[name] = {"first": first, "best": best, "value": value}
print(json.dumps(out))
"""


def run(disable, repeat):
    env = dict(os.environ, FLATLINE_DISABLE_JIT="1" if disable else "0")
    res = subprocess.run([sys.executable, "-c", WORKLOAD, str(repeat)], env=env,
                         capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    jit, pure = run(False, args.repeat), run(True, args.repeat)
    print(f"{'workload':<16}{'python (s)':>12}{jit['backend'] + ' (s)':>14}"
          f"{'first call':>12}{'speedup':>10}  agree")
    for key in ("birkhoff_T2e4", "enumerate_L6"):
        p, j = pure[key], jit[key]
        print(f"{key:<16}{p['best']:>12.4f}{j['best']:>14.4f}{j['first']:>12.3f}"
              f"{p['best'] / j['best']:>10.1f}  {p['value'] == j['value']}")


if __name__ == "__main__":
    main()
