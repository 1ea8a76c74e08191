"""Compare the numba kernels with their pure-numpy counterparts.

Run with ``python benchmarks/bench_kernels.py [--n 2000000] [--repeat 5]``.
Also times one Monte Carlo block end to end under each backend by running a
subprocess with ``TWOTIER_NUMBA`` set accordingly.
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from twotier import _kernels


def _inputs(n: int, rng: np.random.Generator):
    n_seg = max(n // 50, 1)
    seg = np.sort(rng.integers(0, n_seg, n))
    counts = rng.poisson(5.0, n // 5)
    return {
        "hex_mask": (rng.uniform(-600, 600, n), rng.uniform(-600, 600, n), 500.0),
        "segment_sum": (rng.random(n), seg, n_seg),
        "segment_max": (rng.random(n), seg, n_seg),
        "group_lognormal_sum": (rng.normal(0, 5.66, int(counts.sum())), counts),
        "power_law_sum": (rng.random(n), rng.uniform(1, 1e6, n), seg, n_seg, 4.0),
        "lognormal_ccdf": (rng.lognormal(0, 1.3, n), 1.3),
    }


def _best(fn, args, repeat: int) -> float:
    fn(*args)  # warm-up (JIT compile on first call)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t)
    return min(times)


MC_SNIPPET = """
import time
from twotier.params import reference_params
from twotier.montecarlo import ScenarioConfig, simulate_outage
from twotier.contour import interior_observer
p = reference_params()
simulate_outage(ScenarioConfig(p, 24, 50, replications=200))
t = time.perf_counter()
simulate_outage(ScenarioConfig(p, 24, 50, replications={reps}))
simulate_outage(ScenarioConfig(p, 24, 50, interior_observer(p), replications={reps}))
print(time.perf_counter() - t)
"""


def _mc_time(flag: str, reps: int) -> float:
    env = dict(os.environ, TWOTIER_NUMBA=flag)
    out = subprocess.run([sys.executable, "-c", MC_SNIPPET.format(reps=reps)], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip().splitlines()[-1])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--mc-reps", type=int, default=4000)
    ap.add_argument("--skip-mc", action="store_true")
    args = ap.parse_args(argv)
    if not _kernels.NUMBA_AVAILABLE:
        print("numba not importable; nothing to compare")
        return 0
    rng = np.random.default_rng(0)
    inputs = _inputs(args.n, rng)
    print(f"{'kernel':<22}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}  max|diff|")
    for name, a in inputs.items():
        t_np = _best(_kernels.NUMPY_KERNELS[name], a, args.repeat)
        t_nb = _best(_kernels.NUMBA_KERNELS[name], a, args.repeat)
        diff = np.max(np.abs(np.asarray(_kernels.NUMPY_KERNELS[name](*a), float)
                             - np.asarray(_kernels.NUMBA_KERNELS[name](*a), float)))
        print(f"{name:<22}{1e3 * t_np:>12.2f}{1e3 * t_nb:>12.2f}{t_np / t_nb:>10.2f}  {diff:.2e}")
    if not args.skip_mc:
        t_np = _mc_time("0", args.mc_reps)
        t_nb = _mc_time("1", args.mc_reps)
        print(f"\nMonte Carlo, 2 x {args.mc_reps} replications (macro + femto observer):")
        print(f"  numpy {t_np:.2f} s   numba {t_nb:.2f} s   speedup {t_np / t_nb:.2f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
