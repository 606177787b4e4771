"""Benchmark the compiled and vectorized stepping lanes against each other.

Runs the same ensemble through the numba per-trajectory kernel and the numpy
lockstep kernel, reports wall times and verifies that the pooled estimates
agree bit for bit.

Usage: python3 benchmarks/bench_kernels.py [n_traj] [t_total]
"""

import subprocess
import sys
import time

SCRIPT = r"""
import time
from harvest.model import SystemParams, NoiseParams, ExcitationParams
from harvest import mcs

p = SystemParams(delta1=3.0, delta3=3.0, kappa=0.3, alpha=0.05, beta=0.02,
                 mu=0.01, nu=0.01, tau1=1.3, tau2=0.5)
noise = NoiseParams(D=0.005, c=0.3)
ex = ExcitationParams(eps=0.0)
cfg = mcs.SimConfig(dt=0.01, t_total=%(t_total)f, t_transient=%(t_total)f * 0.2,
                    n_traj=%(n_traj)d, seed=1234)
t0 = time.perf_counter()
est = mcs.run_ensemble(p, noise, ex, cfg)
elapsed = time.perf_counter() - t0
print("%%s %%.3f %%.17e %%.17e %%d"
      %% (mcs.lane(), elapsed, est.mean_power, est.v_rms, est.n_samples))
"""


def run(no_numba: bool, n_traj: int, t_total: float) -> tuple[str, float, str]:
    env = {"HARVEST_NO_NUMBA": "1"} if no_numba else {}
    import os

    full_env = dict(os.environ, **env)
    out = subprocess.run(
        [sys.executable, "-c", SCRIPT % {"n_traj": n_traj, "t_total": t_total}],
        capture_output=True,
        text=True,
        env=full_env,
        check=True,
    ).stdout.split()
    lane, elapsed = out[0], float(out[1])
    return lane, elapsed, " ".join(out[2:])


def main() -> None:
    n_traj = int(sys.argv[1]) if len(sys.argv) > 1 else 20
    t_total = float(sys.argv[2]) if len(sys.argv) > 2 else 500.0
    print(f"ensemble: {n_traj} trajectories, t_total={t_total}, dt=0.01")
    lane_a, time_a, est_a = run(False, n_traj, t_total)
    lane_b, time_b, est_b = run(True, n_traj, t_total)
    print(f"{lane_a:>6}: {time_a:8.3f} s   estimates: {est_a}")
    print(f"{lane_b:>6}: {time_b:8.3f} s   estimates: {est_b}")
    if lane_a != "numba":
        print("note: numba unavailable; both runs used the numpy lane")
    print(f"speedup (numpy/numba): {time_b / time_a:.1f}x")
    print("estimates bit-identical:", est_a == est_b)


if __name__ == "__main__":
    main()
