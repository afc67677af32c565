"""Compare the numba kernels against the pure-Python fallback.

Each path runs in its own interpreter because the choice is made at import
time through VIADEL_JIT. Usage: python3 benchmarks/bench_kernels.py [--repeat N]
"""
import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
import numpy as np
from viadel._jit import JIT_ENABLED
from viadel.model import DEFAULT_PARAMS, Constant, State
from viadel.control import run_greedy
from viadel.dde import StepConfig, integrate_schedule
from viadel.curves import build_gamma_lh

repeat = int(sys.argv[1])
p = DEFAULT_PARAMS
ic = Constant(State(0.45, 0.001))
sched = np.random.default_rng(0).uniform(p.beta_star, p.beta, 300)
cases = {
    "greedy_phi0": lambda: run_greedy(ic, p).J,
    "open_loop_300d": lambda: float(integrate_schedule(ic, sched, 1.0, p, StepConfig(0.01, 300.0)).i[-1]),
    "gamma_lh_table": lambda: float(build_gamma_lh(p.beta, 0.0105, 1.0, p).s_hat),
}
out = {"jit": JIT_ENABLED}
for name, fn in cases.items():
    t0 = time.perf_counter(); value = fn(); first = time.perf_counter() - t0
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter(); fn(); times.append(time.perf_counter() - t0)
    out[name] = {"first_s": first, "best_s": min(times), "value": value}
print(json.dumps(out))
"""


def run(flag: str, repeat: int) -> dict:
    env = dict(os.environ, VIADEL_JIT=flag)
    proc = subprocess.run([sys.executable, "-c", WORKLOAD, str(repeat)], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    jit, py = run("1", args.repeat), run("0", args.repeat)
    print(f"{'case':<16} {'numba [s]':>10} {'python [s]':>11} {'speedup':>8}  same result")
    for name in ("greedy_phi0", "open_loop_300d", "gamma_lh_table"):
        a, b = jit[name], py[name]
        same = a["value"] == b["value"]
        print(f"{name:<16} {a['best_s']:>10.4f} {b['best_s']:>11.4f} "
              f"{b['best_s'] / a['best_s']:>8.1f}  {same}")
    if not jit["jit"]:
        print("note: numba unavailable, both columns used the fallback")


if __name__ == "__main__":
    main()
