"""Recovery rate against signal rank on a small noiseless problem.

Usage: python3 demos/rank_sweep.py [trials]
"""

import sys
import time

from owlmmv import SolverConfig, SynthSpec, run_sweep

trials = int(sys.argv[1]) if len(sys.argv) > 1 else 5
spec = SynthSpec(N=64, M=26, K=15, s=15, r=1, trials=trials, seed=0)
t0 = time.perf_counter()
res = run_sweep(spec, "rank", [1, 5, 10, 15], SolverConfig(alpha_update="secant"), coarse_rel=3e-2)
print(f"{'rank':>4}  {'rate':>5}  {'rmse':>9}  {'iters':>8}")
for row in res.rows:
    print(f"{row.sweep_value:>4}  {row.recovery_rate:>5.2f}  {row.mean_rmse:>9.2e}  {row.mean_iters:>8.0f}")
print(f"{time.perf_counter() - t0:.0f} s for {trials} trials per rank")
