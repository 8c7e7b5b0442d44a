"""Time propagation on random graphs from 10^4 to 10^6 edges.

Per-iteration cost should grow linearly with the edge count; the number of
iterations depends on the score spread, not the size.
"""
import numpy as np

from riskprop.propagation import PropagationConfig
from riskprop.synth import scalability_benchmark

sizes = [10_000, 30_000, 100_000, 300_000, 1_000_000]
rows = scalability_benchmark(sizes, PropagationConfig(threads=1), repeats=2)
print(f"{'edges':>9} {'iters':>5} {'build ms':>9} {'ms/iter':>8}")
for r in rows:
    print(f"{r.edges:>9} {r.iterations:>5} {r.build_ms:>9.1f} {r.per_iteration_ms:>8.3f}")

x = np.array([r.edges for r in rows], float)
y = np.array([r.per_iteration_ms for r in rows])
fit = np.polyfit(x, y, 1)
r2 = 1 - np.sum((y - np.polyval(fit, x)) ** 2) / np.sum((y - y.mean()) ** 2)
print(f"\nlinear fit: {fit[0] * 1e6:.1f} ms per million edges, R^2 = {r2:.4f}")
