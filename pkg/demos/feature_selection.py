"""Pick the columns of a data matrix that generate the others.

Eight exact generator columns; the other 32 are noisy combinations of them.
"""

import numpy as np

from owlmmv import select_columns

rng = np.random.default_rng(0)
samples, cols, gens, noise = 60, 40, 8, 1e-3
G = rng.standard_normal((samples, gens))
data = G @ rng.uniform(-0.5, 0.5, (gens, cols)) + noise * rng.standard_normal((samples, cols))
gen_idx = rng.choice(cols, gens, replace=False)
data[:, gen_idx] = G

tol = noise * np.sqrt(data.size) / np.linalg.norm(data)
sel = select_columns(data, tol)
print("generators:", sorted(gen_idx.tolist()))
print("selected:  ", sorted(sel.ranking.indices))
for rank, idx, score, rmse in sel.rows():
    print(f"{rank:>2}  column {idx:>2}  score {score:8.3f}  refit rmse {rmse:.2e}")
