"""Recover a 3 x 2 row-sparse signal from two measurements.

The group lasso (gamma = 1) alone cannot single out the rank-2 solution;
the continuation down to gamma = 0 does.
"""

import numpy as np

from owlmmv import owl21, select_features, solve_continuation

A = np.array([[1.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
X = np.array([[0.0, 0.0], [1.0, 1.0], [1.0, -1.0]])
Y = A @ X

rep = solve_continuation(A, Y, delta=1e-8)
print("termination:", rep.termination)
print("Z =\n", np.round(rep.Z_final, 6))
print("support:", select_features(rep.Z_final).indices)
print(f"owl21(Z) = {owl21(rep.Z_final):.6f}, owl21(X) = {owl21(X):.6f}")
print("gamma path:", [f"{g:g}" for g in dict.fromkeys(rep.gamma_trace)])
