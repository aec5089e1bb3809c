import numpy as np
import pytest


def rank_sparse(rng, N, K, s, r):
    """``s``-row-sparse ``N x K`` matrix of rank ``r`` with its support."""
    X = np.zeros((N, K))
    S = np.sort(rng.choice(N, s, replace=False))
    X[S] = rng.standard_normal((s, r)) @ rng.standard_normal((r, K))
    return X, S


def random_spd(rng, K, cond=10.0):
    Q, _ = np.linalg.qr(rng.standard_normal((K, K)))
    lam = np.exp(rng.uniform(0.0, np.log(cond), K))
    return (Q * lam) @ Q.T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
