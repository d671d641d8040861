import dataclasses

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("numeric", deadline=None, max_examples=40)
settings.load_profile("numeric")


def shuffle_labels(subjects, seed):
    """Permute labels within each subject (class counts preserved)."""
    out = []
    for i, ts in enumerate(subjects):
        r = np.random.default_rng(np.random.SeedSequence([seed, i]))
        labels = list(ts.labels)
        r.shuffle(labels)
        out.append(dataclasses.replace(ts, labels=tuple(labels)))
    return out


def make_spd(rng: np.random.Generator, dim: int, spread: float = 1.0) -> np.ndarray:
    """Well-conditioned random SPD matrix with log-uniform eigenvalues."""
    q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    lam = np.exp(rng.uniform(-spread, spread, size=dim))
    C = (q * lam) @ q.T
    return 0.5 * (C + C.T)


def random_orthogonal(rng: np.random.Generator, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)
