"""Two-dimensional embeddings of distance matrices.

``classical`` double-centers the squared distances and takes the top two
spectral coordinates; ``smacof`` iterates stress majorization from a
seeded random start.  Stress is the normalized stress-1
sqrt(sum (d - delta)^2 / sum delta^2) over all pairs, where delta are the
input distances and d the embedded Euclidean distances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CLASSICAL = "classical"
SMACOF = "smacof"


class MdsError(ValueError):
    pass


class NotSymmetric(MdsError):
    pass


class NonzeroDiagonal(MdsError):
    pass


@dataclass
class Embedding:
    coordinates: np.ndarray
    stress: float
    method: str
    seed: int
    stress_trace: list[float] = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.coordinates.shape[0]


def _pairwise_distances(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    return np.sqrt(np.sum(diff * diff, axis=2))


def _stress1(dist: np.ndarray, emb: np.ndarray) -> float:
    denom = float(np.sum(dist * dist))
    if denom == 0.0:
        return 0.0
    return float(np.sqrt(np.sum((emb - dist) ** 2) / denom))


def _validate(dm: np.ndarray) -> np.ndarray:
    dm = np.asarray(dm, dtype=np.float64)
    if dm.ndim != 2 or dm.shape[0] != dm.shape[1]:
        raise MdsError("distance matrix must be square")
    if not np.allclose(dm, dm.T, atol=1e-12, rtol=0.0):
        raise NotSymmetric("distance matrix is not symmetric")
    if np.any(np.abs(np.diagonal(dm)) > 1e-12):
        raise NonzeroDiagonal("distance matrix diagonal must be zero")
    return dm


def _classical(dm: np.ndarray) -> np.ndarray:
    n = dm.shape[0]
    sq = dm**2
    j = np.eye(n) - np.ones((n, n)) / n
    b = -0.5 * j @ sq @ j
    evals, evecs = np.linalg.eigh(b)
    order = np.argsort(evals)[::-1]
    coords = np.zeros((n, 2))
    for axis in range(2):
        if axis < len(order) and evals[order[axis]] > 0:
            coords[:, axis] = evecs[:, order[axis]] * np.sqrt(evals[order[axis]])
    return coords


def _smacof(dm: np.ndarray, seed: int, max_iter: int, tol: float):
    n = dm.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    scale = dm.max() if dm.max() > 0 else 1.0
    coords = rng.standard_normal((n, 2)) * scale / np.sqrt(n)
    emb = _pairwise_distances(coords)
    stress = _stress1(dm, emb)
    trace = [stress]
    for _ in range(max_iter):
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(emb > 0.0, dm / emb, 0.0)
        b = -ratio
        np.fill_diagonal(b, 0.0)
        np.fill_diagonal(b, -b.sum(axis=1))
        coords = (b @ coords) / n
        emb = _pairwise_distances(coords)
        new_stress = _stress1(dm, emb)
        # Guttman transforms cannot increase stress beyond rounding noise.
        if new_stress > stress + 1e-9 * max(1.0, stress):
            raise MdsError("stress increased during majorization")
        trace.append(new_stress)
        done = abs(stress - new_stress) < tol
        stress = new_stress
        if done:
            break
    return coords, stress, trace


def mds_embed(dm, method: str = SMACOF, seed: int = 0,
              max_iter: int = 300, tol: float = 1e-6) -> Embedding:
    """Embed a symmetric zero-diagonal distance matrix into the plane.

    Accepts a DistanceMatrix-like object (``values`` attribute) or a bare
    array.  Raises NotSymmetric / NonzeroDiagonal on malformed input.
    """
    if method not in (CLASSICAL, SMACOF):
        raise MdsError(f"unknown MDS method {method!r}")
    values = getattr(dm, "values", dm)
    values = _validate(values)
    n = values.shape[0]
    if np.all(values == 0.0):
        return Embedding(coordinates=np.zeros((n, 2)), stress=0.0,
                         method=method, seed=seed, stress_trace=[0.0])
    if method == CLASSICAL:
        coords = _classical(values)
        stress = _stress1(values, _pairwise_distances(coords))
        trace = [stress]
    else:
        coords, stress, trace = _smacof(values, seed, max_iter, tol)
    coords = coords - coords.mean(axis=0, keepdims=True)
    return Embedding(coordinates=coords, stress=stress, method=method,
                     seed=seed, stress_trace=trace)
