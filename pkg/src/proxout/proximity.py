"""Pairwise record similarity extracted from a trained forest.

Three kinds: ``original`` counts co-leaf trees over all trees, ``oob``
restricts to trees where both records are out-of-bag, ``gap`` weights
in-bag co-leaf multiplicities over a record's out-of-bag trees.  The
distance matrix is one minus proximity.

Accumulation runs tree-by-tree in ascending tree order on a dense square
matrix, so results are independent of threading and bit-stable.  A naive
per-pair oracle with the same arithmetic order backs every fast path.
"""

from __future__ import annotations

import csv
import struct
import tempfile
from dataclasses import dataclass

import numpy as np

from . import _kernels, forest as forest_mod
from .data import Dataset
from .forest import Forest, SchemaMismatch, oob_indicator

ORIGINAL = "original"
OOB = "oob"
GAP = "gap"

KINDS = (ORIGINAL, OOB, GAP)

PROX_MAGIC = b"PROX"
PROX_VERSION = 1

# Above this record count the dense matrices are backed by temporary
# on-disk memmaps instead of RAM.
DEFAULT_MAX_DENSE_N = 20000


class ProximityError(ValueError):
    pass


class TooLarge(ProximityError):
    pass


@dataclass
class ProximityMatrix:
    """Symmetric n x n similarity in [0, 1].

    ``undefined_pairs`` (oob kind) marks pairs that never shared an
    out-of-bag tree; ``undefined_rows`` (gap kind) marks records never
    out-of-bag.  ``asymmetric`` keeps the pre-symmetrization gap matrix.
    """

    values: np.ndarray
    kind: str
    undefined_pairs: np.ndarray | None = None
    undefined_rows: np.ndarray | None = None
    asymmetric: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass
class DistanceMatrix:
    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]


def _alloc(shape, dtype, max_dense_n):
    if shape[0] > max_dense_n:
        fh = tempfile.NamedTemporaryFile(prefix="proxout-", suffix=".mm")
        mm = np.memmap(fh, dtype=dtype, mode="w+", shape=shape)
        mm[:] = 0
        mm._proxout_file = fh  # keep the backing file alive
        return mm
    return np.zeros(shape, dtype=dtype)


def _leaf_matrix(f: Forest, d: Dataset) -> np.ndarray:
    if d.n < 1:
        raise ProximityError("empty dataset")
    return forest_mod.apply(f, d)


def proximity_matrix(f: Forest, d: Dataset,
                     max_dense_n: int = DEFAULT_MAX_DENSE_N) -> ProximityMatrix:
    """Fraction of trees in which each pair of rows lands in the same leaf.

    Cost is O(T * sum of squared leaf sizes) via per-(tree, leaf) grouping,
    not O(n^2 * T * depth).
    """
    leaves = _leaf_matrix(f, d)
    n, T = leaves.shape
    counts = _alloc((n, n), np.int32, max_dense_n)
    col = np.empty(n, dtype=np.int32)
    for t in range(T):
        col[:] = leaves[:, t]
        _kernels.prox_accumulate(col, counts)
    values = _alloc((n, n), np.float64, max_dense_n)
    values[:] = counts
    values /= np.float64(T)
    return ProximityMatrix(values=values, kind=ORIGINAL)


def _require_training_data(f: Forest, d: Dataset) -> None:
    if d.n != f.n_train:
        raise SchemaMismatch(
            "out-of-bag proximity kinds need the training dataset "
            f"(got {d.n} records, trained on {f.n_train})"
        )


def oob_proximity_matrix(f: Forest, d: Dataset,
                         max_dense_n: int = DEFAULT_MAX_DENSE_N) -> ProximityMatrix:
    """Co-leaf fraction over trees where both records are out-of-bag.

    Pairs that never share an out-of-bag tree get value 0 and are marked
    in ``undefined_pairs``.
    """
    _require_training_data(f, d)
    leaves = _leaf_matrix(f, d)
    n, T = leaves.shape
    oob = oob_indicator(f)
    num = _alloc((n, n), np.int32, max_dense_n)
    den = _alloc((n, n), np.int32, max_dense_n)
    col = np.empty(n, dtype=np.int32)
    for t in range(T):
        col[:] = leaves[:, t]
        _kernels.oob_prox_accumulate(col, oob[:, t].copy(), num, den)
    values = _alloc((n, n), np.float64, max_dense_n)
    undefined = den == 0
    values[:] = np.where(undefined, 0.0, num / np.where(undefined, 1, den))
    return ProximityMatrix(values=values, kind=OOB, undefined_pairs=undefined)


def gap_proximity_matrix(f: Forest, d: Dataset,
                         max_dense_n: int = DEFAULT_MAX_DENSE_N) -> ProximityMatrix:
    """In-bag-multiplicity weighted proximity over out-of-bag trees.

    For record i and each tree where i is out-of-bag, every in-bag record j
    sharing i's leaf contributes its bootstrap multiplicity divided by the
    leaf's total in-bag mass; the per-record average over those trees is
    then symmetrized as (P + P^T) / 2 with the asymmetric form retained.
    The diagonal is 0 by construction.  Records never out-of-bag are marked
    in ``undefined_rows`` and carry zero rows.
    """
    _require_training_data(f, d)
    leaves = _leaf_matrix(f, d)
    n, T = leaves.shape
    oob = oob_indicator(f)
    asym = _alloc((n, n), np.float64, max_dense_n)
    col = np.empty(n, dtype=np.int32)
    for t in range(T):
        col[:] = leaves[:, t]
        ibc = f.bootstrap_counts[t].astype(np.float64)
        _kernels.gap_accumulate(col, ibc, oob[:, t].copy(), asym)
    s_counts = oob.sum(axis=1).astype(np.float64)
    undefined_rows = s_counts == 0
    asym_avg = asym / np.where(undefined_rows, 1.0, s_counts)[:, None]
    asym_avg[undefined_rows] = 0.0
    values = _alloc((n, n), np.float64, max_dense_n)
    values[:] = (asym_avg + asym_avg.T) * 0.5
    return ProximityMatrix(values=values, kind=GAP,
                           undefined_rows=undefined_rows, asymmetric=asym_avg)


def distance_matrix(p: ProximityMatrix) -> DistanceMatrix:
    """Entrywise 1 - proximity."""
    return DistanceMatrix(values=1.0 - p.values)


def proximity_oracle(f: Forest, d: Dataset, kind: str = ORIGINAL) -> ProximityMatrix:
    """Reference computation: independent per-pair, per-tree evaluation.

    Quadratic in n by design; refuses n > 2000 (TooLarge).  Matches the
    fast paths bit-for-bit.
    """
    if d.n > 2000:
        raise TooLarge("oracle limited to n <= 2000")
    if kind not in KINDS:
        raise ProximityError(f"unknown proximity kind {kind!r}")
    leaves = _leaf_matrix(f, d)
    n, T = leaves.shape

    if kind == ORIGINAL:
        values = np.empty((n, n), dtype=np.float64)
        for i in range(n):
            for j in range(n):
                values[i, j] = int(np.sum(leaves[i] == leaves[j])) / T
        return ProximityMatrix(values=values, kind=ORIGINAL)

    _require_training_data(f, d)
    oob = oob_indicator(f)

    if kind == OOB:
        values = np.empty((n, n), dtype=np.float64)
        undefined = np.zeros((n, n), dtype=bool)
        for i in range(n):
            for j in range(n):
                shared = oob[i] & oob[j]
                den = int(np.sum(shared))
                if den == 0:
                    values[i, j] = 0.0
                    undefined[i, j] = True
                else:
                    values[i, j] = int(np.sum(shared & (leaves[i] == leaves[j]))) / den
        return ProximityMatrix(values=values, kind=OOB, undefined_pairs=undefined)

    # gap: accumulate per tree in ascending order, like the fast path, but
    # with a direct per-record formula evaluation.
    asym = np.zeros((n, n), dtype=np.float64)
    for t in range(T):
        ibc = f.bootstrap_counts[t].astype(np.float64)
        for i in range(n):
            if not oob[i, t]:
                continue
            members = np.nonzero(leaves[:, t] == leaves[i, t])[0]
            mass = 0.0
            for j in members:
                mass += ibc[j]
            if mass <= 0.0:
                continue
            for j in members:
                if ibc[j] > 0.0:
                    asym[i, j] += ibc[j] / mass
    s_counts = oob.sum(axis=1).astype(np.float64)
    undefined_rows = s_counts == 0
    asym_avg = asym / np.where(undefined_rows, 1.0, s_counts)[:, None]
    asym_avg[undefined_rows] = 0.0
    values = (asym_avg + asym_avg.T) * 0.5
    return ProximityMatrix(values=values, kind=GAP,
                           undefined_rows=undefined_rows, asymmetric=asym_avg)


_KIND_CODE = {ORIGINAL: 0, OOB: 1, GAP: 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}


def save_proximity(path, p: ProximityMatrix) -> None:
    """Binary triangular export: PROX magic, version, n, kind, upper rows."""
    n = p.n
    with open(path, "wb") as fh:
        fh.write(PROX_MAGIC)
        fh.write(struct.pack("<IQB", PROX_VERSION, n, _KIND_CODE[p.kind]))
        for i in range(n):
            fh.write(np.ascontiguousarray(p.values[i, i:], dtype="<f8").tobytes())


def load_proximity(path) -> ProximityMatrix:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != PROX_MAGIC:
            raise ProximityError("not a proximity file")
        version, n, kind_code = struct.unpack("<IQB", fh.read(13))
        if version != PROX_VERSION:
            raise ProximityError(f"unsupported proximity file version {version}")
        values = np.empty((n, n), dtype=np.float64)
        for i in range(n):
            row = np.frombuffer(fh.read(8 * (n - i)), dtype="<f8")
            values[i, i:] = row
            values[i:, i] = row
    return ProximityMatrix(values=values, kind=_CODE_KIND[kind_code])


def write_proximity_csv(path, p: ProximityMatrix, cutoff: float = 0.0) -> None:
    """CSV export of strictly-upper entries (i, j, value) above ``cutoff``."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "value"])
        n = p.n
        for i in range(n):
            row = p.values[i]
            for j in range(i + 1, n):
                if row[j] > cutoff:
                    writer.writerow([i, j, repr(float(row[j]))])
