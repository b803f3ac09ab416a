"""Seeded random-forest regressor.

Each tree draws a bootstrap sample, then grows depth-unlimited with ``mtry``
candidate features per node and exhaustive midpoint thresholds chosen to
minimise the children's summed squared error.  Tree ``i`` gets its own
generator derived from ``(seed, i)``, so a forest is a pure function of
(X, y, params) whatever the thread count.
"""

from __future__ import annotations

import gzip
import hashlib
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .features import FEATURE_NAMES, FeatureMatrix

MODEL_FORMAT = "ekma-forest/1"


@dataclass(frozen=True)
class ForestParams:
    num_trees: int = 500
    mtry: int | None = None  # None -> floor(sqrt(p))
    min_node_size: int = 5
    seed: int = 0
    bootstrap: bool = True  # off only for exact-fit checks

    def resolved_mtry(self, p: int) -> int:
        mtry = self.mtry if self.mtry is not None else max(1, math.isqrt(p))
        if not 1 <= mtry <= p:
            raise ValueError(f"mtry={mtry} outside [1, {p}]")
        return mtry

    def validate(self, p: int) -> None:
        if self.num_trees < 1:
            raise ValueError("num_trees must be >= 1")
        if self.min_node_size < 1:
            raise ValueError("min_node_size must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        self.resolved_mtry(p)


@dataclass(frozen=True)
class Split:
    feature: int
    threshold: float
    sse: float


@dataclass
class Tree:
    feature: np.ndarray  # int32, -1 at leaves
    value: np.ndarray    # threshold at internal nodes, prediction at leaves
    right: np.ndarray    # int32 index of the right child; left child is i + 1

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_leaves(self) -> int:
        return int((self.feature < 0).sum())

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        out = np.empty(X.shape[0])
        _kernels.predict_flat(X, self.feature, self.value, self.right,
                              np.zeros(1, dtype=np.int64), out)
        return out


@dataclass
class ForestModel:
    params: ForestParams
    trees: list[Tree]
    feature_names: tuple[str, ...] = FEATURE_NAMES
    training_fingerprint: str = ""
    _flat: tuple | None = field(default=None, repr=False, compare=False)

    def flat(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        if self._flat is None:
            sizes = np.array([t.n_nodes for t in self.trees], dtype=np.int64)
            roots = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
            self._flat = (
                np.concatenate([t.feature for t in self.trees]),
                np.concatenate([t.value for t in self.trees]),
                np.concatenate([t.right for t in self.trees]),
                roots,
            )
        return self._flat


def derive_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for a (seed, i, ...) counter tuple."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, stream)]))


def _as_array(X) -> np.ndarray:
    values = X.values if isinstance(X, FeatureMatrix) else X
    return np.ascontiguousarray(values, dtype=np.float64)


def _exact_sse(values: Sequence[float]) -> Fraction:
    fr = [Fraction(v) for v in values]
    mean = sum(fr) / len(fr)
    return sum((v - mean) ** 2 for v in fr)


def best_split(rows: Sequence[int], features: Sequence[int], X, y) -> Split | None:
    """Variance-reduction split of ``rows`` over the candidate ``features``.

    The reported ``sse`` is the correctly rounded child SSE of the chosen
    partition.
    """
    Xa = _as_array(X)
    ya = np.ascontiguousarray(y, dtype=np.float64)
    rows = np.asarray(rows, dtype=np.int64)
    if rows.size < 2:
        raise ValueError("best_split needs at least 2 rows")
    feats = np.unique(np.asarray(features, dtype=np.int64))
    if feats.size == 0:
        raise ValueError("best_split needs at least one candidate feature")
    f, thr, _ = _kernels.split_rows(Xa, ya, rows, feats, _kernels.TIE_EPS)
    if f < 0:
        return None
    left = Xa[rows, f] <= thr
    sse = _exact_sse(ya[rows[left]]) + _exact_sse(ya[rows[~left]])
    return Split(int(f), float(thr), float(sse))


def presort(Xa: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(np.argsort(Xa, axis=0, kind="stable").T)


def _grow(Xa, ya, params: ForestParams, rng: np.random.Generator, mtry: int,
          presorted: np.ndarray) -> Tree:
    n, p = Xa.shape
    if n < 1:
        raise ValueError("cannot grow a tree on an empty sample")
    if params.bootstrap:
        sample = rng.integers(0, n, size=n, dtype=np.int64)
    else:
        sample = np.arange(n, dtype=np.int64)
    keys = rng.random((max(n, 1), p))
    feature, value, right = _kernels.grow(Xa, ya, sample, keys, mtry,
                                          params.min_node_size, _kernels.TIE_EPS, presorted)
    return Tree(feature, value, right)


def grow_tree(X, y, params: ForestParams, tree_rng: np.random.Generator) -> Tree:
    Xa = _as_array(X)
    ya = np.ascontiguousarray(y, dtype=np.float64)
    _check_training(Xa, ya)
    params.validate(Xa.shape[1])
    return _grow(Xa, ya, params, tree_rng, params.resolved_mtry(Xa.shape[1]), presort(Xa))


def _check_training(Xa: np.ndarray, ya: np.ndarray) -> None:
    if ya.shape != (Xa.shape[0],):
        raise ValueError("X and y row counts differ")
    if np.isnan(Xa).any():
        raise ValueError("X contains missing values; impute before training")
    if np.isnan(ya).any():
        raise ValueError("y contains missing values")


def fingerprint(Xa: np.ndarray, ya: np.ndarray) -> str:
    h = hashlib.sha256()
    h.update(np.asarray(Xa.shape, dtype=np.int64).tobytes())
    h.update(Xa.tobytes())
    h.update(ya.tobytes())
    return h.hexdigest()[:32]


def _default_names(X, p: int) -> tuple[str, ...]:
    if isinstance(X, FeatureMatrix):
        return tuple(X.column_names)
    return FEATURE_NAMES if p == len(FEATURE_NAMES) else tuple(f"x{j}" for j in range(p))


def train_forest(X, y, params: ForestParams = ForestParams(), threads: int = 1,
                 feature_names: Sequence[str] | None = None) -> ForestModel:
    Xa = _as_array(X)
    ya = np.ascontiguousarray(y, dtype=np.float64)
    if Xa.shape[0] < 2:
        raise ValueError("need at least 2 training rows")
    _check_training(Xa, ya)
    params.validate(Xa.shape[1])
    mtry = params.resolved_mtry(Xa.shape[1])
    if feature_names is None:
        feature_names = _default_names(X, Xa.shape[1])
    if len(feature_names) != Xa.shape[1]:
        raise ValueError("feature_names length does not match X")

    order = presort(Xa)

    def one(i: int) -> Tree:
        return _grow(Xa, ya, params, derive_rng(params.seed, i), mtry, order)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            trees = list(ex.map(one, range(params.num_trees)))
    else:
        trees = [one(i) for i in range(params.num_trees)]
    return ForestModel(params, trees, tuple(feature_names), fingerprint(Xa, ya))


def predict(model: ForestModel, X, threads: int = 1) -> np.ndarray:
    if isinstance(X, FeatureMatrix) and tuple(X.column_names) != tuple(model.feature_names):
        raise ValueError(f"column mismatch: model expects {model.feature_names}")
    Xa = _as_array(X)
    if Xa.ndim != 2 or Xa.shape[1] != len(model.feature_names):
        raise ValueError(f"X must have {len(model.feature_names)} columns")
    if np.isnan(Xa).any():
        raise ValueError("X contains missing values")
    feature, value, right, roots = model.flat()
    out = np.empty(Xa.shape[0])
    if threads > 1 and Xa.shape[0] >= 2 * threads:
        bounds = np.linspace(0, Xa.shape[0], threads + 1).astype(int)

        def part(k: int) -> None:
            a, b = bounds[k], bounds[k + 1]
            _kernels.predict_flat(Xa[a:b], feature, value, right, roots, out[a:b])

        with ThreadPoolExecutor(threads) as ex:
            list(ex.map(part, range(threads)))
    else:
        _kernels.predict_flat(Xa, feature, value, right, roots, out)
    return out


def predict_per_tree(model: ForestModel, X) -> np.ndarray:
    """(n_trees, n_rows) matrix of individual tree outputs."""
    Xa = _as_array(X)
    feature, value, right, roots = model.flat()
    out = np.empty((len(model.trees), Xa.shape[0]))
    _kernels.predict_each(Xa, feature, value, right, roots, out)
    return out


def _open(path: Path, mode: str):
    if path.suffix == ".gz":
        raw = open(path, mode + "b")
        # mtime=0 and no stored name keep the archive bytes reproducible
        return gzip.GzipFile(filename="", mode=mode + "b", fileobj=raw, mtime=0), raw
    return open(path, mode + "b"), None


def save_model(model: ForestModel, path: str | Path) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "params": asdict(model.params),
        "feature_names": list(model.feature_names),
        "training_fingerprint": model.training_fingerprint,
        "trees": [
            {"feature": t.feature.tolist(), "value": t.value.tolist(), "right": t.right.tolist()}
            for t in model.trees
        ],
    }
    path = Path(path)
    fh, raw = _open(path, "w")
    try:
        fh.write(json.dumps(doc, separators=(",", ":")).encode())
    finally:
        fh.close()
        if raw is not None:
            raw.close()


def load_model(path: str | Path) -> ForestModel:
    path = Path(path)
    fh, raw = _open(path, "r")
    try:
        doc = json.loads(fh.read())
    finally:
        fh.close()
        if raw is not None:
            raw.close()
    if doc.get("format") != MODEL_FORMAT:
        raise ValueError(f"{path}: unsupported model format {doc.get('format')!r}, "
                         f"expected {MODEL_FORMAT}")
    params = ForestParams(**doc["params"])
    trees = [
        Tree(np.array(t["feature"], dtype=np.int32), np.array(t["value"], dtype=np.float64),
             np.array(t["right"], dtype=np.int32))
        for t in doc["trees"]
    ]
    if len(trees) != params.num_trees:
        raise ValueError(f"{path}: {len(trees)} trees stored, params say {params.num_trees}")
    return ForestModel(params, trees, tuple(doc["feature_names"]), doc["training_fingerprint"])
