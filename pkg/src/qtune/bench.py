"""Evaluation surfaces standing in for model training.

Every surface maps a :class:`~qtune.space.Configuration` to a metric in
``[0, 1]``. Surfaces are immutable and evaluation is a pure function of the
configuration. Agents never see raw metrics: :meth:`Surface.score` flips
minimize-direction surfaces (``1 - metric``) so that all agents maximize.

Three kinds are provided:

* :class:`TabularSurface` -- a lookup table indexed by flat configuration index.
* :class:`QuadraticSurface` -- ``1 - curvature * d**2`` around a declared optimum.
* :class:`RandomSmoothSurface` -- a seeded smooth random function, rescaled to
  ``[0, 1]`` over the whole grid.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
from scipy import stats

from .space import Configuration, Encoding, SearchSpace

#: Surfaces larger than this are never scanned or materialized.
DESK_LIMIT = 10**6

#: Identifier written into files generated from :class:`RandomSmoothSurface`.
SMOOTH_ALGORITHM = "rff-cos-pcg64-v1"
SMOOTH_FEATURES = 256


class Direction(str, enum.Enum):
    MAXIMIZE = "maximize"
    MINIMIZE = "minimize"

    @classmethod
    def parse(cls, text: str | Direction) -> Direction:
        if isinstance(text, Direction):
            return text
        try:
            return cls(str(text).strip().lower())
        except ValueError:
            raise ValueError(
                f"unknown direction {text!r}; expected maximize|minimize"
            ) from None


class SurfaceError(ValueError):
    pass


class SurfaceFormatError(SurfaceError):
    """Malformed tabular surface file."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        where = f"line {lineno}: " if lineno is not None else ""
        super().__init__(where + message)


class SurfaceIntegrityError(SurfaceError):
    """Tabular content does not match its declared search space."""


class Surface:
    """Base class: a deterministic configuration -> metric oracle."""

    kind: str = "abstract"

    def __init__(self, space: SearchSpace, direction: Direction | str = Direction.MAXIMIZE):
        self.space = space
        self.direction = Direction.parse(direction)
        self.provenance: str | None = None

    def _raw(self, config: Configuration) -> float:
        raise NotImplementedError

    def evaluate(self, config: Configuration) -> float:
        """Raw metric of ``config`` in ``[0, 1]``."""
        self.space.check(config)
        return self._raw(config)

    def score(self, config: Configuration) -> float:
        """Metric in maximize form; what agents optimize."""
        m = self.evaluate(config)
        return m if self.direction is Direction.MAXIMIZE else 1.0 - m

    def table(self) -> np.ndarray:
        """Raw metrics for every flat index. Refuses non-desk-scale spaces."""
        _check_desk(self.space)
        return np.array(
            [self._raw(self.space.config_from_flat_index(k))
             for k in range(self.space.cardinality)]
        )

    def score_table(self) -> np.ndarray:
        t = self.table()
        return t if self.direction is Direction.MAXIMIZE else 1.0 - t

    def to_tabular(self) -> TabularSurface:
        tab = TabularSurface(self.space, self.table(), self.direction)
        tab.provenance = self.provenance
        return tab


class CountingSurface(Surface):
    """Delegating wrapper that counts evaluations of ``inner``."""

    def __init__(self, inner: Surface):
        super().__init__(inner.space, inner.direction)
        self.inner = inner
        self.kind = inner.kind
        self.provenance = inner.provenance
        self.count = 0

    def _raw(self, config: Configuration) -> float:
        self.count += 1
        return self.inner._raw(config)

    def table(self) -> np.ndarray:
        return self.inner.table()


def _check_desk(space: SearchSpace, limit: int = DESK_LIMIT) -> None:
    if space.cardinality > limit:
        raise SurfaceError(
            f"space cardinality {space.cardinality} exceeds desk-scale limit {limit}"
        )


class TabularSurface(Surface):
    kind = "tabular"

    def __init__(self, space: SearchSpace, table: Sequence[float] | np.ndarray,
                 direction: Direction | str = Direction.MAXIMIZE):
        super().__init__(space, direction)
        values = np.array(table, dtype=float)
        if values.ndim != 1 or values.shape[0] != space.cardinality:
            raise SurfaceIntegrityError(
                f"table has {values.size} entries, space cardinality is "
                f"{space.cardinality}"
            )
        if not np.all(np.isfinite(values)):
            raise SurfaceIntegrityError("table contains non-finite metrics")
        if values.size and (values.min() < 0.0 or values.max() > 1.0):
            raise SurfaceIntegrityError("table metrics must lie in [0, 1]")
        values.setflags(write=False)
        self._table = values

    def _raw(self, config: Configuration) -> float:
        return float(self._table[self.space.flat_index(config)])

    def table(self) -> np.ndarray:
        return self._table.copy()

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, TabularSurface)
            and self.space == other.space
            and self.direction is other.direction
            and np.array_equal(self._table, other._table)
        )

    __hash__ = None  # type: ignore[assignment]


class QuadraticSurface(Surface):
    """``1 - curvature * d(config, optimum)**2`` clamped to ``[0, 1]``.

    ``d`` is the normalized distance between encodings: each dimension
    contributes a squared difference in ``[0, 1]`` (one-hot dimensions 0 or 1,
    scalar dimensions the squared normalized gap) and the sum is divided by
    the number of dimensions.
    """

    kind = "quadratic"

    def __init__(self, space: SearchSpace, optimum: Configuration, curvature: float = 1.0,
                 direction: Direction | str = Direction.MAXIMIZE):
        super().__init__(space, direction)
        space.check(optimum)
        if not curvature > 0 or not math.isfinite(curvature):
            raise ValueError("curvature must be a positive finite number")
        self.optimum = optimum
        self.curvature = float(curvature)
        self.provenance = f"quadratic optimum={list(optimum.indices)} curvature={self.curvature!r}"

    def _raw(self, config: Configuration) -> float:
        m = 1.0 - self.curvature * self.distance2(config)
        m = min(1.0, max(0.0, m))
        # the optimum is a metric maximum; for minimize surfaces it is the loss minimum
        return m if self.direction is Direction.MAXIMIZE else 1.0 - m

    def distance2(self, config: Configuration) -> float:
        total = 0.0
        for dim, i, j in zip(self.space.dimensions, config, self.optimum):
            if dim.encoding is Encoding.ONE_HOT:
                total += float(i != j)
            else:
                s = dim.scalar_table()
                total += float(s[i] - s[j]) ** 2
        return total / len(self.space.dimensions)


class RandomSmoothSurface(Surface):
    """Seeded smooth random function over encoded configurations.

    The raw function is a random Fourier feature sample of a squared
    exponential process with length scale ``smoothness``::

        rng = numpy.random.default_rng(seed)          # PCG64
        W = rng.standard_normal((256, L)) / smoothness
        b = rng.uniform(0, 2*pi, 256)
        a = rng.standard_normal(256)
        f(x) = a @ cos(W @ x + b)

    where ``x`` is the encoding of a configuration (length ``L``). Values are
    min-max rescaled to ``[0, 1]`` over the full grid, so the grid maximum is
    exactly 1 and the minimum exactly 0. The full table is computed at
    construction.
    """

    kind = "random_smooth"

    def __init__(self, space: SearchSpace, seed: int, smoothness: float = 1.0,
                 direction: Direction | str = Direction.MAXIMIZE):
        super().__init__(space, direction)
        if not smoothness > 0 or not math.isfinite(smoothness):
            raise ValueError("smoothness must be a positive finite number")
        _check_desk(space)
        self.seed = int(seed)
        self.smoothness = float(smoothness)
        self.provenance = (
            f"{SMOOTH_ALGORITHM} seed={self.seed} smoothness={self.smoothness!r}"
        )
        rng = np.random.default_rng(self.seed)
        L = space.encoded_length
        W = rng.standard_normal((SMOOTH_FEATURES, L)) / self.smoothness
        b = rng.uniform(0.0, 2.0 * math.pi, SMOOTH_FEATURES)
        a = rng.standard_normal(SMOOTH_FEATURES)
        f = np.cos(space.encode_all() @ W.T + b) @ a
        lo, hi = f.min(), f.max()
        table = (f - lo) / (hi - lo) if hi > lo else np.zeros_like(f)
        table.setflags(write=False)
        self._table = table

    def _raw(self, config: Configuration) -> float:
        return float(self._table[self.space.flat_index(config)])

    def table(self) -> np.ndarray:
        return self._table.copy()


def evaluate(surface: Surface, config: Configuration) -> float:
    return surface.evaluate(config)


def best_of(surface: Surface, limit: int = DESK_LIMIT) -> tuple[Configuration, float]:
    """Exhaustive optimum honoring the surface direction; ties go to the lowest index."""
    _check_desk(surface.space, limit)
    table = surface.table()
    k = int(np.argmax(table) if surface.direction is Direction.MAXIMIZE else np.argmin(table))
    return surface.space.config_from_flat_index(k), float(table[k])


# ---------------------------------------------------------------------------
# Metafeatures
# ---------------------------------------------------------------------------

METAFEATURE_NAMES = (
    "log10_instances",
    "log10_features",
    "n_numeric",
    "n_categorical",
    "n_classes",
    "mean_feature_mean",
    "mean_feature_std",
    "mean_feature_skew",
)

_SUMMARY_FIELDS = (
    "n_instances",
    "n_numeric",
    "n_categorical",
    "n_classes",
    "feature_means",
    "feature_stds",
    "feature_skews",
)


@dataclass(frozen=True)
class MetaFeatures:
    """Fixed-length dataset descriptor, see :data:`METAFEATURE_NAMES`."""

    values: tuple[float, ...]

    def __post_init__(self) -> None:
        vals = tuple(float(v) for v in self.values)
        if len(vals) != len(METAFEATURE_NAMES):
            raise ValueError(
                f"metafeatures need {len(METAFEATURE_NAMES)} entries, got {len(vals)}"
            )
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("metafeatures must be finite")
        object.__setattr__(self, "values", vals)

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self) -> int:
        return len(self.values)

    @classmethod
    def zeros(cls) -> MetaFeatures:
        return cls((0.0,) * len(METAFEATURE_NAMES))


def _mean(xs: Sequence[float]) -> float:
    return float(np.mean(xs)) if len(xs) else 0.0


def metafeatures(summary: Mapping[str, Any]) -> MetaFeatures:
    """Build the 8-entry metafeature vector from a dataset summary.

    The summary needs ``n_instances``, ``n_numeric``, ``n_categorical``,
    ``n_classes`` and per-feature ``feature_means``, ``feature_stds`` and
    ``feature_skews`` sequences.
    """
    missing = [f for f in _SUMMARY_FIELDS if f not in summary]
    if missing:
        raise ValueError(f"dataset summary missing fields: {', '.join(missing)}")
    n_inst = int(summary["n_instances"])
    n_num = int(summary["n_numeric"])
    n_cat = int(summary["n_categorical"])
    if n_inst < 1:
        raise ValueError("n_instances must be >= 1")
    if n_num + n_cat < 1:
        raise ValueError("dataset needs at least one feature")
    return MetaFeatures(
        (
            math.log10(n_inst),
            math.log10(n_num + n_cat),
            n_num,
            n_cat,
            int(summary["n_classes"]),
            _mean(summary["feature_means"]),
            _mean(summary["feature_stds"]),
            _mean(summary["feature_skews"]),
        )
    )


def summarize_dataset(X: np.ndarray, y: np.ndarray,
                      categorical: Sequence[bool] | None = None) -> dict[str, Any]:
    """Dataset summary suitable for :func:`metafeatures`.

    Moments are taken over numeric columns only; constant columns get zero skew.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D array")
    cat = np.zeros(X.shape[1], bool) if categorical is None else np.asarray(categorical, bool)
    num = X[:, ~cat]
    if num.shape[1]:
        skews = np.nan_to_num(stats.skew(num, axis=0), nan=0.0)
    else:
        skews = np.zeros(0)
    return {
        "n_instances": X.shape[0],
        "n_numeric": int((~cat).sum()),
        "n_categorical": int(cat.sum()),
        "n_classes": int(len(np.unique(y))),
        "feature_means": num.mean(axis=0).tolist(),
        "feature_stds": num.std(axis=0).tolist(),
        "feature_skews": skews.tolist(),
    }


# ---------------------------------------------------------------------------
# Tabular file format
# ---------------------------------------------------------------------------


def save_tabular(surface: Surface, path: str | Path) -> None:
    """Write ``surface`` as a tabular file.

    Layout (UTF-8)::

        #space {"name": "lr", "encoding": "scalar", "values": [0.1, 0.01]}
        #direction maximize
        #generator rff-cos-pcg64-v1 seed=7 smoothness=0.5    (optional)
        0,0.25
        1,0.75

    One ``#space`` line per dimension in order, then one ``index,metric``
    row per flat index, metrics printed as shortest round-trip decimals.
    """
    lines = [
        "#space " + json.dumps(rec, separators=(", ", ": "))
        for rec in surface.space.to_records()
    ]
    lines.append(f"#direction {surface.direction.value}")
    if surface.provenance:
        lines.append(f"#generator {surface.provenance}")
    lines.extend(f"{k},{float(m)!r}" for k, m in enumerate(surface.table()))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_tabular(path: str | Path) -> TabularSurface:
    text = Path(path).read_text(encoding="utf-8")
    return parse_tabular(text)


def parse_tabular(text: str) -> TabularSurface:
    records: list[dict[str, Any]] = []
    direction: Direction | None = None
    provenance = None
    metrics: list[float] = []
    lines = text.splitlines()
    if not any(line.strip() for line in lines):
        raise SurfaceFormatError("empty surface file", 1)
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if metrics:
                raise SurfaceFormatError("header line after table body", lineno)
            tag, _, rest = line[1:].partition(" ")
            if tag == "space":
                try:
                    rec = json.loads(rest)
                    SearchSpace.from_records([rec])
                except (ValueError, KeyError, TypeError) as exc:
                    raise SurfaceFormatError(f"bad #space declaration: {exc}", lineno) from None
                records.append(rec)
            elif tag == "direction":
                try:
                    direction = Direction.parse(rest)
                except ValueError as exc:
                    raise SurfaceFormatError(str(exc), lineno) from None
            elif tag == "generator":
                provenance = rest.strip()
            else:
                raise SurfaceFormatError(f"unknown header tag #{tag}", lineno)
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise SurfaceFormatError("expected '<flat_index>,<metric>'", lineno)
        try:
            k = int(parts[0])
            m = float(parts[1])
        except ValueError:
            raise SurfaceFormatError(f"unparseable row {line!r}", lineno) from None
        if k != len(metrics):
            raise SurfaceFormatError(f"expected flat index {len(metrics)}, got {k}", lineno)
        if not math.isfinite(m) or not 0.0 <= m <= 1.0:
            raise SurfaceFormatError(f"metric {m!r} outside [0, 1]", lineno)
        metrics.append(m)
    if not records:
        raise SurfaceFormatError("no #space declarations")
    if direction is None:
        raise SurfaceFormatError("missing #direction header")
    try:
        space = SearchSpace.from_records(records)
    except ValueError as exc:
        raise SurfaceFormatError(f"invalid search space: {exc}") from None
    if len(metrics) != space.cardinality:
        raise SurfaceIntegrityError(
            f"table has {len(metrics)} rows but the declared space has "
            f"{space.cardinality} configurations"
        )
    surface = TabularSurface(space, metrics, direction)
    surface.provenance = provenance
    return surface
