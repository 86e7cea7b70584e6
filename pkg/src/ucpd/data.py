"""Containers shared by every stage: observed series, evaluation grids and
two-parameter process fields, plus their CSV/JSON encodings."""

import json
import math
from dataclasses import dataclass, field

import numpy as np

FIELD_LABELS = (
    "en",
    "en_prime",
    "Wn",
    "Wn_prime",
    "Rn",
    "Rn_prime",
    "xi_circ",
    "xi_star",
)
# fields that vanish identically at t = 0
_ZERO_AT_ORIGIN = {"en", "en_prime", "Wn", "Wn_prime", "Rn", "Rn_prime", "xi_circ", "xi_star"}


class MalformedInputError(ValueError):
    """Raised when an input file cannot be parsed; ``row`` is 1-based."""

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def fmt(x):
    """Format a double with 17 significant digits (lossless)."""
    return format(float(x), ".17g")


@dataclass(frozen=True)
class SeriesSample:
    """An observed or simulated path X_1, ..., X_n.

    Parameters
    ----------
    values : array_like
        The observations, in time order.
    provenance : str or dict
        Generator descriptor, or ``"external"`` for data read from disk.
    """

    values: np.ndarray
    provenance: object = "external"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1:
            raise ValueError("a series must be one-dimensional")
        if v.size < 2:
            raise ValueError(f"a series needs at least 2 observations, got {v.size}")
        if not np.all(np.isfinite(v)):
            raise ValueError("series contains non-finite values")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def n(self):
        return int(self.values.size)

    def __len__(self):
        return self.n


def as_sample(x):
    if isinstance(x, SeriesSample):
        return x
    return SeriesSample(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class EvalGrid:
    """Points (s, t) at which a process is evaluated.

    ``t_index`` holds the integers k of t = k/n, so [nt] is exact.
    """

    s_points: np.ndarray
    t_index: np.ndarray
    n: int
    R: float

    def __post_init__(self):
        s = np.asarray(self.s_points, dtype=float).ravel()
        k = np.asarray(self.t_index).ravel()
        if s.size == 0:
            raise ValueError("s_points must be non-empty")
        if not np.all(np.isfinite(s)):
            raise ValueError("s_points must be finite")
        if np.any(np.diff(s) <= 0):
            raise ValueError("s_points must be strictly increasing")
        if not self.R > 0:
            raise ValueError("R must be positive")
        if np.any(np.abs(s) > self.R * (1 + 1e-12)):
            raise ValueError(f"s_points must lie within [-R, R] = [-{self.R}, {self.R}]")
        if k.size == 0:
            raise ValueError("t grid must be non-empty")
        if not np.issubdtype(k.dtype, np.integer):
            if np.any(k != np.round(k)):
                raise ValueError("t_index must hold integers")
        k = k.astype(np.int64)
        n = int(self.n)
        if n < 2:
            raise ValueError("n must be at least 2")
        if np.any(k < 0) or np.any(k > n):
            raise ValueError("t_index entries must lie in 0..n")
        if np.any(np.diff(k) < 0):
            raise ValueError("t grid must be sorted ascending")
        object.__setattr__(self, "s_points", _frozen(s))
        object.__setattr__(self, "t_index", _frozen(k, np.int64))
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "R", float(self.R))

    @property
    def t_points(self):
        return self.t_index / self.n

    @property
    def shape(self):
        return (self.s_points.size, self.t_index.size)

    @classmethod
    def from_t_points(cls, s_points, t_points, n, R):
        """Build a grid from fractions t; each must equal k/n for an integer k."""
        t = np.asarray(t_points, dtype=float).ravel()
        k = np.round(t * n)
        bad = np.abs(k / n - t) > 1e-12
        if np.any(bad):
            raise ValueError(
                f"t-point {t[bad][0]!r} is not of the form k/n for n={n}"
            )
        return cls(s_points, k.astype(np.int64), n, R)

    @classmethod
    def default(cls, n, R=1.0, s_count=None, t_stride=1):
        """Grid with s-spacing at most 2R n^{-3/4} and every t_stride-th split.

        The s-grid holds ``ceil(n^{3/4}) + 1`` points (clipped to 4096) unless
        ``s_count`` is given.  The t-grid always contains 0 and 1.
        """
        if s_count is None:
            s_count = min(math.ceil(n ** 0.75) + 1, 4096)
        if s_count < 1:
            raise ValueError("s_count must be at least 1")
        if t_stride < 1:
            raise ValueError("t_stride must be at least 1")
        s = np.array([0.0]) if s_count == 1 else np.linspace(-R, R, s_count)
        k = np.arange(0, n + 1, t_stride)
        if k[-1] != n:
            k = np.append(k, n)
        return cls(s, k, n, R)

    def with_s(self, s_points):
        return EvalGrid(s_points, self.t_index, self.n, self.R)


@dataclass(frozen=True)
class ProcessField:
    """Values of a two-parameter process on a grid, shape ``(|S|, |T|)``."""

    grid: EvalGrid
    values: np.ndarray
    label: str
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid {self.grid.shape}")
        if self.label not in FIELD_LABELS:
            raise ValueError(f"unknown field label {self.label!r}")
        if self.label in _ZERO_AT_ORIGIN:
            at0 = self.grid.t_index == 0
            if np.any(at0) and np.any(v[:, at0] != 0):
                raise ValueError(f"{self.label} must vanish at t=0")
        object.__setattr__(self, "values", _frozen(v))

    def __sub__(self, other):
        return self.values - other.values

    def sup_abs(self):
        return float(np.max(np.abs(self.values)))

    # -- serialization -------------------------------------------------------

    def to_csv(self, path):
        write_table_csv(
            path,
            self.grid.s_points,
            self.grid.t_points,
            self.values,
            comments=[f"label={self.label} n={self.grid.n} R={fmt(self.grid.R)}"],
        )

    @classmethod
    def from_csv(cls, path):
        comments, rows, cols, values = read_table_csv(path)
        meta = dict(tok.split("=", 1) for c in comments for tok in c.split() if "=" in tok)
        n = int(meta["n"])
        grid = EvalGrid.from_t_points(rows, cols, n, float(meta["R"]))
        return cls(grid, values, meta["label"])

    def to_dict(self):
        return {
            "label": self.label,
            "R": self.grid.R,
            "n": self.grid.n,
            "s_points": self.grid.s_points.tolist(),
            "t_points": self.grid.t_points.tolist(),
            "t_index": self.grid.t_index.tolist(),
            "values": self.values.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        grid = EvalGrid(d["s_points"], d["t_index"], d["n"], d["R"])
        return cls(grid, np.array(d["values"], dtype=float).reshape(grid.shape), d["label"])

    def to_json(self, path):
        dump_json(self.to_dict(), path)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# -- file formats -------------------------------------------------------------


def dump_json(obj, path=None):
    text = json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def write_table_csv(path, row_keys, col_keys, values, comments=(), corner="s\\t"):
    lines = [f"# {c}" for c in comments]
    lines.append(",".join([corner] + [fmt(c) for c in col_keys]))
    for r, row in zip(row_keys, np.asarray(values)):
        lines.append(",".join([fmt(r)] + [fmt(v) for v in row]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_table_csv(path):
    comments, body = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                comments.append(line[1:].strip())
            else:
                body.append(line.split(","))
    cols = np.array([float(c) for c in body[0][1:]])
    rows = np.array([float(r[0]) for r in body[1:]])
    values = np.array([[float(v) for v in r[1:]] for r in body[1:]])
    return comments, rows, cols, values


def write_series_csv(path, sample, header=None):
    lines = []
    if header is not None:
        lines.append(f"# {header}")
    lines.extend(fmt(v) for v in sample.values)
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_series_csv(path):
    """Read a single-column numeric CSV; ``#`` lines are comments."""
    values = []
    with open(path) as fh:
        for row, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if "," in text:
                raise MalformedInputError(f"expected a single column, got {text!r}", row)
            try:
                v = float(text)
            except ValueError:
                raise MalformedInputError(f"non-numeric value {text!r}", row) from None
            if not math.isfinite(v):
                raise MalformedInputError(f"non-finite value {text!r}", row)
            values.append(v)
    if len(values) < 2:
        raise MalformedInputError(f"need at least 2 observations, found {len(values)}")
    return SeriesSample(np.array(values), provenance="external")
