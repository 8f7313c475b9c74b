"""Distributions on the grid [d] x [d] and the distances between them.

Indices are 0-based in storage and in every file format.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import LIMITS
from .errors import ValidationError
from .rng import RandomStream, as_generator


@dataclass(frozen=True, eq=False)
class GridDistribution:
    """A d x d nonnegative matrix of probabilities summing to one.

    Small float drift is repaired at construction: entries in (-1e-12, 0) are
    clamped to zero and a total within 1e-9 of one is rescaled. Anything
    worse is rejected with :class:`ValidationError`.
    """

    mass: np.ndarray

    def __post_init__(self) -> None:
        a = np.array(self.mass, dtype=np.float64, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValidationError(f"mass must be a non-empty square matrix, got shape {a.shape}")
        if a.shape[0] > LIMITS.max_grid_side:
            raise ValidationError(f"d={a.shape[0]} exceeds the configured cap {LIMITS.max_grid_side}")
        if not np.all(np.isfinite(a)):
            raise ValidationError("mass has non-finite entries")
        lo = a.min()
        if lo < -LIMITS.neg_tol:
            raise ValidationError(f"negative entry {lo!r} below tolerance -{LIMITS.neg_tol}")
        a[a < 0] = 0.0
        total = math.fsum(a.ravel())
        if abs(total - 1.0) > LIMITS.sum_tol:
            raise ValidationError(f"entries sum to {total!r}, not 1 within {LIMITS.sum_tol}")
        if abs(total - 1.0) > LIMITS.renorm_floor:
            a /= total
        a.setflags(write=False)
        object.__setattr__(self, "mass", a)

    @property
    def d(self) -> int:
        return self.mass.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GridDistribution):
            return NotImplemented
        return self.d == other.d and bool(np.array_equal(self.mass, other.mass))

    def __hash__(self) -> int:
        return hash((self.d, self.mass.tobytes()))

    def __repr__(self) -> str:
        return f"GridDistribution(d={self.d})"

    # ---- serialisation -------------------------------------------------

    def to_json(self) -> str:
        return json.dumps({"d": self.d, "mass": self.mass.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "GridDistribution":
        obj = json.loads(text)
        mass = np.array(obj["mass"], dtype=np.float64)
        if mass.shape != (obj["d"], obj["d"]):
            raise ValidationError(f"declared d={obj['d']} but mass has shape {mass.shape}")
        return cls(mass)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "j", "p"])
        for (i, j), p in np.ndenumerate(self.mass):
            w.writerow([i, j, repr(float(p))])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridDistribution":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ValidationError("empty CSV")
        d = max(max(int(r["i"]), int(r["j"])) for r in rows) + 1
        mass = np.zeros((d, d))
        for r in rows:
            mass[int(r["i"]), int(r["j"])] = float(r["p"])
        return cls(mass)


@dataclass(frozen=True, eq=False)
class SampleSeq:
    """An ordered sequence of grid points, stored as an ``(n, 2)`` int array."""

    d: int
    items: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=np.int64))

    def __post_init__(self) -> None:
        it = np.asarray(self.items, dtype=np.int64).reshape(-1, 2)
        if it.size and (it.min() < 0 or it.max() >= self.d):
            raise ValidationError(f"sample point out of range for d={self.d}")
        it.setflags(write=False)
        object.__setattr__(self, "items", it)

    @property
    def n(self) -> int:
        return self.items.shape[0]

    def __len__(self) -> int:
        return self.n

    def cells(self) -> np.ndarray:
        """Flat cell indices ``i*d + j``."""
        return self.items[:, 0] * self.d + self.items[:, 1]

    def counts(self) -> np.ndarray:
        return np.bincount(self.cells(), minlength=self.d * self.d).reshape(self.d, self.d)


def uniform_grid(d: int) -> GridDistribution:
    if d < 1:
        raise ValidationError(f"d must be >= 1, got {d}")
    return GridDistribution(np.full((d, d), 1.0 / (d * d)))


def point_mass(d: int, i: int, j: int) -> GridDistribution:
    a = np.zeros((d, d))
    a[i, j] = 1.0
    return GridDistribution(a)


def _pair(p, q) -> tuple[np.ndarray, np.ndarray]:
    a = p.mass if isinstance(p, GridDistribution) else np.asarray(p, dtype=np.float64)
    b = q.mass if isinstance(q, GridDistribution) else np.asarray(q, dtype=np.float64)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return a.ravel(), b.ravel()


def tv_distance(p, q) -> float:
    """Half the l1 distance. Also accepts raw probability arrays."""
    a, b = _pair(p, q)
    return 0.5 * math.fsum(np.abs(a - b))


def chi2_distance(p, q) -> float:
    """chi^2(p, q) = sum (p - q)^2 / q; ``inf`` if p charges a cell where q = 0."""
    a, b = _pair(p, q)
    zero = b == 0
    if np.any(a[zero] > 0):
        return math.inf
    nz = ~zero
    return math.fsum((a[nz] - b[nz]) ** 2 / b[nz])


def kl_divergence(p, q) -> float:
    """KL(p || q) in nats; ``inf`` when p is not absolutely continuous w.r.t. q."""
    a, b = _pair(p, q)
    s = a > 0
    if np.any(b[s] == 0):
        return math.inf
    val = math.fsum(a[s] * np.log(a[s] / b[s]))
    # rounding can leave a tiny negative residue
    return max(val, 0.0)


def sample(p: GridDistribution, n: int, rng: RandomStream | np.random.Generator) -> SampleSeq:
    if n < 0:
        raise ValidationError(f"n must be >= 0, got {n}")
    d = p.d
    if n == 0:
        return SampleSeq(d)
    gen = as_generator(rng)
    cells = gen.choice(d * d, size=n, p=p.mass.ravel())
    return SampleSeq(d, np.stack([cells // d, cells % d], axis=1))


def empirical(seq: SampleSeq) -> GridDistribution:
    if seq.n == 0:
        raise ValidationError("empirical distribution of an empty sample is undefined")
    return GridDistribution(seq.counts() / seq.n)


# ---- hypergeometric overlap of two random half-subsets -------------------


def hypergeom_pmf(d: int, r: int) -> float:
    """P(|S ∩ S'| = r) for independent uniform half-subsets S, S' of [d]."""
    if d < 2 or d % 2:
        raise ValidationError(f"d must be a positive even integer, got {d}")
    h = d // 2
    if not 0 <= r <= h:
        raise ValidationError(f"r must lie in [0, {h}], got {r}")
    return math.comb(h, r) ** 2 / math.comb(d, h)


def hypergeom_tail_exact(d: int, threshold: float) -> float:
    """P(|S ∩ S'| >= threshold), summed exactly over the pmf."""
    h = d // 2
    start = max(0, math.ceil(threshold - 1e-12))
    num = sum(math.comb(h, r) ** 2 for r in range(start, h + 1))
    return num / math.comb(d, h)


def hypergeom_tail_bound(m: float, s: float) -> float:
    """Upper tail bound exp(-2 s^2 m) for a hypergeometric mean exceeding its expectation by s."""
    return math.exp(-2.0 * s * s * m)
