"""Dense linear algebra for bipartite quantum states on C^d ⊗ C^d."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .rng import RandomStream, as_generator

VALIDATION_TOL = 1e-9


def hermitize(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.conj().T)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Hermitian, unit-trace, PSD matrix (all checked to 1e-9)."""

    entries: np.ndarray
    dims: tuple[int, int] | None = None

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=np.complex128, copy=True)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValidationError(f"density matrix must be square, got {a.shape}")
        if np.max(np.abs(a - a.conj().T)) > VALIDATION_TOL:
            raise ValidationError("density matrix is not Hermitian")
        tr = np.trace(a).real
        if abs(tr - 1) > VALIDATION_TOL:
            raise ValidationError(f"trace is {tr!r}, not 1")
        lam = np.linalg.eigvalsh(hermitize(a)).min()
        if lam < -VALIDATION_TOL:
            raise ValidationError(f"min eigenvalue {lam!r} is negative")
        if self.dims is not None and self.dims[0] * self.dims[1] != a.shape[0]:
            raise ValidationError(f"bipartite dims {self.dims} do not match dimension {a.shape[0]}")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def purity(self) -> float:
        return float(np.real(np.vdot(self.entries, self.entries)))

    def spectrum(self) -> np.ndarray:
        return np.linalg.eigvalsh(hermitize(self.entries))

    def to_json(self) -> str:
        return matrix_to_json(self.entries)

    @classmethod
    def from_json(cls, text: str) -> "DensityMatrix":
        return cls(matrix_from_json(text))


@dataclass(frozen=True, eq=False)
class PureProductState:
    left: np.ndarray
    right: np.ndarray

    def __post_init__(self) -> None:
        for name in ("left", "right"):
            v = np.array(getattr(self, name), dtype=np.complex128).ravel()
            if abs(np.linalg.norm(v) - 1) > 1e-12:
                raise ValidationError(f"{name} factor is not a unit vector")
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    def vector(self) -> np.ndarray:
        return np.kron(self.left, self.right)


@dataclass(frozen=True, eq=False)
class UnitaryMatrix:
    entries: np.ndarray

    def __post_init__(self) -> None:
        u = np.array(self.entries, dtype=np.complex128)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise ValidationError("unitary must be square")
        if unitarity_defect(u) > VALIDATION_TOL:
            raise ValidationError("matrix is not unitary")
        u.setflags(write=False)
        object.__setattr__(self, "entries", u)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]


def unitarity_defect(u: np.ndarray) -> float:
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def matrix_to_json(a: np.ndarray) -> str:
    a = np.asarray(a, dtype=np.complex128)
    return json.dumps({"dim": a.shape[0], "re": a.real.tolist(), "im": a.imag.tolist()})


def matrix_from_json(text: str) -> np.ndarray:
    obj = json.loads(text)
    a = np.array(obj["re"], dtype=np.float64) + 1j * np.array(obj["im"], dtype=np.float64)
    if a.shape != (obj["dim"], obj["dim"]):
        raise ValidationError(f"declared dim {obj['dim']} but got shape {a.shape}")
    return a


def maximally_mixed(dim: int, dims: tuple[int, int] | None = None) -> DensityMatrix:
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    return DensityMatrix(np.eye(dim) / dim, dims)


def _entries(x) -> np.ndarray:
    return x.entries if isinstance(x, (DensityMatrix, UnitaryMatrix)) else np.asarray(x)


def trace_norm_of_difference(rho, sigma) -> float:
    a, b = _entries(rho), _entries(sigma)
    if a.shape != b.shape:
        raise ValidationError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return math.fsum(np.abs(np.linalg.eigvalsh(hermitize(a - b))))


def trace_distance(rho, sigma) -> float:
    return 0.5 * trace_norm_of_difference(rho, sigma)


def schatten_norm(T, p) -> float:
    a = _entries(T)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError("schatten_norm needs a square matrix")
    s = np.linalg.svd(a, compute_uv=False)
    if p in (math.inf, "inf"):
        return float(s.max())
    if p == 1:
        return math.fsum(s)
    if p == 2:
        return math.sqrt(math.fsum(s * s))
    raise ValidationError(f"p must be 1, 2 or inf, got {p!r}")


def ginibre(dim: int, gen: np.random.Generator) -> np.ndarray:
    return (gen.standard_normal((dim, dim)) + 1j * gen.standard_normal((dim, dim))) / math.sqrt(2)


def haar_unitary(dim: int, rng: RandomStream | np.random.Generator) -> UnitaryMatrix:
    """QR of a Ginibre matrix, with the phases of diag(R) moved into Q.

    Without the phase correction the law of Q depends on LAPACK's sign
    convention and is not Haar.
    """
    if dim < 1:
        raise ValidationError("dim must be >= 1")
    q, r = np.linalg.qr(ginibre(dim, as_generator(rng)))
    ph = np.diag(r) / np.abs(np.diag(r))
    return UnitaryMatrix(q * ph)


def naive_qr_unitary(dim: int, rng: RandomStream | np.random.Generator) -> np.ndarray:
    """Q factor without phase correction. Kept to show it is not Haar distributed."""
    q, _ = np.linalg.qr(ginibre(dim, as_generator(rng)))
    return q


def conjugate(rho: DensityMatrix, U) -> DensityMatrix:
    u = _entries(U)
    if u.shape != rho.entries.shape:
        raise ValidationError(f"dimension mismatch: {u.shape} vs {rho.entries.shape}")
    return DensityMatrix(hermitize(u @ rho.entries @ u.conj().T), rho.dims)


def product_pure_density(s: PureProductState) -> DensityMatrix:
    v = s.vector()
    return DensityMatrix(np.outer(v, v.conj()), (s.left.size, s.right.size))


def random_unit_vectors(count: int, dim: int, gen: np.random.Generator) -> np.ndarray:
    z = gen.standard_normal((count, dim)) + 1j * gen.standard_normal((count, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


def random_density(dim: int, gen: np.random.Generator, rank: int | None = None) -> DensityMatrix:
    """Induced-measure mixed state G G† / tr(G G†)."""
    g = gen.standard_normal((dim, rank or dim)) + 1j * gen.standard_normal((dim, rank or dim))
    a = g @ g.conj().T
    return DensityMatrix(hermitize(a / np.trace(a).real))
