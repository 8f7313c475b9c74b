"""Tools around the completely positive cone of d x d distributions.

Exact membership is not decided here. What is provided:

* the doubly-nonnegative necessary condition,
* cut witnesses ``x in {±1}^d`` whose quadratic form ``x^T A x`` lower-bounds
  the entrywise l1 distance from ``A`` to every CP distribution,
* a conditional-gradient fit of a mixture of i.i.d. products, which gives an
  upper bound on that distance.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares, nnls

from .config import LIMITS
from .errors import InfeasibleError, ValidationError
from .prob import GridDistribution
from .rng import RandomStream, as_generator


@dataclass(frozen=True, eq=False)
class MixtureOfProducts:
    """``sum_k weights[k] * outer(marginals[k], marginals[k])``."""

    weights: np.ndarray
    marginals: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=np.float64).ravel()
        v = np.array(self.marginals, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != w.size or w.size == 0:
            raise ValidationError("need one marginal row per weight and at least one component")
        if w.min() < 0 or v.min() < 0:
            raise ValidationError("weights and marginals must be nonnegative")
        if abs(math.fsum(w) - 1) > 1e-9:
            raise ValidationError(f"weights sum to {math.fsum(w)!r}")
        sums = v.sum(axis=1)
        if np.any(np.abs(sums - 1) > 1e-9):
            raise ValidationError("every marginal must be a probability vector")
        w.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "marginals", v)

    @property
    def d(self) -> int:
        return self.marginals.shape[1]

    def matrix(self) -> np.ndarray:
        return np.einsum("k,ki,kj->ij", self.weights, self.marginals, self.marginals)


@dataclass(frozen=True)
class CutWitness:
    signs: tuple[int, ...]
    quad_form: float
    cut_weight: float

    def to_json(self) -> str:
        return json.dumps({"x": list(self.signs), "quad_form": self.quad_form, "cut_weight": self.cut_weight})

    @classmethod
    def from_json(cls, text: str) -> "CutWitness":
        obj = json.loads(text)
        return cls(tuple(int(s) for s in obj["x"]), float(obj["quad_form"]), float(obj["cut_weight"]))


@dataclass(frozen=True)
class Verdict:
    passed: bool
    reason: str | None = None


def normalize_mixture(raw) -> MixtureOfProducts:
    """Rescale ``[(c, v), ...]`` so that every ``v`` is a probability vector.

    Each term ``c v v^T`` becomes ``(c |v|_1^2) (v/|v|_1)(v/|v|_1)^T``; the
    weights are then renormalised to sum to one.
    """
    raw = list(raw)
    if not raw:
        raise ValidationError("mixture needs at least one component")
    ws, vs = [], []
    for c, v in raw:
        v = np.asarray(v, dtype=np.float64)
        if c < 0 or v.min() < 0:
            raise ValidationError("weights and vectors must be nonnegative")
        s = v.sum()
        if s == 0:
            raise ValidationError("zero vector component")
        ws.append(c * s * s)
        vs.append(v / s)
    w = np.array(ws)
    total = w.sum()
    if total == 0:
        raise ValidationError("all weights are zero")
    return MixtureOfProducts(w / total, np.array(vs))


def mixture_to_distribution(mix: MixtureOfProducts) -> GridDistribution:
    return GridDistribution(mix.matrix())


def doubly_nonnegative_check(A, tol: float = 1e-9) -> Verdict:
    a = A.mass if isinstance(A, GridDistribution) else np.asarray(A, dtype=np.float64)
    asym = np.max(np.abs(a - a.T))
    if asym > tol:
        return Verdict(False, f"symmetry: max |A - A^T| = {asym:.3e}")
    lo = a.min()
    if lo < -tol:
        return Verdict(False, f"nonnegativity: min entry {lo:.3e}")
    lam = np.linalg.eigvalsh(0.5 * (a + a.T)).min()
    if lam < -tol:
        return Verdict(False, f"PSD: min eigenvalue {lam:.3e}")
    return Verdict(True)


def _signs(x, d: int) -> np.ndarray:
    s = np.asarray(x)
    if s.shape != (d,) or not np.all(np.abs(s) == 1):
        raise ValidationError(f"sign vector must have length {d} with entries ±1")
    return s.astype(np.float64)


def cut_value(A: GridDistribution, x) -> CutWitness:
    s = _signs(x, A.d)
    # exactly rounded sum of ±A_ij, clipped against ulp-level overshoot of |form| <= sum(A) = 1
    q = min(1.0, max(-1.0, math.fsum((A.mass * np.outer(s, s)).ravel())))
    return CutWitness(tuple(int(v) for v in s), q, 0.5 - 0.5 * q)


def _exhaustive(a: np.ndarray) -> np.ndarray:
    d = a.shape[0]
    if d > LIMITS.max_exhaustive_cut_d:
        raise InfeasibleError(f"exhaustive cut search needs d <= {LIMITS.max_exhaustive_cut_d}, got d={d}")
    if d == 1:
        return np.ones(1)
    # x_0 = +1 fixed; the form is invariant under x -> -x
    total = 1 << (d - 1)
    shifts = np.arange(d - 1, dtype=np.int64)
    best_val, best_x = math.inf, None
    chunk = 1 << 15
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        bits = (codes[:, None] >> shifts) & 1
        X = np.ones((codes.size, d))
        X[:, 1:] = 1 - 2 * bits
        vals = np.einsum("ki,ij,kj->k", X, a, X)
        k = int(np.argmin(vals))
        if vals[k] < best_val:
            best_val, best_x = vals[k], X[k].copy()
    return best_x


def _local_search(a: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Steepest single-flip descent; ties go to the lowest index."""
    a = 0.5 * (a + a.T)
    off = a - np.diag(np.diag(a))
    x = x.copy()
    h = off @ x
    while True:
        gain = -4.0 * x * h  # change in x^T A x when flipping x_i
        i = int(np.argmin(gain))
        if gain[i] >= -1e-15:
            return x
        x[i] = -x[i]
        h += 2.0 * x[i] * off[:, i]


def best_cut(A: GridDistribution, mode: str = "exhaustive", rng: RandomStream | None = None,
             restarts: int = 64) -> CutWitness:
    """Sign vector minimising ``x^T A x``.

    ``exhaustive`` is exact for d <= 24. ``local-search`` runs ``restarts``
    randomly initialised steepest-descent passes, one sub-stream each, and
    keeps the first best.
    """
    a = A.mass
    if mode == "exhaustive":
        x = _exhaustive(a)
    elif mode == "local-search":
        if rng is None:
            raise ValidationError("local-search needs a RandomStream")
        best_val, x = math.inf, None
        for r in range(restarts):
            gen = rng.child("best_cut", r).generator()
            cand = _local_search(a, gen.choice(np.array([-1.0, 1.0]), size=A.d))
            val = cand @ a @ cand
            if val < best_val:
                best_val, x = val, cand
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    return cut_value(A, x)


def local_search_restart_values(A: GridDistribution, rng: RandomStream, restarts: int = 64) -> np.ndarray:
    """Per-restart local optima of ``x^T A x`` (for calibration runs)."""
    out = np.empty(restarts)
    for r in range(restarts):
        gen = rng.child("best_cut", r).generator()
        x = _local_search(A.mass, gen.choice(np.array([-1.0, 1.0]), size=A.d))
        out[r] = x @ A.mass @ x
    return out


def cp_farness_lower_bound(A: GridDistribution, witness: CutWitness) -> float:
    """Certified lower bound on ``min_B ||A - B||_1`` over CP distributions B."""
    q = cut_value(A, witness.signs).quad_form
    if abs(q - witness.quad_form) > 1e-12:
        raise ValidationError(f"stale witness: recorded {witness.quad_form!r}, recomputed {q!r}")
    return max(0.0, -q)


# ---- conditional-gradient upper bound ------------------------------------


def project_simplex(v: np.ndarray) -> np.ndarray:
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def _atom_candidates(R: np.ndarray, gen: np.random.Generator, iters: int) -> list[np.ndarray]:
    """Probability vectors aligned with the residual ``R``.

    Fixed candidates (vertices, edge midpoints, uniform, clipped top
    eigenvector) plus projected-gradient ascent runs on ``v^T R v``.
    """
    d = R.shape[0]
    cands = [np.eye(d)[i] for i in range(d)]
    for i in range(d):
        for j in range(i + 1, d):
            v = np.zeros(d)
            v[[i, j]] = 0.5
            cands.append(v)
    cands.append(np.full(d, 1.0 / d))
    _, vec = np.linalg.eigh(R)
    for sgn in (1.0, -1.0):
        top = np.maximum(sgn * vec[:, -1], 0)
        if top.sum() > 0:
            cands.append(top / top.sum())
    scores = [c @ R @ c / (c @ c) for c in cands]
    step = 1.0 / max(np.abs(R).sum(axis=1).max(), 1e-300)
    for v in (cands[int(np.argmax(scores))], project_simplex(gen.random(d))):
        for _ in range(iters):
            v = project_simplex(v + step * (R @ v))
        cands.append(v)
    return cands


def _refit(a: np.ndarray, atoms: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray, float]:
    design = np.stack([np.outer(u, u).ravel() for u in atoms], axis=1)
    w, res = nnls(design, a.ravel())
    return w, a - (design @ w).reshape(a.shape), float(res)


def cp_distance_upper_bound(A: GridDistribution, k: int = 16, iters: int = 200,
                            rng: RandomStream | None = None, shortlist: int = 6,
                            polish: bool = True) -> tuple[float, MixtureOfProducts]:
    """Greedy mixture-of-products fit; returns ``(||A - B||_1, B)``.

    Each round shortlists the atoms best aligned with the residual (by both
    ``v^T R v`` and ``v^T R v / |v|^2``), refits all weights by nonnegative
    least squares for each, and keeps the one with the smallest residual.
    With ``polish`` the best greedy mixture is then refined jointly as a
    nonnegative factorisation ``A ~ B B^T`` with ``k`` columns.
    Since ``B`` is CP, the returned distance upper-bounds the distance from
    ``A`` to the CP set.
    """
    if k < 1 or iters < 1:
        raise ValidationError("k and iters must be >= 1")
    gen = (rng or RandomStream(0)).child("cp_fit").generator()
    a = A.mass
    atoms: list[np.ndarray] = []
    best = (math.inf, None)
    R = a.copy()
    for _ in range(k):
        Rs = 0.5 * (R + R.T)
        cands = [c for c in _atom_candidates(Rs, gen, iters)
                 if not any(np.allclose(c, u, atol=1e-12) for u in atoms)]
        if not cands:
            break
        raw = np.array([c @ Rs @ c for c in cands])
        norm = raw / np.array([c @ c for c in cands])
        if norm.max() <= 1e-15:
            break
        picks = list(dict.fromkeys([*np.argsort(-norm, kind="stable")[:shortlist],
                                    *np.argsort(-raw, kind="stable")[:shortlist]]))
        trial = min(((_refit(a, atoms + [cands[i]]), i) for i in picks), key=lambda t: t[0][2])
        (w, R, _), i = trial
        atoms.append(cands[i])
        keep = w > 0
        if keep.any():
            mix = MixtureOfProducts(w[keep] / w[keep].sum(), np.array(atoms)[keep])
            dist = math.fsum(np.abs(a - mix.matrix()).ravel())
            if dist < best[0]:
                best = (dist, mix)
    if best[1] is None:
        mix = MixtureOfProducts(np.ones(1), np.full((1, A.d), 1.0 / A.d))
        best = (math.fsum(np.abs(a - mix.matrix()).ravel()), mix)
    if polish and best[0] > 0:
        cand = _polish(a, best[1], k, iters)
        if cand is not None and cand[0] < best[0]:
            best = cand
    return best


def _polish(a: np.ndarray, mix: MixtureOfProducts, k: int, iters: int):
    """Joint refinement of all factors: min ||A - B B^T||_F over B >= 0 with k columns."""
    d = a.shape[0]
    B = (mix.marginals * np.sqrt(mix.weights)[:, None]).T
    if B.shape[1] < k:  # pad with small copies of the uniform atom
        B = np.hstack([B, np.full((d, k - B.shape[1]), 1e-3 / d)])
    iu = np.triu_indices(d)

    def resid(b):
        M = b.reshape(d, -1)
        return (a - M @ M.T)[iu]

    try:
        sol = least_squares(resid, B.ravel(), bounds=(0.0, np.inf), method="trf",
                            xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max(50, 5 * iters))
    except ValueError:
        return None
    M = sol.x.reshape(d, -1)
    s = M.sum(axis=0)
    keep = s > 0
    if not keep.any():
        return None
    w = s[keep] ** 2
    out = MixtureOfProducts(w / w.sum(), (M[:, keep] / s[keep]).T)
    return math.fsum(np.abs(a - out.matrix()).ravel()), out
