"""Hard instances for testing complete positivity.

For a half-subset S of [d] the density ``phi_S`` (relative to the uniform
grid) is ``1 + eps`` on ``S x S^c ∪ S^c x S`` and ``1 - eps`` elsewhere. Its
normalisation ``A^S = phi_S / d^2`` is ``eps``-far from the CP set. ``D_n``
draws a uniform S and then n i.i.d. points from ``A^S``; its chi^2 distance
to the uniform product measure controls how many samples any tester needs.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import logsumexp

from .config import LIMITS
from .errors import InfeasibleError, ValidationError
from .prob import GridDistribution, SampleSeq, hypergeom_pmf
from .rng import RandomStream


def _check_even(d: int) -> None:
    if d < 2 or d % 2:
        raise ValidationError(f"d must be a positive even integer, got {d}; for odd d use d-1")


@dataclass(frozen=True)
class SubsetInstance:
    d: int
    S: tuple[int, ...]
    eps: float

    def __post_init__(self) -> None:
        _check_even(self.d)
        S = tuple(sorted(set(int(i) for i in self.S)))
        if len(S) != self.d // 2 or (S and (S[0] < 0 or S[-1] >= self.d)):
            raise ValidationError(f"S must be a subset of range({self.d}) of size {self.d // 2}")
        if not 0 < self.eps <= 0.5:
            raise ValidationError(f"eps must lie in (0, 1/2], got {self.eps}")
        object.__setattr__(self, "S", S)

    def chi(self) -> np.ndarray:
        """±1 indicator of S."""
        c = -np.ones(self.d)
        c[list(self.S)] = 1.0
        return c


@dataclass(frozen=True)
class MixtureDnSpec:
    d: int
    eps: float
    n: int

    def __post_init__(self) -> None:
        _check_even(self.d)
        if not 0 < self.eps <= 0.5:
            raise ValidationError(f"eps must lie in (0, 1/2], got {self.eps}")
        if self.n < 0:
            raise ValidationError(f"n must be >= 0, got {self.n}")


def phi_density(inst: SubsetInstance, point) -> float:
    i, j = point
    if not (0 <= i < inst.d and 0 <= j < inst.d):
        raise ValidationError(f"point {point} out of range")
    crossing = (i in inst.S) != (j in inst.S)
    return 1 + inst.eps if crossing else 1 - inst.eps


def phi_density_chi(inst: SubsetInstance, point) -> float:
    """Same density written as ``1 - chi_S(i) chi_S(j) eps``."""
    c = inst.chi()
    i, j = point
    return 1 - c[i] * c[j] * inst.eps


def phi_matrix(inst: SubsetInstance) -> np.ndarray:
    c = inst.chi()
    return 1 - inst.eps * np.outer(c, c)


def instance_matrix(inst: SubsetInstance) -> GridDistribution:
    return GridDistribution(phi_matrix(inst) / inst.d**2)


def half_subsets(d: int) -> list[tuple[int, ...]]:
    return list(itertools.combinations(range(d), d // 2))


@lru_cache(maxsize=8)
def _chi_table(d: int) -> np.ndarray:
    """±1 indicators of all half-subsets containing 0 (one of each S, S^c pair).

    Since phi_S = phi_{S^c}, averaging over this half of the subsets is exact.
    """
    if d > LIMITS.max_subset_enum_d:
        raise InfeasibleError(f"subset enumeration needs d <= {LIMITS.max_subset_enum_d}, got d={d}")
    rows = []
    for rest in itertools.combinations(range(1, d), d // 2 - 1):
        c = -np.ones(d)
        c[[0, *rest]] = 1.0
        rows.append(c)
    t = np.array(rows)
    t.setflags(write=False)
    return t


def sample_Dn(spec: MixtureDnSpec, rng: RandomStream | np.random.Generator) -> SampleSeq:
    d, n = spec.d, spec.n
    if n == 0:
        return SampleSeq(d)
    gen = rng.generator() if isinstance(rng, RandomStream) else rng
    return SampleSeq(d, _draw_Dn(gen, d, spec.eps, n, 1)[0])


def _draw_Dn(gen: np.random.Generator, d: int, eps: float, n: int, trials: int) -> np.ndarray:
    """``(trials, n, 2)`` array of sequences from D_n, one fresh S per trial.

    Given S, a point of A^S is a uniform pair of sides (crossing with
    probability (1+eps)/2) followed by uniform elements on each side.
    """
    h = d // 2
    perms = np.argsort(gen.random((trials, d)), axis=1)
    S, Sc = perms[:, :h], perms[:, h:]
    cross = gen.random((trials, n)) < (1 + eps) / 2
    first_in_S = gen.random((trials, n)) < 0.5
    a_idx = gen.integers(0, h, size=(trials, n))
    b_idx = gen.integers(0, h, size=(trials, n))
    second_in_S = np.where(cross, ~first_in_S, first_in_S)
    rows = np.arange(trials)[:, None]
    a = np.where(first_in_S, S[rows, a_idx], Sc[rows, a_idx])
    b = np.where(second_in_S, S[rows, b_idx], Sc[rows, b_idx])
    return np.stack([a, b], axis=-1)


def _log_dn_density_counts(d: int, eps: float, counts: np.ndarray, n: int) -> np.ndarray:
    """log phi for a batch of sequences given their ``(T, d, d)`` cell counts."""
    chi = _chi_table(d)
    # number of crossing points for each (sequence, subset): (n - chi^T C chi)/2
    form = np.einsum("si,tij,sj->ts", chi, counts, chi)
    k = np.rint((n - form) / 2)
    logs = k * math.log1p(eps) + (n - k) * math.log1p(-eps)
    return logsumexp(logs, axis=1) - math.log(chi.shape[0])


def dn_density(spec: MixtureDnSpec, seq: SampleSeq) -> float:
    """Density of ``seq`` under D_n with respect to the uniform product measure."""
    if seq.n != spec.n or seq.d != spec.d:
        raise ValidationError(f"sequence has (d, n) = ({seq.d}, {seq.n}), expected ({spec.d}, {spec.n})")
    if spec.n == 0:
        return 1.0
    chi = _chi_table(spec.d)
    a, b = seq.items[:, 0], seq.items[:, 1]
    prods = np.prod(1 - spec.eps * chi[:, a] * chi[:, b], axis=1)
    return math.fsum(prods) / chi.shape[0]


def exact_density_table(spec: MixtureDnSpec) -> np.ndarray:
    """phi(x) for every x in ([d]^2)^n, in row-major sequence order."""
    d, n = spec.d, spec.n
    if d ** (2 * n) > LIMITS.max_sequence_enum:
        raise InfeasibleError(f"d^(2n) = {d ** (2 * n)} exceeds {LIMITS.max_sequence_enum}")
    chi = _chi_table(d)
    total = np.zeros(d ** (2 * n))
    for c in chi:
        cell = (1 - spec.eps * np.outer(c, c)).ravel()
        prod = np.ones(1)
        for _ in range(n):
            prod = np.multiply.outer(prod, cell).ravel()
        total += prod
    return total / chi.shape[0]


def chi2_Dn_exact(spec: MixtureDnSpec) -> float:
    """Exact chi^2(D_n, U^n) = E_{S,S'}[(1 + eps^2 delta^2)^n] - 1, delta = 4r/d - 1.

    The overlap r = |S ∩ S'| is hypergeometric, so the pair average is a
    finite sum over r.
    """
    d, n, eps = spec.d, spec.n, spec.eps
    if d > LIMITS.max_subset_enum_d:
        raise InfeasibleError(f"exact chi^2 needs d <= {LIMITS.max_subset_enum_d}, got d={d}")
    terms = []
    for r in range(d // 2 + 1):
        delta = 4 * r / d - 1
        terms.append(hypergeom_pmf(d, r) * ((1 + eps * eps * delta * delta) ** n - 1))
    return math.fsum(terms)


def chi2_Dn_pairs(spec: MixtureDnSpec) -> float:
    """Same quantity as :func:`chi2_Dn_exact`, by direct enumeration of all (S, S') pairs."""
    subsets = [set(s) for s in half_subsets(spec.d)]
    terms = []
    for S in subsets:
        for T in subsets:
            delta = 4 * len(S & T) / spec.d - 1
            terms.append((1 + spec.eps**2 * delta**2) ** spec.n)
    return math.fsum(terms) / len(terms) - 1


def chi2_Dn_bound(spec: MixtureDnSpec) -> float | None:
    """1/(c - 1) with c = d/(4 n eps^2); None when c <= 1 (the bound diverges)."""
    if spec.n == 0:
        return 0.0
    c = spec.d / (4 * spec.n * spec.eps**2)
    if c <= 1:
        return None
    return 1.0 / (c - 1)


def sample_complexity_threshold(d: int, eps: float) -> int:
    """ceil(d / (16 eps^2))."""
    _check_even(d)
    if not 0 < eps <= 0.5:
        raise ValidationError(f"eps must lie in (0, 1/2], got {eps}")
    return math.ceil(d / (16 * eps * eps) - 1e-9)


def exact_tv_Dn(spec: MixtureDnSpec) -> float:
    """TV(D_n, U^n) = (1/2) E_U |phi - 1|, by enumerating every sequence."""
    if spec.n == 0:
        return 0.0
    table = exact_density_table(spec)
    return 0.5 * math.fsum(np.abs(table - 1)) / table.size


def likelihood_ratio_trial(spec: MixtureDnSpec, trials: int, gen: np.random.Generator) -> dict:
    """Monte Carlo advantage of the test "reject uniformity iff phi(x) > 1".

    Ties (phi exactly 1) accept uniformity and are counted separately.
    """
    d, n, eps = spec.d, spec.n, spec.eps
    if trials == 0:
        return {"advantage_mc": None, "advantage_stderr": None, "ties_mc": None}
    seq_d = _draw_Dn(gen, d, eps, n, trials)
    seq_u = gen.integers(0, d, size=(trials, n, 2))
    out = []
    ties = 0
    for seqs in (seq_d, seq_u):
        counts = np.zeros((trials, d * d))
        cells = seqs[..., 0] * d + seqs[..., 1]
        np.add.at(counts, (np.repeat(np.arange(trials), n), cells.ravel()), 1)
        logphi = _log_dn_density_counts(d, eps, counts.reshape(trials, d, d), n)
        ties += int(np.count_nonzero(logphi == 0))
        out.append(float(np.mean(logphi > 0)))
    p_d, p_u = out
    se = math.sqrt(p_d * (1 - p_d) / trials + p_u * (1 - p_u) / trials)
    return {"advantage_mc": p_d - p_u, "advantage_stderr": se, "ties_mc": ties / (2 * trials)}


def distinguishing_experiment(d: int, eps: float, n_grid, trials: int, rng: RandomStream) -> list[dict]:
    """One row per n: exact TV when enumerable, Monte Carlo advantage, chi^2 columns."""
    rows = []
    for n in n_grid:
        spec = MixtureDnSpec(d, eps, int(n))
        row: dict = {"n": spec.n}
        try:
            row["tv_exact"] = exact_tv_Dn(spec)
        except InfeasibleError:
            row["tv_exact"] = None
        if spec.n == 0:
            row.update(advantage_mc=0.0 if trials else None, advantage_stderr=0.0 if trials else None,
                       ties_mc=1.0 if trials else None)
        else:
            row.update(likelihood_ratio_trial(spec, trials, rng.child("cp-hardness", spec.n).generator()))
        try:
            row["chi2_exact"] = chi2_Dn_exact(spec)
        except InfeasibleError:
            row["chi2_exact"] = None
        bound = chi2_Dn_bound(spec)
        row["chi2_bound"] = bound
        row["tv_ceiling"] = None if bound is None else min(1.0, math.sqrt(bound / 2))
        row["threshold"] = sample_complexity_threshold(d, eps)
        rows.append(row)
    return rows
