"""Packing of CP distributions that are hard to learn.

The off-diagonal pairs ``I = {(i, j): i < j}`` are split into a perfect
matching of ``m = |I|/2`` edges. Each edge carries a two-point mixture of
"pair products" ``q_(i,j)`` tilted by ``±eps`` according to one bit of a
codeword ``omega``; a diagonal correction then makes every member uniform
(3/(4d)) on the diagonal. Members are pairwise ``Δ eps/(4m)`` apart in TV
while their KL stays O(eps^2).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cpset import MixtureOfProducts
from .errors import ValidationError
from .prob import GridDistribution
from .rng import RandomStream

Pair = tuple[int, int]
Edge = tuple[Pair, Pair]

REJECTION_STALL = 10_000


def base_product(i: int, j: int, d: int) -> GridDistribution:
    """Mass 1/4 on (i,i), (i,j), (j,i), (j,j)."""
    if not 0 <= i < j < d:
        raise ValidationError(f"need 0 <= i < j < d, got ({i}, {j}) with d={d}")
    v = np.zeros(d)
    v[[i, j]] = 0.5
    return GridDistribution(np.outer(v, v))


def edge_pair(e: Edge, which: int, eps: float, d: int) -> GridDistribution:
    (p0, p1) = e
    hi, lo = (1 + eps) / 2, (1 - eps) / 2
    w0, w1 = (hi, lo) if which == 0 else (lo, hi)
    return GridDistribution(w0 * base_product(*p0, d).mass + w1 * base_product(*p1, d).mass)


def hamming(a: np.ndarray, b: np.ndarray) -> int:
    return int(np.count_nonzero(a != b))


def _min_code_distance(m: int) -> int:
    return math.ceil(0.4 * m - 1e-12)


def default_code_size(m: int) -> int:
    """Target code size growing like 2^(m/6)."""
    return max(2, int(2 ** (m / 6)))


def random_code(m: int, n_target: int, gen: np.random.Generator) -> tuple[np.ndarray, str]:
    """Codewords in {0,1}^m with pairwise Hamming distance >= 0.4 m.

    Uniform random candidates are accepted when far enough from every
    accepted word. After ``REJECTION_STALL`` consecutive rejections the best
    of a batch of candidates (largest minimum distance) is tried once; if
    it is still too close, construction stops short of ``n_target``.
    """
    dmin = _min_code_distance(m)
    code = [gen.integers(0, 2, size=m, dtype=np.int8)]
    method = "rejection"
    while len(code) < n_target:
        C = np.array(code)
        accepted = False
        for _ in range(REJECTION_STALL):
            cand = gen.integers(0, 2, size=m, dtype=np.int8)
            if np.count_nonzero(C != cand, axis=1).min() >= dmin:
                code.append(cand)
                accepted = True
                break
        if accepted:
            continue
        batch = gen.integers(0, 2, size=(4096, m), dtype=np.int8)
        dists = np.count_nonzero(batch[:, None, :] != C[None, :, :], axis=2).min(axis=1)
        k = int(np.argmax(dists))
        if dists[k] < dmin:
            break
        code.append(batch[k])
        method = "rejection+farthest-point"
    return np.array(code), method


@dataclass(eq=False)
class PackingEnsemble:
    d: int
    eps: float
    pairs: list[Pair]
    matching: list[Edge]
    code: np.ndarray
    n_target: int
    code_method: str = "rejection"
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def m(self) -> int:
        return len(self.matching)

    @property
    def N(self) -> int:
        return self.code.shape[0]

    @property
    def shortfall(self) -> int:
        return max(0, self.n_target - self.N)

    def tilde(self, omega) -> np.ndarray:
        """Uncorrected member: the equal mixture of the selected edge pairs."""
        omega = np.asarray(omega)
        d, eps = self.d, self.eps
        a = np.zeros((d, d))
        for (p0, p1), bit in zip(self.matching, omega):
            w0 = (1 + eps) / 2 if bit == 0 else (1 - eps) / 2
            for (i, j), w in ((p0, w0), (p1, 1 - w0)):
                a[np.ix_([i, j], [i, j])] += w / 4
        return a / self.m

    def diagonal_shift(self, omega) -> np.ndarray:
        """delta with tilde(i,i) = (1 + delta_i)/(2d)."""
        return 2 * self.d * np.diag(self.tilde(omega)) - 1

    def correction(self, omega) -> np.ndarray:
        """Diagonal distribution u with u(i,i) = (1 - delta_i/2)/d."""
        return np.diag((1 - self.diagonal_shift(omega) / 2) / self.d)

    def member(self, index: int) -> GridDistribution:
        if index not in self._cache:
            w = self.code[index]
            self._cache[index] = GridDistribution(0.5 * self.tilde(w) + 0.5 * self.correction(w))
        return self._cache[index]

    def member_mixture(self, index: int) -> MixtureOfProducts:
        """Explicit CP decomposition: pair products plus diagonal point masses."""
        w = self.code[index]
        d, eps, m = self.d, self.eps, self.m
        weights, marg = [], []
        for (p0, p1), bit in zip(self.matching, w):
            w0 = (1 + eps) / 2 if bit == 0 else (1 - eps) / 2
            for (i, j), c in ((p0, w0), (p1, 1 - w0)):
                v = np.zeros(d)
                v[[i, j]] = 0.5
                weights.append(c / (2 * m))
                marg.append(v)
        u = np.diag(self.correction(w))
        for i in range(d):
            weights.append(u[i] / 2)
            marg.append(np.eye(d)[i])
        return MixtureOfProducts(np.array(weights), np.array(marg))

    def to_dict(self, materialize: bool = False) -> dict:
        out = {
            "d": self.d,
            "eps": self.eps,
            "m": self.m,
            "matching": [[list(p0), list(p1)] for p0, p1 in self.matching],
            "code": self.code.astype(int).tolist(),
            "n_target": self.n_target,
            "code_method": self.code_method,
        }
        if materialize:
            out["distributions"] = [self.member(k).mass.tolist() for k in range(self.N)]
        return out


def build_packing(d: int, eps: float, N_target: int | None = None,
                  rng: RandomStream | None = None) -> PackingEnsemble:
    if d < 4 or d % 4:
        raise ValidationError(f"d must be a positive multiple of 4, got {d}")
    if not 0 < eps < 0.5:
        raise ValidationError(f"eps must lie in (0, 1/2), got {eps}")
    pairs = [(i, j) for i in range(d) for j in range(i + 1, d)]
    m = len(pairs) // 2
    matching = [(pairs[k], pairs[k + m]) for k in range(m)]
    if N_target is None:
        N_target = default_code_size(m)
    if N_target < 1:
        raise ValidationError("N_target must be >= 1")
    gen = (rng or RandomStream(0)).child("packing-code").generator()
    code, method = random_code(m, N_target, gen)
    ens = PackingEnsemble(d, eps, pairs, matching, code, N_target, method)
    for k in range(ens.N):
        delta = ens.diagonal_shift(code[k])
        if np.any(np.abs(delta) > eps + 1e-12) or abs(math.fsum(delta)) > 1e-9:
            raise AssertionError(f"diagonal shift out of range for codeword {k}")
    return ens


def packing_tv(ens: PackingEnsemble, a: int, b: int) -> float:
    """Closed form Δ(ω, ω') eps / (4m)."""
    return hamming(ens.code[a], ens.code[b]) * ens.eps / (4 * ens.m)


def packing_kl(ens: PackingEnsemble, a: int, b: int) -> float:
    """Closed form Δ(ω, ω') eps ln((1+eps)/(1-eps)) / (4m).

    Each differing edge moves mass ``eps/(8m)`` on four off-diagonal cells,
    two up and two down; summing over both triangles gives the 1/(4m) factor.
    """
    e = ens.eps
    return hamming(ens.code[a], ens.code[b]) * e * math.log((1 + e) / (1 - e)) / (4 * ens.m)


def upper_triangle_tv(p: GridDistribution, q: GridDistribution) -> float:
    """sum over i < j of |p_ij - q_ij| (equals TV when the diagonals agree and both are symmetric)."""
    iu = np.triu_indices(p.d, 1)
    return math.fsum(np.abs(p.mass[iu] - q.mass[iu]))


def fano_sample_bound(N: int, kl_max: float, fail_prob: float) -> int:
    """Samples needed to identify one of N hypotheses with error <= fail_prob.

    From Fano's inequality ``fail_prob >= 1 - (n kl_max + ln 2)/ln N``:
    ``n >= ((1 - fail_prob) ln N - ln 2) / kl_max``, clamped at 0.
    """
    if N < 2 or kl_max <= 0 or not 0 < fail_prob < 1:
        raise ValidationError("need N >= 2, kl_max > 0 and fail_prob in (0, 1)")
    return max(0, math.ceil(((1 - fail_prob) * math.log(N) - math.log(2)) / kl_max))


def max_pairwise_kl(ens: PackingEnsemble) -> float:
    C = ens.code
    dmax = max(hamming(C[a], C[b]) for a in range(ens.N) for b in range(a + 1, ens.N)) if ens.N > 1 else 0
    e = ens.eps
    return dmax * e * math.log((1 + e) / (1 - e)) / (4 * ens.m)


@dataclass(frozen=True)
class LearnerResult:
    n: int
    trials: int
    tv_mean: float
    tv_q10: float
    tv_q50: float
    tv_q90: float
    ident_error: float

    def as_row(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def plugin_learner_experiment(ens: PackingEnsemble, n_grid, trials: int, rng: RandomStream) -> list[LearnerResult]:
    """Empirical-distribution learner against a uniformly drawn code member.

    For each n: draw omega from the code, draw n samples, report the TV of
    the empirical distribution to the truth and whether the TV-nearest code
    member is the true one. n = 0 uses the uniform grid as the hypothesis.
    """
    members = np.array([ens.member(k).mass.ravel() for k in range(ens.N)])
    d2 = ens.d * ens.d
    out = []
    for n in n_grid:
        n = int(n)
        gen = rng.child("cp-learning", n).generator()
        tvs = np.empty(trials)
        wrong = 0
        for t in range(trials):
            k = int(gen.integers(ens.N))
            if n == 0:
                hyp = np.full(d2, 1.0 / d2)
            else:
                hyp = gen.multinomial(n, members[k]) / n
            dist = 0.5 * np.abs(members - hyp).sum(axis=1)
            tvs[t] = dist[k]
            # first minimum wins ties
            wrong += int(np.argmin(dist) != k)
        if trials:
            q10, q50, q90 = np.quantile(tvs, [0.1, 0.5, 0.9])
            res = LearnerResult(n, trials, float(tvs.mean()), float(q10), float(q50), float(q90), wrong / trials)
        else:
            nan = float("nan")
            res = LearnerResult(n, 0, nan, nan, nan, nan, nan)
        out.append(res)
    return out


def identification_knee(results: list[LearnerResult], level: float = 1 / 3) -> int | None:
    """Smallest n whose identification error falls below ``level``."""
    for r in results:
        if r.ident_error < level:
            return r.n
    return None

