"""Unlabeled weight recovery from count statistics alone (no side info).

Estimates the power sums m_p = sum_i c_i^p directly from the histogram
via unbiased factorial-moment U-statistics, converts them to elementary
symmetric coefficients with Newton's identities, and reads the weights
off as polynomial roots.  The largest root (real part) estimates the
fidelity.

The U-statistic sums over tuples of distinct outcome indices.  Rather
than enumerating tuples, each distinct-index sum is expanded over set
partitions of the index slots (inclusion-exclusion on coincidence
patterns), reducing everything to products of single-index sums that
cost O(support) each.  Exact for orders up to 8.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import EmptyDataError, InvalidInputError, NumericalError
from .model import BitstringHistogram

MAX_ORDER = 8


@dataclass(frozen=True)
class FactorialMoments:
    """Per-outcome factorial-moment values T for one order.

    Order 1 is the constant 1/d on every outcome; order r >= 2 is
    Y_j!/(n^r (Y_j - r)!) on the support and 0 elsewhere.
    """

    order: int
    d: int
    n: int
    indices: np.ndarray
    support_values: np.ndarray
    off_support_value: float


def factorial_moment_stats(y: BitstringHistogram, r: int) -> FactorialMoments:
    """Unbiased per-outcome estimates of (n theta_j / n)^r under Poisson counts."""
    if r < 1:
        raise InvalidInputError(f"factorial-moment order must be >= 1, got {r}")
    n = y.total
    if n == 0:
        raise EmptyDataError("histogram holds no samples")
    if r == 1:
        vals = np.full(y.indices.size, 1.0 / y.d)
        return FactorialMoments(1, y.d, n, y.indices, vals, 1.0 / y.d)
    counts = y.counts.astype(np.float64)
    vals = np.ones_like(counts)
    for t in range(r):
        vals *= np.maximum(counts - t, 0.0)
    vals /= float(n) ** r
    return FactorialMoments(r, y.d, n, y.indices, vals, 0.0)


def _exact_partitions(length: int) -> tuple[tuple[tuple[int, ...], ...], ...]:
    """All set partitions of range(length), as tuples of index blocks."""

    def rec(items: tuple[int, ...]):
        if not items:
            yield ()
            return
        first, rest = items[0], items[1:]
        for smaller in rec(rest):
            for i, block in enumerate(smaller):
                yield smaller[:i] + ((first,) + block,) + smaller[i + 1 :]
            yield ((first,),) + smaller

    return tuple(rec(tuple(range(length))))


@lru_cache(maxsize=MAX_ORDER + 1)
def _partitions_cached(length: int):
    return _exact_partitions(length)


def _type_vectors(p: int, level: int) -> list[tuple[int, ...]]:
    """Multiplicity vectors h with sum(h)=level and sum(i*h_i)=p."""
    out: list[tuple[int, ...]] = []

    def rec(remaining: int, parts_left: int, max_part: int, acc: list[int]):
        if parts_left == 0:
            if remaining == 0:
                h = [0] * p
                for part in acc:
                    h[part - 1] += 1
                out.append(tuple(h))
            return
        lo = max(1, remaining - max_part * (parts_left - 1))
        hi = min(max_part, remaining - (parts_left - 1))
        for part in range(lo, hi + 1):
            rec(remaining - part, parts_left - 1, part, acc + [part])

    rec(p, level, p, [])
    return out


def _distinct_index_sum(
    types: tuple[int, ...],
    d: int,
    t_support: dict[int, np.ndarray],
    cache: dict[tuple[int, ...], float],
) -> float:
    """Sum over distinct outcome tuples of prod_a T_{j_a, types[a]}.

    Expands over set partitions of the slots; a partition block B
    collapses its slots onto one outcome index and contributes the
    single-index sum S_B of the product of its T values, weighted by
    the Moebius factor (-1)^(|B|-1) (|B|-1)!.
    """

    def block_sum(type_tuple: tuple[int, ...]) -> float:
        got = cache.get(type_tuple)
        if got is not None:
            return got
        ones = sum(1 for t in type_tuple if t == 1)
        higher = [t for t in type_tuple if t >= 2]
        if not higher:
            # T_{j,1} = 1/d on every outcome, so the sum over all d
            # outcomes is exact without touching the support.
            val = float(d) ** (1 - len(type_tuple))
        else:
            vec = t_support[higher[0]].copy()
            for t in higher[1:]:
                vec = vec * t_support[t]
            val = float(vec.sum()) * float(d) ** (-ones)
        cache[type_tuple] = val
        return val

    total = 0.0
    for partition in _partitions_cached(len(types)):
        term = 1.0
        for block in partition:
            size = len(block)
            mobius = (-1.0) ** (size - 1) * math.factorial(size - 1)
            term *= mobius * block_sum(tuple(sorted(types[a] for a in block)))
        total += term
    return total


def _check_order(p: int, k: int, d: int) -> None:
    if not 1 <= p <= k:
        raise InvalidInputError(f"order p={p} must satisfy 1 <= p <= k={k}")
    if k > MAX_ORDER:
        raise InvalidInputError(f"component count k={k} exceeds the cap {MAX_ORDER}")
    if p > d:
        raise InvalidInputError(f"order p={p} exceeds the outcome count d={d}")


def cumulant_estimate(y: BitstringHistogram, p: int, k: int) -> float:
    """Unbiased estimate of the order-p cumulant of the mixed rate.

    Under the Poissonized model the outcome rates are i.i.d. across
    outcomes and their cumulants are proportional to the weight power
    sums; this returns the U-statistic whose expectation is that
    cumulant, computed exactly via the partition expansion.
    """
    _check_order(p, k, y.d)
    n = y.total
    if n == 0:
        raise EmptyDataError("histogram holds no samples")
    d = y.d
    t_support = {
        r: factorial_moment_stats(y, r).support_values for r in range(2, p + 1)
    }
    cache: dict[tuple[int, ...], float] = {}
    total = 0.0
    for level in range(1, p + 1):
        # (l-1)! (d-l)!/d! = (l-1)! / (d falling l), kept in float via
        # the stable ratio product.
        scale = math.factorial(level - 1)
        for t in range(level):
            scale /= d - t
        inner = 0.0
        for h in _type_vectors(p, level):
            types = tuple(
                t for t, mult in enumerate(h, start=1) for _ in range(mult)
            )
            denom = 1.0
            for i, mult in enumerate(h, start=1):
                denom *= math.factorial(i) ** mult * math.factorial(mult)
            inner += _distinct_index_sum(types, d, t_support, cache) / denom
        total += (-1.0) ** (level - 1) * scale * inner
    return math.factorial(p) * total


def moment_vector(y: BitstringHistogram, k: int) -> np.ndarray:
    """Power-sum estimates (m_1, ..., m_k); m_1 is identically 1.

    m_p = d^p xi_p/(p-1)! where xi_p is the cumulant estimate.  The
    p=1 entry reduces algebraically to exactly 1 for every histogram,
    so it is pinned rather than recomputed.
    """
    _check_order(1, k, y.d)
    if y.total == 0:
        raise EmptyDataError("histogram holds no samples")
    out = np.empty(k)
    out[0] = 1.0
    for p in range(2, k + 1):
        out[p - 1] = (
            float(y.d) ** p * cumulant_estimate(y, p, k) / math.factorial(p - 1)
        )
    return out


def newton_coefficients(m_hat: np.ndarray) -> np.ndarray:
    """Elementary symmetric coefficients (e_0..e_k) from power sums.

    Standard Newton recursion with unnormalized power sums:
    e_l = (1/l) sum_{j=1}^{l} (-1)^(j-1) e_{l-j} m_j.
    """
    m = np.asarray(m_hat, dtype=np.float64).reshape(-1)
    k = m.size
    if k < 1:
        raise InvalidInputError("need at least one power sum")
    e = np.zeros(k + 1)
    e[0] = 1.0
    for level in range(1, k + 1):
        acc = 0.0
        for j in range(1, level + 1):
            acc += (-1.0) ** (j - 1) * e[level - j] * m[j - 1]
        e[level] = acc / level
    return e


def power_sums_from_coefficients(e_hat: np.ndarray) -> np.ndarray:
    """Inverse Newton recursion: power sums from (e_0..e_k)."""
    e = np.asarray(e_hat, dtype=np.float64).reshape(-1)
    if e.size < 2 or e[0] != 1.0:
        raise InvalidInputError("coefficients must start with e_0 = 1")
    k = e.size - 1
    m = np.zeros(k)
    for level in range(1, k + 1):
        acc = (-1.0) ** (level - 1) * level * e[level]
        for j in range(1, level):
            acc += (-1.0) ** (j - 1) * e[j] * m[level - j - 1]
        m[level - 1] = acc
    return m


@dataclass(frozen=True)
class MomentEstimate:
    """Recovered unlabeled weights with the intermediate algebra kept."""

    m_hat: np.ndarray
    e_hat: np.ndarray
    roots: np.ndarray
    c_hat: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.m_hat, dtype=np.float64).reshape(-1)
        e = np.asarray(self.e_hat, dtype=np.float64).reshape(-1)
        roots = np.asarray(self.roots, dtype=np.complex128).reshape(-1)
        c = np.asarray(self.c_hat, dtype=np.float64).reshape(-1)
        # Snap the pinned leading entries so the invariants hold bit-exactly
        # even when the caller computed m_1 = sum(c) in floating point.
        if m.size < 1 or abs(m[0] - 1.0) > 1e-9:
            raise InvalidInputError("power sums must start with m_1 = 1")
        m[0] = 1.0
        if e.size != m.size + 1 or abs(e[0] - 1.0) > 1e-9:
            raise InvalidInputError("coefficients must be (e_0=1, ..., e_k)")
        e[0] = 1.0
        if roots.size != m.size or c.size != m.size:
            raise InvalidInputError("root/weight counts must equal k")
        for name, arr in (("m_hat", m), ("e_hat", e), ("c_hat", c)):
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "roots", roots)

    @property
    def k(self) -> int:
        return self.m_hat.size

    def to_json(self) -> dict:
        return {
            "m_hat": [float(v) for v in self.m_hat],
            "e_hat": [float(v) for v in self.e_hat],
            "roots": [[float(r.real), float(r.imag)] for r in self.roots],
            "c_hat": [float(v) for v in self.c_hat],
        }


def roots_and_estimate(
    e_hat: np.ndarray, m_hat: np.ndarray | None = None
) -> MomentEstimate:
    """Weights as roots of z^k + sum_j (-1)^j e_j z^(k-j).

    Roots come from the balanced companion-matrix eigenvalue solver;
    the weight estimates are the real parts sorted descending, with no
    clipping (reporting layers clamp, diagnostics stay raw).
    """
    e = np.asarray(e_hat, dtype=np.float64).reshape(-1)
    if e.size < 2 or abs(e[0] - 1.0) > 1e-9:
        raise InvalidInputError("coefficients must start with e_0 = 1")
    e[0] = 1.0
    k = e.size - 1
    if k > MAX_ORDER:
        raise InvalidInputError(f"degree {k} exceeds the cap {MAX_ORDER}")
    if m_hat is None:
        m = power_sums_from_coefficients(e)
        # The mixture weights sum to one identically, so the first power
        # sum is known, not estimated; externally perturbed coefficients
        # must not leak into the pinned entry.
        m[0] = 1.0
    else:
        m = np.asarray(m_hat, dtype=np.float64).reshape(-1)
        if m.size != k:
            raise InvalidInputError(f"got {m.size} power sums for degree {k}")
    signs = np.array([(-1.0) ** j for j in range(k + 1)])
    try:
        roots = np.roots(signs * e)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"companion eigenvalue solver failed on degree {k}: {exc}"
        ) from exc
    if roots.size < k:
        # Leading coefficient is 1, so this cannot drop degree; guard anyway.
        roots = np.concatenate([roots, np.zeros(k - roots.size, dtype=complex)])
    c_hat = np.sort(roots.real)[::-1]
    return MomentEstimate(m_hat=m, e_hat=e, roots=roots, c_hat=c_hat)


def moment_pipeline(y: BitstringHistogram, k: int) -> MomentEstimate:
    """Histogram to unlabeled weights in one step."""
    m = moment_vector(y, k)
    return roots_and_estimate(newton_coefficients(m), m)


def fidelity_estimate(me: MomentEstimate) -> float:
    """Largest recovered weight, clamped into [0, 1]."""
    return float(min(max(me.c_hat[0], 0.0), 1.0))


def sorted_loss(a: np.ndarray, b: np.ndarray) -> float:
    """Min-over-permutations l2 distance between weight multisets.

    For real vectors the optimal matching is sorted order against
    sorted order, so this is |sort(a) - sort(b)|_2.
    """
    a = np.sort(np.asarray(a, dtype=np.float64).reshape(-1))
    b = np.sort(np.asarray(b, dtype=np.float64).reshape(-1))
    if a.size != b.size:
        raise InvalidInputError(f"length mismatch {a.size} vs {b.size}")
    return float(np.linalg.norm(a - b))


def bell_polynomial(p: int, level: int, x: np.ndarray) -> float:
    """Partial exponential Bell polynomial B_{p,level}(x_1, ..., x_{p-level+1}).

    B_{p,l} = p! sum_h prod_i x_i^{h_i} / ((i!)^{h_i} h_i!) over
    multiplicity vectors h with sum h = l, sum i h_i = p.  Used for the
    cumulant algebra self-checks (B_{p,l}(a,..,a) = a^l S(p,l)).
    """
    if not 1 <= level <= p:
        raise InvalidInputError(f"need 1 <= level <= p, got ({p}, {level})")
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.size < p - level + 1:
        raise InvalidInputError(
            f"need at least {p - level + 1} arguments, got {x.size}"
        )
    total = 0.0
    for h in _type_vectors(p, level):
        term = 1.0
        for i, mult in enumerate(h, start=1):
            if mult:
                term *= x[i - 1] ** mult / (
                    math.factorial(i) ** mult * math.factorial(mult)
                )
        total += term
    return math.factorial(p) * total
