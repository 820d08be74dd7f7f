"""Mixture model of noisy random-circuit sampling data.

The measured output distribution is modeled as a convex mixture
p(z) = sum_i c_i * pi_i(z), where row 0 of the distribution matrix is the
ideal circuit output, the remaining rows are per-error-trajectory output
distributions, and c holds the error weights.  This module owns the core
datatypes, the Dirichlet (Porter-Thomas) matrix generator, and the three
sampling schemes used to synthesize experiments.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import (
    InfeasibleMixtureError,
    InvalidInputError,
    UnsupportedRowKindError,
)
from .rng import make_rng

__all__ = [
    "ErrorKind",
    "ErrorLabel",
    "RowKind",
    "WeightConstraint",
    "DistributionMatrix",
    "ErrorWeights",
    "BitstringHistogram",
    "SideHistograms",
    "sample_dirichlet_matrix",
    "mixture_distribution",
    "sample_bitstrings_multinomial",
    "sample_bitstrings_poissonized",
    "sample_side_info",
]

PROB_ROW_RTOL = 1e-12
SIGNED_ROW_ATOL = 1e-12
SIMPLEX_ATOL = 1e-9
MIXTURE_FLOOR = -1e-9


class ErrorKind(enum.Enum):
    """Physical classification of a mixture component."""

    IDEAL = "Ideal"
    PAULI_X = "PauliX"
    PAULI_Y = "PauliY"
    PAULI_Z = "PauliZ"
    STATE_PREP = "StatePrep"
    DEPHASE_1Q = "Dephase1q"
    DEPHASE_2Q = "Dephase2q"
    FLIP_FLOP_2Q = "FlipFlop2q"
    READOUT_10 = "Readout10"
    READOUT_01 = "Readout01"
    DOUBLE_READOUT_1010 = "DoubleReadout1010"
    WHITE_NOISE = "WhiteNoise"
    CUSTOM = "Custom"


@dataclass(frozen=True)
class ErrorLabel:
    """Identifies one mixture component.

    Args:
        kind: The error class.
        qubits: Target qubit indices; empty for Ideal and WhiteNoise.
        layer: Circuit-layer index of the insertion, or None for
            state-prep, readout, white-noise, and layer-aggregated rows.
    """

    kind: ErrorKind
    qubits: tuple[int, ...] = ()
    layer: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if any(q < 0 for q in self.qubits):
            raise InvalidInputError(f"negative qubit index in {self.qubits}")
        if self.layer is not None and self.layer < 0:
            raise InvalidInputError(f"negative layer index {self.layer}")

    def to_json(self) -> dict:
        return {
            "kind": self.kind.value,
            "qubits": list(self.qubits),
            "layer": self.layer,
        }

    @staticmethod
    def from_json(obj: Mapping) -> "ErrorLabel":
        return ErrorLabel(
            kind=ErrorKind(obj["kind"]),
            qubits=tuple(obj.get("qubits", ())),
            layer=obj.get("layer"),
        )

    def __str__(self) -> str:
        parts = [self.kind.value]
        if self.qubits:
            parts.append("q" + ",".join(str(q) for q in self.qubits))
        if self.layer is not None:
            parts.append(f"L{self.layer}")
        return ":".join(parts)


class RowKind(enum.Enum):
    """Whether a matrix row is a distribution or a signed derivative row."""

    PROBABILITY = "Probability"
    SIGNED_PERTURBATION = "SignedPerturbation"


def _default_labels(k: int) -> tuple[ErrorLabel, ...]:
    labels = [ErrorLabel(ErrorKind.IDEAL)]
    labels += [ErrorLabel(ErrorKind.CUSTOM, qubits=(), layer=None) for _ in range(k - 1)]
    return tuple(labels)


@dataclass(frozen=True)
class DistributionMatrix:
    """k-by-d matrix whose rows are per-component output distributions.

    Probability rows are nonnegative and sum to 1 (relative tolerance
    1e-12); signed-perturbation rows (classical readout-error derivatives)
    sum to 0 within 1e-12 absolute.

    Args:
        rows: Array of shape (k, d), row-major, float64.
        labels: Per-row component labels; defaults to Ideal + Custom.
        row_kinds: Per-row kind; defaults to all Probability.
    """

    rows: np.ndarray
    labels: tuple[ErrorLabel, ...] = ()
    row_kinds: tuple[RowKind, ...] = ()

    def __post_init__(self):
        rows = np.ascontiguousarray(np.asarray(self.rows, dtype=np.float64))
        if rows.ndim != 2:
            raise InvalidInputError(f"rows must be 2-D, got shape {rows.shape}")
        k, d = rows.shape
        if k < 1:
            raise InvalidInputError("need at least one row (k >= 1)")
        if d < 2:
            raise InvalidInputError(f"outcome space must have d >= 2, got {d}")
        object.__setattr__(self, "rows", rows)
        labels = tuple(self.labels) if self.labels else _default_labels(k)
        kinds = (
            tuple(self.row_kinds)
            if self.row_kinds
            else (RowKind.PROBABILITY,) * k
        )
        if len(labels) != k or len(kinds) != k:
            raise InvalidInputError(
                f"got {len(labels)} labels / {len(kinds)} row kinds for k={k}"
            )
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "row_kinds", kinds)
        sums = rows.sum(axis=1)
        for i, kind in enumerate(kinds):
            if kind is RowKind.PROBABILITY:
                if rows[i].min() < 0:
                    raise InvalidInputError(
                        f"probability row {i} has negative entry {rows[i].min():.3e}"
                    )
                if abs(sums[i] - 1.0) > PROB_ROW_RTOL * max(1.0, abs(sums[i])):
                    raise InvalidInputError(
                        f"probability row {i} sums to {sums[i]!r}, expected 1"
                    )
            else:
                if abs(sums[i]) > SIGNED_ROW_ATOL:
                    raise InvalidInputError(
                        f"signed row {i} sums to {sums[i]:.3e}, expected 0"
                    )

    @property
    def k(self) -> int:
        return self.rows.shape[0]

    @property
    def d(self) -> int:
        return self.rows.shape[1]

    def all_probability(self) -> bool:
        return all(kind is RowKind.PROBABILITY for kind in self.row_kinds)


class WeightConstraint(enum.Enum):
    SIMPLEX = "Simplex"
    NONNEGATIVE_CONE = "NonnegativeCone"
    UNCONSTRAINED = "Unconstrained"


@dataclass(frozen=True)
class ErrorWeights:
    """Weight vector c over the mixture components.

    Args:
        values: Length-k float vector.
        labels: Per-entry component labels.
        constraint: Declared feasible set; validated on construction.
    """

    values: np.ndarray
    labels: tuple[ErrorLabel, ...] = ()
    constraint: WeightConstraint = WeightConstraint.UNCONSTRAINED

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.size < 1:
            raise InvalidInputError("weights must have at least one entry")
        object.__setattr__(self, "values", values)
        labels = tuple(self.labels) if self.labels else _default_labels(values.size)
        if len(labels) != values.size:
            raise InvalidInputError(
                f"got {len(labels)} labels for {values.size} weights"
            )
        object.__setattr__(self, "labels", labels)
        if self.constraint is WeightConstraint.SIMPLEX:
            if values.min() < -SIMPLEX_ATOL:
                raise InvalidInputError(
                    f"simplex weights must be nonnegative, min {values.min():.3e}"
                )
            if abs(values.sum() - 1.0) > SIMPLEX_ATOL:
                raise InvalidInputError(
                    f"simplex weights sum to {values.sum()!r}, expected 1"
                )
        elif self.constraint is WeightConstraint.NONNEGATIVE_CONE:
            if values.min() < -SIMPLEX_ATOL:
                raise InvalidInputError(
                    f"cone weights must be nonnegative, min {values.min():.3e}"
                )

    @property
    def k(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class BitstringHistogram:
    """Sparse histogram of measured outcomes.

    Stored as parallel sorted arrays (indices, counts); `total` is the
    number of samples.  Outcome indices read the bitstring little-endian:
    qubit 0 is the least significant bit.

    Args:
        d: Outcome-space size.
        indices: Sorted outcome indices with nonzero counts.
        counts: Positive counts aligned with `indices`.
    """

    d: int
    indices: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        d = int(self.d)
        if d < 1:
            raise InvalidInputError(f"d must be positive, got {d}")
        idx = np.asarray(self.indices, dtype=np.int64).reshape(-1)
        cnt = np.asarray(self.counts, dtype=np.int64).reshape(-1)
        if idx.size != cnt.size:
            raise InvalidInputError("indices and counts must align")
        if idx.size:
            order = np.argsort(idx, kind="stable")
            idx = idx[order]
            cnt = cnt[order]
            if idx[0] < 0 or idx[-1] >= d:
                raise InvalidInputError("outcome index out of range [0, d)")
            if np.any(np.diff(idx) == 0):
                raise InvalidInputError("duplicate outcome indices")
            if cnt.min() < 0:
                raise InvalidInputError("counts must be nonnegative")
            keep = cnt > 0
            idx, cnt = idx[keep], cnt[keep]
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "counts", cnt)

    @staticmethod
    def from_dict(d: int, counts: Mapping[int, int]) -> "BitstringHistogram":
        items = sorted(counts.items())
        idx = np.array([i for i, _ in items], dtype=np.int64)
        cnt = np.array([c for _, c in items], dtype=np.int64)
        return BitstringHistogram(d=d, indices=idx, counts=cnt)

    @staticmethod
    def from_dense(vec: np.ndarray) -> "BitstringHistogram":
        vec = np.asarray(vec)
        idx = np.nonzero(vec)[0]
        return BitstringHistogram(d=vec.size, indices=idx, counts=vec[idx])

    def as_dict(self) -> dict[int, int]:
        return {int(i): int(c) for i, c in zip(self.indices, self.counts)}

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.d, dtype=np.int64)
        dense[self.indices] = self.counts
        return dense

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def support_size(self) -> int:
        return int(self.indices.size)


@dataclass(frozen=True)
class SideHistograms:
    """Per-component reference histograms, m samples each.

    Args:
        histograms: One BitstringHistogram per mixture component, all with
            the same d and the same total m (m may be 0).
    """

    histograms: tuple[BitstringHistogram, ...]

    def __post_init__(self):
        hists = tuple(self.histograms)
        if not hists:
            raise InvalidInputError("need at least one side histogram")
        d = hists[0].d
        m = hists[0].total
        for h in hists[1:]:
            if h.d != d:
                raise InvalidInputError("side histograms disagree on d")
            if h.total != m:
                raise InvalidInputError(
                    f"side histograms have unequal totals ({h.total} vs {m})"
                )
        object.__setattr__(self, "histograms", hists)

    @property
    def k(self) -> int:
        return len(self.histograms)

    @property
    def d(self) -> int:
        return self.histograms[0].d

    @property
    def m(self) -> int:
        return self.histograms[0].total

    def __iter__(self):
        return iter(self.histograms)

    def __getitem__(self, i: int) -> BitstringHistogram:
        return self.histograms[i]


def sample_dirichlet_matrix(k: int, d: int, rng_seed: int) -> DistributionMatrix:
    """Draw k independent flat-Dirichlet rows over d outcomes.

    Each row is a vector of i.i.d. exponentials normalized to sum 1,
    which is the flat Dirichlet law and, entrywise, the Porter-Thomas
    law of deep-random-circuit output probabilities.

    Args:
        k: Number of rows (>= 1).
        d: Outcome-space size (>= 2).
        rng_seed: 64-bit seed; fixed seed gives a bit-identical matrix.

    Returns:
        A DistributionMatrix with all rows Probability.
    """
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    if d < 2:
        raise InvalidInputError(f"d must be >= 2, got {d}")
    rng = make_rng(rng_seed)
    rows = rng.standard_exponential(size=(k, d))
    rows /= rows.sum(axis=1, keepdims=True)
    return DistributionMatrix(rows=rows)


def mixture_distribution(pi: DistributionMatrix, c: ErrorWeights) -> np.ndarray:
    """Evaluate the mixture p = Pi^T c.

    Args:
        pi: Distribution matrix with k rows.
        c: Weight vector of matching length.

    Returns:
        Dense length-d vector.  When all rows are Probability and c is a
        simplex point, the result is a probability vector.

    Raises:
        InfeasibleMixtureError: If any output entry falls below -1e-9,
            which can only happen through signed rows with weights that
            are too large.
    """
    if c.k != pi.k:
        raise InvalidInputError(f"dimension mismatch: k={pi.k} rows, {c.k} weights")
    p = pi.rows.T @ c.values
    lo = p.min()
    if lo < MIXTURE_FLOOR:
        raise InfeasibleMixtureError(
            f"mixture has negative mass {lo:.3e} at outcome {int(p.argmin())}"
        )
    return p


def _checked_probability_vector(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64).reshape(-1)
    if p.size < 1:
        raise InvalidInputError("probability vector is empty")
    if p.min() < MIXTURE_FLOOR:
        raise InvalidInputError(f"negative probability {p.min():.3e}")
    s = p.sum()
    if abs(s - 1.0) > 1e-9:
        raise InvalidInputError(f"probabilities sum to {s!r}, expected 1")
    # Exact renormalization so numpy's multinomial never sees sum > 1.
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def sample_bitstrings_multinomial(
    p: np.ndarray, n: int, rng_seed: int
) -> BitstringHistogram:
    """Draw a size-n multinomial histogram from the distribution p.

    Args:
        p: Dense probability vector of length d.
        n: Number of samples (>= 0).
        rng_seed: 64-bit seed.

    Returns:
        Sparse histogram with total exactly n.
    """
    if n < 0:
        raise InvalidInputError(f"sample count must be >= 0, got {n}")
    q = _checked_probability_vector(p)
    rng = make_rng(rng_seed)
    dense = rng.multinomial(int(n), q)
    return BitstringHistogram.from_dense(dense)


def sample_bitstrings_poissonized(
    p: np.ndarray, n: float, rng_seed: int
) -> BitstringHistogram:
    """Draw independent Poisson(n * p_j) counts for every outcome.

    The total count is random with mean n; conditioned on the total this
    reproduces the multinomial model.

    Args:
        p: Dense probability vector of length d.
        n: Nonnegative rate multiplier.
        rng_seed: 64-bit seed.
    """
    if n < 0:
        raise InvalidInputError(f"rate must be >= 0, got {n}")
    q = _checked_probability_vector(p)
    rng = make_rng(rng_seed)
    dense = rng.poisson(float(n) * q)
    return BitstringHistogram.from_dense(dense)


def sample_side_info(
    pi: DistributionMatrix, m: int, rng_seed: int
) -> SideHistograms:
    """Draw m reference samples from every row of pi.

    Component i's histogram holds m multinomial draws from row i,
    emulating a clean reference device run m times per trajectory.

    Args:
        pi: Matrix whose rows are all Probability rows.
        m: Samples per component (m = 0 yields empty histograms).
        rng_seed: 64-bit seed; rows consume the stream in row order.

    Raises:
        UnsupportedRowKindError: If any row is a signed perturbation.
    """
    if m < 0:
        raise InvalidInputError(f"m must be >= 0, got {m}")
    if not pi.all_probability():
        raise UnsupportedRowKindError(
            "side information is only defined for probability rows"
        )
    rng = make_rng(rng_seed)
    hists = []
    for i in range(pi.k):
        if m == 0:
            hists.append(BitstringHistogram(d=pi.d, indices=[], counts=[]))
            continue
        row = pi.rows[i]
        dense = rng.multinomial(int(m), row / row.sum())
        hists.append(BitstringHistogram.from_dense(dense))
    return SideHistograms(histograms=tuple(hists))
