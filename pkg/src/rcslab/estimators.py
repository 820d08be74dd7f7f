"""Weight estimators for bitstring histograms against known or sampled rows.

Regime A (exact rows available): generalized cross-entropy benchmarking
estimator, ordinary least squares, hard/soft thresholding with optional
cross-validated tuning, multinomial MLE, and Poisson MLE with a ridge
penalty.  Regime B (per-component reference samples): collision
estimator, errors-in-variables least squares, and a variational EM
fixed-point solver.

All estimators are pure functions of their inputs; iterative solvers
report iteration counts, objective traces, and a convergence flag in
``Estimate.diagnostics``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import digamma

from .errors import (
    EmptyDataError,
    InfeasibleMixtureError,
    InvalidInputError,
    NeedsSideInfoError,
    UnsupportedRowKindError,
)
from .model import (
    BitstringHistogram,
    DistributionMatrix,
    ErrorLabel,
    ErrorWeights,
    RowKind,
    SideHistograms,
    WeightConstraint,
)
from .rng import derive_seed, make_rng


@dataclass(frozen=True)
class CrossValidated:
    """Marker requesting data-driven threshold selection.

    Args:
        grid: Candidate thresholds; None derives candidates from the
            fold estimates' own values.
        seed: Seed for the random fold split.
    """

    grid: tuple[float, ...] | None = None
    seed: int = 0


@dataclass(frozen=True)
class EstimatorConfig:
    """Shared knobs for the iterative and thresholded estimators.

    Args:
        threshold: Fixed threshold, a CrossValidated marker, or None.
        cv_folds: Fold count for threshold selection.
        max_iter: Iteration cap for iterative solvers.
        tol: Convergence tolerance on the L1 parameter change.
        ridge: Quadratic penalty weight for the Poisson MLE.
        start: Optional start point for iterative solvers.
    """

    threshold: float | CrossValidated | None = None
    cv_folds: int = 2
    max_iter: int = 1000
    tol: float = 1e-10
    ridge: float = 1e-8
    start: np.ndarray | None = None

    def __post_init__(self):
        if isinstance(self.threshold, (int, float)) and self.threshold < 0:
            raise InvalidInputError(f"threshold must be >= 0, got {self.threshold}")
        if self.cv_folds < 2:
            raise InvalidInputError(f"cv_folds must be >= 2, got {self.cv_folds}")
        if self.max_iter < 1:
            raise InvalidInputError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol <= 0:
            raise InvalidInputError(f"tol must be > 0, got {self.tol}")
        if self.ridge < 0:
            raise InvalidInputError(f"ridge must be >= 0, got {self.ridge}")


DEFAULT_CONFIG = EstimatorConfig()


@dataclass(frozen=True)
class Estimate:
    """Fitted weights plus optional uncertainty and solver diagnostics."""

    values: ErrorWeights
    stderr: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.stderr is not None:
            se = np.asarray(self.stderr, dtype=np.float64).reshape(-1)
            if se.size != self.values.k:
                raise InvalidInputError(
                    f"stderr length {se.size} does not match k={self.values.k}"
                )
            if np.any(se < 0):
                raise InvalidInputError("stderr entries must be >= 0")
            object.__setattr__(self, "stderr", se)

    def to_json(self) -> dict:
        return {
            "labels": [lab.to_json() for lab in self.values.labels],
            "values": [float(v) for v in self.values.values],
            "constraint": self.values.constraint.value,
            "stderr": None
            if self.stderr is None
            else [float(s) for s in self.stderr],
            "diagnostics": _json_safe(self.diagnostics),
        }

    @staticmethod
    def from_json(obj: dict) -> "Estimate":
        try:
            weights = ErrorWeights(
                np.asarray(obj["values"], dtype=np.float64),
                labels=tuple(ErrorLabel.from_json(lab) for lab in obj["labels"]),
                constraint=WeightConstraint(obj["constraint"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidInputError(f"malformed estimate document: {exc}") from exc
        stderr = obj.get("stderr")
        return Estimate(
            values=weights,
            stderr=None if stderr is None else np.asarray(stderr, dtype=np.float64),
            diagnostics=dict(obj.get("diagnostics", {})),
        )


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_safe(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


# ---------------------------------------------------------------------------
# Shared helpers


def _require_matching(pi: DistributionMatrix, y: BitstringHistogram) -> None:
    if pi.d != y.d:
        raise InvalidInputError(f"matrix d={pi.d} does not match histogram d={y.d}")


def _require_counts(y: BitstringHistogram) -> int:
    n = y.total
    if n == 0:
        raise EmptyDataError("histogram holds no samples")
    return n


def _support_matrix(
    pi: DistributionMatrix, y: BitstringHistogram
) -> tuple[np.ndarray, np.ndarray, int]:
    """Rows restricted to y's support, plus counts and total."""
    _require_matching(pi, y)
    n = _require_counts(y)
    cols = pi.rows[:, y.indices]
    return cols, y.counts.astype(np.float64), n


def _counts_on_support(
    hist: BitstringHistogram, indices: np.ndarray
) -> np.ndarray:
    """hist's counts at the given sorted outcome indices (0 elsewhere)."""
    pos = np.searchsorted(hist.indices, indices)
    pos = np.minimum(pos, max(len(hist.indices) - 1, 0))
    if len(hist.indices) == 0:
        return np.zeros(len(indices))
    hit = hist.indices[pos] == indices
    out = np.where(hit, hist.counts[pos], 0)
    return out.astype(np.float64)


def project_to_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u - css / np.arange(1, v.size + 1) > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


# ---------------------------------------------------------------------------
# Regime A: linear estimators


def xeb_estimate(pi: DistributionMatrix, y: BitstringHistogram) -> Estimate:
    """Per-component benchmarking estimator d*mean(pi_i(z)) - 1.

    Unbiased on Dirichlet-average rows; for a fixed matrix the expected
    value picks up the deterministic row-overlap bias.  Runs over the
    histogram support only.  The reported stderr is the per-sample
    standard deviation of d*pi_i(z) divided by sqrt(n).
    """
    cols, w, n = _support_matrix(pi, y)
    d = pi.d
    per_sample = d * cols
    mean = per_sample @ w / n
    values = mean - 1.0
    second = (per_sample**2) @ w / n
    var = np.maximum(second - mean**2, 0.0)
    stderr = np.sqrt(var / n)
    return Estimate(
        values=ErrorWeights(values, pi.labels, WeightConstraint.UNCONSTRAINED),
        stderr=stderr,
        diagnostics={"n": n, "support": int(y.support_size)},
    )


def ols_estimate(
    pi: DistributionMatrix, y: BitstringHistogram, *, ridge: float = 0.0
) -> Estimate:
    """Least-squares regression of the histogram onto the rows.

    Solves (Pi Pi^T) c = Pi Y / n, which is exactly unbiased for c
    conditional on the matrix.  ``ridge`` adds a diagonal boost relative
    to the mean diagonal of Pi Pi^T for near-collinear rows.
    """
    if ridge < 0:
        raise InvalidInputError(f"ridge must be >= 0, got {ridge}")
    cols, w, n = _support_matrix(pi, y)
    gram = pi.rows @ pi.rows.T
    if ridge > 0:
        gram = gram + ridge * (np.trace(gram) / pi.k) * np.eye(pi.k)
    b = cols @ w / n
    try:
        values = np.linalg.solve(gram, b)
    except np.linalg.LinAlgError as exc:
        raise InvalidInputError(
            f"row Gram matrix is singular; pass ridge > 0 ({exc})"
        ) from exc
    return Estimate(
        values=ErrorWeights(values, pi.labels, WeightConstraint.UNCONSTRAINED),
        diagnostics={"n": n, "ridge": float(ridge)},
    )


def _apply_threshold(values: np.ndarray, lam: float, mode: str) -> np.ndarray:
    if lam == 0.0:
        return values.copy()
    if mode == "hard":
        return np.where(values > lam, values, 0.0)
    if mode == "soft":
        return np.maximum(values - lam, 0.0)
    raise InvalidInputError(f"unknown threshold mode {mode!r}")


def threshold(est: Estimate, config: EstimatorConfig, *, mode: str = "hard") -> Estimate:
    """Sparsify an estimate with a resolved threshold.

    Hard mode zeroes entries at or below the threshold; soft mode
    shrinks every entry down by the threshold and clamps at 0.  A zero
    threshold disables sparsification and returns the values unchanged.
    Data-driven selection happens in select_threshold; this operation
    requires a concrete number.
    """
    lam = config.threshold
    if lam is None or isinstance(lam, CrossValidated):
        raise InvalidInputError(
            "threshold() needs a resolved numeric threshold; run select_threshold first"
        )
    out = _apply_threshold(est.values.values, float(lam), mode)
    diag = dict(est.diagnostics)
    diag.update({"threshold": float(lam), "threshold_mode": mode})
    return Estimate(
        values=ErrorWeights(out, est.values.labels, est.values.constraint),
        stderr=est.stderr,
        diagnostics=diag,
    )


def _split_histogram(
    y: BitstringHistogram, folds: int, seed: int
) -> list[BitstringHistogram]:
    """Multinomially thin the histogram into equal-rate folds."""
    rng = make_rng(seed)
    assign = rng.multinomial(y.counts, np.full(folds, 1.0 / folds))
    out = []
    for f in range(folds):
        cts = assign[:, f]
        keep = cts > 0
        out.append(
            BitstringHistogram(
                d=y.d, indices=y.indices[keep], counts=cts[keep]
            )
        )
    return out


def _merge_histograms(parts: Sequence[BitstringHistogram], d: int) -> BitstringHistogram:
    acc: dict[int, int] = {}
    for part in parts:
        for idx, cnt in zip(part.indices.tolist(), part.counts.tolist()):
            acc[idx] = acc.get(idx, 0) + cnt
    return BitstringHistogram.from_dict(d, acc)


def select_threshold(
    pi: DistributionMatrix,
    y: BitstringHistogram,
    config: EstimatorConfig = DEFAULT_CONFIG,
    *,
    mode: str = "hard",
) -> tuple[float, dict]:
    """Cross-validated threshold for the benchmarking estimator.

    Samples are split into ``config.cv_folds`` folds by multinomial
    thinning.  Each fold's complement yields a thresholded estimate
    whose quadratic risk is scored against the raw held-out estimate via
    the unbiased proxy |c_t|^2 - 2<c_t, c_raw>; scores add over folds
    and ties break toward the larger (sparser) threshold.
    """
    spec = config.threshold
    cv = spec if isinstance(spec, CrossValidated) else CrossValidated()
    folds = _split_histogram(y, config.cv_folds, derive_seed(cv.seed, "cv-split"))
    if any(f.total == 0 for f in folds):
        raise EmptyDataError(
            f"too few samples ({y.total}) to split into {config.cv_folds} folds"
        )
    train_ests = []
    val_ests = []
    for i in range(config.cv_folds):
        rest = [f for j, f in enumerate(folds) if j != i]
        train = rest[0] if len(rest) == 1 else _merge_histograms(rest, y.d)
        train_ests.append(xeb_estimate(pi, train).values.values)
        val_ests.append(xeb_estimate(pi, folds[i]).values.values)
    if cv.grid is not None:
        candidates = np.asarray(sorted(set(float(g) for g in cv.grid)))
    else:
        vals = np.concatenate(train_ests)
        candidates = np.unique(np.concatenate([[0.0], vals[vals > 0]]))
    scores = np.zeros(candidates.size)
    for train_v, val_v in zip(train_ests, val_ests):
        for a, lam in enumerate(candidates):
            t = _apply_threshold(train_v, float(lam), mode)
            scores[a] += float(t @ t - 2.0 * (t @ val_v))
    best = scores.min()
    chosen = float(candidates[scores <= best + 1e-15][-1])
    return chosen, {
        "mode": mode,
        "folds": config.cv_folds,
        "candidates": int(candidates.size),
        "best_score": float(best),
    }


def xeb_thresholded(
    pi: DistributionMatrix,
    y: BitstringHistogram,
    config: EstimatorConfig = DEFAULT_CONFIG,
    *,
    mode: str = "hard",
) -> Estimate:
    """Benchmarking estimate with a fixed or cross-validated threshold."""
    est = xeb_estimate(pi, y)
    lam = config.threshold
    diag_extra: dict = {}
    if lam is None or isinstance(lam, CrossValidated):
        lam, cv_diag = select_threshold(pi, y, config, mode=mode)
        diag_extra["cv"] = cv_diag
    resolved = EstimatorConfig(
        threshold=float(lam),
        cv_folds=config.cv_folds,
        max_iter=config.max_iter,
        tol=config.tol,
        ridge=config.ridge,
    )
    out = threshold(est, resolved, mode=mode)
    out.diagnostics.update(diag_extra)
    return out


# ---------------------------------------------------------------------------
# Regime A: likelihood estimators


def mle_multinomial(
    pi: DistributionMatrix,
    y: BitstringHistogram,
    config: EstimatorConfig = DEFAULT_CONFIG,
) -> Estimate:
    """Maximum-likelihood simplex weights via multiplicative ascent.

    Iterates x_i <- x_i * mean_j[Y_j pi_ij / (Pi^T x)_j] / n, which is
    an EM step: the multinomial log-likelihood is non-decreasing every
    iteration and the simplex is preserved exactly.  Only supported
    outcomes enter the objective.
    """
    if not pi.all_probability():
        raise UnsupportedRowKindError(
            "multinomial MLE requires Probability rows only"
        )
    cols, w, n = _support_matrix(pi, y)
    k = pi.k
    if k == 1:
        return Estimate(
            values=ErrorWeights(np.array([1.0]), pi.labels, WeightConstraint.SIMPLEX),
            diagnostics={"iterations": 0, "objective": [], "converged": True},
        )
    if np.any((cols.max(axis=0) == 0.0) & (w > 0)):
        raise InfeasibleMixtureError(
            "observed outcome has zero probability under every component"
        )
    if config.start is not None:
        x = np.asarray(config.start, dtype=np.float64).copy()
        if x.size != k or x.min() < 0 or abs(x.sum() - 1.0) > 1e-9:
            raise InvalidInputError("start must be a length-k simplex vector")
    else:
        x = np.full(k, 1.0 / k)
    trace: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        mix = cols.T @ x
        trace.append(float(w @ np.log(mix)))
        x_new = x * (cols @ (w / mix)) / n
        x_new /= x_new.sum()
        delta = float(np.abs(x_new - x).sum())
        x = x_new
        if delta <= config.tol:
            converged = True
            break
    trace.append(float(w @ np.log(cols.T @ x)))
    return Estimate(
        values=ErrorWeights(x, pi.labels, WeightConstraint.SIMPLEX),
        diagnostics={
            "iterations": iterations,
            "objective": trace,
            "converged": converged,
        },
    )


def mle_poisson_ridge(
    pi: DistributionMatrix,
    y: BitstringHistogram,
    config: EstimatorConfig = DEFAULT_CONFIG,
) -> Estimate:
    """Poissonized MLE with a ridge penalty over the nonnegative cone.

    Maximizes sum_j [Y_j log((Pi^T x)_j)] - n * sum_i x_i * rowsum_i -
    ridge * |x|^2 by projected gradient ascent with backtracking.  The
    linear term collapses to the probability-row coordinates since
    signed perturbation rows sum to zero, so no dense pass over the
    outcome space is needed.
    """
    _require_matching(pi, y)
    cols = pi.rows[:, y.indices]
    w = y.counts.astype(np.float64)
    n = y.total
    k = pi.k
    # Semantic row sums: exactly 1 for probability rows, 0 for signed.
    rowsum = np.array(
        [1.0 if rk is RowKind.PROBABILITY else 0.0 for rk in pi.row_kinds]
    )
    ridge = config.ridge

    def objective(x: np.ndarray) -> float:
        lin = -float(n * (rowsum @ x)) - ridge * float(x @ x)
        if w.size == 0:
            return lin
        mix = cols.T @ x
        if np.any(mix <= 0):
            return -np.inf
        return float(w @ np.log(mix)) + lin

    def gradient(x: np.ndarray) -> np.ndarray:
        g = -n * rowsum - 2.0 * ridge * x
        if w.size:
            mix = cols.T @ x
            g = g + cols @ (w / mix)
        return g

    if config.start is not None:
        x = np.maximum(np.asarray(config.start, dtype=np.float64).copy(), 0.0)
        if x.size != k:
            raise InvalidInputError(f"start must have length {k}")
    else:
        n_prob = int(rowsum.sum())
        x = np.zeros(k)
        if n_prob and n:
            # Start with unit total rate spread over the probability rows.
            x[rowsum > 0] = 1.0 / n_prob
    f = objective(x)
    if not np.isfinite(f):
        # Uniform fallback over all coordinates, then give up.
        x = np.full(k, 1.0 / k)
        f = objective(x)
        if not np.isfinite(f):
            raise InfeasibleMixtureError(
                "no positive-likelihood start point found in the cone"
            )
    trace = [f]
    step = 1.0
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        g = gradient(x)
        step = min(step * 2.0, 1e12)
        while True:
            x_new = np.maximum(x + step * g, 0.0)
            f_new = objective(x_new)
            gain = g @ (x_new - x)
            if np.isfinite(f_new) and f_new >= f + 1e-4 * gain:
                break
            step *= 0.5
            if step < 1e-18:
                x_new, f_new = x, f
                break
        delta = float(np.abs(x_new - x).sum())
        x, f = x_new, f_new
        trace.append(f)
        if delta <= config.tol * max(1.0, float(np.abs(x).sum())):
            converged = True
            break
    return Estimate(
        values=ErrorWeights(x, pi.labels, WeightConstraint.NONNEGATIVE_CONE),
        diagnostics={
            "iterations": iterations,
            "objective": trace,
            "converged": converged,
            "ridge": float(ridge),
        },
    )


# ---------------------------------------------------------------------------
# Regime B: side-information estimators


def _require_side_info(y: BitstringHistogram, v: SideHistograms) -> tuple[int, int]:
    if v.d != y.d:
        raise InvalidInputError(f"side info d={v.d} does not match data d={y.d}")
    if v.m == 0:
        raise NeedsSideInfoError("side information holds no reference samples")
    return _require_counts(y), v.m


def collision_estimate(y: BitstringHistogram, v: SideHistograms) -> Estimate:
    """Per-component weights from data/reference outcome collisions.

    c_i = (d+1)/(n m) * sum_j Y_j V_ij - 1.  The (d+1) factor makes the
    estimator exactly unbiased when both sides draw from flat-Dirichlet
    rows.  Work is linear in the support sizes; the dense outcome space
    is never materialized.  stderr is the per-sample deviation across
    data draws, conditional on the reference samples.
    """
    n, m = _require_side_info(y, v)
    d = y.d
    scale = (d + 1.0) / m
    values = np.empty(v.k)
    stderr = np.empty(v.k)
    for i, hist in enumerate(v):
        per_sample = scale * _counts_on_support(hist, y.indices)
        mean = float(per_sample @ y.counts) / n
        second = float((per_sample**2) @ y.counts) / n
        values[i] = mean - 1.0
        stderr[i] = np.sqrt(max(second - mean**2, 0.0) / n)
    return Estimate(
        values=ErrorWeights(values, constraint=WeightConstraint.UNCONSTRAINED),
        stderr=stderr,
        diagnostics={"n": n, "m": m},
    )


def _side_counts_matrix(v: SideHistograms, indices: np.ndarray) -> np.ndarray:
    """Stacked reference counts at the given outcome indices (k x s)."""
    return np.stack([_counts_on_support(h, indices) for h in v])


def eiv_least_squares(
    y: BitstringHistogram,
    v: SideHistograms,
    *,
    simplex: bool = False,
    config: EstimatorConfig = DEFAULT_CONFIG,
) -> Estimate:
    """Errors-in-variables least squares against sampled rows.

    Minimizes x^T A x - 2 Y^T V^T x / (n m) where A is the posterior
    second-moment matrix of the rows given the reference counts:
    A_il = mu_i . mu_l + delta_il * [(d+m) |V_i + 1|_1 - |V_i + 1|_2^2]
    / [(d+m)^2 (d+m+1)] with mu_i = (V_i + 1)/(d+m).  The unconstrained
    minimizer is A^{-1} V Y/(n m); the simplex solve runs projected
    gradient descent from the uniform point.
    """
    n, m = _require_side_info(y, v)
    d, k = y.d, v.k
    dm = float(d + m)
    # Pairwise mu dot products via sparse intersections:
    # (V_i+1).(V_l+1) = V_i.V_l + m + m + d.
    gram = np.empty((k, k))
    sq_norm = np.empty(k)
    for i, hist_i in enumerate(v):
        sq_norm[i] = float(hist_i.counts @ hist_i.counts)
        for l in range(i, k):
            hist_l = v[l]
            common, pos_i, pos_l = np.intersect1d(
                hist_i.indices, hist_l.indices, assume_unique=True, return_indices=True
            )
            dot = float(hist_i.counts[pos_i] @ hist_l.counts[pos_l])
            gram[i, l] = gram[l, i] = (dot + 2.0 * m + d) / dm**2
    diag_corr = (dm * (m + d) - (sq_norm + 2.0 * m + d)) / (dm**2 * (dm + 1.0))
    a_mat = gram + np.diag(diag_corr)
    b = _side_counts_matrix(v, y.indices) @ y.counts.astype(np.float64) / (n * m)
    diagnostics: dict = {"n": n, "m": m, "regularized": False}
    try:
        unconstrained = np.linalg.solve(a_mat, b)
    except np.linalg.LinAlgError:
        a_mat = a_mat + 1e-12 * np.eye(k)
        diagnostics["regularized"] = True
        unconstrained = np.linalg.solve(a_mat, b)
    if not simplex:
        return Estimate(
            values=ErrorWeights(
                unconstrained, constraint=WeightConstraint.UNCONSTRAINED
            ),
            diagnostics=diagnostics,
        )
    if k == 1:
        return Estimate(
            values=ErrorWeights(np.array([1.0]), constraint=WeightConstraint.SIMPLEX),
            diagnostics={**diagnostics, "iterations": 0, "converged": True},
        )
    lips = 2.0 * float(np.linalg.norm(a_mat, 2))
    step = 1.0 / lips if lips > 0 else 1.0
    x = np.full(k, 1.0 / k)
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        grad = 2.0 * (a_mat @ x) - 2.0 * b
        x_new = project_to_simplex(x - step * grad)
        delta = float(np.abs(x_new - x).sum())
        x = x_new
        if delta <= config.tol:
            converged = True
            break
    diagnostics.update({"iterations": iterations, "converged": converged})
    return Estimate(
        values=ErrorWeights(x, constraint=WeightConstraint.SIMPLEX),
        diagnostics=diagnostics,
    )


def variational_em(
    y: BitstringHistogram,
    v: SideHistograms,
    config: EstimatorConfig = DEFAULT_CONFIG,
) -> Estimate:
    """Mean-field EM fixed point for simplex weights given side counts.

    With S_ij = exp(psi(1 + V_ij)) (psi the digamma function), iterates
    x_i <- (x_i/n) * sum_j Y_j S_ij / (sum_r x_r S_rj) over the data
    support.  The update preserves the simplex; the variational free
    entropy (up to x-independent terms, sum_j Y_j log (S^T x)_j) is
    non-decreasing and recorded per iteration.  Zero reference counts
    are allowed: with no side information the update is the identity.
    """
    if v.d != y.d:
        raise InvalidInputError(f"side info d={v.d} does not match data d={y.d}")
    n = _require_counts(y)
    k = v.k
    w = y.counts.astype(np.float64)
    s_mat = np.exp(digamma(1.0 + _side_counts_matrix(v, y.indices)))
    if config.start is not None:
        x = np.asarray(config.start, dtype=np.float64).copy()
        if x.size != k or x.min() < 0 or abs(x.sum() - 1.0) > 1e-9:
            raise InvalidInputError("start must be a length-k simplex vector")
    else:
        x = np.full(k, 1.0 / k)
    trace: list[float] = []
    converged = False
    iterations = 0
    for iterations in range(1, config.max_iter + 1):
        mix = s_mat.T @ x
        trace.append(float(w @ np.log(mix)))
        x_new = (x / n) * (s_mat @ (w / mix))
        delta = float(np.abs(x_new - x).sum())
        x = x_new
        if delta <= config.tol:
            converged = True
            break
    trace.append(float(w @ np.log(s_mat.T @ x)))
    return Estimate(
        values=ErrorWeights(x, constraint=WeightConstraint.SIMPLEX),
        diagnostics={
            "iterations": iterations,
            "objective": trace,
            "converged": converged,
            "m": v.m,
        },
    )
