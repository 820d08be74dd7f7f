"""Statistical harnesses on top of the estimators.

Four tools live here: a parametric-bootstrap test for time dependence of
the learned layer rates, a correlated-error matrix that contrasts pair
rates with the product of the matching single-qubit rates, a chi-squared
goodness-of-fit check with a bootstrap null, and a Monte Carlo risk
sweep that measures estimator accuracy across sample-size grids.

Every randomized routine takes one master seed and derives per-replicate
seeds through a documented splitting scheme, so results are reproducible
bit for bit regardless of thread count.
"""

from __future__ import annotations

import csv
from collections.abc import Callable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy.linalg

from .circuits import CircuitSpec, ErrorModelSpec, build_pi_matrix, resolve_threads
from .errors import (
    EmptyDataError,
    IncompleteModelError,
    InfeasibleMixtureError,
    InvalidInputError,
    ResourceError,
)
from .estimators import (
    CrossValidated,
    DEFAULT_CONFIG,
    Estimate,
    EstimatorConfig,
    collision_estimate,
    eiv_least_squares,
    mle_multinomial,
    mle_poisson_ridge,
    ols_estimate,
    variational_em,
    xeb_estimate,
    xeb_thresholded,
)
from .model import (
    BitstringHistogram,
    DistributionMatrix,
    ErrorKind,
    ErrorWeights,
    WeightConstraint,
    mixture_distribution,
    sample_bitstrings_multinomial,
    sample_bitstrings_poissonized,
    sample_dirichlet_matrix,
    sample_side_info,
)
from .moments import moment_pipeline, sorted_loss
from .rng import derive_seed, make_rng

# Dense work above this many matrix entries is refused outright; the
# sweep is meant for desk-scale grids, not cluster jobs.
MAX_SWEEP_ENTRIES = 2**28

LOW_BOOTSTRAP_COUNT = 50


def _layer_rate_pairs(
    estimates_by_layer: Mapping[int, float] | Sequence[float],
) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(estimates_by_layer, Mapping):
        layers = sorted(int(t) for t in estimates_by_layer)
        rates = [float(estimates_by_layer[t]) for t in layers]
        return np.array(layers, dtype=np.float64), np.array(rates)
    rates = np.asarray(list(estimates_by_layer), dtype=np.float64).reshape(-1)
    return np.arange(rates.size, dtype=np.float64), rates


def line_slope(layers: np.ndarray, rates: np.ndarray) -> float:
    """Least-squares slope of rates against layer index.

    Centered form, so exactly constant rates give a slope of exactly
    zero with no cancellation residue.
    """
    t = np.asarray(layers, dtype=np.float64)
    r = np.asarray(rates, dtype=np.float64)
    tc = t - t.mean()
    rc = r - r.mean()
    denom = float(tc @ tc)
    if denom == 0.0:
        raise InvalidInputError("layer indices are all identical")
    return float(tc @ rc) / denom


def layer_mean_rates(
    weights: ErrorWeights, *, kinds: frozenset[ErrorKind] | None = None
) -> dict[int, float]:
    """Average the estimated weights per circuit layer.

    Entries whose label carries no layer index (ideal, readout,
    white-noise, aggregated rows) are skipped.

    Args:
        weights: Labeled estimate vector.
        kinds: Optional restriction to these error kinds.
    """
    sums: dict[int, float] = {}
    counts: dict[int, int] = {}
    for lab, val in zip(weights.labels, weights.values):
        if lab.layer is None:
            continue
        if kinds is not None and lab.kind not in kinds:
            continue
        sums[lab.layer] = sums.get(lab.layer, 0.0) + float(val)
        counts[lab.layer] = counts.get(lab.layer, 0) + 1
    return {t: sums[t] / counts[t] for t in sorted(sums)}


@dataclass(frozen=True)
class GradientTestResult:
    """Outcome of the layer-rate trend test.

    Args:
        beta_hat: Fitted slope of layer-mean rate against layer index.
        null_betas: Slopes re-fitted on the bootstrap null datasets.
        p_value: Fraction of null slopes at least as extreme as beta_hat.
        ci: 95% interval of the null slope distribution.
        diagnostics: Warnings and bookkeeping.
    """

    beta_hat: float
    null_betas: np.ndarray
    p_value: float
    ci: tuple[float, float]
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        nb = np.asarray(self.null_betas, dtype=np.float64).reshape(-1)
        object.__setattr__(self, "null_betas", nb)
        if not 0.0 <= self.p_value <= 1.0:
            raise InvalidInputError(f"p-value {self.p_value} outside [0, 1]")

    def to_json(self) -> dict:
        lo, hi = self.ci
        return {
            "beta_hat": float(self.beta_hat),
            "null_betas": [float(b) for b in self.null_betas],
            "p_value": float(self.p_value),
            "ci": [None if np.isnan(v) else float(v) for v in (lo, hi)],
            "diagnostics": dict(self.diagnostics),
        }


def gradient_test(
    estimates_by_layer: Mapping[int, float] | Sequence[float],
    n_boot: int = 500,
    rng_seed: int = 0,
    generator: Callable[[int], Mapping[int, float] | Sequence[float]] | None = None,
    *,
    one_sided: bool = False,
) -> GradientTestResult:
    """Test whether layer-mean error rates drift with circuit depth.

    The observed slope comes from an unweighted least-squares line fit
    (per-layer standard errors are close to equal in the intended use,
    so weighting is deliberately omitted). The null distribution comes
    from re-running the caller's full estimation pipeline on synthetic
    time-independent data: `generator(seed)` must return layer rates in
    the same shape as `estimates_by_layer`.

    Args:
        estimates_by_layer: Layer -> rate mapping, or a rate sequence
            indexed by layer.
        n_boot: Bootstrap replicate count; zero skips the null entirely.
        rng_seed: Master seed; replicate b uses the derived seed
            (rng_seed, "gradient-null", b).
        generator: Null-dataset pipeline callback; required when
            n_boot >= 1.
        one_sided: Test only for growing rates (beta > 0) instead of the
            default two-sided alternative.
    """
    layers, rates = _layer_rate_pairs(estimates_by_layer)
    if layers.size < 3:
        raise InvalidInputError(f"need >= 3 layers, got {layers.size}")
    if n_boot < 0:
        raise InvalidInputError(f"n_boot must be >= 0, got {n_boot}")
    if n_boot >= 1 and generator is None:
        raise InvalidInputError("bootstrap requested but no null generator given")
    beta_hat = line_slope(layers, rates)

    null_betas = np.zeros(n_boot)
    for b in range(n_boot):
        null = generator(derive_seed(rng_seed, "gradient-null", b))
        t_b, r_b = _layer_rate_pairs(null)
        null_betas[b] = line_slope(t_b, r_b)

    warnings = []
    if n_boot < LOW_BOOTSTRAP_COUNT:
        warnings.append(
            f"only {n_boot} bootstrap replicates; p-value resolution is coarse"
        )
    if n_boot == 0:
        p_value = 1.0
        ci = (float("nan"), float("nan"))
    else:
        if one_sided:
            p_value = float(np.mean(null_betas >= beta_hat))
        else:
            p_value = float(np.mean(np.abs(null_betas) >= abs(beta_hat)))
        lo, hi = np.quantile(null_betas, [0.025, 0.975])
        ci = (float(lo), float(hi))
    return GradientTestResult(
        beta_hat=beta_hat,
        null_betas=null_betas,
        p_value=p_value,
        ci=ci,
        diagnostics={
            "n_boot": n_boot,
            "one_sided": one_sided,
            "layers": [float(t) for t in layers],
            "warnings": warnings,
        },
    )


def null_rates_from_fit(weights: ErrorWeights) -> ErrorWeights:
    """Time-independent null model: layered rates averaged across layers.

    Entries sharing (kind, qubits) but differing in layer are replaced
    by their common mean; everything else passes through. This is the
    fitted null used to generate bootstrap datasets for gradient_test.
    """
    groups: dict[tuple, list[int]] = {}
    for i, lab in enumerate(weights.labels):
        if lab.layer is not None:
            groups.setdefault((lab.kind, lab.qubits), []).append(i)
    values = weights.values.copy()
    for members in groups.values():
        values[members] = values[members].mean()
    return replace(weights, values=values, constraint=WeightConstraint.UNCONSTRAINED)


_GRADIENT_FITTERS = {
    "xeb": lambda pi, y, config: xeb_estimate(pi, y),
    "ols": lambda pi, y, config: ols_estimate(pi, y, ridge=config.ridge),
    "mle": mle_multinomial,
    "mle-poisson": mle_poisson_ridge,
}


def _pipeline_fitter(
    method: str, pi: DistributionMatrix, config: EstimatorConfig
) -> Callable[[BitstringHistogram], ErrorWeights]:
    """Per-dataset refit closure for the gradient pipeline.

    The bootstrap refits the same matrix hundreds of times, so for OLS
    the k x k Gram factorization is hoisted out of the per-replicate
    loop; only the right-hand side depends on the data.
    """
    if method == "ols":
        gram = pi.rows @ pi.rows.T
        if config.ridge > 0:
            gram = gram + config.ridge * (np.trace(gram) / pi.k) * np.eye(pi.k)
        try:
            factor = scipy.linalg.cho_factor(gram)
        except scipy.linalg.LinAlgError as exc:
            raise InvalidInputError(
                f"row Gram matrix is singular; pass ridge > 0 ({exc})"
            ) from exc

        def fit_ols(y: BitstringHistogram) -> ErrorWeights:
            if y.total <= 0:
                raise EmptyDataError("histogram has no counts")
            b = pi.rows[:, y.indices] @ (y.counts / y.total)
            values = scipy.linalg.cho_solve(factor, b)
            return ErrorWeights(values, pi.labels, WeightConstraint.UNCONSTRAINED)

        return fit_ols
    fitter = _GRADIENT_FITTERS[method]
    return lambda y: fitter(pi, y, config).values


def gradient_test_pipeline(
    pi: DistributionMatrix,
    y: BitstringHistogram,
    *,
    method: str = "ols",
    config: EstimatorConfig = DEFAULT_CONFIG,
    n_boot: int = 500,
    rng_seed: int = 0,
    kinds: frozenset[ErrorKind] | None = None,
    one_sided: bool = False,
) -> GradientTestResult:
    """Full time-dependence test: fit, build the null, bootstrap, test.

    The observed slope comes from fitting `method` on (pi, y) and
    averaging rates per layer. The null model freezes those rates to
    their cross-layer means; each bootstrap replicate resamples a
    same-size dataset from it and repeats the whole fit, so the null
    slopes carry the estimator's own noise.

    Args:
        pi: Component matrix with layered labels.
        y: Observed histogram.
        method: One of xeb, ols, mle, mle-poisson.
        config: Estimator knobs shared by the fit and the refits.
        n_boot: Bootstrap replicate count.
        rng_seed: Master seed for the bootstrap draws.
        kinds: Restrict the layer averages to these error kinds.
        one_sided: Test only for growing rates.
    """
    if method not in _GRADIENT_FITTERS:
        raise InvalidInputError(
            f"method {method!r} not in {sorted(_GRADIENT_FITTERS)}"
        )
    fitter = _pipeline_fitter(method, pi, config)
    fit = fitter(y)
    observed = layer_mean_rates(fit, kinds=kinds)
    if len(observed) < 3:
        raise InvalidInputError(
            f"need >= 3 layers with layered labels, got {len(observed)}"
        )
    null_weights = null_rates_from_fit(fit)
    q = pi.rows.T @ null_weights.values
    q = np.clip(q, 0.0, None)
    if q.sum() <= 0:
        raise InfeasibleMixtureError("null mixture has no positive mass")
    q = q / q.sum()
    n = y.total

    def generator(seed: int) -> dict[int, float]:
        y_b = sample_bitstrings_multinomial(q, n, seed)
        return layer_mean_rates(fitter(y_b), kinds=kinds)

    return gradient_test(
        observed, n_boot, rng_seed, generator, one_sided=one_sided
    )


_PAIRABLE_KINDS = frozenset(
    {ErrorKind.PAULI_X, ErrorKind.PAULI_Y, ErrorKind.PAULI_Z, ErrorKind.CUSTOM}
)


def correlated_error_matrix(
    estimate: ErrorWeights | Estimate,
    *,
    kinds: frozenset[ErrorKind] | None = None,
    n_qubits: int | None = None,
) -> np.ndarray:
    """Excess pair rates c_uv - c_u * c_v as a symmetric qubit matrix.

    Rates are aggregated over layers before comparison. Only error
    kinds that occur with both one- and two-qubit supports participate
    by default (the Pauli kinds and Custom); bond-specific kinds such
    as two-qubit dephasing have no single-qubit counterpart and are
    ignored. The diagonal is undefined and set to zero.

    Args:
        estimate: Labeled weights containing pair and single entries.
        kinds: Restrict the pair kinds considered; None means the
            default pairable set.
        n_qubits: Matrix dimension; None infers it from the labels.

    Raises:
        IncompleteModelError: A considered pair lacks the single-qubit
            rate of the same kind on one of its members.
    """
    weights = estimate.values if isinstance(estimate, Estimate) else estimate
    wanted = _PAIRABLE_KINDS if kinds is None else kinds
    singles: dict[tuple[ErrorKind, int], float] = {}
    pairs: dict[tuple[ErrorKind, int, int], float] = {}
    for lab, val in zip(weights.labels, weights.values):
        if lab.kind not in wanted:
            continue
        if len(lab.qubits) == 1:
            key = (lab.kind, lab.qubits[0])
            singles[key] = singles.get(key, 0.0) + float(val)
        elif len(lab.qubits) == 2:
            u, v = sorted(lab.qubits)
            if u == v:
                raise InvalidInputError(f"pair label {lab} repeats a qubit")
            pairs[(lab.kind, u, v)] = pairs.get((lab.kind, u, v), 0.0) + float(val)
    if n_qubits is None:
        seen = [q for _, q in singles] + [q for _, u, v in pairs for q in (u, v)]
        n_qubits = max(seen) + 1 if seen else 0
    out = np.zeros((n_qubits, n_qubits))
    for (kind, u, v), c_uv in pairs.items():
        if max(u, v) >= n_qubits:
            raise InvalidInputError(f"qubit {max(u, v)} outside n_qubits={n_qubits}")
        try:
            c_u = singles[(kind, u)]
            c_v = singles[(kind, v)]
        except KeyError as exc:
            raise IncompleteModelError(
                f"pair ({u},{v}) of kind {kind.value} lacks a single-qubit "
                f"rate on qubit {exc.args[0][1]}"
            ) from exc
        excess = c_uv - c_u * c_v
        out[u, v] += excess
        out[v, u] += excess
    return out


@dataclass(frozen=True)
class GofResult:
    """Chi-squared goodness-of-fit summary against a bootstrap null."""

    chi2_obs: float
    null_mean: float
    null_sd: float
    p_value: float
    n_boot: int
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.p_value <= 1.0:
            raise InvalidInputError(f"p-value {self.p_value} outside [0, 1]")

    def to_json(self) -> dict:
        return {
            "chi2_obs": float(self.chi2_obs),
            "null_mean": float(self.null_mean),
            "null_sd": float(self.null_sd),
            "p_value": float(self.p_value),
            "n_boot": int(self.n_boot),
            "diagnostics": dict(self.diagnostics),
        }


def chi2_statistic(
    pi: DistributionMatrix,
    y: BitstringHistogram,
    weights: ErrorWeights,
    *,
    intensity: float | None = None,
) -> float:
    """Pearson chi-squared over all d cells of the fitted Poisson model.

    Args:
        pi: Component matrix.
        y: Observed histogram.
        weights: Fitted mixture weights.
        intensity: Expected total count; defaults to the observed total.

    Raises:
        InfeasibleMixtureError: The fitted mixture is not strictly
            positive on every cell.
    """
    if pi.d != y.d:
        raise InvalidInputError(f"dimension mismatch: pi d={pi.d}, y d={y.d}")
    q = mixture_distribution(pi, weights)
    if np.any(q <= 0.0):
        bad = int(np.argmin(q))
        raise InfeasibleMixtureError(
            f"fitted rate is not strictly positive (cell {bad}); "
            "include a flat floor component"
        )
    n = float(y.total if intensity is None else intensity)
    if n <= 0:
        raise EmptyDataError("chi-squared needs a positive expected total")
    expected = n * q
    dense = y.to_dense().astype(np.float64)
    return float(np.sum((dense - expected) ** 2 / expected))


def chi2_gof(
    pi: DistributionMatrix,
    y: BitstringHistogram,
    fitted: Estimate,
    n_boot: int = 1000,
    rng_seed: int = 0,
    *,
    refit: Callable[[DistributionMatrix, BitstringHistogram], Estimate] | None = None,
) -> GofResult:
    """Parametric-bootstrap goodness-of-fit test for a fitted mixture.

    Synthetic datasets are drawn from the fitted Poissonized model at
    the observed intensity; each is refitted (so the null accounts for
    the estimation step) and its statistic recomputed.

    Args:
        pi: Component matrix.
        y: Observed histogram.
        fitted: The estimate whose fit quality is being tested.
        n_boot: Bootstrap replicates; at least 100.
        rng_seed: Master seed; replicate b derives (rng_seed, "gof", b).
        refit: Estimator to rerun on each synthetic draw; defaults to
            the simplex maximum-likelihood fit, whose mixture stays
            strictly positive whenever the rows are. Use the same
            method that produced `fitted` for a calibrated null.
    """
    if n_boot < 100:
        raise InvalidInputError(f"n_boot must be >= 100, got {n_boot}")
    if refit is None:
        refit = mle_multinomial
    n = float(y.total)
    chi2_obs = chi2_statistic(pi, y, fitted.values, intensity=n)
    q = mixture_distribution(pi, fitted.values)

    null = np.zeros(n_boot)
    for b in range(n_boot):
        seed_b = derive_seed(rng_seed, "gof", b)
        # The fitted model is a Poisson intensity field n*q; q need not
        # be normalized (unconstrained fits), so draw cells directly.
        dense_b = make_rng(seed_b).poisson(n * q)
        y_b = BitstringHistogram.from_dense(dense_b)
        fit_b = refit(pi, y_b)
        null[b] = chi2_statistic(pi, y_b, fit_b.values, intensity=n)
    return GofResult(
        chi2_obs=chi2_obs,
        null_mean=float(null.mean()),
        null_sd=float(null.std(ddof=1)),
        p_value=float(np.mean(null >= chi2_obs)),
        n_boot=n_boot,
        diagnostics={"intensity": n, "refit": getattr(refit, "__name__", "custom")},
    )


@dataclass(frozen=True)
class SweepScenario:
    """Declarative description of a Monte Carlo risk sweep.

    Args:
        estimators: Method names from the sweep registry (see
            SWEEP_METHODS).
        cells: Grid points, each a mapping with n, k, d and optional m.
        replicates: Independent repetitions per cell and method.
        truth: Truth-generation mode. {"mode": "dirichlet", "c": [...]}
            fixes the weight vector; {"mode": "dirichlet", "c1": 0.5}
            fixes the first weight and draws the rest uniformly on the
            remaining simplex per replicate; {"mode": "circuit",
            "circuit": {...}, "model": {...}, "c": [...]} builds the
            component matrix from a circuit instead of Dirichlet rows.
        sampling: "multinomial" (exactly n draws) or "poisson".
        config: Keyword overrides for EstimatorConfig; the special
            value {"threshold": "cv"} requests cross-validated
            threshold selection with a per-replicate derived seed.
        master_seed: Root of the seed-derivation tree.
        name: Tag echoed into outputs.
    """

    estimators: tuple[str, ...]
    cells: tuple[Mapping, ...]
    replicates: int
    truth: Mapping
    sampling: str = "multinomial"
    config: Mapping = field(default_factory=dict)
    master_seed: int = 0
    name: str = "sweep"

    def __post_init__(self):
        if not self.estimators:
            raise InvalidInputError("scenario lists no estimators")
        unknown = [e for e in self.estimators if e not in SWEEP_METHODS]
        if unknown:
            raise InvalidInputError(f"unknown estimator names: {unknown}")
        if self.replicates < 0:
            raise InvalidInputError("replicates must be >= 0")
        if self.sampling not in ("multinomial", "poisson"):
            raise InvalidInputError(f"unknown sampling mode {self.sampling!r}")
        mode = self.truth.get("mode")
        if mode not in ("dirichlet", "circuit"):
            raise InvalidInputError(f"unknown truth mode {mode!r}")
        if mode == "dirichlet" and ("c" in self.truth) == ("c1" in self.truth):
            raise InvalidInputError("dirichlet truth needs exactly one of c, c1")
        if mode == "circuit" and "c" not in self.truth:
            raise InvalidInputError("circuit truth needs an explicit c vector")
        object.__setattr__(self, "estimators", tuple(self.estimators))
        object.__setattr__(self, "cells", tuple(dict(c) for c in self.cells))

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "estimators": list(self.estimators),
            "cells": [dict(c) for c in self.cells],
            "replicates": self.replicates,
            "truth": dict(self.truth),
            "sampling": self.sampling,
            "config": dict(self.config),
            "master_seed": self.master_seed,
        }

    @staticmethod
    def from_json(obj: Mapping) -> "SweepScenario":
        return SweepScenario(
            estimators=tuple(obj["estimators"]),
            cells=tuple(obj["cells"]),
            replicates=int(obj["replicates"]),
            truth=dict(obj["truth"]),
            sampling=obj.get("sampling", "multinomial"),
            config=dict(obj.get("config", {})),
            master_seed=int(obj.get("master_seed", 0)),
            name=obj.get("name", "sweep"),
        )


@dataclass(frozen=True)
class RiskCell:
    """One (estimator, grid point) aggregate of the sweep."""

    estimator: str
    n: int
    m: int
    k: int
    d: int
    replicates: int
    mean_error: float
    se_error: float
    mean_sq_error: float
    se_sq_error: float
    empty: bool = False


@dataclass(frozen=True)
class RiskCurve:
    """Risk-sweep results plus the scenario needed to reproduce them."""

    cells: tuple[RiskCell, ...]
    scenario: SweepScenario

    def __post_init__(self):
        for cell in self.cells:
            if not cell.empty and (cell.mean_error < 0 or cell.se_error < 0):
                raise InvalidInputError("risk aggregates must be >= 0")

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [
                    "estimator", "n", "m", "k", "d", "replicates",
                    "mean_error", "se_error", "mean_sq_error", "se_sq_error",
                    "empty",
                ]
            )
            for cell in self.cells:
                stats = [
                    cell.mean_error, cell.se_error,
                    cell.mean_sq_error, cell.se_sq_error,
                ]
                writer.writerow(
                    [cell.estimator, cell.n, cell.m, cell.k, cell.d, cell.replicates]
                    + ["" if np.isnan(v) else repr(float(v)) for v in stats]
                    + [int(cell.empty)]
                )

    def to_json(self) -> dict:
        def num(v):
            return None if np.isnan(v) else float(v)

        return {
            "scenario": self.scenario.to_json(),
            "cells": [
                {
                    "estimator": c.estimator, "n": c.n, "m": c.m, "k": c.k,
                    "d": c.d, "replicates": c.replicates,
                    "mean_error": num(c.mean_error), "se_error": num(c.se_error),
                    "mean_sq_error": num(c.mean_sq_error),
                    "se_sq_error": num(c.se_sq_error), "empty": c.empty,
                }
                for c in self.cells
            ],
        }


def _scenario_config(scenario: SweepScenario, cv_seed: int) -> EstimatorConfig:
    kwargs = dict(scenario.config)
    if kwargs.get("threshold") == "cv":
        kwargs["threshold"] = CrossValidated(seed=cv_seed)
    return replace(DEFAULT_CONFIG, **kwargs)


def _needs_side_info(method: str) -> bool:
    return method in ("collision", "eiv", "eiv-simplex", "vem")


def _run_method(
    method: str,
    pi: DistributionMatrix,
    y: BitstringHistogram,
    v,
    c_true: np.ndarray,
    config: EstimatorConfig,
) -> np.ndarray:
    if method == "oracle":
        return c_true.copy()
    if method == "xeb":
        return xeb_estimate(pi, y).values.values
    if method == "xeb-ht":
        return xeb_thresholded(pi, y, config, mode="hard").values.values
    if method == "xeb-st":
        return xeb_thresholded(pi, y, config, mode="soft").values.values
    if method == "ols":
        return ols_estimate(pi, y, ridge=config.ridge).values.values
    if method == "mle":
        return mle_multinomial(pi, y, config).values.values
    if method == "mle-poisson":
        return mle_poisson_ridge(pi, y, config).values.values
    if method == "collision":
        return collision_estimate(y, v).values.values
    if method == "eiv":
        return eiv_least_squares(y, v, config=config).values.values
    if method == "eiv-simplex":
        return eiv_least_squares(y, v, simplex=True, config=config).values.values
    if method == "vem":
        return variational_em(y, v, config).values.values
    if method == "moments":
        return moment_pipeline(y, pi.k).c_hat
    raise InvalidInputError(f"unknown estimator name {method!r}")


SWEEP_METHODS = (
    "oracle", "xeb", "xeb-ht", "xeb-st", "ols", "mle", "mle-poisson",
    "collision", "eiv", "eiv-simplex", "vem", "moments",
)


def _truth_weights(truth: Mapping, k: int, seed: int) -> np.ndarray:
    if "c" in truth:
        c = np.asarray(truth["c"], dtype=np.float64)
        if c.size != k:
            raise InvalidInputError(f"truth c has length {c.size}, cell k={k}")
        return c
    c1 = float(truth["c1"])
    if not 0.0 < c1 <= 1.0:
        raise InvalidInputError(f"c1 must lie in (0, 1], got {c1}")
    rest = make_rng(seed).dirichlet(np.ones(k - 1)) * (1.0 - c1) if k > 1 else []
    return np.concatenate([[c1], rest])


def _replicate_error(
    scenario: SweepScenario,
    method: str,
    cell: Mapping,
    rep: int,
    fixed_pi: DistributionMatrix | None,
) -> float:
    n = int(cell["n"])
    m = int(cell.get("m", 0))
    k = int(cell["k"])
    d = int(cell["d"])
    path = (scenario.name, method, n, m, k, d, rep)
    if fixed_pi is not None:
        pi = fixed_pi
    else:
        pi = sample_dirichlet_matrix(k, d, derive_seed(scenario.master_seed, *path, "pi"))
    c_true = _truth_weights(
        scenario.truth, k, derive_seed(scenario.master_seed, *path, "c")
    )
    p = mixture_distribution(
        pi, ErrorWeights(c_true, labels=pi.labels)
    )
    seed_y = derive_seed(scenario.master_seed, *path, "y")
    if scenario.sampling == "multinomial":
        y = sample_bitstrings_multinomial(p, n, seed_y)
    else:
        y = sample_bitstrings_poissonized(p, n, seed_y)
    v = None
    if _needs_side_info(method):
        v = sample_side_info(pi, m, derive_seed(scenario.master_seed, *path, "v"))
    config = _scenario_config(scenario, derive_seed(scenario.master_seed, *path, "cv"))
    c_hat = _run_method(method, pi, y, v, c_true, config)
    if method == "moments":
        return float(sorted_loss(c_hat, c_true))
    return float(np.linalg.norm(c_hat - c_true))


def risk_sweep(scenario: SweepScenario, *, threads: int | None = None) -> RiskCurve:
    """Monte Carlo accuracy sweep over the scenario's grid.

    Per replicate: draw the truth, sample a dataset, run the estimator,
    record the l2 distance to the true weights (sorted-order distance
    for the side-information-free moment method). Replicates run in a
    thread pool but every replicate owns a seed derived from
    (master_seed, name, method, n, m, k, d, replicate index), so the
    output is identical at any thread count.

    Raises:
        ResourceError: A grid cell needs more than MAX_SWEEP_ENTRIES
            dense matrix entries.
    """
    for cell in scenario.cells:
        if int(cell["k"]) * int(cell["d"]) > MAX_SWEEP_ENTRIES:
            raise ResourceError(
                f"cell {dict(cell)} needs {int(cell['k']) * int(cell['d'])} dense "
                f"entries (cap {MAX_SWEEP_ENTRIES}); shrink k or d"
            )
    workers = resolve_threads(threads)

    circuit_pi: dict[tuple[int, int], DistributionMatrix] = {}
    if scenario.truth.get("mode") == "circuit":
        spec = CircuitSpec.from_json(scenario.truth["circuit"])
        model = ErrorModelSpec.from_json(scenario.truth["model"])
        pi = build_pi_matrix(spec, model, threads=workers)
        for cell in scenario.cells:
            if int(cell["k"]) != pi.k or int(cell["d"]) != pi.d:
                raise InvalidInputError(
                    f"cell {dict(cell)} does not match the circuit matrix "
                    f"(k={pi.k}, d={pi.d})"
                )
            circuit_pi[(pi.k, pi.d)] = pi

    cells_out = []
    for method in scenario.estimators:
        for cell in scenario.cells:
            reps = scenario.replicates
            n, m = int(cell["n"]), int(cell.get("m", 0))
            k, d = int(cell["k"]), int(cell["d"])
            if reps == 0:
                cells_out.append(
                    RiskCell(
                        estimator=method, n=n, m=m, k=k, d=d, replicates=0,
                        mean_error=float("nan"), se_error=float("nan"),
                        mean_sq_error=float("nan"), se_sq_error=float("nan"),
                        empty=True,
                    )
                )
                continue
            fixed = circuit_pi.get((k, d))
            if workers > 1 and reps > 1:
                with ThreadPoolExecutor(max_workers=workers) as pool:
                    futures = [
                        pool.submit(_replicate_error, scenario, method, cell, r, fixed)
                        for r in range(reps)
                    ]
                    errors = np.array([f.result() for f in futures])
            else:
                errors = np.array(
                    [
                        _replicate_error(scenario, method, cell, r, fixed)
                        for r in range(reps)
                    ]
                )
            sq = errors**2
            se = float(errors.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
            se_sq = float(sq.std(ddof=1) / np.sqrt(reps)) if reps > 1 else 0.0
            cells_out.append(
                RiskCell(
                    estimator=method, n=n, m=m, k=k, d=d, replicates=reps,
                    mean_error=float(errors.mean()), se_error=se,
                    mean_sq_error=float(sq.mean()), se_sq_error=se_sq,
                )
            )
    return RiskCurve(cells=tuple(cells_out), scenario=scenario)
