"""Command-line entry point wiring the pipeline stages together.

Subcommands: simulate (build the component matrix), sample (draw
datasets), estimate (fit weights), moments (side-information-free
recovery), test (gradient / goodness-of-fit), bench (risk sweeps),
report (physical units). Every run writes a manifest next to its
output recording the resolved configuration, seeds, paths, version,
and wall-clock time; outputs themselves contain no timestamps, so
reruns are byte-identical.

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import functools
import sys
import time
from dataclasses import dataclass

import click

from .analysis import SweepScenario, chi2_gof, gradient_test_pipeline, risk_sweep
from .circuits import CircuitSpec, ErrorModelSpec, build_pi_matrix, resolve_threads
from .errors import InvalidInputError, NumericalError, RcsLabError
from .estimators import (
    CrossValidated,
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
from .io import (
    dump_json,
    load_json,
    read_histogram_csv,
    read_pimx,
    read_side_json,
    write_histogram_csv,
    write_pimx,
    write_side_json,
)
from .model import (
    ErrorWeights,
    mixture_distribution,
    sample_bitstrings_multinomial,
    sample_bitstrings_poissonized,
    sample_side_info,
)
from .moments import fidelity_estimate, moment_pipeline
from .report import config_hash, full_report
from .rng import derive_seed

try:
    from importlib.metadata import version as _pkg_version

    VERSION = _pkg_version("rcslab")
except Exception:  # pragma: no cover - not installed
    VERSION = "0.0.0"


@dataclass(frozen=True)
class RunManifest:
    """Reproducibility record written next to every output file."""

    subcommand: str
    config: dict
    seeds: dict
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    version: str
    wall_clock_s: float

    def to_json(self) -> dict:
        return {
            "subcommand": self.subcommand,
            "config": dict(self.config),
            "seeds": dict(self.seeds),
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "version": self.version,
            "wall_clock_s": float(self.wall_clock_s),
        }


def _write_manifest(
    subcommand: str,
    config: dict,
    seeds: dict,
    inputs: list,
    out: str,
    t0: float,
) -> None:
    manifest = RunManifest(
        subcommand=subcommand,
        config=config,
        seeds=seeds,
        inputs=tuple(str(p) for p in inputs),
        outputs=(str(out),),
        version=VERSION,
        wall_clock_s=time.monotonic() - t0,
    )
    dump_json(f"{out}.manifest.json", manifest.to_json())


def _guarded(fn):
    """Map library errors onto the documented exit codes."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except NumericalError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(3)
        except (RcsLabError, FileNotFoundError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(2)

    return wrapper


def _load_with_schema(path: str, loader, what: str):
    obj = load_json(path)
    try:
        return loader(obj)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, RcsLabError):
            raise
        field_name = exc.args[0] if isinstance(exc, KeyError) else exc
        raise InvalidInputError(f"{path}: bad {what} document ({field_name})") from exc


@click.group()
@click.version_option(VERSION, prog_name="rcslab")
def main() -> None:
    """Noise learning for random-circuit sampling data."""


@main.command()
@click.option("--circuit", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@click.option("--threads", type=int, default=None, help="Worker threads; falls back to RCS_LAB_THREADS, then 1.")
@click.option("--allow-large", is_flag=True, help="Lift the default qubit-count guard.")
@_guarded
def simulate(circuit: str, model_path: str, out: str, threads: int | None, allow_large: bool) -> None:
    """Build the error-trajectory distribution matrix for a circuit."""
    t0 = time.monotonic()
    spec = _load_with_schema(circuit, CircuitSpec.from_json, "circuit")
    model = _load_with_schema(model_path, ErrorModelSpec.from_json, "error model")
    pi = build_pi_matrix(spec, model, allow_large=allow_large, threads=threads)
    write_pimx(out, pi)
    _write_manifest(
        "simulate",
        {
            "circuit": spec.to_json(),
            "model": model.to_json(),
            "allow_large": allow_large,
            "threads": resolve_threads(threads),
        },
        {"gate_seed": spec.gate_seed},
        [circuit, model_path],
        out,
        t0,
    )
    click.echo(f"wrote {pi.k} x {pi.d} matrix to {out}")


def _parse_weights(obj) -> list[float]:
    if isinstance(obj, list):
        return [float(v) for v in obj]
    if isinstance(obj, dict) and "values" in obj:
        return [float(v) for v in obj["values"]]
    raise InvalidInputError("weights file must be a JSON list or have a 'values' field")


@main.command()
@click.option("--pi", "pi_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--weights", "weights_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n", required=True, type=int, help="Sample count (or Poisson intensity).")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--sampling", type=click.Choice(["multinomial", "poisson"]), default="multinomial", show_default=True)
@click.option("--side-m", type=int, default=0, show_default=True, help="Reference samples per component.")
@click.option("--side-out", type=click.Path(dir_okay=False), default=None)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_guarded
def sample(
    pi_path: str,
    weights_path: str,
    n: int,
    seed: int,
    sampling: str,
    side_m: int,
    side_out: str | None,
    out: str,
) -> None:
    """Draw a synthetic dataset from a weighted component mixture."""
    t0 = time.monotonic()
    pi = read_pimx(pi_path)
    values = _parse_weights(load_json(weights_path))
    weights = ErrorWeights(values, labels=pi.labels if len(values) == pi.k else ())
    p = mixture_distribution(pi, weights)
    sampler = (
        sample_bitstrings_multinomial
        if sampling == "multinomial"
        else sample_bitstrings_poissonized
    )
    y = sampler(p, n, seed)
    write_histogram_csv(out, y)
    seeds = {"seed": seed}
    inputs = [pi_path, weights_path]
    if side_m > 0:
        if side_out is None:
            raise InvalidInputError("--side-m needs --side-out")
        side_seed = derive_seed(seed, "side")
        write_side_json(side_out, sample_side_info(pi, side_m, side_seed))
        seeds["side_seed"] = side_seed
    _write_manifest(
        "sample",
        {
            "n": n,
            "sampling": sampling,
            "side_m": side_m,
            "side_out": side_out,
            "weights": values,
        },
        seeds,
        inputs,
        out,
        t0,
    )
    click.echo(f"wrote {y.total} samples over {y.support_size} outcomes to {out}")


SIDE_ONLY_METHODS = ("collision", "eiv", "eiv-simplex", "vem")
PI_METHODS = ("xeb", "xeb-ht", "xeb-st", "ols", "mle", "mle-poisson")


@main.command()
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", required=True, type=click.Choice(PI_METHODS + SIDE_ONLY_METHODS))
@click.option("--pi", "pi_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--side", "side_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--threshold", default=None, help="Threshold value, or 'cv' for cross-validated selection.")
@click.option("--cv-folds", type=int, default=2, show_default=True)
@click.option("--max-iter", type=int, default=1000, show_default=True)
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--ridge", type=float, default=1e-8, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True, help="Seed for cross-validation splits.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_guarded
def estimate(
    data: str,
    method: str,
    pi_path: str | None,
    side_path: str | None,
    threshold: str | None,
    cv_folds: int,
    max_iter: int,
    tol: float,
    ridge: float,
    seed: int,
    out: str,
) -> None:
    """Fit per-component weights to a histogram.

    Methods xeb/xeb-ht/xeb-st/ols/mle/mle-poisson need --pi; methods
    collision/eiv/eiv-simplex/vem need --side and never touch a dense
    matrix. Thresholded methods default to cross-validated selection.
    """
    t0 = time.monotonic()
    y = read_histogram_csv(data)
    thr: float | CrossValidated | None
    if threshold is None:
        thr = CrossValidated(seed=derive_seed(seed, "cv")) if method in ("xeb-ht", "xeb-st") else None
    elif threshold == "cv":
        thr = CrossValidated(seed=derive_seed(seed, "cv"))
    else:
        thr = float(threshold)
    config = EstimatorConfig(
        threshold=thr, cv_folds=cv_folds, max_iter=max_iter, tol=tol, ridge=ridge
    )
    inputs = [data]
    if method in SIDE_ONLY_METHODS:
        if side_path is None:
            raise InvalidInputError(f"method {method} needs --side")
        side = read_side_json(side_path)
        inputs.append(side_path)
        if method == "collision":
            est = collision_estimate(y, side)
        elif method == "eiv":
            est = eiv_least_squares(y, side, config=config)
        elif method == "eiv-simplex":
            est = eiv_least_squares(y, side, simplex=True, config=config)
        else:
            est = variational_em(y, side, config)
    else:
        if pi_path is None:
            raise InvalidInputError(f"method {method} needs --pi")
        pi = read_pimx(pi_path)
        inputs.append(pi_path)
        if method == "xeb":
            est = xeb_estimate(pi, y)
        elif method == "xeb-ht":
            est = xeb_thresholded(pi, y, config, mode="hard")
        elif method == "xeb-st":
            est = xeb_thresholded(pi, y, config, mode="soft")
        elif method == "ols":
            est = ols_estimate(pi, y, ridge=ridge)
        elif method == "mle":
            est = mle_multinomial(pi, y, config)
        else:
            est = mle_poisson_ridge(pi, y, config)
    est.diagnostics["method"] = method
    est.diagnostics["seed"] = seed
    dump_json(out, est.to_json())
    _write_manifest(
        "estimate",
        {
            "method": method,
            "threshold": "cv" if isinstance(thr, CrossValidated) else thr,
            "cv_folds": cv_folds,
            "max_iter": max_iter,
            "tol": tol,
            "ridge": ridge,
        },
        {"seed": seed},
        inputs,
        out,
        t0,
    )
    click.echo(f"wrote {est.values.k}-component estimate to {out}")


@main.command()
@click.option("--input", "input_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--k", required=True, type=int, help="Component count to recover.")
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_guarded
def moments(input_path: str, k: int, out: str) -> None:
    """Recover unlabeled weights from a histogram alone."""
    t0 = time.monotonic()
    y = read_histogram_csv(input_path)
    me = moment_pipeline(y, k)
    payload = me.to_json()
    payload["fidelity"] = fidelity_estimate(me)
    dump_json(out, payload)
    _write_manifest("moments", {"k": k}, {}, [input_path], out, t0)
    click.echo(f"wrote order-{k} moment estimate to {out}")


_FIT_FOR_TEST = {
    "xeb": lambda pi, y, config: xeb_estimate(pi, y),
    "ols": lambda pi, y, config: ols_estimate(pi, y, ridge=config.ridge),
    "mle": mle_multinomial,
    "mle-poisson": mle_poisson_ridge,
}


@main.command()
@click.option("--kind", required=True, type=click.Choice(["gradient", "gof"]))
@click.option("--pi", "pi_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--data", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--method", type=click.Choice(sorted(_FIT_FOR_TEST)), default="ols", show_default=True)
@click.option("--fitted", "fitted_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Existing estimate JSON (gof only).")
@click.option("--n-boot", type=int, default=500, show_default=True)
@click.option("--one-sided", is_flag=True, help="Gradient test for growing rates only.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_guarded
def test(
    kind: str,
    pi_path: str,
    data: str,
    method: str,
    fitted_path: str | None,
    n_boot: int,
    one_sided: bool,
    seed: int,
    out: str,
) -> None:
    """Run the time-dependence or goodness-of-fit hypothesis test."""
    t0 = time.monotonic()
    pi = read_pimx(pi_path)
    y = read_histogram_csv(data)
    fitter = _FIT_FOR_TEST[method]
    inputs = [pi_path, data]
    if kind == "gradient":
        res = gradient_test_pipeline(
            pi, y, method=method, n_boot=n_boot, rng_seed=seed, one_sided=one_sided
        )
    else:
        if fitted_path is not None:
            fitted = Estimate.from_json(load_json(fitted_path))
            inputs.append(fitted_path)
        else:
            fitted = fitter(pi, y, EstimatorConfig())

        def refit(pi_b, y_b):
            return fitter(pi_b, y_b, EstimatorConfig())

        res = chi2_gof(pi, y, fitted, n_boot=n_boot, rng_seed=seed, refit=refit)
    dump_json(out, res.to_json())
    _write_manifest(
        "test",
        {"kind": kind, "method": method, "n_boot": n_boot, "one_sided": one_sided},
        {"seed": seed},
        inputs,
        out,
        t0,
    )
    click.echo(f"wrote {kind} test result (p={res.p_value:.4g}) to {out}")


@main.command()
@click.option("--scenario", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--threads", type=int, default=None, help="Worker threads; falls back to RCS_LAB_THREADS, then 1.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]), default="csv", show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_guarded
def bench(scenario: str, threads: int | None, fmt: str, out: str) -> None:
    """Run a Monte Carlo risk sweep from a scenario file."""
    t0 = time.monotonic()
    scen = _load_with_schema(scenario, SweepScenario.from_json, "scenario")
    curve = risk_sweep(scen, threads=threads)
    if fmt == "csv":
        curve.to_csv(out)
    else:
        dump_json(out, curve.to_json())
    _write_manifest(
        "bench",
        {"scenario": scen.to_json(), "threads": resolve_threads(threads), "format": fmt},
        {"master_seed": scen.master_seed},
        [scenario],
        out,
        t0,
    )
    click.echo(f"wrote {len(curve.cells)} sweep cells to {out}")


@main.command()
@click.option("--estimate", "estimate_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--circuit", "circuit_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Circuit JSON; enables the boundary-layer coefficient check.")
@click.option("--exclude-boundary", type=int, default=3, show_default=True)
@click.option("--format", "fmt", type=click.Choice(["json", "md"]), default="json", show_default=True)
@click.option("--out", required=True, type=click.Path(dir_okay=False))
@_guarded
def report(
    estimate_path: str,
    model_path: str,
    circuit_path: str | None,
    exclude_boundary: int,
    fmt: str,
    out: str,
) -> None:
    """Convert a fitted estimate into physical rates and proportions."""
    t0 = time.monotonic()
    est = _load_with_schema(estimate_path, Estimate.from_json, "estimate")
    model = _load_with_schema(model_path, ErrorModelSpec.from_json, "error model")
    depth = None
    inputs = [estimate_path, model_path]
    if circuit_path is not None:
        depth = _load_with_schema(circuit_path, CircuitSpec.from_json, "circuit").depth
        inputs.append(circuit_path)
    resolved = {
        "exclude_boundary": exclude_boundary,
        "depth": depth,
        "estimator": est.diagnostics.get("method"),
    }
    provenance = {
        "config_hash": config_hash({"model": model.to_json(), **resolved}),
        "estimator": est.diagnostics.get("method"),
        "seed": est.diagnostics.get("seed"),
        "version": VERSION,
    }
    rep = full_report(
        est,
        model,
        depth=depth,
        exclude_boundary=exclude_boundary,
        provenance=provenance,
    )
    if fmt == "json":
        dump_json(out, rep.to_json())
    else:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(rep.markdown_table())
    _write_manifest("report", resolved, {}, inputs, out, t0)
    click.echo(f"wrote report (fidelity {rep.fidelity:.4f}) to {out}")


if __name__ == "__main__":
    main()
