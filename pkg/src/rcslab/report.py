"""Physical-units reporting on top of the fitted mixture weights.

The estimators return one weight per error trajectory. This module
turns those weights into the quantities an experimentalist asks for:
the many-body fidelity, per-event physical error rates, double-readout
corrected readout rates, and the share of the total measurement weight
attributable to each error class.

Pipeline order matters and is enforced by full_report: fit, then the
double-readout correction, then the fidelity conversion, then the rate
conversion. Clamping to [0, 1] happens only here; the raw estimators
never clip, so diagnostics retain the unclipped values.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace

import numpy as np

from .circuits import ErrorModelSpec
from .errors import (
    DegenerateRateError,
    InvalidInputError,
    MissingCoefficientError,
)
from .estimators import Estimate
from .model import ErrorKind, ErrorLabel, ErrorWeights, WeightConstraint

DOUBLE_READOUT_OVERLAP = 3.0 / 14.0

# Signed perturbation rows: their weights carry no probability mass.
_SIGNED_KINDS = frozenset(
    {ErrorKind.READOUT_10, ErrorKind.READOUT_01, ErrorKind.DOUBLE_READOUT_1010}
)


def _coefficient_table(
    model: ErrorModelSpec,
    *,
    depth: int | None = None,
    exclude_boundary: int = 3,
) -> dict[ErrorLabel, float]:
    """Label -> fidelity coefficient, refusing boundary-layer defaults.

    The default coefficients assume the error acts on a scrambled
    state, which fails within the first and last few circuit layers.
    When the circuit depth is known, sources relying on a nonzero
    default coefficient inside that boundary are refused; an explicit
    fidelity_coeff on the source always wins.
    """
    table: dict[ErrorLabel, float] = {}
    for src in model.sources:
        f = src.resolved_fidelity_coeff()
        if f is None:
            raise MissingCoefficientError(
                f"source {src.label} has no fidelity coefficient; set one"
            )
        layers = src.layers
        if layers is None and src.label.layer is not None:
            layers = (src.label.layer,)
        if (
            depth is not None
            and src.fidelity_coeff is None
            and f != 0.0
            and layers is not None
        ):
            lo, hi = exclude_boundary, depth - exclude_boundary
            bad = [t for t in layers if not lo <= t < hi]
            if bad:
                raise MissingCoefficientError(
                    f"source {src.label} sits in boundary layers {bad}; the "
                    "bulk fidelity coefficient does not apply there"
                )
        table[src.label] = f
    return table


def fidelity_from_estimate(
    est: Estimate | ErrorWeights,
    model: ErrorModelSpec,
    *,
    depth: int | None = None,
    exclude_boundary: int = 3,
) -> float:
    """Many-body fidelity as the coefficient-weighted sum of weights.

    The ideal row's weight enters with coefficient one; every other
    entry contributes f_i * c_i, where f_i comes from the source's
    fidelity coefficient. The result is clamped to [0, 1].

    Args:
        est: Fitted weights whose labels match the model sources.
        model: Error model supplying the coefficients.
        depth: Circuit depth; when given, bulk-only default
            coefficients are refused for boundary-layer sources.
        exclude_boundary: Width of the boundary region.

    Raises:
        MissingCoefficientError: An estimated label has no source, a
            source has no coefficient, or a boundary-layer source
            relies on the bulk default.
    """
    weights = est.values if isinstance(est, Estimate) else est
    table = _coefficient_table(model, depth=depth, exclude_boundary=exclude_boundary)
    total = 0.0
    for lab, val in zip(weights.labels, weights.values):
        if lab.kind is ErrorKind.IDEAL:
            total += float(val)
            continue
        if lab not in table:
            raise MissingCoefficientError(f"estimated label {lab} is not in the model")
        total += table[lab] * float(val)
    return float(min(1.0, max(0.0, total)))


def correct_double_readout(est: Estimate) -> Estimate:
    """Remove the double-readout overlap from the single 1->0 rates.

    Each single-qubit 1->0 readout weight is reduced by 3/14 of every
    double-readout weight sharing that qubit; the overlap of the
    corresponding perturbation rows is exactly 3/14, so this
    reparametrizes the fit into physically independent rates. All
    other entries pass through untouched. Without double entries this
    is the identity.
    """
    weights = est.values
    doubles_by_qubit: dict[int, float] = {}
    for lab, val in zip(weights.labels, weights.values):
        if lab.kind is ErrorKind.DOUBLE_READOUT_1010:
            for q in lab.qubits:
                doubles_by_qubit[q] = doubles_by_qubit.get(q, 0.0) + float(val)
    if not doubles_by_qubit:
        return est
    values = weights.values.copy()
    for i, lab in enumerate(weights.labels):
        if lab.kind is ErrorKind.READOUT_10 and len(lab.qubits) == 1:
            values[i] -= DOUBLE_READOUT_OVERLAP * doubles_by_qubit.get(lab.qubits[0], 0.0)
    diagnostics = dict(est.diagnostics)
    diagnostics["double_readout_corrected"] = True
    # The shift can leave the original feasible set (sum or sign), so
    # the corrected vector drops the constraint declaration.
    return Estimate(
        values=replace(
            weights, values=values, constraint=WeightConstraint.UNCONSTRAINED
        ),
        stderr=est.stderr,
        diagnostics=diagnostics,
    )


def physical_rates(est: Estimate | ErrorWeights, fidelity: float) -> ErrorWeights:
    """Per-event physical rates Gamma_i = c_i / (F + c_i), clamped.

    The fitted weight c_i is the chance that a run suffered exactly
    this error and nothing else; dividing by F + c_i converts it into
    the chance of the event given the rest of the run was clean.

    Raises:
        DegenerateRateError: F + c_i <= 0 for some entry, naming it.
    """
    weights = est.values if isinstance(est, Estimate) else est
    out = np.zeros(weights.k)
    for i, (lab, val) in enumerate(zip(weights.labels, weights.values)):
        denom = fidelity + float(val)
        if denom <= 0.0:
            raise DegenerateRateError(
                f"rate denominator F + c = {denom:.3g} <= 0 for {lab}"
            )
        out[i] = min(1.0, max(0.0, float(val) / denom))
    return replace(weights, values=out, constraint=WeightConstraint.NONNEGATIVE_CONE)


def proportions(est: Estimate | ErrorWeights, model: ErrorModelSpec) -> dict[str, float]:
    """Share of the total measurement weight per error class.

    Takes the RAW (uncorrected) fit; the double-readout overlap is
    handled internally, so feeding an already-corrected estimate would
    subtract it twice and is refused. Probability-mass sources split
    their weight between the fidelity class (f_i c_i) and their own
    class ((1 - f_i) c_i); signed readout sources contribute zero net
    mass, spread across the fidelity, readout, and double-readout
    classes. The result is normalized by the total probability mass,
    so the shares sum to one exactly.
    """
    if isinstance(est, Estimate):
        if est.diagnostics.get("double_readout_corrected"):
            raise InvalidInputError(
                "proportions needs the uncorrected fit; this estimate already "
                "has the double-readout correction applied"
            )
        weights = est.values
    else:
        weights = est
    table = _coefficient_table(model)

    doubles_by_qubit: dict[int, float] = {}
    for lab, val in zip(weights.labels, weights.values):
        if lab.kind is ErrorKind.DOUBLE_READOUT_1010:
            for q in lab.qubits:
                doubles_by_qubit[q] = doubles_by_qubit.get(q, 0.0) + float(val)

    shares: dict[str, float] = {"fidelity": 0.0}
    prob_mass = 0.0

    def add(key: str, amount: float) -> None:
        shares[key] = shares.get(key, 0.0) + amount

    for lab, val in zip(weights.labels, weights.values):
        c = float(val)
        if lab.kind is ErrorKind.IDEAL:
            add("fidelity", c)
            prob_mass += c
            continue
        if lab not in table:
            raise MissingCoefficientError(f"estimated label {lab} is not in the model")
        f = table[lab]
        add("fidelity", f * c)
        if lab.kind is ErrorKind.DOUBLE_READOUT_1010:
            add(lab.kind.value, (2.0 * DOUBLE_READOUT_OVERLAP - 0.25) * c)
        elif lab.kind in (ErrorKind.READOUT_10, ErrorKind.READOUT_01):
            corr = 0.0
            if lab.kind is ErrorKind.READOUT_10 and len(lab.qubits) == 1:
                corr = DOUBLE_READOUT_OVERLAP * doubles_by_qubit.get(lab.qubits[0], 0.0)
            add("readout", 0.5 * c - corr)
        elif lab.kind in _SIGNED_KINDS:
            add(lab.kind.value, -f * c)
        else:
            add(lab.kind.value, (1.0 - f) * c)
            prob_mass += c
    if prob_mass <= 0.0:
        raise InvalidInputError("estimate carries no probability mass")
    return {key: val / prob_mass for key, val in shares.items()}


def white_noise_expectation(fidelity: float) -> float:
    """Predicted weight of unmodeled multi-error events, 1 - F - F log(1/F).

    Used to cross-check the fitted white-noise weight: if the model
    captures the dominant single errors, the leftover weight should be
    near this value.
    """
    if not 0.0 < fidelity <= 1.0:
        raise InvalidInputError(f"fidelity must lie in (0, 1], got {fidelity}")
    return float(1.0 - fidelity - fidelity * np.log(1.0 / fidelity))


@dataclass(frozen=True)
class PhysicalReport:
    """Physical summary of one fitted error model.

    Args:
        fidelity: Many-body fidelity from the corrected fit.
        gamma: Per-event physical rates, labels aligned with the fit.
        corrected: The coefficient estimate after the double-readout
            correction (raw values live in its diagnostics trail).
        proportions: Share of measurement weight per error class.
        white_noise_weight: Fitted weight of the flat unmodeled row,
            zero when the model has no such row.
        white_noise_expected: Predicted unmodeled weight at this
            fidelity, for the cross-check.
        provenance: Seeds, estimator name, config hash, versions.
    """

    fidelity: float
    gamma: ErrorWeights
    corrected: Estimate
    proportions: dict[str, float]
    white_noise_weight: float
    white_noise_expected: float
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.fidelity <= 1.0:
            raise InvalidInputError(f"fidelity {self.fidelity} outside [0, 1]")
        g = self.gamma.values
        if np.any(g < 0) or np.any(g > 1):
            raise InvalidInputError("physical rates must lie in [0, 1]")
        if self.proportions:
            total = sum(self.proportions.values())
            if abs(total - 1.0) > 1e-6:
                raise InvalidInputError(f"proportions sum to {total!r}, not 1")

    def to_json(self) -> dict:
        return {
            "fidelity": float(self.fidelity),
            "gamma": {
                str(lab): float(v)
                for lab, v in zip(self.gamma.labels, self.gamma.values)
            },
            "corrected": self.corrected.to_json(),
            "proportions": {k: float(v) for k, v in self.proportions.items()},
            "white_noise_weight": float(self.white_noise_weight),
            "white_noise_expected": (
                None
                if np.isnan(self.white_noise_expected)
                else float(self.white_noise_expected)
            ),
            "provenance": dict(self.provenance),
        }

    def markdown_table(self) -> str:
        lines = [
            "# Error model report",
            "",
            f"Many-body fidelity: **{self.fidelity:.4f}**",
            "",
            f"White-noise weight: {self.white_noise_weight:.4f} "
            f"(expected at this fidelity: {self.white_noise_expected:.4f})",
            "",
            "## Proportions by error class",
            "",
            "| class | share |",
            "| --- | --- |",
        ]
        for key, share in sorted(self.proportions.items(), key=lambda kv: -kv[1]):
            lines.append(f"| {key} | {share:.4f} |")
        lines += [
            "",
            "## Per-source rates",
            "",
            "| source | coefficient | physical rate |",
            "| --- | --- | --- |",
        ]
        for lab, c, g in zip(
            self.corrected.values.labels,
            self.corrected.values.values,
            self.gamma.values,
        ):
            lines.append(f"| {lab} | {c:.6g} | {g:.6g} |")
        lines.append("")
        return "\n".join(lines)


def config_hash(obj) -> str:
    """Stable short hash of a JSON-serializable configuration."""
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def full_report(
    est: Estimate,
    model: ErrorModelSpec,
    *,
    depth: int | None = None,
    exclude_boundary: int = 3,
    provenance: dict | None = None,
) -> PhysicalReport:
    """Assemble the physical report in the enforced order.

    Correction first, then fidelity from the corrected coefficients,
    then the rate conversion at that fidelity; class proportions are
    computed from the raw fit, which handles the overlap itself.
    """
    corrected = correct_double_readout(est)
    fid = fidelity_from_estimate(
        corrected, model, depth=depth, exclude_boundary=exclude_boundary
    )
    gamma = physical_rates(corrected, fid)
    shares = proportions(est, model)
    wn = 0.0
    for lab, val in zip(est.values.labels, est.values.values):
        if lab.kind is ErrorKind.WHITE_NOISE:
            wn += float(val)
    expected = white_noise_expectation(fid) if fid > 0 else float("nan")
    return PhysicalReport(
        fidelity=fid,
        gamma=gamma,
        corrected=corrected,
        proportions=shares,
        white_noise_weight=wn,
        white_noise_expected=expected,
        provenance=dict(provenance or {}),
    )
