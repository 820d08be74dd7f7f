"""Statevector simulation of brickwork random circuits with error insertion.

Builds labeled distribution matrices: row 0 is the ideal output
distribution, later rows are single-error trajectories (unitary Kraus
insertions), classical readout perturbations, or a uniform white-noise
row.

Conventions used throughout:

- Bitstring indices are little-endian: qubit q contributes 2**q.
- Gate layers are 0-indexed.  A Chain1D layer applies all even bonds
  (0,1),(2,3),... then all odd bonds (1,2),(3,4),...  A Grid2D layer
  applies four bond groups in a fixed orientation cycle (horizontal
  even column, horizontal odd, vertical even row, vertical odd).
- An insertion slot s in [0, depth] counts gate layers applied before
  the inserted operator: s=0 acts on |0...0>, s=depth acts after the
  final layer.  Error sources attached to gate layer L are inserted at
  slot L+1 (after that layer's gates); state preparation uses slot 0.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import InvalidInputError, ResourceError, UnsupportedRowKindError
from .model import (
    DistributionMatrix,
    ErrorKind,
    ErrorLabel,
    RowKind,
)
from .rng import make_rng

STATE_NORM_ATOL = 1e-10
UNITARY_ATOL = 1e-10

# Mean overlap-with-ideal coefficients per error class, used when
# converting learned weights into a fidelity estimate.  Bulk unitary
# errors average to 0; values for the structured classes follow from
# the squared mean trace of the inserted operator (2q dephasing and
# flip-flop: (tr V / 4)^2 = 1/4) or from the mass-shift geometry of
# classical readout rows (-1/2 single, +1/4 double).
DEFAULT_FIDELITY_COEFF: dict[ErrorKind, float] = {
    ErrorKind.PAULI_X: 0.0,
    ErrorKind.PAULI_Y: 0.0,
    ErrorKind.PAULI_Z: 0.0,
    ErrorKind.STATE_PREP: 0.0,
    ErrorKind.DEPHASE_1Q: 0.0,
    ErrorKind.DEPHASE_2Q: 0.25,
    ErrorKind.FLIP_FLOP_2Q: 0.25,
    ErrorKind.READOUT_10: -0.5,
    ErrorKind.READOUT_01: -0.5,
    ErrorKind.DOUBLE_READOUT_1010: 0.25,
    ErrorKind.WHITE_NOISE: 0.0,
}

_PAULI = {
    ErrorKind.PAULI_X: np.array([[0, 1], [1, 0]], dtype=np.complex128),
    ErrorKind.PAULI_Y: np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    ErrorKind.PAULI_Z: np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

DEPHASE_2Q_OP = np.diag([1.0, 1.0, 1.0, -1.0]).astype(np.complex128)
FLIP_FLOP_2Q_OP = np.array(
    [
        [1, 0, 0, 0],
        [0, 0, 1, 0],
        [0, 1, 0, 0],
        [0, 0, 0, 1],
    ],
    dtype=np.complex128,
)


# ---------------------------------------------------------------------------
# Circuit geometry and gate kinds


@dataclass(frozen=True)
class Chain1D:
    """Open 1-D chain; bonds connect qubits (q, q+1)."""

    def to_json(self) -> dict:
        return {"type": "Chain1D"}


@dataclass(frozen=True)
class Grid2D:
    """Open rows-by-cols grid; qubit index = row * cols + col."""

    rows: int
    cols: int

    def to_json(self) -> dict:
        return {"type": "Grid2D", "rows": self.rows, "cols": self.cols}


@dataclass(frozen=True)
class HaarSU4:
    """Independent Haar-random two-qubit gates."""

    def to_json(self) -> dict:
        return {"type": "HaarSU4"}


@dataclass(frozen=True)
class FsimLike:
    """Fixed excitation-conserving core preceded by random 1q rotations.

    The core is
        diag-block [[1,0,0,0],
                    [0, cos(theta/2), -i sin(theta/2), 0],
                    [0, -i sin(theta/2), cos(theta/2), 0],
                    [0, 0, 0, exp(i phi)]]
    and each gate draws fresh Haar U(2) rotations on both targets so the
    circuit stays random.
    """

    theta: float
    phi: float

    def to_json(self) -> dict:
        return {"type": "FsimLike", "theta": self.theta, "phi": self.phi}


def geometry_from_json(obj: Mapping) -> Chain1D | Grid2D:
    t = obj.get("type")
    if t == "Chain1D":
        return Chain1D()
    if t == "Grid2D":
        return Grid2D(rows=int(obj["rows"]), cols=int(obj["cols"]))
    raise InvalidInputError(f"unknown geometry type {t!r}")


def gate_kind_from_json(obj: Mapping) -> HaarSU4 | FsimLike:
    t = obj.get("type")
    if t == "HaarSU4":
        return HaarSU4()
    if t == "FsimLike":
        return FsimLike(theta=float(obj["theta"]), phi=float(obj["phi"]))
    raise InvalidInputError(f"unknown gate kind {t!r}")


@dataclass(frozen=True)
class CircuitSpec:
    """Immutable description of one brickwork random circuit.

    Args:
        n_qubits: Number of qubits (<= 14 for full distribution-matrix
            builds unless explicitly overridden).
        depth: Number of gate layers; 0 gives the identity circuit.
        geometry: Chain1D or Grid2D connectivity.
        gate_seed: Seed fixing every gate; identical specs reproduce
            identical circuits.
        gate_kind: HaarSU4 (default) or FsimLike.
    """

    n_qubits: int
    depth: int
    geometry: Chain1D | Grid2D = field(default_factory=Chain1D)
    gate_seed: int = 0
    gate_kind: HaarSU4 | FsimLike = field(default_factory=HaarSU4)

    def __post_init__(self):
        if self.n_qubits < 1:
            raise InvalidInputError(f"n_qubits must be >= 1, got {self.n_qubits}")
        if self.depth < 0:
            raise InvalidInputError(f"depth must be >= 0, got {self.depth}")
        if isinstance(self.geometry, Grid2D):
            g = self.geometry
            if g.rows < 1 or g.cols < 1:
                raise InvalidInputError(f"bad grid shape {g.rows}x{g.cols}")
            if g.rows * g.cols != self.n_qubits:
                raise InvalidInputError(
                    f"grid {g.rows}x{g.cols} does not hold {self.n_qubits} qubits"
                )

    @property
    def d(self) -> int:
        return 1 << self.n_qubits

    def to_json(self) -> dict:
        return {
            "n_qubits": self.n_qubits,
            "depth": self.depth,
            "geometry": self.geometry.to_json(),
            "gate_seed": self.gate_seed,
            "gate_kind": self.gate_kind.to_json(),
        }

    @staticmethod
    def from_json(obj: Mapping) -> "CircuitSpec":
        return CircuitSpec(
            n_qubits=int(obj["n_qubits"]),
            depth=int(obj["depth"]),
            geometry=geometry_from_json(obj["geometry"]),
            gate_seed=int(obj["gate_seed"]),
            gate_kind=gate_kind_from_json(obj["gate_kind"]),
        )


@dataclass(frozen=True)
class Statevector:
    """Pure state over n qubits, little-endian amplitude order."""

    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.ascontiguousarray(np.asarray(self.amplitudes, dtype=np.complex128))
        if amps.ndim != 1 or amps.size < 2 or (amps.size & (amps.size - 1)) != 0:
            raise InvalidInputError(
                f"amplitudes must be a 1-D power-of-two vector, got shape {amps.shape}"
            )
        norm = float(np.linalg.norm(amps))
        if abs(norm - 1.0) > STATE_NORM_ATOL:
            raise InvalidInputError(f"state norm {norm!r} is not 1 within 1e-10")
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_qubits(self) -> int:
        return int(self.amplitudes.size).bit_length() - 1

    def probabilities(self) -> np.ndarray:
        p = np.abs(self.amplitudes) ** 2
        return p / p.sum()


# ---------------------------------------------------------------------------
# Gate synthesis


def haar_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR of a complex Gaussian matrix.

    The R diagonal phases are absorbed into Q so the distribution is
    exactly Haar rather than QR-convention dependent.
    """
    a = rng.standard_normal((dim, dim))
    b = rng.standard_normal((dim, dim))
    z = (a + 1j * b) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    diag = np.diagonal(r)
    ph = np.where(np.abs(diag) > 0, diag / np.abs(diag), 1.0)
    return q * ph


def fsim_core(theta: float, phi: float) -> np.ndarray:
    c = np.cos(theta / 2.0)
    s = np.sin(theta / 2.0)
    return np.array(
        [
            [1, 0, 0, 0],
            [0, c, -1j * s, 0],
            [0, -1j * s, c, 0],
            [0, 0, 0, np.exp(1j * phi)],
        ],
        dtype=np.complex128,
    )


def layer_bond_groups(spec: CircuitSpec) -> list[list[tuple[int, int]]]:
    """Bond groups applied in order within every layer."""
    if isinstance(spec.geometry, Chain1D):
        n = spec.n_qubits
        even = [(q, q + 1) for q in range(0, n - 1, 2)]
        odd = [(q, q + 1) for q in range(1, n - 1, 2)]
        return [g for g in (even, odd) if g]
    rows, cols = spec.geometry.rows, spec.geometry.cols

    def q(r: int, c: int) -> int:
        return r * cols + c

    horiz_even = [
        (q(r, c), q(r, c + 1)) for r in range(rows) for c in range(0, cols - 1, 2)
    ]
    horiz_odd = [
        (q(r, c), q(r, c + 1)) for r in range(rows) for c in range(1, cols - 1, 2)
    ]
    vert_even = [
        (q(r, c), q(r + 1, c)) for r in range(0, rows - 1, 2) for c in range(cols)
    ]
    vert_odd = [
        (q(r, c), q(r + 1, c)) for r in range(1, rows - 1, 2) for c in range(cols)
    ]
    return [g for g in (horiz_even, horiz_odd, vert_even, vert_odd) if g]


def generate_gates(spec: CircuitSpec) -> list[list[tuple[tuple[int, int], np.ndarray]]]:
    """Draw the full gate list, one entry per layer, deterministically.

    Gates are drawn in a canonical order (layer, bond group, bond) from
    a single stream seeded by gate_seed, so the circuit is a pure
    function of the spec.
    """
    rng = make_rng(spec.gate_seed)
    groups = layer_bond_groups(spec)
    layers: list[list[tuple[tuple[int, int], np.ndarray]]] = []
    for _ in range(spec.depth):
        gates: list[tuple[tuple[int, int], np.ndarray]] = []
        for group in groups:
            for bond in group:
                if isinstance(spec.gate_kind, HaarSU4):
                    u = haar_unitary(4, rng)
                else:
                    u0 = haar_unitary(2, rng)
                    u1 = haar_unitary(2, rng)
                    # Block basis is little-endian in the bond tuple, so
                    # the second qubit is the kron-major factor.
                    u = fsim_core(spec.gate_kind.theta, spec.gate_kind.phi) @ np.kron(
                        u1, u0
                    )
                gates.append((bond, u))
        layers.append(gates)
    return layers


# ---------------------------------------------------------------------------
# State evolution


def apply_operator(
    amps: np.ndarray, op: np.ndarray, qubits: Sequence[int], n_qubits: int
) -> np.ndarray:
    """Apply a 2^w x 2^w operator to the given target qubits.

    The operator basis is little-endian in the target tuple: qubits[0]
    is the least significant bit of the operator's index.
    """
    qubits = tuple(int(q) for q in qubits)
    w = len(qubits)
    if len(set(qubits)) != w:
        raise InvalidInputError(f"duplicate target qubits {qubits}")
    if any(q < 0 or q >= n_qubits for q in qubits):
        raise InvalidInputError(f"target qubits {qubits} out of range for n={n_qubits}")
    op = np.asarray(op, dtype=np.complex128)
    if op.shape != (1 << w, 1 << w):
        raise InvalidInputError(
            f"operator shape {op.shape} does not match {w} target qubit(s)"
        )
    tensor = amps.reshape([2] * n_qubits)
    # Tensor axis for qubit q is n-1-q (C order); the block's most
    # significant qubit goes to the front axis.
    axes = [n_qubits - 1 - q for q in reversed(qubits)]
    tensor = np.moveaxis(tensor, axes, range(w))
    shape = tensor.shape
    flat = tensor.reshape(1 << w, -1)
    flat = op @ flat
    tensor = np.moveaxis(flat.reshape(shape), range(w), axes)
    return np.ascontiguousarray(tensor).reshape(-1)


def _apply_layers(
    amps: np.ndarray,
    gate_layers: list[list[tuple[tuple[int, int], np.ndarray]]],
    n_qubits: int,
) -> np.ndarray:
    for gates in gate_layers:
        for bond, u in gates:
            amps = apply_operator(amps, u, bond, n_qubits)
    return amps


def _check_statevector_budget(n_qubits: int) -> None:
    if n_qubits > 24:
        raise ResourceError(
            f"statevector over {n_qubits} qubits exceeds the simulation budget (max 24)"
        )


def simulate_ideal(spec: CircuitSpec) -> tuple[Statevector, np.ndarray]:
    """Run the error-free circuit from |0...0>.

    Returns:
        The output statevector and its probability row (|amplitude|^2,
        renormalized to machine precision).
    """
    _check_statevector_budget(spec.n_qubits)
    amps = np.zeros(spec.d, dtype=np.complex128)
    amps[0] = 1.0
    amps = _apply_layers(amps, generate_gates(spec), spec.n_qubits)
    state = Statevector(amps)
    return state, state.probabilities()


def is_unitary(op: np.ndarray, atol: float = UNITARY_ATOL) -> bool:
    op = np.asarray(op, dtype=np.complex128)
    if op.ndim != 2 or op.shape[0] != op.shape[1]:
        return False
    eye = np.eye(op.shape[0])
    return bool(np.max(np.abs(op.conj().T @ op - eye)) <= atol)


def simulate_trajectory(
    spec: CircuitSpec,
    insertion: tuple[int, np.ndarray, Sequence[int]],
) -> np.ndarray:
    """Output distribution with one unitary operator inserted mid-circuit.

    Args:
        insertion: (slot, operator, qubits).  The slot counts gate
            layers applied before the operator: 0 acts on |0...0>,
            spec.depth acts after the final layer.

    Returns:
        Probability row of length 2^n_qubits.
    """
    _check_statevector_budget(spec.n_qubits)
    slot, op, qubits = insertion
    slot = int(slot)
    if slot < 0 or slot > spec.depth:
        raise InvalidInputError(
            f"insertion slot {slot} outside [0, {spec.depth}]"
        )
    op = np.asarray(op, dtype=np.complex128)
    if not is_unitary(op):
        raise InvalidInputError(
            "inserted operator is not unitary; readout errors use the "
            "classical perturbation path"
        )
    gate_layers = generate_gates(spec)
    amps = np.zeros(spec.d, dtype=np.complex128)
    amps[0] = 1.0
    amps = _apply_layers(amps, gate_layers[:slot], spec.n_qubits)
    amps = apply_operator(amps, op, qubits, spec.n_qubits)
    amps = _apply_layers(amps, gate_layers[slot:], spec.n_qubits)
    return Statevector(amps).probabilities()


# ---------------------------------------------------------------------------
# Classical readout perturbations


def readout_perturbation_row(
    base: np.ndarray,
    kind: ErrorKind,
    qubits: Sequence[int],
) -> np.ndarray:
    """Signed derivative row for a classical readout error.

    Readout10 on qubit j moves each outcome's z_j=1 mass onto its z_j=0
    partner: the row is +base(flip_j(z)) where z_j=0 and -base(z) where
    z_j=1.  Readout01 is the mirror image.  DoubleReadout1010 on (i,j)
    spreads the (z_i,z_j)=(1,1) mass with signs (+,-,-,+) over
    (00,01,10,11).  Rows sum to 0 exactly.
    """
    base = np.asarray(base, dtype=np.float64)
    d = base.size
    n = d.bit_length() - 1
    if d < 2 or (1 << n) != d:
        raise InvalidInputError(f"base length {d} is not a power of two")
    if np.any(base < 0) or abs(base.sum() - 1.0) > 1e-9:
        raise InvalidInputError("base must be a probability row")
    qubits = tuple(int(q) for q in qubits)
    if any(q < 0 or q >= n for q in qubits):
        raise InvalidInputError(f"qubits {qubits} out of range for {n} qubits")
    z = np.arange(d)

    if kind in (ErrorKind.READOUT_10, ErrorKind.READOUT_01):
        if len(qubits) != 1:
            raise InvalidInputError(f"{kind.value} targets exactly one qubit")
        (j,) = qubits
        bit = (z >> j) & 1
        # Entries at the source bit value lose their own mass; entries
        # at the destination value gain their flipped partner's mass.
        source_bit = 1 if kind is ErrorKind.READOUT_10 else 0
        flipped = base[z ^ (1 << j)]
        return np.where(bit == source_bit, -base, flipped)

    if kind is ErrorKind.DOUBLE_READOUT_1010:
        if len(qubits) != 2 or qubits[0] == qubits[1]:
            raise InvalidInputError("double readout needs two distinct qubits")
        i, j = qubits
        both_on = z | (1 << i) | (1 << j)
        mass = base[both_on]
        parity = ((z >> i) & 1) ^ ((z >> j) & 1)
        return np.where(parity == 1, -mass, mass)

    raise UnsupportedRowKindError(
        f"{kind.value} is not a classical readout perturbation"
    )


# ---------------------------------------------------------------------------
# Error model specification


@dataclass(frozen=True)
class KrausTerm:
    """One signed operator term of a custom error source."""

    weight: float
    operator: np.ndarray
    qubits: tuple[int, ...]

    def __post_init__(self):
        op = np.asarray(self.operator, dtype=np.complex128)
        qubits = tuple(int(q) for q in self.qubits)
        if op.shape != (1 << len(qubits), 1 << len(qubits)):
            raise InvalidInputError(
                f"operator shape {op.shape} does not match qubits {qubits}"
            )
        object.__setattr__(self, "operator", op)
        object.__setattr__(self, "qubits", qubits)


@dataclass(frozen=True)
class ErrorSource:
    """One error channel contributing a single matrix row.

    Args:
        label: Component identity (kind, qubits, layer).
        fidelity_coeff: Overlap-with-ideal coefficient used in fidelity
            conversion; None defers to the per-kind default, and sources
            with no default must set it explicitly before conversion.
        layers: 0-indexed gate layers for unitary insertions; the
            operator goes in immediately after each listed layer's gates
            and multi-layer sources average their trajectory rows (rates
            tied across layers).  Ignored for prep/readout/white-noise.
        kraus_terms: Explicit operator terms, required for Custom kinds
            (a single unit-weight unitary term).
    """

    label: ErrorLabel
    fidelity_coeff: float | None = None
    layers: tuple[int, ...] | None = None
    kraus_terms: tuple[KrausTerm, ...] | None = None

    def __post_init__(self):
        if self.layers is not None:
            layers = tuple(int(x) for x in self.layers)
            if not layers:
                raise InvalidInputError(f"{self.label}: empty layer list")
            object.__setattr__(self, "layers", layers)
        if self.kraus_terms is not None:
            object.__setattr__(self, "kraus_terms", tuple(self.kraus_terms))

    def resolved_fidelity_coeff(self) -> float | None:
        if self.fidelity_coeff is not None:
            return float(self.fidelity_coeff)
        return DEFAULT_FIDELITY_COEFF.get(self.label.kind)


@dataclass(frozen=True)
class ErrorModelSpec:
    """Ordered collection of error sources; rows follow source order."""

    sources: tuple[ErrorSource, ...]

    def __post_init__(self):
        object.__setattr__(self, "sources", tuple(self.sources))
        for src in self.sources:
            if src.label.kind is ErrorKind.IDEAL:
                raise InvalidInputError("the ideal row is implicit, not a source")

    @property
    def k(self) -> int:
        return 1 + len(self.sources)

    def to_json(self) -> dict:
        out = []
        for src in self.sources:
            entry: dict = {
                "label": src.label.to_json(),
                "fidelity_coeff": src.fidelity_coeff,
                "layers": list(src.layers) if src.layers is not None else None,
            }
            if src.kraus_terms is not None:
                entry["kraus_terms"] = [
                    {
                        "weight": t.weight,
                        "qubits": list(t.qubits),
                        "operator_re": np.real(t.operator).tolist(),
                        "operator_im": np.imag(t.operator).tolist(),
                    }
                    for t in src.kraus_terms
                ]
            out.append(entry)
        return {"sources": out}

    @staticmethod
    def from_json(obj: Mapping) -> "ErrorModelSpec":
        sources = []
        for entry in obj["sources"]:
            terms = None
            if entry.get("kraus_terms") is not None:
                terms = tuple(
                    KrausTerm(
                        weight=float(t["weight"]),
                        operator=np.asarray(t["operator_re"])
                        + 1j * np.asarray(t["operator_im"]),
                        qubits=tuple(t["qubits"]),
                    )
                    for t in entry["kraus_terms"]
                )
            sources.append(
                ErrorSource(
                    label=ErrorLabel.from_json(entry["label"]),
                    fidelity_coeff=entry.get("fidelity_coeff"),
                    layers=tuple(entry["layers"])
                    if entry.get("layers") is not None
                    else None,
                    kraus_terms=terms,
                )
            )
        return ErrorModelSpec(sources=tuple(sources))


_READOUT_KINDS = (
    ErrorKind.READOUT_10,
    ErrorKind.READOUT_01,
    ErrorKind.DOUBLE_READOUT_1010,
)

_UNITARY_1Q_KINDS = {
    ErrorKind.PAULI_X: _PAULI[ErrorKind.PAULI_X],
    ErrorKind.PAULI_Y: _PAULI[ErrorKind.PAULI_Y],
    ErrorKind.PAULI_Z: _PAULI[ErrorKind.PAULI_Z],
    ErrorKind.DEPHASE_1Q: _PAULI[ErrorKind.PAULI_Z],
}


def _pauli_tensor(kind: ErrorKind, n_targets: int) -> np.ndarray:
    op = _PAULI[kind]
    out = op
    for _ in range(n_targets - 1):
        out = np.kron(out, op)
    return out


def _source_operator(src: ErrorSource) -> tuple[np.ndarray, tuple[int, ...]]:
    """Resolve the inserted unitary for a non-readout source."""
    kind = src.label.kind
    qubits = src.label.qubits
    if kind is ErrorKind.CUSTOM:
        if src.kraus_terms is None or len(src.kraus_terms) != 1:
            raise UnsupportedRowKindError(
                f"{src.label}: Custom sources need exactly one unitary Kraus term"
            )
        term = src.kraus_terms[0]
        if term.weight != 1.0 or not is_unitary(term.operator):
            raise UnsupportedRowKindError(
                f"{src.label}: Custom term must be a unit-weight unitary"
            )
        return term.operator, term.qubits
    if kind is ErrorKind.STATE_PREP:
        if not qubits:
            raise InvalidInputError(f"{src.label}: state prep needs target qubits")
        return _pauli_tensor(ErrorKind.PAULI_X, len(qubits)), qubits
    if kind in (ErrorKind.PAULI_X, ErrorKind.PAULI_Y, ErrorKind.PAULI_Z):
        if not qubits:
            raise InvalidInputError(f"{src.label}: Pauli source needs target qubits")
        return _pauli_tensor(kind, len(qubits)), qubits
    if kind is ErrorKind.DEPHASE_1Q:
        if len(qubits) != 1:
            raise InvalidInputError(f"{src.label}: 1q dephasing needs one qubit")
        return _PAULI[ErrorKind.PAULI_Z], qubits
    if kind is ErrorKind.DEPHASE_2Q:
        if len(qubits) != 2:
            raise InvalidInputError(f"{src.label}: 2q dephasing needs a qubit pair")
        return DEPHASE_2Q_OP, qubits
    if kind is ErrorKind.FLIP_FLOP_2Q:
        if len(qubits) != 2:
            raise InvalidInputError(f"{src.label}: flip-flop needs a qubit pair")
        return FLIP_FLOP_2Q_OP, qubits
    raise UnsupportedRowKindError(f"no unitary insertion for kind {kind.value}")


def _source_slots(src: ErrorSource, depth: int) -> list[int]:
    """Insertion slots for a unitary source, validated against depth."""
    kind = src.label.kind
    if kind is ErrorKind.STATE_PREP:
        return [0]
    if src.layers is not None:
        layers = list(src.layers)
    elif src.label.layer is not None:
        layers = [src.label.layer]
    else:
        raise InvalidInputError(f"{src.label}: unitary source needs a layer")
    for layer in layers:
        if layer < 0 or layer >= depth:
            raise InvalidInputError(
                f"{src.label}: layer {layer} outside [0, {depth - 1}]"
            )
    return [layer + 1 for layer in layers]


def resolve_threads(threads: int | None = None) -> int:
    """Worker count: explicit argument, else RCS_LAB_THREADS, else 1."""
    if threads is None:
        env = os.environ.get("RCS_LAB_THREADS", "").strip()
        threads = int(env) if env else 1
    if threads < 1:
        raise InvalidInputError(f"thread count must be >= 1, got {threads}")
    return threads


def build_pi_matrix(
    spec: CircuitSpec,
    model: ErrorModelSpec,
    *,
    allow_large: bool = False,
    threads: int | None = None,
) -> DistributionMatrix:
    """Assemble the labeled distribution matrix for an error model.

    Row 0 is the ideal circuit's output distribution.  Unitary sources
    get trajectory rows (averaged when the source lists several layers),
    readout sources get signed classical rows built from the ideal row,
    and WhiteNoise sources get the uniform row.  The result is a pure
    function of (spec, model).

    Args:
        allow_large: Permit n_qubits > 14 (dense rows get big).
        threads: Worker threads for independent rows; defaults to the
            RCS_LAB_THREADS environment variable, else 1.
    """
    if spec.n_qubits > 14 and not allow_large:
        raise ResourceError(
            f"full matrix build at n_qubits={spec.n_qubits} needs allow_large=True"
        )
    _check_statevector_budget(spec.n_qubits)
    n, d = spec.n_qubits, spec.d
    gate_layers = generate_gates(spec)

    # Prefix cache: state after each completed layer, so each trajectory
    # only re-runs the circuit downstream of its insertion.
    prefixes: list[np.ndarray] = []
    amps = np.zeros(d, dtype=np.complex128)
    amps[0] = 1.0
    prefixes.append(amps)
    for gates in gate_layers:
        amps = amps.copy()
        for bond, u in gates:
            amps = apply_operator(amps, u, bond, n)
        prefixes.append(amps)
    ideal_row = Statevector(prefixes[-1]).probabilities()

    def make_row(src: ErrorSource) -> tuple[np.ndarray, RowKind]:
        kind = src.label.kind
        if kind in _READOUT_KINDS:
            row = readout_perturbation_row(ideal_row, kind, src.label.qubits)
            return row, RowKind.SIGNED_PERTURBATION
        if kind is ErrorKind.WHITE_NOISE:
            return np.full(d, 1.0 / d), RowKind.PROBABILITY
        op, qubits = _source_operator(src)
        if not is_unitary(op):
            raise UnsupportedRowKindError(
                f"{src.label}: non-unitary insertion operator"
            )
        slots = _source_slots(src, spec.depth)
        acc = np.zeros(d)
        for slot in slots:
            traj = apply_operator(prefixes[slot], op, qubits, n)
            traj = _apply_layers(traj, gate_layers[slot:], n)
            acc += Statevector(traj).probabilities()
        row = acc / len(slots)
        return row / row.sum(), RowKind.PROBABILITY

    n_workers = resolve_threads(threads)
    if n_workers > 1 and len(model.sources) > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            results = list(pool.map(make_row, model.sources))
    else:
        results = [make_row(src) for src in model.sources]

    rows = np.empty((1 + len(results), d))
    rows[0] = ideal_row
    kinds = [RowKind.PROBABILITY]
    labels = [ErrorLabel(ErrorKind.IDEAL)]
    for i, (row, rk) in enumerate(results):
        rows[1 + i] = row
        kinds.append(rk)
        labels.append(model.sources[i].label)
    return DistributionMatrix(rows=rows, labels=tuple(labels), row_kinds=tuple(kinds))


# ---------------------------------------------------------------------------
# Standard error-model catalogs


def bulk_layers(depth: int, exclude_boundary: int = 3) -> list[int]:
    """Gate layers kept after dropping the first/last exclusion band."""
    if exclude_boundary < 0:
        raise InvalidInputError("exclusion band must be >= 0")
    layers = list(range(exclude_boundary, depth - exclude_boundary))
    if not layers:
        raise InvalidInputError(
            f"depth {depth} leaves no bulk layers with exclusion {exclude_boundary}"
        )
    return layers


def device_error_model(
    spec: CircuitSpec,
    *,
    exclude_boundary: int = 3,
    include_white_noise: bool = True,
    include_double_readout: bool = True,
) -> ErrorModelSpec:
    """Full per-location catalog of the modeled physical error channels.

    Sources, in row order: state-prep flips per qubit; 1q dephasing per
    (qubit, bulk layer); 2q dephasing and flip-flop per (bond, bulk
    layer); asymmetric readout 1->0 and 0->1 per qubit; correlated
    double readout per qubit pair; optional uniform white-noise row.
    Boundary layers are excluded by default since errors there are
    nearly indistinguishable from readout/prep channels.
    """
    layers = bulk_layers(spec.depth, exclude_boundary)
    bonds = [bond for group in layer_bond_groups(spec) for bond in group]
    sources: list[ErrorSource] = []
    for q in range(spec.n_qubits):
        sources.append(ErrorSource(ErrorLabel(ErrorKind.STATE_PREP, (q,))))
    for layer in layers:
        for q in range(spec.n_qubits):
            sources.append(
                ErrorSource(ErrorLabel(ErrorKind.DEPHASE_1Q, (q,), layer))
            )
    for kind in (ErrorKind.DEPHASE_2Q, ErrorKind.FLIP_FLOP_2Q):
        for layer in layers:
            for bond in bonds:
                sources.append(ErrorSource(ErrorLabel(kind, bond, layer)))
    for kind in (ErrorKind.READOUT_10, ErrorKind.READOUT_01):
        for q in range(spec.n_qubits):
            sources.append(ErrorSource(ErrorLabel(kind, (q,))))
    if include_double_readout:
        for i in range(spec.n_qubits):
            for j in range(i + 1, spec.n_qubits):
                sources.append(
                    ErrorSource(ErrorLabel(ErrorKind.DOUBLE_READOUT_1010, (i, j)))
                )
    if include_white_noise:
        sources.append(ErrorSource(ErrorLabel(ErrorKind.WHITE_NOISE)))
    return ErrorModelSpec(sources=tuple(sources))


def pauli_layer_error_model(
    spec: CircuitSpec,
    *,
    layers: Sequence[int] | None = None,
    paulis: Sequence[ErrorKind] = (
        ErrorKind.PAULI_X,
        ErrorKind.PAULI_Y,
        ErrorKind.PAULI_Z,
    ),
) -> ErrorModelSpec:
    """Single-qubit Pauli insertions at every (qubit, layer) location.

    The final gate layer is excluded by default: after it, Z rows equal
    the ideal row and X/Y rows coincide, so they are not identifiable.
    """
    if layers is None:
        layers = range(spec.depth - 1) if spec.depth > 1 else range(spec.depth)
    layers = [int(x) for x in layers]
    sources = []
    for layer in layers:
        for q in range(spec.n_qubits):
            for kind in paulis:
                sources.append(ErrorSource(ErrorLabel(kind, (q,), layer)))
    return ErrorModelSpec(sources=tuple(sources))
