"""Circuit simulator tests against a dense little-endian oracle."""

import os

import numpy as np
import pytest

import oracles as orc
from rcslab import (
    Chain1D,
    CircuitSpec,
    DistributionMatrix,
    ErrorKind,
    ErrorLabel,
    ErrorModelSpec,
    ErrorSource,
    FsimLike,
    Grid2D,
    HaarSU4,
    InvalidInputError,
    KrausTerm,
    ResourceError,
    RowKind,
    UnsupportedRowKindError,
    build_pi_matrix,
    bulk_layers,
    device_error_model,
    fsim_core,
    haar_unitary,
    pauli_layer_error_model,
    readout_perturbation_row,
    resolve_threads,
    simulate_ideal,
    simulate_trajectory,
)
from rcslab.circuits import (
    DEPHASE_2Q_OP,
    FLIP_FLOP_2Q_OP,
    generate_gates,
    layer_bond_groups,
)
from rcslab.rng import make_rng

X = np.array([[0, 1], [1, 0]], dtype=np.complex128)
Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)


# ---------------------------------------------------------------------------
# Specs, gates, geometry


def test_circuit_spec_validation():
    with pytest.raises(InvalidInputError):
        CircuitSpec(n_qubits=6, depth=2, geometry=Grid2D(2, 2), gate_seed=0)
    with pytest.raises(InvalidInputError):
        CircuitSpec(n_qubits=2, depth=-1, geometry=Chain1D(), gate_seed=0)


def test_circuit_spec_json_round_trip():
    spec = CircuitSpec(
        n_qubits=4,
        depth=3,
        geometry=Grid2D(2, 2),
        gate_seed=11,
        gate_kind=FsimLike(theta=0.4, phi=1.1),
    )
    assert CircuitSpec.from_json(spec.to_json()) == spec


def test_haar_unitary_is_unitary():
    u = haar_unitary(4, make_rng(3))
    np.testing.assert_allclose(u @ u.conj().T, np.eye(4), atol=1e-12)


def test_fsim_core_matrix():
    theta, phi = 0.7, 0.3
    m = fsim_core(theta, phi)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    expected = np.array(
        [
            [1, 0, 0, 0],
            [0, c, -1j * s, 0],
            [0, -1j * s, c, 0],
            [0, 0, 0, np.exp(1j * phi)],
        ]
    )
    np.testing.assert_allclose(m, expected, atol=1e-15)


def test_chain_bond_groups():
    spec = CircuitSpec(n_qubits=6, depth=2, geometry=Chain1D(), gate_seed=0)
    groups = layer_bond_groups(spec)
    assert groups[0] == [(0, 1), (2, 3), (4, 5)]
    assert groups[1] == [(1, 2), (3, 4)]


def test_grid_bond_groups_cover_all_edges():
    spec = CircuitSpec(n_qubits=9, depth=4, geometry=Grid2D(3, 3), gate_seed=0)
    groups = layer_bond_groups(spec)
    assert len(groups) == 4
    # every group is a matching: no qubit twice
    for group in groups:
        flat = [q for bond in group for q in bond]
        assert len(flat) == len(set(flat))
    all_edges = set()
    for r in range(3):
        for c in range(3):
            q = r * 3 + c
            if c + 1 < 3:
                all_edges.add((q, q + 1))
            if r + 1 < 3:
                all_edges.add((q, q + 3))
    covered = {tuple(sorted(b)) for g in groups for b in g}
    assert covered == all_edges


def test_grid_bond_groups_drop_empty_orientations():
    # a 2x3 grid has no odd vertical bonds, so only 3 groups remain
    spec = CircuitSpec(n_qubits=6, depth=4, geometry=Grid2D(2, 3), gate_seed=0)
    groups = layer_bond_groups(spec)
    assert len(groups) == 3
    covered = {tuple(sorted(b)) for g in groups for b in g}
    assert covered == {(0, 1), (3, 4), (1, 2), (4, 5), (0, 3), (1, 4), (2, 5)}


def test_gate_determinism():
    spec = CircuitSpec(n_qubits=4, depth=3, geometry=Chain1D(), gate_seed=5)
    a = generate_gates(spec)
    b = generate_gates(spec)
    for la, lb in zip(a, b):
        for (qa, ga), (qb, gb) in zip(la, lb):
            assert qa == qb
            np.testing.assert_array_equal(ga, gb)
    other = generate_gates(
        CircuitSpec(n_qubits=4, depth=3, geometry=Chain1D(), gate_seed=6)
    )
    assert not np.allclose(a[0][0][1], other[0][0][1])


# ---------------------------------------------------------------------------
# Ideal and trajectory simulation


def test_depth_zero_is_computational_zero():
    spec = CircuitSpec(n_qubits=3, depth=0, geometry=Chain1D(), gate_seed=0)
    sv, row = simulate_ideal(spec)
    assert row[0] == 1.0
    assert np.all(row[1:] == 0.0)


def test_single_x_flip():
    spec = CircuitSpec(n_qubits=1, depth=0, geometry=Chain1D(), gate_seed=0)
    row = simulate_trajectory(spec, (0, X, (0,)))
    np.testing.assert_allclose(row, [0.0, 1.0], atol=1e-15)


def test_z_stabilizes_zero_state():
    spec = CircuitSpec(n_qubits=2, depth=0, geometry=Chain1D(), gate_seed=0)
    row = simulate_trajectory(spec, (0, Z, (1,)))
    assert row[0] == pytest.approx(1.0, abs=1e-15)


def test_x_flip_targets_little_endian_bit():
    spec = CircuitSpec(n_qubits=3, depth=0, geometry=Chain1D(), gate_seed=0)
    for j in range(3):
        row = simulate_trajectory(spec, (0, X, (j,)))
        assert row[1 << j] == pytest.approx(1.0, abs=1e-15)


def test_ideal_matches_dense_oracle():
    spec = CircuitSpec(n_qubits=2, depth=1, geometry=Chain1D(), gate_seed=13)
    sv, row = simulate_ideal(spec)
    psi = orc.dense_simulate(generate_gates(spec), 2)
    np.testing.assert_allclose(row, np.abs(psi) ** 2, atol=1e-12)
    assert abs(np.linalg.norm(sv.amplitudes) - 1.0) < 1e-10


def test_trajectory_matches_dense_oracle():
    spec = CircuitSpec(n_qubits=2, depth=2, geometry=Chain1D(), gate_seed=13)
    layers = generate_gates(spec)
    for slot in (0, 1, 2):
        row = simulate_trajectory(spec, (slot, X, (1,)))
        psi = orc.dense_simulate(layers, 2, [(slot, X, (1,))])
        np.testing.assert_allclose(row, np.abs(psi) ** 2, atol=1e-12)


def test_trajectory_matches_dense_oracle_chain3():
    spec = CircuitSpec(n_qubits=3, depth=3, geometry=Chain1D(), gate_seed=5)
    layers = generate_gates(spec)
    row = simulate_trajectory(spec, (1, DEPHASE_2Q_OP, (0, 1)))
    psi = orc.dense_simulate(layers, 3, [(1, DEPHASE_2Q_OP, (0, 1))])
    np.testing.assert_allclose(row, np.abs(psi) ** 2, atol=1e-12)


def test_fsim_circuit_matches_dense_oracle():
    spec = CircuitSpec(
        n_qubits=4,
        depth=3,
        geometry=Chain1D(),
        gate_seed=8,
        gate_kind=FsimLike(theta=0.7, phi=0.3),
    )
    sv, row = simulate_ideal(spec)
    psi = orc.dense_simulate(generate_gates(spec), 4)
    np.testing.assert_allclose(row, np.abs(psi) ** 2, atol=1e-12)


def test_trajectory_rejects_nonunitary():
    spec = CircuitSpec(n_qubits=2, depth=1, geometry=Chain1D(), gate_seed=0)
    bad = np.array([[1, 0], [0, 0.5]], dtype=np.complex128)
    with pytest.raises(InvalidInputError):
        simulate_trajectory(spec, (0, bad, (0,)))


def test_trajectory_rejects_out_of_range_slot():
    spec = CircuitSpec(n_qubits=2, depth=1, geometry=Chain1D(), gate_seed=0)
    with pytest.raises(InvalidInputError):
        simulate_trajectory(spec, (2, X, (0,)))


# ---------------------------------------------------------------------------
# Readout perturbation rows


def test_readout10_single_qubit():
    row = readout_perturbation_row(np.array([0.3, 0.7]), ErrorKind.READOUT_10, (0,))
    np.testing.assert_allclose(row, [0.7, -0.7], atol=1e-15)


def test_readout01_mirror():
    row = readout_perturbation_row(np.array([0.3, 0.7]), ErrorKind.READOUT_01, (0,))
    np.testing.assert_allclose(row, [-0.3, 0.3], atol=1e-15)


def test_readout_zero_source_mass():
    row = readout_perturbation_row(np.array([1.0, 0.0]), ErrorKind.READOUT_10, (0,))
    np.testing.assert_allclose(row, [0.0, 0.0], atol=1e-15)


def test_double_readout_sign_pattern():
    base = np.array([0.1, 0.2, 0.3, 0.4])
    row = readout_perturbation_row(base, ErrorKind.DOUBLE_READOUT_1010, (0, 1))
    np.testing.assert_allclose(row, [0.4, -0.4, -0.4, 0.4], atol=1e-15)


def test_readout_rows_sum_to_zero():
    rng = np.random.default_rng(2)
    base = rng.dirichlet(np.ones(32))
    for kind, qs in (
        (ErrorKind.READOUT_10, (2,)),
        (ErrorKind.READOUT_01, (4,)),
        (ErrorKind.DOUBLE_READOUT_1010, (1, 3)),
    ):
        row = readout_perturbation_row(base, kind, qs)
        assert abs(row.sum()) < 1e-12


def test_readout_row_is_confusion_derivative():
    """Classical flip channels are affine in their rate, so the finite
    difference of the oracle channel recovers each row exactly."""
    rng = np.random.default_rng(7)
    base = rng.dirichlet(np.ones(16))
    g = 0.2
    for kind, src in ((ErrorKind.READOUT_10, 1), (ErrorKind.READOUT_01, 0)):
        row = readout_perturbation_row(base, kind, (2,))
        shifted = orc.confusion_apply(base, 2, g, src)
        np.testing.assert_allclose((shifted - base) / g, row, atol=1e-13)


def test_double_readout_is_damping_cross_term():
    rng = np.random.default_rng(0)
    base = rng.dirichlet(np.ones(16))
    gi, gj = 0.13, 0.31
    t = orc.confusion_apply(orc.confusion_apply(base, 1, gi, 1), 3, gj, 1)
    ri = readout_perturbation_row(base, ErrorKind.READOUT_10, (1,))
    rj = readout_perturbation_row(base, ErrorKind.READOUT_10, (3,))
    dd = readout_perturbation_row(base, ErrorKind.DOUBLE_READOUT_1010, (1, 3))
    resid = t - base - gi * ri - gj * rj
    np.testing.assert_allclose(resid, gi * gj * dd, atol=1e-15)


def test_readout_row_errors():
    base = np.array([0.5, 0.5])
    with pytest.raises(InvalidInputError):
        readout_perturbation_row(
            np.array([0.5, 0.6]), ErrorKind.READOUT_10, (0,)
        )
    with pytest.raises(UnsupportedRowKindError):
        readout_perturbation_row(base, ErrorKind.PAULI_X, (0,))
    with pytest.raises(InvalidInputError):
        readout_perturbation_row(
            np.array([0.1, 0.2, 0.3, 0.4]), ErrorKind.DOUBLE_READOUT_1010, (1, 1)
        )


# ---------------------------------------------------------------------------
# Error model specs and matrix builds


def test_empty_model_gives_ideal_row():
    spec = CircuitSpec(n_qubits=3, depth=2, geometry=Chain1D(), gate_seed=1)
    pi = build_pi_matrix(spec, ErrorModelSpec(sources=()))
    assert pi.k == 1
    assert pi.labels[0].kind is ErrorKind.IDEAL
    assert abs(pi.rows[0].sum() - 1.0) < 1e-12


def test_per_location_x_errors_count():
    spec = CircuitSpec(n_qubits=2, depth=2, geometry=Chain1D(), gate_seed=1)
    sources = tuple(
        ErrorSource(ErrorLabel(ErrorKind.PAULI_X, (q,), layer))
        for q in range(2)
        for layer in range(2)
    )
    pi = build_pi_matrix(spec, ErrorModelSpec(sources=sources))
    assert pi.k == 5
    assert all(rk is RowKind.PROBABILITY for rk in pi.row_kinds)
    np.testing.assert_allclose(pi.rows.sum(axis=1), 1.0, atol=1e-10)


def test_build_rejects_layer_at_depth():
    spec = CircuitSpec(n_qubits=2, depth=2, geometry=Chain1D(), gate_seed=1)
    model = ErrorModelSpec(
        sources=(ErrorSource(ErrorLabel(ErrorKind.PAULI_X, (0,), layer=2)),)
    )
    with pytest.raises(InvalidInputError):
        build_pi_matrix(spec, model)


def test_build_respects_size_cap():
    spec = CircuitSpec(n_qubits=15, depth=1, geometry=Chain1D(), gate_seed=1)
    with pytest.raises(ResourceError):
        build_pi_matrix(spec, ErrorModelSpec(sources=()))


def test_build_thread_count_invariance():
    spec = CircuitSpec(n_qubits=4, depth=4, geometry=Chain1D(), gate_seed=2)
    model = pauli_layer_error_model(spec)
    a = build_pi_matrix(spec, model, threads=1)
    b = build_pi_matrix(spec, model, threads=3)
    np.testing.assert_array_equal(a.rows, b.rows)
    assert a.labels == b.labels


def test_trajectory_rows_match_dense_oracle_via_build():
    spec = CircuitSpec(n_qubits=3, depth=2, geometry=Chain1D(), gate_seed=9)
    model = ErrorModelSpec(
        sources=(
            ErrorSource(ErrorLabel(ErrorKind.STATE_PREP, (1,))),
            ErrorSource(ErrorLabel(ErrorKind.PAULI_Y, (2,), layer=0)),
            ErrorSource(ErrorLabel(ErrorKind.FLIP_FLOP_2Q, (0, 1), layer=1)),
        )
    )
    pi = build_pi_matrix(spec, model)
    layers = generate_gates(spec)
    Y = np.array([[0, -1j], [1j, 0]])
    oracle_rows = [
        orc.dense_simulate(layers, 3, ins)
        for ins in (
            [(0, X, (1,))],
            [(1, Y, (2,))],
            [(2, FLIP_FLOP_2Q_OP, (0, 1))],
        )
    ]
    for got, psi in zip(pi.rows[1:], oracle_rows):
        np.testing.assert_allclose(got, np.abs(psi) ** 2, atol=1e-12)


def test_source_layer_falls_back_to_label():
    spec = CircuitSpec(n_qubits=2, depth=3, geometry=Chain1D(), gate_seed=4)
    via_label = ErrorSource(ErrorLabel(ErrorKind.PAULI_X, (0,), layer=1))
    via_field = ErrorSource(
        ErrorLabel(ErrorKind.PAULI_X, (0,)), layers=(1,)
    )
    a = build_pi_matrix(spec, ErrorModelSpec(sources=(via_label,)))
    b = build_pi_matrix(spec, ErrorModelSpec(sources=(via_field,)))
    np.testing.assert_allclose(a.rows[1], b.rows[1], atol=1e-14)


def test_custom_kraus_source():
    spec = CircuitSpec(n_qubits=2, depth=1, geometry=Chain1D(), gate_seed=4)
    term = KrausTerm(weight=1.0, operator=Z, qubits=(0,))
    src = ErrorSource(
        ErrorLabel(ErrorKind.CUSTOM, (0,), layer=0),
        kraus_terms=(term,),
    )
    pi = build_pi_matrix(spec, ErrorModelSpec(sources=(src,)))
    layers = generate_gates(spec)
    psi = orc.dense_simulate(layers, 2, [(1, Z, (0,))])
    np.testing.assert_allclose(pi.rows[1], np.abs(psi) ** 2, atol=1e-12)


def test_error_model_json_round_trip():
    model = device_error_model(
        CircuitSpec(n_qubits=3, depth=8, geometry=Chain1D(), gate_seed=0)
    )
    back = ErrorModelSpec.from_json(model.to_json())
    assert len(back.sources) == len(model.sources)
    assert [s.label for s in back.sources] == [s.label for s in model.sources]


# ---------------------------------------------------------------------------
# Catalog builders


def enumeration_count(n_qubits, n_bonds, n_bulk_layers):
    """Closed-form source count for the full device catalog."""
    prep = n_qubits
    dephase1 = n_qubits * n_bulk_layers
    two_q = 2 * n_bonds * n_bulk_layers
    readout = 2 * n_qubits
    doubles = n_qubits * (n_qubits - 1) // 2
    return prep + dephase1 + two_q + readout + doubles + 1  # + white noise


def test_bulk_layers_window():
    assert bulk_layers(12, 3) == [3, 4, 5, 6, 7, 8]
    assert bulk_layers(7, 3) == [3]
    with pytest.raises(InvalidInputError):
        bulk_layers(6, 3)


def test_device_catalog_count_n4():
    spec = CircuitSpec(n_qubits=4, depth=8, geometry=Chain1D(), gate_seed=0)
    model = device_error_model(spec)
    assert len(model.sources) == enumeration_count(4, 3, len(bulk_layers(8)))
    pi = build_pi_matrix(spec, model)
    assert pi.k == len(model.sources) + 1


def test_device_catalog_count_n8_depth12():
    spec = CircuitSpec(n_qubits=8, depth=12, geometry=Chain1D(), gate_seed=0)
    model = device_error_model(spec)
    assert len(model.sources) == 185
    assert enumeration_count(8, 7, 6) == 185


def test_device_catalog_row_kinds():
    spec = CircuitSpec(n_qubits=3, depth=8, geometry=Chain1D(), gate_seed=3)
    pi = build_pi_matrix(spec, device_error_model(spec))
    for lab, kind in zip(pi.labels, pi.row_kinds):
        signed = lab.kind in (
            ErrorKind.READOUT_10,
            ErrorKind.READOUT_01,
            ErrorKind.DOUBLE_READOUT_1010,
        )
        assert kind is (
            RowKind.SIGNED_PERTURBATION if signed else RowKind.PROBABILITY
        )
    white = [lab for lab in pi.labels if lab.kind is ErrorKind.WHITE_NOISE]
    assert len(white) == 1
    idx = pi.labels.index(white[0])
    np.testing.assert_allclose(pi.rows[idx], 1.0 / pi.d, atol=1e-15)


def test_pauli_layer_model_counts():
    spec = CircuitSpec(n_qubits=3, depth=4, geometry=Chain1D(), gate_seed=0)
    model = pauli_layer_error_model(spec)
    # X, Y, Z per qubit per layer, final gate layer excluded by default
    assert len(model.sources) == 3 * 3 * 3


def test_resolve_threads_precedence(monkeypatch):
    monkeypatch.delenv("RCS_LAB_THREADS", raising=False)
    assert resolve_threads(None) == 1
    assert resolve_threads(4) == 4
    monkeypatch.setenv("RCS_LAB_THREADS", "3")
    assert resolve_threads(None) == 3
    assert resolve_threads(2) == 2
    with pytest.raises(InvalidInputError):
        resolve_threads(0)
