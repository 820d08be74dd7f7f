"""Independent reference implementations used to pin test expectations.

Everything here is written the slow, obvious way: explicit loops over
basis states, literal tuple enumeration, dense kron embeddings, and
grid searches.  None of it shares code with the package, so agreement
between the two is evidence rather than tautology.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

EULER_GAMMA = 0.5772156649015328606


# ---------------------------------------------------------------------------
# Combinatorial primitives


def harmonic_digamma(n: int) -> float:
    """psi(1 + n) for integer n >= 0, via the harmonic-number identity."""
    if n < 0:
        raise ValueError("n must be >= 0")
    return -EULER_GAMMA + sum(1.0 / t for t in range(1, n + 1))


def stirling2(p: int, level: int) -> int:
    """Stirling number of the second kind by the textbook recursion."""
    if p == level == 0:
        return 1
    if p == 0 or level == 0 or level > p:
        return 0
    return level * stirling2(p - 1, level) + stirling2(p - 1, level - 1)


def elementary_symmetric(values, order: int) -> float:
    """e_order(values) summed literally over index combinations."""
    if order == 0:
        return 1.0
    return float(
        sum(math.prod(combo) for combo in itertools.combinations(values, order))
    )


def power_sum(values, order: int) -> float:
    return float(sum(v**order for v in values))


# ---------------------------------------------------------------------------
# Literal U-statistic evaluation (factorial-moment cumulants)


def _partition_type_vectors(p: int, level: int) -> list[tuple[int, ...]]:
    """Type vectors h with sum(i * h_i) = p and sum(h_i) = level."""
    out: list[tuple[int, ...]] = []

    def rec(rem: int, parts: int, mx: int, acc: list[int]) -> None:
        if parts == 0:
            if rem == 0:
                h = [0] * p
                for part in acc:
                    h[part - 1] += 1
                out.append(tuple(h))
            return
        lo = max(1, rem - mx * (parts - 1))
        hi = min(mx, rem - (parts - 1))
        for part in range(lo, hi + 1):
            rec(rem - part, parts - 1, part, acc + [part])

    rec(p, level, p, [])
    return out


def _disjoint_sets(pool: list[int], sizes: list[int]):
    if not sizes:
        yield []
        return
    for first in itertools.combinations(pool, sizes[0]):
        rest = [x for x in pool if x not in first]
        for tail in _disjoint_sets(rest, sizes[1:]):
            yield [first] + tail


def literal_cumulant(counts, d: int, p: int) -> float:
    """Brute-force xi_p: enumerate every disjoint index tuple directly.

    counts is the dense length-d count vector.  Exponential in d and p,
    intended for d <= 6, p <= 4 only.
    """
    n = int(sum(counts))
    T = {1: [1.0 / d] * d}
    for r in range(2, p + 1):
        T[r] = [
            math.prod(max(c - t, 0) for t in range(r)) / n**r for c in counts
        ]
    total = 0.0
    for level in range(1, p + 1):
        scale = (
            (-1) ** (level - 1)
            * math.factorial(level - 1)
            * math.factorial(d - level)
            / math.factorial(d)
        )
        for h in _partition_type_vectors(p, level):
            types = [i + 1 for i in range(p) if h[i] > 0]
            sizes = [h[i] for i in range(p) if h[i] > 0]
            for sets in _disjoint_sets(list(range(d)), sizes):
                prod = 1.0
                for ty, cells in zip(types, sets):
                    for j in cells:
                        prod *= T[ty][j] / math.factorial(ty)
                total += scale * prod
    return math.factorial(p) * total


# ---------------------------------------------------------------------------
# Dense little-endian circuit algebra


def embed_operator(op, qubits, n_qubits: int) -> np.ndarray:
    """Full 2^n x 2^n matrix for op acting on the given qubits.

    Bit t of the operator's local index addresses qubits[t]; global
    index bit q addresses qubit q (little-endian throughout).
    """
    d = 1 << n_qubits
    m = len(qubits)
    op = np.asarray(op, dtype=np.complex128).reshape(1 << m, 1 << m)
    full = np.zeros((d, d), dtype=np.complex128)
    for z in range(d):
        lin = 0
        base = z
        for t, q in enumerate(qubits):
            lin |= ((z >> q) & 1) << t
            base &= ~(1 << q)
        for lout in range(1 << m):
            znew = base
            for t, q in enumerate(qubits):
                if (lout >> t) & 1:
                    znew |= 1 << q
            full[znew, z] += op[lout, lin]
    return full


def layer_unitary(layer, n_qubits: int) -> np.ndarray:
    """Dense product of one brickwork layer's gates (disjoint targets)."""
    u = np.eye(1 << n_qubits, dtype=np.complex128)
    for qubits, gate in layer:
        u = embed_operator(gate, qubits, n_qubits) @ u
    return u


def dense_simulate(layers, n_qubits: int, insertions=()) -> np.ndarray:
    """Statevector run with optional (slot, operator, qubits) insertions.

    Slot s operators act before layer s; slot len(layers) acts after the
    final layer.
    """
    d = 1 << n_qubits
    psi = np.zeros(d, dtype=np.complex128)
    psi[0] = 1.0
    by_slot: dict[int, list] = {}
    for slot, opm, qs in insertions:
        by_slot.setdefault(slot, []).append((opm, qs))
    depth = len(layers)
    for s in range(depth + 1):
        for opm, qs in by_slot.get(s, ()):
            psi = embed_operator(opm, qs, n_qubits) @ psi
        if s < depth:
            psi = layer_unitary(layers[s], n_qubits) @ psi
    return psi


def density_pipeline(layers, n_qubits: int, events, damp10, damp01):
    """Exact noisy run: Bernoulli unitary channels plus end damping.

    events: iterable of (slot, operator, qubits, prob), each applied as
    rho -> (1-p) rho + p E rho E^dag at its slot.  damp10/damp01 give
    per-qubit amplitude damping (1->0) and excitation (0->1) rates,
    applied after the last layer, all 1->0 channels first.

    Returns (probs, overlap): the measured distribution diag(rho) and
    the ideal-state overlap <psi|rho|psi>, both including the damping.
    """
    d = 1 << n_qubits
    rho = np.zeros((d, d), dtype=np.complex128)
    rho[0, 0] = 1.0
    psi = dense_simulate(layers, n_qubits)
    by_slot: dict[int, list] = {}
    for slot, opm, qs, prob in events:
        by_slot.setdefault(slot, []).append((opm, qs, prob))
    depth = len(layers)
    for s in range(depth + 1):
        for opm, qs, prob in by_slot.get(s, ()):
            e = embed_operator(opm, qs, n_qubits)
            rho = (1.0 - prob) * rho + prob * (e @ rho @ e.conj().T)
        if s < depth:
            u = layer_unitary(layers[s], n_qubits)
            rho = u @ rho @ u.conj().T
    for rates, kraus in (
        (damp10, lambda g: ([[1, 0], [0, math.sqrt(1 - g)]], [[0, math.sqrt(g)], [0, 0]])),
        (damp01, lambda g: ([[math.sqrt(1 - g), 0], [0, 1]], [[0, 0], [math.sqrt(g), 0]])),
    ):
        for q, g in enumerate(rates):
            if g <= 0:
                continue
            k0, k1 = kraus(g)
            a = embed_operator(k0, (q,), n_qubits)
            b = embed_operator(k1, (q,), n_qubits)
            rho = a @ rho @ a.conj().T + b @ rho @ b.conj().T
    probs = np.real(np.diag(rho)).copy()
    overlap = float(np.real(psi.conj() @ rho @ psi))
    return probs, overlap


def confusion_apply(p, qubit: int, gamma: float, source_bit: int) -> np.ndarray:
    """Classical readout flip: move gamma of the source_bit mass across."""
    p = np.asarray(p, dtype=np.float64)
    out = p.copy()
    for z in range(p.size):
        if ((z >> qubit) & 1) == source_bit:
            out[z] -= gamma * p[z]
            out[z ^ (1 << qubit)] += gamma * p[z]
    return out


# ---------------------------------------------------------------------------
# Estimator oracles


def eiv_dense_solution(y_dense, v_dense, n: int, m: int) -> np.ndarray:
    """Unconstrained errors-in-variables solve from the dense definition."""
    v_dense = np.asarray(v_dense, dtype=np.float64)
    y_dense = np.asarray(y_dense, dtype=np.float64)
    k, d = v_dense.shape
    shifted = v_dense + 1.0
    mu = shifted / (d + m)
    a = mu @ mu.T
    l1 = shifted.sum(axis=1)
    l2 = (shifted**2).sum(axis=1)
    corr = ((d + m) * l1 - l2) / ((d + m) ** 2 * (d + m + 1))
    a = a + np.diag(corr)
    b = v_dense @ y_dense / (n * m)
    return np.linalg.solve(a, b)


def grid_search_simplex_k2(rows, counts, step: float = 1e-6) -> float:
    """Multinomial log-likelihood maximizer over c = (t, 1-t)."""
    rows = np.asarray(rows, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    sup = counts > 0
    t = np.arange(0.0, 1.0 + step / 2, step)
    mix = np.outer(t, rows[0, sup]) + np.outer(1.0 - t, rows[1, sup])
    with np.errstate(divide="ignore", invalid="ignore"):
        ll = np.where(mix > 0, np.log(mix), -np.inf) @ counts[sup]
    return float(t[np.argmax(ll)])


def grid_search_poisson_2d(rows, counts, n: int, ridge: float, hi: float = 1.5):
    """Coarse-to-fine maximizer of the Poisson objective on [0,hi]^2.

    Objective: sum_j Y_j log((Pi^T x)_j) - n (Pi^T x)_j - ridge ||x||^2,
    with the off-support mass folded in through the full row sums.
    """
    rows = np.asarray(rows, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    sup = counts > 0
    rowsums = rows.sum(axis=1)
    lo = np.array([0.0, 0.0])
    width = np.array([hi, hi])
    best = np.array([0.0, 0.0])
    for _ in range(4):
        g0 = np.linspace(lo[0], lo[0] + width[0], 201)
        g1 = np.linspace(lo[1], lo[1] + width[1], 201)
        x0, x1 = np.meshgrid(g0, g1, indexing="ij")
        mix = (
            x0[..., None] * rows[0, sup][None, None, :]
            + x1[..., None] * rows[1, sup][None, None, :]
        )
        with np.errstate(divide="ignore", invalid="ignore"):
            ll = np.where(mix > 0, np.log(mix), -np.inf) @ counts[sup]
        obj = ll - n * (x0 * rowsums[0] + x1 * rowsums[1]) - ridge * (x0**2 + x1**2)
        flat = np.argmax(obj)
        i0, i1 = np.unravel_index(flat, obj.shape)
        best = np.array([g0[i0], g1[i1]])
        width = width * (2.0 / 200)
        lo = np.maximum(best - width / 2, 0.0)
    return best


def vem_one_iteration(x, counts, v_rows, n: int) -> list[float]:
    """One variational fixed-point sweep with exact integer digammas."""
    k = len(v_rows)
    d = len(counts)
    s = [[math.exp(harmonic_digamma(int(v_rows[i][j]))) for j in range(d)] for i in range(k)]
    new = []
    for i in range(k):
        acc = 0.0
        for j in range(d):
            if counts[j] == 0:
                continue
            denom = sum(x[r] * s[r][j] for r in range(k))
            acc += counts[j] * s[i][j] / denom
        new.append(x[i] / n * acc)
    return new
