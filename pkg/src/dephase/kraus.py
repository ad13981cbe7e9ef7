"""Kraus decompositions of qubit dephasing channels.

Every channel here is diagonal in the computational basis, so each Kraus
operator is a diagonal matrix.  Basis states are ordered by binary counting
(``|0...0>`` first) and the *weight class* of a basis state is its Hamming
weight.  For the common-bath model the coherence between two basis states
depends only on their weight difference, which is what makes the
sign-pattern random-unitary construction possible.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares

from .bath import BathSpec, DephasingCoefficients, parity_weights, total_displacement_weight
from .errors import (
    BasisSearchFailed,
    DimensionMismatch,
    InfeasibleWeights,
    SearchFailed,
    SingularSystem,
)
from .numerics import as_matrix, min_norm_solve

COMPLETENESS_TOL = 1e-10
NEGATIVE_WEIGHT_TOL = 1e-12

SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)
IDENTITY_2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class KrausSet:
    """Ordered, labelled Kraus operators with optional mixture weights.

    When ``weights`` is given every operator is ``sqrt(weight)`` times a
    unitary.  ``phase`` optionally holds the diagonal of a fixed unitary that
    is applied after the mixture; it is *not* folded into ``ops`` (see
    :meth:`absorb_phase`).
    """

    ops: tuple[np.ndarray, ...]
    labels: tuple[str, ...]
    weights: tuple[float, ...] | None = None
    phase: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        ops = tuple(as_matrix(k) for k in self.ops)
        if not ops:
            raise ValueError("a Kraus set needs at least one operator")
        dim = ops[0].shape[0]
        if any(k.shape != (dim, dim) for k in ops):
            raise DimensionMismatch("all Kraus operators must share one square shape")
        if len(self.labels) != len(ops):
            raise ValueError("one label per operator is required")
        object.__setattr__(self, "ops", ops)
        object.__setattr__(self, "labels", tuple(self.labels))
        if self.weights is not None:
            if len(self.weights) != len(ops):
                raise ValueError("one weight per operator is required")
            object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    @property
    def dim(self) -> int:
        return self.ops[0].shape[0]

    def __len__(self) -> int:
        return len(self.ops)

    def stacked(self) -> np.ndarray:
        return np.stack(self.ops)

    def completeness_deviation(self) -> float:
        """max |sum_n K_n^dagger K_n - I|."""
        k = self.stacked()
        total = np.einsum("nji,njk->ik", k.conj(), k)
        return float(np.max(np.abs(total - np.eye(self.dim))))

    def unitaries(self, min_weight: float = 1e-14) -> list[np.ndarray | None]:
        """``K_n / sqrt(w_n)`` for each operator, ``None`` where the weight is negligible."""
        if self.weights is None:
            raise ValueError("Kraus set carries no weights")
        return [k / math.sqrt(w) if w >= min_weight else None for k, w in zip(self.ops, self.weights)]

    def random_unitary_deviation(self, min_weight: float = 1e-14) -> float:
        """Largest deviation of ``K_n / sqrt(w_n)`` from unitarity."""
        eye = np.eye(self.dim)
        dev = 0.0
        for u in self.unitaries(min_weight):
            if u is not None:
                dev = max(dev, float(np.max(np.abs(u.conj().T @ u - eye))))
        return dev

    def absorb_phase(self) -> "KrausSet":
        """Return the set with ``phase`` multiplied into every operator."""
        if self.phase is None:
            return self
        p = np.diag(self.phase)
        return KrausSet(tuple(p @ k for k in self.ops), self.labels, self.weights)


@dataclass(frozen=True)
class SchurMatrix:
    n_qubits: int
    gamma: float
    matrix: np.ndarray


@dataclass(frozen=True)
class SignBasis:
    """Sign assignments on weight classes ``0..n``.

    ``flips[i]`` lists the classes whose sign is -1 in vector ``i``.
    """

    n_qubits: int
    flips: tuple[tuple[int, ...], ...]

    @property
    def vectors(self) -> tuple[tuple[int, ...], ...]:
        n = self.n_qubits
        return tuple(tuple(-1 if w in f else 1 for w in range(n + 1)) for f in self.flips)

    def diagonals(self) -> list[np.ndarray]:
        """Each class-sign vector broadcast to a length ``2**n`` diagonal."""
        w = hamming_weights(self.n_qubits)
        return [np.asarray(v, dtype=float)[w] for v in self.vectors]

    def __len__(self) -> int:
        return len(self.flips)


def hamming_weights(n: int) -> np.ndarray:
    """Hamming weight of every basis index ``0 .. 2**n - 1``."""
    idx = np.arange(2**n)
    return np.array([bin(i).count("1") for i in idx], dtype=int)


def required_operator_count(n: int) -> int:
    """Number of sign-pattern operators needed for ``n`` qubits: 1 + n(n+1)/2."""
    return 1 + n * (n + 1) // 2


def class_pairs(n: int) -> list[tuple[int, int]]:
    """Weight-class pairs ordered by separation, then by the lower class.

    For ``n = 3`` this gives (0,1), (1,2), (2,3), (0,2), (1,3), (0,3).
    """
    return [(a, a + d) for d in range(1, n + 1) for a in range(n + 1 - d)]


# ---------------------------------------------------------------- builders


def build_common_nonRU(coeffs: DephasingCoefficients) -> KrausSet:
    """Vacuum / odd / even Kraus triple of two qubits in a common bath."""
    l1 = coeffs.l1
    ops = (
        np.diag([l1, 1, 1, l1]),
        coeffs.l2 * np.diag([1, 0, 0, -1]).astype(complex),
        coeffs.l3 * np.diag([1, 0, 0, 1]).astype(complex),
    )
    return KrausSet(ops, ("vacuum", "odd", "even"))


COMMON_RU_SIGNS = (
    (1, 1, 1, 1),
    (-1, 1, 1, 1),
    (1, 1, 1, -1),
    (1, -1, -1, 1),
)


def common_ru_weights(gamma: float) -> np.ndarray:
    """Weights of the four sign operators solving the two-qubit coherence constraints.

    The constraints are x1+x2+x3+x4 = 1, x2 = x3, x1-x4 = gamma and
    x1-2x2+x4 = gamma**4.
    """
    a = np.array(
        [
            [1, 1, 1, 1],
            [0, 1, -1, 0],
            [1, 0, 0, -1],
            [1, -1, -1, 1],
        ],
        dtype=complex,
    )
    rhs = np.array([1, 0, gamma, gamma**4], dtype=complex)
    x, _ = min_norm_solve(a, rhs)
    return x.real


def parity_closed_form_weights(coeffs: DephasingCoefficients) -> np.ndarray:
    """Weights written in terms of the parity coefficients ``l2`` and ``l3``.

    Kept only as a regression cross-check; ``l1`` is read as its modulus
    ``gamma``.  These do not reproduce the channel: at t = 0 they give
    (3/4, 1/4, 1/4, -1/4) rather than (1, 0, 0, 0).  Use
    :func:`common_ru_weights` instead.
    """
    l1, l2, l3 = coeffs.gamma, coeffs.l2, coeffs.l3
    x1 = 0.25 * (1 + 2 * l1 + abs(l3) ** 2 - abs(l2) ** 2)
    x2 = 0.25 * (1 - abs(l3) ** 2 + abs(l2) ** 2)
    x4 = 0.25 * (1 - 2 * l1 + abs(l3) ** 2 - abs(l2) ** 2)
    return np.array([x1, x2, x2, x4])


def common_phase_diagonal(n: int, phi_real: float) -> np.ndarray:
    """Diagonal of exp(-i Re(phi) S_z^2) for ``n`` qubits sharing one bath."""
    s = (n - 2 * hamming_weights(n)) / 2.0
    return np.exp(-1j * phi_real * s**2)


def _sign_kraus(signs, weights, labels, phase=None) -> KrausSet:
    ops = tuple(math.sqrt(max(w, 0.0)) * np.diag(np.asarray(s, dtype=complex)) for s, w in zip(signs, weights))
    return KrausSet(ops, labels, tuple(weights), phase)


def build_common_RU(coeffs: DephasingCoefficients, weights: Sequence[float] | None = None) -> KrausSet:
    """Four-operator random-unitary decomposition of the two-qubit common-bath channel.

    The returned operators are real sign matrices; the phase of ``l1`` is
    carried separately on ``phase`` so that ``absorb_phase()`` reproduces the
    channel of :func:`build_common_nonRU` exactly.  ``weights`` overrides the
    solved weights (used to evaluate alternative closed forms).

    Raises
    ------
    InfeasibleWeights
        When a solved weight is negative, i.e. for gamma above the root of
        gamma**3 + gamma**2 + gamma = 1.
    """
    x = common_ru_weights(coeffs.gamma) if weights is None else np.asarray(weights, dtype=float)
    if np.any(x < -NEGATIVE_WEIGHT_TOL):
        raise InfeasibleWeights(f"negative weight in {x.tolist()} at gamma={coeffs.gamma:.6g}", x)
    phase = np.array([coeffs.phase, 1, 1, coeffs.phase], dtype=complex)
    return _sign_kraus(COMMON_RU_SIGNS, x, ("K1", "K2", "K3", "K4"), phase)


def feasibility_threshold() -> float:
    """Largest gamma for which the two-qubit sign ansatz has nonnegative weights.

    Root of gamma**3 + gamma**2 + gamma - 1 in (0, 1).
    """
    roots = np.roots([1, 1, 1, -1])
    real = [r.real for r in roots if abs(r.imag) < 1e-12 and 0 < r.real < 1]
    return float(real[0])


def build_schur_matrix(n: int, gamma: float) -> SchurMatrix:
    """Coefficient matrix with entries gamma**((w(i) - w(j))**2)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    w = hamming_weights(n)
    diff = (w[:, None] - w[None, :]) ** 2
    return SchurMatrix(n, float(gamma), np.power(float(gamma), diff).astype(complex))


def class_coefficient_matrix(n: int, gamma: float) -> np.ndarray:
    """The (n+1) x (n+1) matrix gamma**((a - b)**2) over weight classes."""
    c = np.arange(n + 1)
    return np.power(float(gamma), (c[:, None] - c[None, :]) ** 2)


def _pair_column(signs: Sequence[int], pairs) -> list[int]:
    return [1] + [signs[a] * signs[b] for a, b in pairs]


def _candidate_flips(n: int):
    yield ()
    # single flips from the top class down: for n = 1 this picks (+, -)
    for w in range(n, -1, -1):
        yield (w,)
    for k in range(2, n + 1):
        for c in sorted(itertools.combinations(range(n + 1), k), key=lambda c: (c[-1] - c[0], c)):
            yield c


def ru_sign_basis(n: int) -> SignBasis:
    """Greedy selection of 1 + n(n+1)/2 class-sign vectors with an invertible pair system.

    Candidates are scanned in the order: no flip, single flips, then flip sets
    of growing size with contiguous sets first.  The selection is returned
    sorted by flip-set size; for three qubits it is
    (), (0,), (1,), (2,), (3,), (0, 1), (1, 2).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    need = required_operator_count(n)
    pairs = class_pairs(n)
    chosen: list[tuple[int, ...]] = []
    cols: list[list[int]] = []
    for flip in _candidate_flips(n):
        signs = [-1 if w in flip else 1 for w in range(n + 1)]
        trial = np.array(cols + [_pair_column(signs, pairs)], dtype=float)
        if np.linalg.matrix_rank(trial) == len(trial):
            chosen.append(flip)
            cols.append(_pair_column(signs, pairs))
            if len(chosen) == need:
                break
    if len(chosen) < need:
        raise BasisSearchFailed(f"found only {len(chosen)} of {need} independent sign vectors for n={n}")
    chosen.sort(key=lambda f: (len(f), f))
    return SignBasis(n, tuple(chosen))


def ru_system(basis: SignBasis) -> tuple[np.ndarray, list[tuple[int, int]]]:
    """System matrix of the weight equations: a trace row, then one row per class pair."""
    pairs = class_pairs(basis.n_qubits)
    cols = [_pair_column(v, pairs) for v in basis.vectors]
    return np.array(cols, dtype=int).T, pairs


def ru_rhs(n: int, gamma: float) -> np.ndarray:
    return np.array([1.0] + [gamma ** ((a - b) ** 2) for a, b in class_pairs(n)])


def ru_weights(basis: SignBasis, schur: SchurMatrix, tol: float = 1e-10) -> np.ndarray:
    """Solve the weight equations without checking the sign of the weights."""
    if basis.n_qubits != schur.n_qubits:
        raise DimensionMismatch("basis and Schur matrix describe different qubit counts")
    a, _ = ru_system(basis)
    if np.linalg.matrix_rank(a) < a.shape[0]:
        raise SingularSystem("sign basis gives a singular weight system")
    c = np.linalg.solve(a.astype(float), ru_rhs(basis.n_qubits, schur.gamma))
    diags = np.array(basis.diagonals())
    rebuilt = np.einsum("i,ia,ib->ab", c, diags, diags)
    if np.max(np.abs(rebuilt - schur.matrix)) > tol:
        raise SingularSystem("solved weights do not reproduce the Schur matrix")
    return c


def solve_ru_weights(basis: SignBasis, schur: SchurMatrix) -> KrausSet:
    """Random-unitary Kraus set ``sqrt(c_i) B_i`` reproducing ``schur``.

    Raises
    ------
    InfeasibleWeights
        If any solved weight is negative; the exception carries the full
        solution vector.
    """
    c = ru_weights(basis, schur)
    if np.any(c < -NEGATIVE_WEIGHT_TOL):
        raise InfeasibleWeights(f"negative weight in {c.tolist()} at gamma={schur.gamma:.6g}", c)
    labels = tuple(f"B{i + 1}" for i in range(len(c)))
    return _sign_kraus([d.astype(int) for d in basis.diagonals()], c, labels)


def build_single_qubit_parity(spec: BathSpec, t: float) -> KrausSet:
    """Odd / even parity pair for one qubit: sqrt(odd) sigma_z and sqrt(even) I."""
    if t < 0:
        raise ValueError("t must be >= 0")
    g_total = total_displacement_weight(spec, t)
    odd = parity_weights(g_total)[0]
    # the vacuum joins the even family here
    even = 0.5 * (1.0 + math.exp(-2.0 * g_total))
    return KrausSet((math.sqrt(odd) * SIGMA_Z, math.sqrt(even) * IDENTITY_2), ("odd", "even"), (odd, even))


def single_qubit_parity_from_gamma(gamma: float) -> KrausSet:
    odd, even = 0.5 * (1 - gamma), 0.5 * (1 + gamma)
    return KrausSet((math.sqrt(odd) * SIGMA_Z, math.sqrt(even) * IDENTITY_2), ("odd", "even"), (odd, even))


def build_individual_tensor(per_qubit: Sequence[KrausSet]) -> KrausSet:
    """All tensor products of per-qubit Kraus operators, first qubit leftmost."""
    if not per_qubit:
        raise ValueError("need at least one qubit")
    if any(s.dim != 2 for s in per_qubit):
        raise DimensionMismatch("per-qubit Kraus sets must act on one qubit")
    ops, labels, weights = [], [], []
    have_weights = all(s.weights is not None for s in per_qubit)
    for combo in itertools.product(*(range(len(s)) for s in per_qubit)):
        op = np.ones((1, 1), dtype=complex)
        w = 1.0
        for s, j in zip(per_qubit, combo):
            op = np.kron(op, s.ops[j])
            if have_weights:
                w *= s.weights[j]
        ops.append(op)
        labels.append(",".join(s.labels[j] for s, j in zip(per_qubit, combo)))
        weights.append(w)
    return KrausSet(tuple(ops), tuple(labels), tuple(weights) if have_weights else None)


# ------------------------------------------------------------- channel maps


def apply_channel(kset: KrausSet, rho) -> np.ndarray:
    """sum_n K_n rho K_n^dagger."""
    rho = as_matrix(rho)
    if rho.shape != (kset.dim, kset.dim):
        raise DimensionMismatch(f"state of shape {rho.shape} does not match channel dim {kset.dim}")
    k = kset.stacked()
    return np.einsum("nij,jk,nlk->il", k, rho, k.conj())


def process_matrix(kset: KrausSet) -> np.ndarray:
    """sum_n K_n (x) conj(K_n): column (i, j) is vec of the image of |i><j|."""
    k = kset.stacked()
    return np.einsum("nij,nkl->ikjl", k, k.conj()).reshape(kset.dim**2, kset.dim**2)


def mixture_process_matrix(unitaries: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    """Process matrix of sum_i w_i U_i rho U_i^dagger, also for signed (quasi) weights."""
    u = np.stack([as_matrix(x) for x in unitaries])
    d = u.shape[1]
    return np.einsum("n,nij,nkl->ikjl", np.asarray(weights, dtype=float), u, u.conj()).reshape(d * d, d * d)


def decomposition_equivalence(a, b, tol: float = 1e-10) -> tuple[bool, float]:
    """Compare the channels induced by two Kraus sets on every matrix unit.

    Either argument may also be a process matrix as returned by
    :func:`process_matrix` or :func:`mixture_process_matrix`.
    """
    pa = process_matrix(a) if isinstance(a, KrausSet) else np.asarray(a)
    pb = process_matrix(b) if isinstance(b, KrausSet) else np.asarray(b)
    if pa.shape != pb.shape:
        raise DimensionMismatch(f"process matrices {pa.shape} and {pb.shape} differ")
    dev = float(np.max(np.abs(pa - pb)))
    return dev <= tol, dev


# -------------------------------------------------------- phase-pattern search


def _phase_residual_fn(n: int, n_ops: int, gamma: float):
    pairs = class_pairs(n)
    a_idx = np.array([p[0] for p in pairs])
    b_idx = np.array([p[1] for p in pairs])
    target = np.array([gamma ** ((a - b) ** 2) for a, b in pairs])

    def unpack(z):
        # class 0 is gauge-fixed to phase 0 for every operator
        theta = np.zeros((n_ops, n + 1))
        theta[:, 1:] = z[: n_ops * n].reshape(n_ops, n)
        u = z[n_ops * n :]
        p = np.exp(u - u.max())
        return theta, p / p.sum()

    def residual(z):
        theta, p = unpack(z)
        diff = p @ np.exp(1j * (theta[:, a_idx] - theta[:, b_idx])) - target
        return np.concatenate([diff.real, diff.imag])

    return residual, unpack


def search_phase_ru(
    schur: SchurMatrix,
    n_ops: int | None = None,
    tol: float = 1e-9,
    restarts: int = 32,
    seed: int = 0,
) -> KrausSet:
    """Random-unitary decomposition with diagonal phase unitaries, found numerically.

    Minimizes sum over class pairs (a, b) of
    |sum_i p_i exp(i(theta_ia - theta_ib)) - gamma**((a-b)**2)|**2 over the
    phases and simplex weights, with seeded multi-start.  The returned set's
    ``weights`` are the mixture probabilities.

    Raises
    ------
    SearchFailed
        When no restart reaches ``tol``; carries the best residual.
    """
    n, gamma = schur.n_qubits, schur.gamma
    if n_ops is None:
        n_ops = required_operator_count(n)
    dim = 2**n
    if gamma == 1.0:
        return KrausSet((np.eye(dim, dtype=complex),), ("P1",), (1.0,))
    residual, unpack = _phase_residual_fn(n, n_ops, gamma)
    best = (math.inf, None)
    for child in np.random.SeedSequence(seed).spawn(restarts):
        rng = np.random.default_rng(child)
        z0 = np.concatenate([rng.uniform(-np.pi, np.pi, n_ops * n), rng.normal(0.0, 0.5, n_ops)])
        sol = least_squares(residual, z0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=4000)
        cost = float(np.sum(sol.fun**2))
        if cost < best[0]:
            best = (cost, sol.x)
        if cost <= tol:
            break
    cost, z = best
    if cost > tol:
        raise SearchFailed(f"phase search reached residual {cost:.3e} > {tol:.1e}", cost)
    theta, p = unpack(z)
    w = hamming_weights(n)
    ops = tuple(math.sqrt(pi) * np.diag(np.exp(1j * th[w])) for th, pi in zip(theta, p))
    return KrausSet(ops, tuple(f"P{i + 1}" for i in range(n_ops)), tuple(p))


def schur_channel(schur: SchurMatrix, rho) -> np.ndarray:
    return schur.matrix * as_matrix(rho)


def coherence_matrix(kset: KrausSet) -> np.ndarray:
    """Multipliers D with channel(rho) = D * rho, for a set of diagonal Kraus operators."""
    d = np.array([np.diag(k) for k in kset.ops])
    return np.einsum("na,nb->ab", d, d.conj())


def schur_process_matrix(coeffs, phase=None) -> np.ndarray:
    """Process matrix of rho -> P (coeffs * rho) P^dagger with optional diagonal phase P."""
    c = as_matrix(coeffs.matrix if isinstance(coeffs, SchurMatrix) else coeffs)
    if phase is not None:
        p = np.asarray(phase, dtype=complex)
        c = c * np.outer(p, p.conj())
    return np.diag(c.reshape(-1))


def hamming_schur_matrix(gammas: Sequence[float]) -> np.ndarray:
    """Coherence multipliers of independent single-qubit dephasing with factors ``gammas``."""
    out = np.ones((1, 1))
    for g in gammas:
        out = np.kron(out, np.array([[1.0, g], [g, 1.0]]))
    return out.astype(complex)
