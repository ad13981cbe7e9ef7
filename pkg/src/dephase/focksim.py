"""Exact simulation of qubits coupled to one truncated bosonic mode.

The coupled system operator is diagonal with eigenvalues ``s``, so the total
evolution is block diagonal: on the block of eigenvalue ``s`` it is

    exp(-i phi(t) s**2) exp(-i s G(t) b^dagger) exp(-i s G*(t) b)

acting on the Fock space truncated to ``cutoff`` levels.  Index ordering of
the joint space is system-major: ``a * cutoff + m``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import gammaln

from .bath import BathSpec, Mode, displacement_amplitude, mode_phase
from .errors import CutoffTooSmall, DimensionMismatch, RankDeficientInconsistent
from .kraus import KrausSet, hamming_weights
from .numerics import as_matrix, min_norm_solve, null_space, trace_norm

DEFAULT_CUTOFF = 64
DEFAULT_CUTOFF_M = 30


@dataclass(frozen=True)
class FockConfig:
    mode: Mode
    cutoff: int = DEFAULT_CUTOFF
    times: tuple[float, ...] = field(default=(0.0,))

    def __post_init__(self):
        if not isinstance(self.mode, Mode):
            object.__setattr__(self, "mode", Mode(*self.mode))
        if self.cutoff < 2:
            raise ValueError("cutoff must be >= 2")
        times = tuple(float(t) for t in self.times)
        if any(t < 0 for t in times) or list(times) != sorted(times):
            raise ValueError("times must be nonnegative and ascending")
        object.__setattr__(self, "times", times)

    @property
    def bath(self) -> BathSpec:
        return BathSpec((self.mode,))

    def displacement(self, t: float) -> complex:
        return displacement_amplitude(self.bath, 0, t)

    def phase(self, t: float) -> complex:
        return mode_phase(self.bath, 0, t)


@dataclass(frozen=True)
class CouplingSpec:
    """Eigenvalues of the system operator coupled to the mode."""

    n_qubits: int
    eigenvalues: tuple[float, ...]

    def __post_init__(self):
        ev = tuple(float(x) for x in self.eigenvalues)
        if len(ev) != 2**self.n_qubits:
            raise DimensionMismatch(f"need {2**self.n_qubits} eigenvalues, got {len(ev)}")
        if self.n_qubits > 0 and len(set(ev)) < 2:
            raise ValueError("coupling operator needs at least two distinct eigenvalues")
        object.__setattr__(self, "eigenvalues", ev)

    @classmethod
    def common_bath(cls, n: int) -> "CouplingSpec":
        """S_z = (sum of sigma_z) / 2; for two qubits (1, 0, 0, -1)."""
        return cls(n, tuple((n - 2 * hamming_weights(n)) / 2.0))

    @classmethod
    def single_qubit(cls) -> "CouplingSpec":
        """sigma_z coupling."""
        return cls(1, (1.0, -1.0))

    @property
    def dim(self) -> int:
        return 2**self.n_qubits


def creation_exponential(x: complex, cutoff: int) -> np.ndarray:
    """exp(x b^dagger) on the truncated space, entries x**(m-n)/(m-n)! sqrt(m!/n!) for m >= n.

    The truncated generator is nilpotent, so this is the exact finite series.
    """
    m = np.arange(cutoff)
    k = m[:, None] - m[None, :]
    lower = k >= 0
    kk = np.where(lower, k, 0)
    logmag = 0.5 * (gammaln(m[:, None] + 1) - gammaln(m[None, :] + 1)) - gammaln(kk + 1)
    out = np.zeros((cutoff, cutoff), dtype=complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        if x == 0:
            out[np.diag_indices(cutoff)] = 1.0
            return out
        out[lower] = np.exp(kk[lower] * np.log(complex(x)) + logmag[lower])
    return out


def annihilation_exponential(y: complex, cutoff: int) -> np.ndarray:
    """exp(y b) on the truncated space (transpose structure of the creation case)."""
    return creation_exponential(y, cutoff).T


def _check_cutoff(cfg: FockConfig, coup: CouplingSpec, t: float) -> complex:
    g = cfg.displacement(t)
    worst = max(abs(s * g) ** 2 for s in coup.eigenvalues)
    if worst > cfg.cutoff / 4:
        raise CutoffTooSmall(f"|s G|^2 = {worst:.3g} exceeds cutoff/4 = {cfg.cutoff / 4:.3g} at t={t}")
    return g


def total_unitary(cfg: FockConfig, coup: CouplingSpec, t: float) -> np.ndarray:
    """Joint system-mode evolution operator, dimension ``2**N * cutoff``."""
    g = _check_cutoff(cfg, coup, t)
    phi = cfg.phase(t)
    M = cfg.cutoff
    u = np.zeros((coup.dim * M, coup.dim * M), dtype=complex)
    cache: dict[float, np.ndarray] = {}
    for a, s in enumerate(coup.eigenvalues):
        if s not in cache:
            block = creation_exponential(-1j * s * g, M) @ annihilation_exponential(-1j * s * np.conj(g), M)
            cache[s] = np.exp(-1j * phi * s**2) * block
        u[a * M : (a + 1) * M, a * M : (a + 1) * M] = cache[s]
    return u


def safe_columns(cfg: FockConfig, coup: CouplingSpec, t: float, tol: float = 1e-12) -> np.ndarray:
    """Indices of joint columns whose support fits inside the truncated space.

    Entries of the truncated operator are exact, so a column keeps unit norm
    to within ``tol`` exactly when truncation removes no weight from it.
    """
    u = total_unitary(cfg, coup, t)
    norms = np.sum(np.abs(u) ** 2, axis=0)
    return np.flatnonzero(np.abs(norms - 1.0) <= tol)


def kraus_from_projection(cfg: FockConfig, coup: CouplingSpec, t: float, m: int) -> np.ndarray:
    """<m| U |0>, extracted from the joint operator."""
    if not 0 <= m < cfg.cutoff:
        raise ValueError(f"photon number {m} outside the truncated space")
    u = total_unitary(cfg, coup, t)
    M = cfg.cutoff
    return np.diag([u[a * M + m, a * M] for a in range(coup.dim)])


def fock_kraus_family(cfg: FockConfig, coup: CouplingSpec, t: float, count: int | None = None) -> list[np.ndarray]:
    """[<m|U|0> for m < count] from one joint-operator evaluation."""
    count = cfg.cutoff if count is None else count
    if count > cfg.cutoff:
        raise ValueError("count exceeds the cutoff")
    u = total_unitary(cfg, coup, t)
    M = cfg.cutoff
    cols = u[:, [a * M for a in range(coup.dim)]]
    return [np.diag([cols[a * M + m, a] for a in range(coup.dim)]) for m in range(count)]


def analytic_kraus(cfg: FockConfig, coup: CouplingSpec, t: float, m: int) -> np.ndarray:
    """Closed form diag_s exp(-i phi s^2) (-i s G)^m / sqrt(m!)."""
    g = cfg.displacement(t)
    phi = cfg.phase(t)
    out = []
    for s in coup.eigenvalues:
        x = -1j * s * g
        amp = 1.0 if m == 0 else (0.0 if x == 0 else np.exp(m * np.log(x) - 0.5 * gammaln(m + 1)))
        out.append(np.exp(-1j * phi * s**2) * amp)
    return np.diag(out)


def trace_norm_table(cfg: FockConfig, coup: CouplingSpec, m_max: int | None = None) -> list[tuple[float, int, float]]:
    """Rows (t, m, ||<m|U|0>||) over ``cfg.times`` and ``m < m_max``."""
    m_max = cfg.cutoff if m_max is None else m_max
    rows = []
    for t in cfg.times:
        for m, op in enumerate(fock_kraus_family(cfg, coup, t, m_max)):
            rows.append((t, m, trace_norm(op)))
    return rows


def reduced_system_state(cfg: FockConfig, coup: CouplingSpec, t: float, rho, env_projector=None) -> np.ndarray:
    """tr_E[U (rho x |0><0|) U^dagger (I x P)] for an optional diagonal environment projector."""
    rho = as_matrix(rho)
    if rho.shape != (coup.dim, coup.dim):
        raise DimensionMismatch("state does not match the coupling dimension")
    u = total_unitary(cfg, coup, t)
    M = cfg.cutoff
    # U |a>|0> restricted to each system index gives a (dim, M) amplitude table
    cols = u[:, [a * M for a in range(coup.dim)]].reshape(coup.dim, M, coup.dim)
    amp = np.einsum("ama->am", cols)
    if env_projector is not None:
        p = np.diag(as_matrix(env_projector)).real
        amp = amp * p[None, :]
    return rho * (amp @ amp.conj().T)


def reduced_environment_state(cfg: FockConfig, coup: CouplingSpec, t: float, rho) -> np.ndarray:
    """tr_S[U (rho x |0><0|) U^dagger] on the truncated Fock space."""
    rho = as_matrix(rho)
    u = total_unitary(cfg, coup, t)
    M = cfg.cutoff
    cols = u[:, [a * M for a in range(coup.dim)]].reshape(coup.dim, M, coup.dim)
    amp = np.einsum("ama->am", cols)
    return np.einsum("am,ab,bn->mn", amp, np.diag(np.diag(rho)), amp.conj())


def parity_measurement_operators(cfg: FockConfig | int, split_vacuum: bool = True) -> tuple[np.ndarray, ...]:
    """Photon-number parity projectors on the truncated space.

    With ``split_vacuum`` returns (vacuum, odd, even-without-vacuum),
    otherwise (odd, even).
    """
    M = cfg.cutoff if isinstance(cfg, FockConfig) else int(cfg)
    m = np.arange(M)
    odd = np.diag((m % 2 == 1).astype(float))
    if split_vacuum:
        vac = np.diag((m == 0).astype(float))
        even = np.diag(((m % 2 == 0) & (m > 0)).astype(float))
        return vac, odd, even
    return odd, np.diag((m % 2 == 0).astype(float))


@dataclass(frozen=True)
class MeasurementBasis:
    """Rows of the basis change V from the Fock family to a target Kraus set."""

    V: np.ndarray
    residual: float
    gram_deviation: float

    @property
    def states(self) -> np.ndarray:
        """|psi_n> = sum_m conj(V[n, m]) |m>, one per row."""
        return self.V.conj()

    def completed(self) -> np.ndarray:
        """Square unitary whose leading rows are ``V``."""
        extra = null_space(self.V).conj().T
        return np.vstack([self.V, extra])


def solve_measurement_basis(
    target: KrausSet | Sequence[np.ndarray],
    family: Sequence[np.ndarray],
    cutoff_m: int = DEFAULT_CUTOFF_M,
    tol: float = 1e-8,
) -> MeasurementBasis:
    """Solve diag(K_n) = sum_m V[n, m] diag(L_m) for every target operator.

    Each row is first solved in the minimum-norm sense.  The minimum-norm
    rows span only the row space of the coefficient matrix, so they are then
    completed with null-space components (which leave every equation
    untouched) to make the rows orthonormal; among all such completions the
    one nearest the identity embedding is taken.

    Raises
    ------
    RankDeficientInconsistent
        If a row cannot be solved to ``tol``.
    """
    ops = target.ops if isinstance(target, KrausSet) else tuple(as_matrix(k) for k in target)
    if len(family) < cutoff_m:
        raise ValueError(f"family has {len(family)} operators, fewer than cutoff_m={cutoff_m}")
    for k in ops:
        if np.max(np.abs(k - np.diag(np.diag(k)))) > 0:
            raise ValueError("target operators must be diagonal")
    a = np.array([np.diag(as_matrix(op)) for op in family[:cutoff_m]]).T
    rows, worst = [], 0.0
    for k in ops:
        x, res = min_norm_solve(a, np.diag(k), rtol=np.inf)
        if res > tol:
            raise RankDeficientInconsistent(f"measurement-basis residual {res:.3e} exceeds {tol:.1e}", res)
        worst = max(worst, res)
        rows.append(x)
    v0 = np.array(rows)
    v = _complete_rows(a, v0)
    gram = float(np.max(np.abs(v @ v.conj().T - np.eye(len(v)))))
    return MeasurementBasis(v, worst, gram)


def _complete_rows(a: np.ndarray, v0: np.ndarray) -> np.ndarray:
    n, m = v0.shape
    gram0 = v0 @ v0.conj().T
    w, vecs = np.linalg.eigh(np.eye(n) - gram0)
    keep = w > 1e-12
    if not np.any(keep):
        return v0
    s = vecs[:, keep] * np.sqrt(w[keep])
    nb = null_space(a)
    r = s.shape[1]
    if nb.shape[1] < r:
        raise RankDeficientInconsistent("not enough null-space directions to orthonormalize rows", float(r))
    # rows v0 + s @ c @ nb.T; pick c (orthonormal rows) maximizing overlap with the identity embedding
    e = np.eye(n, m)
    mt = nb.T @ (e - v0).conj().T @ s
    uu, _, wh = np.linalg.svd(mt, full_matrices=False)
    c = wh.conj().T @ uu.conj().T
    return v0 + s @ c @ nb.T


def outcome_probabilities(basis: MeasurementBasis, cfg: FockConfig, coup: CouplingSpec, t: float, rho) -> np.ndarray:
    """<psi_n| rho_E |psi_n> for every row of the completed basis."""
    full = basis.completed()
    size = full.shape[1]
    rho_e = reduced_environment_state(cfg, coup, t, rho)[:size, :size]
    psi = full.conj()
    return np.einsum("nm,mk,nk->n", psi.conj(), rho_e, psi).real
