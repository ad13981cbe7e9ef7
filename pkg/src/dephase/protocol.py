"""Environment measurement followed by outcome-conditioned unitary restoration.

Three schemes are supported:

``nonRU_parity``
    Two qubits in a common bath; the environment is measured as
    vacuum / odd / even photon number.  Restores states in
    span{|00>, |11>} and span{|01>, |10>} only.
``RU_basis``
    N qubits in a common bath, measured in the basis that realizes a
    random-unitary decomposition.  Restores arbitrary states.
``tensor_parity``
    N qubits with individual baths, each measured for photon parity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kraus
from .bath import BathSpec, DephasingCoefficients, coefficients_from_gamma, dephasing_coefficients
from .errors import InfeasibleWeights, SchemeUnavailable, SearchFailed
from .numerics import as_density, as_pure, fidelity, projector, state_fidelity

NEGLIGIBLE_PROBABILITY = 1e-14
SUCCESS_TOL = 1e-9

MODELS = ("common_bath", "individual_baths")
SCHEMES = {"nonRU_parity": "common_bath", "RU_basis": "common_bath", "tensor_parity": "individual_baths"}


@dataclass(frozen=True)
class Scenario:
    """One restoration experiment.

    ``bath`` is a single :class:`BathSpec` (shared by every qubit for
    individual baths) or a per-qubit list.  ``gamma`` replaces the
    bath-derived coefficients by ones with a real ``l1 = gamma``.
    """

    model: str
    n_qubits: int
    scheme: str
    initial_state: np.ndarray
    bath: BathSpec | tuple[BathSpec, ...] | None = None
    t: float = 0.0
    gamma: float | None = None
    search_seed: int = 0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}")
        if SCHEMES.get(self.scheme) != self.model:
            raise ValueError(f"scheme {self.scheme!r} is not available for model {self.model!r}")
        if self.scheme == "nonRU_parity" and self.n_qubits != 2:
            raise ValueError("nonRU_parity is defined for two qubits")
        if self.n_qubits < 1:
            raise ValueError("need at least one qubit")
        state = np.asarray(self.initial_state, dtype=complex)
        dim = 2**self.n_qubits
        if state.ndim == 1:
            state = as_pure(state, tol=1e-10)
            if state.size != dim:
                raise ValueError(f"state has dim {state.size}, expected {dim}")
        else:
            state = as_density(state, tol=1e-10)
            if state.shape != (dim, dim):
                raise ValueError(f"state has shape {state.shape}, expected {(dim, dim)}")
        object.__setattr__(self, "initial_state", state)
        if isinstance(self.bath, (list, tuple)):
            object.__setattr__(self, "bath", tuple(self.bath))
            if self.model == "common_bath":
                raise ValueError("a common bath takes a single BathSpec")
            if len(self.bath) != self.n_qubits:
                raise ValueError("need one bath per qubit")
        if self.bath is None and self.gamma is None:
            raise ValueError("give either a bath or gamma")
        if self.t < 0:
            raise ValueError("t must be >= 0")

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    @property
    def is_pure(self) -> bool:
        return self.initial_state.ndim == 1

    @property
    def rho(self) -> np.ndarray:
        return projector(self.initial_state) if self.is_pure else self.initial_state

    def coefficients(self, bath: BathSpec | None = None) -> DephasingCoefficients:
        if self.gamma is not None:
            return coefficients_from_gamma(self.gamma)
        return dephasing_coefficients(bath if bath is not None else self.bath, self.t)


@dataclass(frozen=True)
class RestorationPlan:
    outcomes: tuple[tuple[str, np.ndarray], ...]

    def unitary(self, label: str) -> np.ndarray:
        return dict(self.outcomes)[label]


@dataclass(frozen=True)
class BranchReport:
    label: str
    probability: float
    post_state: np.ndarray | None
    restored_state: np.ndarray | None
    fidelity: float | None

    @property
    def negligible(self) -> bool:
        return self.probability < NEGLIGIBLE_PROBABILITY


@dataclass(frozen=True)
class ProtocolSummary:
    branches: tuple[BranchReport, ...]
    average_fidelity: float
    min_fidelity: float
    success: bool

    @property
    def total_probability(self) -> float:
        return float(sum(b.probability for b in self.branches))


@dataclass(frozen=True)
class SampleSummary:
    seed: int
    shots: int
    labels: tuple[str, ...]
    counts: tuple[int, ...]
    frequencies: tuple[float, ...]
    probabilities: tuple[float, ...]
    standard_errors: tuple[float, ...]
    mean_fidelity: float
    outcomes: tuple[int, ...] = field(repr=False, default=())


# ----------------------------------------------------------- branch operators


def _common_ru_set(scenario: Scenario) -> kraus.KrausSet:
    """Random-unitary Kraus set of the common-bath channel including its phase."""
    coeffs = scenario.coefficients()
    n = scenario.n_qubits
    phase = kraus.common_phase_diagonal(n, coeffs.phi_total.real)
    schur = kraus.build_schur_matrix(n, coeffs.gamma)
    try:
        if n == 2:
            ru = kraus.build_common_RU(coeffs)
            return ru.absorb_phase()
        ru = kraus.solve_ru_weights(kraus.ru_sign_basis(n), schur)
    except InfeasibleWeights:
        try:
            ru = kraus.search_phase_ru(schur, seed=scenario.search_seed)
        except SearchFailed as exc:
            raise SchemeUnavailable(
                f"no random-unitary decomposition found at gamma={coeffs.gamma:.6g} "
                f"(best residual {exc.best_residual:.3e})"
            ) from exc
    return kraus.KrausSet(ru.ops, ru.labels, ru.weights, phase).absorb_phase()


def _individual_baths(scenario: Scenario) -> tuple:
    if isinstance(scenario.bath, tuple):
        return scenario.bath
    return (scenario.bath,) * scenario.n_qubits


def branch_kraus(scenario: Scenario) -> kraus.KrausSet:
    """Kraus operator attached to each measurement outcome of the scheme."""
    if scenario.scheme == "nonRU_parity":
        return kraus.build_common_nonRU(scenario.coefficients())
    if scenario.scheme == "RU_basis":
        return _common_ru_set(scenario)
    if scenario.gamma is not None:
        per = [kraus.single_qubit_parity_from_gamma(scenario.gamma)] * scenario.n_qubits
    else:
        per = [kraus.build_single_qubit_parity(b, scenario.t) for b in _individual_baths(scenario)]
    return kraus.build_individual_tensor(per)


def restoration_plan(scenario: Scenario, branches: kraus.KrausSet | None = None) -> RestorationPlan:
    """Unitary applied after each outcome; normalization is left to the branch probability."""
    if scenario.scheme == "nonRU_parity":
        flip = np.diag([1, 1, 1, -1]).astype(complex)
        eye = np.eye(4, dtype=complex)
        return RestorationPlan((("vacuum", eye), ("odd", flip), ("even", eye)))
    if scenario.scheme == "tensor_parity":
        ks = branches if branches is not None else branch_kraus(scenario)
        out = []
        for label in ks.labels:
            u = np.ones((1, 1), dtype=complex)
            for part in label.split(","):
                u = np.kron(u, kraus.SIGMA_Z if part == "odd" else kraus.IDENTITY_2)
            out.append((label, u))
        return RestorationPlan(tuple(out))
    ks = branches if branches is not None else branch_kraus(scenario)
    out = []
    for label, u in zip(ks.labels, ks.unitaries(min_weight=NEGLIGIBLE_PROBABILITY)):
        # outcomes that never occur keep the identity
        out.append((label, u.conj().T if u is not None else np.eye(scenario.dim, dtype=complex)))
    return RestorationPlan(tuple(out))


def enumerate_branches(scenario: Scenario) -> list[BranchReport]:
    """Exact outcome list with probabilities, post-measurement and restored states."""
    ks = branch_kraus(scenario)
    plan = restoration_plan(scenario, ks)
    rho = scenario.rho
    reports = []
    for label, k in zip(ks.labels, ks.ops):
        unnorm = k @ rho @ k.conj().T
        p = float(np.trace(unnorm).real)
        if p < NEGLIGIBLE_PROBABILITY:
            reports.append(BranchReport(label, max(p, 0.0), None, None, None))
            continue
        post = unnorm / p
        r = plan.unitary(label)
        restored = r @ post @ r.conj().T
        if scenario.is_pure:
            f = fidelity(scenario.initial_state, restored)
        else:
            f = state_fidelity(rho, restored)
        reports.append(BranchReport(label, p, post, restored, f))
    return reports


def run_protocol(scenario: Scenario) -> ProtocolSummary:
    branches = enumerate_branches(scenario)
    live = [b for b in branches if not b.negligible]
    avg = float(sum(b.probability * b.fidelity for b in live))
    worst = float(min(b.fidelity for b in live))
    return ProtocolSummary(tuple(branches), avg, worst, worst >= 1 - SUCCESS_TOL)


def sample_run(scenario: Scenario, seed: int, shots: int) -> SampleSummary:
    """Draw ``shots`` measurement outcomes from the exact branch distribution."""
    if shots < 1:
        raise ValueError("shots must be >= 1")
    branches = enumerate_branches(scenario)
    p = np.array([b.probability for b in branches])
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    outcomes = rng.choice(len(branches), size=shots, p=p)
    counts = np.bincount(outcomes, minlength=len(branches))
    freq = counts / shots
    stderr = np.sqrt(p * (1 - p) / shots)
    fids = np.array([b.fidelity if b.fidelity is not None else 0.0 for b in branches])
    return SampleSummary(
        seed=seed,
        shots=shots,
        labels=tuple(b.label for b in branches),
        counts=tuple(int(c) for c in counts),
        frequencies=tuple(float(f) for f in freq),
        probabilities=tuple(float(x) for x in p),
        standard_errors=tuple(float(s) for s in stderr),
        mean_fidelity=float(np.dot(counts, fids) / shots),
        outcomes=tuple(int(o) for o in outcomes),
    )


# ------------------------------------------------------------- named states


def phi_state(alpha: float) -> np.ndarray:
    """alpha |00> + sqrt(1 - alpha^2) |11>."""
    return np.array([alpha, 0, 0, math.sqrt(max(0.0, 1 - alpha**2))], dtype=complex)


def psi_state(alpha: float) -> np.ndarray:
    """alpha |01> + sqrt(1 - alpha^2) |10>."""
    return np.array([0, alpha, math.sqrt(max(0.0, 1 - alpha**2)), 0], dtype=complex)


def witness_state() -> np.ndarray:
    """(|00> + |01>) / sqrt(2), which mixes the two protected subspaces."""
    return np.array([1, 1, 0, 0], dtype=complex) / math.sqrt(2)


def involution_check(plan: RestorationPlan, tol: float = 1e-10) -> bool:
    return all(np.max(np.abs(u @ u - np.eye(u.shape[0]))) <= tol for _, u in plan.outcomes)


def per_qubit_probabilities(scenario: Scenario) -> list[tuple[float, float]]:
    """(odd, even) weights for each qubit of an individual-bath scenario."""
    if scenario.gamma is not None:
        return [(0.5 * (1 - scenario.gamma), 0.5 * (1 + scenario.gamma))] * scenario.n_qubits
    return [tuple(kraus.build_single_qubit_parity(b, scenario.t).weights) for b in _individual_baths(scenario)]
