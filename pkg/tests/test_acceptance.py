"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Bath parameters used throughout
-------------------------------
* Oracle, measurement-basis and trace-norm checks use a single mode with
  ``omega = 1`` and ``g = 1`` over ``t`` in ``[0, 2 pi]``.  Then
  ``|G(t)|**2 = 2 (1 - cos t)`` peaks at 4, and ``t = pi`` gives
  ``gamma = exp(-2)``, below the feasibility threshold.
* The coefficient grid uses five baths of one to four modes and twenty
  times in ``[0, 8]``.
"""

import json
import math
import time

import numpy as np
import pytest

import oracles
from dephase import cli, focksim, kraus, protocol
from dephase.bath import (
    BathSpec,
    Mode,
    coefficients_from_gamma,
    dephasing_coefficients,
    vacuum_coefficient,
)
from dephase.errors import InfeasibleWeights
from dephase.focksim import CouplingSpec, FockConfig
from dephase.numerics import haar_state, numeric_rank, random_density
from dephase.protocol import Scenario

FIG_MODE = Mode(1.0, 1.0)
FIG_TIMES = tuple(np.linspace(0.0, 2 * np.pi, 121))

GRID_BATHS = (
    BathSpec.single(1.0, 1.0),
    BathSpec.single(0.2, 0.3),
    BathSpec((Mode(1.0, 0.7), Mode(2.3, 0.4))),
    BathSpec((Mode(0.5, 0.3), Mode(1.5, 0.5), Mode(3.0, 0.2))),
    BathSpec((Mode(0.1, 0.1), Mode(0.8, 0.6), Mode(2.0, 0.9), Mode(5.0, 1.2))),
)
GRID_TIMES = tuple(np.linspace(0.0, 8.0, 20))


@pytest.fixture
def verdict(capsys):
    def emit(number, title, ok, detail):
        with capsys.disabled():
            print(f"\n[criterion {number:2d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}")
        assert ok, detail

    return emit


def _grid_kraus_sets(spec, t):
    """Every builder output at one grid point; infeasible solves produce nothing."""
    coeffs = dephasing_coefficients(spec, t)
    sets = [
        kraus.build_single_qubit_parity(spec, t),
        kraus.build_individual_tensor([kraus.build_single_qubit_parity(spec, t)]),
        kraus.build_common_nonRU(coeffs),
        kraus.build_individual_tensor([kraus.build_single_qubit_parity(spec, t)] * 2),
        kraus.build_individual_tensor([kraus.build_single_qubit_parity(spec, t)] * 3),
    ]
    for n in (1, 2, 3):
        schur = kraus.build_schur_matrix(n, coeffs.gamma)
        try:
            if n == 2:
                sets.append(kraus.build_common_RU(coeffs))
            else:
                sets.append(kraus.solve_ru_weights(kraus.ru_sign_basis(n), schur))
        except InfeasibleWeights:
            pass
    return sets


def test_criterion_01_completeness(verdict):
    start = time.perf_counter()
    worst, count = 0.0, 0
    for spec in GRID_BATHS:
        for t in GRID_TIMES:
            for ks in _grid_kraus_sets(spec, t):
                worst = max(worst, ks.completeness_deviation())
                count += 1
    elapsed = time.perf_counter() - start
    ok = worst <= 1e-10 and elapsed < 10
    verdict(1, "completeness", ok, f"{count} Kraus sets, max deviation {worst:.2e}, {elapsed:.2f} s")


def test_criterion_02_coefficient_identities(verdict):
    worst_sum = worst_diff = worst_quad = 0.0
    for spec in GRID_BATHS:
        for t in GRID_TIMES:
            c = dephasing_coefficients(spec, t)
            g = abs(c.l1)
            worst_sum = max(worst_sum, abs(g**2 + c.l2**2 + c.l3**2 - 1))
            worst_diff = max(worst_diff, abs(c.l3**2 - c.l2**2 - (g**4 - g**2)))
            worst_quad = max(worst_quad, abs(c.l1 - vacuum_coefficient(spec, t, "quadrature")))
    ok = worst_sum <= 1e-10 and worst_diff <= 1e-10 and worst_quad <= 1e-8
    verdict(
        2,
        "coefficient identities",
        ok,
        f"sum {worst_sum:.2e}, difference {worst_diff:.2e}, quadrature {worst_quad:.2e}",
    )


def test_criterion_03_oracle_equivalence(verdict):
    start = time.perf_counter()
    cfg = FockConfig(FIG_MODE, cutoff=64)
    rng = np.random.default_rng(3)
    two, one = CouplingSpec.common_bath(2), CouplingSpec.single_qubit()
    times = (0.4, 1.3, 2.2, math.pi, 4.5)
    peak = max(abs(cfg.displacement(t)) ** 2 for t in times)
    worst_triple = worst_pair = 0.0
    odd_p, even_p = focksim.parity_measurement_operators(cfg, split_vacuum=False)
    for k in range(20):
        t = times[k % len(times)]
        triple = kraus.build_common_nonRU(dephasing_coefficients(cfg.bath, t))
        rho = random_density(4, rng)
        worst_triple = max(
            worst_triple,
            np.abs(focksim.reduced_system_state(cfg, two, t, rho) - kraus.apply_channel(triple, rho)).max(),
        )
        pair = kraus.build_single_qubit_parity(cfg.bath, t)
        rho1 = random_density(2, rng)
        worst_pair = max(
            worst_pair,
            np.abs(focksim.reduced_system_state(cfg, one, t, rho1) - kraus.apply_channel(pair, rho1)).max(),
        )
        for op, proj in zip(pair.ops, (odd_p, even_p)):
            branch = focksim.reduced_system_state(cfg, one, t, rho1, proj)
            worst_pair = max(worst_pair, np.abs(branch - op @ rho1 @ op.conj().T).max())
    elapsed = time.perf_counter() - start
    ok = peak <= 4 + 1e-12 and worst_triple <= 1e-6 and worst_pair <= 1e-6 and elapsed < 60
    verdict(
        3,
        "Fock oracle equivalence",
        ok,
        f"max|G|^2 {peak:.3f}, triple {worst_triple:.2e}, pair {worst_pair:.2e}, {elapsed:.2f} s",
    )


def test_criterion_04_test_vectors(verdict):
    gammas = (0.1, 0.37, 0.5, 0.9)
    schur_ok = all(
        np.array_equal(kraus.build_schur_matrix(3, g).matrix.real, np.power(g, oracles.C3_EXPONENTS))
        for g in gammas
    )
    system, _ = kraus.ru_system(kraus.ru_sign_basis(3))
    system_ok = system.dtype.kind == "i" and np.array_equal(system, oracles.N3_SYSTEM)
    ranks = {(n, g): numeric_rank(kraus.build_schur_matrix(n, g).matrix) for n in range(1, 7) for g in (0.1, 0.5, 0.9)}
    rank_ok = all(r == n + 1 for (n, _), r in ranks.items())
    verdict(
        4,
        "reference test vectors",
        schur_ok and system_ok and rank_ok,
        f"3-qubit matrix {schur_ok}, integer system {system_ok}, ranks N+1 {rank_ok}",
    )


def test_criterion_05_identity_sanity(verdict):
    solves = [kraus.common_ru_weights(1.0)]
    solves += [kraus.ru_weights(kraus.ru_sign_basis(n), kraus.build_schur_matrix(n, 1.0)) for n in range(1, 7)]
    solves.append(np.array(kraus.search_phase_ru(kraus.build_schur_matrix(3, 1.0)).weights))
    worst = 0.0
    for w in solves:
        e = np.zeros(len(w))
        e[0] = 1
        worst = max(worst, float(np.abs(np.asarray(w) - e).max()))
    closed_form = kraus.parity_closed_form_weights(dephasing_coefficients(BathSpec.single(1.0, 1.0), 0.0))
    pinned = bool(np.allclose(closed_form, [0.75, 0.25, 0.25, -0.25], atol=1e-15))
    verdict(
        5,
        "identity sanity",
        worst <= 1e-12 and pinned,
        f"max deviation from (1,0,...) {worst:.1e}; parity closed forms at t=0 {np.round(closed_form, 15).tolist()}",
    )


def test_criterion_06_ru_restoration(verdict):
    start = time.perf_counter()
    spec = BathSpec.single(1.0, 1.0)
    worst = 1.0
    cases = 0
    for n in (1, 2, 3):
        rng = np.random.default_rng(100 + n)
        for k in range(100):
            sc = Scenario("individual_baths", n, "tensor_parity", haar_state(2**n, rng), spec, 0.3 + 0.05 * k)
            worst = min(worst, protocol.run_protocol(sc).min_fidelity)
            cases += 1
    ru_cases = [(2, 0.1), (2, 0.3), (2, 0.5), (3, 0.1), (3, 0.3), (3, 0.5)]
    for n, gamma in ru_cases:
        rng = np.random.default_rng(int(1000 * gamma) + n)
        for _ in range(100):
            sc = Scenario("common_bath", n, "RU_basis", haar_state(2**n, rng), gamma=gamma)
            worst = min(worst, protocol.run_protocol(sc).min_fidelity)
            cases += 1
    rng = np.random.default_rng(7)
    for _ in range(100):
        # bath-derived coefficients including the collective phase, gamma = exp(-2)
        sc = Scenario("common_bath", 2, "RU_basis", haar_state(4, rng), spec, math.pi)
        worst = min(worst, protocol.run_protocol(sc).min_fidelity)
        cases += 1
    elapsed = time.perf_counter() - start
    ok = worst >= 1 - 1e-9 and elapsed < 30
    verdict(6, "random-unitary restoration", ok, f"{cases} states, min branch fidelity {worst:.15f}, {elapsed:.2f} s")


def test_criterion_07_nonru_restoration(verdict):
    spec = BathSpec.single(1.0, 1.0)
    alphas = np.linspace(-1.0, 1.0, 50)
    worst = 1.0
    for k, a in enumerate(alphas):
        t = 0.2 + 0.12 * k
        for state in (protocol.phi_state(a), protocol.psi_state(a)):
            s = protocol.run_protocol(Scenario("common_bath", 2, "nonRU_parity", state, spec, t))
            worst = min(worst, s.min_fidelity)
    witness = protocol.run_protocol(Scenario("common_bath", 2, "nonRU_parity", protocol.witness_state(), spec, math.pi))
    ok = worst >= 1 - 1e-9 and witness.average_fidelity < 0.999
    verdict(
        7,
        "non-random-unitary restoration",
        ok,
        f"100 family states min fidelity {worst:.15f}; witness average fidelity {witness.average_fidelity:.4f}",
    )


def test_criterion_08_measurement_basis(verdict):
    cfg = FockConfig(FIG_MODE, cutoff=64)
    coup = CouplingSpec.common_bath(2)
    t = math.pi
    target = kraus.build_common_RU(dephasing_coefficients(cfg.bath, t)).absorb_phase()
    mb = focksim.solve_measurement_basis(target, focksim.fock_kraus_family(cfg, coup, t, 30), 30, 1e-8)
    rng = np.random.default_rng(8)
    tail = 0.0
    for _ in range(10):
        probs = focksim.outcome_probabilities(mb, cfg, coup, t, random_density(4, rng))
        tail = max(tail, float(np.abs(probs[4:]).max()))
    ok = mb.residual <= 1e-8 and mb.gram_deviation <= 1e-8 and tail < 1e-8
    verdict(
        8,
        "measurement basis",
        ok,
        f"residual {mb.residual:.2e}, Gram deviation {mb.gram_deviation:.2e}, max tail probability {tail:.2e}",
    )


def test_criterion_09_trace_norm_cutoff(verdict):
    cfg = FockConfig(FIG_MODE, cutoff=64, times=FIG_TIMES)
    coup = CouplingSpec.common_bath(2)
    peak = max(abs(cfg.displacement(t)) ** 2 for t in FIG_TIMES)
    rows = focksim.trace_norm_table(cfg, coup)
    tail = max(n for _, m, n in rows if m > 30)
    head = max(n for _, m, n in rows if m == 1)
    ok = peak <= 4 + 1e-12 and tail < 1e-6
    verdict(
        9,
        "trace norm beyond m = 30",
        ok,
        f"{len(FIG_TIMES)} times, max|G|^2 {peak:.3f}, max norm for m>30 {tail:.2e} (m=1 peak {head:.3f})",
    )


def test_criterion_10_feasibility_map(verdict):
    root = oracles.cubic_root_bisection()

    def raises(gamma):
        try:
            kraus.build_common_RU(coefficients_from_gamma(gamma))
        except InfeasibleWeights:
            return True
        return False

    lo, hi = 0.01, 0.99
    assert not raises(lo) and raises(hi)
    while hi - lo > 1e-7:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if raises(mid) else (mid, hi)
    boundary = 0.5 * (lo + hi)
    # gamma = 1 is the identity channel, whose weights (1, 0, 0, 0) sit on the boundary
    grid = [g for g in np.linspace(0.01, 1.0, 400, endpoint=False) if abs(g - root) > 1e-6]
    exact = all(raises(g) == (g > root) for g in grid) and not raises(1.0)
    schur = kraus.build_schur_matrix(2, 0.9)
    _, dev = kraus.decomposition_equivalence(kraus.search_phase_ru(schur), kraus.schur_process_matrix(schur))
    ok = abs(boundary - root) <= 1e-6 and exact and dev <= 1e-8
    verdict(
        10,
        "feasibility map",
        ok,
        f"boundary {boundary:.8f} vs root {root:.8f}, grid match {exact}, search residual at 0.9 {dev:.2e}",
    )


def test_criterion_11_sampling(verdict, tmp_path):
    spec = BathSpec.single(1.0, 1.0)
    sc = Scenario("individual_baths", 2, "tensor_parity", haar_state(4, np.random.default_rng(11)), spec, 1.2)
    s = protocol.sample_run(sc, seed=2026, shots=100_000)
    z = max(abs(f - p) / se for f, p, se in zip(s.frequencies, s.probabilities, s.standard_errors) if se > 0)
    cfg = {
        "model": "common_bath",
        "n_qubits": 2,
        "scheme": "RU_basis",
        "bath": {"modes": [{"omega": 1.0, "g": 1.0}]},
        "times": [1.0, math.pi],
        "state": {"family": "haar(4)"},
        "shots": 5000,
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    outputs = []
    for name in ("first", "second"):
        out = tmp_path / name
        cli.run("restore", cli.load_config(str(path)), str(out), seed=99, stdout=open(tmp_path / f"{name}.stdout", "w"))
        outputs.append({p.name: p.read_bytes() for p in sorted(out.iterdir())})
    identical = outputs[0] == outputs[1] and len(outputs[0]) == 2
    ok = z <= 4 and identical
    verdict(11, "sampling", ok, f"max |freq - p| / stderr {z:.2f} over 1e5 shots; CLI byte-identical {identical}")
