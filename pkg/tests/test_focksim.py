import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from dephase import focksim, kraus
from dephase.bath import BathSpec, Mode, dephasing_coefficients
from dephase.errors import CutoffTooSmall, DimensionMismatch, RankDeficientInconsistent
from dephase.focksim import CouplingSpec, FockConfig
from dephase.numerics import is_unitary, random_density

CFG = FockConfig(Mode(1.0, 1.0), cutoff=64)
TWO = CouplingSpec.common_bath(2)
ONE = CouplingSpec.single_qubit()


def test_coupling_eigenvalues():
    assert TWO.eigenvalues == (1.0, 0.0, 0.0, -1.0)
    assert CouplingSpec.common_bath(3).eigenvalues == (1.5, 0.5, 0.5, -0.5, 0.5, -0.5, -0.5, -1.5)
    with pytest.raises(DimensionMismatch):
        CouplingSpec(2, (1.0, -1.0))


@given(st.complex_numbers(max_magnitude=3.0), st.integers(2, 20))
def test_truncated_exponential_inverse(x, cutoff):
    a = focksim.creation_exponential(x, cutoff)
    b = focksim.creation_exponential(-x, cutoff)
    # the truncated generator is nilpotent, so exp(x)exp(-x) = I holds exactly
    np.testing.assert_allclose(a @ b, np.eye(cutoff), atol=1e-9 * max(1.0, np.abs(a).max()))


def test_truncated_exponential_against_series():
    from scipy.linalg import expm

    cutoff = 12
    bd = np.diag(np.sqrt(np.arange(1, cutoff)), -1)
    x = 0.7 - 0.4j
    np.testing.assert_allclose(focksim.creation_exponential(x, cutoff), expm(x * bd), atol=1e-13)


@pytest.mark.parametrize("t", [0.3, 1.0, math.pi, 5.0])
def test_kraus_family_matches_closed_form(t):
    fam = focksim.fock_kraus_family(CFG, TWO, t, 40)
    for m in range(40):
        np.testing.assert_allclose(fam[m], focksim.analytic_kraus(CFG, TWO, t, m), atol=1e-13)


@pytest.mark.parametrize("t", [0.3, 1.0, 2.0])
def test_kraus_family_against_schrodinger_integration(t):
    fam = focksim.fock_kraus_family(CFG, TWO, t, 30)
    for a, s in enumerate(TWO.eigenvalues):
        amps = oracles.fock_amplitudes_ode(1.0, 1.0, s, t, 40)
        np.testing.assert_allclose([fam[m][a, a] for m in range(30)], amps[:30], atol=1e-9)


def test_projection_matches_family():
    t = 1.1
    fam = focksim.fock_kraus_family(CFG, TWO, t, 5)
    for m in range(5):
        np.testing.assert_array_equal(focksim.kraus_from_projection(CFG, TWO, t, m), fam[m])


def test_safe_columns_cover_low_photon_numbers():
    u = focksim.total_unitary(CFG, TWO, math.pi)
    safe = focksim.safe_columns(CFG, TWO, math.pi)
    for a in range(4):
        assert a * 64 in safe
    cols = u[:, safe]
    np.testing.assert_allclose(cols.conj().T @ cols, np.eye(len(safe)), atol=1e-10)


def test_cutoff_too_small():
    cfg = FockConfig(Mode(1.0, 1.0), cutoff=8)
    with pytest.raises(CutoffTooSmall):
        focksim.total_unitary(cfg, TWO, math.pi)


@pytest.mark.parametrize("t", [0.3, 1.0, math.pi, 5.0])
def test_partial_trace_matches_nonru_triple(t, rng):
    ks = kraus.build_common_nonRU(dephasing_coefficients(CFG.bath, t))
    for _ in range(5):
        rho = random_density(4, rng)
        np.testing.assert_allclose(focksim.reduced_system_state(CFG, TWO, t, rho), kraus.apply_channel(ks, rho), atol=1e-12)


@pytest.mark.parametrize("t", [0.3, 1.0, math.pi])
def test_partial_trace_matches_ode_channel(t, rng):
    rho = random_density(4, rng)
    np.testing.assert_allclose(
        focksim.reduced_system_state(CFG, TWO, t, rho), oracles.common_bath_channel_ode(1.0, 1.0, t, rho), atol=1e-9
    )


@pytest.mark.parametrize("t", [0.3, 1.0, math.pi, 5.0])
def test_parity_projected_states_match_pair(t, rng):
    ks = kraus.build_single_qubit_parity(CFG.bath, t)
    odd, even = focksim.parity_measurement_operators(CFG, split_vacuum=False)
    rho = random_density(2, rng)
    for op, proj in zip(ks.ops, (odd, even)):
        np.testing.assert_allclose(
            focksim.reduced_system_state(CFG, ONE, t, rho, proj), op @ rho @ op.conj().T, atol=1e-12
        )


def test_parity_operators_partition_identity():
    vac, odd, even = focksim.parity_measurement_operators(10)
    np.testing.assert_array_equal(vac + odd + even, np.eye(10))
    for p in (vac, odd, even):
        np.testing.assert_array_equal(p @ p, p)


def test_environment_state_is_density(rng):
    rho = random_density(4, rng)
    env = focksim.reduced_environment_state(CFG, TWO, 2.0, rho)
    assert np.trace(env).real == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(env, env.conj().T, atol=1e-14)
    assert np.linalg.eigvalsh(env).min() > -1e-12


def test_trace_norm_table_decays():
    cfg = FockConfig(Mode(1.0, 1.0), cutoff=64, times=tuple(np.linspace(0, 2 * np.pi, 9)))
    rows = focksim.trace_norm_table(cfg, TWO, 40)
    assert len(rows) == 9 * 40
    at_pi = [n for t, m, n in rows if abs(t - np.pi) < 1e-12]
    assert all(b <= a for a, b in zip(at_pi[3:], at_pi[4:]))


def test_measurement_basis_rows_and_probabilities(rng):
    t = math.pi
    target = kraus.build_common_RU(dephasing_coefficients(CFG.bath, t)).absorb_phase()
    family = focksim.fock_kraus_family(CFG, TWO, t, 30)
    mb = focksim.solve_measurement_basis(target, family, 30, 1e-8)
    assert mb.V.shape == (4, 30)
    for k, row in zip(target.ops, mb.V):
        np.testing.assert_allclose(sum(v * f for v, f in zip(row, family)), k, atol=1e-10)
    np.testing.assert_allclose(mb.V @ mb.V.conj().T, np.eye(4), atol=1e-10)
    full = mb.completed()
    assert is_unitary(full, 1e-10)
    probs = focksim.outcome_probabilities(mb, CFG, TWO, t, random_density(4, rng))
    assert probs.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.abs(probs[4:]).max() < 1e-10


def test_measurement_basis_unreachable_target():
    t = 1.0
    family = focksim.fock_kraus_family(CFG, TWO, t, 30)
    # a set distinguishing |01> from |10> is outside the span of the family
    bad = [np.diag([1, 1, -1, 1]).astype(complex) / 2] * 4
    with pytest.raises(RankDeficientInconsistent):
        focksim.solve_measurement_basis(bad, family, 30, 1e-8)


def test_config_validation():
    with pytest.raises(ValueError):
        FockConfig(Mode(1.0, 1.0), cutoff=1)
    with pytest.raises(ValueError):
        FockConfig(Mode(1.0, 1.0), times=(1.0, 0.5))
    cfg = FockConfig((2.0, 0.5))
    assert isinstance(cfg.bath, BathSpec)


def test_measurement_basis_of_fock_family_is_identity():
    t = 1.4
    family = focksim.fock_kraus_family(CFG, TWO, t, 30)
    mb = focksim.solve_measurement_basis(family[:4], family, 30, 1e-8)
    np.testing.assert_allclose(mb.V, np.eye(4, 30), atol=1e-10)


def test_time_zero_norms():
    cfg = FockConfig(Mode(1.0, 1.0), cutoff=16, times=(0.0,))
    norms = [n for _, _, n in focksim.trace_norm_table(cfg, TWO)]
    assert norms[0] == pytest.approx(4.0)
    assert max(norms[1:]) == 0.0
