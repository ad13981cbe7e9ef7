"""Time-dependent coefficients of the dephasing channels.

A bath is a finite list of bosonic modes ``(omega, g)`` starting in the
vacuum.  Every coefficient below depends on the modes only through the
per-mode displacement ``G_k(t)`` and phase ``phi_k(t)``; in particular the
parity weights and coherence factors depend only on
``g_total = sum_k |G_k(t)|**2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import QuadratureNotConverged

# below this |omega * t| the closed forms switch to their series limits
SMALL_PHASE = 1e-8


@dataclass(frozen=True)
class Mode:
    omega: float
    g: float

    def __post_init__(self):
        if not (math.isfinite(self.omega) and math.isfinite(self.g)):
            raise ValueError("mode parameters must be finite")
        if self.g < 0:
            raise ValueError(f"coupling g must be >= 0, got {self.g}")


@dataclass(frozen=True)
class BathSpec:
    """Discrete list of bosonic modes coupled to the system."""

    modes: tuple[Mode, ...]

    def __post_init__(self):
        modes = tuple(m if isinstance(m, Mode) else Mode(*m) for m in self.modes)
        if not modes:
            raise ValueError("a bath needs at least one mode")
        object.__setattr__(self, "modes", modes)

    @classmethod
    def single(cls, omega: float, g: float) -> "BathSpec":
        return cls((Mode(omega, g),))

    @classmethod
    def from_dict(cls, data: dict) -> "BathSpec":
        return cls(tuple(Mode(float(m["omega"]), float(m["g"])) for m in data["modes"]))

    def __len__(self) -> int:
        return len(self.modes)


@dataclass(frozen=True)
class DephasingCoefficients:
    """Scalars parameterizing every channel at one time point.

    ``l1`` is the vacuum-branch amplitude, ``l2``/``l3`` the odd/even branch
    weight roots, ``gamma = |l1|`` the single-step coherence factor.
    """

    t: float
    l1: complex
    l2: float
    l3: float
    gamma: float
    phi_total: complex
    g_total: float

    @property
    def phase(self) -> complex:
        """Unit-modulus phase of ``l1``."""
        return self.l1 / abs(self.l1)


def _mode(spec: BathSpec, k: int) -> Mode:
    return spec.modes[k]


def displacement_amplitude(spec: BathSpec, k: int, t: float) -> complex:
    """G_k(t) = integral_0^t g_k exp(i omega_k s) ds."""
    m = _mode(spec, k)
    x = m.omega * t
    if abs(x) < SMALL_PHASE:
        # series: g t (1 + i x/2)
        return complex(m.g * t * (1 + 0.5j * x))
    return m.g * (np.exp(1j * x) - 1) / (1j * m.omega)


def mode_phase(spec: BathSpec, k: int, t: float) -> complex:
    """phi_k(t), the solution of d(phi)/dt = -i g exp(-i omega t) G(t), phi(0) = 0.

    The imaginary part equals ``-|G_k(t)|**2 / 2``.
    """
    m = _mode(spec, k)
    w, g2 = m.omega, m.g**2
    x = w * t
    if abs(x) < SMALL_PHASE:
        # expansion to first order in omega
        return complex(-g2 * w * t**3 / 6, -g2 * t**2 / 2)
    return complex(-(g2 / w) * t + (g2 / w**2) * math.sin(x), -(g2 / w**2) * (1 - math.cos(x)))


def correlation(spec: BathSpec, t1: float, s: float) -> complex:
    """Bath correlation alpha(t1, s) = sum_k g_k^2 exp(-i omega_k (t1 - s))."""
    return complex(sum(m.g**2 * np.exp(-1j * m.omega * (t1 - s)) for m in spec.modes))


def total_displacement_weight(spec: BathSpec, t: float) -> float:
    """g_total(t) = sum_k |G_k(t)|^2."""
    return float(sum(abs(displacement_amplitude(spec, k, t)) ** 2 for k in range(len(spec))))


def total_phase(spec: BathSpec, t: float) -> complex:
    return complex(sum(mode_phase(spec, k, t) for k in range(len(spec))))


def _exponent(m: Mode, t: float) -> complex:
    w, g2 = m.omega, m.g**2
    if abs(w * t) < SMALL_PHASE:
        return complex(g2 * t**2 / 2, -g2 * w * t**3 / 6)
    return g2 * (-1j * t / w + (1 - np.exp(-1j * w * t)) / w**2)


def _nested_quadrature(spec: BathSpec, t: float, order: int) -> complex:
    x, wts = np.polynomial.legendre.leggauss(order)
    # outer t' on [0, t], inner s on [0, t']
    tp = 0.5 * t * (x + 1)
    wp = 0.5 * t * wts
    frac = 0.5 * (x + 1)
    s = tp[:, None] * frac[None, :]
    ws = 0.5 * tp[:, None] * wts[None, :]
    lag = tp[:, None] - s
    alpha = sum(m.g**2 * np.exp(-1j * m.omega * lag) for m in spec.modes)
    return complex(np.sum(wp * np.sum(ws * alpha, axis=1)))


def vacuum_exponent_quadrature(spec: BathSpec, t: float, tol: float = 1e-9, max_order: int = 4096) -> complex:
    """Double integral of alpha(t', s) over 0 <= s <= t' <= t by Gauss-Legendre refinement."""
    if t == 0:
        return 0j
    order = 16
    prev = _nested_quadrature(spec, t, order)
    while order < max_order:
        order *= 2
        cur = _nested_quadrature(spec, t, order)
        if abs(cur - prev) <= 0.1 * tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise QuadratureNotConverged(f"nested quadrature did not reach {tol:.0e} by order {max_order}")


def vacuum_coefficient(spec: BathSpec, t: float, method: str = "closed") -> complex:
    """l1(t) = exp(-int_0^t dt' int_0^t' alpha(t', s) ds).

    ``method="quadrature"`` evaluates the double integral numerically instead
    of using the per-mode closed form.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if method == "closed":
        expo = sum(_exponent(m, t) for m in spec.modes)
    elif method == "quadrature":
        expo = vacuum_exponent_quadrature(spec, t)
    else:
        raise ValueError(f"unknown method {method!r}")
    return complex(np.exp(-expo))


def parity_weights(g_total: float) -> tuple[float, float]:
    """(odd, even-excluding-vacuum) Fock weights for a total displacement ``g_total``."""
    # odd = exp(-g) sinh(g), even = exp(-g) (cosh(g) - 1); expm1 keeps small g accurate
    odd = -0.5 * math.expm1(-2.0 * g_total)
    even = 0.5 * math.expm1(-g_total) ** 2
    return odd, even


def parity_coefficients(spec: BathSpec, t: float) -> tuple[float, float]:
    """(l2, l3): square roots of the summed odd and non-vacuum even weights."""
    odd, even = parity_weights(total_displacement_weight(spec, t))
    return math.sqrt(odd), math.sqrt(even)


def coherence_factor(spec: BathSpec, t: float, coupling_scale: float = 1.0) -> float:
    """Decay of the coherence between adjacent coupled levels.

    ``coupling_scale`` is half the level spacing of the coupled operator:
    1 for a single qubit coupled through sigma_z, 1/2 for the common-bath
    S_z ladder.
    """
    return math.exp(-2.0 * total_displacement_weight(spec, t) * coupling_scale**2)


def coefficients_from_g_total(g_total: float, t: float = float("nan"), phi_real: float = 0.0) -> DephasingCoefficients:
    """Build coefficients directly from ``g_total`` and the real part of the phase."""
    if g_total < 0:
        raise ValueError("g_total must be >= 0")
    phi = complex(phi_real, -0.5 * g_total)
    l1 = complex(np.exp(-1j * phi))
    odd, even = parity_weights(g_total)
    return DephasingCoefficients(
        t=t, l1=l1, l2=math.sqrt(odd), l3=math.sqrt(even), gamma=abs(l1), phi_total=phi, g_total=g_total
    )


def coefficients_from_gamma(gamma: float) -> DephasingCoefficients:
    """Coefficients with a real, positive ``l1 = gamma``."""
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    return coefficients_from_g_total(-2.0 * math.log(gamma))


def dephasing_coefficients(spec: BathSpec, t: float) -> DephasingCoefficients:
    if t < 0:
        raise ValueError("t must be >= 0")
    g_total = total_displacement_weight(spec, t)
    phi = total_phase(spec, t)
    l1 = vacuum_coefficient(spec, t)
    odd, even = parity_weights(g_total)
    return DephasingCoefficients(
        t=float(t), l1=l1, l2=math.sqrt(odd), l3=math.sqrt(even), gamma=abs(l1), phi_total=phi, g_total=g_total
    )


def coefficient_grid(spec: BathSpec, times: Sequence[float]) -> list[DephasingCoefficients]:
    return [dephasing_coefficients(spec, t) for t in times]
