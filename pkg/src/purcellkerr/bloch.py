"""Steady-state optical response of a driven two-level emitter.

Reduced units throughout: hbar = 1, decay rates in units of the vacuum
radiative rate, dipole moment and emitter density default to 1.  The field
convention is E(t) = E exp(-i w t) + c.c. with Rabi amplitude
Omega = -mu E, so a positive imaginary part of the susceptibility means
absorption.  In the frame rotating at the drive frequency the coherence
rho_ba and the inversion w = rho_bb - rho_aa obey

    d rho_ba / dt = (i Delta - 1/T2) rho_ba + i Omega w
    d w      / dt = -(w + 1)/T1 + 4 Im(Omega conj(rho_ba))

where Delta is the drive detuning from the transition frequency,
1/T1 = gamma_rad_eff + gamma_nr and 1/T2 = (1/2)(1/T1) + gamma_phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import ConvergenceError

# slack for floating-point noise when validating physical bounds
_BOUND_SLACK = 1e-9


@dataclass(frozen=True)
class DecayRates:
    """Dissipation channels of the emitter, in units of the vacuum radiative rate.

    gamma_rad_eff is the (environment-modified) radiative decay rate,
    gamma_nr the non-radiative population decay rate, and gamma_phase the
    pure dephasing rate.  All must be >= 0; the population channels may be
    zero individually but operations deriving T1 reject the all-zero case.
    """

    gamma_rad_eff: float
    gamma_nr: float
    gamma_phase: float

    def __post_init__(self):
        for name in ("gamma_rad_eff", "gamma_nr", "gamma_phase"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class Lifetimes:
    """Population (t1) and coherence (t2) decay times; t2 <= 2 t1 always."""

    t1: float
    t2: float

    def __post_init__(self):
        if not (self.t1 > 0 and math.isfinite(self.t1)):
            raise ValueError(f"t1 must be finite and > 0, got {self.t1}")
        if not (self.t2 > 0 and math.isfinite(self.t2)):
            raise ValueError(f"t2 must be finite and > 0, got {self.t2}")
        if self.t2 > 2 * self.t1 * (1 + 1e-12):
            raise ValueError(f"t2 = {self.t2} exceeds 2*t1 = {2 * self.t1}")


@dataclass(frozen=True)
class EmitterParams:
    """Two-level material parameters in reduced units (hbar = 1)."""

    omega_ba: float
    rates: DecayRates
    mu: float = 1.0
    n_density: float = 1.0

    def __post_init__(self):
        if not self.omega_ba > 0:
            raise ValueError(f"omega_ba must be > 0, got {self.omega_ba}")
        if not self.mu > 0:
            raise ValueError(f"mu must be > 0, got {self.mu}")
        if not self.n_density > 0:
            raise ValueError(f"n_density must be > 0, got {self.n_density}")

    @property
    def lifetimes(self) -> Lifetimes:
        return lifetimes_from_rates(self.rates)


@dataclass(frozen=True)
class BlochState:
    """Steady state of the driven emitter: coherence rho_ba and inversion w."""

    rho_ba: complex
    w: float

    def __post_init__(self):
        if not (-1 - _BOUND_SLACK <= self.w <= 1 + _BOUND_SLACK):
            raise ValueError(f"inversion w = {self.w} outside [-1, 1]")
        if abs(self.rho_ba) > 0.5 + _BOUND_SLACK:
            raise ValueError(f"|rho_ba| = {abs(self.rho_ba)} exceeds 1/2")


def lifetimes_from_rates(rates: DecayRates) -> Lifetimes:
    """Convert decay rates to lifetimes.

    1/T1 = gamma_rad_eff + gamma_nr (population loss) and
    1/T2 = (1/2)(1/T1) + gamma_phase (coherence loss).
    """
    total = rates.gamma_rad_eff + rates.gamma_nr
    if total <= 0:
        raise ValueError(
            "infinite T1: gamma_rad_eff + gamma_nr must be > 0 "
            f"(got {rates.gamma_rad_eff} + {rates.gamma_nr})"
        )
    t1 = 1.0 / total
    t2 = 1.0 / (0.5 * total + rates.gamma_phase)
    return Lifetimes(t1=t1, t2=t2)


def total_chi(omega, e_field_sq, p: EmitterParams):
    """All-orders steady-state susceptibility at drive frequency omega.

    chi = -N mu^2 (Delta - i/T2) T2^2 / [1 + Delta^2 T2^2 + 4 mu^2 |E|^2 T1 T2]

    with Delta = omega - omega_ba.  Saturates to zero as |E|^2 grows; on
    resonance at zero field chi = i N mu^2 T2 (pure absorption).
    Accepts scalars or numpy arrays for omega / e_field_sq.
    """
    if np.any(np.asarray(e_field_sq) < 0):
        raise ValueError("e_field_sq must be >= 0")
    lt = p.lifetimes
    delta = np.asarray(omega, dtype=float) - p.omega_ba
    num = -p.n_density * p.mu**2 * (delta - 1j / lt.t2) * lt.t2**2
    den = 1.0 + delta**2 * lt.t2**2 + 4.0 * p.mu**2 * np.asarray(e_field_sq) * lt.t1 * lt.t2
    out = num / den
    return complex(out) if np.ndim(out) == 0 else out


def kerr_chi3(delta, p: EmitterParams):
    """Kerr (third-order) susceptibility at detuning delta from the transition.

    chi3 = (4/3) N mu^4 T1 T2^2 (Delta T2 - i) / (1 + Delta^2 T2^2)^2

    This is the coefficient in P = chi1 E + 3 chi3 |E|^2 E; its imaginary
    part is negative for every detuning, and its real part is odd in Delta.
    Accepts scalar or numpy-array delta.
    """
    lt = p.lifetimes
    x = np.asarray(delta, dtype=float) * lt.t2
    out = (4.0 / 3.0) * p.n_density * p.mu**4 * lt.t1 * lt.t2**2 * (x - 1j) / (1.0 + x**2) ** 2
    return complex(out) if np.ndim(out) == 0 else out


def kerr_chi3_large_detuning(delta, p: EmitterParams):
    """Large-detuning limit of Re kerr_chi3, valid for |Delta| T2 >> 1:

    Re chi3 ~= (4/3) N mu^4 (1/Delta)^3 (T1/T2)

    The relative gap to the full expression closes as 1/(Delta T2)^2.
    """
    if np.any(np.asarray(delta) == 0):
        raise ZeroDivisionError("large-detuning form is undefined at delta = 0")
    lt = p.lifetimes
    out = (4.0 / 3.0) * p.n_density * p.mu**4 * (1.0 / np.asarray(delta, dtype=float)) ** 3 * (lt.t1 / lt.t2)
    return float(out) if np.ndim(out) == 0 else out


def kerr_chi3_semiconductor(
    delta: float,
    omega: float,
    p_matrix: float,
    m_r: float,
    rates: DecayRates,
) -> float:
    """Reduced two-band semiconductor form of Re chi3 below the gap.

    Re chi3 ~= -(1/30 pi) (p/omega)^4 (2 m_r / Delta)^(3/2) (T1/T2)

    with Delta = omega_gap - omega > 0 and the charge folded into the
    dimensionless matrix-element factor p.  Negative for all valid inputs
    and carries the same T1/T2 lifetime scaling as the two-level form.
    """
    if delta <= 0:
        raise ValueError(f"delta must be > 0 (probe below the gap), got {delta}")
    if omega <= 0:
        raise ValueError(f"omega must be > 0, got {omega}")
    lt = lifetimes_from_rates(rates)
    return float(
        -(1.0 / (30.0 * math.pi))
        * (p_matrix / omega) ** 4
        * (2.0 * m_r / delta) ** 1.5
        * (lt.t1 / lt.t2)
    )


def bloch_steady_state_ode(
    rabi: complex,
    delta: float,
    lt: Lifetimes,
    *,
    residual_tol: float = 1e-10,
    max_steps: int = 10**7,
    rtol: float = 1e-12,
    atol: float = 1e-14,
) -> BlochState:
    """Drive the rotating-frame dynamics from the ground state to steady state.

    Integrates the coherence/inversion equations with an implicit stiff
    solver (Radau) in windows of ~40 relaxation times, stopping once the
    maximum right-hand side falls below residual_tol relative to the state
    norm.  Raises ConvergenceError (carrying the last residual) if the step
    budget is exhausted first.  This route is deliberately independent of
    the closed-form susceptibility and serves as its oracle.
    """
    rabi = complex(rabi)

    def rhs(_t, y):
        s = y[0] + 1j * y[1]
        ds = (1j * delta - 1.0 / lt.t2) * s + 1j * rabi * y[2]
        dw = -(y[2] + 1.0) / lt.t1 + 4.0 * (rabi * s.conjugate()).imag
        return [ds.real, ds.imag, dw]

    def residual(y):
        return max(abs(v) for v in rhs(0.0, y))

    y = [0.0, 0.0, -1.0]
    norm = 1.0
    if residual(y) <= residual_tol * norm:
        return BlochState(rho_ba=0j, w=-1.0)

    window = 40.0 * max(lt.t1, lt.t2)
    steps_used = 0
    res = math.inf
    while steps_used < max_steps:
        sol = solve_ivp(rhs, (0.0, window), y, method="Radau", rtol=rtol, atol=atol)
        if not sol.success:
            raise ConvergenceError(f"stiff solver failed: {sol.message}", residual=res)
        y = list(sol.y[:, -1])
        steps_used += max(len(sol.t) - 1, 1)
        norm = math.sqrt(y[0] ** 2 + y[1] ** 2 + y[2] ** 2)
        res = residual(y)
        if res <= residual_tol * norm:
            return BlochState(rho_ba=complex(y[0], y[1]), w=float(y[2]))
        window *= 2.0
    raise ConvergenceError(
        f"steady state not reached within {max_steps} steps "
        f"(residual {res:.3e}, target {residual_tol * norm:.3e})",
        residual=res,
    )


def chi_from_steady_state(state: BlochState, rabi: complex, p: EmitterParams) -> complex:
    """Reconstruct the susceptibility from a steady state.

    Uses P = N mu (rho_ba + rho_ab) = chi E together with Omega = -mu E,
    i.e. chi = -N mu^2 rho_ba / Omega.
    """
    if rabi == 0:
        raise ValueError("chi is undefined for zero drive amplitude")
    return -p.n_density * p.mu**2 * state.rho_ba / complex(rabi)


def enhancement_exact(delta: float, p_purcell: EmitterParams, p_hom: EmitterParams) -> float:
    """Ratio of Re kerr_chi3 with modified decay rates to its homogeneous value.

    Both parameter sets must share the transition frequency, dipole moment,
    and emitter density, so that only the dissipation differs.  Undefined on
    resonance, where both real parts vanish.
    """
    shared = ("omega_ba", "mu", "n_density")
    for name in shared:
        if getattr(p_purcell, name) != getattr(p_hom, name):
            raise ValueError(f"parameter sets must share {name}")
    if delta == 0:
        raise ValueError("undefined at resonance: Re chi3 vanishes on both sides")
    return float(kerr_chi3(delta, p_purcell).real / kerr_chi3(delta, p_hom).real)


def enhancement_max(rates_vac: DecayRates) -> float:
    """Large-detuning enhancement limit under complete radiative suppression.

    eta_max = [(1/2) G_nr + g_ph] / [(1/2)(G_nr + G_rad) + g_ph]
              * (G_rad + G_nr) / G_nr

    evaluated from the vacuum rates; equals exactly 1 when g_ph = 0 (the
    dephasing-free case, where the competing lifetime shifts cancel), and
    is unbounded as G_nr -> 0, which is rejected.
    """
    g_rad, g_nr, g_ph = rates_vac.gamma_rad_eff, rates_vac.gamma_nr, rates_vac.gamma_phase
    if g_nr <= 0:
        raise ValueError("enhancement unbounded: gamma_nr must be > 0")
    return ((0.5 * g_nr + g_ph) / (0.5 * (g_nr + g_rad) + g_ph)) * ((g_rad + g_nr) / g_nr)


def figure_of_merit(chi3: complex, wavelength: float) -> float:
    """Nonlinear switching figure of merit Re chi3 / (wavelength * Im chi3)."""
    if wavelength <= 0:
        raise ValueError(f"wavelength must be > 0, got {wavelength}")
    if chi3.imag == 0:
        raise ValueError("figure of merit undefined for Im chi3 = 0")
    return float(chi3.real / (wavelength * chi3.imag))
