"""Frequency-domain steady state: Green's functions, transmission, Landauer current.

This route never touches the time loop, so its results serve as the
reference for long-time limits of the transient solver. Zero
temperature: lead ``alpha`` is filled up to ``mu0 + de_alpha``.

Conventions: ``T(eps) = 4 tr[G^r Lambda_R G^a Lambda_L]`` is the
transmission per spin channel (1 at a symmetric resonance) and the spin
degenerate current is ``J_L = (1/(pi*hbar)) int (f_L - f_R) T d eps``.
"""

from dataclasses import dataclass, replace

import numpy as np

from .device import device_shift
from .dissipation import energy_nodes, k_from_p
from .energy_integrals import window_integral
from .matcore import eig_general, solve
from .units import CURRENT_SCALE, HBAR

TRANSMISSION_PREFACTOR = 4.0
SYLVESTER_GUARD = 1e-12


class QuadratureNotConverged(ArithmeticError):
    pass


class SingularSylvester(ArithmeticError):
    pass


@dataclass(frozen=True)
class SteadyConfig:
    """Settled lead shifts ``de_left``/``de_right`` (eV) and device block ``h_inf``."""

    spec: object
    de_left: float
    de_right: float
    h_inf: np.ndarray
    panels: int = 64
    points: int = 32

    def __post_init__(self):
        if self.points < 16:
            raise ValueError("at least 16 quadrature points per panel are required")

    @classmethod
    def from_spec(cls, spec, panels=64, points=32, max_iter=200, tol=1e-12):
        """Settled configuration of ``spec``.

        With a charging term the device shift depends on the steady
        occupation; it is found by fixed-point iteration on ``tr sigma``.
        """
        de_l = spec.left.asymptotic_shift
        de_r = spec.right.asymptotic_shift
        eye = np.eye(spec.n)
        base = spec.device.h0 + 0.5 * (de_l + de_r) * eye
        cfg = cls(spec, de_l, de_r, base, panels, points)
        u = spec.device.charging_strength
        if u == 0.0:
            return cfg
        from .propagate import equilibrium_density

        trace0 = np.trace(equilibrium_density(spec, check=False)).real
        trace = trace0
        for _ in range(max_iter):
            cfg = replace(cfg, h_inf=base + u * (trace - trace0) * eye)
            new = np.trace(steady_sigma(cfg)).real
            # damped update; the map contracts for moderate charging
            new = 0.5 * (trace + new)
            if abs(new - trace) < tol:
                break
            trace = new
        return replace(cfg, h_inf=base + u * (trace - trace0) * eye)

    @property
    def mu_left(self):
        return self.spec.mu0 + self.de_left

    @property
    def mu_right(self):
        return self.spec.mu0 + self.de_right

    def shift_for(self, lead):
        return self.de_left if lead is self.spec.left or lead.label == "L" else self.de_right


def greens_retarded(cfg, eps):
    """``(eps - h_inf + i*Lambda)^-1`` with the total wide-band line-width."""
    n = cfg.spec.n
    a = eps * np.eye(n) - cfg.h_inf + 1j * cfg.spec.lam_total
    return solve(a, np.eye(n))


def transmission(cfg, eps):
    """Transmission per spin channel at energy ``eps`` (eV)."""
    if not np.any(cfg.spec.right.lam) or not np.any(cfg.spec.left.lam):
        return 0.0
    g = greens_retarded(cfg, eps)
    val = np.trace(g @ cfg.spec.right.lam @ g.conj().T @ cfg.spec.left.lam)
    return TRANSMISSION_PREFACTOR * float(val.real)


def transmission_curve(cfg, energies):
    return np.array([transmission(cfg, e) for e in energies])


def _window_integral_t(cfg, lo, hi, panels, points):
    nodes, weights = energy_nodes(lo, hi, panels, points)
    return float(np.dot(weights, transmission_curve(cfg, nodes)))


def landauer_current(cfg, unit="nA", hbar=HBAR, rtol=1e-6):
    """Steady current through the left interface, ``J_L = -J_R``.

    The sign follows ``J_alpha = -tr Q_alpha``: positive when electrons
    leave lead ``alpha``. Raises :class:`QuadratureNotConverged` if
    doubling the points per panel moves the result by more than ``rtol``.
    """
    mu_l, mu_r = cfg.mu_left, cfg.mu_right
    if mu_l == mu_r:
        return 0.0
    lo, hi = min(mu_l, mu_r), max(mu_l, mu_r)
    sign = 1.0 if mu_l > mu_r else -1.0
    coarse = _window_integral_t(cfg, lo, hi, cfg.panels, cfg.points)
    fine = _window_integral_t(cfg, lo, hi, cfg.panels, 2 * cfg.points)
    if abs(fine - coarse) > rtol * max(abs(fine), 1e-300):
        raise QuadratureNotConverged(f"window integral changed by {abs(fine - coarse):.3e} on refinement")
    return sign * fine / (np.pi * hbar) * CURRENT_SCALE[unit]


def _settled_decomp(cfg, lead):
    spec = cfg.spec
    return eig_general(cfg.h_inf - 1j * spec.lam_total - cfg.shift_for(lead) * np.eye(spec.n))


def p_alpha_steady(cfg, lead):
    """Stationary ``P_alpha = -(2i/pi) int (eps - h_inf + i*Lambda + de_alpha)^-1 d eps Lambda_alpha``."""
    spec = cfg.spec
    if not np.any(lead.lam):
        return np.zeros((spec.n, spec.n), dtype=np.complex128)
    dec = _settled_decomp(cfg, lead)
    res = dec.apply(window_integral(dec.eigenvalues, 0.0, spec.band_bottom, spec.mu0))
    return (-2j / np.pi) * res @ lead.lam


def steady_sigma(cfg):
    """Density matrix that zeroes the equation of motion at settled bias.

    Solves ``M sigma - sigma M^H = i sum_alpha K_alpha`` with
    ``M = h_inf - i*Lambda`` in the eigenbasis of ``M``.
    """
    spec = cfg.spec
    k_sum = sum(k_from_p(p_alpha_steady(cfg, lead)) for lead in spec.leads)
    dec = eig_general(cfg.h_inf - 1j * spec.lam_total)
    y = dec.inverse @ (1j * k_sum) @ dec.inverse.conj().T
    lam = dec.eigenvalues
    denom = lam[:, None] - np.conj(lam)[None, :]
    if np.any(np.abs(denom) < SYLVESTER_GUARD):
        raise SingularSylvester("Lambda vanishes on a conserved subspace; the steady state is not unique")
    sigma = dec.vectors @ (y / denom) @ dec.vectors.conj().T
    return 0.5 * (sigma + sigma.conj().T)


def steady_residual(cfg, sigma):
    """Norm of the EOM right-hand side (eV) at settled bias for ``sigma``."""
    spec = cfg.spec
    h = cfg.h_inf
    q = sum(
        k_from_p(p_alpha_steady(cfg, lead)) + lead.lam @ sigma + sigma @ lead.lam for lead in spec.leads
    )
    return float(np.linalg.norm(-1j * (h @ sigma - sigma @ h) - q))


def steady_currents(cfg, sigma=None, unit="nA", hbar=HBAR):
    """``-tr Q_alpha / hbar`` for both leads at the stationary density."""
    if sigma is None:
        sigma = steady_sigma(cfg)
    out = []
    for lead in cfg.spec.leads:
        q = k_from_p(p_alpha_steady(cfg, lead)) + lead.lam @ sigma + sigma @ lead.lam
        out.append(-np.trace(q).real / hbar * CURRENT_SCALE[unit])
    return tuple(out)


def settled_shift(spec):
    """Device level shift at ``t -> inf`` without charging."""
    return device_shift(spec, np.inf)
