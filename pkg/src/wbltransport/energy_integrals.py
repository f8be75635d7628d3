"""Closed-form energy integrals over a finite occupied window.

The wide-band-limit dissipation terms reduce, in the eigenbasis of the
non-Hermitian matrix ``h - i*Lambda``, to scalar integrals

    I(lam, tau) = int_a^b exp(i*eps*tau) / (eps - lam) d eps

with ``Im lam <= 0``. For ``tau = 0`` this is a difference of complex
logarithms; for ``tau > 0`` it is a difference of exponential integrals
``E1`` evaluated on the right half plane, where the scaled function
``exp(z) * E1(z)`` stays bounded.
"""

import numpy as np
import scipy.special

from .matcore import EigDecomposition

POLE_TOL = 1e-12

_SCALED_SWITCH = 500.0
_CF_MAX_ITER = 5000
_SMALL_TAU = 1e-8


class PoleOnContour(ValueError):
    def __init__(self, eigenvalue, a, b):
        self.eigenvalue = eigenvalue
        super().__init__(
            f"eigenvalue {eigenvalue:.6g} lies on the real integration window [{a:g}, {b:g}]"
        )


def _exp1_scaled_cf(z):
    # modified Lentz on exp(z) E1(z) = 1/(z+1- 1/(z+3- 4/(z+5- ...)))
    tiny = 1e-300
    b = z + 1.0
    c = np.full_like(z, 1.0 / tiny)
    d = 1.0 / b
    h = d.copy()
    for i in range(1, _CF_MAX_ITER):
        an = -float(i * i)
        b = b + 2.0
        d = an * d + b
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = b + an / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        delta = c * d
        h = h * delta
        if np.all(np.abs(delta - 1.0) < 2e-16):
            return h
    raise ArithmeticError("continued fraction for E1 did not converge")


def exp1_scaled(z):
    """``exp(z) * E1(z)`` for complex ``z`` with ``Re z >= 0``, ``z != 0``.

    Uses ``scipy.special.exp1`` while ``exp(z)`` is representable and a
    continued fraction (which yields the scaled value directly) beyond.
    """
    z = np.asarray(z, dtype=np.complex128)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if np.any(z.real < -1e-14 * np.abs(z)):
        raise ValueError("exp1_scaled is only defined here for Re z >= 0")
    if np.any(z == 0):
        raise ValueError("E1 has a logarithmic singularity at z = 0")
    out = np.empty_like(z)
    small = z.real < _SCALED_SWITCH
    if np.any(small):
        out[small] = np.exp(z[small]) * scipy.special.exp1(z[small])
    if np.any(~small):
        out[~small] = _exp1_scaled_cf(z[~small])
    return out[0] if scalar else out


def _check_poles(lam, a, b):
    on_axis = (np.abs(lam.imag) < POLE_TOL) & (lam.real >= a) & (lam.real <= b)
    if np.any(on_axis):
        raise PoleOnContour(complex(lam[on_axis][0]), a, b)
    if np.any(lam.imag > POLE_TOL):
        raise ValueError("eigenvalues must satisfy Im(lam) <= 0 (non-negative line-width)")


def window_integral(lam, tau, a, b):
    """Scalar integral ``int_a^b exp(i eps tau) / (eps - lam) d eps``.

    Parameters
    ----------
    lam : array_like of complex
        Pole positions, ``Im lam <= 0``.
    tau : float
        Conjugate time in inverse energy units (``t / hbar``), ``tau >= 0``.
    a, b : float
        Window limits, ``a < b``. For ``tau > 0`` the lower limit may be
        ``-inf``: the oscillating integrand then converges on its own.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
    # round-off can leave a tiny positive imaginary part
    lam = np.where((lam.imag > 0) & (lam.imag <= POLE_TOL), lam.real + 0j, lam)
    _check_poles(lam, a, b)
    if tau < 0:
        raise ValueError("tau must be non-negative")
    if tau == 0:
        if not np.isfinite(a):
            raise ValueError("the non-oscillating integral needs a finite lower limit")
        return np.log(b - lam) - np.log(a - lam)
    if np.isfinite(a) and tau * np.max(np.abs([a - lam, b - lam])) < _SMALL_TAU:
        # E1 arguments underflow here; expand exp(i eps tau) to first order
        log = np.log(b - lam) - np.log(a - lam)
        return log + 1j * tau * ((b - a) + lam * log)
    wb = -1j * tau * (b - lam)
    upper = np.exp(1j * tau * b) * exp1_scaled(wb)
    if np.isneginf(a):
        return -upper
    wa = -1j * tau * (a - lam)
    return np.exp(1j * tau * a) * exp1_scaled(wa) - upper


def pair_integral(lam, a, b):
    """Matrix ``M[i, j] = int_a^b d eps / ((eps - lam_i)(eps - conj(lam_j)))``.

    Partial fractions over the pair of poles; coincident real poles use
    the double-pole limit.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=np.complex128))
    log_i = window_integral(lam, 0.0, a, b)
    log_j = np.conj(log_i)
    denom = lam[:, None] - np.conj(lam)[None, :]
    small = np.abs(denom) < POLE_TOL
    safe = np.where(small, 1.0, denom)
    out = (log_i[:, None] - log_j[None, :]) / safe
    if np.any(small):
        double = 1.0 / (a - lam) - 1.0 / (b - lam)
        out = np.where(small, np.broadcast_to(double[:, None], out.shape), out)
    return out


def fermi_resolvent_integral(decomp: EigDecomposition, t, mu0, eps_min, hbar):
    """``int_{eps_min}^{mu0} exp(i eps t / hbar) (eps - A)^-1 d eps`` for ``A = V diag(lam) V^-1``.

    ``t`` in fs, energies in eV; returns a matrix in the original basis.
    """
    if eps_min >= mu0:
        raise ValueError("eps_min must lie below mu0")
    vals = window_integral(decomp.eigenvalues, t / hbar, eps_min, mu0)
    return decomp.apply(vals)
