"""Wide-band-limit dissipation functional.

For lead ``alpha`` the dissipation matrix is

    Q_alpha(t) = K_alpha(t) + {Lambda_alpha, sigma(t)},
    K_alpha(t) = P_alpha(t) + P_alpha(t)^H,
    P_alpha(t) = P_minus(t) + P_plus(t),

where ``P_minus`` carries the memory of the pre-bias equilibrium and
``P_plus`` the history accumulated after switch-on. All energy integrals
run over the finite window ``[band_bottom, mu0]`` and are evaluated in the
eigenbasis of the relevant non-Hermitian matrix ``h - i*Lambda - de``.

``P_plus`` is available in two forms: the adiabatic closed form used in
the time loop and the exact double integral (energy x past time), which
is expensive and kept for validation.
"""

from dataclasses import dataclass, field

import numpy as np

from .device import level_shift, level_shift_integral
from .energy_integrals import fermi_resolvent_integral, window_integral
from .matcore import as_cmatrix, eig_general, hermiticity_defect, mat_exp
from .units import HBAR

HERM_TOL = 1e-10


class HermiticityViolation(ValueError):
    pass


class InsufficientHistory(ValueError):
    pass


@dataclass(frozen=True)
class PropagatorState:
    """Accumulated ``U_alpha(t)`` and lead phase ``int_0^t de_alpha / hbar``."""

    lead_label: str
    u: np.ndarray
    phase: float = 0.0
    t: float = 0.0

    @classmethod
    def initial(cls, lead_label, n):
        return cls(lead_label, np.eye(n, dtype=np.complex128), 0.0, 0.0)

    @property
    def u_minus(self):
        """The lead-independent device propagator ``U^(-)(t)``."""
        return np.exp(-1j * self.phase) * self.u


@dataclass(frozen=True)
class DissipationResult:
    q: np.ndarray
    k: np.ndarray
    p_minus: np.ndarray
    p_plus: np.ndarray

    @property
    def current(self):
        """``-tr Q`` in eV; divide by hbar for electrons per fs."""
        return -np.trace(self.q).real


def propagator_advance(state, h_mid, de_mid, lambda_total, dt, hbar=HBAR):
    """Advance ``U_alpha`` by one step of length ``dt`` (fs).

    ``h_mid`` and ``de_mid`` are the device Hamiltonian and lead shift
    representative of the step (midpoint or step average). The new factor
    is applied on the left, so later times stand to the left of earlier
    ones as in a time-ordered product.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    n = state.u.shape[0]
    h_mid, lambda_total = as_cmatrix(h_mid), as_cmatrix(lambda_total)
    gen = h_mid - 1j * lambda_total - de_mid * np.eye(n)
    step = mat_exp(-1j * gen * (dt / hbar))
    return PropagatorState(state.lead_label, step @ state.u, state.phase + de_mid * dt / hbar, state.t + dt)


_PREF = -2j / np.pi


def p_minus(state, decomp0, lead, t, spec, hbar=HBAR):
    """Contribution of the pre-switch-on past.

    ``decomp0`` decomposes ``h_D(0) - i*Lambda``. Equal to
    ``-(2i/pi) exp(i phase) U^(-)(t) F0(t) Lambda_alpha`` with ``F0`` the
    oscillatory resolvent integral of the unbiased device.
    """
    if not np.any(lead.lam):
        return np.zeros_like(lead.lam)
    f0 = fermi_resolvent_integral(decomp0, t, spec.mu0, spec.band_bottom, hbar)
    return _PREF * np.exp(1j * state.phase) * state.u_minus @ f0 @ lead.lam


def p_plus_adiabatic(state, lead, h_now, t, spec, decomp=None, hbar=HBAR):
    """Adiabatic history term.

    ``-(2i/pi) int [I - U_alpha(t) exp(i eps t)] (eps - A)^-1 d eps Lambda_alpha``
    with ``A = h_now - i*Lambda - de_alpha(t)``. ``decomp`` may carry a
    precomputed eigendecomposition of ``A``.
    """
    n = spec.n
    if t == 0.0 or not np.any(lead.lam):
        return np.zeros((n, n), dtype=np.complex128)
    if decomp is None:
        a = h_now - 1j * spec.lam_total - level_shift(lead, t) * np.eye(n)
        decomp = eig_general(a)
    lam = decomp.eigenvalues
    res = decomp.apply(window_integral(lam, 0.0, spec.band_bottom, spec.mu0))
    osc = decomp.apply(window_integral(lam, t / hbar, spec.band_bottom, spec.mu0))
    return _PREF * (res - state.u @ osc) @ lead.lam


def k_from_p(p):
    return p + p.conj().T


def q_wbl(sigma, k_alpha, lead, p_minus=None, p_plus=None, tol=HERM_TOL):
    """Assemble ``Q_alpha = K_alpha + {Lambda_alpha, sigma}``."""
    scale_k = max(1.0, np.linalg.norm(k_alpha))
    if hermiticity_defect(k_alpha) > tol * scale_k:
        raise HermiticityViolation(f"K not Hermitian: defect {hermiticity_defect(k_alpha):.3e}")
    if hermiticity_defect(sigma) > tol * max(1.0, np.linalg.norm(sigma)):
        raise HermiticityViolation(f"sigma not Hermitian: defect {hermiticity_defect(sigma):.3e}")
    lam = lead.lam
    q = k_alpha + lam @ sigma + sigma @ lam
    zero = np.zeros_like(q)
    return DissipationResult(
        q,
        k_alpha,
        zero if p_minus is None else p_minus,
        zero if p_plus is None else p_plus,
    )


@dataclass
class HistoryBuffer:
    """Per-step averaged ``h_D`` and lead shift on a uniform grid starting at 0.

    Entry ``k`` describes the interval ``[k*dt, (k+1)*dt]``.
    """

    dt: float
    h_steps: list = field(default_factory=list)
    de_steps: list = field(default_factory=list)

    def append(self, h_avg, de_avg):
        self.h_steps.append(np.asarray(h_avg, dtype=np.complex128))
        self.de_steps.append(float(de_avg))

    @property
    def times(self):
        return self.dt * np.arange(len(self.h_steps) + 1)

    @classmethod
    def from_spec(cls, spec, lead, t_end, dt):
        """History for a run with the charging term off (scalar shifts only)."""
        from .device import device_shift_integral

        if spec.device.charging_strength != 0.0:
            raise ValueError("history with charging depends on the trajectory; record it from the time loop")
        buf = cls(dt)
        n_steps = int(round(t_end / dt))
        eye = np.eye(spec.n)
        for k in range(n_steps):
            t0, t1 = k * dt, (k + 1) * dt
            shift = device_shift_integral(spec, t0, t1) / dt
            buf.append(spec.device.h0 + shift * eye, level_shift_integral(lead, t0, t1) / dt)
        return buf


def energy_nodes(a, b, panels, points):
    """Panel-wise Gauss-Legendre nodes and weights on ``[a, b]``."""
    x, w = np.polynomial.legendre.leggauss(points)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def default_panels(spec, t_max, points=16, hbar=HBAR):
    """Panel count giving >= 20 nodes per period of ``exp(i eps t/hbar)`` and per line-width."""
    depth = spec.mu0 - spec.band_bottom
    period = 2 * np.pi * hbar / max(t_max, 1e-12)
    width = period * points / 20.0
    lam_w = np.linalg.eigvalsh(spec.lam_total)
    lam_w = lam_w[lam_w > 1e-12]
    if lam_w.size:
        width = min(width, lam_w.min() * points / 20.0)
    return max(1, int(np.ceil(depth / width)))


def p_plus_exact_series(history, lead, spec, panels=None, points=16, hbar=HBAR):
    """Exact ``P_plus`` at every grid time of ``history``.

    Integrates ``-(2/pi) int d eps int_0^t d tau W(t, tau; eps) Lambda_alpha / hbar``
    with ``W`` the ordered exponential of ``-i (h - i*Lambda - de - eps)``.
    Within a step the generator is held at its step average, so the
    past-time integral over the step is done in closed form; energy uses
    panel-wise Gauss-Legendre. Cost is ``O(n_steps * n_nodes * n^3)``.
    """
    n = spec.n
    n_steps = len(history.h_steps)
    out = np.zeros((n_steps + 1, n, n), dtype=np.complex128)
    if not np.any(lead.lam):
        return out
    t_max = n_steps * history.dt
    if panels is None:
        panels = default_panels(spec, t_max, points, hbar)
    eps, w = energy_nodes(spec.band_bottom, spec.mu0, panels, points)
    dt = history.dt
    s = np.zeros((eps.size, n, n), dtype=np.complex128)
    eps_phase = np.exp(1j * eps * dt / hbar)
    lam_total = spec.lam_total
    for k in range(n_steps):
        gen = history.h_steps[k] - 1j * lam_total - history.de_steps[k] * np.eye(n)
        dec = eig_general(gen)
        lam = dec.eigenvalues
        # per node and eigenvalue: exp(-i(l - e) dt/hbar) and its integral over the step
        z = -1j * (lam[None, :] - eps[:, None]) * (dt / hbar)
        with np.errstate(invalid="ignore", divide="ignore"):
            phi = np.where(np.abs(z) < 1e-8, dt * (1 + z / 2), dt * np.expm1(z) / z)
        step_exp = dec.apply(np.exp(-1j * lam * dt / hbar))
        x_k = np.einsum("ij,ej,jk->eik", dec.vectors, phi, dec.inverse)
        s = eps_phase[:, None, None] * np.einsum("ij,ejk->eik", step_exp, s) + x_k
        out[k + 1] = -(2 / np.pi) / hbar * np.einsum("e,eij->ij", w, s) @ lead.lam
    return out


def p_plus_exact(history, lead, t, spec, panels=None, points=16, hbar=HBAR):
    """Exact ``P_plus`` at grid time ``t`` (validation use only)."""
    if t == 0.0:
        return np.zeros((spec.n, spec.n), dtype=np.complex128)
    k = int(round(t / history.dt))
    if abs(k * history.dt - t) > 1e-9 * max(1.0, t):
        raise InsufficientHistory(f"t = {t} fs is not on the history grid (dt = {history.dt})")
    if k > len(history.h_steps):
        raise InsufficientHistory(f"history ends at {len(history.h_steps) * history.dt} fs, requested {t} fs")
    trimmed = HistoryBuffer(history.dt, history.h_steps[:k], history.de_steps[:k])
    return p_plus_exact_series(trimmed, lead, spec, panels, points, hbar)[k]


EDGE_MODES = ("open", "window")


class WBLDissipation:
    """Evaluates ``Q_alpha`` for both leads of a system.

    Caches the eigendecomposition of ``h_D(0) - i*Lambda``. The device
    Hamiltonian is always ``h_D(0)`` plus a multiple of the identity, so
    every later decomposition is a shift of the cached one.

    ``edge`` selects the lower limit of the oscillating energy integrals
    (the ``U_alpha exp(i eps t)`` terms). ``"window"`` uses ``band_bottom``
    throughout and reproduces :func:`p_minus` + :func:`p_plus_adiabatic`
    exactly; the sharp band edge then drives an oscillation at frequency
    ``(mu0 - band_bottom)/hbar`` that fixed-step integrators cannot
    resolve at practical step sizes. ``"open"`` (default) takes those
    integrals down to ``-inf``, where they converge for ``t > 0``; only
    the non-oscillating resolvent keeps the cutoff, and its divergent
    part cancels in ``K = P + P^H``. The two modes differ by terms that
    vanish as ``band_bottom -> -inf``.
    """

    def __init__(self, spec, hbar=HBAR, edge="open"):
        if edge not in EDGE_MODES:
            raise ValueError(f"edge must be one of {EDGE_MODES}")
        self.spec = spec
        self.hbar = hbar
        self.edge = edge
        self.closed = not np.any(spec.lam_total)
        self.decomp0 = None if self.closed else eig_general(spec.device.h0 - 1j * spec.lam_total)

    def evaluate(self, t, shift, states, sigma):
        """Per-lead :class:`DissipationResult` at time ``t``.

        ``shift`` is the scalar ``h_D(t) - h_D(0)``; ``states`` holds the
        two :class:`PropagatorState` objects advanced to ``t``. Same
        numbers as :func:`p_minus` and :func:`p_plus_adiabatic`, with the
        scalar energy integrals of both leads batched into one call.
        """
        spec = self.spec
        n = spec.n
        z = np.zeros((n, n), dtype=np.complex128)
        if self.closed:
            return [DissipationResult(z, z, z, z) for _ in spec.leads]
        dec = self.decomp0
        lam0 = dec.eigenvalues
        active = [lead for lead in spec.leads if np.any(lead.lam)]
        poles = [lam0 + shift - level_shift(lead, t) for lead in active]
        a, b = spec.band_bottom, spec.mu0
        tau = t / self.hbar
        res = window_integral(np.concatenate(poles), 0.0, a, b).reshape(len(active), n) if active else None
        if t > 0.0:
            a_osc = -np.inf if self.edge == "open" else a
            osc = window_integral(np.concatenate([lam0] + poles), tau, a_osc, b).reshape(len(active) + 1, n)
        results, j = [], 0
        for lead, state in zip(spec.leads, states):
            if not np.any(lead.lam):
                results.append(DissipationResult(z, z, z, z))
                continue
            if t > 0.0:
                pm = _PREF * state.u @ dec.apply(osc[0]) @ lead.lam
                pp = _PREF * (dec.apply(res[j]) - state.u @ dec.apply(osc[j + 1])) @ lead.lam
            else:
                pm = _PREF * state.u @ dec.apply(window_integral(lam0, 0.0, a, b)) @ lead.lam
                pp = z
            j += 1
            k = k_from_p(pm + pp)
            results.append(q_wbl(sigma, k, lead, pm, pp, tol=1e-8))
        return results
