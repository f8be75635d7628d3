"""Time-domain driver for the reduced density matrix.

Equation of motion, in fs^-1:

    d sigma/dt = -(i/hbar) [h_D(t), sigma] - (1/hbar) sum_alpha Q_alpha(t)

integrated with classical RK4. The dissipation history lives in the
per-lead propagators ``U_alpha``; stage evaluations use propagators
advanced provisionally from the last accepted step, and only the full
step is committed.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .device import (
    charging_shift,
    device_shift,
    device_shift_integral,
    level_shift_integral,
    validate,
)
from .dissipation import PropagatorState, WBLDissipation, propagator_advance
from .energy_integrals import pair_integral
from .matcore import commutator, eig_general, hermiticity_defect
from .units import CURRENT_SCALE, HBAR

log = logging.getLogger(__name__)

STATIONARITY_TOL = 1e-6
DRIFT_LIMIT = 1e-8


class StationarityFailure(RuntimeError):
    def __init__(self, residual):
        self.residual = residual
        super().__init__(f"equilibrium density is not stationary: ||rhs|| = {residual:.3e}")


class NumericalDivergence(RuntimeError):
    pass


def equilibrium_density(spec, check=True, hbar=HBAR):
    """Zero-bias density ``(2/pi) int G^r Lambda G^a d eps`` over ``[band_bottom, mu0]``.

    With vanishing line-width the zero-broadening limit is returned: twice
    the projector onto eigenstates of ``h_D(0)`` below ``mu0``.
    """
    h0 = spec.device.h0
    lam = spec.lam_total
    if not np.any(lam):
        w, v = np.linalg.eigh(h0)
        occ = v[:, w < spec.mu0]
        return 2.0 * occ @ occ.conj().T
    dec = eig_general(h0 - 1j * lam)
    middle = dec.inverse @ lam @ dec.inverse.conj().T
    pairs = pair_integral(dec.eigenvalues, spec.band_bottom, spec.mu0)
    sigma = (2 / np.pi) * dec.vectors @ (pairs * middle) @ dec.vectors.conj().T
    sigma = 0.5 * (sigma + sigma.conj().T)
    if check:
        states = initial_states(spec)
        trace0 = np.trace(sigma).real
        residual = np.linalg.norm(rhs(spec, 0.0, sigma, states, trace0, hbar=hbar))
        if residual > STATIONARITY_TOL:
            raise StationarityFailure(residual)
    return sigma


def initial_states(spec):
    return tuple(PropagatorState.initial(lead.label, spec.n) for lead in spec.leads)


def rhs(spec, t, sigma, diss_states, trace0=None, engine=None, hbar=HBAR, out=None):
    """Right-hand side of the equation of motion in fs^-1.

    ``diss_states`` must already be advanced to ``t``. If ``out`` is a
    list, the per-lead :class:`DissipationResult` objects are appended
    to it.
    """
    if engine is None:
        engine = WBLDissipation(spec, hbar)
    shift = device_shift(spec, t)
    if spec.device.charging_strength != 0.0:
        if trace0 is None:
            raise ValueError("trace0 is required when charging_strength is non-zero")
        shift += charging_shift(spec, np.trace(sigma).real, trace0)
    h = spec.device.h0 + shift * np.eye(spec.n)
    results = engine.evaluate(t, shift, diss_states, sigma)
    if out is not None:
        out.extend(results)
    q_sum = results[0].q + results[1].q
    return (-1j / hbar) * commutator(h, sigma) - q_sum / hbar


@dataclass
class TransientRecord:
    times: np.ndarray
    j_left: np.ndarray
    j_right: np.ndarray
    occupation: np.ndarray
    sigma_final: np.ndarray
    unit: str = "nA"
    max_sigma_defect: float = 0.0
    max_k_defect: float = 0.0
    sigmas: list = field(default_factory=list)

    def write_csv(self, path):
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_fs", "J_L", "J_R", "occupation"])
            for row in zip(self.times, self.j_left, self.j_right, self.occupation):
                writer.writerow([f"{v:.15g}" for v in row])


class TransientSolver:
    """RK4 integrator owning the dissipation state of one run."""

    def __init__(self, spec, sigma0=None, hbar=HBAR, edge="open"):
        self.spec = spec
        self.hbar = hbar
        self.engine = WBLDissipation(spec, hbar, edge)
        self.sigma = equilibrium_density(spec, hbar=hbar) if sigma0 is None else np.array(sigma0, dtype=np.complex128)
        self.trace0 = np.trace(self.sigma).real
        self.t = 0.0
        self.states = initial_states(spec)
        self.charging = spec.device.charging_strength != 0.0
        self._lam_total = spec.lam_total

    def _advanced(self, s, trace_start, trace_end):
        """Propagators moved from ``self.t`` to ``self.t + s``.

        Lead and device shifts are integrated exactly over the interval; the
        charging term uses the trapezoid rule on the trace.
        """
        spec, t0, t1 = self.spec, self.t, self.t + s
        shift = device_shift_integral(spec, t0, t1) / s
        if self.charging:
            shift += spec.device.charging_strength * (0.5 * (trace_start + trace_end) - self.trace0)
        h_avg = spec.device.h0 + shift * np.eye(spec.n)
        return tuple(
            propagator_advance(st, h_avg, level_shift_integral(lead, t0, t1) / s, self._lam_total, s, self.hbar)
            for lead, st in zip(spec.leads, self.states)
        )

    def rhs(self, t, sigma, states, out=None):
        return rhs(self.spec, t, sigma, states, self.trace0, self.engine, self.hbar, out)

    def step(self, dt, out=None):
        """One RK4 step; ``out`` collects the dissipation results at the start time."""
        t, sig = self.t, self.sigma
        tr = lambda m: np.trace(m).real  # noqa: E731
        k1 = self.rhs(t, sig, self.states, out)
        s2 = sig + 0.5 * dt * k1
        half = self._advanced(0.5 * dt, tr(sig), tr(s2))
        k2 = self.rhs(t + 0.5 * dt, s2, half)
        s3 = sig + 0.5 * dt * k2
        if self.charging:
            half = self._advanced(0.5 * dt, tr(sig), tr(s3))
        k3 = self.rhs(t + 0.5 * dt, s3, half)
        s4 = sig + dt * k3
        full = self._advanced(dt, tr(sig), tr(s4))
        k4 = self.rhs(t + dt, s4, full)
        new = sig + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if self.charging:
            full = self._advanced(dt, tr(sig), tr(new))
        self.sigma, self.states, self.t = new, full, t + dt
        return new


def rk4_step(spec, sigma, diss_states, t, dt, trace0=None, hbar=HBAR, edge="open"):
    """Functional form of a single RK4 step.

    Returns ``(sigma_new, states_new)``; inputs are not modified.
    """
    solver = TransientSolver.__new__(TransientSolver)
    solver.spec, solver.hbar = spec, hbar
    solver.engine = WBLDissipation(spec, hbar, edge)
    solver.sigma = np.array(sigma, dtype=np.complex128)
    solver.trace0 = np.trace(solver.sigma).real if trace0 is None else trace0
    solver.t, solver.states = t, tuple(diss_states)
    solver.charging = spec.device.charging_strength != 0.0
    solver._lam_total = spec.lam_total
    solver.step(dt)
    return solver.sigma, solver.states


def run_transient(
    spec, t_end=25.0, dt=0.02, unit="nA", stride=1, sigma0=None, keep_sigma=False, hbar=HBAR, edge="open"
):
    """Integrate from the equilibrium state (or ``sigma0``) to ``t_end``.

    Currents ``J_alpha = -tr Q_alpha / hbar`` are reported in ``unit``
    (``"nA"`` or ``"uA"``) every ``stride`` steps.
    """
    report = validate(spec)
    if not report.ok:
        raise ValueError(f"invalid system:\n{report}")
    if dt <= 0 or t_end < 0:
        raise ValueError("dt must be positive and t_end non-negative")
    if sigma0 is not None and hermiticity_defect(np.asarray(sigma0)) > DRIFT_LIMIT:
        raise ValueError("initial density matrix is not Hermitian")
    scale = CURRENT_SCALE[unit] / hbar
    solver = TransientSolver(spec, sigma0, hbar, edge)
    n_steps = int(round(t_end / dt))
    times, jl, jr, occ, sigmas = [], [], [], [], []
    max_sig, max_k = hermiticity_defect(solver.sigma), 0.0

    def record(results, t, sigma, i):
        nonlocal max_k
        for res in results:
            kn = np.linalg.norm(res.k)
            if kn > 0:
                max_k = max(max_k, hermiticity_defect(res.k) / kn)
        if i % stride == 0 or i == n_steps:
            times.append(t)
            jl.append(results[0].current * scale)
            jr.append(results[1].current * scale)
            occ.append(np.trace(sigma).real)
            if keep_sigma:
                sigmas.append(sigma.copy())

    warned = False
    for i in range(n_steps):
        results = []
        t_start, sigma_start = solver.t, solver.sigma
        solver.step(dt, out=results)
        solver.t = (i + 1) * dt  # avoid accumulated round-off in the clock
        record(results, t_start, sigma_start, i)
        defect = hermiticity_defect(solver.sigma)
        max_sig = max(max_sig, defect)
        if not np.all(np.isfinite(solver.sigma)):
            raise NumericalDivergence(f"non-finite density matrix at t = {solver.t:.4f} fs")
        if defect > DRIFT_LIMIT:
            raise NumericalDivergence(f"Hermiticity drift {defect:.3e} at t = {solver.t:.4f} fs")
        w = np.linalg.eigvalsh(0.5 * (solver.sigma + solver.sigma.conj().T))
        if (w.min() < -0.05 or w.max() > 2.05) and not warned:
            log.warning("occupations outside [0, 2] at t = %.4f fs: [%.4f, %.4f]", solver.t, w.min(), w.max())
            warned = True
    final = []
    solver.rhs(solver.t, solver.sigma, solver.states, out=final)
    record(final, solver.t, solver.sigma, n_steps)
    return TransientRecord(
        np.array(times),
        np.array(jl),
        np.array(jr),
        np.array(occ),
        solver.sigma.copy(),
        unit,
        max_sig,
        max_k,
        sigmas,
    )

