"""Physical problem definition: device block, leads, bias turn-on."""

import warnings
from dataclasses import dataclass, field

import numpy as np

from .matcore import as_cmatrix, hermiticity_defect


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class DeviceSpec:
    """Equilibrium device Hamiltonian ``h0`` (eV) and optional charging term.

    ``charging_strength`` (eV per electron) adds the capacitive mean-field
    shift ``U * (tr sigma(t) - tr sigma(0))`` to every device level.
    """

    h0: np.ndarray
    charging_strength: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "h0", as_cmatrix(self.h0))

    @property
    def n_orbitals(self):
        return self.h0.shape[0]


@dataclass(frozen=True)
class LeadSpec:
    """One electrode in the wide-band limit.

    ``lam`` is the line-width matrix (eV) expressed on device orbitals,
    ``bias`` the asymptotic voltage (V, so the lead levels move by
    ``-bias`` eV) and ``turn_on`` the exponential switching time (fs).
    """

    label: str
    lam: np.ndarray
    bias: float = 0.0
    turn_on: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "lam", as_cmatrix(self.lam))

    @property
    def asymptotic_shift(self):
        return -self.bias


@dataclass(frozen=True)
class SystemSpec:
    device: DeviceSpec
    left: LeadSpec
    right: LeadSpec
    mu0: float = 0.0
    band_bottom: float = -200.0

    @property
    def leads(self):
        return (self.left, self.right)

    @property
    def lam_total(self):
        return self.left.lam + self.right.lam

    @property
    def n(self):
        return self.device.n_orbitals


def level_shift(lead, t):
    """Rigid level shift of ``lead`` at time ``t`` (fs): ``-V (1 - exp(-t/a))`` eV."""
    if lead.bias == 0.0:
        return 0.0
    return lead.asymptotic_shift * -np.expm1(-t / lead.turn_on)


def level_shift_integral(lead, t0, t1):
    """Exact ``int_{t0}^{t1}`` of :func:`level_shift` in eV fs."""
    if lead.bias == 0.0:
        return 0.0
    a = lead.turn_on
    # int (1 - e^{-t/a}) dt = t + a e^{-t/a}
    tail = a * (np.exp(-t1 / a) - np.exp(-t0 / a))
    return lead.asymptotic_shift * ((t1 - t0) + tail)


def device_shift(spec, t):
    """Scalar device level shift ``(de_L(t) + de_R(t)) / 2`` (eV)."""
    return 0.5 * (level_shift(spec.left, t) + level_shift(spec.right, t))


def device_shift_integral(spec, t0, t1):
    return 0.5 * (level_shift_integral(spec.left, t0, t1) + level_shift_integral(spec.right, t0, t1))


def charging_shift(spec, trace, trace0):
    return spec.device.charging_strength * (trace - trace0)


def h_d_at(spec, t, sigma, trace0=None):
    """Device Hamiltonian at time ``t``.

    ``trace0`` is ``tr sigma(0)``; it is required only when the charging
    term is switched on.
    """
    sigma = np.asarray(sigma)
    n = spec.n
    if sigma.shape != (n, n):
        raise DimensionMismatch(f"sigma has shape {sigma.shape}, device has {n} orbitals")
    shift = device_shift(spec, t)
    if spec.device.charging_strength != 0.0:
        if trace0 is None:
            raise ValueError("trace0 is required when charging_strength is non-zero")
        shift += charging_shift(spec, np.trace(sigma).real, trace0)
    return spec.device.h0 + shift * np.eye(n)


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    def add(self, name, passed, detail=""):
        self.checks.append((name, bool(passed), detail))

    @property
    def ok(self):
        return all(passed for _, passed, _ in self.checks)

    @property
    def failures(self):
        return [(name, detail) for name, passed, detail in self.checks if not passed]

    def __str__(self):
        lines = []
        for name, passed, detail in self.checks:
            lines.append(f"[{'PASS' if passed else 'FAIL'}] {name}" + (f": {detail}" if detail else ""))
        return "\n".join(lines)


def validate(spec, herm_tol=1e-12, psd_tol=1e-12):
    """Check every invariant of ``spec``; never raises."""
    report = ValidationReport()
    h0 = spec.device.h0
    defect = hermiticity_defect(h0)
    report.add("h0 Hermitian", defect <= herm_tol * max(1.0, np.linalg.norm(h0)), f"||h0 - h0^H|| = {defect:.3e}")
    for lead in spec.leads:
        lam = lead.lam
        if lam.shape != h0.shape:
            report.add(f"lambda[{lead.label}] dimension", False, f"shape {lam.shape} vs device {h0.shape}")
            continue
        d = hermiticity_defect(lam)
        report.add(f"lambda[{lead.label}] Hermitian", d <= herm_tol * max(1.0, np.linalg.norm(lam)), f"defect {d:.3e}")
        w_min = float(np.linalg.eigvalsh(0.5 * (lam + lam.conj().T)).min())
        report.add(
            f"lambda[{lead.label}] non-negative definite",
            w_min >= -psd_tol,
            "" if w_min >= -psd_tol else f"lambda not non-negative definite (min eigenvalue {w_min:.6g} eV)",
        )
        report.add(
            f"turn_on[{lead.label}] positive",
            lead.turn_on > 0,
            "" if lead.turn_on > 0 else f"turn-on constant {lead.turn_on} fs",
        )
    if {spec.left.label, spec.right.label} != {"L", "R"}:
        report.add("lead labels", False, f"expected L and R, got {spec.left.label}, {spec.right.label}")
    below = spec.band_bottom < spec.mu0
    report.add(
        "band_bottom below mu0",
        below,
        "" if below else f"band_bottom must lie below mu0 ({spec.band_bottom} >= {spec.mu0})",
    )
    if below and spec.left.lam.shape == spec.right.lam.shape == h0.shape:
        lam_max = float(np.linalg.eigvalsh(0.5 * (spec.lam_total + spec.lam_total.conj().T)).max())
        if spec.mu0 - spec.band_bottom < 10 * lam_max:
            warnings.warn(
                f"window depth {spec.mu0 - spec.band_bottom} eV is less than 10x the total line-width {lam_max} eV",
                stacklevel=2,
            )
    return report
