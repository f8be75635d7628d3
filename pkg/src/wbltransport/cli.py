"""Command-line front end.

    wbltransport <mode> --config run.json [--out path] [--unit nA|uA] [--stride N]

Modes: ``transient``, ``steady``, ``transmission``, ``selftest``. Exit
status 0 on success, 1 on invalid input, 2 on numerical failure.
"""

import argparse
import csv
import json
import sys
from dataclasses import dataclass

import numpy as np

from .device import DeviceSpec, LeadSpec, SystemSpec, validate
from .energy_integrals import PoleOnContour
from .matcore import MatrixError
from .units import CURRENT_SCALE

MODES = ("transient", "steady", "transmission", "selftest")


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    pass


def _matrix_from_json(value, where):
    """Nested list of ``[re, im]`` pairs (or plain reals) to a complex matrix."""
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: not a numeric matrix ({exc})") from None
    if arr.ndim == 3 and arr.shape[-1] == 2:
        mat = arr[..., 0] + 1j * arr[..., 1]
    elif arr.ndim == 2:
        mat = arr.astype(np.complex128)
    else:
        raise ParseError(f"{where}: expected an n x n array of [re, im] pairs, got shape {arr.shape}")
    if mat.shape[0] != mat.shape[1]:
        raise ParseError(f"{where}: matrix is not square, shape {mat.shape}")
    return mat


def _matrix_to_json(mat):
    mat = np.asarray(mat, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


@dataclass
class RunConfig:
    mode: str
    h0: np.ndarray
    lam_left: np.ndarray
    lam_right: np.ndarray
    bias_left: float = 0.0
    bias_right: float = 0.0
    turn_on_left: float = 0.1
    turn_on_right: float = 0.1
    mu0: float = 0.0
    charging_strength: float = 0.0
    dt: float = 0.02
    t_end: float = 25.0
    eps_min: float | None = None
    panels: int = 64
    points: int = 32
    eps_grid: tuple = (-5.0, 5.0, 201)
    out: str | None = None
    unit: str = "nA"
    stride: int = 1

    def __post_init__(self):
        if self.eps_min is None:
            self.eps_min = self.mu0 - 200.0

    def system(self):
        return SystemSpec(
            DeviceSpec(self.h0, self.charging_strength),
            LeadSpec("L", self.lam_left, self.bias_left, self.turn_on_left),
            LeadSpec("R", self.lam_right, self.bias_right, self.turn_on_right),
            mu0=self.mu0,
            band_bottom=self.eps_min,
        )

    def to_dict(self):
        return {
            "mode": self.mode,
            "system": {
                "h0": _matrix_to_json(self.h0),
                "mu0": self.mu0,
                "charging_strength": self.charging_strength,
                "leads": {
                    "L": {"lambda": _matrix_to_json(self.lam_left), "bias": self.bias_left, "turn_on": self.turn_on_left},
                    "R": {"lambda": _matrix_to_json(self.lam_right), "bias": self.bias_right, "turn_on": self.turn_on_right},
                },
            },
            "numerics": {
                "dt": self.dt,
                "t_end": self.t_end,
                "eps_min": self.eps_min,
                "panels": self.panels,
                "points": self.points,
                "eps_grid": list(self.eps_grid),
            },
            "output": {"path": self.out, "unit": self.unit, "stride": self.stride},
        }

    def __eq__(self, other):
        if not isinstance(other, RunConfig):
            return NotImplemented
        return json.dumps(self.to_dict(), sort_keys=True) == json.dumps(other.to_dict(), sort_keys=True)


def _get(d, key, where, default=None, required=False):
    if key not in d:
        if required:
            raise ValidationError(f"missing field {where}.{key}")
        return default
    return d[key]


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _int(value, where):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{where}: expected an integer, got {value!r}")
    return value


def config_from_dict(data, mode=None):
    """Build and validate a :class:`RunConfig` from parsed JSON."""
    if not isinstance(data, dict):
        raise ParseError("top level must be a JSON object")
    mode = mode or data.get("mode")
    if mode not in MODES:
        raise ValidationError(f"mode must be one of {MODES}, got {mode!r}")
    system = _get(data, "system", "config", required=True)
    numerics = data.get("numerics", {})
    output = data.get("output", {})
    leads = _get(system, "leads", "system", required=True)
    h0 = _matrix_from_json(_get(system, "h0", "system", required=True), "system.h0")
    lead_vals = {}
    for label in ("L", "R"):
        lead = _get(leads, label, "system.leads", required=True)
        where = f"system.leads.{label}"
        lam = _matrix_from_json(_get(lead, "lambda", where, required=True), f"{where}.lambda")
        lead_vals[label] = (
            lam,
            _number(lead.get("bias", 0.0), f"{where}.bias"),
            _number(lead.get("turn_on", 0.1), f"{where}.turn_on"),
        )
    mu0 = _number(system.get("mu0", 0.0), "system.mu0")
    eps_min = numerics.get("eps_min")
    cfg = RunConfig(
        mode=mode,
        h0=h0,
        lam_left=lead_vals["L"][0],
        lam_right=lead_vals["R"][0],
        bias_left=lead_vals["L"][1],
        bias_right=lead_vals["R"][1],
        turn_on_left=lead_vals["L"][2],
        turn_on_right=lead_vals["R"][2],
        mu0=mu0,
        charging_strength=_number(system.get("charging_strength", 0.0), "system.charging_strength"),
        dt=_number(numerics.get("dt", 0.02), "numerics.dt"),
        t_end=_number(numerics.get("t_end", 25.0), "numerics.t_end"),
        eps_min=None if eps_min is None else _number(eps_min, "numerics.eps_min"),
        panels=_int(numerics.get("panels", 64), "numerics.panels"),
        points=_int(numerics.get("points", 32), "numerics.points"),
        eps_grid=tuple(numerics.get("eps_grid", (-5.0, 5.0, 201))),
        out=output.get("path"),
        unit=output.get("unit", "nA"),
        stride=_int(output.get("stride", 1), "output.stride"),
    )
    check_config(cfg)
    return cfg


def check_config(cfg):
    if cfg.dt <= 0:
        raise ValidationError("dt must be positive")
    if cfg.t_end <= 0:
        raise ValidationError("t_end must be positive")
    if cfg.stride < 1:
        raise ValidationError("stride must be a positive integer")
    if cfg.panels < 1 or cfg.points < 16:
        raise ValidationError("quadrature needs at least 1 panel and 16 points per panel")
    if cfg.unit not in CURRENT_SCALE:
        raise ValidationError(f"unit must be one of {sorted(CURRENT_SCALE)}")
    if len(cfg.eps_grid) != 3 or int(cfg.eps_grid[2]) < 1 or cfg.eps_grid[1] < cfg.eps_grid[0]:
        raise ValidationError("eps_grid must be [start, stop, count] with stop >= start and count >= 1")
    n = cfg.h0.shape[0]
    for label, lam in (("L", cfg.lam_left), ("R", cfg.lam_right)):
        if lam.shape != (n, n):
            raise ValidationError(f"system.leads.{label}.lambda has shape {lam.shape}, h0 is {n}x{n}")
    report = validate(cfg.system())
    if not report.ok:
        raise ValidationError("; ".join(f"{name}: {detail}" if detail else name for name, detail in report.failures))


def load_config(path, mode=None):
    """Read a JSON run configuration; ``mode`` overrides the file's value."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"{path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return config_from_dict(data, mode)


def dump_config(cfg, path):
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline=""), True


def _write_rows(path, header, rows):
    fh, close = _open_out(path)
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([f"{v:.15g}" for v in row])
    finally:
        if close:
            fh.close()


def _run_transient(cfg):
    from .propagate import run_transient

    rec = run_transient(cfg.system(), cfg.t_end, cfg.dt, cfg.unit, cfg.stride)
    _write_rows(cfg.out, ["t_fs", "J_L", "J_R", "occupation"], zip(rec.times, rec.j_left, rec.j_right, rec.occupation))


def _run_steady(cfg):
    from .steadystate import SteadyConfig, landauer_current, steady_residual, steady_sigma

    sc = SteadyConfig.from_spec(cfg.system(), cfg.panels, cfg.points)
    sigma = steady_sigma(sc)
    j = landauer_current(sc, cfg.unit)
    _write_rows(cfg.out, ["J_steady", "trace_sigma", "residual"], [(j, np.trace(sigma).real, steady_residual(sc, sigma))])


def _run_transmission(cfg):
    from .steadystate import SteadyConfig, transmission_curve

    sc = SteadyConfig.from_spec(cfg.system(), cfg.panels, cfg.points)
    start, stop, count = cfg.eps_grid
    grid = np.linspace(float(start), float(stop), int(count))
    _write_rows(cfg.out, ["eps_eV", "T"], zip(grid, transmission_curve(sc, grid)))


def selftest_checks(cfg):
    """Invariant checks on ``cfg``'s system; returns ``[(name, passed, detail)]``."""
    from .dissipation import p_plus_adiabatic
    from .propagate import equilibrium_density, initial_states, rhs, run_transient

    spec = cfg.system()
    checks = []
    st = initial_states(spec)[0]
    pp0 = p_plus_adiabatic(st, spec.left, spec.device.h0, 0.0, spec)
    checks.append(("P+(0) = 0", not np.any(pp0), f"max |P+(0)| = {np.abs(pp0).max():.1e}"))

    sigma_eq = equilibrium_density(spec, check=False)
    res = np.linalg.norm(rhs(spec, 0.0, sigma_eq, initial_states(spec)))
    checks.append(("equilibrium stationarity", res < 1e-6, f"||rhs|| = {res:.2e} eV/hbar"))

    t_short = min(cfg.t_end, 2.0)
    rec = run_transient(spec, t_short, cfg.dt)
    checks.append(("sigma Hermiticity", rec.max_sigma_defect < 1e-10, f"max defect {rec.max_sigma_defect:.2e}"))
    checks.append(("K Hermiticity", rec.max_k_defect < 1e-10, f"max relative defect {rec.max_k_defect:.2e}"))

    z = np.zeros_like(spec.device.h0)
    closed = SystemSpec(spec.device, LeadSpec("L", z), LeadSpec("R", z), spec.mu0, spec.band_bottom)
    rng = np.random.default_rng(0)
    n = spec.n
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    sigma0 = 0.5 * (a + a.conj().T)
    crec = run_transient(closed, t_short, cfg.dt, sigma0=sigma0)
    drift = float(np.max(np.abs(crec.occupation - np.trace(sigma0).real)))
    checks.append(("Lambda = 0 trace conservation", drift < 1e-8, f"max |d tr sigma| = {drift:.2e}"))
    return checks


def _run_selftest(cfg):
    checks = selftest_checks(cfg)
    for name, passed, detail in checks:
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return 0 if all(p for _, p, _ in checks) else 2


_RUNNERS = {
    "transient": _run_transient,
    "steady": _run_steady,
    "transmission": _run_transmission,
    "selftest": _run_selftest,
}


def run(cfg):
    """Execute ``cfg`` and return the process exit status."""
    try:
        status = _RUNNERS[cfg.mode](cfg)
    except (ArithmeticError, MatrixError, PoleOnContour, RuntimeError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    return status or 0


def build_parser():
    p = argparse.ArgumentParser(prog="wbltransport", description="Wide-band-limit transient and steady-state quantum transport.")
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="output CSV path (default: standard output)")
    p.add_argument("--unit", choices=sorted(CURRENT_SCALE), help="current unit")
    p.add_argument("--stride", type=int, help="write every N-th step")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.mode)
        if args.out is not None:
            cfg.out = args.out
        if args.unit is not None:
            cfg.unit = args.unit
        if args.stride is not None:
            cfg.stride = args.stride
        check_config(cfg)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
