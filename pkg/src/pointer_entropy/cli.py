"""Scenario files, presets, time sweeps and CSV reports.

A scenario is an INI-style file of named blocks with ``key = value`` lines::

    [model]        kappa | coupling (+ coupling_breaks), masses, potentials (+ potentials_breaks)
    [bath]         family = none | ohmic | discrete, gamma, cutoff, beta, modes, pattern,
                   switch (+ switch_breaks), masses, frequencies, couplings
    [pointers]     var1, var2
    [system]       kind = gaussian | tabulated, var_x, var_p, cov_xp, mean_x, mean_p,
                   position_file, momentum_file
    [measurement]  choice = X1X2 | X1P2 | P1X2 | P1P2
    [sweep]        t_start, t_stop, steps
    [numerics]     max_step, grid_points, kernel_route = auto | on | off, kernel_check,
                   bound_tol, gap_tol
    [output]       path

Vectors are comma separated, matrix rows are separated by ``;`` and the
segments of a piecewise-constant quantity by ``|``.  Unknown blocks or keys
are rejected.

Exit codes: 0 success, 1 numerical failure or bound violation, 2 bad config.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .distributions import GRID_POINTS, broadened_marginal, read_density
from .dynamics import build_time_grid, inference_coefficients, propagate
from .entropy import collective_entropy
from .model import (ContinuousBath, DiscreteBath, GaussianState, MeasurementChoice,
                    OhmicExponential, PiecewiseConstant, PointerPreparation,
                    QuadraticModel, TabulatedState, ZeroModes, discretize_bath)
from .noise import check_noise_bound, noise_covariance, route_disagreement

COLUMNS = ("t", "exists", "cond", "delta_x2", "delta_p2", "delta_xp", "delta_x2_pointer",
           "delta_x2_bath", "s_x", "s_p", "s_total", "lambda_opt", "bound", "gap",
           "route_disagreement")

SCHEMA = {
    "model": {"kappa", "coupling", "coupling_breaks", "masses", "potentials",
              "potentials_breaks"},
    "bath": {"family", "gamma", "cutoff", "beta", "modes", "pattern", "switch",
             "switch_breaks", "masses", "frequencies", "couplings"},
    "pointers": {"var1", "var2"},
    "system": {"kind", "var_x", "var_p", "cov_xp", "mean_x", "mean_p", "position_file",
               "momentum_file"},
    "measurement": {"choice"},
    "sweep": {"t_start", "t_stop", "steps"},
    "numerics": {"max_step", "grid_points", "kernel_route", "kernel_check", "bound_tol",
                 "gap_tol"},
    "output": {"path"},
}
REQUIRED = ("model", "pointers", "system", "measurement", "sweep")


class ConfigError(ValueError):
    pass


class UnknownPreset(KeyError):
    pass


# ---------------------------------------------------------------- parsing helpers

def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _matrix(text: str) -> np.ndarray:
    rows = [_floats(r) for r in text.split(";") if r.strip()]
    if len({len(r) for r in rows}) > 1:
        raise ConfigError(f"ragged matrix {text!r}")
    return np.array(rows, dtype=float)


def _piecewise(section: dict, key: str, parse) -> list:
    segs = [parse(s) for s in section[key].split("|")]
    breaks = _floats(section.get(key + "_breaks", ""))
    return segs, breaks


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class Numerics:
    max_step: float = 0.01
    grid_points: int = GRID_POINTS
    kernel_route: str = "auto"
    kernel_check: bool = False
    bound_tol: float = 1e-9
    gap_tol: float = 1e-6


@dataclass
class ScenarioConfig:
    """Validated scenario: raw blocks plus the domain objects built from them."""

    sections: dict
    model: QuadraticModel
    pointers: PointerPreparation
    system: GaussianState | TabulatedState
    choice: MeasurementChoice
    times: np.ndarray
    numerics: Numerics = field(default_factory=Numerics)
    output: str | None = None

    def to_text(self) -> str:
        cp = configparser.ConfigParser()
        for name, block in self.sections.items():
            cp[name] = block
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _build_model(sec: dict, bath) -> QuadraticModel:
    masses = tuple(_floats(sec.get("masses", "inf, inf, inf")))
    if "kappa" in sec and "coupling" in sec:
        raise ConfigError("[model] give either kappa or coupling, not both")
    if "coupling" in sec:
        segs, breaks = _piecewise(sec, "coupling", _matrix)
        coupling = PiecewiseConstant(tuple(segs), tuple(breaks))
    else:
        if "kappa" not in sec:
            raise ConfigError("[model] needs kappa or coupling")
        k = float(sec["kappa"])
        c = np.zeros((2, 4))
        c[0, 2] = c[1, 3] = k
        coupling = PiecewiseConstant.constant(c)
    if "potentials" in sec:
        segs, breaks = _piecewise(sec, "potentials", _floats)
        if any(len(s) != 3 for s in segs):
            raise ConfigError("[model] potentials need three values per segment")
        pots = tuple(PiecewiseConstant(tuple(s[k] for s in segs), tuple(breaks)) for k in range(3))
    else:
        pots = (0.0, 0.0, 0.0)
    return QuadraticModel(masses, pots, coupling, bath)


def _build_bath(sec: dict):
    family = sec.get("family", "none").strip().lower()
    if family == "none":
        extra = set(sec) - {"family"}
        if extra:
            raise ConfigError(f"[bath] family = none takes no further keys: {sorted(extra)}")
        return None
    beta = float(sec["beta"])
    if "switch" in sec:
        segs, breaks = _piecewise(sec, "switch", float)
        switch = PiecewiseConstant(tuple(segs), tuple(breaks))
    else:
        switch = PiecewiseConstant.constant(1.0)
    if family == "ohmic":
        allowed = {"family", "gamma", "cutoff", "beta", "modes", "pattern", "switch", "switch_breaks"}
        if set(sec) - allowed:
            raise ConfigError(f"[bath] keys not valid for ohmic: {sorted(set(sec) - allowed)}")
        pattern = tuple(int(v) for v in _floats(sec.get("pattern", "1, 1, 1")))
        spec = ContinuousBath(OhmicExponential(float(sec["gamma"]), float(sec["cutoff"])),
                              beta, int(sec["modes"]), switch, pattern)
        discretize_bath(spec)
        return spec
    if family == "discrete":
        allowed = {"family", "beta", "masses", "frequencies", "couplings", "switch", "switch_breaks"}
        if set(sec) - allowed:
            raise ConfigError(f"[bath] keys not valid for discrete: {sorted(set(sec) - allowed)}")
        return DiscreteBath(_floats(sec["masses"]), _floats(sec["frequencies"]),
                            _matrix(sec["couplings"]), beta, switch)
    raise ConfigError(f"[bath] unknown family {family!r}")


def _build_system(sec: dict, base: Path):
    kind = sec.get("kind", "gaussian").strip().lower()
    if kind == "gaussian":
        return GaussianState(float(sec["var_x"]), float(sec["var_p"]),
                             float(sec.get("cov_xp", 0)), float(sec.get("mean_x", 0)),
                             float(sec.get("mean_p", 0)))
    if kind == "tabulated":
        pos = read_density(base / sec["position_file"], "x")
        mom = read_density(base / sec["momentum_file"], "p")
        return TabulatedState(pos, mom)
    raise ConfigError(f"[system] unknown kind {kind!r}")


def config_from_sections(sections: dict, base_dir=".") -> ScenarioConfig:
    """Validate raw blocks and build the scenario; raises ConfigError."""
    for name, block in sections.items():
        if name not in SCHEMA:
            raise ConfigError(f"unknown block [{name}]")
        unknown = set(block) - SCHEMA[name]
        if unknown:
            raise ConfigError(f"unknown keys in [{name}]: {', '.join(sorted(unknown))}")
    for name in REQUIRED:
        if name not in sections:
            raise ConfigError(f"missing block [{name}]")
    try:
        bath = _build_bath(sections.get("bath", {}))
        model = _build_model(sections["model"], bath)
        pointers = PointerPreparation(float(sections["pointers"]["var1"]),
                                      float(sections["pointers"]["var2"]))
        system = _build_system(sections["system"], Path(base_dir))
        choice = MeasurementChoice.parse(sections["measurement"]["choice"])
        sw = sections["sweep"]
        steps = int(sw["steps"])
        t0, t1 = float(sw["t_start"]), float(sw["t_stop"])
        if steps < 1 or not 0 <= t0 <= t1 or (steps > 1 and t0 == t1):
            raise ConfigError("[sweep] needs 0 <= t_start < t_stop and steps >= 1")
        # round away linspace drift so that e.g. t = 1 lands exactly on 1.0
        times = np.round(np.linspace(t0, t1, steps), 12) if steps > 1 else np.array([t0])
        num = sections.get("numerics", {})
        numerics = Numerics(
            max_step=float(num.get("max_step", 0.01)),
            grid_points=int(num.get("grid_points", GRID_POINTS)),
            kernel_route=num.get("kernel_route", "auto").strip().lower(),
            kernel_check=_bool(num.get("kernel_check", "false")),
            bound_tol=float(num.get("bound_tol", 1e-9)),
            gap_tol=float(num.get("gap_tol", 1e-6)),
        )
        if numerics.kernel_route not in ("auto", "on", "off"):
            raise ConfigError("[numerics] kernel_route must be auto, on or off")
        if not numerics.max_step > 0 or numerics.grid_points < 16:
            raise ConfigError("[numerics] max_step must be positive and grid_points >= 16")
    except ConfigError:
        raise
    except KeyError as exc:
        raise ConfigError(f"missing key {exc}") from None
    except (ValueError, ZeroModes, OSError) as exc:
        raise ConfigError(str(exc)) from None
    output = sections.get("output", {}).get("path")
    return ScenarioConfig(sections, model, pointers, system, choice, times, numerics, output)


def parse_config(text: str, base_dir=".") -> ScenarioConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    sections = {name: dict(cp[name]) for name in cp.sections()}
    return config_from_sections(sections, base_dir)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(exc)) from None
    return parse_config(text, path.parent)


PRESETS = {
    "ak-closed": {
        "model": {"kappa": "1"},
        "pointers": {"var1": "0.25", "var2": "0.25"},
        "system": {"kind": "gaussian", "var_x": "0.5", "var_p": "0.5"},
        "measurement": {"choice": "X1X2"},
        "sweep": {"t_start": "0.1", "t_stop": "2", "steps": "20"},
    },
    "ak-ohmic": {
        "model": {"kappa": "1"},
        "bath": {"family": "ohmic", "gamma": "0.05", "cutoff": "5", "beta": "1",
                 "modes": "64", "pattern": "1, 1, 1"},
        "pointers": {"var1": "0.25", "var2": "0.25"},
        "system": {"kind": "gaussian", "var_x": "0.5", "var_p": "0.5"},
        "measurement": {"choice": "X1X2"},
        "sweep": {"t_start": "0.1", "t_stop": "2", "steps": "20"},
    },
}


def preset(name: str) -> ScenarioConfig:
    """Built-in scenarios: ``ak-closed`` and ``ak-ohmic``."""
    if name not in PRESETS:
        raise UnknownPreset(name)
    return config_from_sections({k: dict(v) for k, v in PRESETS[name].items()})


# ---------------------------------------------------------------- running

@dataclass
class ReportRow:
    t: float
    exists: bool
    cond: float
    delta_x2: float = math.nan
    delta_p2: float = math.nan
    delta_xp: float = math.nan
    delta_x2_pointer: float = math.nan
    delta_x2_bath: float = math.nan
    s_x: float = math.nan
    s_p: float = math.nan
    s_total: float = math.nan
    lambda_opt: float = math.nan
    bound: float = math.nan
    gap: float = math.nan
    route_disagreement: float = math.nan
    violation: bool = False

    def as_csv(self) -> list[str]:
        out = []
        for name in COLUMNS:
            v = getattr(self, name)
            out.append(str(int(v)) if isinstance(v, bool) else repr(float(v)))
        return out


@dataclass
class Summary:
    rows: int
    not_invertible: int
    violations: int

    @property
    def exit_code(self) -> int:
        return 1 if self.violations else 0


def run_scenario(config: ScenarioConfig, grid_points: int | None = None) -> list[ReportRow]:
    """Evaluate every sweep time of the scenario, in time order."""
    num = config.numerics
    points = grid_points or num.grid_points
    bath = discretize_bath(config.model.bath)
    grid = build_time_grid(config.times, num.max_step, config.model.breakpoints())
    prop = propagate(config.model, bath, grid)
    use_kernel = num.kernel_route == "on" or (num.kernel_route == "auto" and bath.is_coupled)
    rows = []
    for t in config.times:
        coeff = inference_coefficients(prop, config.choice, t, strict=False)
        if not coeff.exists:
            rows.append(ReportRow(float(t), False, coeff.cond))
            continue
        cov = noise_covariance(prop, coeff, config.pointers)
        disagreement = 0.0
        if use_kernel:
            kcov = noise_covariance(prop, coeff, config.pointers, route="kernel",
                                    check=num.kernel_check)
            disagreement = route_disagreement(cov, kcov)
        mx = broadened_marginal(config.system, cov.delta_x2, "position", points=points)
        mp = broadened_marginal(config.system, cov.delta_p2, "momentum", points=points)
        rep = collective_entropy(mx, mp, cov)
        nb = check_noise_bound(cov, num.bound_tol)
        rows.append(ReportRow(
            float(t), True, coeff.cond, cov.delta_x2, cov.delta_p2, cov.delta_xp,
            float(cov.pointer[0, 0]), float(cov.bath[0, 0]), rep.s_x, rep.s_p, rep.total,
            rep.lam, rep.bound, rep.gap, disagreement,
            violation=not (nb.robertson_ok and nb.schroedinger_ok and rep.gap >= -num.gap_tol),
        ))
    return rows


def summarize(rows: list[ReportRow]) -> Summary:
    return Summary(len(rows), sum(not r.exists for r in rows), sum(r.violation for r in rows))


def write_csv(rows: list[ReportRow], stream) -> None:
    w = csv.writer(stream, lineterminator="\n")
    w.writerow(COLUMNS)
    for r in rows:
        w.writerow(r.as_csv())


# ---------------------------------------------------------------- entry point

def _simulate(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    try:
        rows = run_scenario(config, args.grid_points)
    except (ArithmeticError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1
    out = args.out or config.output
    if out:
        with open(out, "w", newline="") as fh:
            write_csv(rows, fh)
    else:
        write_csv(rows, sys.stdout)
    s = summarize(rows)
    if s.not_invertible:
        print(f"warning: {s.not_invertible} of {s.rows} times not invertible (flagged rows)",
              file=sys.stderr)
    if s.violations:
        print(f"error: {s.violations} rows violate a bound", file=sys.stderr)
    return s.exit_code


def _preset(args) -> int:
    try:
        cfg = preset(args.name)
    except UnknownPreset:
        print(f"unknown preset {args.name!r}; choose from {', '.join(PRESETS)}", file=sys.stderr)
        return 2
    text = cfg.to_text()
    if args.write:
        Path(args.write).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="pointer-entropy",
                                 description="Open pointer-based measurement noise and entropy sweeps")
    sub = ap.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", help="run a scenario file and write CSV")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out")
    sim.add_argument("--grid-points", type=int)
    pre = sub.add_parser("preset", help="print or write a built-in scenario")
    pre.add_argument("--name", required=True)
    pre.add_argument("--write")
    args = ap.parse_args(argv)
    return _simulate(args) if args.command == "simulate" else _preset(args)


if __name__ == "__main__":
    sys.exit(main())
