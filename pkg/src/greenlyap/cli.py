"""Reproducible experiment runner for the library.

Scenarios are JSON documents (schema in ``schemas/scenario.schema.json``)
naming a system, an orbit, a task and numeric options.  The runner emits
machine-readable artifacts: a JSON report embedding the fully resolved
configuration (every default made explicit) plus, for verification tasks,
a CSV table with one row per checked statement.

Row statuses are three-valued: ``pass`` / ``fail`` mean the statement was
evaluated and its slack is above / below the declared tolerance; ``skip``
means a hypothesis needed by the statement does not hold (for example a
lower bound on the smallest positive exponent when every exponent is
zero) or a prerequisite computation declined to converge in a regime
where it provably cannot (parabolic Green iteration).  Numeric failures
never abort a run: they are recorded on the affected rows and the
remaining rows still execute.  Exit codes: 0 when no row fails, 1 when
any row fails (or an artifact task hits a numeric error), 2 for config
or usage errors.

Determinism contract: identical config + seed produce byte-identical
outputs.  ``wall_ms`` is 0 unless ``--timings`` is given (timings are
real and therefore unreproducible, so they are opt-in).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__
from .errors import (
    GreenLyapError,
    NoGapError,
    NonConvergenceError,
    NoPositiveEigenvalueError,
    NoPositiveExponentError,
)
from .greenbundle import compute_green_bundles_periodic, theorem2_sum, theorem4_bound
from .lyap import (
    WeightedOrbitMeasure,
    cocycle_bound_constant,
    general_bound_check_1d,
    general_bound_check_dd,
    lyapunov_spectrum_flow,
    lyapunov_spectrum_map,
    smallest_positive,
    stable_space_estimate,
    sum_positive,
    unstable_space_estimate,
)
from .potentials import TrigPolynomial
from .symgeo import subspace_distance
from .tonelli import (
    MechanicalHamiltonian,
    compute_green_bundles_flow,
    flat_torus,
    green_bundles_along_orbit,
    lemma9_check,
    pendulum,
    theorem1_sum,
    theorem3_bound,
)
from .twistmap import (
    PeriodicConfiguration,
    coupled_standard_family,
    find_minimizing_periodic_orbit,
    periodic_action,
    periodic_gradient,
    standard_family,
)

CSV_COLUMNS = ["scenario_id", "theorem_id", "lhs", "rhs", "slack", "pass",
               "n_steps", "k_used", "wall_ms"]

DEFAULT_NUMERICS = {
    "seed": 0,
    "n_steps": 10000,        # QR steps for map spectra / subspace estimates
    "k_max": 200,            # Green iteration cap (maps)
    "green_tol": 1e-12,
    "residual_tol": 1e-10,
    "equality_tol": 1e-6,
    "bound_tol": 1e-8,
    "settle_tol": 1e-7,
    "T": 12.0,               # Green transport depth (flows)
    "t_total": 60.0,         # flow spectrum integration time
    "sample_span": 1.0,      # flow orbit stretch sampled for the integrals
    "n_samples": 21,
    "lemma9_t": 2.0,
    "n_certify_periods": 3,
}


class ConfigError(Exception):
    """Configuration is syntactically or semantically unusable (exit 2)."""


# ---------------------------------------------------------------------------
# configuration loading and resolution

def load_schema() -> dict:
    text = resources.files("greenlyap").joinpath(
        "schemas/scenario.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


def load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise ConfigError(f"config {path} is not valid JSON: {err}") from err
    try:
        jsonschema.Draft202012Validator(load_schema()).validate(raw)
    except jsonschema.ValidationError as err:
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ConfigError(f"config {path} rejected by schema at {where}: "
                          f"{err.message}") from err
    return raw


def _as_strength_list(value, dim: int, label: str) -> list[float]:
    if isinstance(value, list):
        if len(value) != dim:
            raise ConfigError(f"{label} has {len(value)} entries for dim={dim}")
        return [float(v) for v in value]
    return [float(value)] * dim


def resolve_scenario(raw: dict, seed_override: int | None = None) -> dict:
    """Fill every default so the emitted report carries full provenance."""
    scn = json.loads(json.dumps(raw))  # deep copy, JSON-clean by construction
    sysc = scn["system"]
    kind = sysc["kind"]
    if kind == "twist-family":
        if "stiffness" in sysc:
            raise ConfigError("'stiffness' is not a twist-family parameter (use 'K')")
        K = sysc.get("K", 1.0)
        dim = int(sysc.get("dim", len(K) if isinstance(K, list) else 1))
        if dim == 1:
            if isinstance(K, list) and len(K) != 1:
                raise ConfigError(f"system.K has {len(K)} entries for dim=1")
            sysc["K"] = float(K[0] if isinstance(K, list) else K)
        else:
            sysc["K"] = _as_strength_list(K, dim, "system.K")
        sysc["coupling"] = float(sysc.get("coupling", 0.0))
        sysc["dim"] = dim
    else:
        for key in ("K", "coupling"):
            if key in sysc:
                raise ConfigError(f"'{key}' is not a hamiltonian-family parameter")
        s = sysc.get("stiffness", 1.0)
        dim = int(sysc.get("dim", len(s) if isinstance(s, list) else 1))
        if dim == 1:
            if isinstance(s, list) and len(s) != 1:
                raise ConfigError(f"system.stiffness has {len(s)} entries for dim=1")
            sysc["stiffness"] = float(s[0] if isinstance(s, list) else s)
        else:
            sysc["stiffness"] = _as_strength_list(s, dim, "system.stiffness")
        sysc["dim"] = dim

    task = scn["task"]
    if "scan" in scn and task != "scan":
        raise ConfigError("a 'scan' grid is only valid for task 'scan'")
    if task == "scan":
        scn.setdefault("scan", {})

    orbit = scn.get("orbit", {})
    okind = orbit.get("kind", "fixed-point" if kind == "twist-family" else "flow-point")
    if kind == "twist-family":
        if okind == "flow-point":
            raise ConfigError("orbit kind 'flow-point' needs a hamiltonian-family system")
        if okind == "rotation":
            rot = orbit.get("rotation")
            if rot is None or "period" not in orbit:
                raise ConfigError("orbit kind 'rotation' needs 'rotation' and 'period'")
            if len(rot) != dim:
                raise ConfigError(f"rotation vector has {len(rot)} entries for dim={dim}")
            orbit = {"kind": "rotation", "rotation": [int(m) for m in rot],
                     "period": int(orbit["period"])}
        elif okind == "points":
            pts = orbit.get("points")
            if pts is None:
                raise ConfigError("orbit kind 'points' needs 'points'")
            if any(len(row) != dim for row in pts):
                raise ConfigError(f"orbit points must have rows of length dim={dim}")
            shift = orbit.get("shift", [0] * dim)
            if len(shift) != dim:
                raise ConfigError(f"orbit shift must have length dim={dim}")
            orbit = {"kind": "points", "points": [[float(x) for x in row] for row in pts],
                     "shift": [int(m) for m in shift]}
        else:
            orbit = {"kind": "fixed-point"}
        if task == "minimize" and orbit["kind"] != "rotation":
            raise ConfigError("task 'minimize' needs an orbit of kind 'rotation'")
    else:
        if task == "minimize":
            raise ConfigError("task 'minimize' applies to twist-family systems")
        if okind != "flow-point":
            raise ConfigError(f"orbit kind '{okind}' needs a twist-family system")
        q0 = orbit.get("q0", [0.0] * dim)
        p0 = orbit.get("p0", [0.0] * dim)
        if len(q0) != dim or len(p0) != dim:
            raise ConfigError(f"q0 and p0 must have length dim={dim}")
        orbit = {"kind": "flow-point", "q0": [float(x) for x in q0],
                 "p0": [float(x) for x in p0]}
    scn["orbit"] = orbit

    unknown = set(scn.get("numerics", {})) - set(DEFAULT_NUMERICS)
    if unknown:
        raise ConfigError(f"unknown numerics options: {sorted(unknown)}")
    scn["numerics"] = {**DEFAULT_NUMERICS, **scn.get("numerics", {})}
    if seed_override is not None:
        scn["numerics"]["seed"] = int(seed_override)
    scn.setdefault("out", ".")
    return scn


# ---------------------------------------------------------------------------
# system and orbit construction

def build_system(sysc: dict):
    if sysc["kind"] == "twist-family":
        if sysc["dim"] == 1 and sysc["coupling"] == 0.0:
            return standard_family(sysc["K"])
        strengths = _as_strength_list(sysc["K"], sysc["dim"], "system.K")
        return coupled_standard_family(strengths, sysc["coupling"])
    d = sysc["dim"]
    s = sysc["stiffness"]
    if isinstance(s, list):
        terms = [(si / (4.0 * np.pi ** 2), np.eye(d, dtype=int)[i])
                 for i, si in enumerate(s) if si != 0.0]
        if not terms:
            return flat_torus(d)
        return MechanicalHamiltonian(TrigPolynomial(terms, dim=d))
    if s == 0.0:
        return flat_torus(d)
    return pendulum(s) if d == 1 else MechanicalHamiltonian(
        TrigPolynomial([(s / (4.0 * np.pi ** 2), np.eye(d, dtype=int)[i])
                        for i in range(d)]))


def twist_configuration(gf, scn: dict) -> PeriodicConfiguration:
    """Resolve the orbit spec to a periodic configuration, checking stationarity."""
    orbit, num = scn["orbit"], scn["numerics"]
    if orbit["kind"] == "rotation":
        return find_minimizing_periodic_orbit(
            gf, orbit["rotation"], orbit["period"],
            residual_tol=num["residual_tol"],
            n_certify_periods=num["n_certify_periods"])
    if orbit["kind"] == "fixed-point":
        cfg = PeriodicConfiguration(np.full((1, gf.dim), 0.5),
                                    np.zeros(gf.dim, dtype=int))
    else:
        cfg = PeriodicConfiguration(np.asarray(orbit["points"], dtype=float),
                                    np.asarray(orbit["shift"], dtype=int))
    residual = float(np.abs(periodic_gradient(gf, cfg)).max())
    if residual > max(num["residual_tol"], 1e-8):
        raise NonConvergenceError(
            f"configuration is not stationary: gradient sup-norm {residual:.3e}")
    return cfg


# ---------------------------------------------------------------------------
# verification rows

@dataclass
class Row:
    """One checked statement.  ``status`` is 'pass', 'fail' or 'skip'."""

    scenario_id: str
    theorem_id: str
    status: str
    lhs: float | None = None
    rhs: float | None = None
    slack: float | None = None
    tolerance: float | None = None
    reason: str = ""
    n_steps: int = 0
    k_used: int = 0
    wall_ms: int = 0


def _equality_row(sid, tid, lhs, rhs, tol, **kw) -> Row:
    slack = -abs(lhs - rhs)
    status = "pass" if slack >= -tol else "fail"
    return Row(sid, tid, status, lhs=float(lhs), rhs=float(rhs),
               slack=float(slack), tolerance=float(tol), **kw)


def _bound_row(sid, tid, lhs, rhs, tol, **kw) -> Row:
    slack = rhs - lhs
    status = "pass" if slack >= -tol else "fail"
    return Row(sid, tid, status, lhs=float(lhs), rhs=float(rhs),
               slack=float(slack), tolerance=float(tol), **kw)


def _verify_twist(scn: dict) -> list[Row]:
    num, sid = scn["numerics"], scn["id"]
    d = scn["system"]["dim"]
    gf = build_system(scn["system"])
    general_id = "general-1d" if d == 1 else "general-dd"
    theorem_ids = ["theorem2", "theorem4", general_id]
    try:
        cfg = twist_configuration(gf, scn)
    except (GreenLyapError, ValueError) as err:
        reason = f"{type(err).__name__}: {err}"
        return [Row(sid, tid, "fail", reason=reason) for tid in theorem_ids]

    N = cfg.period
    seg = cfg.as_orbit_segment(gf)
    cocycle = [seg.tangent(n) for n in range(N)]
    # whole periods only, so frame estimates anchor at configuration point 0
    n_steps = num["n_steps"] + (-num["n_steps"]) % N
    spectrum = lyapunov_spectrum_map(cocycle, n_steps, seed=num["seed"])
    weights = WeightedOrbitMeasure.uniform(N)

    green = None
    green_status = green_reason = None
    k_used = 0
    try:
        green = compute_green_bundles_periodic(gf, cfg, tol=num["green_tol"],
                                               k_max=num["k_max"])
        k_used = green.k_used
    except NonConvergenceError as err:
        # monotone iteration still moving at k_max: the zero-exponent regime,
        # where convergence is only O(1/k) — not a counterexample
        green_status, green_reason = "skip", f"green iteration not converged: {err}"
        k_used = num["k_max"]
    except GreenLyapError as err:
        green_status, green_reason = "fail", f"{type(err).__name__}: {err}"

    try:
        lam_min = smallest_positive(spectrum)
    except NoPositiveExponentError:
        lam_min = None

    rows = []
    if green is not None:
        rows.append(_equality_row(sid, "theorem2", theorem2_sum(weights, green),
                                  sum_positive(spectrum), num["equality_tol"],
                                  n_steps=n_steps, k_used=k_used))
    else:
        rows.append(Row(sid, "theorem2", green_status, reason=green_reason,
                        n_steps=n_steps, k_used=k_used))

    if lam_min is None:
        rows.append(Row(sid, "theorem4", "skip",
                        reason="hypothesis fails: zero exponents",
                        n_steps=n_steps, k_used=k_used))
    elif green is None:
        rows.append(Row(sid, "theorem4", green_status, reason=green_reason,
                        n_steps=n_steps, k_used=k_used))
    else:
        try:
            res = theorem4_bound(weights, green)
            rows.append(_bound_row(sid, "theorem4", res.bound, lam_min,
                                   num["bound_tol"], n_steps=n_steps, k_used=k_used))
        except NoPositiveEigenvalueError as err:
            rows.append(Row(sid, "theorem4", "fail", rhs=lam_min,
                            reason=f"positive exponent but degenerate Green gap: {err}",
                            n_steps=n_steps, k_used=k_used))

    if lam_min is None:
        rows.append(Row(sid, general_id, "skip",
                        reason="hypothesis fails: zero exponents",
                        n_steps=n_steps, k_used=k_used))
        return rows
    try:
        e_u = unstable_space_estimate(cocycle, d, n_steps, seed=num["seed"],
                                      settle_tol=num["settle_tol"])
        e_s = stable_space_estimate(cocycle, d, n_steps, seed=num["seed"],
                                    settle_tol=num["settle_tol"])
    except NoGapError as err:
        rows.append(Row(sid, general_id, "fail",
                        reason=f"NoGapError: {err}", n_steps=n_steps, k_used=k_used))
        return rows
    fu, fs = e_u.frame, e_s.frame
    dists = []
    for n in range(N):
        dists.append(subspace_distance(fu, fs))
        mat = cocycle[n].as_matrix()
        fu, _ = np.linalg.qr(mat @ fu)
        fs, _ = np.linalg.qr(mat @ fs)
    mean_dist = float(np.mean(dists))
    C = cocycle_bound_constant(cocycle)
    check = general_bound_check_1d if d == 1 else general_bound_check_dd
    rep = check(spectrum, C, mean_dist, tol=num["bound_tol"])
    rows.append(Row(sid, general_id, "pass" if rep.holds else "fail",
                    lhs=rep.lhs, rhs=rep.rhs, slack=rep.slack,
                    tolerance=num["bound_tol"], n_steps=n_steps, k_used=k_used))
    return rows


def _verify_hamiltonian(scn: dict) -> list[Row]:
    num, sid = scn["numerics"], scn["id"]
    d = scn["system"]["dim"]
    ham = build_system(scn["system"])
    q0, p0 = scn["orbit"]["q0"], scn["orbit"]["p0"]
    n_qr = int(round(num["t_total"]))
    depth = int(round(num["T"]))
    theorem_ids = ["theorem1", "theorem3", "lemma9"]
    try:
        spectrum = lyapunov_spectrum_flow(ham, q0, p0, num["t_total"])
        times = np.linspace(0.0, num["sample_span"], num["n_samples"])
        data = green_bundles_along_orbit(ham, q0, p0, times, T_conv=num["T"])
    except GreenLyapError as err:
        reason = f"{type(err).__name__}: {err}"
        return [Row(sid, tid, "fail", reason=reason, n_steps=n_qr, k_used=depth)
                for tid in theorem_ids]
    weights = WeightedOrbitMeasure.uniform(num["n_samples"])
    hpp_max = max(float(np.linalg.norm(ham.hess_pp(data.q[i], data.p[i]), 2))
                  for i in range(len(data)))
    # finite-depth error bound: the half- vs full-depth bundle moves bound
    # the remaining tail of the monotone ladders
    depth_err = d * (data.conv_forward + data.conv_backward) * hpp_max
    eq_tol = num["equality_tol"] + depth_err

    rows = []
    lhs1 = theorem1_sum(weights, data)
    row1 = _equality_row(sid, "theorem1", lhs1, sum_positive(spectrum), eq_tol,
                         n_steps=n_qr, k_used=depth)
    if depth_err > num["equality_tol"]:
        row1.reason = f"tolerance includes finite-depth bundle error {depth_err:.3e}"
    rows.append(row1)

    try:
        lam_min = smallest_positive(spectrum)
    except NoPositiveExponentError:
        lam_min = None
    if lam_min is None:
        rows.append(Row(sid, "theorem3", "skip",
                        reason="hypothesis fails: zero exponents",
                        n_steps=n_qr, k_used=depth))
    else:
        try:
            res3 = theorem3_bound(weights, data)
            rows.append(_bound_row(sid, "theorem3", res3.bound, lam_min,
                                   num["bound_tol"], n_steps=n_qr, k_used=depth))
        except NoPositiveEigenvalueError as err:
            rows.append(Row(sid, "theorem3", "fail", rhs=lam_min,
                            reason=f"positive exponent but degenerate Green gap: {err}",
                            n_steps=n_qr, k_used=depth))

    rep = lemma9_check(ham, q0, p0, t_total=num["lemma9_t"], T_conv=num["T"])
    # both halves in one slack: the relative identity error must sit under
    # the equality tolerance and the derivative must be nonnegative
    slack = min(num["equality_tol"] - rep.max_rel_err,
                rep.min_lhs + num["bound_tol"])
    row9 = Row(sid, "lemma9", "pass" if slack >= 0 else "fail",
               lhs=float(rep.max_rel_err), rhs=float(num["equality_tol"]),
               slack=float(slack), tolerance=0.0,
               n_steps=rep.times.size, k_used=depth)
    if rep.min_lhs < -num["bound_tol"]:
        row9.reason = f"derivative negative: min lhs {rep.min_lhs:.3e}"
    rows.append(row9)
    return rows


def run_verify_scenario(scn: dict, timings: bool = False) -> list[Row]:
    """All verification rows for one resolved scenario (pure, process-safe)."""
    t0 = time.perf_counter()
    if scn["system"]["kind"] == "twist-family":
        rows = _verify_twist(scn)
    else:
        rows = _verify_hamiltonian(scn)
    if timings:
        elapsed = int(round(1000 * (time.perf_counter() - t0)))
        for row in rows:
            row.wall_ms = elapsed
    return rows


# ---------------------------------------------------------------------------
# scan expansion

def _grid_children(scn: dict) -> list[dict]:
    grid = scn.get("scan", {})
    sysc = scn["system"]
    base = {k: v for k, v in scn.items() if k != "scan"}
    base["task"] = "verify"
    children = []

    def clone(suffix, system=None, orbit=None):
        child = json.loads(json.dumps(base))
        child["id"] = f"{scn['id']}-{suffix}"
        if system:
            child["system"].update(system)
        if orbit:
            child["orbit"] = orbit
        return child

    if sysc["kind"] == "twist-family":
        if "stiffness" in grid:
            raise ConfigError("scan over 'stiffness' needs a hamiltonian-family system")
        strengths = grid.get("K", [sysc["K"]])
        rotations = grid.get("rotation")
        for K in strengths:
            if rotations is None:
                children.append(clone(f"K{K:g}", system={"K": K}))
                continue
            for entry in rotations:
                m, N = list(entry[:-1]), int(entry[-1])
                if len(m) != sysc["dim"]:
                    raise ConfigError(
                        f"scan rotation {entry} has {len(m)} components for "
                        f"dim={sysc['dim']} (last entry is the period)")
                tag = f"K{K:g}-r{'.'.join(str(v) for v in m)}.{N}"
                children.append(clone(tag, system={"K": K},
                                      orbit={"kind": "rotation", "rotation": m,
                                             "period": N}))
    else:
        if "K" in grid or "rotation" in grid:
            raise ConfigError("scan over 'K'/'rotation' needs a twist-family system")
        for s in grid.get("stiffness", []):
            tag = f"s{'x'.join(f'{v:g}' for v in s)}" if isinstance(s, list) \
                else f"s{s:g}"
            children.append(clone(tag, system={"stiffness": s}))

    children.extend(grid.get("scenarios", []))
    return children


def expand_scan(scn: dict, seed_override: int | None = None) -> list[dict]:
    """Resolved verify scenarios for every grid point, in grid order."""
    out = []
    seen = set()
    for raw in _grid_children(scn):
        child = resolve_scenario(raw, seed_override=seed_override)
        if child["task"] != "verify":
            raise ConfigError(
                f"scan scenario '{child['id']}' has task '{child['task']}' "
                "(only 'verify' runs inside a scan)")
        if child["id"] in seen:
            raise ConfigError(f"duplicate scenario id '{child['id']}' in scan")
        seen.add(child["id"])
        out.append(child)
    return out


# ---------------------------------------------------------------------------
# output

def _csv_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_rows_csv(path: Path, rows: list[Row]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)  # QUOTE_MINIMAL + CRLF per RFC 4180
        writer.writerow(CSV_COLUMNS)
        for r in rows:
            writer.writerow([r.scenario_id, r.theorem_id, _csv_cell(r.lhs),
                             _csv_cell(r.rhs), _csv_cell(r.slack), r.status,
                             r.n_steps, r.k_used, r.wall_ms])


def write_json(path: Path, payload: dict) -> None:
    with path.open("w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


def _summary(rows: list[Row]) -> dict:
    return {
        "pass": sum(r.status == "pass" for r in rows),
        "fail": sum(r.status == "fail" for r in rows),
        "skip": sum(r.status == "skip" for r in rows),
    }


def _print_rows(rows: list[Row], quiet: bool) -> None:
    if quiet:
        return
    for r in rows:
        detail = ""
        if r.lhs is not None and r.rhs is not None:
            detail = f"  lhs={r.lhs:.9g}  rhs={r.rhs:.9g}"
        elif r.reason:
            detail = f"  ({r.reason})"
        print(f"{r.scenario_id:<32} {r.theorem_id:<11} {r.status:<5}{detail}")


def _exit_code(rows: list[Row]) -> int:
    return 1 if any(r.status == "fail" for r in rows) else 0


# ---------------------------------------------------------------------------
# subcommands

def _out_dir(args, scn: dict) -> Path:
    out = Path(args.out) if args.out else Path(scn.get("out", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _expect_task(scn: dict, expected: str) -> None:
    if scn["task"] != expected:
        raise ConfigError(f"config task is '{scn['task']}' but the "
                          f"'{expected}' subcommand was invoked")


def cmd_verify(args) -> int:
    scn = resolve_scenario(load_config(args.config), seed_override=args.seed)
    _expect_task(scn, "verify")
    rows = run_verify_scenario(scn, timings=args.timings)
    out = _out_dir(args, scn)
    payload = {"version": __version__, "config": scn,
               "rows": [asdict(r) for r in rows], "summary": _summary(rows)}
    write_json(out / f"{scn['id']}-verify.json", payload)
    write_rows_csv(out / f"{scn['id']}-verify.csv", rows)
    _print_rows(rows, args.quiet)
    if not args.quiet:
        print(f"wrote {out / (scn['id'] + '-verify.json')} and .csv")
    return _exit_code(rows)


def cmd_scan(args) -> int:
    scn = resolve_scenario(load_config(args.config), seed_override=args.seed)
    _expect_task(scn, "scan")
    children = expand_scan(scn, seed_override=args.seed)
    if args.jobs > 1 and len(children) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            row_sets = list(pool.map(run_verify_scenario, children,
                                     [args.timings] * len(children)))
    else:
        row_sets = [run_verify_scenario(c, timings=args.timings) for c in children]
    rows = [r for rs in row_sets for r in rs]  # grid order, stable
    out = _out_dir(args, scn)
    payload = {"version": __version__, "config": scn, "scenarios": children,
               "rows": [asdict(r) for r in rows], "summary": _summary(rows)}
    write_json(out / f"{scn['id']}-scan.json", payload)
    write_rows_csv(out / f"{scn['id']}-scan.csv", rows)
    _print_rows(rows, args.quiet)
    if not args.quiet:
        s = _summary(rows)
        print(f"{len(children)} scenarios: {s['pass']} pass, {s['fail']} fail, "
              f"{s['skip']} skip")
    return _exit_code(rows)


def cmd_green(args) -> int:
    scn = resolve_scenario(load_config(args.config), seed_override=args.seed)
    _expect_task(scn, "green")
    num = scn["numerics"]
    try:
        if scn["system"]["kind"] == "twist-family":
            gf = build_system(scn["system"])
            cfg = twist_configuration(gf, scn)
            pair = compute_green_bundles_periodic(gf, cfg, tol=num["green_tol"],
                                                  k_max=num["k_max"])
            gaps = pair.gap()
            body = {
                "points": cfg.points.tolist(),
                "rotation": cfg.rotation.tolist(),
                "k_used": pair.k_used,
                "converged": pair.converged,
                "tol": pair.tol,
                "S_plus": pair.S_plus.tolist(),
                "S_minus": pair.S_minus.tolist(),
                "S_one": pair.S_one.tolist(),
                "S_minus_one": pair.S_minus_one.tolist(),
                "gap_eigenvalues": [np.linalg.eigvalsh(g).tolist() for g in gaps],
            }
        else:
            ham = build_system(scn["system"])
            orb = scn["orbit"]
            pair = compute_green_bundles_flow(ham, orb["q0"], orb["p0"], T=num["T"])
            body = {
                "q": pair.q.tolist(),
                "p": pair.p.tolist(),
                "T": pair.T,
                "U": pair.U.tolist(),
                "S": pair.S.tolist(),
                "U_half": pair.U_half.tolist(),
                "S_half": pair.S_half.tolist(),
                "convergence_estimate": pair.convergence_estimate,
                "gap_eigenvalues": np.linalg.eigvalsh(pair.gap()).tolist(),
            }
    except GreenLyapError as err:
        print(f"green computation failed: {type(err).__name__}: {err}",
              file=sys.stderr)
        return 1
    out = _out_dir(args, scn)
    path = out / f"{scn['id']}-green.json"
    write_json(path, {"version": __version__, "config": scn, "green": body})
    if not args.quiet:
        print(f"wrote {path}")
    return 0


def cmd_lyapunov(args) -> int:
    scn = resolve_scenario(load_config(args.config), seed_override=args.seed)
    _expect_task(scn, "lyapunov")
    num = scn["numerics"]
    try:
        if scn["system"]["kind"] == "twist-family":
            gf = build_system(scn["system"])
            cfg = twist_configuration(gf, scn)
            seg = cfg.as_orbit_segment(gf)
            cocycle = [seg.tangent(n) for n in range(cfg.period)]
            n_steps = num["n_steps"] + (-num["n_steps"]) % cfg.period
            spectrum = lyapunov_spectrum_map(cocycle, n_steps, seed=num["seed"])
            span = n_steps
        else:
            ham = build_system(scn["system"])
            orb = scn["orbit"]
            spectrum = lyapunov_spectrum_flow(ham, orb["q0"], orb["p0"],
                                              num["t_total"])
            span = num["t_total"]
    except GreenLyapError as err:
        print(f"spectrum computation failed: {type(err).__name__}: {err}",
              file=sys.stderr)
        return 1
    body = {
        "span": span,
        "exponents": spectrum.exponents.tolist(),
        "exponents_full_average": spectrum.exponents_full.tolist(),
        "zero_threshold": spectrum.zero_threshold,
        "burn_in": spectrum.burn_in,
        "pairing_defect": spectrum.pairing_defect(),
        "sum_positive": sum_positive(spectrum),
    }
    out = _out_dir(args, scn)
    path = out / f"{scn['id']}-lyapunov.json"
    write_json(path, {"version": __version__, "config": scn, "spectrum": body})
    if not args.quiet:
        print(f"wrote {path}")
    return 0


def cmd_minimize(args) -> int:
    scn = resolve_scenario(load_config(args.config), seed_override=args.seed)
    _expect_task(scn, "minimize")
    num = scn["numerics"]
    gf = build_system(scn["system"])
    orbit = scn["orbit"]
    try:
        cfg = find_minimizing_periodic_orbit(
            gf, orbit["rotation"], orbit["period"],
            residual_tol=num["residual_tol"],
            n_certify_periods=num["n_certify_periods"])
    except GreenLyapError as err:
        print(f"minimization failed: {type(err).__name__}: {err}", file=sys.stderr)
        return 1
    cert = cfg.certificate
    seg = cfg.as_orbit_segment(gf)
    body = {
        "points": cfg.points.tolist(),
        "rotation": cfg.rotation.tolist(),
        "period": cfg.period,
        "momenta": seg.p[:cfg.period].tolist(),
        "action": periodic_action(gf, cfg),
        "residual": cert.residual,
        "min_eig_periodic": cert.min_eig_periodic,
        "kernel_dim": cert.kernel_dim,
        "n_periods_checked": cert.n_periods_checked,
        "segment_pd": cert.segment_pd,
    }
    out = _out_dir(args, scn)
    path = out / f"{scn['id']}-orbit.json"
    write_json(path, {"version": __version__, "config": scn, "orbit": body})
    if not args.quiet:
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="greenlyap",
        description="Green bundles, Lyapunov spectra and gap-formula "
                    "verification for twist maps and Tonelli flows.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="scenario JSON path")
    common.add_argument("--seed", type=int, default=None,
                        help="override numerics.seed")
    common.add_argument("--out", default=None,
                        help="output directory (default: config 'out' or '.')")
    common.add_argument("--quiet", action="store_true",
                        help="suppress per-row stdout")
    common.add_argument("--timings", action="store_true",
                        help="record wall-clock times (breaks byte-for-byte "
                             "reproducibility)")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common],
                   help="check the gap formulas and bounds on one scenario")
    scan = sub.add_parser("scan", parents=[common],
                          help="verify across a parameter grid")
    scan.add_argument("--jobs", type=int, default=1,
                      help="concurrent grid points (default 1)")
    sub.add_parser("green", parents=[common], help="write Green bundle slopes")
    sub.add_parser("lyapunov", parents=[common], help="write a Lyapunov spectrum")
    sub.add_parser("minimize", parents=[common],
                   help="write a certified minimizing periodic orbit")
    return parser


_COMMANDS = {
    "verify": cmd_verify,
    "scan": cmd_scan,
    "green": cmd_green,
    "lyapunov": cmd_lyapunov,
    "minimize": cmd_minimize,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
