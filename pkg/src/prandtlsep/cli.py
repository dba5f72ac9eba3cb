"""Command-line driver: simulate, audit, verify-algebra, sweep.

Artifacts are plain CSV/JSON with a manifest carrying the full
configuration and its hash; reruns from the same configuration are
bit-for-bit reproducible.  Exit codes are a stable contract:

    0  success / all checks passed
    1  exact-algebra certificate failed
    2  solver failure (partial artifacts kept)
    3  invalid configuration
    4  missing input artifacts
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from typing import List, Optional

import numpy as np

from . import __version__
from . import diagnostics as dg
from . import modulation as md
from . import profiles as pr
from . import ratpoly as rp
from . import vonmises as vm
from .errors import ConfigError, MissingArtifactError, PrandtlSepError
from .gridfields import Field, Grid

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_ALGEBRA = 1
EXIT_SOLVER = 2
EXIT_CONFIG = 3
EXIT_MISSING = 4


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RunConfig:
    lambda0: float = 0.05
    x0_pressure: float = 1.0
    perturbation_amplitude: float = 0.0
    scheme: str = "bdf2"
    dx_init: float = 1e-4
    dx_min: float = 1e-13
    cfl_safety: float = 0.9
    lambda_stop_factor: float = 50.0
    ds_rel: float = 0.008
    n_psi: int = 2305
    psi_power: float = 5.0
    source_scale: float = 1.0
    snapshots_per_decade: float = 8.0
    n_physical: int = 3073
    n_rescaled: int = 641
    weight_a: float = 0.05
    weight_beta1: float = 0.27
    weight_beta2: float = 0.26
    weight_m1: int = 40
    weight_m2: int = 80
    audit_c_minus: float = 32.0
    audit_c_zone: float = 0.7
    audit_max_principle: bool = True
    audit_sub_super: bool = True
    audit_f_bounds: bool = True
    outdir: str = "run-output"

    def validate(self) -> None:
        if not 0.0 < self.lambda0 <= 0.2:
            raise ConfigError("lambda0 must lie in (0, 0.2]")
        if self.x0_pressure <= 0.0:
            raise ConfigError("x0_pressure must be positive")
        if self.lambda_stop_factor <= 1.0:
            raise ConfigError("lambda_stop_factor must exceed 1")
        if self.source_scale not in (0.0, 1.0):
            raise ConfigError("source_scale must be 0 or 1")
        if self.n_psi < 257 or self.n_rescaled < 65 or self.n_physical < 257:
            raise ConfigError("grid sizes too small")
        if not 0.25 < self.weight_beta2 < self.weight_beta1 < 2.0 / 7.0:
            raise ConfigError("weight scales must satisfy 1/4 < beta2 < beta1 < 2/7")
        try:
            self.march_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    @property
    def lambda_stop(self) -> float:
        return self.lambda0 / self.lambda_stop_factor

    def march_config(self) -> vm.MarchConfig:
        return vm.MarchConfig(
            dx_init=self.dx_init, dx_min=self.dx_min, cfl_safety=self.cfl_safety,
            lambda_stop=self.lambda_stop, scheme=self.scheme, ds_rel=self.ds_rel,
            n_psi=self.n_psi, psi_power=self.psi_power,
            source_scale=self.source_scale,
            snapshots_per_decade=self.snapshots_per_decade,
        )

    def canonical_text(self) -> str:
        lines = []
        for f in sorted(fields(self), key=lambda f: f.name):
            lines.append(f"{f.name} = {getattr(self, f.name)!r}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


def parse_config_file(path: str) -> dict:
    """Key = value lines; '#' comments; types resolved against RunConfig."""
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    type_map = {f.name: f.type for f in fields(RunConfig)}
    defaults = RunConfig()
    out = {}
    with open(path) as fh:
        for ln, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{ln}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key not in type_map:
                raise ConfigError(f"{path}:{ln}: unknown key {key!r}")
            current = getattr(defaults, key)
            try:
                if isinstance(current, bool):
                    out[key] = value.lower() in ("1", "true", "yes", "on")
                elif isinstance(current, int):
                    out[key] = int(value)
                elif isinstance(current, float):
                    out[key] = float(value)
                else:
                    out[key] = value.strip("'\"")
            except ValueError as exc:
                raise ConfigError(f"{path}:{ln}: bad value for {key}: {value}") from exc
    return out


# ---------------------------------------------------------------------------
# Atomic, reproducible artifact writers
# ---------------------------------------------------------------------------


def _atomic_write(path: str, text: str) -> None:
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    directory = os.path.dirname(os.path.abspath(path))
    with tempfile.NamedTemporaryFile("w", dir=directory, delete=False) as tmp:
        tmp.write(text)
        tmp_path = tmp.name
    os.replace(tmp_path, path)


def _csv_text(header: List[str], columns: List[np.ndarray]) -> str:
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_json(path: str, payload) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# verify-algebra
# ---------------------------------------------------------------------------

#: stated values of the two highest-order chain coefficients in the source
#: material; the defining recursion provably yields different ones (see the
#: certificate), so these rows are reported as documented mismatches and do
#: not gate the exit status.
_ERRATUM_NOTE = (
    "stated constant is inconsistent with the defining recursion; "
    "the derived value is certified instead"
)


def run_verify_algebra(outdir: str, tamper: Optional[str] = None) -> int:
    checks = rp.algebra_certificate(tamper=tamper)
    coeffs = rp.profile_coefficients()
    a4, a7 = coeffs["a4"], coeffs["a7"]
    erratum = [
        {
            "name": "stated a13 = 11 a4 a7/2496",
            "stated": str(11 * a4 * a7 / 2496),
            "derived": str(coeffs["a13"]),
            "match": coeffs["a13"] == 11 * a4 * a7 / 2496,
            "note": _ERRATUM_NOTE,
        },
        {
            "name": "stated a16 = a7^2/640",
            "stated": str(a7 * a7 / 640),
            "derived": str(coeffs["a16"]),
            "match": coeffs["a16"] == a7 * a7 / 640,
            "note": _ERRATUM_NOTE,
        },
    ]
    payload = {
        "identities": [asdict(c) for c in checks],
        "erratum_checks": erratum,
        "all_passed": all(c.passed for c in checks),
    }
    write_json(os.path.join(outdir, "certificate.json"), payload)
    lines = ["exact algebra certificate", "=" * 60]
    for c in checks:
        lines.append(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}")
        if not c.passed:
            lines.append(f"    expected: {c.expected}")
            lines.append(f"    computed: {c.computed}")
    for e in erratum:
        tag = "MATCH" if e["match"] else "MISMATCH (documented erratum)"
        lines.append(f"[{tag}] {e['name']}: derived {e['derived']}")
    _atomic_write(os.path.join(outdir, "certificate.txt"), "\n".join(lines) + "\n")
    failing = [c.name for c in checks if not c.passed]
    if failing:
        print(f"verify-algebra: FAIL at {failing[0]}")
        return EXIT_ALGEBRA
    print(f"verify-algebra: {len(checks)} identities PASS "
          f"(a4 = {coeffs['a4']}, a7 = {coeffs['a7']}); "
          f"{sum(not e['match'] for e in erratum)} documented erratum rows")
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _write_manifest(cfg: RunConfig, extra: dict) -> None:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "config": {f.name: getattr(cfg, f.name) for f in fields(cfg)},
        "config_hash": cfg.config_hash(),
        "columns": {
            "trajectory.csv": ["x", "lambda", "dx", "F_max", "monotonicity_min"],
            "snapshot": ["phi", "w"],
            "energies.csv": ["s", "E0", "E1", "E2", "D0", "D1", "D2",
                              "trace_residual", "bs_plus_b2", "resolved_flag"],
        },
    }
    manifest.update(extra)
    write_json(os.path.join(cfg.outdir, "manifest.json"), manifest)


def run_simulate(cfg: RunConfig) -> int:
    cfg.validate()
    data = pr.build_initial_data(
        cfg.lambda0, grid=pr.default_physical_grid(cfg.n_physical),
        perturbation_amplitude=cfg.perturbation_amplitude,
        x0_pressure=cfg.x0_pressure)
    _atomic_write(
        os.path.join(cfg.outdir, "initial_data.csv"),
        _csv_text(["y", "u0", "u0_prime", "u0_second"],
                  [data.grid.nodes, data.u0.values,
                   data.u0_prime.values, data.u0_second.values]))
    traj = vm.solve_until_separation(data, cfg.march_config())
    _atomic_write(
        os.path.join(cfg.outdir, "trajectory.csv"),
        _csv_text(["x", "lambda", "dx", "F_max", "monotonicity_min"],
                  [traj.x, traj.lam, traj.dx, traj.F_max, traj.mono_min]))
    snap_meta = []
    for snap in traj.snapshots:
        name = f"snapshot_{snap.index:03d}.csv"
        _atomic_write(os.path.join(cfg.outdir, name),
                      _csv_text(["phi", "w"], [snap.state.psi_grid.nodes,
                                               snap.state.W.values]))
        pair_name = ""
        if snap.pair_state is not None:
            pair_name = f"snapshot_{snap.index:03d}_pair.csv"
            _atomic_write(os.path.join(cfg.outdir, pair_name),
                          _csv_text(["phi", "w"],
                                    [snap.pair_state.psi_grid.nodes,
                                     snap.pair_state.W.values]))
        snap_meta.append({
            "index": snap.index, "x": snap.x, "s": snap.s, "lam": snap.lam,
            "file": name, "pair_file": pair_name,
            "pair_x": snap.pair_state.x if snap.pair_state else None,
            "pair_s": snap.pair_s,
            "pair_lam": snap.pair_state.lam if snap.pair_state else None,
        })

    fit_payload = {"completed": traj.completed, "failure": traj.failure}
    if traj.completed and len(traj.x) > 50:
        try:
            win = md.fit_window(traj.x, traj.lam, cfg.lambda_stop)
            fit = md.fit_singularity(traj.x[win], traj.lam[win])
            s = traj.s
            b = md.compute_b(traj.x, traj.lam)
            late = s >= 5.0 * traj.s0
            bs_prod = (b * s)[late]
            defect = md._local_slope(s, b) + b * b
            fit_payload.update(fit)
            fit_payload.update({
                "J_gamma_13_4": float(np.trapezoid((s ** (13.0 / 4.0) * defect**2)[late],
                                                s[late])),
                "b_envelope": [float(bs_prod.min()), float(bs_prod.max())],
                "x_star_over_lambda0_sq": fit["x_star"] / cfg.lambda0**2,
            })
        except PrandtlSepError as exc:
            fit_payload["fit_error"] = str(exc)
    write_json(os.path.join(cfg.outdir, "fit_report.json"), fit_payload)
    _write_manifest(cfg, {"snapshots": snap_meta,
                          "s0": traj.s0, "completed": traj.completed,
                          "failure": traj.failure, "x_end": traj.x_end,
                          "steps": int(len(traj.x))})
    if not traj.completed:
        print(f"simulate: solver stopped early: {traj.failure}")
        return EXIT_SOLVER
    print(f"simulate: {len(traj.x)} steps to lambda = {traj.lam[-1]:.3e}, "
          f"x_end = {traj.x_end:.6f}; exponent "
          f"{fit_payload.get('exponent', float('nan')):.4f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------


def load_trajectory(outdir: str) -> tuple:
    """Rebuild the trajectory and snapshot states from run artifacts."""
    man_path = os.path.join(outdir, "manifest.json")
    traj_path = os.path.join(outdir, "trajectory.csv")
    if not (os.path.exists(man_path) and os.path.exists(traj_path)):
        raise MissingArtifactError(f"run artifacts not found under {outdir}")
    with open(man_path) as fh:
        manifest = json.load(fh)
    cfg = RunConfig(**manifest["config"])
    raw = np.genfromtxt(traj_path, delimiter=",", names=True)
    snapshots = []
    for meta in manifest["snapshots"]:
        table = np.genfromtxt(os.path.join(outdir, meta["file"]),
                              delimiter=",", names=True)
        grid = Grid(np.asarray(table["phi"]), "loaded")
        state = vm.VMState(x=meta["x"], psi_grid=grid,
                           W=Field(grid, np.asarray(table["w"])),
                           lam=meta["lam"], x0_pressure=cfg.x0_pressure,
                           source_scale=cfg.source_scale)
        pair = None
        if meta["pair_file"]:
            pt = np.genfromtxt(os.path.join(outdir, meta["pair_file"]),
                               delimiter=",", names=True)
            pgrid = Grid(np.asarray(pt["phi"]), "loaded")
            pair = vm.VMState(x=meta["pair_x"], psi_grid=pgrid,
                              W=Field(pgrid, np.asarray(pt["w"])),
                              lam=meta["pair_lam"], x0_pressure=cfg.x0_pressure,
                              source_scale=cfg.source_scale)
        snapshots.append(vm.Snapshot(index=meta["index"], x=meta["x"],
                                     s=meta["s"], lam=meta["lam"], state=state,
                                     pair_state=pair, pair_s=meta["pair_s"]))
    traj = vm.Trajectory(
        x=np.asarray(raw["x"]), lam=np.asarray(raw["lambda"]),
        s=md.accumulate_s(np.asarray(raw["x"]), np.asarray(raw["lambda"]),
                          manifest["s0"]),
        dx=np.asarray(raw["dx"]), F_max=np.asarray(raw["F_max"]),
        mono_min=np.asarray(raw["monotonicity_min"]), snapshots=snapshots,
        s0=manifest["s0"], lambda0=cfg.lambda0, x0_pressure=cfg.x0_pressure,
        config=cfg.march_config(), completed=manifest["completed"],
        failure=manifest["failure"])
    return cfg, traj


def run_audit(outdir: str) -> int:
    try:
        cfg, traj = load_trajectory(outdir)
    except MissingArtifactError as exc:
        print(f"audit: {exc}")
        return EXIT_MISSING
    frames = dg.build_frames(traj, n_grid=cfg.n_rescaled)
    rows = {k: [] for k in ("s", "E0", "E1", "E2", "D0", "D1", "D2",
                            "trace_residual", "bs_plus_b2", "resolved_flag")}
    for fr in frames:
        r = fr.report
        if r is None:
            continue
        rows["s"].append(r.s)
        for key in ("E0", "E1", "E2", "D0", "D1", "D2"):
            rows[key].append(getattr(r, key))
        rows["trace_residual"].append(r.trace_residual)
        rows["bs_plus_b2"].append(r.bs_plus_b2)
        rows["resolved_flag"].append(1.0 if r.resolved else 0.0)
    _atomic_write(os.path.join(outdir, "energies.csv"),
                  _csv_text(list(rows), [np.asarray(v) for v in rows.values()]))
    suite = dg.run_audit_suite(frames, C_minus=cfg.audit_c_minus,
                               c_zone=cfg.audit_c_zone)
    enabled = {
        "max-principle": cfg.audit_max_principle,
        "sub-super-solutions": cfg.audit_sub_super,
        "diffusion-balance-bounds": cfg.audit_f_bounds,
    }
    reports = [asdict(r) for r in suite.reports]
    commutator = []
    b_arr = md.compute_b(traj.x, traj.lam)
    for snap in traj.snapshots[1:-1:4]:
        i = int(np.argmin(np.abs(traj.x - snap.x)))
        try:
            commutator.append(dg.commutator_identity_check(
                snap, float(b_arr[i]), n_grid=cfg.n_rescaled))
        except PrandtlSepError as exc:
            commutator.append({"s_mid": snap.s, "error": str(exc)})
    payload = {
        "calibration": {"M2": suite.M2, "M1": suite.M1, "M0": suite.M0,
                         "alpha": suite.alpha, "A_minus": suite.A_minus,
                         "A_plus": suite.A_plus, "C_minus": suite.C_minus},
        "reports": reports,
        "commutator_identity": commutator,
        "enabled": enabled,
    }
    failed = [r for r in suite.reports if enabled.get(r.name, True) and not r.passed]
    payload["all_passed"] = not failed
    write_json(os.path.join(outdir, "audit_summary.json"), payload)
    if failed:
        print(f"audit: {len(failed)} reports FAILED (first: {failed[0].name})")
        return 1
    print(f"audit: {len(reports)} reports PASS "
          f"({len(frames)} snapshots audited)")
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------


def _sweep_worker(args: tuple) -> dict:
    lambda0, base = args
    cfg = RunConfig(**{**base, "lambda0": lambda0,
                       "outdir": os.path.join(base["outdir"], f"lam{lambda0:g}")})
    code = run_simulate(cfg)
    entry = {"lambda0": lambda0, "exit": code}
    fit_path = os.path.join(cfg.outdir, "fit_report.json")
    if os.path.exists(fit_path):
        with open(fit_path) as fh:
            entry["fit"] = json.load(fh)
    return entry


def run_sweep(lambda0_list: List[float], cfg: RunConfig) -> int:
    if len(lambda0_list) < 2:
        raise ConfigError("sweep needs at least two lambda0 values")
    base = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    jobs = [(lam0, base) for lam0 in sorted(lambda0_list, reverse=True)]
    with ProcessPoolExecutor(max_workers=min(len(jobs), os.cpu_count() or 2)) as ex:
        results = list(ex.map(_sweep_worker, jobs))
    rows = []
    any_fail = False
    for entry in results:
        fit = entry.get("fit", {})
        x_star = fit.get("x_star", float("nan"))
        rows.append((entry["lambda0"], x_star,
                     x_star / entry["lambda0"] ** 2 if np.isfinite(x_star) else float("nan"),
                     fit.get("exponent", float("nan"))))
        any_fail = any_fail or entry["exit"] != 0
    table = _csv_text(["lambda0", "x_star", "x_star_over_lambda0_sq", "exponent"],
                      [np.asarray(col) for col in zip(*rows)])
    _atomic_write(os.path.join(cfg.outdir, "sweep.csv"), table)
    print(table, end="")
    ratios = [r[2] for r in rows if np.isfinite(r[2])]
    if len(ratios) >= 2:
        spread = (max(ratios) - min(ratios)) / min(ratios)
        print(f"sweep: x*/lambda0^2 spread = {spread:.1%}")
    return EXIT_SOLVER if any_fail else EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value configuration file")
    for f in fields(RunConfig):
        flag = "--" + f.name.replace("_", "-")
        parser.add_argument(flag, dest=f.name, default=None)


def _build_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    defaults = RunConfig()
    for f in fields(RunConfig):
        raw = getattr(args, f.name, None)
        if raw is None:
            continue
        current = getattr(defaults, f.name)
        if isinstance(current, bool):
            values[f.name] = str(raw).lower() in ("1", "true", "yes", "on")
        elif isinstance(current, int):
            values[f.name] = int(raw)
        elif isinstance(current, float):
            values[f.name] = float(raw)
        else:
            values[f.name] = str(raw)
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def main(argv: Optional[List[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="prandtlsep",
        description="Marched wall-shear collapse laboratory: simulate, audit, "
                    "and certify the exact profile algebra.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_alg = sub.add_parser("verify-algebra", help="re-derive and certify the "
                           "exact profile algebra")
    p_alg.add_argument("--outdir", default="run-output")
    p_alg.add_argument("--tamper", default=None, help=argparse.SUPPRESS)

    p_sim = sub.add_parser("simulate", help="march to separation and fit the "
                           "collapse law")
    _add_config_flags(p_sim)

    p_aud = sub.add_parser("audit", help="energies and inequality audits on a "
                           "finished run")
    p_aud.add_argument("rundir", help="directory holding simulate artifacts")

    p_sw = sub.add_parser("sweep", help="independent runs across lambda0 values")
    p_sw.add_argument("lambda0_values", nargs="+", type=float)
    _add_config_flags(p_sw)

    args = parser.parse_args(argv)
    try:
        if args.command == "verify-algebra":
            return run_verify_algebra(args.outdir, tamper=args.tamper)
        if args.command == "simulate":
            return run_simulate(_build_config(args))
        if args.command == "audit":
            return run_audit(args.rundir)
        if args.command == "sweep":
            cfg = _build_config(args)
            return run_sweep(args.lambda0_values, cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingArtifactError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except PrandtlSepError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
