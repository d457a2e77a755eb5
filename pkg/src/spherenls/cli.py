"""Command-line experiment runner.

Every command writes three files into ``--out``:

* ``<name>.results.json``: deterministic results (no timing), sorted keys
* ``<name>.series.csv``: the tabular series of the experiment
* ``<name>.manifest.json``: config echo, package versions, wall time

Parameters come from command defaults, then an optional ``--config`` file
of ``key = value`` lines, then explicit flags. Exit status is 0 on
success, 2 on a configuration error and 3 when a numerical guard trips.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import platform
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

EXIT_OK, EXIT_CONFIG, EXIT_GUARD = 0, 2, 3


class ConfigError(ValueError):
    pass


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


def _ints(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    return [int(x) for x in str(text).split(",") if x.strip()]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


@dataclass(frozen=True)
class Param:
    name: str
    type: object
    default: object
    help: str


@dataclass(frozen=True)
class Command:
    name: str
    anchor: str
    params: tuple
    run: object

    def defaults(self) -> dict:
        return {p.name: p.default for p in self.params}


# ---------------------------------------------------------------------------
# experiment bodies: each returns (results dict, csv text)

def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in row])
    return buf.getvalue()


def _run_evolve(cfg: dict):
    from .evolution import EvolutionConfig, apriori_diagnostics, evolve
    from .norms import modulation_norm
    from .resonance import ResonanceParams
    from .sphere_basis import SpectralField

    rng = np.random.default_rng(cfg["seed"])
    u0 = SpectralField.random(cfg["K"], rng, decay=cfg["decay"])
    u0 = u0.scale(cfg["amplitude"] / modulation_norm(u0, cfg["s"]))
    ecfg = EvolutionConfig(
        K=cfg["K"],
        dt=cfg["dt"],
        T=cfg["T"],
        delta=cfg["delta"],
        s=cfg["s"],
        sample_stride=cfg["stride"],
        nonlinearity_sign=cfg["sign"],
        variant=cfg["variant"],
    )
    rec = evolve(u0, ecfg)
    res = {"record": rec.to_dict(), "xts": rec.xts(cfg["s"])}
    res["mass_drift"] = float(abs(rec.mass[-1] - rec.mass[0]) / rec.mass[0]) if rec.mass[0] > 0 else 0.0
    if rec.energy is not None and rec.energy[0] != 0:
        res["energy_drift"] = float(abs(rec.energy[-1] - rec.energy[0]) / abs(rec.energy[0]))
    if cfg["diagnostics"] and cfg["K"] <= cfg["diagnostics_max_K"]:
        res["diagnostics"] = apriori_diagnostics(rec, ResonanceParams(cfg["delta"]))
    return res, rec.to_csv()


def _random_hom(cfg, rng):
    from .homsub import HomState

    return HomState.random(cfg["K"], rng, h14=cfg["r"])


def _run_homsub(cfg: dict):
    from . import homsub as H

    rng = np.random.default_rng(cfg["seed"])
    u0 = _random_hom(cfg, rng)
    traj = H.hom_evolve(u0, cfg["T"], cfg["dt"])
    Ks = cfg["verify_K"]
    bil = H.verify_bilinear_xsb(cfg["trials"], Ks, cfg["b"], seed=cfg["seed"])
    tri = H.verify_trilinear(cfg["trials"], Ks, cfg["b"], cfg["b_prime"], seed=cfg["seed"])
    M = {str(m): H.compute_M(None, m, cfg["b_M"]) for m in cfg["m_max"]}
    res = {
        "u0": {"real": u0.a.real.tolist(), "imag": u0.a.imag.tolist()},
        "duhamel_residual": H.duhamel_residual(traj),
        "sup_h14": traj.sup_sobolev(0.25),
        "bilinear": bil,
        "trilinear": tri,
        "M_squared": M,
    }
    rows = [(k, bil["ratio_by_K"][k], tri["ratio_by_K"][k]) for k in bil["ratio_by_K"]]
    return res, _csv(["K", "bilinear_ratio", "trilinear_ratio"], rows)


def _run_picard(cfg: dict):
    from . import homsub as H

    rng = np.random.default_rng(cfg["seed"])
    u0 = _random_hom(cfg, rng)
    fixed, rep = H.picard_solve(u0, cfg["T"], cfg["b"], cfg["max_iter"], dt=cfg["dt"])
    ref = H.hom_evolve(u0, cfg["T"], cfg["dt"])
    rep["discrepancy_vs_rk4"] = (fixed - ref).sup_sobolev(0.25)
    rep["u0"] = {"real": u0.a.real.tolist(), "imag": u0.a.imag.tolist()}
    d = rep["differences"]
    rows = [(i + 1, d[i], d[i] / d[i - 1] if i and d[i - 1] > 0 else "") for i in range(len(d))]
    return rep, _csv(["iteration", "difference", "ratio"], rows)


def _run_estimates(cfg: dict):
    from . import estimates as E

    ks = cfg["k"]
    seed, trials = cfg["seed"], cfg["trials"]
    fits = {
        "sogge_p6": E.measure_sogge(6, ks, trials, seed),
        "sogge_pinf": E.measure_sogge(np.inf, ks, trials, seed),
        "bilinear_diagonal": E.measure_bilinear([(k, k) for k in ks], trials, seed),
        "bilinear_fixed_low": E.measure_bilinear([(4, k) for k in ks if k >= 4], trials, seed, against="max"),
        "restriction": E.restriction_counterexample(ks),
    }
    res = {n: f.to_dict() for n, f in fits.items()}
    norms = {str(k): E.four_norms(k) for k in range(4, max(ks) + 1)}
    vals = np.array([list(v.values()) for v in norms.values()])
    res["four_norms"] = norms
    res["four_norms_band"] = float(vals.max() / vals.min())
    rows = []
    for n, f in fits.items():
        ks_f = f.degrees if f.degrees is not None else f.xs
        for k, y, lab in zip(ks_f, f.ys, f.labels):
            rows.append((n, int(k), float(y), lab))
    return res, _csv(["experiment", "k", "ratio", "candidate"], rows)


def _run_audit(cfg: dict):
    from .resonance import ResonanceParams, audit_disjointness, audit_nonvanishing_phase

    p = ResonanceParams(cfg["delta"])
    reports = [audit_disjointness(cfg["K"], p, cfg["eps"]), audit_nonvanishing_phase(cfg["K"], p, cfg["eps"])]
    res = {r.kind: r.to_dict() for r in reports}
    res["ok"] = all(r.ok for r in reports)
    rows = []
    for r in reports:
        for v in r.violations:
            rows.append((r.kind, v["k"], v["k1"], v["k2"], v["k3"], v["phase"], v["member"]))
    return res, _csv(["audit", "k", "k1", "k2", "k3", "phase", "member"], rows)


def _run_instability(cfg: dict):
    from .evolution import EvolutionConfig, evolve
    from .norms import japanese, sobolev_norm
    from .sphere_basis import SpectralField, highest_harmonic, mu

    s = cfg["s"]
    curves, times = {}, None
    for k in cfg["k"]:
        u0 = highest_harmonic(k).scale(float(japanese(mu(k))) ** (-s))
        v0 = u0.scale(1.0 + cfg["eta"])
        ecfg = EvolutionConfig(K=k, dt=cfg["dt"], T=cfg["T"], sample_stride=cfg["stride"])
        ru, rv = evolve(u0, ecfg), evolve(v0, ecfg)
        d0 = sobolev_norm(u0 - v0, s)
        sep = [sobolev_norm(SpectralField(k, a - b), s) / d0 for a, b in zip(ru.snapshots, rv.snapshots)]
        curves[str(k)] = sep
        times = ru.times
    res = {"s": s, "eta": cfg["eta"], "times": times.tolist(), "separation": curves,
           "final_separation": {k: v[-1] for k, v in curves.items()}}
    rows = [[t] + [curves[str(k)][n] for k in cfg["k"]] for n, t in enumerate(times)]
    return res, _csv(["t"] + [f"sep_k{k}" for k in cfg["k"]], rows)


_COMMON = (
    Param("seed", int, 0, "seed for every random draw"),
    Param("out", str, ".", "output directory"),
    Param("name", str, "", "output file stem (default: command name)"),
)

REGISTRY = {
    c.name: c
    for c in (
        Command(
            "evolve",
            "truncated cubic NLS flow, conservation and a priori bound diagnostics",
            (
                Param("K", int, 16, "band limit"),
                Param("dt", float, 1e-3, "time step"),
                Param("T", float, 0.5, "final time"),
                Param("delta", float, 0.1, "resonance parameter in (0, 1)"),
                Param("s", float, 0.25, "monitoring regularity"),
                Param("amplitude", float, 0.5, "B^s norm of the random initial data"),
                Param("decay", float, 1.0, "spectral decay exponent of the random data"),
                Param("stride", int, 10, "steps between stored snapshots"),
                Param("sign", int, 1, "nonlinearity sign (+1, -1, or 0 for linear)"),
                Param("variant", str, "cubic", "nonlinearity: cubic (|u|^2 u) or u3"),
                Param("diagnostics", _bool, True, "compute J1..J5 and the bound residual"),
                Param("diagnostics_max_K", int, 24, "skip diagnostics above this band limit"),
            ),
            _run_evolve,
        ),
        Command(
            "homsub",
            "homogeneous-harmonic subsystem: solver residual and X^{s,b} estimate probes",
            (
                Param("K", int, 8, "band limit of the data"),
                Param("T", float, 0.1, "final time"),
                Param("dt", float, 1e-4, "time step"),
                Param("r", float, 0.1, "H^{1/4} norm of the random data"),
                Param("b", float, 0.51, "time regularity b"),
                Param("b_prime", float, 0.6, "dual time regularity b'"),
                Param("b_M", float, 0.5, "b used for the M constant"),
                Param("m_max", _ints, [64, 128], "m_max values for the M constant"),
                Param("verify_K", _ints, [8, 16], "band limits for the estimate probes"),
                Param("trials", int, 4, "random candidates per band limit"),
            ),
            _run_homsub,
        ),
        Command(
            "picard",
            "contraction of the Duhamel map in the homogeneous subsystem",
            (
                Param("K", int, 8, "band limit"),
                Param("T", float, 0.1, "final time"),
                Param("dt", float, 1e-4, "time step"),
                Param("r", float, 0.1, "H^{1/4} norm of the random data"),
                Param("b", float, 0.51, "time regularity b"),
                Param("max_iter", int, 30, "iteration cap"),
            ),
            _run_picard,
        ),
        Command(
            "verify-estimates",
            "eigenfunction L^p growth, bilinear eigenfunction bound, highest-harmonic L^4 growth",
            (
                Param("k", _ints, [8, 11, 16, 23, 32, 45, 64], "degrees"),
                Param("trials", int, 16, "random fields per degree"),
            ),
            _run_estimates,
        ),
        Command(
            "resonance-audit",
            "disjointness of resonant sets and nonvanishing phase off them",
            (
                Param("K", int, 32, "largest degree"),
                Param("delta", float, 0.1, "resonance parameter in (0, 1)"),
                Param("eps", float, 0.1, "weight exponent"),
            ),
            _run_audit,
        ),
        Command(
            "instability",
            "phase decoherence of nearby highest-harmonic data below regularity 1/4 (report only)",
            (
                Param("k", _ints, [8, 16, 32], "degrees"),
                Param("s", float, 0.15, "regularity of the data normalisation"),
                Param("T", float, 0.2, "final time"),
                Param("dt", float, 1e-3, "time step"),
                Param("eta", float, 1e-3, "relative amplitude perturbation"),
                Param("stride", int, 10, "steps between stored snapshots"),
            ),
            _run_instability,
        ),
    )
}


def list_experiments() -> str:
    lines = []
    for c in REGISTRY.values():
        lines.append(f"{c.name}: {c.anchor}")
        for p in c.params + _COMMON:
            d = ",".join(map(str, p.default)) if isinstance(p.default, list) else p.default
            lines.append(f"    --{p.name.replace('_', '-')} (default {d}): {p.help}")
    return "\n".join(lines)


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{n}: expected key = value")
        k, v = (x.strip() for x in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def resolve_config(command: str, file_values: dict, flag_values: dict) -> dict:
    """Merge defaults, file values and flags, converting types; unknown keys are errors."""
    if command not in REGISTRY:
        raise ConfigError(f"unknown command {command!r}")
    params = {p.name: p for p in REGISTRY[command].params + _COMMON}
    cfg = {n: p.default for n, p in params.items()}
    for source in (file_values, flag_values):
        for k, v in source.items():
            if v is None:
                continue
            if k not in params:
                raise ConfigError(f"unknown key {k!r} for command {command}")
            try:
                cfg[k] = params[k].type(v) if isinstance(v, str) else v
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {k!r}: {v!r} ({exc})") from None
    if not cfg["name"]:
        cfg["name"] = command
    return cfg


def _versions() -> dict:
    import scipy

    from . import __version__

    return {
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "spherenls": __version__,
    }


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dump_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def run(command: str, cfg: dict) -> int:
    """Execute one experiment and write its artifacts; returns the exit status."""
    from .evolution import NumericalGuardError

    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    stem = out / cfg["name"]
    manifest = {"command": command, "config": cfg, "versions": _versions()}
    t0 = time.perf_counter()
    try:
        results, series = REGISTRY[command].run(cfg)
        status = EXIT_OK
    except NumericalGuardError as err:
        results, series = {"guard": {"t": err.t, "reason": err.reason}}, ""
        print(f"error: {err}", file=sys.stderr)
        status = EXIT_GUARD
    except ValueError as err:
        print(f"error: invalid configuration: {err}", file=sys.stderr)
        return EXIT_CONFIG
    manifest["wall_time_s"] = time.perf_counter() - t0
    manifest["exit_status"] = status
    manifest["outputs"] = [f"{cfg['name']}.results.json", f"{cfg['name']}.series.csv"]
    Path(f"{stem}.results.json").write_text(dump_json(results))
    Path(f"{stem}.series.csv").write_text(series)
    Path(f"{stem}.manifest.json").write_text(dump_json(manifest))
    return status


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="spherenls", description="Cubic NLS on the sphere: experiment runner")
    sub = ap.add_subparsers(dest="command", metavar="command")
    sub.add_parser("list", help="print the experiment registry")
    for c in REGISTRY.values():
        sp = sub.add_parser(c.name, help=c.anchor, description=c.anchor)
        sp.add_argument("--config", help="key = value file; flags override it")
        sp.add_argument("--from-manifest", help="re-run the config echoed in a manifest")
        for p in c.params + _COMMON:
            sp.add_argument(f"--{p.name.replace('_', '-')}", dest=p.name, default=None, help=p.help)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    if args.command is None:
        ap.print_usage(sys.stderr)
        return EXIT_CONFIG
    if args.command == "list":
        print(list_experiments())
        return EXIT_OK
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "from_manifest")}
    try:
        file_values = {}
        if args.from_manifest:
            m = json.loads(Path(args.from_manifest).read_text())
            if m.get("command") != args.command:
                raise ConfigError(f"manifest is for command {m.get('command')!r}")
            file_values.update(m["config"])
        if args.config:
            file_values.update(read_config_file(args.config))
        cfg = resolve_config(args.command, file_values, flags)
    except (ConfigError, OSError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    return run(args.command, cfg)


if __name__ == "__main__":
    sys.exit(main())
