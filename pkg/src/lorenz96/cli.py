"""Command-line interface: ``lorenz96 <subcommand> [options]``.

Every run writes its outputs plus ``manifest.json`` (parameters, version,
wall-clock time and SHA-256 digests of the outputs) into ``--out``.
Exit codes: 0 ok, 2 bad arguments, 3 divergence, 4 no cycle found.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import re
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .errors import DivergenceError, InvalidArgumentError, Lorenz96Error, NoCycleError, UndefinedWaveError
from .model import SystemConfig, equilibrium

EXIT_OK, EXIT_ARGS, EXIT_DIVERGENCE, EXIT_NO_CYCLE = 0, 2, 3, 4

DEFAULTS: dict[str, Any] = {
    "G": 0.0,
    "dt": 1.0 / 64.0,
    "t_end": 1000.0,
    "transient": 500.0,
    "seed": 0,
    "out": ".",
    "threads": 1,
    "init": "cold",
    "sample_every": 1,
    "interp": 1,
    "k": 3,
    "horizon": 5000.0,
    "renorm": 0.5,
    "tol_zero": 5e-3,
    "steps": 100,
    "grid": "50x50",
    "direction": "up",
    "warm_start": True,
    "step": 1e-2,
    "section_k": 1,
    "section_c": None,
    "section_direction": "up",
}


class UsageError(Exception):
    pass


def parse_range(text, kind=float) -> tuple:
    """``"a..b"`` -> ``(a, b)``; a single value ``"a"`` -> ``(a, a)``."""
    s = str(text)
    try:
        if ".." in s:
            a, b = s.split("..", 1)
            return kind(a), kind(b)
        v = kind(s)
        return v, v
    except ValueError:
        raise UsageError(f"cannot parse {text!r} as a {kind.__name__} or range a..b") from None


def _n_values(spec) -> list[int]:
    a, b = parse_range(spec, int)
    if b < a:
        raise UsageError(f"empty dimension range {spec!r}")
    return list(range(a, b + 1))


def _fmt(x) -> str:
    return "" if x is None else f"{x:.17g}"


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _dump_json(obj, path: Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _write_manifest(out: Path, command: str, params: dict, outputs: list[Path], started: float) -> None:
    manifest = {
        "command": command,
        "parameters": {k: v for k, v in sorted(params.items()) if k not in ("func", "config")},
        "version": __version__,
        "wall_clock_seconds": round(time.time() - started, 3),
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    _dump_json(manifest, out / "manifest.json")


def _initial_state(cfg: SystemConfig, init: str, seed: int) -> np.ndarray:
    """``cold`` (x_F + 1e-3 e_1), ``random`` (x_F + seeded noise) or ``wave:L``."""
    x = equilibrium(cfg)
    if init == "cold":
        x[0] += 1e-3
    elif init == "random":
        x += 0.1 * np.random.default_rng(seed).standard_normal(cfg.n)
    elif init.startswith("wave:"):
        try:
            l = int(init.split(":", 1)[1])
        except ValueError:
            raise UsageError(f"bad wave seed {init!r}") from None
        x += 0.1 * np.cos(2.0 * np.pi * l * np.arange(cfg.n) / cfg.n)
    else:
        raise UsageError(f"unknown --init {init!r} (cold, random or wave:L)")
    return x


def _single(args, name: str):
    a, b = parse_range(getattr(args, name))
    if a != b:
        raise UsageError(f"--{name} must be a single value for this command")
    return a


def _cfg(args) -> SystemConfig:
    ns = _n_values(args.n)
    if len(ns) != 1:
        raise UsageError("--n must be a single value for this command")
    return SystemConfig(ns[0], _single(args, "F"), _single(args, "G"))


def cmd_hopf_table(args) -> list[Path]:
    from .spectral import HopfHopfPoint, enumerate_bifurcations, first_bifurcation_index, omega0

    path = Path(args.out) / "hopf_table.csv"
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["l", "n", "F_H", "omega0", "ell1", "criticality", "first"])
        for n in _n_values(args.n):
            if n < 4:
                raise InvalidArgumentError(f"hopf-table needs n >= 4, got {n}")
            first = first_bifurcation_index(n)
            first = set(first) if isinstance(first, tuple) else {first}
            for rec in enumerate_bifurcations(n):
                if isinstance(rec, HopfHopfPoint):
                    w.writerow([f"{rec.l1};{rec.l2}", n, _fmt(rec.F_HH),
                                f"{_fmt(omega0(rec.l1, n))};{_fmt(omega0(rec.l2, n))}", "", "hopf-hopf",
                                int({rec.l1, rec.l2} == first)])
                else:
                    w.writerow([rec.l, n, _fmt(rec.F_H), _fmt(rec.omega0), _fmt(rec.ell1),
                                rec.criticality.value, int(first == {rec.l})])
    return [path]


def _integration_spec(args):
    from .integrator import IntegrationSpec

    return IntegrationSpec(t_end=float(args.t_end), dt=float(args.dt), transient=float(args.transient),
                           sample_every=int(args.sample_every))


def cmd_simulate(args) -> list[Path]:
    from .integrator import integrate, write_trajectory_csv
    from .waves import diagnose

    cfg = _cfg(args)
    traj = integrate(cfg, _initial_state(cfg, args.init, int(args.seed)), _integration_spec(args))
    out = Path(args.out)
    tpath, dpath = out / "trajectory.csv", out / "diagnostics.json"
    write_trajectory_csv(traj, tpath)
    _dump_json(diagnose(traj).to_json(), dpath)
    return [tpath, dpath]


def cmd_hovmoller(args) -> list[Path]:
    from .integrator import integrate
    from .waves import diagnose, hovmoller, write_hovmoller_csv

    cfg = _cfg(args)
    traj = integrate(cfg, _initial_state(cfg, args.init, int(args.seed)), _integration_spec(args))
    out = Path(args.out)
    hpath, dpath = out / "hovmoller.csv", out / "diagnostics.json"
    write_hovmoller_csv(hovmoller(traj, int(args.interp)), hpath)
    _dump_json(diagnose(traj).to_json(), dpath)
    return [hpath, dpath]


def _lyap_opts(args, **over):
    from .attractor import LyapunovOptions

    kw = dict(horizon=float(args.horizon), renorm_interval=float(args.renorm), transient=float(args.transient),
              dt=float(args.dt), tol_zero=float(args.tol_zero))
    kw.update(over)
    return LyapunovOptions(**kw)


def cmd_lyapunov(args) -> list[Path]:
    from .attractor import classify, lyapunov_spectrum

    cfg = _cfg(args)
    k = min(int(args.k), cfg.n)
    spec = lyapunov_spectrum(cfg, _initial_state(cfg, args.init, int(args.seed)), k, _lyap_opts(args))
    cls = classify(spec, float(args.tol_zero))
    path = Path(args.out) / "lyapunov.json"
    _dump_json({
        "n": cfg.n, "F": cfg.F, "G": cfg.G,
        "exponents": [float(v) for v in spec.exponents],
        "horizon": spec.horizon, "renorm_interval": spec.renorm_interval,
        "converged": spec.converged, "spread": spec.spread, "class": cls.code,
    }, path)
    return [path]


def cmd_scan(args) -> list[Path]:
    from .attractor import scan_F, scan_FG, write_scan_csv

    out = Path(args.out)
    F_range = parse_range(args.F)
    k = int(args.k)
    opts = _lyap_opts(args)
    G_range = parse_range(args.G)
    outputs: list[Path] = []
    onset: dict[str, Any] = {}
    if G_range[0] != G_range[1]:
        ns = _n_values(args.n)
        if len(ns) != 1:
            raise UsageError("two-parameter scans take a single --n")
        try:
            nF, nG = (int(v) for v in str(args.grid).lower().split("x"))
        except ValueError:
            raise UsageError(f"bad --grid {args.grid!r}, expected e.g. 50x50") from None
        dirs = ["up", "down"] if args.direction == "both" else [args.direction]
        for d in dirs:
            res = scan_FG(SystemConfig(ns[0], F_range[0], G_range[0]), F_range, G_range, (nF, nG), d, k,
                          opts, threads=int(args.threads))
            p = out / f"scan_{d}.csv"
            write_scan_csv(res, p)
            outputs.append(p)
            onset[f"n={ns[0]},{d}"] = res.onset_of_chaos()
    else:
        from concurrent.futures import ThreadPoolExecutor

        ns = _n_values(args.n)

        def one(n):
            return n, scan_F(SystemConfig(n, F_range[0], G_range[0]), F_range, int(args.steps),
                             bool(args.warm_start), k, opts)

        with ThreadPoolExecutor(max_workers=max(1, int(args.threads))) as ex:
            results = list(ex.map(one, ns))
        for n, res in results:
            p = out / (f"scan_n{n}.csv" if len(ns) > 1 else "scan.csv")
            write_scan_csv(res, p)
            outputs.append(p)
            onset[f"n={n}"] = res.onset_of_chaos()
    opath = out / "onset.json"
    _dump_json({"onset_of_chaos": onset}, opath)
    return outputs + [opath]


def cmd_periodic_orbit(args) -> list[Path]:
    from .poincare import Section, continue_cycle, events_to_json, write_branch_csv

    ns = _n_values(args.n)
    if len(ns) != 1:
        raise UsageError("--n must be a single value for this command")
    F_range = parse_range(args.F)
    cfg = SystemConfig(ns[0], F_range[0], _single(args, "G"))
    section = None
    if args.section_c is not None:
        k = int(args.section_k)
        if not 1 <= k <= cfg.n:
            raise InvalidArgumentError(f"--section-k must lie in [1, {cfg.n}]")
        section = Section(k - 1, float(args.section_c), args.section_direction)
    res = continue_cycle(cfg, F_range, float(args.step), section=section,
                         guess=_initial_state(cfg, args.init, int(args.seed)), dt=float(args.dt),
                         transient=float(args.transient))
    out = Path(args.out)
    bpath, epath = out / "branch.csv", out / "events.json"
    write_branch_csv(res, bpath)
    _dump_json(events_to_json(res.events), epath)
    return [bpath, epath]


def _add_common(p: argparse.ArgumentParser, *, need_F=True) -> None:
    p.add_argument("--n", required=False, help="dimension, or range a..b where allowed")
    if need_F:
        p.add_argument("--F", help="forcing, or range a..b for scans and continuation")
    p.add_argument("--G", help="diffusion, or range a..b for two-parameter scans")
    p.add_argument("--dt", type=float)
    p.add_argument("--t-end", dest="t_end", type=float)
    p.add_argument("--transient", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--threads", type=int)
    p.add_argument("--config", help="JSON file with option defaults (flags win)")
    p.add_argument("--init", help="initial state: cold, random or wave:L")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lorenz96", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("hopf-table", help="analytic Hopf and Hopf-Hopf points of x_F")
    _add_common(p, need_F=False)
    p.set_defaults(func=cmd_hopf_table)

    p = sub.add_parser("simulate", help="integrate and write trajectory plus wave diagnostics")
    _add_common(p)
    p.add_argument("--sample-every", dest="sample_every", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("hovmoller", help="integrate and write a long-format space-time table")
    _add_common(p)
    p.add_argument("--sample-every", dest="sample_every", type=int)
    p.add_argument("--interp", type=int, help="points per sector gap for continuous-j rendering")
    p.set_defaults(func=cmd_hovmoller)

    for name, func, help_ in (("lyapunov", cmd_lyapunov, "Lyapunov spectrum and attractor class"),
                              ("scan", cmd_scan, "classify attractors along F or on an (F, G) grid")):
        p = sub.add_parser(name, help=help_)
        _add_common(p)
        p.add_argument("--k", type=int, help="number of exponents")
        p.add_argument("--horizon", type=float)
        p.add_argument("--renorm", type=float, help="re-orthonormalisation interval")
        p.add_argument("--tol-zero", dest="tol_zero", type=float)
        if name == "scan":
            p.add_argument("--steps", type=int)
            p.add_argument("--grid", help="F x G points, e.g. 50x50")
            p.add_argument("--direction", choices=["up", "down", "both"])
            p.add_argument("--cold", dest="warm_start", action="store_false", default=None,
                           help="start every F point from x_F instead of the previous attractor")
        p.set_defaults(func=func)

    p = sub.add_parser("periodic-orbit", help="continue a cycle in F and report fold/PD/NS events")
    _add_common(p)
    p.add_argument("--step", type=float)
    p.add_argument("--section-k", dest="section_k", type=int, help="1-based section coordinate")
    p.add_argument("--section-c", dest="section_c", type=float)
    p.add_argument("--section-direction", dest="section_direction", choices=["up", "down", "both"])
    p.set_defaults(func=cmd_periodic_orbit)
    return parser


def resolve(args: argparse.Namespace) -> argparse.Namespace:
    """Fill unset options from ``--config`` and then from :data:`DEFAULTS`."""
    cfg_vals: dict[str, Any] = {}
    if getattr(args, "config", None):
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg_vals = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(cfg_vals, dict):
            raise UsageError("config file must hold a JSON object")
        cfg_vals = {k.replace("-", "_"): v for k, v in cfg_vals.items()}
    for key in set(DEFAULTS) | set(cfg_vals) | {"n", "F"}:
        if getattr(args, key, None) is None:
            if key in cfg_vals:
                setattr(args, key, cfg_vals[key])
            elif key in DEFAULTS:
                setattr(args, key, DEFAULTS[key])
    if args.n is None:
        raise UsageError("--n is required")
    if args.func is not cmd_hopf_table and getattr(args, "F", None) is None:
        raise UsageError("--F is required")
    return args


_NEGATIVE = re.compile(r"^-[0-9.]")


def _attach_negative_values(argv: list[str]) -> list[str]:
    """``--G -0.25..0.25`` -> ``--G=-0.25..0.25`` (argparse would read the range as a flag)."""
    out: list[str] = []
    it = iter(range(len(argv)))
    for i in it:
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and _NEGATIVE.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            next(it, None)
        else:
            out.append(tok)
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    argv = _attach_negative_values(list(sys.argv[1:] if argv is None else argv))
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    started = time.time()
    try:
        args = resolve(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        outputs = args.func(args)
        _write_manifest(out, args.command, vars(args), outputs, started)
    except (UsageError, InvalidArgumentError, UndefinedWaveError) as exc:
        print(f"lorenz96: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    except DivergenceError as exc:
        print(f"lorenz96: divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE
    except NoCycleError as exc:
        print(f"lorenz96: no cycle: {exc}", file=sys.stderr)
        return EXIT_NO_CYCLE
    except Lorenz96Error as exc:
        print(f"lorenz96: error: {exc}", file=sys.stderr)
        return EXIT_ARGS
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
