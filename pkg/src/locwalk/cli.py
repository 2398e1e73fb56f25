"""Command-line front end: ``locwalk <command> [options]``.

Every run resolves its parameters from (built-in defaults < ``--config`` file <
explicit flags), writes its data atomically, and writes a JSON header holding
the resolved configuration, master seed, version and wall time. Feeding that
header back through ``--config`` reproduces the data file byte for byte.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
import time
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import __version__
from ._parallel import default_workers
from .coins import DisorderRealization, distribution_from_json
from .errors import ConfigError, LocwalkError

SCHEMA_VERSION = 1
COMMANDS = ("simulate", "localize", "spectrum", "dos", "lyapunov", "thouless", "resolvent", "specpoly", "check")


# ---------------------------------------------------------------------------
# parameter schema


def _int_list(v: Any) -> list[int]:
    if isinstance(v, str):
        v = [s for s in v.split(",") if s.strip()]
    return [int(x) for x in v]


def _float_list(v: Any) -> list[float]:
    if isinstance(v, str):
        v = [s for s in v.split(",") if s.strip()]
    return [float(x) for x in v]


def _nonneg(v):
    if v < 0:
        raise ValueError("must be non-negative")
    return v


def _positive(v):
    if v <= 0:
        raise ValueError("must be positive")
    return v


# name -> (parser, default, validator); the distribution and seed are shared
_COMMON = {
    "seed": (int, None, None),
    "out": (str, None, None),
}
_SCHEMAS: dict[str, dict[str, tuple]] = {
    "simulate": {"steps": (int, 100, _nonneg), "x0": (int, 0, None), "spin": (int, 1, None)},
    "localize": {
        "distances": (_int_list, [4, 8, 12, 16], None),
        "horizon": (int, 200, _nonneg),
        "realizations": (int, 100, _positive),
    },
    "spectrum": {"n": (int, 10, _nonneg), "eta_l": (float, 0.0, None), "eta_r": (float, 0.0, None)},
    "dos": {
        "n": (int, 100, None),
        "realizations": (int, 10, _positive),
        "bins": (int, 512, _positive),
        "eta_l": (float, 0.0, None),
        "eta_r": (float, 0.0, None),
    },
    "lyapunov": {
        "phases": (_float_list, None, None),
        "grid": (int, 16, _positive),
        "z_abs": (float, 1.0, _positive),
        "chain_length": (int, 10000, _positive),
        "realizations": (int, 32, _positive),
    },
    "thouless": {
        "n": (int, 200, None),
        "realizations": (int, 50, _positive),
        "bins": (int, 512, _positive),
        "z_abs": (float, 1.05, _positive),
        "grid": (int, 8, _positive),
        "chain_length": (int, 10000, _positive),
        "chain_realizations": (int, 32, _positive),
    },
    "resolvent": {
        "n": (int, 4, _nonneg),
        "z_abs": (float, 1.3, _positive),
        "phase": (float, 0.0, None),
        "eta_l": (float, 0.0, None),
        "eta_r": (float, 0.0, None),
    },
    "specpoly": {
        "n": (int, 4, _nonneg),
        "samples": (int, 256, _positive),
        "eta_l": (float, 0.0, None),
        "eta_r": (float, 0.0, None),
    },
    "check": {"z": (float, 0.0, None), "zeta": (float, 0.5, _positive), "trials": (int, 10, _positive)},
}
_NEEDS_DIST = set(COMMANDS)


def _load_json(path: str, what: str) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"{what} {path}: {exc.strerror}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{what} {path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc


def _config_from_file(path: str, command: str) -> dict:
    obj = _load_json(path, "config")
    if isinstance(obj, dict) and "config" in obj and isinstance(obj["config"], dict):
        obj = obj["config"]  # a metadata header from an earlier run
    if not isinstance(obj, dict):
        raise ConfigError(f"config {path}: expected a JSON object")
    if "command" in obj and obj["command"] != command:
        raise ConfigError(f"config {path}: field 'command' is {obj['command']!r}, but running {command!r}")
    return {k: v for k, v in obj.items() if k not in ("command", "schema")}


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Merge defaults, the optional config file and explicit flags, then validate."""
    schema = {**_COMMON, **_SCHEMAS[command]}
    cfg: dict[str, Any] = {k: d for k, (_, d, _) in schema.items()}
    cfg["dist"] = None
    if args.config:
        from_file = _config_from_file(args.config, command)
        unknown = set(from_file) - set(schema) - {"dist"}
        if unknown:
            raise ConfigError(f"config {args.config}: unknown field(s) {sorted(unknown)}")
        cfg.update(from_file)
    for k in schema:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    if args.dist:
        cfg["dist"] = _load_json(args.dist, "distribution")

    for k, (conv, _, check) in schema.items():
        if cfg[k] is None:
            continue
        try:
            cfg[k] = conv(cfg[k])
            if check is not None:
                check(cfg[k])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field '{k}': {exc}") from exc
    if command in _NEEDS_DIST:
        if cfg["dist"] is None:
            raise ConfigError("field 'dist': a coin distribution is required (--dist FILE)")
        distribution_from_json(cfg["dist"])  # validate early
    if command in ("dos", "thouless") and cfg["n"] < 4:
        raise ConfigError("field 'n': must be at least 4")
    if command == "localize" and cfg["distances"] and cfg["horizon"] < max(abs(d) for d in cfg["distances"]):
        raise ConfigError("field 'horizon': must be at least the largest distance")
    if command == "simulate" and cfg["spin"] not in (0, 1):
        raise ConfigError("field 'spin': must be 0 (minus) or 1 (plus)")
    if cfg["seed"] is None:
        cfg["seed"] = int(np.random.SeedSequence().entropy % (1 << 63))
    if cfg["out"] is None:
        cfg["out"] = f"locwalk_{command}.json" if command in ("check", "spectrum") else f"locwalk_{command}.csv"
    return cfg


# ---------------------------------------------------------------------------
# output


def _fmt(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.16e}"


def csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    return "\n".join(lines) + "\n"


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json_text(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def meta_path(out: str) -> Path:
    p = Path(out)
    return p.with_name(p.stem + ".meta.json")


# ---------------------------------------------------------------------------
# commands; each returns (data text, one-line summary)


def _realization(cfg) -> DisorderRealization:
    return DisorderRealization(distribution_from_json(cfg["dist"]), cfg["seed"])


def _cmd_simulate(cfg, workers):
    from .walk import evolve, localized_state, variance

    r = _realization(cfg)
    state = evolve(localized_state(cfg["x0"], cfg["spin"]), r, cfg["steps"])
    amp = state.amplitudes
    rows = [
        (int(x), a[0].real, a[0].imag, a[1].real, a[1].imag, float(np.sum(np.abs(a) ** 2)))
        for x, a in zip(state.sites, amp)
    ]
    text = csv_text(["site", "re_minus", "im_minus", "re_plus", "im_plus", "probability"], rows)
    return text, f"t={state.time} variance={variance(state):.6g} norm={state.norm():.15f}"


def _cmd_localize(cfg, workers):
    from .walk import localization_profile

    mu = distribution_from_json(cfg["dist"])
    prof = localization_profile(mu, cfg["distances"], cfg["horizon"], cfg["realizations"], cfg["seed"], workers=workers)
    text = csv_text(["distance", "mean_sup_amplitude", "stderr", "realizations", "horizon"], prof.rows())
    return text, f"{len(prof.distances)} distances, {prof.realization_count} realizations"


def _cmd_spectrum(cfg, workers):
    from .restriction import build_finite_walk, eigenfunction_decay, participation_ratios

    fw = build_finite_walk(_realization(cfg), cfg["n"], cfg["eta_l"], cfg["eta_r"])
    decay = eigenfunction_decay(fw)
    dists = np.arange(0, decay.sites.size)
    med = [float(np.nanmedian(decay.relative_at_distance(int(d)))) for d in dists]
    rows = [(int(d), m) for d, m in zip(dists, med) if np.isfinite(m)]
    atomic_write(Path(cfg["out"]).with_suffix(".decay.csv"), csv_text(["distance", "median_relative_envelope"], rows))
    data = {"eigenphases": fw.eig.phases.tolist(), "participation_ratios": participation_ratios(fw).tolist()}
    return _json_text(data), f"dim={fw.dim} eigenvalues"


def _cmd_dos(cfg, workers):
    from .lyapunov import density_of_states, integrated_dos

    mu = distribution_from_json(cfg["dist"])
    hist = density_of_states(mu, cfg["n"], cfg["realizations"], cfg["bins"], cfg["seed"], eta_l=cfg["eta_l"], eta_r=cfg["eta_r"], workers=workers)
    ids = integrated_dos(hist)
    rows = zip(hist.bin_edges[:-1], hist.bin_edges[1:], hist.masses, ids.values[1:])
    return csv_text(["phase_lo", "phase_hi", "mass", "ids"], rows), f"{cfg['bins']} bins from {hist.realizations} realizations"


def _grid(cfg) -> list[float]:
    if cfg.get("phases"):
        return list(cfg["phases"])
    k = cfg["grid"]
    return [2 * np.pi * j / k for j in range(k)]


def _cmd_lyapunov(cfg, workers):
    from .lyapunov import estimate_lyapunov_grid

    mu = distribution_from_json(cfg["dist"])
    phases = _grid(cfg)
    zs = [cfg["z_abs"] * np.exp(1j * p) for p in phases]
    ests = estimate_lyapunov_grid(mu, zs, cfg["chain_length"], cfg["realizations"], cfg["seed"])
    rows = [(p, e.gamma_hat, e.stderr) for p, e in zip(phases, ests)]
    return csv_text(["phase", "gamma", "stderr"], rows), f"{len(rows)} phases at |z|={cfg['z_abs']}"


def _cmd_thouless(cfg, workers):
    from .lyapunov import density_of_states, estimate_lyapunov_grid, thouless_rhs

    mu = distribution_from_json(cfg["dist"])
    hist = density_of_states(mu, cfg["n"], cfg["realizations"], cfg["bins"], cfg["seed"], workers=workers)
    phases = _grid(cfg)
    zs = [cfg["z_abs"] * np.exp(1j * p) for p in phases]
    ests = estimate_lyapunov_grid(mu, zs, cfg["chain_length"], cfg["chain_realizations"], cfg["seed"])
    rows = []
    for p, z, e in zip(phases, zs, ests):
        rhs = thouless_rhs(hist, mu, z)
        rows.append((p, e.gamma_hat, rhs, abs(e.gamma_hat - rhs)))
    worst = max(r[3] for r in rows)
    return csv_text(["phase", "gamma_direct", "thouless_rhs", "abs_diff"], rows), f"max |gamma - rhs| = {worst:.3e}"


def _cmd_resolvent(cfg, workers):
    from .restriction import build_finite_walk
    from .transfer import resolvent_entry_via_transfer

    fw = build_finite_walk(_realization(cfg), cfg["n"], cfg["eta_l"], cfg["eta_r"])
    z = cfg["z_abs"] * np.exp(1j * cfg["phase"])
    direct = np.abs(np.linalg.inv(fw.matrix - z * np.eye(fw.dim)))
    lo, hi = fw.f_range
    rows = []
    for m in range(-2 * fw.n, 2 * fw.n + 2):
        for n in range(lo, hi + 1):
            v = resolvent_entry_via_transfer(fw, z, n, m, check_spectrum=(not rows))
            d = direct[n - lo, m - lo]
            rows.append((n, m, v, d, abs(v - d) / d if d > 0 else 0.0))
    worst = max(r[4] for r in rows)
    return csv_text(["n", "m", "abs_via_transfer", "abs_direct", "rel_err"], rows), f"{len(rows)} entries, max rel err {worst:.2e}"


def _cmd_specpoly(cfg, workers):
    from .restriction import build_finite_walk
    from .transfer import spectral_polynomial_eval

    fw = build_finite_walk(_realization(cfg), cfg["n"], cfg["eta_l"], cfg["eta_r"])
    k = cfg["samples"]
    phases = 2 * np.pi * np.arange(k) / k
    rows = [(p, abs(spectral_polynomial_eval(fw, np.exp(1j * p)))) for p in phases]
    return csv_text(["phase", "abs_p"], rows), f"{k} samples of |p_N| on the unit circle"


def _cmd_check(cfg, workers):
    from .groupcheck import check_hypotheses

    mu = distribution_from_json(cfg["dist"])
    rep = check_hypotheses(mu, np.exp(1j * cfg["z"]), zeta=cfg["zeta"], trials=cfg["trials"], seed=cfg["seed"])
    v = rep.verdicts()
    return _json_text(rep.to_dict()), ", ".join(f"{k}={val}" for k, val in v.items())


_HANDLERS: dict[str, Callable] = {
    "simulate": _cmd_simulate,
    "localize": _cmd_localize,
    "spectrum": _cmd_spectrum,
    "dos": _cmd_dos,
    "lyapunov": _cmd_lyapunov,
    "thouless": _cmd_thouless,
    "resolvent": _cmd_resolvent,
    "specpoly": _cmd_specpoly,
    "check": _cmd_check,
}


# ---------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="locwalk", description="Disordered quantum walk experiments.")
    p.add_argument("--version", action="version", version=f"locwalk {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--dist", help="JSON file describing the coin distribution")
        sp.add_argument("--config", help="JSON config, or the metadata header of an earlier run")
        sp.add_argument("--seed", type=int, help="master seed (random if omitted; always recorded)")
        sp.add_argument("--out", help="data output path")
        sp.add_argument("--workers", type=int, help="worker threads (LOCWALK_THREADS takes precedence)")
        for key, (conv, _, _) in _SCHEMAS[name].items():
            flag = "--" + key.replace("_", "-")
            typ = str if conv in (_int_list, _float_list) else conv
            sp.add_argument(flag, dest=key, type=typ)
    return p


def _workers(args) -> int:
    if os.environ.get("LOCWALK_THREADS"):
        return default_workers()
    return args.workers if args.workers else default_workers()


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    command = args.command
    try:
        cfg = resolve_config(command, args)
    except ConfigError as exc:
        print(f"locwalk {command}: config error: {exc}", file=sys.stderr)
        return 2
    workers = _workers(args)
    t0 = time.perf_counter()
    try:
        text, summary = _HANDLERS[command](cfg, workers)
    except LocwalkError as exc:
        print(f"locwalk {command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    atomic_write(cfg["out"], text)
    header = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "config": {"command": command, **cfg},
        "seed": cfg["seed"],
        "version": __version__,
        "wall_time_seconds": time.perf_counter() - t0,
    }
    atomic_write(meta_path(cfg["out"]), _json_text(header))
    print(f"locwalk {command}: seed={cfg['seed']} -> {cfg['out']}: {summary}")
    return 0


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
