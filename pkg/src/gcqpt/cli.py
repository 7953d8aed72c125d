"""Command-line front end.

Subcommands: spectrum, ensemble, sweep, fit, groundstate, meanfield.
Every subcommand writes one table (CSV or JSON) to ``--output`` or stdout.

Exit status: 0 success, 2 usage error, 3 divergent regime or unconverged
sum, 4 I/O error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

from . import groundstate, meanfield, scaling, spectrum
from .cache import CACHE_ENV, SpectrumCache
from .ensemble import DEFAULT_MCAP, DEFAULT_TOL, DivergentRegime, ModelParams, NotConverged, observables

log = logging.getLogger("gcqpt")

EXIT_OK, EXIT_USAGE, EXIT_DIVERGENT, EXIT_IO = 0, 2, 3, 4

RESULT_COLUMNS = [
    "lambda", "lambda_d", "beta", "mu", "log_xi", "xi", "mean_m", "energy",
    "mean_f", "sigma_m", "m_max_used", "converged",
]
FIT_COLUMNS = [
    "lambda_d", "beta", "mu", "observable", "exponent", "amplitude", "r_squared",
    "window_min", "window_max", "n_points", "divergence_coefficient",
]
COMMANDS = ("spectrum", "ensemble", "sweep", "fit", "groundstate", "meanfield")


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    params: Dict[str, object]
    tol: float = DEFAULT_TOL
    m_cap: int = DEFAULT_MCAP
    output: str = "-"
    fmt: str = "csv"
    cache_dir: Optional[str] = None
    threads: int = 1
    extra: Dict[str, object] = field(default_factory=dict)


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="flat 'key = value' file; flags override it")
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=DEFAULT_TOL)
    p.add_argument("--m-cap", type=int, default=DEFAULT_MCAP)
    p.add_argument("--output", "-o", default="-")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--cache-dir", default=os.environ.get(CACHE_ENV))
    p.add_argument("--threads", type=int, default=1, help="worker threads, 0 = one per CPU")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gcqpt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("spectrum", help="eigenvalues (and swap parities) of one sector")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--parities", action="store_true", help="also label swap parity")
    _common(p)

    p = sub.add_parser("ensemble", help="grand-canonical observables at one point")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    g = p.add_mutually_exclusive_group()
    g.add_argument("--mu", type=float)
    g.add_argument("--lambda-d", type=float)
    p.add_argument("--with-f", action="store_true", help="also compute <F> (needs eigenvectors)")
    _common(p)

    for name, helptext in (("sweep", "observables on a geometric grid toward lambda_D"),
                           ("fit", "power-law fit over a sweep")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--lambda-d", type=float, required=True)
        p.add_argument("--dmin", type=float, default=1e-2)
        p.add_argument("--dmax", type=float, default=1e-1)
        p.add_argument("--points", type=int, default=8)
        p.add_argument("--with-f", action="store_true")
        if name == "fit":
            p.add_argument("--observable", default="xi",
                           help="xi, xi_minus_one, mean_m, sigma_m, ... (default xi)")
        _common(p)

    p = sub.add_parser("groundstate", help="variational coherent-state ground state")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    _common(p)

    p = sub.add_parser("meanfield", help="closed-form divergence point and asymptotics")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--mu", type=float)
    g.add_argument("--lambda-d", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--quadrature", action="store_true", help="also integrate Xi_1, Xi_2")
    _common(p)
    return parser


def _read_config(path: str) -> Dict[str, str]:
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise UsageError(f"--config: cannot read {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"--config {path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.lstrip("-")] = value
    return values


def _flag_dest(action: argparse.Action) -> Optional[str]:
    for opt in action.option_strings:
        if opt.startswith("--"):
            return opt[2:]
    return None


def _apply_config(subparser: argparse.ArgumentParser, values: Dict[str, str]) -> List[str]:
    """Turn config entries into argv tokens placed before the real flags."""
    known = {_flag_dest(a): a for a in subparser._actions if _flag_dest(a)}
    tokens: List[str] = []
    for key, value in values.items():
        if key == "config":
            continue
        action = known.get(key)
        if action is None:
            raise UsageError(f"--config: unknown key '{key}'")
        if action.nargs == 0:
            if value.lower() in ("1", "true", "yes", "on"):
                tokens.append(f"--{key}")
            elif value.lower() not in ("0", "false", "no", "off"):
                raise UsageError(f"--config: '{key}' expects true/false, got '{value}'")
        else:
            tokens.append(f"--{key}={value}")
    return tokens


def _validate(parser: argparse.ArgumentParser, ns: argparse.Namespace):
    for action in parser._actions:
        val = getattr(ns, action.dest, None)
        if isinstance(val, float) and not math.isfinite(val):
            raise UsageError(f"{action.option_strings[0]}: value must be finite, got {val}")
    if not 0 < ns.tol <= 1e-2:
        raise UsageError(f"--tol: must lie in (0, 1e-2], got {ns.tol}")
    if ns.beta <= 0:
        raise UsageError(f"--beta: must be positive, got {ns.beta}")
    if ns.m_cap < 1:
        raise UsageError(f"--m-cap: must be >= 1, got {ns.m_cap}")
    if ns.threads < 0:
        raise UsageError(f"--threads: must be >= 0, got {ns.threads}")
    if getattr(ns, "m", None) is not None and ns.m < 0:
        raise UsageError(f"--m: must be >= 0, got {ns.m}")
    if ns.command in ("sweep", "fit"):
        if ns.lambda_d <= 0:
            raise UsageError(f"--lambda-d: must be positive, got {ns.lambda_d}")
        if not 0 < ns.dmin <= ns.dmax:
            raise UsageError(f"--dmin/--dmax: need 0 < dmin <= dmax, got {ns.dmin}, {ns.dmax}")
        if ns.points < 0:
            raise UsageError(f"--points: must be >= 0, got {ns.points}")
    if ns.command == "ensemble" and ns.mu is None and ns.lambda_d is None:
        raise UsageError("ensemble: one of --mu or --lambda-d is required")


def parse_config(argv: Optional[Sequence[str]] = None) -> RunConfig:
    """Parse flags (and an optional config file) into a RunConfig.

    Raises SystemExit(2) with a message naming the offending flag on bad input.
    """
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    try:
        if known.config and argv and argv[0] in COMMANDS:
            sub = parser._subparsers._group_actions[0].choices[argv[0]]
            argv = argv[:1] + _apply_config(sub, _read_config(known.config)) + argv[1:]
    except UsageError as exc:
        parser.error(str(exc))
    ns = parser.parse_args(argv)
    try:
        _validate(parser._subparsers._group_actions[0].choices[ns.command], ns)
    except UsageError as exc:
        parser.error(str(exc))

    params = {k: v for k, v in vars(ns).items()
              if k not in ("command", "config", "tol", "m_cap", "output", "format", "cache_dir", "threads", "verbose")}
    threads = ns.threads or (os.cpu_count() or 1)
    return RunConfig(
        command=ns.command,
        params=params,
        tol=ns.tol,
        m_cap=ns.m_cap,
        output=ns.output,
        fmt=ns.format,
        cache_dir=ns.cache_dir,
        threads=threads,
        extra={"verbose": ns.verbose},
    )


def _fmt_number(v) -> Optional[str]:
    if v is None:
        return None
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            return None
        return format(v, ".17g")
    return str(v)


def render_table(rows: List[Dict[str, object]], fmt: str, columns: Optional[List[str]] = None) -> str:
    if not rows:
        raise ValueError("nothing to emit")
    columns = columns or list(rows[0])
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow(["" if (s := _fmt_number(r.get(c))) is None else s for c in columns])
        return buf.getvalue()
    if fmt == "json":
        objs = []
        for r in rows:
            items = []
            for c in columns:
                v = r.get(c)
                if isinstance(v, str):
                    text = json.dumps(v)
                else:
                    s = _fmt_number(v)
                    text = "null" if s is None else s
                items.append(f"{json.dumps(c)}: {text}")
            objs.append("  {" + ", ".join(items) + "}")
        return "[\n" + ",\n".join(objs) + "\n]\n"
    raise ValueError(f"unknown format {fmt!r}")


def emit_table(rows: List[Dict[str, object]], fmt: str, path: str = "-", columns: Optional[List[str]] = None) -> None:
    """Write rows as CSV or JSON, 17 significant digits per float.

    Write failures surface as OSError with the path in the message.
    """
    text = render_table(rows, fmt, columns)
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def result_row(res, lambda_d=None) -> Dict[str, object]:
    p = res.params
    if lambda_d is None:
        lambda_d = p.lambda_d
    return {
        "lambda": p.lam,
        "lambda_d": lambda_d,
        "beta": p.beta,
        "mu": p.mu,
        "log_xi": res.log_xi,
        "xi": res.xi,
        "mean_m": res.mean_m,
        "energy": res.energy,
        "mean_f": res.mean_f,
        "sigma_m": res.sigma_m,
        "m_max_used": res.m_max_used,
        "converged": res.converged,
    }


def _cache(cfg: RunConfig) -> SpectrumCache:
    return SpectrumCache(cfg.cache_dir) if cfg.cache_dir else SpectrumCache()


def _run_spectrum(cfg):
    P = cfg.params
    H = spectrum.build_hamiltonian(P["m"], P["lam"])
    if P["parities"]:
        S = spectrum.eigensystem(H)
        par = spectrum.parity_labels(S)
    else:
        S = _cache(cfg).get(P["m"], P["lam"])
        par = [None] * len(S.eigenvalues)
    rows = [{"m": P["m"], "lambda": P["lam"], "index": k, "energy": float(e), "parity": None if q is None else int(q)}
            for k, (e, q) in enumerate(zip(S.eigenvalues, par))]
    return rows, None, EXIT_OK


def _run_ensemble(cfg):
    P = cfg.params
    if P["lambda_d"] is not None:
        params = ModelParams.at_lambda_d(P["lam"], P["lambda_d"], P["beta"])
    else:
        params = ModelParams(P["lam"], P["beta"], P["mu"])
    res = observables(params, tol=cfg.tol, m_cap=cfg.m_cap, with_f=P["with_f"],
                      cache=_cache(cfg), workers=cfg.threads)
    return [result_row(res)], RESULT_COLUMNS, EXIT_OK


def _sweep(cfg):
    P = cfg.params
    return scaling.sweep(P["lambda_d"], P["beta"], P["dmin"], P["dmax"], P["points"], tol=cfg.tol,
                         m_cap=cfg.m_cap, with_f=P["with_f"], cache=_cache(cfg), workers=cfg.threads)


def _run_sweep(cfg):
    series = _sweep(cfg)
    rows = [result_row(pt.result, series.lambda_d) for pt in series.points]
    status = EXIT_OK if all(pt.converged for pt in series.points) else EXIT_DIVERGENT
    if not rows:
        rows = []
    return rows, RESULT_COLUMNS, status


def _run_fit(cfg):
    series = _sweep(cfg)
    fit = scaling.fit_series(series, cfg.params["observable"])
    try:
        coeff = scaling.divergence_coefficient(series)
    except scaling.InsufficientPoints:
        coeff = None
    row = {
        "lambda_d": series.lambda_d, "beta": series.beta, "mu": series.mu,
        "observable": cfg.params["observable"], "exponent": fit.exponent, "amplitude": fit.amplitude,
        "r_squared": fit.r_squared, "window_min": fit.window[0], "window_max": fit.window[1],
        "n_points": fit.n_points, "divergence_coefficient": coeff,
    }
    status = EXIT_OK if all(pt.converged for pt in series.points) else EXIT_DIVERGENT
    return [row], FIT_COLUMNS, status


def _run_groundstate(cfg):
    P = cfg.params
    r = groundstate.minimize_theta(P["m"], P["lam"])
    thetas = list(r.theta_stars) + [None] * (2 - len(r.theta_stars))
    row = {
        "m": P["m"], "lambda": P["lam"], "theta_1": thetas[0], "theta_2": thetas[1],
        "energy": r.energy, "energy_density": r.energy_density,
        "energy_density_limit": groundstate.gs_energy_density(P["lam"]),
    }
    return [row], None, EXIT_OK


def _run_meanfield(cfg):
    P = cfg.params
    if P["lambda_d"] is not None:
        dp = meanfield.mu_of_lambda_D(P["lambda_d"])
    else:
        try:
            dp = meanfield.lambda_D_of_mu(P["mu"])
        except meanfield.NoDivergencePoint as exc:
            raise DivergentRegime(str(exc)) from exc
    beta = P["beta"]
    row = {
        "mu": dp.mu, "lambda_d": dp.lambda_d, "branch": dp.branch.value,
        "coefficient": meanfield.divergence_coefficient(dp.lambda_d),
    }
    lam = P["lam"]
    if lam is not None:
        if lam >= dp.lambda_d:
            raise DivergentRegime(f"lambda={lam} >= lambda_D={dp.lambda_d}")
        a = meanfield.asymptotics(lam, dp.lambda_d, beta)
        row.update({"lambda": lam, "beta": beta, "mean_m": a.mean_m, "mean_f": a.mean_f,
                    "energy": a.energy, "sigma_m": a.sigma_m})
        try:
            row["xi_coefficient"] = meanfield.xi_coefficient(lam, dp.lambda_d, beta)
            row["xi_divergent"] = meanfield.xi_divergent_form(lam, dp.lambda_d, beta)
        except ValueError:
            row["xi_coefficient"] = row["xi_divergent"] = None
        if P["quadrature"]:
            try:
                x1, x2 = meanfield.xi12_quadrature(lam, beta, dp.mu)
            except meanfield.SingularIntegrand as exc:
                raise DivergentRegime(str(exc)) from exc
            row.update({"xi_1": x1, "xi_2": x2})
    return [row], None, EXIT_OK


RUNNERS = {
    "spectrum": _run_spectrum,
    "ensemble": _run_ensemble,
    "sweep": _run_sweep,
    "fit": _run_fit,
    "groundstate": _run_groundstate,
    "meanfield": _run_meanfield,
}


def run(cfg: RunConfig) -> int:
    try:
        rows, columns, status = RUNNERS[cfg.command](cfg)
    except (DivergentRegime, NotConverged) as exc:
        print(f"gcqpt {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_DIVERGENT
    except scaling.InsufficientPoints as exc:
        print(f"gcqpt {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not rows:
        log.info("no rows to emit")
        return status
    try:
        emit_table(rows, cfg.fmt, cfg.output, columns)
    except OSError as exc:
        print(f"gcqpt {cfg.command}: {exc}", file=sys.stderr)
        return EXIT_IO
    return status


def main(argv: Optional[Sequence[str]] = None) -> int:
    cfg = parse_config(argv)
    logging.basicConfig(level=logging.INFO if cfg.extra.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
