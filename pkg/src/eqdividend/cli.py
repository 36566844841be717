"""Command-line front end.

    python -m eqdividend solve  --config mixture_w04.json --out sol.json
    python -m eqdividend verify --config sol.json
    python -m eqdividend mc     --config pseudo_l01.json --x0 0.5,1,2 --paths 20000
    python -m eqdividend spike  --config mixture_w04.json --paths 20000
    python -m eqdividend figure --example pseudo --out figs/

Exit codes: 0 ok, 1 invalid config, 2 unsupported parameter region,
3 numerical or verification failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .mixture import Case, MixtureSolution, solve_mixture
from .model import (
    CaseError,
    EqDivError,
    ExpMixtureDiscount,
    ModelParams,
    NumericalFailure,
    PseudoExpDiscount,
    ThetaTriple,
    UnsupportedRegionError,
    ValidationError,
)
from .montecarlo import AutoHorizon, SimConfig, estimate_value, spike_deviation_estimate
from .pseudo import PseudoSolution, solve_pseudo
from .verify import verify_solution

EXIT_OK, EXIT_CONFIG, EXIT_UNSUPPORTED, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4

EXAMPLES = {
    "mixture": ["mixture_w0", "mixture_w04", "mixture_w07", "mixture_w1"],
    "pseudo": ["pseudo_l0", "pseudo_l01", "pseudo_l02"],
}


class ConfigError(ValidationError):
    pass


# -- config parsing ------------------------------------------------------------


def _need(d: dict, key: str, where: str):
    if not isinstance(d, dict) or key not in d:
        raise ConfigError(f"{where}.{key}" if where else key, "missing")
    return d[key]


def _number(v, field: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(field, f"expected a number, got {v!r}")
    return float(v)


def _no_extra(d: dict, allowed: set, where: str):
    extra = sorted(set(d) - allowed)
    if extra:
        raise ConfigError(f"{where}.{extra[0]}" if where else extra[0], "unknown field")


def _prefixed(where: str, fn):
    try:
        return fn()
    except ConfigError:
        raise
    except ValidationError as exc:
        raise ConfigError(f"{where}.{exc.field}", str(exc).split(": ", 1)[-1]) from exc


def parse_params(d: dict) -> ModelParams:
    p = _need(d, "params", "")
    _no_extra(p, {"mu", "sigma", "M"}, "params")
    vals = {k: _number(_need(p, k, "params"), f"params.{k}") for k in ("mu", "sigma", "M")}
    return _prefixed("params", lambda: ModelParams(**vals))


def parse_discount(d: dict):
    disc = _need(d, "discount", "")
    kind = _need(disc, "type", "discount")
    if kind == "exp_mixture":
        _no_extra(disc, {"type", "weights", "rates"}, "discount")
        w, r = _need(disc, "weights", "discount"), _need(disc, "rates", "discount")
        if not isinstance(w, list) or not isinstance(r, list):
            raise ConfigError("discount.weights", "weights and rates must be lists")
        w = [_number(v, f"discount.weights[{i}]") for i, v in enumerate(w)]
        r = [_number(v, f"discount.rates[{i}]") for i, v in enumerate(r)]
        return _prefixed("discount", lambda: ExpMixtureDiscount(tuple(w), tuple(r)))
    if kind == "pseudo_exp":
        _no_extra(disc, {"type", "lambda", "delta"}, "discount")
        lam = _number(_need(disc, "lambda", "discount"), "discount.lambda")
        delta = _number(_need(disc, "delta", "discount"), "discount.delta")
        return _prefixed("discount", lambda: PseudoExpDiscount(lam, delta))
    raise ConfigError("discount.type", f"expected 'exp_mixture' or 'pseudo_exp', got {kind!r}")


RUN_KEYS = {"params", "discount", "x_grid", "mc", "x0", "spike"}


def parse_run_config(d: dict):
    """(params, discount) from a run config, rejecting unknown sections."""
    _no_extra(d, RUN_KEYS, "")
    for sec, keys in (("x_grid", {"start", "stop", "num"}), ("spike", {"x0_factors", "l_factors", "epsilons"})):
        if sec in d:
            if not isinstance(d[sec], dict):
                raise ConfigError(sec, "expected an object")
            _no_extra(d[sec], keys, sec)
    return parse_params(d), parse_discount(d)


def discount_to_dict(disc) -> dict:
    if isinstance(disc, ExpMixtureDiscount):
        return {"type": "exp_mixture", "weights": list(disc.weights), "rates": list(disc.rates)}
    return {"type": "pseudo_exp", "lambda": disc.lam, "delta": disc.delta}


def params_to_dict(p: ModelParams) -> dict:
    return {"mu": p.mu, "sigma": p.sigma, "M": p.M}


def solve(params, disc):
    if isinstance(disc, ExpMixtureDiscount):
        return solve_mixture(params, disc)
    return solve_pseudo(params, disc)


def solution_to_dict(sol) -> dict:
    out = {"params": params_to_dict(sol.params), "discount": discount_to_dict(sol.discount)}
    out.update(sol.to_dict())
    return out


def solution_from_dict(d: dict):
    """Rebuild a solution object from its serialised coefficients (no re-solve)."""
    params, disc = parse_params(d), parse_discount(d)
    case = Case(_need(d, "case", ""))
    b = _number(_need(d, "b", ""), "b")
    co = _need(d, "coefficients", "")
    if isinstance(disc, ExpMixtureDiscount):
        if not isinstance(co, list) or len(co) != disc.n:
            raise ConfigError("coefficients", f"expected {disc.n} records")
        return MixtureSolution(
            params, disc, case, b,
            tuple(ThetaTriple.of(params, dl) for dl in disc.rates),
            C=tuple(_number(c["C"], f"coefficients[{i}].C") for i, c in enumerate(co)),
            d=tuple(_number(c["d"], f"coefficients[{i}].d") for i, c in enumerate(co)),
        )
    f = {k: _number(_need(co, k, "coefficients"), f"coefficients.{k}") for k in ("C", "d", "Chat", "B1", "B3", "D3")}
    return PseudoSolution(
        params, disc, case, b, ThetaTriple.of(params, disc.delta),
        concavity_bound_holds=bool(d.get("concavity_bound_holds", True)), **f,
    )


def sim_config(d: dict, args) -> SimConfig:
    mc = d.get("mc", {}) if isinstance(d.get("mc", {}), dict) else {}
    _no_extra(mc, {"dt", "n_paths", "horizon", "horizon_tol", "seed", "bridge_correction", "workers"}, "mc")
    dt = args.dt if args.dt is not None else _number(mc.get("dt", 1e-3), "mc.dt")
    n = args.paths if args.paths is not None else mc.get("n_paths", 100_000)
    seed = args.seed if args.seed is not None else mc.get("seed", 0)
    hz = mc.get("horizon", "auto")
    if hz == "auto":
        tol = mc.get("horizon_tol")
        horizon = AutoHorizon(None if tol is None else _number(tol, "mc.horizon_tol"))
    else:
        horizon = _number(hz, "mc.horizon")
    bridge = bool(mc.get("bridge_correction", False)) or args.bridge
    workers = args.workers if args.workers is not None else mc.get("workers")
    try:
        return SimConfig(dt=dt, n_paths=int(n), horizon=horizon, seed=int(seed),
                         bridge_correction=bridge, workers=workers)
    except ValidationError as exc:
        raise ConfigError(f"mc.{exc.field}", str(exc).split(": ", 1)[-1]) from exc


def config_sha(d: dict) -> str:
    canon = json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(canon.encode()).hexdigest()


def bundled_config_path(name: str) -> Path:
    stem = name[:-5] if name.endswith(".json") else name
    return Path(str(resources.files("eqdividend") / "configs" / f"{stem}.json"))


def load_json(path: str) -> dict:
    p = Path(path)
    if not p.exists():
        alt = bundled_config_path(p.name)
        if alt.exists():
            p = alt
    text = p.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be an object")
    return data


def dump_json(obj, out: str | None):
    text = json.dumps(obj, indent=2, allow_nan=False) + "\n"
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


# -- subcommands -----------------------------------------------------------------


def _default_x0(sol) -> list:
    if sol.case is Case.BARRIER:
        return [sol.b / 2, sol.b, 2 * sol.b, 4 * sol.b]
    return [0.5, 1.0, 2.0, 4.0]


def _parse_list(s: str, field: str) -> list:
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(field, f"expected comma-separated numbers, got {s!r}") from exc


def cmd_solve(args) -> int:
    cfg = load_json(args.config)
    sol = solve(*parse_run_config(cfg))
    if args.out is not None:
        dump_json(solution_to_dict(sol), args.out)
    print(f"b = {sol.b:.4f}", file=sys.stderr if args.out == "-" else sys.stdout)
    return EXIT_OK


def cmd_verify(args) -> int:
    cfg = load_json(args.config)
    if "coefficients" in cfg:
        sol = solution_from_dict(cfg)
    else:
        sol = solve(*parse_run_config(cfg))
    rep = verify_solution(sol)
    dump_json(rep.to_dict(), args.out)
    return EXIT_OK if rep.passed else EXIT_NUMERICAL


def cmd_mc(args) -> int:
    cfg = load_json(args.config)
    params, disc = parse_run_config(cfg)
    sc = sim_config(cfg, args)
    sol = solve(params, disc)
    if args.x0 is not None:
        xs = _parse_list(args.x0, "x0")
    elif "x0" in cfg:
        xs = [_number(v, f"x0[{i}]") for i, v in enumerate(cfg["x0"])]
    else:
        xs = _default_x0(sol)
    rows = []
    for x0 in xs:
        if x0 < 0.0:
            raise ConfigError("x0", "must be >= 0")
        est = estimate_value(params, disc, sol.strategy, x0, sc)
        rows.append({"x0": x0, **est.to_dict()})
    dump_json({
        "b": sol.b, "rate": params.M, "seed": sc.seed,
        "bridge_correction": sc.bridge_correction, "estimates": rows,
    }, args.out)
    return EXIT_OK


def cmd_spike(args) -> int:
    cfg = load_json(args.config)
    params, disc = parse_run_config(cfg)
    sc = sim_config(cfg, args)
    sol = solve(params, disc)
    sp = cfg.get("spike", {})
    x0s = _parse_list(args.x0, "x0") if args.x0 else [f * sol.b for f in sp.get("x0_factors", [0.5, 1.0, 2.0])]
    ls = [f * params.M for f in sp.get("l_factors", [0.0, 0.5, 1.0])]
    eps = sp.get("epsilons", [0.05, 0.02, 0.01])
    rows = []
    for x0 in x0s:
        for l in ls:
            for e in eps:
                est = spike_deviation_estimate(params, disc, sol, x0, l, e, sc)
                rows.append({"x0": x0, "l": l, "epsilon": e, **est.to_dict()})
    dump_json({"b": sol.b, "seed": sc.seed, "gains": rows}, args.out)
    return EXIT_OK


def figure_rows(sol, xs: np.ndarray):
    V = sol.c(0.0, xs)
    Vx = sol.c(0.0, xs, 1)
    Vxx = sol.c(0.0, xs, 2)
    return zip(xs, V, Vx, Vxx)


def write_figure_csv(cfg: dict, path: Path) -> float:
    sol = solve(*parse_run_config(cfg))
    g = cfg.get("x_grid", {"start": 0.0, "stop": 5.0, "num": 501})
    xs = np.linspace(_number(g["start"], "x_grid.start"), _number(g["stop"], "x_grid.stop"), int(g["num"]))
    if np.any(xs < 0.0):
        raise ConfigError("x_grid.start", "must be >= 0")
    lines = [f"# b={sol.b:.10g} case={sol.case.value} config_sha={config_sha(cfg)}", "x,V,Vx,Vxx"]
    lines += [",".join(f"{v:.10g}" for v in row) for row in figure_rows(sol, xs)]
    path.write_text("\n".join(lines) + "\n")
    return sol.b


def cmd_figure(args) -> int:
    out_dir = Path(args.out or ".")
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.config:
        names = [args.config]
    elif args.example:
        names = EXAMPLES[args.example]
    else:
        raise ConfigError("example", "give --example mixture|pseudo or --config PATH")
    for name in names:
        cfg = load_json(name)
        stem = Path(name).stem
        b = write_figure_csv(cfg, out_dir / f"{stem}.csv")
        print(f"{stem}: b = {b:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="eqdividend", description="Equilibrium dividend barriers under non-exponential discounting.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON config (path or bundled example name)")
        p.add_argument("--out", help="output path ('-' for stdout)")
        return p

    common(sub.add_parser("solve", help="solve for the equilibrium barrier"))
    common(sub.add_parser("verify", help="check HJB residuals, smooth fit, threshold and concavity"))
    for name, text in (("mc", "Monte Carlo value estimates"), ("spike", "spike-deviation gains")):
        p = common(sub.add_parser(name, help=text))
        p.add_argument("--x0", help="comma-separated initial surplus values")
        p.add_argument("--dt", type=float)
        p.add_argument("--paths", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int)
        p.add_argument("--bridge", action="store_true", help="Brownian-bridge ruin correction")
    p = common(sub.add_parser("figure", help="CSV of V, V', V'' for the example parameter sets"), config_required=False)
    p.add_argument("--example", choices=sorted(EXAMPLES))
    return ap


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "mc": cmd_mc, "spike": cmd_spike, "figure": cmd_figure}


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnsupportedRegionError as exc:
        print(f"error: unsupported parameter region: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except (NumericalFailure, CaseError) as exc:
        print(f"error: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EqDivError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (KeyError, TypeError, ValueError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
