"""Batch front end: one JSON experiment config in, CSV/JSON artifacts out.

    prodtail product-tail --config cfg.json --out tail.csv
    prodtail ruin --config cfg.json --out ruin.csv [--seed 7] [--plot]
    prodtail verify --config cfg.json --out probes.csv
    prodtail validate-model --config cfg.json

Exit codes: 0 success, 2 configuration or domain error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dependence import model_from_json, validate
from .diagnostics import (
    ProbeReport,
    assumption_b_ratio,
    convolution_tail_ratio,
    long_tail_ratio,
    reports_csv,
    verify_product_class,
)
from .distributions import DiscreteFinite, from_json
from .errors import ConfigError, DomainError, ModelInvalidError, NumericError, SamplerStuckError
from .product_tail import (
    TailCurve,
    exact_product_tail,
    exact_two_point_fgm_tail,
    h_integral_tail,
    iterated_tail_curve,
    mc_product_tail,
    tail_curve_from_estimates,
)
from .ruin import RiskModelSpec, block_rng, compare_ruin, comparison_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
HASH_EXCLUDED = ("chunks", "out")


# ---------------------------------------------------------------------------
# config handling


def load_config(path: str, seed_override: int | None) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if seed_override is not None:
        cfg["seed"] = seed_override
    if "seed" not in cfg:
        raise ConfigError("config has no seed; set \"seed\" or pass --seed")
    seed = cfg["seed"]
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed < 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    return cfg


def config_hash(cfg: dict) -> str:
    """SHA-256 of the canonical config, ignoring keys that cannot change the data."""
    kept = {k: v for k, v in cfg.items() if k not in HASH_EXCLUDED}
    text = json.dumps(kept, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def header_lines(command: str, cfg: dict) -> list[str]:
    return [
        f"prodtail {__version__}",
        f"command: {command}",
        f"config_sha256: {config_hash(cfg)}",
        f"seed: {cfg['seed']}",
    ]


def meta_block(command: str, cfg: dict) -> dict:
    return {"tool": "prodtail", "version": __version__, "command": command,
            "config_sha256": config_hash(cfg), "seed": cfg["seed"]}


def expand_grid(spec) -> np.ndarray:
    """Explicit list, or {"from", "to", "points"} for a geometric grid."""
    if isinstance(spec, dict):
        try:
            xs = np.geomspace(float(spec["from"]), float(spec["to"]), int(spec["points"]))
        except KeyError as exc:
            raise ConfigError(f"geometric x_grid needs from/to/points, missing {exc}") from exc
        except ValueError as exc:
            raise ConfigError(f"bad geometric x_grid: {exc}") from exc
    elif isinstance(spec, list) and spec:
        xs = np.asarray(spec, dtype=float)
    else:
        raise ConfigError("x_grid must be a non-empty list or {from, to, points}")
    if not np.all(np.isfinite(xs)) or np.any(np.diff(xs) <= 0):
        raise ConfigError("x_grid must be finite and strictly increasing")
    return xs


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"config is missing {key!r}")
    return cfg[key]


def _int_field(cfg: dict, key: str, default=None, minimum: int = 1) -> int:
    value = cfg.get(key, default)
    if value is None:
        raise ConfigError(f"config is missing {key!r}")
    if isinstance(value, float) and value.is_integer():
        value = int(value)
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise ConfigError(f"{key} must be an integer >= {minimum}, got {value!r}")
    return value


def _marginals(cfg: dict, source: dict | None = None):
    source = cfg if source is None else {**cfg, **source}
    F = from_json(_require(source, "F"))
    G = from_json(_require(source, "G"))
    model = model_from_json(source.get("model", {"kind": "independent"}))
    return F, G, model


def _out_path(cfg: dict, args) -> Path:
    out = args.out or cfg.get("out")
    if not out:
        raise ConfigError("no output path; pass --out or set \"out\" in the config")
    return Path(out)


def write_csv(path: Path, header: list[str], body: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        fh.write(body)


def write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_finite(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _finite(obj):
    """JSON has no inf/nan; spell them as strings."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.generic):
        return _finite(obj.item())
    return obj


# ---------------------------------------------------------------------------
# commands


def _is_two_point_12(G) -> bool:
    return (isinstance(G, DiscreteFinite) and tuple(G.atoms) == (1.0, 2.0)
            and np.allclose(G.probs, (0.5, 0.5), rtol=0, atol=1e-15))


def _exact_curve(F, G, model, xs) -> TailCurve:
    if getattr(model, "kind", "") in ("fgm", "independent") and _is_two_point_12(G) and F.right_endpoint == math.inf:
        vals = np.asarray(exact_two_point_fgm_tail(F, model.theta, xs))
        errs = 4 * np.finfo(float).eps * vals
    else:
        vals = np.asarray(exact_product_tail(F, G, model, xs))
        # finite atom sums are exact to rounding; quadrature is run at rtol 1e-11
        errs = (4 * np.finfo(float).eps if G.is_discrete else 1e-11) * vals
    return TailCurve(xs, vals, errs, "exact")


def cmd_product_tail(cfg: dict, args) -> int:
    out = _out_path(cfg, args)
    F, G, model = _marginals(cfg)
    xs = expand_grid(_require(cfg, "x_grid"))
    i = _int_field(cfg, "i", 1)
    methods = cfg.get("methods", ["exact", "quadrature"])
    unknown = set(methods) - {"exact", "quadrature", "montecarlo"}
    if unknown or not methods:
        raise ConfigError(f"methods must be drawn from exact/quadrature/montecarlo, got {methods!r}")
    curves = []
    for method in methods:
        if method == "exact":
            if i != 1:
                raise ConfigError("the exact method covers the single product (i = 1) only")
            curves.append(_exact_curve(F, G, model, xs))
        elif method == "quadrature":
            curves.append(iterated_tail_curve(F, G, model, i, xs))
        else:
            N = _int_field(cfg, "N", minimum=1000)
            est = mc_product_tail(model, F, G, i, xs, N, block_rng(cfg["seed"], 0))
            curves.append(tail_curve_from_estimates(est))
    body = curves[0].to_csv() + "".join(c.to_csv().split("\n", 1)[1] for c in curves[1:])
    write_csv(out, header_lines("product-tail", cfg), body)
    if args.plot:
        from .plotting import plot_tail_curves

        plot_tail_curves(curves, out.with_suffix(".png"), title=f"i = {i}")
    return EXIT_OK


def cmd_ruin(cfg: dict, args) -> int:
    out = _out_path(cfg, args)
    F, G, model = _marginals(cfg)
    spec = RiskModelSpec(F, G, model, _int_field(cfg, "n"))
    xs = expand_grid(_require(cfg, "x_grid"))
    N = _int_field(cfg, "N", minimum=1000)
    chunks = _int_field(cfg, "chunks", 1)
    rows = compare_ruin(spec, xs, N, cfg["seed"], chunks)
    write_csv(out, header_lines("ruin", cfg), comparison_csv(rows))
    summary = {
        "meta": meta_block("ruin", cfg),
        "n": spec.n,
        "paths": N,
        "rows": [
            {
                "x": r.x,
                "psi_hat": r.psi_hat,
                "asym_sum": r.asym_sum,
                "ratio": r.ratio,
                "ratio_se": r.ratio_se,
                "rel_se": r.std_err / r.psi_hat if r.psi_hat > 0 else math.inf,
                "asym_in_ci": r.asym_in_ci(),
                "trigger_histogram": list(r.trigger_histogram),
            }
            for r in rows
        ],
    }
    write_json(out.with_suffix(".json"), summary)
    if args.plot:
        from .plotting import plot_ruin_comparison

        plot_ruin_comparison(rows, out.with_suffix(".png"), title=f"n = {spec.n}, N = {N}")
    return EXIT_OK


def _run_probe(i: int, probe: dict, cfg: dict) -> ProbeReport:
    merged = {**{k: cfg[k] for k in ("F", "G", "model", "x_grid") if k in cfg}, **probe}
    kind = _require(probe, "kind")
    xs = expand_grid(_require(merged, "x_grid"))
    tol = float(probe.get("tol", cfg.get("tol", 0.01)))
    if kind == "long_tail":
        dist = from_json(_require(merged, "dist"))
        rows = long_tail_ratio(dist, float(merged.get("gamma", 0.0)), float(merged.get("t", 1.0)), xs)
        return ProbeReport("long_tail", rows, tol)
    if kind == "convolution":
        dist = from_json(_require(merged, "dist"))
        method = merged.get("method", "quadrature")
        rng = block_rng(cfg["seed"], i) if method == "montecarlo" else None
        rows = convolution_tail_ratio(dist, float(merged.get("gamma", 0.0)), xs, method=method, rng=rng,
                                      samples=_int_field(merged, "N", 10**6, minimum=1000))
        return ProbeReport("convolution", rows, tol)
    if kind == "assumption_b":
        F, G, model = _marginals(cfg, probe)
        rows = assumption_b_ratio(G, lambda v: h_integral_tail(F, G, model, v), float(merged.get("b", 1.0)), xs)
        notes = []
        if G.right_endpoint < math.inf:
            notes.append("G is bounded: the ratio vanishes beyond beta_G / b, so the condition holds automatically")
        return ProbeReport("assumption_b", rows, tol, notes)
    if kind == "product_class":
        F, G, model = _marginals(cfg, probe)
        return verify_product_class(F, G, model, float(merged.get("gamma_F", 0.0)), float(merged.get("t", 1.0)), xs, tol)
    raise ConfigError(f"unknown probe kind {kind!r}")


def cmd_verify(cfg: dict, args) -> int:
    out = _out_path(cfg, args)
    probes = _require(cfg, "probes")
    if not isinstance(probes, list) or not probes:
        raise ConfigError("probes must be a non-empty list")
    reports = [_run_probe(i, p, cfg) for i, p in enumerate(probes)]
    write_csv(out, header_lines("verify", cfg), reports_csv(reports))
    summary = {
        "meta": meta_block("verify", cfg),
        "pass": all(r.passed for r in reports),
        "probes": [r.summary() for r in reports],
    }
    write_json(out.with_suffix(".json"), summary)
    if args.plot:
        from .plotting import plot_probe_deviations

        plot_probe_deviations(reports, out.with_suffix(".png"))
    return EXIT_OK


def cmd_validate_model(cfg: dict, args) -> int:
    F, G, model = _marginals(cfg)
    payload = {"meta": meta_block("validate-model", cfg), "report": validate(model, F, G).to_json()}
    text = json.dumps(_finite(payload), indent=2, sort_keys=True)
    print(text)
    out = args.out or cfg.get("out")
    if out:
        write_json(Path(out), payload)
    return EXIT_OK


COMMANDS = {
    "product-tail": cmd_product_tail,
    "ruin": cmd_ruin,
    "verify": cmd_verify,
    "validate-model": cmd_validate_model,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prodtail", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"prodtail {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, metavar="PATH", help="JSON experiment config")
        p.add_argument("--out", metavar="PATH", help="output file (overrides the config's \"out\")")
        p.add_argument("--seed", type=int, help="overrides the config's seed")
        p.add_argument("--plot", action="store_true", help="also write a PNG figure next to the output")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.seed)
        return COMMANDS[args.command](cfg, args)
    except NumericError as exc:
        print(f"prodtail: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SamplerStuckError as exc:
        print(f"prodtail: sampler failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, DomainError, ModelInvalidError, ValueError, KeyError, TypeError) as exc:
        print(f"prodtail: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
