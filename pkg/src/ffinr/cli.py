"""Command-line entry point: ``ffinr {train,sweep,theory,spectra,signal}``.

Exit codes: 0 success, 2 configuration or input error, 3 numeric abort,
4 a verification report failed its contract.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .embeddings import FrequencyMatrix
from .errors import ConfigError, ContractFailure, FfinrError, NumericAbort
from .filters import channel_spectrum, filter_from_dict
from .numerics import dft_uniform

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CONTRACT = 0, 2, 3, 4

THEORY_DEFAULTS = {
    "ntk": {"width": 8192, "trials": 20, "seed": 0, "u_values": [1.0, 0.5, 0.0, -0.5], "bias_init": "zero"},
    "span": {"B": [[1]], "budget": 3, "cap": 10**6},
    "floor": {"tones": [[2, 1.0], [5, 0.5]], "B": [[2]], "width": 1024, "iterations": 2000, "lr": 1e-2,
              "optimizer": "adam", "n_points": 256, "budget": 8, "seed": 0},
    "decay": {"mode": "1d", "n": 4, "offsets": [0.0, 0.25, 0.5], "f": 2, "far": 10, "width": 1024,
              "iterations": 400, "lr": 0.5, "snapshot_every": 20, "n_points": 64, "seed": 0},
    "eigencheck": {"B": [[2], [4]], "n_points": 64, "top": 10, "threshold": 0.95, "budget": 8},
}


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"cannot serialise {type(o).__name__}")


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, default=_json_default))


def _say(args, msg):
    if not args.quiet:
        print(msg, file=sys.stderr)


# --------------------------------------------------------------------------
# train / sweep
# --------------------------------------------------------------------------

def _experiment_config(args):
    from .tasks.config import load_config

    overrides = list(args.override or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    return load_config(args.config, overrides)


def _progress(args):
    if args.quiet:
        return None
    return lambda r: print(f"iter {r.iter:6d}  mse {r.mse:.3e}  psnr {r.psnr:7.3f}  alpha_A {r.alpha_A:.2e}",
                           file=sys.stderr)


def cmd_train(args) -> int:
    from .tasks.experiment import run_experiment

    cfg = _experiment_config(args)
    res = run_experiment(cfg, Path(args.out), _progress(args))
    _say(args, f"final psnr {res.final.psnr:.3f} dB; outputs in {args.out}")
    return EXIT_OK


def _parse_values(text: str):
    try:
        vals = json.loads(text)
    except json.JSONDecodeError:
        vals = [v.strip() for v in text.split(",") if v.strip()]
        parsed = []
        for v in vals:
            try:
                parsed.append(json.loads(v))
            except json.JSONDecodeError:
                parsed.append(v)
        vals = parsed
    if not isinstance(vals, list):
        vals = [vals]
    return vals


def cmd_sweep(args) -> int:
    from .tasks.experiment import sweep

    cfg = _experiment_config(args)
    rows = sweep(cfg, args.axis, _parse_values(args.values), Path(args.out), _progress(args))
    for r in rows:
        _say(args, f"{r['axis']}={r['value']}: psnr {r['psnr']:.3f}")
    return EXIT_OK


# --------------------------------------------------------------------------
# theory
# --------------------------------------------------------------------------

def _theory_params(args):
    params = dict(THEORY_DEFAULTS[args.target])
    if args.config:
        path = Path(args.config)
        try:
            raw = json.loads(path.read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        raw.pop("target", None)
        unknown = sorted(set(raw) - set(params))
        if unknown:
            raise ConfigError(f"unknown key(s) for theory {args.target}: {', '.join(unknown)}")
        params.update(raw)
    from .tasks.config import parse_override

    for text in args.override or []:
        keys, value = parse_override(text)
        if len(keys) != 1 or keys[0] not in params:
            raise ConfigError(f"unknown key for theory {args.target}: {'.'.join(keys)}")
        params[keys[0]] = value
    if args.seed is not None and "seed" in params:
        params["seed"] = args.seed
    return params


def _run_ntk(p):
    from . import theory

    rows = []
    for u in p["u_values"]:
        x = np.array([1.0, 0.0])
        z = np.array([u, math.sqrt(max(0.0, 1.0 - u * u))])
        mean, se = theory.ntk_empirical(x, z, p["width"], p["trials"], p["seed"], p["bias_init"])
        ref = theory.ntk_closed_form(u) if p["bias_init"] == "zero" else theory.ntk_closed_form_random_bias(u)
        tol = theory.ntk_tolerance(ref, se)
        rows.append({"u": u, "empirical": mean, "stderr": se, "closed_form": ref,
                     "relative_deviation": abs(mean - ref) / ref if ref else None,
                     "tolerance": tol, "passed": abs(mean - ref) <= tol})
    return {"params": p, "rows": rows, "passed": all(r["passed"] for r in rows)}, \
        [f"ntk at u={r['u']}" for r in rows if not r["passed"]]


def _run_span(p):
    from . import theory

    fs = theory.spanned_frequencies(p["B"], p["budget"], p["cap"])
    return {"params": p, "span": fs.to_dict(), "passed": True}, []


def _run_floor(p):
    from . import theory

    y = theory.TargetFunction.from_tones([tuple(t) for t in p["tones"]])
    cfg = theory.TwoLayerConfig(width=p["width"], iterations=p["iterations"], lr=p["lr"],
                                optimizer=p["optimizer"], seed=p["seed"], budget=p["budget"])
    rep = theory.loss_floor_experiment(y, FrequencyMatrix(p["B"]), cfg, n_points=p["n_points"])
    rep["params"] = p
    return rep, [k for k, ok in rep["checks"].items() if not ok]


def _run_decay(p):
    from . import theory

    cfg = theory.TwoLayerConfig(width=p["width"], iterations=p["iterations"], lr=p["lr"], optimizer="gd",
                                seed=p["seed"], snapshot_every=p["snapshot_every"])
    if p["mode"] == "1d":
        rep = theory.decay_comparison_1d(p["n"], p["offsets"], cfg, p["n_points"])
    elif p["mode"] == "2d":
        rep = theory.decay_comparison_2d(p["f"], p["far"], cfg, p["n_points"])
    else:
        raise ConfigError(f"decay mode must be '1d' or '2d', got {p['mode']!r}")
    rep["params"] = p
    return rep, [] if rep["passed"] else [f"decay ordering ({p['mode']})"]


def _run_eigencheck(p):
    from . import theory

    B = FrequencyMatrix(p["B"])
    xs = np.arange(p["n_points"]) / p["n_points"]
    report = theory.ntk_gram(theory.normalized_embedding(B, xs))
    rep = theory.eigen_sinusoid_check(report, p["top"], p["threshold"])
    span = theory.spanned_frequencies(np.rint(B.rows), p["budget"]) if B.is_integer() else None
    for row in rep["eigenvectors"]:
        row["in_span"] = None if span is None else (int(round(row["frequency"])),) in span.entries
    rep["gram"] = report.to_dict()
    rep["params"] = p
    failing = [f"eigenvector {r['index']} concentration" for r in rep["eigenvectors"] if not r["passed"]]
    failing += [f"eigenvector {r['index']} frequency outside span" for r in rep["eigenvectors"] if r["in_span"] is False]
    rep["passed"] = not failing
    return rep, failing


THEORY_RUNNERS = {"ntk": _run_ntk, "span": _run_span, "floor": _run_floor, "decay": _run_decay,
                  "eigencheck": _run_eigencheck}


def cmd_theory(args) -> int:
    params = _theory_params(args)
    report, failing = THEORY_RUNNERS[args.target](params)
    out = Path(args.out) / f"theory_{args.target}.json"
    _write_json(out, report)
    if failing:
        raise ContractFailure(f"theory {args.target}: failed {', '.join(failing)} (report: {out})")
    _say(args, f"theory {args.target}: all contracts pass; report {out}")
    return EXIT_OK


# --------------------------------------------------------------------------
# spectra / signal
# --------------------------------------------------------------------------

def cmd_spectra(args) -> int:
    """Per-channel filter spectra from a finished 1-D run directory."""
    run = Path(args.run)
    try:
        manifest = json.loads((run / "manifest.json").read_text())
        fp = filter_from_dict(json.loads((run / "filter.json").read_text()))
    except FileNotFoundError as exc:
        raise ConfigError(f"run directory incomplete: {exc.filename}") from None
    B = FrequencyMatrix.from_dict(manifest["frequency_matrix"])
    channels = range(fp.spec.width) if args.channels is None else [int(c) for c in args.channels.split(",")]
    out = Path(args.out)
    for c in channels:
        _write_json(out / f"channel_{c:04d}.json", channel_spectrum(fp, B, c, args.grid).to_dict())
    _say(args, f"wrote {len(list(channels))} channel spectra to {out}")
    return EXIT_OK


def cmd_signal(args) -> int:
    from .tasks.signals import generator_from_dict, make_signal

    if args.config:
        try:
            gen = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse {args.config}: {exc}") from None
    elif args.generator:
        try:
            gen = json.loads(args.generator)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse --generator: {exc}") from None
    else:
        raise ConfigError("signal needs --config or --generator")
    sig = make_signal(generator_from_dict(gen), args.n)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["x,y"] + [f"{x!r},{y!r}" for x, y in zip(sig.xs.tolist(), sig.ys.tolist())]
    (out / "signal.csv").write_text("\n".join(lines) + "\n")
    _write_json(out / "spectrum.json", dft_uniform(sig.ys).to_dict())
    _say(args, f"wrote {args.n} samples to {out}")
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file")
    common.add_argument("--override", action="append", metavar="K=V",
                        help="dotted-path override, value parsed as JSON (repeatable)")
    common.add_argument("--out", default="out", help="output directory (default: ./out)")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")

    ap = argparse.ArgumentParser(prog="ffinr", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", parents=[common], help="train one INR experiment")
    p.set_defaults(func=cmd_train, needs_config=True)
    p = sub.add_parser("sweep", parents=[common], help="run one experiment per axis value")
    p.add_argument("--axis", required=True)
    p.add_argument("--values", required=True, help="JSON list or comma-separated values")
    p.set_defaults(func=cmd_sweep, needs_config=True)
    p = sub.add_parser("theory", parents=[common], help="run a numerical theory check")
    p.add_argument("target", choices=sorted(THEORY_RUNNERS))
    p.set_defaults(func=cmd_theory, needs_config=False)
    p = sub.add_parser("spectra", parents=[common], help="filter channel spectra of a 1-D run")
    p.add_argument("--run", required=True, help="run directory written by train")
    p.add_argument("--channels", help="comma-separated channel indices (default: all)")
    p.add_argument("--grid", type=int, default=256)
    p.set_defaults(func=cmd_spectra, needs_config=False)
    p = sub.add_parser("signal", parents=[common], help="sample a 1-D target and its spectrum")
    p.add_argument("--generator", help="inline generator JSON")
    p.add_argument("--n", type=int, default=256)
    p.set_defaults(func=cmd_signal, needs_config=False)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.needs_config and not args.config:
            raise ConfigError(f"{args.command} requires --config")
        return args.func(args)
    except NumericAbort as exc:
        print(f"error: numeric abort: {exc}", file=sys.stderr)
        if exc.dump:
            print(json.dumps(exc.dump, default=_json_default), file=sys.stderr)
        return EXIT_NUMERIC
    except ContractFailure as exc:
        print(f"error: contract failure: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    except FfinrError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
