"""Command-line interface.

Subcommands
-----------
amp       canonical one- or two-photon amplitude of a config
poles     pole map of the two-photon mixing coefficient (CSV)
series    Dyson partial sums against the closed form
spectrum  squared modulus of the mixing coefficient on a frequency grid
check     equivalence and unitarity suites
diagrams  JSON dump of the Dyson diagrams of one order

Exit codes: 0 success, 1 failed check, 2 configuration or usage error,
3 evaluation requested on a pole.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import closedform, crosscheck, dyson, poles, summation
from .distamp import (
    DistributionError,
    OnPoleError,
    amplitude_to_dict,
    canonicalize,
    eval_coefficient,
    format_amplitude,
    relative_deviation,
)
from .model import LAMBDA, TLS, ConfigError, RunConfig, load_config, parse_config

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_ON_POLE = 3


class UsageError(Exception):
    """Arguments that parse but cannot be acted on."""


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _cfmt(z: complex | None):
    return None if z is None else [float(f"{z.real:.17g}"), float(f"{z.imag:.17g}")]


def _dump(obj) -> str:
    return json.dumps(obj, indent=2)


def _ground(cfg: RunConfig) -> int | None:
    return None if cfg.system.is_tls else cfg.initial_ground


def _sectors(cfg: RunConfig) -> dict:
    """Canonical amplitudes keyed by final ground level (``None`` for a TLS)."""
    system, inputs = cfg.system, cfg.photons.inputs
    if len(inputs) == 1:
        if system.is_tls:
            return {None: closedform.amp_single_tls(system, inputs[0])}
        return closedform.amp_single_lambda(system, cfg.initial_ground, inputs[0])
    if system.is_tls:
        return {None: closedform.amp_two_tls_fan(system, *inputs)}
    raw = closedform.amp_two_lambda(system, cfg.initial_ground, *inputs)
    return {mu: canonicalize(a) for mu, a in raw.items()}


def _coefficients(amp, f0: float | None) -> list[dict]:
    rows = []
    for t in amp.terms:
        entry = {"deltas": [str(d) for d in t.deltas], "coefficient": None}
        for assignment in ({}, {"f0": f0} if f0 is not None else None):
            if assignment is None:
                break
            try:
                entry["coefficient"] = _cfmt(eval_coefficient(amp, t.deltas, assignment))
                if assignment:
                    entry["at"] = assignment
                break
            except KeyError:
                continue
        rows.append(entry)
    return rows


def cmd_amp(args) -> int:
    cfg = load_config(args.config)
    f0 = args.f0
    if f0 is None and cfg.photons.outputs is not None and len(cfg.photons.outputs) == 2:
        f0 = cfg.photons.outputs[0]
    sectors = _sectors(cfg)
    if args.format == "json":
        out = {
            "system": cfg.system.as_dict(),
            "inputs": list(cfg.photons.inputs),
            "initial_ground": _ground(cfg),
            "sectors": [
                {"mu": mu, "amplitude": amplitude_to_dict(amp), "coefficients": _coefficients(amp, f0)}
                for mu, amp in sectors.items()
            ],
        }
        print(_dump(out))
    else:
        for mu, amp in sectors.items():
            if mu is not None:
                print(f"# final ground level mu={mu}")
            print(format_amplitude(amp))
            for row in _coefficients(amp, f0):
                value = row["coefficient"]
                shown = "(needs --f0)" if value is None else f"{complex(*value)!r}"
                print(f"  coefficient of {' * '.join(f'delta({d})' for d in row['deltas'])}: {shown}")
    return EXIT_OK


def _two_inputs(cfg: RunConfig) -> tuple[float, float]:
    if len(cfg.photons.inputs) != 2:
        raise ConfigError("this command needs two input frequencies")
    return cfg.photons.inputs


def _parse_sweep(text: str) -> tuple[str, np.ndarray]:
    try:
        key, rng = text.split("=", 1)
        start, stop, count = rng.split(":")
        values = np.linspace(float(start), float(stop), int(count))
    except ValueError as exc:
        raise UsageError(f"sweep must look like key=start:stop:count, got {text!r}") from exc
    if len(values) == 0:
        raise UsageError("sweep has no points")
    return key, values


def _pole_map(cfg: RunConfig, args) -> poles.PoleMap:
    i0, i1 = _two_inputs(cfg)
    return poles.pole_map(cfg.system, _ground(cfg), i0, i1,
                          conjugate_closure=not args.no_conjugate_closure, variable=args.variable)


def _print_counts(pm: poles.PoleMap, label: str = "") -> None:
    counts = pm.counts()
    if label:
        print(label)
    print(f"{'class':<18}{'count':>6}")
    for kind, n in counts.items():
        print(f"{kind:<18}{n:>6}")
    print(f"{'total':<18}{sum(counts.values()):>6}")


def cmd_poles(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.output)
    if args.sweep is None:
        pm = _pole_map(cfg, args)
        out.write_text(pm.to_csv())
        if args.json:
            Path(args.json).write_text(pm.to_json(indent=2))
        _print_counts(pm)
        return EXIT_OK
    key, values = _parse_sweep(args.sweep)
    base = _config_mapping(cfg)
    for k, v in enumerate(values):
        data = dict(base)
        if key in ("i0", "i1"):
            inputs = list(data["inputs"])
            inputs[int(key[1])] = float(v)
            data["inputs"] = inputs
        else:
            data[key] = float(v)
        pm = _pole_map(parse_config(data), args)
        path = out.with_name(f"{out.stem}_{k:03d}{out.suffix}")
        path.write_text(pm.to_csv())
        _print_counts(pm, f"{path.name}: {key}={_fmt(v)}")
    return EXIT_OK


def _config_mapping(cfg: RunConfig) -> dict:
    data = dict(cfg.system.as_dict())
    data["inputs"] = list(cfg.photons.inputs)
    if cfg.photons.outputs is not None:
        data["outputs"] = list(cfg.photons.outputs)
    data["initial_ground"] = cfg.initial_ground
    return data


def _series_target(cfg: RunConfig, mu, f0) -> tuple[dict, complex, float | None]:
    """Evaluation point, closed-form value and Borel parameter (single photon only)."""
    system, inputs = cfg.system, cfg.photons.inputs
    nu = _ground(cfg)
    if len(inputs) == 1:
        point = {"i": inputs[0]}
        amp = _sectors(cfg)[mu]
        exact = eval_coefficient(amp, amp.terms[0].deltas, {})
        det = inputs[0] - system.omega + system.dtilde(nu) if nu else inputs[0] - system.omega
        x = system.Gamma / det if det else None
        return point, exact, x
    if f0 is None:
        raise UsageError("a two-photon series needs --f0 (or two outputs in the config)")
    i0, i1 = inputs
    exact = closedform.mixing_coefficient(system, nu, mu, i0, i1, f0)
    return {"i0": i0, "i1": i1, "f0": f0}, exact, None


def cmd_series(args) -> int:
    if args.nmax < 2 or args.nmax % 2:
        raise UsageError(f"--nmax must be even and >= 2, got {args.nmax}")
    cfg = load_config(args.config)
    system = cfg.system
    nu = _ground(cfg)
    mu = None if system.is_tls else (args.mu if args.mu is not None else nu)
    if mu is not None and mu not in system.levels:
        raise UsageError(f"--mu must be one of {system.levels}")
    f0 = args.f0
    if f0 is None and cfg.photons.outputs is not None and len(cfg.photons.outputs) == 2:
        f0 = cfg.photons.outputs[0]
    point, exact, x = _series_target(cfg, mu, f0)
    p = len(cfg.photons.inputs)
    report = dyson.partial_sum(args.nmax, p, system, point, nu=nu, mu=mu)

    rows = [{"n": n, "term": _cfmt(t), "partial_sum": _cfmt(s), "rel_err": relative_deviation(s, exact)}
            for n, t, s in zip(report.orders, report.terms, report.sums)]
    result = {
        "p": p,
        "ratio": report.ratio,
        "divergent": report.divergent,
        "converged_at": report.converged_at,
        "estimated_ratio": report.estimated_ratio,
        "closed_form": _cfmt(exact),
        "final_rel_err": relative_deviation(report.value, exact),
        "claim": None,
    }
    if report.divergent:
        if x is None:
            result["borel"] = None
            result["claim"] = "divergent; Borel resummation is implemented for the single-photon series only"
        else:
            value, err = summation.borel_sum_geometric(x)
            # coefficient = delta_mu,nu - 2i x (pi gamma_mu gamma_nu / Gamma) / (1 + i x)
            weight = math.pi * system.gamma(mu or 1) * system.gamma(nu or 1) / system.Gamma
            borel = (1.0 if mu == nu else 0.0) - 2j * x * weight * value
            result["borel"] = {"value": _cfmt(borel), "quadrature_err": err,
                               "rel_err": relative_deviation(borel, exact)}
            result["claim"] = "divergent; Borel value"
    elif len(rows) > 1:
        result["claim"] = "converged" if report.converged_at is not None else "not converged"

    if args.json:
        print(_dump({**result, "orders": rows}))
    else:
        print("n,re_term,im_term,re_sum,im_sum,rel_err")
        for r in rows:
            print(",".join([str(r["n"]), *map(_fmt, r["term"]), *map(_fmt, r["partial_sum"]), _fmt(r["rel_err"])]))
        print(f"# ratio={_fmt(report.ratio)} divergent={report.divergent} "
              f"closed_form={complex(*result['closed_form'])!r}")
        if "borel" in result and result["borel"]:
            b = result["borel"]
            print(f"# borel={complex(*b['value'])!r} rel_err={_fmt(b['rel_err'])}")
        if result["claim"]:
            print(f"# {result['claim']} (final rel_err={_fmt(result['final_rel_err'])})")
    return EXIT_OK


def cmd_spectrum(args) -> int:
    cfg = load_config(args.config)
    i0, i1 = _two_inputs(cfg)
    if args.points < 1 or not args.fmax > args.fmin:
        raise UsageError("empty frequency range")
    nu = _ground(cfg)
    mu = None if cfg.system.is_tls else (args.mu if args.mu is not None else nu)
    grid = np.linspace(args.fmin, args.fmax, args.points)
    pts = closedform.mixing_spectrum(cfg.system, nu, mu, i0, i1, grid)
    with open(args.output, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["f", "abs2", "flag"])
        for pt in pts:
            writer.writerow([_fmt(pt.f), "" if pt.abs2 is None else _fmt(pt.abs2), pt.flag])
    flagged = sum(1 for pt in pts if pt.flag)
    print(f"{len(pts)} points written to {args.output}, {flagged} flagged")
    return EXIT_OK


def _run_check(which: str, seed: int, points: int | None) -> dict:
    kw = {"seed": seed}
    if points is not None:
        kw["points"] = points
    if which == "fan":
        return crosscheck.fan_equivalence(**kw)
    if which == "pg":
        return crosscheck.pg_equivalence(**kw)
    if which == "a8":
        return dyson.fixture_check(**kw)
    return crosscheck.unitarity_check(**kw)


def cmd_check(args) -> int:
    names = ["fan", "pg", "a8", "unitarity"] if args.which == "all" else [args.which]
    reports = []
    for name in names:
        report = _run_check(name, args.seed, args.points)
        reports.append(report)
        status = "PASS" if report["pass"] else "FAIL"
        print(f"{status} {name}: max_rel_dev={report['max_rel_dev']:.3e} points={report['points']}",
              file=sys.stderr)
    print(_dump(reports[0] if len(reports) == 1 else reports))
    return EXIT_OK if all(r["pass"] for r in reports) else EXIT_CHECK_FAILED


def cmd_diagrams(args) -> int:
    try:
        ds = dyson.enumerate_diagrams(args.n, args.p, args.kind, args.unfold_loops)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    print(_dump([d.to_dict() for d in ds]))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wgscatter", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("amp", help="print the canonical amplitude")
    p.add_argument("config")
    p.add_argument("--format", choices=["json", "text"], default="json")
    p.add_argument("--f0", type=float, help="output frequency for the bound-state coefficient")
    p.set_defaults(func=cmd_amp)

    p = sub.add_parser("poles", help="write the pole map as CSV")
    p.add_argument("config")
    p.add_argument("output", help="CSV path")
    p.add_argument("--json", help="also write the JSON mirror here")
    p.add_argument("--variable", choices=["f0", "f1"], default="f0")
    p.add_argument("--no-conjugate-closure", action="store_true")
    p.add_argument("--sweep", metavar="KEY=START:STOP:COUNT",
                   help="one map per value of a config key (or i0/i1), files suffixed _000, _001, ...")
    p.set_defaults(func=cmd_poles)

    p = sub.add_parser("series", help="Dyson partial sums against the closed form")
    p.add_argument("config")
    p.add_argument("--nmax", type=int, default=8)
    p.add_argument("--f0", type=float)
    p.add_argument("--mu", type=int, help="final ground level (Lambda)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_series)

    p = sub.add_parser("spectrum", help="|mixing coefficient|^2 on a uniform grid")
    p.add_argument("config")
    p.add_argument("output", help="CSV path")
    p.add_argument("--fmin", type=float, required=True)
    p.add_argument("--fmax", type=float, required=True)
    p.add_argument("--points", type=int, default=1001)
    p.add_argument("--mu", type=int, help="final ground level (Lambda)")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("check", help="run cross-check suites")
    p.add_argument("which", choices=["fan", "pg", "a8", "unitarity", "all"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--points", type=int)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("diagrams", help="dump the diagrams of one order as JSON")
    p.add_argument("n", type=int)
    p.add_argument("p", type=int, choices=[1, 2])
    p.add_argument("--kind", choices=[TLS, LAMBDA], default=TLS)
    p.add_argument("--unfold-loops", action="store_true")
    p.set_defaults(func=cmd_diagrams)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OnPoleError as exc:
        print(f"on pole: {exc}", file=sys.stderr)
        return EXIT_ON_POLE
    except DistributionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
