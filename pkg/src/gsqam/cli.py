"""Command-line interface: ``gsqam <command> [options]``.

Every command writes its outputs plus ``manifest.json`` into ``--out``.
Exit codes: 0 success, 1 usage, 2 data/parse, 3 model domain,
4 non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .constellation import levels_from_constellation, moments, square_qam, uniform_levels
from .errors import (
    FitError,
    GsqamError,
    InvalidInputError,
    InvalidParameterError,
    ModelDomainError,
    ParseError,
)
from .gmi import DEFAULT_NODES, ChannelSnr, gmi_2d, gmi_monte_carlo
from .io import (
    read_constellation_csv,
    read_json,
    read_levels_csv,
    read_measured_csv,
    write_constellation_csv,
    write_json,
    write_levels_csv,
    write_sweep_csv,
)
from .link import LinkParams, kurtosis_coupled_snr, linear_to_db
from .shaping import (
    DesignPoint,
    OptimizerConfig,
    ShapingMode,
    ShapingProblem,
    design_curve,
    optimize,
)
from .sweep import (
    DEFAULT_POWER_GRID_DBM,
    fit_link_params,
    format_table1,
    reference_links,
    run_sweep,
    table1_report,
)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_DOMAIN = 3
EXIT_NOT_CONVERGED = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _grid(text: str):
    """Parse ``start:stop:step`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0 or stop < start:
                raise ValueError
            n = int(np.floor((stop - start) / step + 1e-9)) + 1
            return [round(start + k * step, 10) for k in range(n)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid grid {text!r}; use start:stop:step or a,b,c") from None


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _tagged(values, flag):
    """Split repeated ``ID=PATH`` options into an ordered dict."""
    out = {}
    for item in values or []:
        if "=" in item:
            key, path = item.split("=", 1)
        else:
            key, path = Path(item).stem, item
        if not key or key in out:
            raise UsageError(f"{flag}: duplicate or empty id {key!r}")
        out[key] = path
    return out


def _write_manifest(out: Path, command: str, config: dict, inputs, outputs):
    manifest = {
        "tool": "gsqam",
        "version": __version__,
        "command": command,
        "config": config,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": sorted(outputs),
    }
    write_json(out / "manifest.json", manifest)


def _config_of(args) -> dict:
    skip = {"func", "command", "out", "config"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def cmd_optimize(args) -> int:
    try:
        mode = ShapingMode.parse(args.mode)
    except InvalidParameterError:
        raise UsageError(f"--mode: expected one of uniform, awgn, nonlinear; got {args.mode!r}") from None
    if args.snr_db is None:
        raise UsageError("--snr-db is required")
    try:
        problem = ShapingProblem.from_db(args.bits, mode, args.snr_db, args.c, args.nodes)
        config = OptimizerConfig(args.restarts, args.seed, args.gtol, args.max_iter)
    except InvalidParameterError as exc:
        raise UsageError(f"--bits/--nodes/--restarts/--max-iter: {exc}") from None
    inputs = []
    init = None
    if args.init:
        init = read_levels_csv(args.init)
        inputs.append(args.init)
    result = optimize(problem, init, config)
    out = args.out
    write_json(out / "result.json", result.to_dict())
    write_levels_csv(out / "levels.csv", result.levels)
    write_constellation_csv(out / "constellation.csv", square_qam(result.levels))
    _write_manifest(out, "optimize", _config_of(args), inputs, ["result.json", "levels.csv", "constellation.csv"])
    print(f"{mode.value}: gmi_4d={result.gmi_4d:.6f} bit/4D-symbol kurtosis={result.kurtosis:.6f} "
          f"converged={result.converged}")
    return EXIT_OK if result.converged else EXIT_NOT_CONVERGED


def _load_levels(path):
    c = read_constellation_csv(path)
    try:
        return c, levels_from_constellation(c)
    except InvalidInputError as exc:
        raise ParseError(f"{path}: {exc}") from None


def cmd_eval(args) -> int:
    if args.snr_db is None and args.link is None:
        raise UsageError("give --snr-db and/or --link")
    c, levels = _load_levels(args.constellation)
    inputs = [args.constellation]
    mom = moments(c)
    report = {
        "constellation": str(args.constellation),
        "moments": {"m2": mom.m2, "m4": mom.m4, "excess_kurtosis": mom.excess_kurtosis},
    }
    outputs = ["eval.json"]
    if args.snr_db is not None:
        snr = ChannelSnr.from_db(args.snr_db)
        report["snr_db"] = args.snr_db
        report["quadrature"] = gmi_2d(levels, snr, args.nodes).to_dict()
        if args.mc:
            est = gmi_monte_carlo(c.scaled(1.0 / np.sqrt(c.mean_power)), snr, args.samples, args.seed, args.shards)
            report["monte_carlo"] = est.to_dict()
        if args.c is not None:
            coupled = kurtosis_coupled_snr(snr, args.c, mom.excess_kurtosis)
            report["coupled"] = {
                "c": args.c,
                "effective_snr_db": coupled.db,
                **gmi_2d(levels, coupled, args.nodes).to_dict(),
            }
    if args.link is not None:
        link = LinkParams.from_dict(read_json(args.link))
        inputs.append(args.link)
        curve = run_sweep(levels, link, args.grid, Path(args.constellation).stem, args.nodes)
        write_sweep_csv(args.out / "eval_sweep.csv", curve)
        outputs.append("eval_sweep.csv")
        report["sweep"] = curve.summary()
    write_json(args.out / "eval.json", report)
    _write_manifest(args.out, "eval", _config_of(args), inputs, outputs)
    print(json.dumps({k: report[k] for k in report if k in ("moments", "quadrature", "monte_carlo")}, indent=2))
    return EXIT_OK


def cmd_sweep(args) -> int:
    constellations = _tagged(args.constellation, "--constellation")
    if not constellations:
        raise UsageError("--constellation: at least one ID=PATH is required")
    links = _tagged(args.link, "--link")
    if not links:
        raise UsageError("--link: a link JSON is required")
    if len(links) == 1 and not any("=" in v for v in args.link):
        links = {cid: next(iter(links.values())) for cid in constellations}
    missing = [cid for cid in constellations if cid not in links]
    if missing:
        raise UsageError(f"--link: no link given for constellation(s) {', '.join(missing)}")
    inputs, outputs, summary = [], [], {}
    for cid, path in constellations.items():
        _, levels = _load_levels(path)
        link = LinkParams.from_dict(read_json(links[cid]))
        inputs += [path, links[cid]]
        try:
            curve = run_sweep(levels, link, args.grid, cid, args.nodes)
        except ModelDomainError as exc:
            raise ModelDomainError(f"constellation {cid!r}: {exc}") from None
        name = f"sweep_{cid}.csv"
        write_sweep_csv(args.out / name, curve)
        outputs.append(name)
        summary[cid] = curve.summary()
        pg = curve.peak_gmi()
        print(f"{cid}: peak gmi_4d={pg.gmi_4d:.4f} at {pg.power_dbm:+.2f} dBm, "
              f"peak snr={curve.peak_snr().snr_db:.3f} dB")
    write_json(args.out / "summary.json", {"grid_dbm": list(args.grid), "constellations": summary})
    outputs.append("summary.json")
    _write_manifest(args.out, "sweep", _config_of(args), sorted(set(map(str, inputs))), outputs)
    return EXIT_OK


def cmd_fit(args) -> int:
    measured = read_measured_csv(args.measured)
    fit = fit_link_params(measured, args.snr_btb_db)
    write_json(args.out / "link.json", fit.link.to_dict())
    write_json(args.out / "fit_report.json", fit.to_dict())
    _write_manifest(args.out, "fit", _config_of(args), [args.measured], ["link.json", "fit_report.json"])
    link = fit.link
    print(f"p_ase={link.p_ase_dbm:.3f} dBm eta_tot={linear_to_db(link.nli.eta1) if link.nli.eta1 > 0 else float('-inf'):.3f} "
          f"dB re 1/W^2 snr_btb={link.snr_btb_db:.3f} dB rms={fit.residual_rms_db:.4f} dB")
    if not fit.identifiable:
        bad = [k for k, ok in fit.diagnostics["identifiable"].items() if not ok]
        print(f"unidentifiable terms: {', '.join(bad)}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


def cmd_calibrate(args) -> int:
    k_uni = moments(square_qam(uniform_levels(4))).excess_kurtosis
    preset = reference_links(k_uni, args.c, args.target_snr_db, not args.no_transceiver)
    outputs = []
    for name, link in preset.links.items():
        write_json(args.out / f"link_{name}.json", link.to_dict())
        outputs.append(f"link_{name}.json")
    write_json(args.out / "link_gaussian.json", preset.gaussian_link.to_dict())
    outputs.append("link_gaussian.json")
    table = format_table1(table1_report(preset.links))
    (args.out / "table1.txt").write_text(table + "\n")
    outputs.append("table1.txt")
    _write_manifest(args.out, "calibrate", _config_of(args), [], outputs)
    print(f"p_ase = {preset.gaussian_link.p_ase_dbm:.4f} dBm, eta1 = {linear_to_db(preset.eta1):.4f} dB re 1/W^2")
    print(table)
    return EXIT_OK


def cmd_design_curve(args) -> int:
    template = ShapingProblem.from_db(args.bits, ShapingMode.AWGN, 18.0, args.c, args.nodes)
    config = OptimizerConfig(args.restarts, args.seed, args.gtol, args.max_iter)
    try:
        curve = design_curve(template, args.grid, config)
    except InvalidParameterError as exc:
        raise UsageError(f"--grid: {exc}") from None
    path = args.out / "design_curve.csv"
    with path.open("w") as fh:
        fh.write(",".join(DesignPoint.COLUMNS) + "\n")
        for p in curve.points:
            fh.write(",".join(format(v, ".17g") for v in p.as_row()) + "\n")
    _write_manifest(args.out, "design-curve", _config_of(args), [], ["design_curve.csv"])
    for p in curve.points:
        print(f"{p.snr_db:6.2f} dB  uniform {p.uniform_4d:.4f}  awgn {p.awgn_tailored_4d:.4f}  "
              f"nonlinear {p.nonlinearity_tailored_4d:.4f}")
    return EXIT_OK


def _add_optimizer_flags(p):
    p.add_argument("--nodes", type=int, default=DEFAULT_NODES, help="Gauss-Hermite nodes")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--gtol", type=float, default=1e-7)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gsqam", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"gsqam {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    parser.commands = sub.choices

    def common(p):
        p.add_argument("--out", type=Path, help="output directory (created if missing)")
        p.add_argument("--config", type=Path, help="JSON file of option defaults")

    p = sub.add_parser("optimize", help="design a shaped constellation")
    p.add_argument("--bits", type=int, default=4, help="bits per dimension")
    p.add_argument("--mode", default="awgn", help="uniform, awgn or nonlinear")
    p.add_argument("--snr-db", type=float, default=None, help="design (Gaussian-reference) SNR")
    p.add_argument("--c", type=float, default=0.55, help="eta2/eta1 for nonlinear mode")
    p.add_argument("--init", type=Path, default=None, help="initial level CSV")
    _add_optimizer_flags(p)
    common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("eval", help="moments and GMI of a constellation file")
    p.add_argument("constellation", nargs="?", type=Path)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--c", type=float, default=None, help="also report kurtosis-coupled GMI")
    p.add_argument("--nodes", type=int, default=DEFAULT_NODES)
    p.add_argument("--mc", action="store_true", help="add a Monte Carlo estimate")
    p.add_argument("--samples", type=int, default=1_000_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--shards", type=int, default=8)
    p.add_argument("--link", type=Path, default=None, help="link JSON for a power sweep")
    p.add_argument("--grid", type=_grid, default=list(DEFAULT_POWER_GRID_DBM), help="power grid in dBm")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="SNR/GMI versus launch power")
    p.add_argument("--constellation", action="append", metavar="ID=CSV")
    p.add_argument("--link", action="append", metavar="[ID=]JSON")
    p.add_argument("--grid", type=_grid, default=list(DEFAULT_POWER_GRID_DBM), help="power grid in dBm")
    p.add_argument("--nodes", type=int, default=DEFAULT_NODES)
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("fit", help="fit link parameters to a measured sweep")
    p.add_argument("measured", nargs="?", type=Path)
    p.add_argument("--snr-btb-db", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("calibrate", help="reference link preset with calibrated ASE power")
    p.add_argument("--c", type=float, default=0.55)
    p.add_argument("--target-snr-db", type=float, default=18.0)
    p.add_argument("--no-transceiver", action="store_true",
                   help="calibrate the Gaussian optimum without transceiver noise")
    common(p)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("design-curve", help="uniform / AWGN / nonlinear GMI over design SNR")
    p.add_argument("--bits", type=int, default=4)
    p.add_argument("--c", type=float, default=0.55)
    p.add_argument("--grid", type=_grid, default=[17.6, 17.8, 18.0, 18.2, 18.4])
    _add_optimizer_flags(p)
    common(p)
    p.set_defaults(func=cmd_design_curve)
    return parser


_REQUIRED_POSITIONAL = {"eval": "constellation", "fit": "measured"}
_PATH_KEYS = {"constellation", "measured", "init", "link", "out"}


def _apply_config(parser, argv, args):
    data = read_json(args.config)
    if not isinstance(data, dict):
        raise UsageError("--config: expected a JSON object")
    sub = parser.commands[args.command]
    known = {a.dest for a in sub._actions} - {"help", "config"}
    for key in data:
        if key.replace("-", "_") not in known:
            raise UsageError(f"--config: unknown key {key!r} for command {args.command}")
    defaults = {}
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest in _PATH_KEYS and isinstance(value, str):
            value = Path(value)
        if dest == "grid" and isinstance(value, str):
            value = _grid(value)
        defaults[dest] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return EXIT_USAGE
        if args.config is not None:
            args = _apply_config(parser, argv, args)
        need = _REQUIRED_POSITIONAL.get(args.command)
        if need and getattr(args, need) is None:
            raise UsageError(f"{args.command}: missing {need} path")
        if args.out is None:
            raise UsageError("--out is required")
        args.out = Path(args.out)
        args.out.mkdir(parents=True, exist_ok=True)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except argparse.ArgumentTypeError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ModelDomainError as exc:
        print(f"model-domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (ParseError, FitError, InvalidInputError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvalidParameterError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GsqamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
