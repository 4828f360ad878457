"""Command-line batch runner.

Subcommands:

* ``run`` - evaluate one observable over a theta grid with one engine,
* ``extrapolate`` - fit ``b exp(-a/chi)`` to PEPO results per theta,
* ``compare`` - absolute errors of result files against a reference file,
* ``lattice-info`` - describe a lattice.

Angles are given in units of pi: ``--theta 0:0.5:17`` is 17 points from 0 to
pi/2, ``--theta 0.25,0.5`` a list; a trailing ``rad`` (``0.6rad``) means
radians. Settings from ``--config file.json`` are overridden by flags.
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
import time
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import UnfitError, error_report, fit_chi_extrapolation
from .lattice import CircuitSpec, Lattice, build_ibm127, build_patch, extract_lightcone, load_lattice
from .oracle import DEFAULT_QUBIT_CAP, statevector_expectation
from .pauli import (
    DEFAULT_MAX_TERMS,
    CoeffThreshold,
    MaxOrder,
    MaxTerms,
    NoTruncation,
    back_propagate,
    parse_observable,
    relabel,
    zero_state_expectation,
)
from .pepo import close_and_contract, evolve, init_pepo
from .results import read_results, rows_to_csv, write_results
from .tensor import DEFAULT_MEM_CAP

METHODS = ("pepo", "cet", "oracle")

EXIT_ENGINE_ERROR = 1
EXIT_RESOURCE_ERROR = 2
EXIT_USAGE_ERROR = 3


@dataclass
class RunConfig:
    lattice: str = "ibm127"
    theta: str = "0.5"
    steps: int = 0
    extra_rx: bool = False
    observable: str = "Z62"
    method: str = "cet"
    chi: int = 8
    eps: float = 0.0
    trunc_order: int | None = None
    trunc_terms: int | None = None
    trunc_coeff: float | None = None
    lightcone: bool = False
    output: str | None = None
    format: str = "csv"
    workers: int = 1
    mem_cap: str = str(DEFAULT_MEM_CAP)
    qubit_cap: int = DEFAULT_QUBIT_CAP
    max_terms: int = DEFAULT_MAX_TERMS
    seed: int | None = None  # reserved
    thetas: list[float] = field(default_factory=list, repr=False)

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.format not in ("csv", "json"):
            raise ValueError("format must be csv or json")
        truncs = [x for x in (self.trunc_order, self.trunc_terms, self.trunc_coeff) if x is not None]
        if len(truncs) > 1:
            raise ValueError("give at most one of --trunc-order, --trunc-terms, --trunc-coeff")
        self.thetas = parse_thetas(self.theta)
        if not all(math.isfinite(t) for t in self.thetas):
            raise ValueError("theta values must be finite")
        if self.steps < 0 or self.chi < 1 or self.workers < 1:
            raise ValueError("need steps >= 0, chi >= 1, workers >= 1")


def parse_thetas(text: str) -> list[float]:
    """Theta list in radians from ``start:stop:count`` or ``a,b,...`` (units of pi)."""
    text = str(text).strip()

    def one(tok: str) -> float:
        tok = tok.strip()
        if tok.endswith("rad"):
            return float(tok[:-3])
        return float(tok) * math.pi

    if ":" in text:
        start, stop, count = text.split(":")
        n = int(count)
        if n < 1:
            raise ValueError("grid count must be >= 1")
        return [float(v) * math.pi for v in np.linspace(float(start), float(stop), n)]
    values = [one(tok) for tok in text.split(",") if tok.strip()]
    if not values:
        raise ValueError("no theta values given")
    return values


def parse_bytes(text: str | int) -> int:
    m = re.fullmatch(r"\s*([\d.]+)\s*([KMGT]?)(?:i?B)?\s*", str(text), flags=re.I)
    if not m:
        raise ValueError(f"bad memory size {text!r}")
    scale = {"": 1, "K": 2**10, "M": 2**20, "G": 2**30, "T": 2**40}[m.group(2).upper()]
    return int(float(m.group(1)) * scale)


def resolve_lattice(source: str) -> Lattice:
    if source == "ibm127":
        return build_ibm127()
    m = re.fullmatch(r"patch:(\d+)x(\d+)", source)
    if m:
        return build_patch(int(m.group(1)), int(m.group(2)))
    return load_lattice(source)


def policy_label(cfg: RunConfig) -> tuple[object, str]:
    if cfg.trunc_order is not None:
        return MaxOrder(cfg.trunc_order), f"order={cfg.trunc_order}"
    if cfg.trunc_terms is not None:
        return MaxTerms(cfg.trunc_terms), f"terms={cfg.trunc_terms}"
    if cfg.trunc_coeff is not None:
        return CoeffThreshold(cfg.trunc_coeff), f"coeff={cfg.trunc_coeff:.17g}"
    return NoTruncation(), "exact"


def param_label(cfg: RunConfig) -> str:
    if cfg.method == "pepo":
        return f"chi={cfg.chi};eps={cfg.eps:.17g}"
    if cfg.method == "cet":
        return policy_label(cfg)[1]
    return ""


def evaluate_point(cfg: RunConfig, theta: float) -> dict:
    """One result row for one angle."""
    lattice = resolve_lattice(cfg.lattice)
    obs = parse_observable(cfg.observable)
    if cfg.lightcone:
        lattice, mapping = extract_lightcone(lattice, sorted(obs.support()), cfg.steps)
        obs = relabel(obs, mapping)
    circuit = CircuitSpec(theta, cfg.steps, cfg.extra_rx)
    row: dict = {
        "theta": theta,
        "method": cfg.method,
        "param": param_label(cfg),
        "observable": cfg.observable,
        "steps": cfg.steps,
        "extra_rx": cfg.extra_rx,
    }
    t0 = time.perf_counter()
    if cfg.method == "cet":
        result = back_propagate(obs, circuit, lattice, policy_label(cfg)[0], max_terms=cfg.max_terms)
        row["value"] = zero_state_expectation(result)
        row["num_terms"] = len(result)
    elif cfg.method == "pepo":
        pepo, report = evolve(init_pepo(lattice, obs), circuit, cfg.chi, cfg.eps)
        row["value"] = close_and_contract(pepo, mem_cap=parse_bytes(cfg.mem_cap))
        row["discarded_weight"] = report.total_discarded
    else:
        row["value"] = statevector_expectation(lattice, circuit, obs, qubit_cap=cfg.qubit_cap)
    row["runtime_s"] = time.perf_counter() - t0
    return row


def run(cfg: RunConfig) -> list[dict]:
    """Evaluate every theta of the config; rows come back in theta order."""
    cfg.validate()
    if cfg.workers == 1:
        return [evaluate_point(cfg, th) for th in cfg.thetas]
    with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
        return list(pool.map(evaluate_point, [cfg] * len(cfg.thetas), cfg.thetas))


def provenance(cfg: RunConfig, wall: float) -> dict:
    params = {k: v for k, v in asdict(cfg).items() if k != "thetas"}
    return {"engine": "heavyhex_pepo", "version": __version__, "parameters": params, "wall_clock_s": wall}


# -- argument handling -----------------------------------------------------


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file with run settings (flags take precedence)")
    p.add_argument("--lattice", help="ibm127 | patch:RxC | path to lattice JSON")
    p.add_argument("--theta", help="grid start:stop:count or list a,b,... in units of pi ('0.6rad' for radians)")
    p.add_argument("--steps", type=int)
    p.add_argument("--extra-rx", action="store_const", const=True, default=None)
    p.add_argument("--observable", help="library name (Z62, W10, W17, W17tilde) or 'X1,2;Y3;Z4'")
    p.add_argument("--method", choices=METHODS)
    p.add_argument("--chi", type=int)
    p.add_argument("--eps", type=float)
    p.add_argument("--trunc-order", type=int)
    p.add_argument("--trunc-terms", type=int)
    p.add_argument("--trunc-coeff", type=float)
    p.add_argument("--lightcone", action="store_const", const=True, default=None,
                   help="restrict the lattice to the observable's light cone first")
    p.add_argument("--output", help="output file (default: CSV to stdout)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--workers", type=int)
    p.add_argument("--mem-cap", help="byte cap per tensor intermediate, e.g. 4G")
    p.add_argument("--qubit-cap", type=int)
    p.add_argument("--max-terms", type=int)
    p.add_argument("--seed", type=int, help="reserved")


def build_config(args: argparse.Namespace) -> RunConfig:
    settings: dict = {}
    if args.config:
        settings.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
    known = set(RunConfig.__dataclass_fields__) - {"thetas"}
    for name in known:
        value = getattr(args, name, None)
        if value is not None:
            settings[name] = value
    unknown = set(settings) - known
    if unknown:
        raise ValueError(f"unknown config keys {sorted(unknown)}")
    return RunConfig(**settings)


def _error(kind: str, exc: BaseException, code: int) -> int:
    record = {"error": kind, "type": type(exc).__name__, "message": str(exc)}
    print(json.dumps(record), file=sys.stderr)
    return code


def cmd_run(args: argparse.Namespace) -> int:
    try:
        cfg = build_config(args)
        cfg.validate()
    except (ValueError, OSError) as exc:
        return _error("usage", exc, EXIT_USAGE_ERROR)
    t0 = time.perf_counter()
    try:
        rows = run(cfg)
    except MemoryError as exc:
        return _error("resource", exc, EXIT_RESOURCE_ERROR)
    except Exception as exc:  # engine failures become a machine-readable record
        return _error("engine", exc, EXIT_ENGINE_ERROR)
    meta = provenance(cfg, time.perf_counter() - t0)
    if cfg.output:
        write_results(rows, cfg.output, cfg.format, meta)
    elif cfg.format == "json":
        print(json.dumps({"rows": rows, "provenance": meta}, indent=2))
    else:
        sys.stdout.write(rows_to_csv(rows))
    return 0


def _chi_of(param: str | None) -> int | None:
    m = re.search(r"chi=(\d+)", param or "")
    return int(m.group(1)) if m else None


def cmd_extrapolate(args: argparse.Namespace) -> int:
    groups: dict[tuple, list[tuple[int, float]]] = defaultdict(list)
    for path in args.inputs:
        for row in read_results(path):
            chi = _chi_of(row.get("param"))
            if row["method"] != "pepo" or chi is None:
                continue
            if args.min_chi is not None and chi < args.min_chi:
                continue
            key = (row["theta"], row["observable"], row["steps"], row["extra_rx"])
            groups[key].append((chi, float(row["value"])))
    lines = ["theta,observable,steps,extra_rx,chis,a,b,residual,status"]
    for key in sorted(groups, key=lambda k: (k[1], k[2], k[3], k[0])):
        pts = sorted(groups[key])
        chis = ";".join(str(c) for c, _ in pts)
        try:
            fit = fit_chi_extrapolation(pts)
            a, b, res, status = f"{fit.a:.17g}", f"{fit.b:.17g}", f"{fit.residual:.17g}", "fit"
        except UnfitError:
            a, b, res, status = "", f"{pts[-1][1]:.17g}", "", "largest_chi"
        theta, obs, steps, extra = key
        lines.append(f"{theta:.17g},{obs},{steps},{int(extra)},{chis},{a},{b},{res},{status}")
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    try:
        report = error_report(read_results(args.reference), [read_results(p) for p in args.candidates])
    except KeyError as exc:
        return _error("key_mismatch", exc, EXIT_USAGE_ERROR)
    if args.output:
        Path(args.output).write_text(report.to_csv(), encoding="utf-8")
    sys.stdout.write(report.summary_csv())
    return 0


def cmd_lattice_info(args: argparse.Namespace) -> int:
    lattice = resolve_lattice(args.lattice)
    if args.json:
        print(json.dumps(lattice.to_json()))
        return 0
    degrees = defaultdict(int)
    for s in range(lattice.num_sites):
        degrees[lattice.degree(s)] += 1
    print(f"sites: {lattice.num_sites}")
    print(f"edges: {len(lattice.edges)}")
    print(f"layers: {len(lattice.layers)} (sizes {[len(l) for l in lattice.layers]})")
    print("degrees: " + ", ".join(f"{d}:{n}" for d, n in sorted(degrees.items())))
    if args.site is not None:
        print(f"neighbors({args.site}): {list(lattice.neighbors(args.site))}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heavyhex-pepo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="evaluate an observable over a theta grid")
    _add_run_args(p_run)
    p_run.set_defaults(func=cmd_run)

    p_ext = sub.add_parser("extrapolate", help="fit b*exp(-a/chi) to PEPO results")
    p_ext.add_argument("inputs", nargs="+")
    p_ext.add_argument("--min-chi", type=int)
    p_ext.add_argument("--output")
    p_ext.set_defaults(func=cmd_extrapolate)

    p_cmp = sub.add_parser("compare", help="absolute errors against a reference results file")
    p_cmp.add_argument("reference")
    p_cmp.add_argument("candidates", nargs="+")
    p_cmp.add_argument("--output", help="per-point error CSV")
    p_cmp.set_defaults(func=cmd_compare)

    p_lat = sub.add_parser("lattice-info", help="describe a lattice")
    p_lat.add_argument("--lattice", default="ibm127")
    p_lat.add_argument("--site", type=int)
    p_lat.add_argument("--json", action="store_true")
    p_lat.set_defaults(func=cmd_lattice_info)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
