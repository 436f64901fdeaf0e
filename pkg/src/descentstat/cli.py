"""Command-line front end: counting, densities, sampling, verification suites, experiments.

Exit codes: 0 on success (all checks PASS), 1 if a check FAILs, 2 on usage
or parse errors.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Sequence

from . import analysis
from .combinatorics import alternating_composition, lambda_b, parse_composition
from .errors import InvalidInput, InvalidModel, ResourceLimit
from .reports import DEFAULT_PRECISION, SCHEMA_VERSION, decimal_str, dumps, rows_to_csv, write_text
from .sampler import (count_class, embed_batch, gibbs_sample, make_rng, sample_permutations)
from .sawtooth import conditional_density, marginal, model_from_composition

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

# flag defaults; a config file may override them, explicit flags win
DEFAULTS = {
    "grid": None,
    "seeds": 16,
    "samples": None,
    "out": None,
    "format": "csv",
    "n_max": None,
    "no_timestamp": False,
    "precision": DEFAULT_PRECISION,
}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    """Validated settings for one invocation."""

    subcommand: str
    specs: list[str] = field(default_factory=list)
    grid: int | None = None
    seeds: int = 16
    samples: int | None = None
    out: str | None = None
    format: str = "csv"
    n_max: int | None = None
    no_timestamp: bool = False
    precision: int = DEFAULT_PRECISION

    def validate(self) -> "RunConfig":
        if self.grid is not None and self.grid < 1:
            raise UsageError("--grid must be positive")
        if self.seeds < 1:
            raise UsageError("--seeds must be positive")
        if self.samples is not None and self.samples < 1:
            raise UsageError("--samples must be positive")
        if self.format not in ("csv", "json"):
            raise UsageError("--format must be csv or json")
        if self.out is not None and self.out == "":
            raise UsageError("empty output path")
        if self.precision < 1:
            raise UsageError("--precision must be positive")
        return self


def read_config(path: str) -> dict:
    """Parse a ``key = value`` file; ``#`` starts a comment."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in DEFAULTS:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def _coerce(key: str, value):
    if value is None:
        return None
    if key == "no_timestamp":
        if isinstance(value, bool):
            return value
        return str(value).lower() in ("1", "true", "yes", "on")
    if key in ("grid", "seeds", "samples", "n_max", "precision"):
        try:
            return int(value)
        except (TypeError, ValueError):
            raise UsageError(f"{key} must be an integer, got {value!r}") from None
    return value


def resolve_config(args: argparse.Namespace) -> RunConfig:
    from_file = read_config(args.config) if args.config else {}
    values = {}
    for key, default in DEFAULTS.items():
        given = getattr(args, key, None)
        if key == "no_timestamp" and given is False:
            given = None
        if given is None:
            given = from_file.get(key, default)
        values[key] = _coerce(key, given)
    specs = getattr(args, "spec", None)
    specs = [specs] if isinstance(specs, str) else list(specs or [])
    return RunConfig(args.command, specs, **values).validate()


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _emit(text: str, cfg: RunConfig) -> None:
    if cfg.out:
        write_text(cfg.out, text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _stamp(cfg: RunConfig) -> dict:
    if cfg.no_timestamp:
        return {}
    return {"timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")}


def _clock(cfg: RunConfig, seconds: float):
    # wall-clock times are dropped with --no-timestamp so reruns are byte-identical
    return "" if cfg.no_timestamp else f"{seconds:.3f}"


# -- count -------------------------------------------------------------------------


def cmd_count(cfg: RunConfig, args) -> int:
    for spec in cfg.specs:
        c = parse_composition(spec)
        print(count_class(c))
    return EXIT_OK


# -- density -----------------------------------------------------------------------


def _parse_given(items: Sequence[str]) -> dict:
    given = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"--given expects PARTICLE=VALUE, got {item!r}")
        name, value = item.split("=", 1)
        try:
            given[name.strip()] = Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise UsageError(f"bad rational value {value!r}") from None
    return given


def cmd_density(cfg: RunConfig, args) -> int:
    c = parse_composition(cfg.specs[0])
    m = model_from_composition(c)
    given = _parse_given(args.given or [])
    report = conditional_density(m, args.target, given) if given else marginal(m, args.target)
    k = cfg.grid or 100
    text = report.to_json(k, cfg.precision) if cfg.format == "json" else report.to_csv(k, cfg.precision)
    _emit(text, cfg)
    return EXIT_OK


# -- sample ------------------------------------------------------------------------


def cmd_sample(cfg: RunConfig, args) -> int:
    c = parse_composition(cfg.specs[0])
    size = cfg.samples or 10
    seed = args.seed
    if args.gibbs:
        m = model_from_composition(c)
        z = gibbs_sample(m, args.sweeps, seed=seed, chains=size)
        header = [m.particle_name(i) for i in range(m.n_particles)]
        rows = [[decimal_str(Fraction(float(v)), cfg.precision) for v in row] for row in z]
    else:
        rng = make_rng(seed)
        perms = sample_permutations(c, size, rng)
        header = [f"sigma{i}" for i in range(1, c.n + 1)]
        rows = perms.tolist()
        if args.embed:
            x = embed_batch(perms, rng)
            header += [f"x{i}" for i in range(1, c.n + 1)]
            rows = [r + [repr(float(v)) for v in xr] for r, xr in zip(rows, x)]
    if cfg.format == "json":
        _emit(dumps({"schema": SCHEMA_VERSION, "composition": str(c), "seed": seed,
                     "columns": header, "rows": rows, **_stamp(cfg)}), cfg)
    else:
        _emit(rows_to_csv(header, rows), cfg)
    return EXIT_OK


# -- verify ------------------------------------------------------------------------


def _suites(cfg: RunConfig) -> dict[str, Callable[[], list]]:
    g = cfg.grid
    n = cfg.n_max
    return {
        "voldes": lambda: [analysis.counting_check(n or 9)],
        "partition": lambda: [analysis.partition_symmetry_check(n or 12)],
        "andre": lambda: [analysis.alternating_asymptotic_check(n or 14)],
        "envelope": lambda: [analysis.envelope_check(n or 8, g or 100)],
        "density-bound": lambda: [analysis.density_bound_suite(n or 8, g or 200)],
        "monotonicity": lambda: [analysis.monotonicity_check(n or 7, g or 200)],
        "closed-form": lambda: [analysis.closed_form_suite(range(2, (n or 8) + 1), g or 20)],
        "decay": lambda: [analysis.decay_check(tuple(range(6, (n or 20) + 1, 2)), g or 40)],
        "uniformity": lambda: [analysis.uniformity_check(seeds=cfg.seeds)],
        "embedding": lambda: [analysis.beta_embedding_check(samples=cfg.samples or 10 ** 5)],
        "lp": lambda: [analysis.lp_decorrelation_check(n or 60, cfg.samples or 10 ** 6, cfg.seeds)],
        "large-run": lambda: [analysis.large_run_bound_check(lambda_b(b), k=g or 40)
                              for b in range(3, 9)],
        "positivity": lambda: [analysis.positivity_spot_check(samples=cfg.samples or 200_000)],
    }


QUICK_SUITES = ("voldes", "partition", "andre", "closed-form")


def cmd_verify(cfg: RunConfig, args) -> int:
    suites = _suites(cfg)
    names = list(suites) if args.suite == "all" else [args.suite]
    if args.suite == "quick":
        names = list(QUICK_SUITES)
    unknown = [s for s in names if s not in suites]
    if unknown:
        raise UsageError(f"unknown suite {unknown[0]!r}; choose from {', '.join(sorted(suites))}, all, quick")
    results = []
    for name in names:
        for r in suites[name]():
            results.append(r)
            print(f"{r.status:4s} {name}: observed={_short(r.observed)} bound={_short(r.bound)}",
                  file=sys.stderr)
    ok = analysis.summarize(results)
    doc = {"schema": SCHEMA_VERSION, "suites": names, "status": "PASS" if ok else "FAIL",
           "reports": [_report_dict(cfg, r) for r in results], **_stamp(cfg)}
    if cfg.format == "csv":
        rows = [[r.name, r.status, _short(r.observed), _short(r.bound), _clock(cfg, r.seconds)]
                for r in results]
        _emit(rows_to_csv(["check", "status", "observed", "bound", "seconds"], rows), cfg)
    else:
        _emit(dumps(doc), cfg)
    return EXIT_OK if ok else EXIT_FAIL


def _report_dict(cfg: RunConfig, r) -> dict:
    d = r.to_dict()
    if cfg.no_timestamp:
        d.pop("seconds")
        d["details"] = {k: v for k, v in d["details"].items() if k != "seconds"}
    return d


def _short(x) -> str:
    if isinstance(x, Fraction):
        return decimal_str(x)
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


# -- experiment --------------------------------------------------------------------


def cmd_experiment(cfg: RunConfig, args) -> int:
    k = cfg.grid or 40
    name = args.name
    if name == "decay":
        sizes = args.sizes if args.sizes is not None else list(range(6, 21, 2))
        if not sizes:
            raise UsageError("empty size list")
        header = ["n", "sup_gap", "cdf_gap", "seconds"]
        rows = [[r.metadata["particles"], f"{r.sup_gap:.12g}", f"{r.cdf_gap:.12g}",
                 _clock(cfg, r.metadata["seconds"])]
                for r in analysis.decay_experiment(sizes, k)]
    elif name == "lambda-b":
        bs = args.sizes if args.sizes is not None else list(range(2, 11))
        if not bs:
            raise UsageError("empty b list")
        header = ["b", "sup_gap", "cdf_gap"]
        rows = []
        for b in bs:
            r = analysis.independence_gap(lambda_b(b), k)
            rows.append([b, f"{r.sup_gap:.12g}", f"{r.cdf_gap:.12g}"])
    elif name == "lp":
        gaps = args.gaps if args.gaps is not None else [2, 5, 10, 20]
        if not gaps:
            raise UsageError("empty gap list")
        res = analysis.lp_gap_experiment(cfg.n_max or 60, gaps, cfg.samples or 10 ** 6,
                                         tuple(range(cfg.seeds)))
        header = ["seed"] + [f"gap{g}" for g in gaps]
        rows = [[s] + [f"{res[g][s]:.12g}" for g in gaps] for s in range(cfg.seeds)]
    elif name == "truncation":
        size = cfg.n_max or 16
        sizes = args.sizes if args.sizes is not None else [4, 8, 12]
        if not sizes:
            raise UsageError("empty size list")
        c = alternating_composition(size)
        header = ["n", "gap"]
        rows = [[n, decimal_str(analysis.truncation_gap(c, n, k))] for n in sizes]
    else:
        raise UsageError(f"unknown experiment {name!r}")
    if cfg.format == "json":
        _emit(dumps({"schema": SCHEMA_VERSION, "experiment": name, "columns": header,
                     "rows": rows, **_stamp(cfg)}), cfg)
    else:
        _emit(rows_to_csv(header, rows), cfg)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--grid", type=int, help="grid resolution k (points j/k)")
    p.add_argument("--seeds", type=int, help="number of seeds (default 16)")
    p.add_argument("--samples", type=int, help="sample budget")
    p.add_argument("--out", help="output file (default stdout)")
    p.add_argument("--format", choices=["csv", "json"], help="output format (default csv)")
    p.add_argument("--n-max", dest="n_max", type=int, help="largest size for suites")
    p.add_argument("--precision", type=int, help="significant digits for decimals (default 12)")
    p.add_argument("--no-timestamp", dest="no_timestamp", action="store_true", default=None,
                   help="omit the timestamp field from reports")
    p.add_argument("--config", help="key=value file mirroring these flags")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="descentstat",
        description="Descent classes of permutations and their sawtooth particle models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("count", help="number of permutations with a descent set")
    p.add_argument("spec", nargs="+", help='composition "3,2,4,1", descent set "{3,5,9}@10" or "runs:2,5,2"')
    _common(p)

    p = sub.add_parser("density", help="exact density table of one particle")
    p.add_argument("spec")
    p.add_argument("--target", default="XI", help="particle id: XI, XF, X2, Y1, P3 (default XI)")
    p.add_argument("--given", action="append", metavar="PARTICLE=VALUE",
                   help="pin a particle at a rational value (repeatable)")
    _common(p)

    p = sub.add_parser("sample", help="uniform permutations of a class (or Gibbs draws)")
    p.add_argument("spec")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--embed", action="store_true", help="also emit embedded positions in [0,1]")
    p.add_argument("--gibbs", action="store_true", help="sample the particle model by Gibbs sweeps")
    p.add_argument("--sweeps", type=int, default=100)
    _common(p)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", help="suite name, 'quick' or 'all'")
    _common(p)

    p = sub.add_parser("experiment", help="emit data curves without assertions")
    p.add_argument("name", choices=["decay", "lambda-b", "lp", "truncation"])
    p.add_argument("--sizes", type=_int_list, help="comma-separated sizes (or b values)")
    p.add_argument("--gaps", type=_int_list, help="comma-separated position gaps")
    _common(p)
    return parser


COMMANDS = {"count": cmd_count, "density": cmd_density, "sample": cmd_sample,
            "verify": cmd_verify, "experiment": cmd_experiment}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg, args)
    except (UsageError, InvalidInput, InvalidModel, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimit as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
