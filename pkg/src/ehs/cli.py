"""Command-line front end.

Exit codes: 0 all checks passed (singular skips allowed), 1 some check
failed, 2 usage error, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import os
import sys
import time
from dataclasses import dataclass, field, replace

import gmpy2

from .catalog import IDENTITY_NAMES, catalog_list, evaluate_sides, get_identity
from .errors import SamplingError
from .harness import (
    CSV_COLUMNS,
    SamplerConfig,
    Status,
    VerificationReport,
    csv_row,
    fuzz_campaign,
    residual_string,
    sample_instance,
    verify_instance,
)

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3
DEFAULT_PRECISION = 256
DIM_FLAGS = ("n", "m", "N", "k")


@dataclass
class CliConfig:
    command: str
    identity: str | None = None
    dims: dict = field(default_factory=dict)
    dims_grid: list = field(default_factory=list)
    p_mod: float = 0.2
    q_mod: float | None = None
    seed: int = 0
    precision: int = DEFAULT_PRECISION
    trials: int = 10
    workers: int = 1
    output: str = "human"
    out_path: str | None = None
    perturb: float = 0.0
    timing: bool = True

    def sampler(self) -> SamplerConfig:
        kw = {"seed": self.seed, "p_modulus": self.p_mod}
        if self.q_mod is not None:
            kw["q_modulus_range"] = (self.q_mod, self.q_mod)
        return SamplerConfig(**kw)


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(v) for v in text.split(",") if v.strip() != ""]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError(f"expected non-negative integers, got {text!r}")
    return vals


def _default_precision() -> int:
    env = os.environ.get("EHS_PRECISION_BITS")
    if env:
        try:
            return int(env)
        except ValueError:
            pass
    return DEFAULT_PRECISION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ehs", allow_abbrev=False,
        description="Evaluate and verify elliptic hypergeometric identities on A_n.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_list = sub.add_parser("list", help="list the registered identities", allow_abbrev=False)
    p_list.add_argument("--output", choices=("human", "json", "csv"), default="human")
    p_list.add_argument("--out", dest="out_path")

    for name, helptext in (("verify", "verify one random instance"),
                           ("fuzz", "run a randomized campaign over a dims grid"),
                           ("bench", "time the reference and incremental paths")):
        p = sub.add_parser(name, help=helptext, allow_abbrev=False)
        p.add_argument("identity", choices=IDENTITY_NAMES, metavar="IDENTITY",
                       help="one of: " + ", ".join(IDENTITY_NAMES))
        for flag in DIM_FLAGS:
            p.add_argument(f"--{flag}", type=_int_list, default=None, dest=f"dim_{flag}",
                           metavar=flag.upper() if flag != "N" else "LENGTH",
                           help=f"dimension {flag} (comma list allowed for fuzz)")
        p.add_argument("--mvec", type=_int_list, action="append", default=None,
                       metavar="M1,M2,...",
                       help="box bounds m_1,...,m_n (repeatable for fuzz)")
        p.add_argument("--p-mod", type=float, default=0.2, dest="p_mod",
                       help="modulus of the elliptic nome p, in [0, 1) (default 0.2)")
        p.add_argument("--q-mod", type=float, default=None, dest="q_mod",
                       help="fix |q| instead of sampling it from (0.5, 0.9)")
        p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
        p.add_argument("--precision", type=int, default=_default_precision(),
                       help="working precision in bits, >= 64 (default EHS_PRECISION_BITS or 256)")
        p.add_argument("--trials", type=int, default=10 if name == "fuzz" else 1,
                       help="trials per dims cell")
        p.add_argument("--workers", type=int, default=1, help="worker processes for fuzz")
        p.add_argument("--output", choices=("human", "json", "csv"), default="human")
        p.add_argument("--out", dest="out_path", help="write output to this file")
        p.add_argument("--reproducible", action="store_true",
                       help="emit elapsed_ms as null so reports are byte-identical")
        p.add_argument("--perturb", type=float, default=0.0, help=argparse.SUPPRESS)
    return parser


def parse_args(argv) -> CliConfig:
    """Parse and validate ``argv``; usage errors exit with status 2."""
    parser = build_parser()
    ns = parser.parse_args(argv)
    if ns.command == "list":
        return CliConfig("list", output=ns.output, out_path=ns.out_path)

    entry = get_identity(ns.identity)
    allowed = set(entry.dims) | set(entry.optional_dims)
    given = {}
    for flag in DIM_FLAGS:
        vals = getattr(ns, f"dim_{flag}")
        if vals is None:
            continue
        if flag not in allowed:
            parser.error(f"argument --{flag}: not a dimension of {entry.id.value}")
        given[flag] = vals
    if ns.mvec is not None:
        if "mvec" not in allowed:
            parser.error(f"argument --mvec: not a dimension of {entry.id.value}")
        given["mvec"] = [tuple(v) for v in ns.mvec]

    if ns.command != "fuzz":
        for key, vals in given.items():
            if len(vals) != 1:
                parser.error(f"argument --{key}: {ns.command} takes a single value")
    axes = {key: [v] for key, v in entry.default_dims.items()}
    axes.update(given)
    keys = list(axes)
    grid = [dict(zip(keys, combo)) for combo in itertools.product(*(axes[k] for k in keys))]
    try:
        grid = [entry.validate_dims(d) for d in grid]
    except ValueError as exc:
        parser.error(f"argument --{_culprit(entry, grid, given)}: {exc}")

    if ns.precision < 64:
        parser.error("argument --precision: must be >= 64")
    if not (ns.p_mod == 0 or 0 < ns.p_mod <= 0.9):
        parser.error("argument --p-mod: must be 0 or in (0, 0.9]")
    if ns.q_mod is not None and not ns.q_mod > 0:
        parser.error("argument --q-mod: must be > 0")
    if ns.trials < 1:
        parser.error("argument --trials: must be >= 1")
    if ns.workers < 1:
        parser.error("argument --workers: must be >= 1")
    return CliConfig(
        ns.command, entry.id.value, dims=grid[0], dims_grid=grid, p_mod=ns.p_mod,
        q_mod=ns.q_mod, seed=ns.seed, precision=ns.precision, trials=ns.trials,
        workers=ns.workers, output=ns.output, out_path=ns.out_path, perturb=ns.perturb,
        timing=not ns.reproducible)


def _culprit(entry, grid, given):
    # the user-supplied dim whose reset to the default makes the cell valid
    for dims in grid:
        try:
            entry.validate_dims(dims)
            continue
        except ValueError:
            pass
        for key in reversed(list(given)):
            trial = dict(dims)
            if key in entry.default_dims:
                trial[key] = entry.default_dims[key]
            else:
                trial.pop(key)
            try:
                entry.validate_dims(trial)
                return key
            except ValueError:
                continue
    return next(iter(given), "dims")


# --------------------------------------------------------------------------
# rendering


def _dims_text(dims):
    return " ".join(f"{k}={','.join(map(str, v)) if isinstance(v, tuple) else v}"
                    for k, v in dims.items())


def _human_report(rep: VerificationReport, timing: bool) -> str:
    d = rep.to_dict(timing)

    def cx(v):
        return "-" if v is None else f"{v['re']} {'+' if not v['im'].startswith('-') else '-'} " \
                                     f"{v['im'].lstrip('-')}i"
    lines = [
        f"identity      {d['identity']}",
        f"dims          {_dims_text(rep.dims)}",
        f"seed          {d['seed']}",
        f"precision     {d['precision_bits']} bits",
        f"lhs           {cx(d['lhs'])}",
        f"rhs           {cx(d['rhs'])}",
        f"rel_residual  {d['rel_residual']}",
        f"terms         {d['terms']['lhs']} / {d['terms']['rhs']}",
        f"status        {d['status']}",
    ]
    if d["elapsed_ms"] is not None:
        lines.append(f"elapsed       {d['elapsed_ms']} ms")
    if rep.detail:
        lines.append(f"detail        {rep.detail}")
    return "\n".join(lines) + "\n"


def _csv(reports, timing) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rep in reports:
        writer.writerow(csv_row(rep, timing))
    return buf.getvalue()


def _write(text: str, out_path: str | None) -> int:
    try:
        if out_path:
            with open(out_path, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
            sys.stdout.flush()
    except OSError as exc:
        print(f"ehs: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


# --------------------------------------------------------------------------
# commands


def _cmd_list(cfg: CliConfig):
    entries = catalog_list()
    if cfg.output == "json":
        return json.dumps(entries, indent=2) + "\n", EXIT_OK
    if cfg.output == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["identity", "dims", "free", "bound", "constraint"])
        for e in entries:
            writer.writerow([e["identity"], ",".join(e["dims"]), e["free"], e["bound"],
                             e["constraint"]])
        return buf.getvalue(), EXIT_OK
    width = max(len(e["identity"]) for e in entries)
    lines = [f"{e['identity']:<{width}}  [{', '.join(e['dims']) or '-'}]  {e['constraint']}"
             for e in entries]
    return "\n".join(lines) + "\n", EXIT_OK


def _verify_one(cfg: CliConfig, dims: dict) -> VerificationReport:
    try:
        inst = sample_instance(cfg.identity, dims, cfg.sampler(), precision=cfg.precision)
    except SamplingError as exc:
        return VerificationReport(cfg.identity, dims, cfg.seed, cfg.precision, None, None,
                                  None, None, 0, 0, 0.0, Status.SINGULAR_SKIPPED, str(exc))
    if cfg.perturb:
        inst = inst.perturbed(cfg.perturb)
    return verify_instance(inst)


def _cmd_verify(cfg: CliConfig):
    rep = _verify_one(cfg, cfg.dims)
    if cfg.output == "json":
        text = rep.to_json(cfg.timing) + "\n"
    elif cfg.output == "csv":
        text = _csv([rep], cfg.timing)
    else:
        text = _human_report(rep, cfg.timing)
    return text, EXIT_FAIL if rep.status is Status.FAIL else EXIT_OK


def _cmd_fuzz(cfg: CliConfig):
    summary = fuzz_campaign(cfg.identity, cfg.dims_grid, cfg.trials, cfg.sampler(),
                            precision=cfg.precision, workers=cfg.workers,
                            perturbation=cfg.perturb)
    if cfg.output == "json":
        text = json.dumps(summary.to_dict(cfg.timing), indent=2) + "\n"
    elif cfg.output == "csv":
        text = _csv(summary.reports, cfg.timing)
    else:
        lines = [f"identity {summary.identity}: {summary.passed} PASS, "
                 f"{summary.failed} FAIL, {summary.skipped} SKIP "
                 f"({summary.trials_per_cell} trials x {len(summary.cells)} cells, "
                 f"{summary.precision_bits} bits)"]
        for cell in summary.cells:
            lines.append(f"  {_dims_text(cell.dims):<24} pass={cell.passed} "
                         f"fail={cell.failed} skip={cell.skipped} "
                         f"worst={residual_string(cell.worst)}")
        lines.append(f"worst rel_residual {residual_string(summary.worst)}")
        text = "\n".join(lines) + "\n"
    return text, EXIT_FAIL if summary.failed else EXIT_OK


def _cmd_bench(cfg: CliConfig):
    rows = []
    ok = True
    for dims in cfg.dims_grid:
        for trial in range(cfg.trials):
            sampler = replace(cfg.sampler(), seed=cfg.seed + trial)
            try:
                inst = sample_instance(cfg.identity, dims, sampler, precision=cfg.precision)
            except SamplingError:
                continue
            t0 = time.perf_counter()
            ref = evaluate_sides(inst, rounded=False)
            t1 = time.perf_counter()
            inc = evaluate_sides(inst, incremental=True, rounded=False)
            t2 = time.perf_counter()
            with inst.frame.context():
                dev = max(abs(ref.lhs - inc.lhs) / abs(ref.lhs) if ref.lhs != 0 else 0,
                          abs(ref.rhs - inc.rhs) / abs(ref.rhs) if ref.rhs != 0 else 0)
                agree = dev < gmpy2.mpfr(2) ** -(cfg.precision - 24)
            ok &= bool(agree)
            rows.append({"dims": {k: list(v) if isinstance(v, tuple) else v
                                  for k, v in dims.items()},
                         "seed": sampler.seed, "terms": ref.terms,
                         "reference_ms": round((t1 - t0) * 1000, 3),
                         "incremental_ms": round((t2 - t1) * 1000, 3),
                         "path_deviation": residual_string(dev),
                         "agree": bool(agree)})
    if cfg.output == "json":
        text = json.dumps({"identity": cfg.identity, "precision_bits": cfg.precision,
                           "runs": rows}, indent=2) + "\n"
    else:
        lines = [f"{'dims':<24} {'seed':>6} {'terms':>6} {'reference_ms':>13} "
                 f"{'incremental_ms':>15}  agree"]
        for r in rows:
            dims_txt = " ".join(f"{k}={v}" for k, v in r["dims"].items())
            lines.append(f"{dims_txt:<24} {r['seed']:>6} {r['terms']:>6} "
                         f"{r['reference_ms']:>13} {r['incremental_ms']:>15}  {r['agree']}")
        text = "\n".join(lines) + "\n"
    return text, EXIT_OK if ok else EXIT_FAIL


_COMMANDS = {"list": _cmd_list, "verify": _cmd_verify, "fuzz": _cmd_fuzz, "bench": _cmd_bench}


def run(cfg: CliConfig) -> int:
    text, code = _COMMANDS[cfg.command](cfg)
    io_code = _write(text, cfg.out_path)
    return io_code if io_code != EXIT_OK else code


def main(argv=None) -> int:
    try:
        cfg = parse_args(sys.argv[1:] if argv is None else argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
