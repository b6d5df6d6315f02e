"""Random instance sampling, singularity guarding and verification reports."""
from __future__ import annotations

import cmath
import enum
import hashlib
import json
import logging
import math
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import gmpy2
from gmpy2 import mpfr

from .catalog import IdentityInstance, evaluate_sides, get_identity, resolve_constraint
from .errors import ConsistencyError, SamplingError, SingularError
from .kernel import NomeFrame, Probe, _theta_closed_p0, _theta_product

log = logging.getLogger(__name__)


class Status(str, enum.Enum):
    PASS = "PASS"
    FAIL = "FAIL"
    SINGULAR_SKIPPED = "SINGULAR_SKIPPED"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs of the random instance sampler.

    Free parameters get modulus uniform in ``modulus_range`` and uniform
    phase. ``p`` is the real number ``p_modulus``; ``q`` has modulus uniform in
    ``q_modulus_range`` and uniform phase.
    """

    seed: int = 0
    modulus_range: tuple = (0.5, 2.0)
    p_modulus: float = 0.2
    q_modulus_range: tuple = (0.5, 0.9)
    max_resamples: int = 200
    singularity_floor: float = 1e-6

    def __post_init__(self):
        lo, hi = self.modulus_range
        if not 0 < lo <= hi:
            raise ValueError("modulus_range needs 0 < lo <= hi")
        qlo, qhi = self.q_modulus_range
        if not 0 < qlo <= qhi:
            raise ValueError("q_modulus_range needs 0 < lo <= hi")
        if not (self.p_modulus == 0 or 0 < self.p_modulus <= 0.9):
            raise ValueError("p_modulus must be 0 or in (0, 0.9]")
        if self.max_resamples < 1:
            raise ValueError("max_resamples must be >= 1")
        if not self.singularity_floor >= 0:
            raise ValueError("singularity_floor must be >= 0")


def _draw(rng: random.Random, lo: float, hi: float) -> complex:
    return cmath.rect(rng.uniform(lo, hi), rng.uniform(0.0, 2 * math.pi))


def draw_frame(config: SamplerConfig, rng: random.Random, precision: int) -> NomeFrame:
    return NomeFrame(config.p_modulus, _draw(rng, *config.q_modulus_range), precision)


def is_singular(instance: IdentityInstance, config: SamplerConfig,
                guard_precision: int = 64) -> bool:
    """Singularity guard.

    Evaluates both sides at low precision while recording every theta
    factor; the instance is singular if some denominator factor vanishes or
    has modulus below ``singularity_floor`` times the geometric mean of all
    recorded factor moduli.
    """
    probe = Probe()
    try:
        evaluate_sides(instance.at_precision(guard_precision), probe=probe)
    except (SingularError, ArithmeticError):
        return True
    if config.singularity_floor == 0:
        return False
    floor = math.log2(config.singularity_floor) + probe.log2_geometric_mean()
    return probe.min_denominator() < floor


def sample_instance(identity, dims: dict, config: SamplerConfig,
                    frame: NomeFrame | None = None, *, precision: int = 256,
                    fixed: dict | None = None) -> IdentityInstance:
    """Draw a constraint-satisfying, guard-passing instance.

    Deterministic given ``config.seed``. When ``frame`` is omitted ``q`` is
    drawn from the same stream before the free parameters. ``fixed`` pins
    some free parameters (they are still subject to the guard).

    Raises
    ------
    SamplingError
        If ``max_resamples`` draws in a row are rejected.
    """
    entry = get_identity(identity)
    dims = entry.validate_dims(dict(dims))
    rng = random.Random(config.seed)
    if frame is None:
        frame = draw_frame(config, rng, precision)
    shape = entry.shape(dims)
    lo, hi = config.modulus_range
    for _ in range(config.max_resamples):
        free = {}
        for name, size in shape.items():
            if size is None:
                free[name] = _draw(rng, lo, hi)
            else:
                free[name] = [_draw(rng, lo, hi) for _ in range(size)]
        free.update(fixed or {})
        try:
            inst = resolve_constraint(entry.id, free, dims, frame, seed=config.seed)
        except (ValueError, ArithmeticError):
            continue
        if not is_singular(inst, config):
            return inst
    raise SamplingError(f"no admissible {entry.id.value} instance for dims {dims} "
                        f"after {config.max_resamples} draws")


# --------------------------------------------------------------------------
# reports


def decimal_string(x, digits: int) -> str:
    """Scientific decimal string with ``digits`` significant digits."""
    if not isinstance(x, mpfr):
        x = mpfr(x)
    if x == 0:
        return "0"
    mant, exp, _ = x.digits(10, digits)
    sign = ""
    if mant.startswith("-"):
        sign, mant = "-", mant[1:]
    body = mant[0] + ("." + mant[1:] if len(mant) > 1 else "")
    return f"{sign}{body}e{exp - 1:+d}"


def complex_json(z, precision_bits: int) -> dict:
    digits = math.ceil(precision_bits * math.log10(2)) + 1
    with gmpy2.context(precision=precision_bits):
        return {"re": decimal_string(z.real, digits), "im": decimal_string(z.imag, digits)}


def residual_string(x) -> str:
    return decimal_string(x, 17) if x is not None else None


@dataclass
class VerificationReport:
    identity: str
    dims: dict
    seed: int | None
    precision_bits: int
    lhs: object
    rhs: object
    abs_residual: object
    rel_residual: object
    terms_lhs: int
    terms_rhs: int
    elapsed_time: float
    status: Status
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status is Status.PASS

    def to_dict(self, timing: bool = True) -> dict:
        def cj(v):
            return None if v is None else complex_json(v, self.precision_bits)
        return {
            "identity": self.identity,
            "dims": {k: list(v) if isinstance(v, tuple) else v for k, v in self.dims.items()},
            "seed": self.seed,
            "precision_bits": self.precision_bits,
            "lhs": cj(self.lhs),
            "rhs": cj(self.rhs),
            "rel_residual": residual_string(self.rel_residual),
            "terms": {"lhs": self.terms_lhs, "rhs": self.terms_rhs},
            "status": self.status.value,
            "elapsed_ms": round(self.elapsed_time * 1000, 3) if timing else None,
        }

    def to_json(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), indent=2)


CSV_COLUMNS = ["identity", "dims", "seed", "precision_bits", "lhs_re", "lhs_im",
               "rhs_re", "rhs_im", "rel_residual", "terms_lhs", "terms_rhs", "status",
               "elapsed_ms"]


def csv_row(report: VerificationReport, timing: bool = True) -> list:
    d = report.to_dict(timing)
    lhs = d["lhs"] or {"re": "", "im": ""}
    rhs = d["rhs"] or {"re": "", "im": ""}
    return [d["identity"], json.dumps(d["dims"], separators=(",", ":")), d["seed"],
            d["precision_bits"], lhs["re"], lhs["im"], rhs["re"], rhs["im"],
            d["rel_residual"] or "", d["terms"]["lhs"], d["terms"]["rhs"], d["status"],
            "" if d["elapsed_ms"] is None else d["elapsed_ms"]]


def tolerance(precision_bits: int):
    return mpfr(2) ** -(precision_bits / 2)


def verify_instance(instance: IdentityInstance, *, incremental: bool = False
                    ) -> VerificationReport:
    """Evaluate both sides and compare them.

    The residual is taken between the working-precision side values;
    ``status`` is PASS iff ``|lhs - rhs| / (|lhs| + |rhs|) < 2^-(precision/2)``.
    A vanishing denominator yields SINGULAR_SKIPPED.
    """
    frame = instance.frame
    start = time.perf_counter()
    try:
        sides = evaluate_sides(instance, incremental=incremental, rounded=False)
    except SingularError as exc:
        return VerificationReport(instance.id.value, instance.dims, instance.seed,
                                  frame.precision, None, None, None, None, 0, 0,
                                  time.perf_counter() - start, Status.SINGULAR_SKIPPED,
                                  str(exc))
    with frame.context():
        diff = abs(sides.lhs - sides.rhs)
        scale = abs(sides.lhs) + abs(sides.rhs)
        rel = diff / scale if scale != 0 else mpfr(0)
        passed = rel < tolerance(frame.precision)
    return VerificationReport(
        instance.id.value, instance.dims, instance.seed, frame.precision,
        frame.round(sides.lhs), frame.round(sides.rhs), mpfr(diff, 64), mpfr(rel, 64),
        sides.terms_lhs, sides.terms_rhs, time.perf_counter() - start,
        Status.PASS if passed else Status.FAIL)


# --------------------------------------------------------------------------
# campaigns


def derive_seed(seed: int, identity, dims: dict, trial: int) -> int:
    """64-bit per-trial seed; stable across processes and Python versions."""
    key = json.dumps([seed, str(identity), sorted((k, list(v) if isinstance(v, tuple) else v)
                                                   for k, v in dims.items()), trial])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")


def _run_trial(task):
    identity, dims, config, precision, perturbation = task
    try:
        inst = sample_instance(identity, dims, config, precision=precision)
    except SamplingError as exc:
        return VerificationReport(str(identity), dict(dims), config.seed, precision,
                                  None, None, None, None, 0, 0, 0.0,
                                  Status.SINGULAR_SKIPPED, str(exc))
    if perturbation:
        inst = inst.perturbed(perturbation)
    return verify_instance(inst)


@dataclass
class CellStats:
    dims: dict
    passed: int = 0
    failed: int = 0
    skipped: int = 0
    worst: object = None

    def to_dict(self) -> dict:
        return {"dims": {k: list(v) if isinstance(v, tuple) else v
                         for k, v in self.dims.items()},
                "pass": self.passed, "fail": self.failed, "skip": self.skipped,
                "worst_residual": residual_string(self.worst)}


@dataclass
class CampaignSummary:
    identity: str
    trials_per_cell: int
    precision_bits: int
    cells: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    worst: object = None
    worst_cell: int | None = None
    worst_trial: int | None = None

    @property
    def passed(self) -> int:
        return sum(c.passed for c in self.cells)

    @property
    def failed(self) -> int:
        return sum(c.failed for c in self.cells)

    @property
    def skipped(self) -> int:
        return sum(c.skipped for c in self.cells)

    def to_dict(self, timing: bool = True, with_reports: bool = True) -> dict:
        out = {
            "identity": self.identity,
            "trials_per_cell": self.trials_per_cell,
            "precision_bits": self.precision_bits,
            "pass": self.passed,
            "fail": self.failed,
            "skip": self.skipped,
            "worst_residual": residual_string(self.worst),
            "worst_cell": self.worst_cell,
            "worst_trial": self.worst_trial,
            "cells": [c.to_dict() for c in self.cells],
        }
        if with_reports:
            out["reports"] = [r.to_dict(timing) for r in self.reports]
        return out


def fuzz_campaign(identity, dims_grid, trials_per_cell: int, config: SamplerConfig, *,
                  precision: int = 256, workers: int = 1,
                  perturbation: float = 0.0) -> CampaignSummary:
    """Verify ``trials_per_cell`` random instances for every dims in ``dims_grid``.

    Trial seeds come from :func:`derive_seed`, so results do not depend on
    ``workers``. Sampling failures count as skips.
    """
    if trials_per_cell < 1:
        raise ValueError("trials_per_cell must be >= 1")
    entry = get_identity(identity)
    grid = [entry.validate_dims(dict(d)) for d in dims_grid]
    tasks = []
    for dims in grid:
        for trial in range(trials_per_cell):
            cfg = replace(config, seed=derive_seed(config.seed, entry.id.value, dims, trial))
            tasks.append((entry.id.value, dims, cfg, precision, perturbation))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(_run_trial, tasks, chunksize=4))
    else:
        reports = [_run_trial(t) for t in tasks]

    summary = CampaignSummary(entry.id.value, trials_per_cell, precision, reports=reports)
    for ci, dims in enumerate(grid):
        cell = CellStats(dims)
        for ti in range(trials_per_cell):
            rep = reports[ci * trials_per_cell + ti]
            if rep.status is Status.PASS:
                cell.passed += 1
            elif rep.status is Status.FAIL:
                cell.failed += 1
            else:
                cell.skipped += 1
                continue
            if cell.worst is None or rep.rel_residual > cell.worst:
                cell.worst = rep.rel_residual
            if summary.worst is None or rep.rel_residual > summary.worst:
                summary.worst, summary.worst_cell, summary.worst_trial = \
                    rep.rel_residual, ci, ti
        summary.cells.append(cell)
    return summary


# --------------------------------------------------------------------------
# degeneration and precision studies


def degeneration_check_p0(identity, dims: dict, config: SamplerConfig, *,
                          precision: int = 256) -> VerificationReport:
    """Verify an instance in the basic (p = 0) regime.

    Every theta argument the evaluation touches is first recomputed through
    the generic truncated product and through ``1 - x``; the two must agree
    bit for bit.
    """
    inst = sample_instance(identity, dims, replace(config, p_modulus=0.0),
                           precision=precision)
    frame = inst.frame
    probe = Probe()
    evaluate_sides(inst, probe=probe)
    with frame.context():
        for x in probe.arguments:
            generic = _theta_product(x, frame)
            closed = _theta_closed_p0(x)
            if generic != closed or generic.precision != closed.precision:
                raise ConsistencyError(f"theta paths disagree at p = 0 for x = {x}")
    log.debug("p=0 theta paths agree on %d arguments", len(probe.arguments))
    return verify_instance(inst)


@dataclass(frozen=True)
class EscalationRow:
    precision_bits: int
    rel_residual: object
    log2_gain: float | None
    ok: bool


def precision_escalation(instance: IdentityInstance, precisions) -> list[EscalationRow]:
    """Re-verify the same free parameters at each precision.

    Row ``i`` is ``ok`` when the residual dropped by at least
    ``2^((precision_i - precision_{i-1}) / 2)`` relative to row ``i - 1``;
    ``log2_gain`` is the observed drop in bits (``inf`` if it reached 0).
    """
    precisions = list(precisions)
    if len(precisions) < 2:
        raise ValueError("precision escalation needs at least two precisions")
    rows = []
    prev = None
    for bits in precisions:
        rep = verify_instance(instance.at_precision(bits))
        res = rep.rel_residual
        if prev is None or res is None or prev[1] is None:
            rows.append(EscalationRow(bits, res, None, True))
        else:
            pbits, pres = prev
            if res == 0:
                gain = math.inf if pres > 0 else 0.0
            elif pres == 0:
                gain = -math.inf
            else:
                gain = float(gmpy2.log2(pres) - gmpy2.log2(res))
            needed = (bits - pbits) / 2
            rows.append(EscalationRow(bits, res, gain, gain >= needed or pres == res == 0))
        prev = (bits, res)
    return rows
