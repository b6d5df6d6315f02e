"""Registry of the verifiable identities.

Each entry knows the shape of its free parameters, how to solve its
multiplicative constraint for the designated bound parameter, and how to
evaluate its two sides with :mod:`ehs.series`. Identity names are stable
lowercase strings and double as the CLI vocabulary.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from math import comb
from typing import Callable

import gmpy2
from gmpy2 import mpc

from .kernel import Evaluator, NomeFrame, Probe
from .series import (
    C3Params,
    KajiharaParams,
    Tally,
    c3_side,
    delta_lemma_lhs,
    delta_lemma_rhs,
    e_series,
    fc_transform,
    jackson_rhs,
    kajihara_sum,
    sm_rhs,
)


class IdentityId(str, enum.Enum):
    theta_inversion = "theta_inversion"
    poch_split = "poch_split"
    poch_reverse = "poch_reverse"
    poch_invert = "poch_invert"
    ft_transform = "ft_transform"
    iterated_bailey = "iterated_bailey"
    an_jackson = "an_jackson"
    kajihara = "kajihara"
    sm_rewrite = "sm_rewrite"
    fc_family = "fc_family"
    cs_transform = "cs_transform"
    c3_transform = "c3_transform"
    delta_lemma = "delta_lemma"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class Sides:
    lhs: object
    rhs: object
    terms_lhs: int
    terms_rhs: int

    @property
    def terms(self) -> int:
        return self.terms_lhs + self.terms_rhs


@dataclass(frozen=True)
class Identity:
    id: IdentityId
    title: str
    dims: tuple
    free: str
    bound: str
    constraint: str
    default_dims: dict
    shape: Callable
    solve: Callable
    check: Callable
    sides: Callable
    derived: tuple = ()
    dims_check: Callable | None = None
    # dims counting variables (as opposed to lengths), which must be >= 1
    rank_dims: tuple = ()
    optional_dims: tuple = ()

    def signature(self) -> dict:
        return {
            "identity": self.id.value,
            "title": self.title,
            "dims": list(self.dims),
            "free": self.free,
            "bound": self.bound,
            "derived": list(self.derived),
            "constraint": self.constraint,
        }

    def validate_dims(self, dims: dict) -> dict:
        missing = [d for d in self.dims if d not in dims]
        if missing:
            raise ValueError(f"{self.id.value} needs dims {missing}")
        unknown = [d for d in dims if d not in self.dims + self.optional_dims]
        if unknown:
            raise ValueError(f"{self.id.value} does not take dims {unknown}")
        out = {}
        for key, val in dims.items():
            if key == "mvec":
                val = tuple(int(v) for v in val)
                if not val or any(v < 0 for v in val):
                    raise ValueError("mvec must be a non-empty list of non-negative integers")
            else:
                if not isinstance(val, int) or val < 0:
                    raise ValueError(f"dimension {key} must be a non-negative integer")
            out[key] = val
        for key in self.rank_dims:
            if out[key] < 1:
                raise ValueError(f"dimension {key} must be >= 1")
        if self.dims_check is not None:
            self.dims_check(out)
        return out


# --------------------------------------------------------------------------
# helpers working at the frame's working precision (caller holds the context)


def _prod(values):
    r = mpc(1)
    for v in values:
        r *= v
    return r


def _count(fn, *args, **kwargs):
    t = Tally()
    v = fn(*args, counter=t, **kwargs)
    return v, t.terms


def _theta_sides(P, dims, frame, opts):
    ev = Evaluator(frame, opts.get("probe"))
    x = P["x"]
    lhs = ev.theta(P["x_inv"])
    rhs = -ev.theta(x, True, {"factor": "theta(x)"}) / x
    return Sides(lhs, rhs, 1, 1)


def _split_sides(P, dims, frame, opts):
    ev = Evaluator(frame, opts.get("probe"))
    n, k = dims["n"], dims["k"]
    return Sides(ev.poch(P["a"], n + k), ev.poch(P["a"], n) * ev.poch(P["aqn"], k), 1, 1)


def _reverse_sides(P, dims, frame, opts):
    ev = Evaluator(frame, opts.get("probe"))
    n, k = dims["n"], dims["k"]
    r = P["r"]
    rhs = (-1) ** k * frame.qpow(comb(k, 2)) * r ** k * ev.poch(P["a"], n)
    rhs /= ev.poch(r, k, True, {"factor": "(q^(1-n)/a)_k"})
    return Sides(ev.poch(P["a"], n - k), rhs, 1, 1)


def _invert_sides(P, dims, frame, opts):
    ev = Evaluator(frame, opts.get("probe"))
    n = dims["n"]
    rhs = (-1) ** n * frame.qpow(comb(n, 2)) * P["a"] ** n * ev.poch(P["r"], n)
    return Sides(ev.poch(P["a"], n), rhs, 1, 1)


def _scalars(P, names):
    return [P[k] for k in names]


def _ft_sides(P, dims, frame, opts):
    N = dims["N"]
    a, b, c, d, e, f, g, lam = _scalars(P, "abcdefg") + [P["lambda"]]
    q = frame.q
    kw = _kw(opts)
    lhs, tl = _count(e_series, a, b, c, d, e, f, g, N, frame, **kw)
    ev = Evaluator(frame, opts.get("probe"))
    pref = ev.ratio([a * q, a * q / (e * f), lam * q / e, lam * q / f],
                    [a * q / e, a * q / f, lam * q, lam * q / (e * f)], N,
                    {"factor": "ft prefactor"})
    rhs, tr = _count(e_series, lam, lam * b / a, lam * c / a, lam * d / a, e, f, g,
                     N, frame, **kw)
    return Sides(lhs, pref * rhs, tl, tr)


def _sb_sides(P, dims, frame, opts):
    N = dims["N"]
    a, b, c, d, e, f, g = _scalars(P, "abcdefg")
    q = frame.q
    aq = a * q
    kw = _kw(opts)
    lhs, tl = _count(e_series, a, b, c, d, e, f, g, N, frame, **kw)
    ev = Evaluator(frame, opts.get("probe"))
    pref = g ** N * ev.ratio(
        [aq / (c * g), aq / (d * g), aq / (e * g), aq / (f * g), aq, b],
        [aq / c, aq / d, aq / e, aq / f, aq / g, b / g], N, {"factor": "sb prefactor"})
    qN = frame.qpow(-N)
    rhs, tr = _count(e_series, g * qN / b, g * qN / a, aq / (b * c), aq / (b * d),
                     aq / (b * e), aq / (b * f), g, N, frame, **kw)
    return Sides(lhs, pref * rhs, tl, tr)


def _kw(opts):
    return {"probe": opts.get("probe"), "incremental": opts.get("incremental", False),
            "raw": True}


def _jackson_sides(P, dims, frame, opts):
    kp = KajiharaParams(P["z"], [P["w"]], P["a"], dims["N"])
    lhs, tl = _count(kajihara_sum, kp, frame, **_kw(opts))
    rhs, tr = _count(jackson_rhs, P["z"], P["a"], dims["N"], frame, **_kw(opts))
    return Sides(lhs, rhs, tl, tr)


def kajihara_params(P, dims) -> KajiharaParams:
    return KajiharaParams(P["z"], list(P["w"]) + [P["w_m"]], P["a"], dims["N"])


def _kajihara_sides(P, dims, frame, opts):
    kp = kajihara_params(P, dims)
    lhs, tl = _count(kajihara_sum, kp, frame, **_kw(opts))
    rhs, tr = _count(kajihara_sum, kp.swapped(), frame, **_kw(opts))
    return Sides(lhs, rhs, tl, tr)


def _sm_sides(P, dims, frame, opts):
    kp = KajiharaParams(P["z"], [P["w1"], P["w2"]], P["a"], dims["N"])
    lhs, tl = _count(kajihara_sum, kp, frame, **_kw(opts))
    rhs, tr = _count(sm_rhs, P["z"], P["a"], P["w1"], P["w2"], dims["N"], frame,
                     **_kw(opts))
    return Sides(lhs, rhs, tl, tr)


def _fc_sides(P, dims, frame, opts):
    N, m = dims["N"], dims["m"]
    w = [P["w1"], P["w2"]]
    lhs, tl = _count(kajihara_sum, KajiharaParams(P["z"], w, P["a"], N), frame, **_kw(opts))
    x, b, pref = fc_transform(P["z"], P["a"], P["w1"], P["w2"], N, m, frame,
                              probe=opts.get("probe"), raw=True)
    rhs, tr = _count(kajihara_sum, KajiharaParams(x, w, b, N), frame, **_kw(opts))
    return Sides(lhs, pref * rhs, tl, tr)


def cs_as_fc(P):
    """Rename cs parameters into the fc/sm convention:
    ``(a_{n+1}, a_{n+2}, w1, w2) = (b, c, d, e)``."""
    return list(P["a"]) + [P["b"], P["c"]], P["d"], P["e"]


def _cs_sides(P, dims, frame, opts):
    N = dims["N"]
    a, w1, w2 = cs_as_fc(P)
    lhs, tl = _count(kajihara_sum, KajiharaParams(P["z"], [w1, w2], a, N), frame,
                     **_kw(opts))
    x, b, pref = fc_transform(P["z"], a, w1, w2, N, 0, frame, probe=opts.get("probe"),
                              raw=True)
    rhs, tr = _count(kajihara_sum, KajiharaParams(x, [w1, w2], b, N), frame, **_kw(opts))
    return Sides(lhs, pref * rhs, tl, tr)


def c3_params(P, dims) -> C3Params:
    return C3Params(P["z"], P["a"], P["b"], P["c"], P["d"], P["e"], P["f"], P["g"],
                    dims["mvec"])


def _c3_sides(P, dims, frame, opts):
    cp = c3_params(P, dims)
    lhs, tl = _count(c3_side, cp, "left", frame, **_kw(opts))
    rhs, tr = _count(c3_side, cp, "right", frame, **_kw(opts))
    return Sides(lhs, rhs, tl, tr)


def _lemma_sides(P, dims, frame, opts):
    m = dims["mvec"]
    shifts = [frame.qpow(-mk) for mk in m[:-1]] + [P["t"]]
    lhs, tl = _count(delta_lemma_lhs, P["z"], m, frame, shifts=shifts,
                     probe=opts.get("probe"), raw=True)
    return Sides(lhs, delta_lemma_rhs(m, frame, raw=True), tl, 1)


# --------------------------------------------------------------------------
# constraint solvers: each returns the bound parameter (and derived symbols)


def _ft_solve(F, dims, frame):
    a, b, c, d, e, f = _scalars(F, "abcdef")
    g = a ** 3 * frame.qpow(dims["N"] + 2) / (b * c * d * e * f)
    return {"g": g}


def _ft_derive(P, dims, frame):
    return {"lambda": frame.q * P["a"] ** 2 / (P["b"] * P["c"] * P["d"])}


def _ft_check(P, dims, frame):
    return (_prod(_scalars(P, "bcdefg")), P["a"] ** 3 * frame.qpow(dims["N"] + 2))


def _c3_solve(F, dims, frame):
    a, b, c, d, e, f = _scalars(F, "abcdef")
    return {"g": a ** 3 * frame.qpow(sum(dims["mvec"]) + 2) / (b * c * d * e * f)}


def _c3_check(P, dims, frame):
    return (_prod(_scalars(P, "bcdefg")),
            P["a"] ** 3 * frame.qpow(sum(dims["mvec"]) + 2))


def _c3_dims(dims):
    if "N" in dims and dims["N"] < sum(dims["mvec"]):
        raise ValueError("the b = q^-N specialisation needs N >= |m|")


def _c3_shape(dims):
    shape = {"z": len(dims["mvec"]), "a": None}
    if "N" not in dims:
        shape["b"] = None
    shape.update(c=None, d=None, e=None, f=None)
    return shape


def _c3_fixed(dims, frame):
    return {"b": frame.qpow(-dims["N"])} if "N" in dims else {}


def _reverse_dims(dims):
    if dims["k"] > dims["n"]:
        raise ValueError("poch_reverse needs k <= n")


def _fc_dims(dims):
    if not 0 <= dims["m"] <= dims["n"]:
        raise ValueError("fc_family needs 0 <= m <= n")


def _scalar_shape(names):
    return lambda dims: {k: None for k in names}


_CATALOG = [
    Identity(
        IdentityId.theta_inversion, "theta(1/x) = -theta(x)/x",
        dims=(), free="x", bound="x_inv", constraint="x * x_inv = 1",
        default_dims={},
        shape=_scalar_shape("x"),
        solve=lambda F, dims, fr: {"x_inv": 1 / F["x"]},
        check=lambda P, dims, fr: (P["x"] * P["x_inv"], mpc(1)),
        sides=_theta_sides),
    Identity(
        IdentityId.poch_split, "(a)_{n+k} = (a)_n (aq^n)_k",
        dims=("n", "k"), free="a", bound="aqn", constraint="aqn = a q^n",
        default_dims={"n": 3, "k": 2},
        shape=_scalar_shape("a"),
        solve=lambda F, dims, fr: {"aqn": F["a"] * fr.qpow(dims["n"])},
        check=lambda P, dims, fr: (P["aqn"], P["a"] * fr.qpow(dims["n"])),
        sides=_split_sides),
    Identity(
        IdentityId.poch_reverse,
        "(a)_{n-k} = (-1)^k q^C(k,2) r^k (a)_n / (r)_k, r = q^(1-n)/a",
        dims=("n", "k"), free="a", bound="r", constraint="a r = q^(1-n)",
        default_dims={"n": 4, "k": 2},
        shape=_scalar_shape("a"),
        solve=lambda F, dims, fr: {"r": fr.qpow(1 - dims["n"]) / F["a"]},
        check=lambda P, dims, fr: (P["a"] * P["r"], fr.qpow(1 - dims["n"])),
        sides=_reverse_sides, dims_check=_reverse_dims),
    Identity(
        IdentityId.poch_invert, "(a)_n = (-1)^n q^C(n,2) a^n (r)_n, r = q^(1-n)/a",
        dims=("n",), free="a", bound="r", constraint="a r = q^(1-n)",
        default_dims={"n": 4},
        shape=_scalar_shape("a"),
        solve=lambda F, dims, fr: {"r": fr.qpow(1 - dims["n"]) / F["a"]},
        check=lambda P, dims, fr: (P["a"] * P["r"], fr.qpow(1 - dims["n"])),
        sides=_invert_sides),
    Identity(
        IdentityId.ft_transform,
        "E(a;q^-N,b,c,d,e,f,g) = prefactor * E(lambda;q^-N,lambda b/a,lambda c/a,lambda d/a,e,f,g)",
        dims=("N",), free="a, b, c, d, e, f", bound="g",
        constraint="bcdefg = a^3 q^(N+2)", derived=("lambda = q a^2 / (bcd)",),
        default_dims={"N": 3},
        shape=_scalar_shape("abcdef"),
        solve=_ft_solve, check=_ft_check, sides=_ft_sides),
    Identity(
        IdentityId.iterated_bailey,
        "E(a;q^-N,b,...,g) = g^N prefactor * E(g q^-N/b; q^-N, g q^-N/a, aq/bc, aq/bd, aq/be, aq/bf, g)",
        dims=("N",), free="a, b, c, d, e, f", bound="g",
        constraint="bcdefg = a^3 q^(N+2)",
        default_dims={"N": 3},
        shape=_scalar_shape("abcdef"),
        solve=_ft_solve, check=_ft_check, sides=_sb_sides),
    Identity(
        IdentityId.an_jackson, "A_n elliptic Jackson summation (m = 1 simplex sum)",
        dims=("n", "N"), free="z_1..z_n, a_1..a_{n+1}", bound="w",
        constraint="w = z_1...z_n a_1...a_{n+1}",
        default_dims={"n": 2, "N": 3},
        shape=lambda dims: {"z": dims["n"], "a": dims["n"] + 1},
        solve=lambda F, dims, fr: {"w": _prod(F["z"]) * _prod(F["a"])},
        check=lambda P, dims, fr: (P["w"], _prod(P["z"]) * _prod(P["a"])),
        sides=_jackson_sides, rank_dims=("n",)),
    Identity(
        IdentityId.kajihara,
        "n-dimensional simplex sum = m-dimensional simplex sum with (z, w, a) -> (w, z, 1/a)",
        dims=("n", "m", "N"), free="z_1..z_n, a_1..a_{m+n}, w_1..w_{m-1}", bound="w_m",
        constraint="w_1...w_m = z_1...z_n a_1...a_{m+n}",
        default_dims={"n": 2, "m": 2, "N": 3},
        shape=lambda dims: {"z": dims["n"], "a": dims["n"] + dims["m"], "w": dims["m"] - 1},
        solve=lambda F, dims, fr: {"w_m": _prod(F["z"]) * _prod(F["a"]) / _prod(F["w"])},
        check=lambda P, dims, fr: (_prod(P["w"]) * P["w_m"], _prod(P["z"]) * _prod(P["a"])),
        sides=_kajihara_sides, rank_dims=("n", "m")),
    Identity(
        IdentityId.sm_rewrite, "m = 2 simplex sum = prefactor * single very-well-poised sum",
        dims=("n", "N"), free="z_1..z_n, a_1..a_{n+2}, w1", bound="w2",
        constraint="w1 w2 = z_1...z_n a_1...a_{n+2}",
        default_dims={"n": 2, "N": 3},
        shape=lambda dims: {"z": dims["n"], "a": dims["n"] + 2, "w1": None},
        solve=lambda F, dims, fr: {"w2": _prod(F["z"]) * _prod(F["a"]) / F["w1"]},
        check=lambda P, dims, fr: (P["w1"] * P["w2"], _prod(P["z"]) * _prod(P["a"])),
        sides=_sm_sides, rank_dims=("n",)),
    Identity(
        IdentityId.fc_family,
        "m = 2 simplex sum = prefactor(m) * same sum at substituted (x, b), 0 <= m <= n",
        dims=("n", "m", "N"), free="z_1..z_n, a_1..a_{n+2}, w1", bound="w2",
        constraint="w1 w2 = z_1...z_n a_1...a_{n+2}",
        default_dims={"n": 3, "m": 1, "N": 3},
        shape=lambda dims: {"z": dims["n"], "a": dims["n"] + 2, "w1": None},
        solve=lambda F, dims, fr: {"w2": _prod(F["z"]) * _prod(F["a"]) / F["w1"]},
        check=lambda P, dims, fr: (P["w1"] * P["w2"], _prod(P["z"]) * _prod(P["a"])),
        sides=_fc_sides, dims_check=_fc_dims, rank_dims=("n",)),
    Identity(
        IdentityId.cs_transform, "simplex sum in z = prefactor * simplex sum in a (m = 0 member of fc)",
        dims=("n", "N"), free="z_1..z_n, a_1..a_n, b, c, d", bound="e",
        constraint="de = a_1...a_n b c z_1...z_n",
        default_dims={"n": 2, "N": 3},
        shape=lambda dims: {"z": dims["n"], "a": dims["n"], "b": None, "c": None, "d": None},
        solve=lambda F, dims, fr: {
            "e": _prod(F["a"]) * F["b"] * F["c"] * _prod(F["z"]) / F["d"]},
        check=lambda P, dims, fr: (P["d"] * P["e"],
                                   _prod(P["a"]) * P["b"] * P["c"] * _prod(P["z"])),
        sides=_cs_sides, rank_dims=("n",)),
    Identity(
        IdentityId.c3_transform, "hyperrectangle transformation over 0 <= y_k <= m_k",
        dims=("mvec",), free="z_1..z_n, a, b, c, d, e, f (b = q^-N when N is given)",
        bound="g", constraint="a^3 q^(|m|+2) = bcdefg",
        default_dims={"mvec": (1, 1)},
        shape=_c3_shape, solve=_c3_solve, check=_c3_check, sides=_c3_sides,
        dims_check=_c3_dims, optional_dims=("N",)),
    Identity(
        IdentityId.delta_lemma,
        "Delta(1/z)/Delta(q^-m/z) prod (q^-m_k z_j/z_k)_{m_k}/(q^(1-m_k+m_j) z_j/z_k)_{m_k} = (-1)^|m| q^(-|m|-C(|m|,2))",
        dims=("mvec",), free="z_1..z_n", bound="t", constraint="t = q^(-m_n)",
        default_dims={"mvec": (1, 2)},
        shape=lambda dims: {"z": len(dims["mvec"])},
        solve=lambda F, dims, fr: {"t": fr.qpow(-dims["mvec"][-1])},
        check=lambda P, dims, fr: (P["t"], fr.qpow(-dims["mvec"][-1])),
        sides=_lemma_sides),
]

CATALOG: dict[IdentityId, Identity] = {entry.id: entry for entry in _CATALOG}
IDENTITY_NAMES = tuple(i.value for i in IdentityId)


def get_identity(name) -> Identity:
    try:
        return CATALOG[IdentityId(name)]
    except ValueError:
        raise KeyError(f"unknown identity {name!r}; choose from {', '.join(IDENTITY_NAMES)}") \
            from None


def catalog_list() -> list[dict]:
    """Signatures of all registered identities, in catalog order."""
    return [entry.signature() for entry in _CATALOG]


# --------------------------------------------------------------------------
# instances


@dataclass(frozen=True)
class IdentityInstance:
    """An identity with fully resolved parameters on a fixed frame.

    ``free`` keeps the caller's free parameters untouched so that the same
    instance can be rebuilt at another precision; ``params`` holds free,
    bound and derived parameters at working precision. ``perturbation`` is a
    relative change applied to the bound parameter after resolution (a test
    hook: any nonzero value should break the identity).
    """

    id: IdentityId
    dims: dict
    free: dict
    params: dict = field(repr=False)
    frame: NomeFrame
    seed: int | None = None
    perturbation: float = 0.0

    @property
    def identity(self) -> Identity:
        return CATALOG[self.id]

    def constraint_residual(self):
        """``|constraint_lhs / constraint_rhs - 1|`` at working precision."""
        with self.frame.context():
            lhs, rhs = self.identity.check(self.params, self.dims, self.frame)
            return abs(lhs / rhs - 1)

    def at_precision(self, bits: int) -> "IdentityInstance":
        return resolve_constraint(self.id, self.free, self.dims,
                                  self.frame.with_precision(bits), seed=self.seed,
                                  perturbation=self.perturbation)

    def perturbed(self, rel: float) -> "IdentityInstance":
        return resolve_constraint(self.id, self.free, self.dims, self.frame,
                                  seed=self.seed, perturbation=rel)


def _convert(frame, value):
    if isinstance(value, (list, tuple)):
        return [frame.value(v) for v in value]
    return frame.value(value)


def resolve_constraint(identity, free_params: dict, dims: dict, frame: NomeFrame, *,
                       seed: int | None = None, perturbation: float = 0.0
                       ) -> IdentityInstance:
    """Solve the identity's constraint for its bound parameter.

    Raises ``ValueError`` when the free parameters have the wrong shape, are
    zero, or make the constraint unsolvable (division by zero), and when the
    resolved instance misses the constraint by more than 2^-(precision-8).
    """
    entry = get_identity(identity)
    dims = entry.validate_dims(dict(dims))
    shape = entry.shape(dims)
    if set(free_params) != set(shape):
        raise ValueError(f"{entry.id.value} expects free parameters {sorted(shape)}, "
                         f"got {sorted(free_params)}")
    for name, size in shape.items():
        val = free_params[name]
        if size is None and isinstance(val, (list, tuple)):
            raise ValueError(f"parameter {name} must be a scalar")
        if size is not None and (not isinstance(val, (list, tuple)) or len(val) != size):
            raise ValueError(f"parameter {name} must be a list of length {size}")
    with frame.context():
        params = {k: _convert(frame, v) for k, v in free_params.items()}
        for name, val in params.items():
            vals = val if isinstance(val, list) else [val]
            if any(v == 0 for v in vals):
                raise ValueError(f"free parameter {name} must be nonzero")
        if entry.id is IdentityId.c3_transform:
            params.update(_c3_fixed(dims, frame))
        try:
            bound = entry.solve(params, dims, frame)
        except ZeroDivisionError as exc:
            raise ValueError(f"constraint of {entry.id.value} is unresolvable: {exc}") from None
        params.update(bound)
        lhs, rhs = entry.check(params, dims, frame)
        residual = abs(lhs / rhs - 1)
        if not residual < gmpy2.mpfr(2) ** -(frame.precision - 8):
            raise ValueError(f"resolved {entry.id.value} instance misses its constraint "
                             f"by {float(residual):.3g}")
        if perturbation:
            params[entry.bound] = params[entry.bound] * (1 + gmpy2.mpfr(perturbation))
        if entry.id in (IdentityId.ft_transform,):
            params.update(_ft_derive(params, dims, frame))
    return IdentityInstance(entry.id, dims, dict(free_params), params, frame,
                            seed=seed, perturbation=perturbation)


def evaluate_sides(instance: IdentityInstance, *, incremental: bool = False,
                   probe: Probe | None = None, rounded: bool = True) -> Sides:
    """Evaluate both sides of an instance with the series reference path.

    Values are rounded to the frame's precision unless ``rounded`` is false,
    in which case the working-precision values are returned; ``terms_*``
    count summands.
    """
    entry = instance.identity
    frame = instance.frame
    opts = {"incremental": incremental, "probe": probe}
    with frame.context():
        s = entry.sides(instance.params, instance.dims, frame, opts)
    if not rounded:
        return s
    return Sides(frame.round(s.lhs), frame.round(s.rhs), s.terms_lhs, s.terms_rhs)


def kajihara_to_bailey(instance: IdentityInstance):
    """Map an n = m = 2 kajihara instance onto a one-variable series.

    Writing the composition as ``y = (k, N - k)`` turns the left side into
    ``T0 * E(alpha; q^-N, a_1 z_1, ..., a_4 z_1, q^(1-N)/(w_1 z_2), q^(1-N)/(w_2 z_2))``
    with ``alpha = q^-N z_1/z_2`` and ``T0`` the ``k = 0`` summand. Returns the
    corresponding iterated_bailey instance and ``T0``.
    """
    if instance.id is not IdentityId.kajihara or (instance.dims["n"], instance.dims["m"]) != (2, 2):
        raise ValueError("kajihara_to_bailey needs a kajihara instance with n = m = 2")
    frame = instance.frame
    N = instance.dims["N"]
    P = instance.params
    with frame.context():
        z1, z2 = P["z"]
        w = list(P["w"]) + [P["w_m"]]
        a = P["a"]
        q1N = frame.qpow(1 - N)
        free = {"a": frame.qpow(-N) * z1 / z2,
                "b": a[0] * z1, "c": a[1] * z1, "d": a[2] * z1, "e": a[3] * z1,
                "f": q1N / (w[0] * z2)}
        ev = Evaluator(frame)
        t0 = ev.delta_ratio([z1, z2], (0, N))
        t0 *= ev.ratio([aj * z2 for aj in a], [w[0] * z2, w[1] * z2, frame.q * z2 / z1,
                                               frame.q], N)
    sb = resolve_constraint(IdentityId.iterated_bailey, free, {"N": N}, frame)
    return sb, frame.round(t0)
