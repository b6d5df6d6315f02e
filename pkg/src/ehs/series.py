"""Index streams and the structured sums built from theta-kernel atoms.

All sums run over their index stream in lexicographically ascending order;
that order is part of the contract because floating-point summation is not
associative and reports must be bit-reproducible.

Every evaluator accepts the keyword-only options

``incremental``
    memoize theta values and extend Pochhammer symbols step by step instead
    of recomputing each one (faster; agrees with the reference path to
    roughly the working precision).
``counter``
    a :class:`Tally` whose ``terms`` is increased by the number of summands.
``probe``
    a :class:`~ehs.kernel.Probe` recording every theta factor (used by the
    sampler's singularity guard).
``raw``
    return the working-precision value instead of rounding to the frame's
    precision (for callers that keep composing values).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import comb
from typing import Iterator, Sequence

from gmpy2 import mpc

from .errors import DomainError
from .kernel import Evaluator, NomeFrame, Probe


@dataclass
class Tally:
    terms: int = 0


# --------------------------------------------------------------------------
# index streams


def compositions(n: int, N: int) -> Iterator[tuple[int, ...]]:
    """All ``y`` with ``n`` non-negative parts summing to ``N``, lexicographically.

    >>> list(compositions(2, 3))
    [(0, 3), (1, 2), (2, 1), (3, 0)]
    """
    if n < 1:
        raise ValueError("compositions need n >= 1")
    if N < 0:
        raise ValueError("compositions need N >= 0")
    if n == 1:
        yield (N,)
        return
    for first in range(N + 1):
        for rest in compositions(n - 1, N - first):
            yield (first,) + rest


def composition_count(n: int, N: int) -> int:
    return comb(N + n - 1, n - 1)


def box_indices(bounds: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """All ``y`` with ``0 <= y_k <= bounds_k``, lexicographically.

    An empty ``bounds`` yields the single empty index.
    """
    if any(b < 0 for b in bounds):
        raise ValueError("box bounds must be non-negative")
    return itertools.product(*(range(b + 1) for b in bounds))


# --------------------------------------------------------------------------
# parameter records


def _product(values):
    r = mpc(1)
    for v in values:
        r *= v
    return r


@dataclass(frozen=True)
class KajiharaParams:
    """Parameters of the simplex sum

    ``sum_{|y|=N} Delta(zq^y)/Delta(z) prod_k (a z_k)_{y_k} / ((w z_k)_{y_k} (q z_k/z)_{y_k})``.

    With ``invert_a`` the numerator bases are ``z_k / a_j`` instead of
    ``a_j z_k``; this makes the dimension swap ``(z, w, a) -> (w, z, 1/a)``
    exact and an involution.
    """

    z: tuple
    w: tuple
    a: tuple
    N: int
    invert_a: bool = False

    def __post_init__(self):
        for name in ("z", "w", "a"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if len(self.z) < 1:
            raise ValueError("need at least one z coordinate")
        if len(self.a) != len(self.z) + len(self.w):
            raise ValueError(
                f"need m + n = {len(self.z) + len(self.w)} numerator parameters, "
                f"got {len(self.a)}")
        if not isinstance(self.N, int) or self.N < 0:
            raise ValueError("N must be a non-negative integer")

    @property
    def n(self) -> int:
        return len(self.z)

    @property
    def m(self) -> int:
        return len(self.w)

    def swapped(self) -> "KajiharaParams":
        return KajiharaParams(self.w, self.z, self.a, self.N, not self.invert_a)

    def balance_residual(self, frame: NomeFrame):
        """``|prod w / (prod z prod a^(+-1)) - 1|``."""
        with frame.context():
            za = _product(frame.value(v) for v in self.z)
            aa = _product(frame.value(v) for v in self.a)
            rhs = za / aa if self.invert_a else za * aa
            return abs(_product(frame.value(v) for v in self.w) / rhs - 1)

    def validate(self, frame: NomeFrame):
        if not self.balance_residual(frame) < 2.0 ** -(frame.precision - 8):
            raise ValueError("parameters violate the balancing condition "
                             "w_1...w_m = z_1...z_n a_1...a_{m+n}")


@dataclass(frozen=True)
class C3Params:
    """Parameters of the hyperrectangle transformation; ``m`` are the box bounds."""

    z: tuple
    a: object
    b: object
    c: object
    d: object
    e: object
    f: object
    g: object
    m: tuple

    def __post_init__(self):
        object.__setattr__(self, "z", tuple(self.z))
        object.__setattr__(self, "m", tuple(self.m))
        if len(self.z) != len(self.m) or not self.z:
            raise ValueError("z and m must be non-empty and of equal length")
        if any(not isinstance(k, int) or k < 0 for k in self.m):
            raise ValueError("box bounds must be non-negative integers")

    def balance_residual(self, frame: NomeFrame):
        """``|bcdefg / (a^3 q^(|m|+2)) - 1|``."""
        with frame.context():
            v = [frame.value(x) for x in (self.a, self.b, self.c, self.d,
                                          self.e, self.f, self.g)]
            lhs = _product(v[1:])
            rhs = v[0] ** 3 * frame.qpow(sum(self.m) + 2)
            return abs(lhs / rhs - 1)


# --------------------------------------------------------------------------
# evaluators


def _values(frame, xs):
    out = [frame.value(x) for x in xs]
    if any(v == 0 for v in out):
        raise DomainError("series parameters must be nonzero")
    return out


def _finish(frame, value, terms, counter, raw=False):
    if counter is not None:
        counter.terms += terms
    return value if raw else frame.round(value)


def kajihara_sum(params: KajiharaParams, frame: NomeFrame, *,
                 incremental: bool = False, counter: Tally | None = None,
                 probe: Probe | None = None, raw: bool = False):
    """Simplex sum of the A_n Kajihara-type transformation (see
    :class:`KajiharaParams`).

    Raises
    ------
    SingularError
        When a denominator theta factor vanishes; ``context`` carries the
        position ``k``, parameter index ``j`` and composition ``y``.
    """
    with frame.context():
        ev = Evaluator(frame, probe, incremental)
        q = frame.q
        z = _values(frame, params.z)
        w = _values(frame, params.w)
        a = _values(frame, params.a)
        n = len(z)
        nums = [[zk / aj for aj in a] if params.invert_a else [aj * zk for aj in a]
                for zk in z]
        wden = [[wj * zk for wj in w] for zk in z]
        qden = [[q if j == k else q * z[k] / z[j] for j in range(n)]
                for k in range(n)]
        total = mpc(0)
        terms = 0
        for y in compositions(n, params.N):
            t = ev.delta_ratio(z, y)
            for k, yk in enumerate(y):
                if yk == 0:
                    continue
                den = (ev.prod(wden[k], yk, True, {"factor": "w*z", "k": k, "y": y})
                       * ev.prod(qden[k], yk, True, {"factor": "q*z/z", "k": k, "y": y}))
                t *= ev.prod(nums[k], yk) / den
            total += t
            terms += 1
        return _finish(frame, total, terms, counter, raw)


def jackson_rhs(z: Sequence, a: Sequence, N: int, frame: NomeFrame, *,
                incremental=False, counter=None, probe=None, raw=False):
    """Closed form of the m = 1 sum, with ``w = z_1...z_n a_1...a_{n+1}``."""
    if len(a) != len(z) + 1:
        raise ValueError("jackson_rhs needs n + 1 numerator parameters")
    with frame.context():
        ev = Evaluator(frame, probe, incremental)
        zs = _values(frame, z)
        as_ = _values(frame, a)
        w = _product(zs) * _product(as_)
        dens = [w * zj for zj in zs] + [frame.q]
        value = ev.ratio([w / aj for aj in as_], dens, N, {"factor": "jackson"})
        return _finish(frame, value, 1, counter, raw)


def e_series(a, b, c, d, e, f, g, N: int, frame: NomeFrame, *,
             incremental=False, counter=None, probe=None, raw=False):
    """Terminating very-well-poised series ``E(a; q^-N, b, c, d, e, f, g)``.

    ``q^-N`` is taken as an exact power of ``q``.
    """
    if not isinstance(N, int) or N < 0:
        raise ValueError("N must be a non-negative integer")
    with frame.context():
        ev = Evaluator(frame, probe, incremental)
        q = frame.q
        a, b, c, d, e, f, g = _values(frame, (a, b, c, d, e, f, g))
        aq = a * q
        nums = [a, frame.qpow(-N), b, c, d, e, f, g]
        dens = [q, a * frame.qpow(N + 1), aq / b, aq / c, aq / d, aq / e, aq / f, aq / g]
        theta_a = ev.theta(a, True, {"factor": "theta(a)"})
        total = mpc(0)
        for k in range(N + 1):
            t = ev.theta(a * frame.qpow(2 * k)) / theta_a
            t *= ev.ratio(nums, dens, k, {"factor": "E", "k": k}) * frame.qpow(k)
            total += t
        return _finish(frame, total, N + 1, counter, raw)


def sm_rhs(z: Sequence, a: Sequence, w1, w2, N: int, frame: NomeFrame, *,
           incremental=False, counter=None, probe=None, raw=False):
    """Single-sum form of the m = 2 simplex sum (requires ``w1 w2 = prod z prod a``)."""
    if len(a) != len(z) + 2:
        raise ValueError("sm_rhs needs n + 2 numerator parameters")
    with frame.context():
        ev = Evaluator(frame, probe, incremental)
        q = frame.q
        zs = _values(frame, z)
        as_ = _values(frame, a)
        w1, w2 = _values(frame, (w1, w2))
        qN = frame.qpow(-N)
        q1N = frame.qpow(1 - N)
        r = w1 / w2
        pref = ev.ratio([w2 / aj for aj in as_],
                        [w2 / w1, q] + [w2 * zj for zj in zs], N,
                        {"factor": "sm prefactor"})
        nums = [qN * r, qN] + [w1 / aj for aj in as_] + [q1N / (w2 * zj) for zj in zs]
        dens = [q, q * r] + [q1N * aj / w2 for aj in as_] + [w1 * zj for zj in zs]
        theta0 = ev.theta(qN * r, True, {"factor": "theta(q^-N w1/w2)"})
        total = mpc(0)
        for k in range(N + 1):
            t = ev.theta(frame.qpow(2 * k - N) * r) / theta0
            t *= ev.ratio(nums, dens, k, {"factor": "sm", "k": k}) * frame.qpow(k)
            total += t
        return _finish(frame, pref * total, N + 1, counter, raw)


def fc_transform(z: Sequence, a: Sequence, w1, w2, N: int, m: int,
                 frame: NomeFrame, *, probe=None, raw=False):
    """Parameter substitution carrying the m = 2 simplex sum into itself.

    Returns ``(x, b, prefactor)`` such that
    ``sum(z, (w1, w2), a) = prefactor * sum(x, (w1, w2), b)``. The first
    ``n - m`` coordinates are exchanged; ``m = n`` is the identity map. Note
    the ``(a_j z_j)^N`` factor in the prefactor is an ordinary power.
    """
    n = len(z)
    if len(a) != n + 2:
        raise ValueError("fc_transform needs n + 2 numerator parameters")
    if not 0 <= m <= n:
        raise ValueError(f"need 0 <= m <= n = {n}, got m = {m}")
    with frame.context():
        ev = Evaluator(frame, probe)
        zs = _values(frame, z)
        as_ = _values(frame, a)
        w1, w2 = _values(frame, (w1, w2))
        ww = w1 * w2
        r = n - m
        x = [frame.qpow(1 - N) * aj / ww for aj in as_[:r]] + zs[r:]
        b = [frame.qpow(N - 1) * ww * zj for zj in zs[:r]] + as_[r:]
        pref = mpc(1)
        for j in range(r):
            pref *= (as_[j] * zs[j]) ** N * ev.ratio(
                [w1 / as_[j], w2 / as_[j]], [w1 * zs[j], w2 * zs[j]], N,
                {"factor": "fc prefactor", "j": j})
        if raw:
            return x, b, pref
        return ([frame.round(v) for v in x], [frame.round(v) for v in b],
                frame.round(pref))


def fc_chain(z: Sequence, a: Sequence, w1, w2, N: int, frame: NomeFrame, *,
             incremental=False, raw=False) -> list:
    """``prefactor(m) * sum(x(m), (w1, w2), b(m))`` for ``m = 0, ..., n``.

    All entries equal the untransformed sum when ``w1 w2 = prod z prod a``.
    """
    out = []
    for m in range(len(z) + 1):
        x, b, pref = fc_transform(z, a, w1, w2, N, m, frame, raw=True)
        s = kajihara_sum(KajiharaParams(x, (w1, w2), b, N), frame,
                         incremental=incremental, raw=True)
        with frame.context():
            v = pref * s
            out.append(v if raw else frame.round(v))
    return out


def c3_side(params: C3Params, side: str, frame: NomeFrame, *,
            incremental=False, counter=None, probe=None, raw=False):
    """One side (``"left"`` or ``"right"``) of the hyperrectangle transformation.

    Both sides sum over ``box_indices(params.m)``.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    with frame.context():
        ev = Evaluator(frame, probe, incremental)
        q = frame.q
        z = _values(frame, params.z)
        a, b, c, d, e, f, g = _values(
            frame, (params.a, params.b, params.c, params.d, params.e, params.f, params.g))
        m = params.m
        n = len(z)
        M = sum(m)
        qp = frame.qpow
        aq = a * q
        # (q^-m_j z_k/z_j)_{y_k} / (q z_k/z_j)_{y_k}, shared by both sides
        shift_num = [[qp(-m[j]) if j == k else qp(-m[j]) * z[k] / z[j] for j in range(n)]
                     for k in range(n)]
        shift_den = [[q if j == k else q * z[k] / z[j] for j in range(n)]
                     for k in range(n)]

        if side == "left":
            pref = mpc(1)
            vwp = [a * zk for zk in z]
            vwp_den = [ev.theta(v, True, {"factor": "theta(a z_k)", "k": k})
                       for k, v in enumerate(vwp)]
            y_nums = [a * zj for zj in z]
            y_dens = [qp(1 + m[j]) * a * z[j] for j in range(n)]
            s_nums = [b, c, d]
            s_dens = [aq / e, aq / f, aq / g]
            k_nums = [[e * zk, f * zk, g * zk] for zk in z]
            k_dens = [[aq * zk / b, aq * zk / c, aq * zk / d] for zk in z]
            shift = 0
        else:
            pref = g ** M * qp(-sum(m[j] * m[k] for k in range(n) for j in range(k)))
            pref *= ev.ratio([b, aq / (c * g), aq / (d * g)], [aq / e, aq / f, aq / g],
                             M, {"factor": "c3 prefactor"})
            for k in range(n):
                lift = qp(1 + M - m[k]) * a / z[k]
                pref *= z[k] ** m[k] * ev.ratio(
                    [aq * z[k], lift / (e * g), lift / (f * g)],
                    [aq * z[k] / c, aq * z[k] / d, qp(M - m[k]) * b / (g * z[k])],
                    m[k], {"factor": "c3 prefactor", "k": k})
            vwp = [g * zk / b for zk in z]
            vwp_den = [ev.theta(v * qp(-M), True, {"factor": "theta(g z_k q^-|m| / b)", "k": k})
                       for k, v in enumerate(vwp)]
            y_nums = [g * zj * qp(-M) / b for zj in z]
            y_dens = [g * z[j] * qp(m[j] + 1 - M) / b for j in range(n)]
            s_nums = [qp(-M) * g / a, aq / (b * e), aq / (b * f)]
            s_dens = [qp(-M) * c * g / a, qp(-M) * d * g / a, qp(1 - M) / b]
            k_nums = [[aq * zk / (b * c), aq * zk / (b * d), g * zk] for zk in z]
            k_dens = [[aq * zk / b, qp(-M) * e * g * zk / a, qp(-M) * f * g * zk / a]
                      for zk in z]
            shift = -M

        total = mpc(0)
        terms = 0
        for y in box_indices(m):
            Y = sum(y)
            where = {"y": y}
            t = ev.delta_ratio(z, y)
            for k in range(n):
                t *= ev.theta(vwp[k] * qp(y[k] + Y + shift)) / vwp_den[k]
            t *= ev.ratio(y_nums, y_dens, Y, {**where, "factor": "|y| ratio"})
            t *= ev.ratio(s_nums, s_dens, Y, {**where, "factor": "|y| scalars"}) * qp(Y)
            for k in range(n):
                if y[k] == 0:
                    continue
                kw = {**where, "k": k}
                t *= ev.ratio(shift_num[k], shift_den[k], y[k], {**kw, "factor": "shift"})
                t *= ev.ratio(k_nums[k], k_dens[k], y[k], {**kw, "factor": "per-k"})
            total += t
            terms += 1
        return _finish(frame, pref * total, terms, counter, raw)


def delta_lemma_lhs(z: Sequence, m: Sequence[int], frame: NomeFrame, *,
                    shifts: Sequence | None = None, counter=None, probe=None,
                    raw=False):
    """``Delta(1/z)/Delta(q^-m/z) prod_{j,k} (q^-m_k z_j/z_k)_{m_k} / (q^(1-m_k+m_j) z_j/z_k)_{m_k}``.

    ``shifts`` overrides the exact powers ``q^-m_k`` (used to perturb the
    lattice relation in sensitivity checks).
    """
    if len(z) != len(m):
        raise ValueError("z and m must have the same length")
    with frame.context():
        ev = Evaluator(frame, probe)
        zs = _values(frame, z)
        n = len(zs)
        s = ([frame.qpow(-mk) for mk in m] if shifts is None
             else _values(frame, shifts))
        u = [s[k] / zs[k] for k in range(n)]
        value = ev.weyl_delta([1 / zk for zk in zs])
        den = ev.weyl_delta(u)
        if den == 0:
            raise DomainError("Delta(q^-m / z) vanishes")
        value /= den
        for k in range(n):
            for j in range(n):
                base = s[k] if j == k else s[k] * zs[j] / zs[k]
                value *= ev.ratio([base], [frame.qpow(1 + m[j]) * base], m[k],
                                  {"factor": "lemma", "j": j, "k": k})
        return _finish(frame, value, 1, counter, raw)


def delta_lemma_rhs(m: Sequence[int], frame: NomeFrame, *, raw=False):
    """``(-1)^|m| q^(-|m| - C(|m|, 2))``."""
    M = sum(m)
    with frame.context():
        v = (-1) ** M * frame.qpow(-M - comb(M, 2))
        return v if raw else frame.round(v)
