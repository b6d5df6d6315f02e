"""Theta function, elliptic Pochhammer symbols and A_n Weyl-denominator factors.

Everything here is evaluated with gmpy2 complex numbers at the working
precision of a :class:`NomeFrame` (requested precision plus guard bits) and
rounded to the requested precision on the way out of the public functions.
The underscore-free functions are the public contract; :class:`Evaluator`
is the shared engine the series module builds sums from.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import gmpy2
from gmpy2 import mpc, mpfr

from .errors import DomainError, FrameError, SingularError

GUARD_BITS = 32
MIN_PRECISION = 64


def _context(bits: int):
    return gmpy2.context(
        precision=bits,
        trap_overflow=True,
        trap_invalid=True,
        trap_divzero=True,
    )


@dataclass(frozen=True)
class NomeFrame:
    """The fixed pair of nomes ``(p, q)`` plus the requested precision in bits.

    ``p = 0`` selects the basic (q-series) degeneration where
    ``theta(x) = 1 - x``. Inputs may be anything gmpy2 can turn into an
    ``mpc`` (int, float, complex, decimal string, mpfr, mpc).
    """

    p: object = 0
    q: object = 0.5
    precision: int = 256
    _raw: tuple = field(default=(), repr=False, compare=False)
    _tables: dict = field(default_factory=dict, repr=False, compare=False)
    _lock: threading.Lock = field(
        default_factory=threading.Lock, repr=False, compare=False
    )

    def __post_init__(self):
        if not isinstance(self.precision, int) or self.precision < MIN_PRECISION:
            raise FrameError(f"precision must be an integer >= {MIN_PRECISION} bits")
        raw = self._raw or (self.p, self.q)
        with self.context():
            p = _as_mpc(raw[0])
            q = _as_mpc(raw[1])
            if not abs(p) < 1:
                raise FrameError(f"|p| must be < 1, got |p| = {float(abs(p))}")
            if q == 0:
                raise FrameError("q must be nonzero")
            if p.imag == 0:
                p_scalar = p.real
            else:
                p_scalar = p
        object.__setattr__(self, "_raw", raw)
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "q", q)
        self._tables["p"] = p_scalar
        self._tables["pw"] = [mpfr(1) if p.imag == 0 else mpc(1)]
        if p != 0:
            ap = float(abs(p))
            self._tables["log2_inv_p"] = -math.log2(ap) if ap > 0 else math.inf
            self._tables["log2_tail"] = -math.log2(1.0 - ap)
            self._tables["log2_poch_inf"] = _log2_inv_poch_inf(ap)

    @property
    def working_precision(self) -> int:
        return self.precision + GUARD_BITS

    @property
    def elliptic(self) -> bool:
        return self.p != 0

    def context(self):
        """gmpy2 context at working precision with overflow/NaN/0-division traps."""
        return _context(self.working_precision)

    def with_precision(self, bits: int) -> "NomeFrame":
        """Same nomes as originally supplied, at a different precision."""
        return NomeFrame(self._raw[0], self._raw[1], bits, _raw=self._raw)

    def with_p(self, p) -> "NomeFrame":
        return NomeFrame(p, self._raw[1], self.precision)

    def round(self, value):
        """Round a working-precision value to the requested precision."""
        return mpc(value, self.precision)

    def value(self, x):
        return _as_mpc(x)

    def qpow(self, k: int):
        return self.q**k

    def _powers(self, n: int) -> list:
        # p^0..p^n, grown on demand; callers must hold the frame context
        pw = self._tables["pw"]
        if len(pw) <= n:
            with self._lock:
                pw = self._tables["pw"]
                if len(pw) <= n:
                    pw = list(pw)
                    p = self._tables["p"]
                    while len(pw) <= n:
                        pw.append(pw[-1] * p)
                    self._tables["pw"] = pw
        return pw

    def truncation_index(self, x) -> int:
        """Last product index J kept in theta(x); the omitted tail is below
        2^-(precision + guard) relative."""
        if self.p == 0:
            return 0
        L = self._tables["log2_inv_p"]
        lx = abs(float(gmpy2.log2(abs(x))))
        bits = self.precision + GUARD_BITS + lx + 1 + self._tables["log2_tail"]
        return max(1, math.ceil(bits / L))

    def __getstate__(self):
        return {"raw": self._raw, "precision": self.precision}

    def __setstate__(self, state):
        fresh = NomeFrame(state["raw"][0], state["raw"][1], state["precision"])
        for name in ("p", "q", "precision", "_raw", "_tables", "_lock"):
            object.__setattr__(self, name, getattr(fresh, name))


def _log2_inv_poch_inf(ap: float) -> float:
    # log2 of 1 / prod_{i>=1} (1 - ap^i)
    total, t = 0.0, ap
    while t > 1e-18:
        total -= math.log2(1.0 - t)
        t *= ap
    return total


def _as_mpc(x):
    if isinstance(x, str):
        return mpc(x.replace(" ", ""))
    return mpc(x)


# --------------------------------------------------------------------------
# raw kernels: the caller must be inside frame.context()


def _theta(x, frame: NomeFrame):
    if x == 0:
        raise DomainError("theta is undefined at x = 0")
    if frame.p == 0:
        return 1 - x
    return _theta_product(x, frame)


def _theta_product(x, frame: NomeFrame):
    """The truncated product itself; also valid (and exact) at p = 0."""
    J = frame.truncation_index(x)
    pw = frame._powers(2 * J + 2)
    xinv = 1 / x
    r = (1 - x) * (1 - pw[1] * xinv)
    if J == 0:
        return r
    L = frame._tables["log2_inv_p"]
    lx = float(gmpy2.log2(abs(x)))
    # factors with |p^j x| or |p^(j+1)/x| above 1/4 keep the factored form,
    # the expanded form 1 + p^(2j+1) - p^j (x + p/x) would cancel there
    j0 = max(1, math.ceil(max((lx + 2) / L, (2 - lx) / L - 1)))
    for j in range(1, min(j0, J + 1)):
        r *= (1 - pw[j] * x) * (1 - pw[j + 1] * xinv)
    if j0 <= J:
        s = x + pw[1] * xinv
        coeffs = _tail_coefficients(frame, j0, J)
        if coeffs is None:
            for j in range(j0, J + 1):
                r *= 1 + pw[2 * j + 1] - pw[j] * s
        else:
            acc = coeffs[-1]
            for c in reversed(coeffs[:-1]):
                acc = acc * s + c
            r *= acc
    return r


def _tail_coefficients(frame: NomeFrame, j0: int, J: int):
    """Coefficients e_0..e_K of prod_{j=j0..J} (1 + p^(2j+1) - p^j s) as a
    polynomial in s, cut where |e_k s^k| drops below the working precision.

    Valid for |p^j0 s| <= 1/2; returns None when the cut would not save work.
    """
    tails = frame._tables.setdefault("tails", {})
    key = (j0, J)
    if key in tails:
        return tails[key]
    # |e_k s^k| <= 2^-k |p|^C(k,2) / (|p|;|p|)_inf
    budget = frame.working_precision + 8 + frame._tables["log2_poch_inf"]
    L = frame._tables["log2_inv_p"]
    K = 0
    while K * (K + 1) / 2 * L + (K + 1) <= budget:
        K += 1
    if K + 1 >= J - j0 + 1:
        coeffs = None
    else:
        pw = frame._powers(2 * J + 2)
        coeffs = [pw[0]]
        for j in range(j0, J + 1):
            cj = 1 + pw[2 * j + 1]
            nxt = [cj * coeffs[0]]
            for k in range(1, min(len(coeffs), K) + 1):
                prev = coeffs[k] if k < len(coeffs) else 0
                nxt.append(cj * prev - pw[j] * coeffs[k - 1])
            coeffs = nxt
    with frame._lock:
        tails[key] = coeffs
    return coeffs


def _theta_closed_p0(x):
    return 1 - x


class Probe:
    """Records log2 |theta| for every factor an evaluation touches.

    Used by the sampler's singularity guard; an evaluation run with a probe
    sees every denominator factor over the whole index range.
    """

    def __init__(self):
        self.numerators: list[float] = []
        self.denominators: list[float] = []
        self.arguments: list = []
        self.worst: tuple | None = None

    def record(self, x, value, denominator: bool, where: dict | None):
        self.arguments.append(x)
        if value == 0:
            return
        lv = float(gmpy2.log2(abs(value)))
        if denominator:
            self.denominators.append(lv)
            if self.worst is None or lv < self.worst[0]:
                self.worst = (lv, where)
        else:
            self.numerators.append(lv)

    def log2_geometric_mean(self) -> float:
        logs = self.numerators + self.denominators
        return sum(logs) / len(logs) if logs else 0.0

    def min_denominator(self) -> float:
        return min(self.denominators) if self.denominators else math.inf


class Evaluator:
    """Builds products of theta factors for one frame.

    The reference mode recomputes every Pochhammer symbol from scratch; the
    incremental mode memoizes theta values and extends Pochhammer symbols with
    ``(a)_{k+1} = (a)_k theta(a q^k)``. Denominator factors are checked for
    exact vanishing and raise :class:`SingularError` with the ``where``
    context plus the offending parameter index ``j``.
    """

    def __init__(self, frame: NomeFrame, probe: Probe | None = None,
                 incremental: bool = False):
        self.frame = frame
        self.probe = probe
        self.incremental = incremental
        self._theta_memo: dict = {}
        self._poch_memo: dict = {}

    def theta(self, x, den=False, where=None):
        if self.incremental:
            v = self._theta_memo.get(x)
            if v is None:
                v = self._theta_memo[x] = _theta(x, self.frame)
        else:
            v = _theta(x, self.frame)
        if den and v == 0:
            raise SingularError("vanishing denominator factor", **(where or {}))
        if self.probe is not None:
            self.probe.record(x, v, den, where)
        return v

    def poch(self, a, k: int, den=False, where=None):
        if k < 0:
            raise ValueError(f"Pochhammer length must be >= 0, got {k}")
        if a == 0:
            raise DomainError("Pochhammer base must be nonzero")
        if k == 0:
            return mpc(1)
        if self.incremental and self.probe is None:
            partial = self._poch_memo.get(a)
            if partial is None:
                partial = self._poch_memo[a] = [mpc(1)]
            while len(partial) <= k:
                i = len(partial) - 1
                partial.append(
                    partial[-1] * self.theta(a * self.frame.qpow(i), den, where)
                )
            return partial[k]
        r = mpc(1)
        for i in range(k):
            r *= self.theta(a * self.frame.qpow(i), den, where)
        return r

    def prod(self, bases: Iterable, k: int, den=False, where=None):
        r = mpc(1)
        if k == 0:
            return r
        for j, a in enumerate(bases):
            w = None if where is None else {**where, "j": j}
            r *= self.poch(a, k, den, w)
        return r

    def ratio(self, nums: Iterable, dens: Iterable, k: int, where=None):
        """(nums)_k / (dens)_k in the multi-Pochhammer shorthand."""
        if k == 0:
            return mpc(1)
        return self.prod(nums, k) / self.prod(dens, k, True, where)

    def weyl_delta(self, z: Sequence):
        r = mpc(1)
        for k in range(len(z)):
            for j in range(k):
                r *= z[j] * self.theta(z[k] / z[j])
        return r

    def delta_ratio(self, z: Sequence, y: Sequence[int]):
        q = self.frame.q
        r = mpc(1)
        for k in range(len(z)):
            for j in range(k):
                base = z[k] / z[j]
                where = {"factor": "delta", "j": j, "k": k, "y": tuple(y)}
                num = self.theta(base * self.frame.qpow(y[k] - y[j]))
                den = self.theta(base, True, where)
                if y[j]:
                    num *= q ** y[j]
                r *= num / den
        return r


# --------------------------------------------------------------------------
# public operations


@dataclass(frozen=True)
class PochSpec:
    """Elliptic Pochhammer symbol ``(base)_length``."""

    base: object
    length: int

    def __post_init__(self):
        if not isinstance(self.length, int) or self.length < 0:
            raise ValueError(f"Pochhammer length must be a non-negative integer, "
                             f"got {self.length!r}")

    def evaluate(self, frame: NomeFrame):
        return poch(self.base, self.length, frame)


def theta(x, frame: NomeFrame):
    """Theta function ``prod_{j>=0} (1 - p^j x)(1 - p^(j+1)/x)``.

    The product is truncated at ``frame.truncation_index(x)``; at ``p = 0``
    it is exactly ``1 - x``.

    Raises
    ------
    DomainError
        If ``x == 0``.
    """
    with frame.context():
        return frame.round(_theta(frame.value(x), frame))


def poch(a, k: int, frame: NomeFrame):
    """Elliptic Pochhammer symbol ``theta(a) theta(aq) ... theta(aq^(k-1))``."""
    with frame.context():
        return frame.round(Evaluator(frame).poch(frame.value(a), k))


def multi_poch(bases: Sequence, k: int, frame: NomeFrame):
    """Shorthand ``(a_1, ..., a_r)_k``; 1 for an empty list."""
    with frame.context():
        ev = Evaluator(frame)
        r = mpc(1)
        for a in bases:
            r *= ev.poch(frame.value(a), k)
        return frame.round(r)


def weyl_delta(z: Sequence, frame: NomeFrame):
    """``prod_{j<k} z_j theta(z_k / z_j)``."""
    with frame.context():
        zs = [frame.value(v) for v in z]
        if any(v == 0 for v in zs):
            raise DomainError("weyl_delta needs nonzero coordinates")
        return frame.round(Evaluator(frame).weyl_delta(zs))


def delta_ratio(z: Sequence, y: Sequence[int], frame: NomeFrame):
    """``Delta(z q^y) / Delta(z)`` from its factor-by-factor product form."""
    if len(z) != len(y):
        raise ValueError("z and y must have the same length")
    with frame.context():
        zs = [frame.value(v) for v in z]
        if any(v == 0 for v in zs):
            raise DomainError("delta_ratio needs nonzero coordinates")
        return frame.round(Evaluator(frame).delta_ratio(zs, list(y)))
