import cmath
import random
from math import comb

import gmpy2
import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import relative
from ehs import NomeFrame, theta
from ehs.series import (
    C3Params,
    KajiharaParams,
    Tally,
    box_indices,
    c3_side,
    composition_count,
    compositions,
    delta_lemma_lhs,
    delta_lemma_rhs,
    e_series,
    fc_chain,
    fc_transform,
    jackson_rhs,
    kajihara_sum,
    sm_rhs,
)
from oracles import Oracle, from_gmpy, rel

P, Q = 0.2, complex(0.55, 0.3)
FRAME = NomeFrame(P, Q, 256)
TOL = 2.0 ** -128


def draw(rng, k):
    return [cmath.rect(rng.uniform(0.5, 2.0), rng.uniform(0, 2 * cmath.pi)) for _ in range(k)]


def balanced(seed, n, m, N, frame=FRAME):
    """Random (z, w, a) with w_m solved from the balancing condition."""
    rng = random.Random(seed)
    z, a, w = draw(rng, n), draw(rng, m + n), draw(rng, m - 1)
    with frame.context():
        wm = gmpy2.mpc(1)
        for v in z + a:
            wm *= frame.value(v)
        for v in w:
            wm /= frame.value(v)
        return KajiharaParams(z, [frame.value(v) for v in w] + [wm], a, N)


def sides(kp, frame=FRAME, **kw):
    return (kajihara_sum(kp, frame, raw=True, **kw),
            kajihara_sum(kp.swapped(), frame, raw=True, **kw))


class TestIndexStreams:
    def test_compositions_small(self):
        assert list(compositions(2, 3)) == [(0, 3), (1, 2), (2, 1), (3, 0)]
        assert list(compositions(1, 5)) == [(5,)]
        assert composition_count(3, 4) == 15
        assert sum(1 for _ in compositions(3, 4)) == 15

    @given(n=st.integers(1, 5), N=st.integers(0, 7))
    def test_compositions_properties(self, n, N):
        ys = list(compositions(n, N))
        assert len(ys) == comb(N + n - 1, n - 1) == composition_count(n, N)
        assert ys == sorted(ys)
        assert len(set(ys)) == len(ys)
        assert all(sum(y) == N and min(y) >= 0 and len(y) == n for y in ys)

    def test_boxes_small(self):
        assert list(box_indices((1, 1))) == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert list(box_indices(())) == [()]
        assert sum(1 for _ in box_indices((2, 3))) == 12

    @given(bounds=st.lists(st.integers(0, 3), max_size=4))
    def test_boxes_properties(self, bounds):
        ys = list(box_indices(bounds))
        expected = 1
        for b in bounds:
            expected *= b + 1
        assert len(ys) == expected and ys == sorted(ys)
        assert all(0 <= yk <= bk for y in ys for yk, bk in zip(y, bounds))

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            list(compositions(0, 2))
        with pytest.raises(ValueError):
            list(compositions(2, -1))
        with pytest.raises(ValueError):
            list(box_indices((1, -1)))


class TestKajihara:
    def test_empty_sum_is_one(self):
        kp = balanced(1, 3, 2, 0)
        assert kajihara_sum(kp, FRAME) == 1

    @given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 3), m=st.integers(1, 3))
    def test_swap_is_involution(self, seed, n, m):
        kp = balanced(seed, n, m, 2)
        assert kp.swapped().swapped() == kp
        assert (kp.swapped().n, kp.swapped().m) == (m, n)

    def test_swap_equals_plain_inverted_parameters(self):
        kp = balanced(3, 2, 3, 3)
        with FRAME.context():
            inv = [1 / FRAME.value(v) for v in kp.a]
        plain = KajiharaParams(kp.w, kp.z, inv, kp.N)
        assert relative(FRAME, kajihara_sum(plain, FRAME), kajihara_sum(kp.swapped(), FRAME)) \
            < 2.0 ** -240

    @pytest.mark.parametrize("n,m,N", [(1, 1, 2), (2, 2, 3), (3, 2, 4), (2, 3, 2), (3, 1, 3)])
    def test_transformation_holds(self, n, m, N):
        kp = balanced(n * 100 + m * 10 + N, n, m, N)
        lhs, rhs = sides(kp)
        assert relative(FRAME, lhs, rhs) < TOL

    @pytest.mark.parametrize("n,m,N", [(2, 2, 3), (3, 1, 2), (1, 3, 3)])
    def test_matches_bruteforce_oracle(self, n, m, N):
        mpmath.mp.prec = 320
        kp = balanced(7 + N, n, m, N)
        o = Oracle(P, Q)
        z = [from_gmpy(v) for v in kp.z]
        w = [from_gmpy(v) for v in kp.w]
        a = [from_gmpy(v) for v in kp.a]
        ref_l = o.kajihara_left(z, w, a, N)
        ref_r = o.kajihara_right(z, w, a, N)
        lhs, rhs = sides(kp)
        assert rel(from_gmpy(lhs), ref_l) < 2.0 ** -240
        assert rel(from_gmpy(rhs), ref_r) < 2.0 ** -240

    def test_unbalanced_instance_fails(self):
        kp = balanced(5, 2, 2, 3)
        bumped = KajiharaParams(kp.z, kp.w[:-1] + (kp.w[-1] * (1 + gmpy2.mpfr("1e-30")),),
                                kp.a, kp.N)
        with pytest.raises(ValueError):
            bumped.validate(FRAME)
        lhs, rhs = sides(bumped)
        assert relative(FRAME, lhs, rhs) > 1e-35

    @pytest.mark.parametrize("n,N", [(1, 4), (2, 3), (3, 4), (4, 2)])
    def test_term_count(self, n, N):
        t = Tally()
        kajihara_sum(balanced(1, n, 2, N), FRAME, counter=t)
        assert t.terms == comb(N + n - 1, n - 1)

    @pytest.mark.parametrize("n,m,N", [(2, 2, 3), (3, 3, 5)])
    def test_incremental_agrees_with_reference(self, n, m, N):
        kp = balanced(11, n, m, N)
        ref = kajihara_sum(kp, FRAME, raw=True)
        inc = kajihara_sum(kp, FRAME, raw=True, incremental=True)
        assert relative(FRAME, ref, inc) < 2.0 ** -(256 - 24)

    def test_p0_regime(self):
        f0 = NomeFrame(0, Q, 256)
        kp = balanced(21, 3, 2, 4, f0)
        lhs, rhs = sides(kp, f0)
        assert relative(f0, lhs, rhs) < TOL

    def test_wrong_arity_rejected(self):
        with pytest.raises(ValueError):
            KajiharaParams([1.1], [1.2], [0.5], 2)
        with pytest.raises(ValueError):
            KajiharaParams([1.1], [1.2], [0.5, 0.6], -1)


class TestJackson:
    def test_empty(self):
        assert jackson_rhs([1.1, 0.7j], [0.5, 0.9, 1.3j], 0, FRAME) == 1

    @pytest.mark.parametrize("n,N", [(1, 3), (2, 4), (3, 3), (4, 2)])
    def test_equals_m1_sum(self, n, N):
        kp = balanced(n + 40 * N, n, 1, N)
        s = kajihara_sum(kp, FRAME, raw=True)
        assert relative(FRAME, s, jackson_rhs(kp.z, kp.a, N, FRAME, raw=True)) < TOL

    @pytest.mark.parametrize("N", [1, 2, 4])
    def test_one_variable_against_oracle(self, N):
        mpmath.mp.prec = 320
        rng = random.Random(N)
        z, a = draw(rng, 1), draw(rng, 2)
        o = Oracle(P, Q)
        ref = o.jackson_closed([mpmath.mpc(v) for v in z], [mpmath.mpc(v) for v in a], N)
        assert rel(from_gmpy(jackson_rhs(z, a, N, FRAME)), ref) < 2.0 ** -240
        w = z[0] * a[0] * a[1]
        ref_sum = o.kajihara_left([mpmath.mpc(z[0])], [mpmath.mpc(w)],
                                  [mpmath.mpc(v) for v in a], N)
        assert rel(ref, ref_sum) < 2.0 ** -50


class TestESeries:
    args = draw(random.Random(5), 7)

    def test_empty(self):
        assert e_series(*self.args, 0, FRAME) == 1

    def test_one_step_unrolled(self):
        a, b, c, d, e, f, g = self.args
        fr = FRAME
        with fr.context():
            a, b, c, d, e, f, g = (fr.value(v) for v in self.args)
            q = fr.q
            num = 1
            for x in (a, 1 / q, b, c, d, e, f, g):
                num *= theta(x, fr)
            den = 1
            for x in (q, a * q * q, a * q / b, a * q / c, a * q / d, a * q / e, a * q / f,
                      a * q / g):
                den *= theta(x, fr)
            ref = 1 + theta(a * q * q, fr) / theta(a, fr) * num / den * q
        assert relative(fr, e_series(*self.args, 1, fr), ref) < 2.0 ** -240

    @pytest.mark.parametrize("N", [2, 4])
    def test_against_oracle(self, N):
        mpmath.mp.prec = 320
        o = Oracle(P, Q)
        ref = o.e_series(*[mpmath.mpc(v) for v in self.args], N)
        assert rel(from_gmpy(e_series(*self.args, N, FRAME)), ref) < 2.0 ** -240

    def test_negative_length_rejected(self):
        with pytest.raises(ValueError):
            e_series(*self.args, -1, FRAME)


def sm_instance(seed, n, N, frame=FRAME):
    kp = balanced(seed, n, 2, N, frame)
    return kp.z, kp.a, kp.w[0], kp.w[1]


class TestSingleSumRewrite:
    def test_empty(self):
        z, a, w1, w2 = sm_instance(1, 2, 0)
        assert relative(FRAME, sm_rhs(z, a, w1, w2, 0, FRAME), 1) < 2.0 ** -250

    @pytest.mark.parametrize("n,N", [(1, 2), (1, 4), (2, 3), (3, 5)])
    def test_equals_m2_sum(self, n, N):
        z, a, w1, w2 = sm_instance(n * 7 + N, n, N)
        s = kajihara_sum(KajiharaParams(z, (w1, w2), a, N), FRAME, raw=True)
        assert relative(FRAME, s, sm_rhs(z, a, w1, w2, N, FRAME, raw=True)) < TOL


class TestFcTransform:
    def test_identity_member(self):
        z, a, w1, w2 = sm_instance(3, 3, 2)
        x, b, pref = fc_transform(z, a, w1, w2, 2, 3, FRAME)
        assert x == [FRAME.round(FRAME.value(v)) for v in z]
        assert b == [FRAME.round(FRAME.value(v)) for v in a]
        assert pref == 1

    @given(seed=st.integers(0, 10 ** 6), n=st.integers(1, 4), data=st.data())
    def test_output_stays_balanced(self, seed, n, data):
        m = data.draw(st.integers(0, n))
        N = data.draw(st.integers(0, 5))
        z, a, w1, w2 = sm_instance(seed, n, N)
        x, b, _ = fc_transform(z, a, w1, w2, N, m, FRAME, raw=True)
        with FRAME.context():
            prod = gmpy2.mpc(1)
            for v in x + b:
                prod *= v
            assert abs(prod / (w1 * w2) - 1) < 2.0 ** -240

    def test_bad_m_rejected(self):
        z, a, w1, w2 = sm_instance(3, 2, 2)
        with pytest.raises(ValueError):
            fc_transform(z, a, w1, w2, 2, 3, FRAME)

    @pytest.mark.parametrize("p", [0, 0.2])
    def test_chain_is_constant(self, p):
        fr = NomeFrame(p, Q, 256)
        z, a, w1, w2 = sm_instance(17, 3, 4, fr)
        chain = fc_chain(z, a, w1, w2, 4, fr, raw=True)
        base = kajihara_sum(KajiharaParams(z, (w1, w2), a, 4), fr, raw=True)
        for v in chain:
            assert relative(fr, v, base) < 2.0 ** -120

    def test_m0_matches_written_out_right_side(self):
        mpmath.mp.prec = 320
        rng = random.Random(99)
        n, N = 2, 3
        z, a = draw(rng, n), draw(rng, n)
        b, c, d = draw(rng, 3)
        with FRAME.context():
            e = FRAME.value(b) * FRAME.value(c) / FRAME.value(d)
            for v in z + a:
                e *= FRAME.value(v)
        x, bb, pref = fc_transform(z, a + [b, c], d, e, N, 0, FRAME, raw=True)
        with FRAME.context():
            via_fc = pref * kajihara_sum(KajiharaParams(x, (d, e), bb, N), FRAME, raw=True)
        o = Oracle(P, Q)
        mp = [mpmath.mpc(v) for v in z], [mpmath.mpc(v) for v in a]
        ref = o.cs_right(*mp, mpmath.mpc(b), mpmath.mpc(c), mpmath.mpc(d), from_gmpy(e), N)
        assert rel(from_gmpy(via_fc), ref) < 2.0 ** -240


def c3_instance(seed, mvec, frame=FRAME, b=None):
    rng = random.Random(seed)
    z = draw(rng, len(mvec))
    a, b0, c, d, e, f = draw(rng, 6)
    b = b0 if b is None else b
    with frame.context():
        vals = [frame.value(v) for v in (a, b, c, d, e, f)]
        g = vals[0] ** 3 * frame.qpow(sum(mvec) + 2) / (vals[1] * vals[2] * vals[3]
                                                        * vals[4] * vals[5])
    return C3Params(z, a, b, c, d, e, f, g, mvec)


class TestHyperrectangle:
    def test_zero_box(self):
        cp = c3_instance(1, (0, 0, 0))
        assert relative(FRAME, c3_side(cp, "left", FRAME), 1) < 2.0 ** -250
        assert relative(FRAME, c3_side(cp, "right", FRAME), 1) < 2.0 ** -250

    @pytest.mark.parametrize("mvec", [(1, 1), (2,), (2, 0, 1), (3, 2)])
    def test_sides_agree(self, mvec):
        cp = c3_instance(sum(mvec) * 13 + len(mvec), mvec)
        assert cp.balance_residual(FRAME) < 2.0 ** -240
        left = c3_side(cp, "left", FRAME, raw=True)
        right = c3_side(cp, "right", FRAME, raw=True)
        assert relative(FRAME, left, right) < TOL

    def test_terminating_b(self):
        mvec = (1, 2)
        cp = c3_instance(4, mvec, b=FRAME.qpow(-4))
        assert relative(FRAME, c3_side(cp, "left", FRAME, raw=True),
                        c3_side(cp, "right", FRAME, raw=True)) < TOL

    def test_doubled_precision_self_consistent(self):
        cp = c3_instance(8, (2,))
        hi = FRAME.with_precision(512)
        for side in ("left", "right"):
            lo_v = c3_side(cp, side, FRAME)
            hi_v = c3_side(cp, side, hi)
            assert relative(hi, lo_v, hi_v) < 2.0 ** -(256 - 16)

    def test_bad_side_rejected(self):
        with pytest.raises(ValueError):
            c3_side(c3_instance(1, (1,)), "middle", FRAME)


class TestDeltaLemma:
    def test_zero_shift(self):
        assert relative(FRAME, delta_lemma_lhs([0.7, 1.3j], [0, 0], FRAME), 1) < 2.0 ** -250

    def test_one_variable(self):
        with FRAME.context():
            ref = -1 / FRAME.q
        assert relative(FRAME, delta_lemma_lhs([complex(0.8, 0.6)], [1], FRAME), ref) \
            < 2.0 ** -250
        assert relative(FRAME, delta_lemma_rhs([1], FRAME), ref) < 2.0 ** -250

    @given(seed=st.integers(0, 10 ** 6),
           m=st.lists(st.integers(0, 3), min_size=1, max_size=3))
    def test_closed_form(self, seed, m):
        z = draw(random.Random(seed), len(m))
        lhs = delta_lemma_lhs(z, m, FRAME, raw=True)
        assert relative(FRAME, lhs, delta_lemma_rhs(m, FRAME, raw=True)) < TOL

    def test_against_oracle(self):
        mpmath.mp.prec = 320
        z = draw(random.Random(2), 3)
        o = Oracle(P, Q)
        ref = o.delta_lemma([mpmath.mpc(v) for v in z], (2, 0, 1))
        assert rel(from_gmpy(delta_lemma_lhs(z, (2, 0, 1), FRAME)), ref) < 2.0 ** -240
