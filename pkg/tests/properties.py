"""Randomized property suites shared by the unit tests and the acceptance run.

Each ``*_suite(n)`` returns a list of zero-argument callables; calling one
runs a hypothesis search with ``n`` examples and raises on a counterexample.
"""

from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import (
    PRIMES,
    algebra_A,
    algebra_B,
    algebra_Bprime,
    algebra_elements,
    all_towers,
    alpha_square,
    group_series,
    raw_elements,
    ring_series,
    tower,
)
from ltverify.algebra import AlgebraElement, frobenius_defect, tensor_algebras
from ltverify.ring import exact_divide, valuation
from ltverify.series import TruncSeries, comp_inverse, compose, identity


def uniformizer(R):
    if R.level_degrees:
        return R.generator(len(R.level_degrees))
    return R.from_int(R.p)


@st.composite
def ring_with_elements(draw, count):
    R = draw(st.sampled_from(all_towers()))
    return R, [draw(raw_elements(R)) for _ in range(count)]


@st.composite
def element_of_valuation(draw, R, max_steps):
    """``s^k * u`` with ``u`` random, so the valuation is at least k steps of s."""
    k = draw(st.integers(0, max_steps))
    u = draw(raw_elements(R))
    return R.element(R.mul(R.pow(uniformizer(R), k), u))


def ring_suite(n):
    cfg = settings(max_examples=n)

    @cfg
    @given(ring_with_elements(3))
    def axioms(case):
        R, (x, y, z) = case
        assert R.mul(R.mul(x, y), z) == R.mul(x, R.mul(y, z))
        assert R.add(R.add(x, y), z) == R.add(x, R.add(y, z))
        assert R.mul(x, y) == R.mul(y, x)
        assert R.add(x, y) == R.add(y, x)
        assert R.mul(x, R.add(y, z)) == R.add(R.mul(x, y), R.mul(x, z))
        assert R.mul(R.one, x) == x
        assert R.add(x, R.neg(x)) == R.zero

    @cfg
    @given(st.data())
    def valuation_and_division(data):
        R = data.draw(st.sampled_from(all_towers()))
        third = R.e * R.N // 3
        x = data.draw(element_of_valuation(R, third))
        y = data.draw(element_of_valuation(R, third))
        vx, vy = R.vs(x.coords), R.vs(y.coords)
        if vx is None or vy is None or vx + vy >= R.e * R.N:
            return  # beyond the precision horizon
        xy = x * y
        assert valuation(xy) == valuation(x) + valuation(y)
        q = exact_divide(xy, y)
        assert q == x
        assert q.prec >= 1

    @cfg
    @given(ring_with_elements(2))
    def residue_is_homomorphism(case):
        R, (x, y) = case
        p = R.p
        assert R.residue(R.add(x, y)) == (R.residue(x) + R.residue(y)) % p
        assert R.residue(R.mul(x, y)) == (R.residue(x) * R.residue(y)) % p

    return [axioms, valuation_and_division, residue_is_homomorphism]


def _algebras():
    out = []
    for p in PRIMES:
        out += [algebra_B(p), algebra_Bprime(p), algebra_A(p), alpha_square(p)]
    out.append(tensor_algebras(algebra_A(2), algebra_Bprime(2)))
    return out


@st.composite
def algebra_with_elements(draw, count):
    alg = draw(st.sampled_from(_algebras()))
    return alg, [draw(algebra_elements(alg)) for _ in range(count)]


def _tensor_triples():
    B2 = algebra_B(2)
    return [(B2, B2, B2), tuple(alpha_square(2, (name,)) for name in ("a", "b", "c"))]


def algebra_suite(n):
    cfg = settings(max_examples=n)

    @cfg
    @given(algebra_with_elements(3))
    def axioms(case):
        alg, (x, y, z) = case
        assert alg.equal(alg.mul(alg.mul(x, y), z), alg.mul(x, alg.mul(y, z)))
        assert alg.equal(alg.mul(x, y), alg.mul(y, x))
        assert alg.equal(alg.mul(x, alg.add(y, z)), alg.add(alg.mul(x, y), alg.mul(x, z)))
        assert alg.equal(alg.mul(alg.one, x), x)

    @cfg
    @given(st.data())
    def frobenius(data):
        p = data.draw(st.sampled_from(PRIMES))
        B = algebra_B(p)
        x = AlgebraElement(B, data.draw(algebra_elements(B)), B.base.N)
        q = frobenius_defect(x)
        pi = uniformizer(B.base)
        assert B.equal(B.add(B.scale(pi, q.raw), x.raw), B.pow(x.raw, p), q.prec)

    @cfg
    @given(st.data())
    def tensor_associative(data):
        X, Y, Z = data.draw(st.sampled_from(_tensor_triples()))
        left = tensor_algebras(tensor_algebras(X, Y), Z)
        right = tensor_algebras(X, tensor_algebras(Y, Z))
        assert left.rank == right.rank <= 8
        u = data.draw(algebra_elements(left))
        v = data.draw(algebra_elements(left))
        # both sides enumerate the basis in the same generator order
        assert left.equal(left.mul(u, v), right.mul(u, v))

    return [axioms, frobenius, tensor_associative]


def series_suite(n):
    cfg = settings(max_examples=n)
    A = alpha_square(2)
    D = 6

    @cfg
    @given(group_series(A, D), group_series(A, D), group_series(A, D))
    def group_laws(f, g, h):
        t = identity(A, D)
        assert compose(compose(f, g), h) == compose(f, compose(g, h))
        fi = comp_inverse(f)
        assert compose(f, fi) == t
        assert compose(fi, f) == t
        assert compose(f, t) == f
        assert compose(t, f) == f

    @cfg
    @given(st.data())
    def truncation_consistent(data):
        R = tower(data.draw(st.sampled_from((2, 3))), N=12)
        d = D - 1
        f = data.draw(ring_series(R, d, arity=2))
        g = data.draw(ring_series(R, d))
        h = data.draw(ring_series(R, d))
        Dp = data.draw(st.integers(1, d - 1))
        whole = compose(f, [g, h]).truncate(Dp)
        part = compose(f.truncate(Dp), [g.truncate(Dp), h.truncate(Dp)])
        assert whole == part
        assert whole.min_prec() == part.min_prec() == R.N

    @cfg
    @given(st.data())
    def topologically_nilpotent_constant(data):
        # substituting a + t with a^p = -mu*a: the result must be certified
        p = data.draw(st.sampled_from((2, 3)))
        Ap = algebra_A(p, N=12)
        f = data.draw(ring_series(Ap.base, D))
        fA = f.map_coeffs(Ap.from_base, Ap)
        a = Ap.generator(Ap.names[0])
        inner = TruncSeries.constant(Ap, D, a) + TruncSeries.variable(Ap, D)
        out = compose(fA, inner)
        assert out.min_prec() >= 1
        # evaluating at t = 0 is the finite sum f(a) since f is a polynomial
        acc = Ap.zero
        for (k,), c in f.coeffs.items():
            acc = Ap.add(acc, Ap.scale(c, Ap.pow(a, k)))
        assert Ap.equal(out.constant_term(), acc, out.precs[0])

    return [group_laws, truncation_consistent, topologically_nilpotent_constant]


def run_all(suite):
    for check in suite:
        check()
    return len(suite)
