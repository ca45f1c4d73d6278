import pytest

from helpers import alpha_square, tower
from properties import series_suite
from ltverify.errors import (
    ConstantTermNotComposable,
    DomainMismatch,
    LinearCoefficientNotUnit,
    NotLacunary,
    PrecisionExhausted,
)
from ltverify.ring import INF, constants
from ltverify.series import (
    TruncSeries,
    blowup,
    comp_inverse,
    compose,
    embed_series,
    identity,
    is_lacunary,
    unit_inverse,
    variables,
)


def series(R, D, terms, tail=INF):
    return TruncSeries.from_terms(R, D, {k: R.from_int(c) for k, c in terms.items()}, tail=tail)


def test_text_format():
    R = tower(2)
    t = TruncSeries.variable(R, 4)
    assert t.text() == "t + O(deg 4)"
    s = series(R, 4, {1: 1, 2: 3})
    assert s.text() == "t + (3 mod 2^24)·t^2 + O(deg 4)"
    x, y = variables(R, 3, 2)
    assert (x * y).text() == "x·y + O(deg 3)"


def test_geometric_series_product():
    R = tower(3)
    D = 8
    one_minus_t = series(R, D, {0: 1, 1: -1})
    geo = series(R, D, {k: 1 for k in range(D)}, tail=0)
    assert one_minus_t * geo == TruncSeries.constant(R, D, R.one)


def test_power_and_truncate():
    R = tower(3)
    t = TruncSeries.variable(R, 6)
    s = (t + t * t) ** 3
    assert s.coefficient(4) == R.from_int(3)
    assert s.truncate(4).D == 4
    assert s.truncate(4).coefficient(4) == R.zero


def test_mul_tail_tracks_exactness():
    R = tower(3)
    t = TruncSeries.variable(R, 6)
    assert (t * t).tail == INF
    assert ((t * t) * (t * t * t * t)).tail == 0


def test_compose_with_identity():
    R = tower(5)
    f = series(R, 6, {1: 1, 2: 7, 5: 3})
    t = identity(R, 6)
    assert compose(f, t) == f
    assert compose(t, f) == f


def test_inverse_of_t_plus_t_squared():
    # g + g^2 = t gives g = (sqrt(1 + 4t) - 1)/2 = t - t^2 + 2t^3 - 5t^4 + 14t^5 - 42t^6
    R = tower(3)
    f = series(R, 7, {1: 1, 2: 1})
    want = series(R, 7, {1: 1, 2: -1, 3: 2, 4: -5, 5: 14, 6: -42})
    g = comp_inverse(f)
    assert g == want
    assert compose(f, g) == identity(R, 7)


def test_inverse_with_nilpotent_constant():
    A = alpha_square(3)
    a = A.generator("a")
    D = 6
    f = TruncSeries.constant(A, D, a) + TruncSeries.variable(A, D)
    g = comp_inverse(f)
    assert g == TruncSeries.constant(A, D, A.neg(a)) + TruncSeries.variable(A, D)
    assert g.tail == INF


def test_topologically_nilpotent_constant():
    # 1/(1 - t) evaluated at lam + t; the omitted tail costs digits
    p, D = 3, 12
    O = tower(p, "cyclotomic_plus_sqrt_pi")
    lam = constants(O)["lam"]
    geo = series(O, D, {k: 1 for k in range(D)}, tail=0)
    inner = TruncSeries.constant(O, D, lam) + TruncSeries.variable(O, D)
    out = compose(geo, inner)
    # lam^k has valuation k/2 and v(3) = 2, so the degree-0 bound is (D/2)/2 digits
    assert out.precs[0] == 3
    c0 = out.constant_term()
    assert O.equal(O.mul(c0, O.sub(O.one, lam)), O.one, out.precs[0])


def test_unit_constant_not_composable():
    R = tower(3)
    f = series(R, 4, {1: 1, 2: 1})
    inner = series(R, 4, {0: 1, 1: 1})
    with pytest.raises(ConstantTermNotComposable):
        compose(f, inner)


def test_inverse_needs_unit_linear_term():
    R = tower(3)
    pi = constants(R)["pi"]
    f = TruncSeries.from_terms(R, 4, {1: pi, 2: R.one})
    with pytest.raises(LinearCoefficientNotUnit):
        comp_inverse(f)


def test_domain_mismatch():
    t3 = TruncSeries.variable(tower(3), 4)
    t5 = TruncSeries.variable(tower(5), 4)
    with pytest.raises(DomainMismatch):
        t3 + t5
    F = TruncSeries.variable(tower(3), 4, 2, 0)
    with pytest.raises(DomainMismatch):
        compose(F, [t3])


def test_embed_series():
    R = tower(3)
    f = series(R, 4, {1: 1, 2: 5})
    x, y, z = variables(R, 4, 3)
    e = embed_series(f, 3, (1,))
    assert e == y + (y * y).scale(R.from_int(5))


def test_lacunarity():
    R = tower(3)
    assert is_lacunary(series(R, 6, {1: 1, 3: 2, 5: 1}), 3)
    assert not is_lacunary(series(R, 6, {1: 1, 2: 1}), 3)
    assert is_lacunary(series(tower(2), 6, {1: 1, 2: 1}), 2)


def test_blowup():
    p = 3
    O = tower(p, "cyclotomic_plus_sqrt_pi")
    lam = constants(O)["lam"]
    g = series(O, 8, {1: 1, 3: 1, 5: 1})
    b = blowup(g, lam, p)
    assert b.coefficient(3) == lam
    assert b.coefficient(5) == O.mul(lam, lam)
    with pytest.raises(NotLacunary):
        blowup(series(O, 8, {1: 1, 2: 1}), lam, p)
    with pytest.raises(NotLacunary):
        blowup(series(O, 8, {0: 3, 1: 1}), lam, p)


def test_blowup_is_composition_homomorphism():
    p = 3
    O = tower(p, "cyclotomic_plus_sqrt_pi")
    lam = constants(O)["lam"]
    g = series(O, 8, {1: 1, 3: 2, 5: 1})
    h = series(O, 8, {1: 2, 3: 1, 7: 1})
    assert blowup(compose(g, h), lam, p) == compose(blowup(g, lam, p), blowup(h, lam, p))


def test_residue_requires_precision():
    R = tower(3)
    t = TruncSeries.variable(R, 4)
    assert t.residue() == TruncSeries.variable(t.residue().domain, 4)
    with pytest.raises(PrecisionExhausted):
        t.with_prec(0).residue()


def test_divide_by_reports_precision():
    R = tower(3)
    s = series(R, 4, {1: 3, 2: 9})
    q = s.divide_by(R.from_int(3))
    assert q == series(R, 4, {1: 1, 2: 3})
    assert q.min_prec() == R.N - 1


def test_compare_reports_first_difference():
    R = tower(3)
    a = series(R, 5, {1: 1, 3: 1})
    b = series(R, 5, {1: 1, 3: 2})
    ok, e, digits = a.compare(b)
    assert not ok and e == (3,) and digits == R.N


def test_unit_inverse():
    A = alpha_square(3)
    u = A.add(A.one, A.generator("a"))
    inv = unit_inverse(A, u)
    assert A.equal(A.mul(u, inv), A.one)
    with pytest.raises(LinearCoefficientNotUnit):
        unit_inverse(A, A.generator("a"))


@pytest.mark.parametrize("check", series_suite(100), ids=lambda c: c.__name__)
def test_series_properties(check):
    check()
