"""Two commuting order-two actions on the line over Z_2[sqrt2] and their reduction mod sqrt2.

The group law is ``t + u + sqrt2*t*u``.  A point ``a`` with ``a^2 = -sqrt2*a``
acts by translation, ``t -> t + a + sqrt2*a*t``, and a parameter ``b`` with
``b^2 = -sqrt2*b`` acts by ``t -> (1 + sqrt2*b)t - b*t^2/(1 + sqrt2*t)``, which
is inversion on the component cut out by the idempotent ``-b/sqrt2``.  Mod
sqrt2 the composite becomes ``t -> t + a + b*t^2``.

The last part checks the characteristic-p law
``(a + t + b t^p) o (a' + t + b' t^p) = (a + a') + t + (b + b') t^p``
over ``F_p[a, b, a', b']`` modulo p-th powers.
"""

from fractions import Fraction

from .algebra import Algebra, build_alpha_square
from .errors import InvalidParams
from .report import Battery, VerificationReport, element_check, series_check
from .ring import INF, PrecisionParams, build_ring
from .series import TruncSeries, compose, embed_series

SQRT2_POLY = [-2, 0, 1]

EXTENSION_NOTE = "b_composite_law checks a group law for the b-parameters that goes beyond the stated commutation"


class ExampleContext:
    """Z_2[sqrt2], the algebra R[a, b]/(a^2 + sqrt2 a, b^2 + sqrt2 b), and a degree bound."""

    def __init__(self, params):
        if params.p != 2:
            raise InvalidParams("the sqrt2 example lives over Z_2; p must be 2")
        self.params = params
        self.D = params.D
        self.R = build_ring(params, [SQRT2_POLY], names=["r2"], enforce_budget=False)
        self.r2 = self.R.generator(1)
        self.Kab = self.point_algebra(["a", "b"])

    def point_algebra(self, names):
        """R[x_1, ...]/(x_i^2 + sqrt2 x_i)."""
        R = self.R
        rel = [R.zero, R.neg(self.r2)]
        return Algebra(R, names, [rel] * len(names), label="K[" + ",".join(names) + "]").validate()


def build_example_context(params):
    return ExampleContext(params)


def _base_scale(dom, r, x):
    """Multiply ``x`` by a base-ring element; ``dom`` is the ring itself or an algebra over it."""
    return dom.scale(r, x) if isinstance(dom, Algebra) else dom.mul(r, x)


def example_group_law(ctx, dom=None, D=None):
    """``x + y + sqrt2*x*y`` as an exact bivariate series."""
    dom = ctx.R if dom is None else dom
    D = ctx.D if D is None else D
    r2 = ctx.r2 if dom is ctx.R else dom.from_base(ctx.r2)
    return TruncSeries.from_terms(
        dom, D, {(1, 0): dom.one, (0, 1): dom.one, (1, 1): r2}, arity=2, tail=INF
    )


def a_action(ctx, a=None, dom=None, D=None):
    """``t -> t + a + sqrt2*a*t`` for a point ``a`` (raw element of ``dom``)."""
    dom = ctx.Kab if dom is None else dom
    D = ctx.D if D is None else D
    a = dom.generator("a") if a is None else a
    lin = dom.add(dom.one, _base_scale(dom, ctx.r2, a))
    return TruncSeries.from_terms(dom, D, {0: a, 1: lin}, tail=INF)


def b_action(ctx, D=None, b=None, dom=None):
    """``t -> (1 + sqrt2 b) t - b t^2 / (1 + sqrt2 t)`` expanded below degree D."""
    dom = ctx.Kab if dom is None else dom
    D = ctx.D if D is None else D
    if D < 4:
        raise InvalidParams("b_action needs a degree bound of at least 4")
    R = dom.base if isinstance(dom, Algebra) else dom
    b = dom.generator("b") if b is None else b
    terms = {1: dom.add(dom.one, _base_scale(dom, ctx.r2, b))}
    neg_r2 = R.neg(ctx.r2)
    w = R.one
    for k in range(D - 2):
        terms[k + 2] = dom.neg(_base_scale(dom, w, b))
        w = R.mul(w, neg_r2)
    # omitted terms are b * (-sqrt2)^k with k >= D - 2
    return TruncSeries.from_terms(dom, D, terms, tail=Fraction(D - 2))


def composite_formula(ctx, dom=None, D=None):
    """``a + B(t) + sqrt2*a*B(t)`` with ``B`` the b-action, written out directly."""
    dom = ctx.Kab if dom is None else dom
    D = ctx.D if D is None else D
    B = b_action(ctx, D, dom=dom)
    a = dom.generator("a")
    ca = TruncSeries.constant(dom, D, a)
    return ca + B + B.scale(dom.scale(ctx.r2, a))


def specialize_to_zero(dom, s):
    """Send every generator to 0 (a ring map since each relation has no constant term)."""
    R = dom.base
    return s.map_coeffs(lambda c: c.get(0, R.zero), R)


def char_p_series(alg, D, a, b):
    p = alg.p
    return TruncSeries.from_terms(alg, D, {0: alg.generator(a), 1: alg.one, p: alg.generator(b)}, tail=INF)


def char_p_law(p):
    """Exact check of the composition law over F_p[a, b, a', b']/(p-th powers)."""
    alg = build_alpha_square(p, names=("a", "b", "a'", "b'"))
    D = p * p + 1
    lhs = compose(char_p_series(alg, D, "a", "b"), char_p_series(alg, D, "a'", "b'"))
    sa = alg.add(alg.generator("a"), alg.generator("a'"))
    sb = alg.add(alg.generator("b"), alg.generator("b'"))
    rhs = TruncSeries.from_terms(alg, D, {0: sa, 1: alg.one, p: sb}, tail=INF)
    return series_check(lhs, rhs)


def verify_example(params=None):
    """Run the sqrt2 example battery; failures become report entries."""
    if params is None:
        params = PrecisionParams(2, 16, 16)
    rep = VerificationReport("example25", params.p, params.N, params.D)
    rep.notes.append(EXTENSION_NOTE)
    bat = Battery(rep)
    ctx = bat.build("00.context", lambda: ExampleContext(params))
    if ctx is None:
        return rep.finish()
    D, R, K = ctx.D, ctx.R, ctx.Kab
    A = a_action(ctx)
    Bt = b_action(ctx)

    bat.run("00.context.sqrt2_squared", lambda: element_check(R, R.mul(ctx.r2, ctx.r2), R.from_int(2), R.N))
    bat.run("00.context.relations", lambda: _relations_check(ctx))

    law = example_group_law(ctx)

    def law_assoc():
        X, Y, Z = (TruncSeries.variable(R, D, 3, i) for i in range(3))
        lhs = compose(law, [embed_series(law, 3, (0, 1)), Z])
        rhs = compose(law, [X, embed_series(law, 3, (1, 2))])
        return series_check(lhs, rhs)

    def law_residue():
        res = law.residue()
        X = TruncSeries.variable(res.domain, D, 2, 0)
        Y = TruncSeries.variable(res.domain, D, 2, 1)
        return series_check(res, X + Y)

    bat.run("01.group_law.associative", law_assoc)
    bat.run("01.group_law.additive_reduction", law_residue)

    AB = bat.build("02.composite.a_after_b", lambda: compose(A, Bt))
    BA = bat.build("02.composite.b_after_a", lambda: compose(Bt, A))
    if AB is None or BA is None:
        return rep.finish()
    bat.run("02.commutation", lambda: series_check(AB, BA))
    formula = composite_formula(ctx)
    bat.run("03.composite_formula.a_after_b", lambda: series_check(AB, formula))
    bat.run("03.composite_formula.b_after_a", lambda: series_check(BA, formula))

    def reduction():
        res = AB.residue()
        F = res.domain
        want = TruncSeries.from_terms(F, D, {0: F.generator("a"), 1: F.one, 2: F.generator("b")}, tail=INF)
        return series_check(res, want)

    bat.run("04.reduction_is_t_plus_a_plus_bt2", reduction)

    def specialization():
        t = TruncSeries.variable(R, D)
        return series_check(specialize_to_zero(K, AB), t)

    bat.run("05.specialization_to_identity", specialization)

    def a_order_two():
        t = TruncSeries.variable(K, D)
        return series_check(compose(A, A), t)

    def a_composite():
        K2 = ctx.point_algebra(["a", "a'"])
        a, a2 = K2.generator("a"), K2.generator("a'")
        lhs = compose(a_action(ctx, a, K2), a_action(ctx, a2, K2))
        s = K2.add(K2.add(a, a2), K2.scale(ctx.r2, K2.mul(a, a2)))
        return series_check(lhs, a_action(ctx, s, K2))

    def b_respects_law():
        lawK = example_group_law(ctx, K)
        bx, by = embed_series(Bt, 2, (0,)), embed_series(Bt, 2, (1,))
        return series_check(compose(Bt, lawK), compose(lawK, [bx, by]))

    def b_composite():
        K2 = ctx.point_algebra(["b", "b'"])
        b, b2 = K2.generator("b"), K2.generator("b'")
        lhs = compose(b_action(ctx, D, b, K2), b_action(ctx, D, b2, K2))
        s = K2.add(K2.add(b, b2), K2.scale(ctx.r2, K2.mul(b, b2)))
        return series_check(lhs, b_action(ctx, D, s, K2))

    bat.run("06.actions.a_order_two", a_order_two)
    bat.run("06.actions.a_composite_is_translation", a_composite)
    bat.run("06.actions.b_respects_group_law", b_respects_law)
    bat.run("07.b_composite_law", b_composite)
    for q in (2, 3, 5):
        bat.run(f"08.char_p_law.p{q}", lambda q=q: char_p_law(q))
    return rep.finish()


def _relations_check(ctx):
    K, R = ctx.Kab, ctx.R
    for name in ("a", "b"):
        g = K.generator(name)
        lhs = K.mul(g, K.add(g, K.from_base(ctx.r2)))
        if not K.is_zero(lhs):
            return False, R.N, f"{name}*({name} + sqrt2) = {K.text(lhs)}"
    return True, R.N, None
