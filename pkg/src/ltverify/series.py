"""Truncated power series in one or more variables over a ring or algebra.

A :class:`TruncSeries` keeps the terms of total degree ``< D`` as a dict from
exponent tuples to raw coefficients of its domain (a :class:`~ltverify.ring.Ring`
or an :class:`~ltverify.algebra.Algebra`).  Two pieces of bookkeeping make
finite-precision equality honest:

* ``precs[n]`` is the number of trusted p-adic digits of every coefficient of
  total degree ``n``; the profile is nonincreasing in ``n``.
* ``tail`` is a lower bound for the valuation of every *omitted* coefficient
  (total degree ``>= D``).  It is ``inf`` for polynomials known exactly and
  ``0`` when nothing better than integrality is known.  Composition with an
  inner series whose constant term is only topologically nilpotent uses it
  to bound the error made by truncating the outer series.
"""

from fractions import Fraction

from .algebra import Algebra, decay_profile
from .errors import (
    ConstantTermNotComposable,
    DomainMismatch,
    LinearCoefficientNotUnit,
    NotDivisible,
    NotLacunary,
)
from .ring import INF

VARS = {1: ("t",), 2: ("x", "y"), 3: ("x", "y", "z")}


def _nonzero(domain):
    return bool if isinstance(domain, Algebra) else any


def unit_inverse(domain, x, prec=None):
    """Inverse of a unit of ``domain`` (Newton iteration from the constant coordinate)."""
    if not isinstance(domain, Algebra):
        try:
            return domain.unit_inverse(x) if not domain.exact else domain.divide(domain.one, x)[0]
        except NotDivisible as err:
            raise LinearCoefficientNotUnit(str(err)) from err
    R = domain.base
    c0 = x.get(0, R.zero)
    if R.residue(c0) == 0:
        raise LinearCoefficientNotUnit("constant coordinate is not a unit")
    y = domain.from_base(R.unit_inverse(c0) if not R.exact else R.divide(R.one, c0)[0])
    two = domain.from_int(2)
    for _ in range(64):
        xy = domain.mul(x, y)
        if domain.equal(xy, domain.one):
            return y
        y = domain.mul(y, domain.sub(two, xy))
    raise LinearCoefficientNotUnit("Newton iteration for the inverse did not converge")


class TruncSeries:
    """Immutable truncated series; see the module docstring for ``precs``/``tail``."""

    __slots__ = ("domain", "arity", "D", "coeffs", "precs", "tail", "_graded")

    def __init__(self, domain, arity, D, coeffs, precs=None, tail=0):
        self.domain = domain
        self.arity = arity
        self.D = D
        nz = _nonzero(domain)
        self.coeffs = {e: c for e, c in coeffs.items() if sum(e) < D and nz(c)}
        if precs is None:
            precs = (domain.N,) * D
        else:
            precs = list(precs)[:D]
            for n in range(1, D):
                if precs[n] > precs[n - 1]:
                    precs[n] = precs[n - 1]
            precs = tuple(precs)
        self.precs = precs
        self.tail = tail
        self._graded = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def variable(cls, domain, D, arity=1, i=0):
        e = tuple(int(j == i) for j in range(arity))
        return cls(domain, arity, D, {e: domain.one}, tail=INF)

    @classmethod
    def constant(cls, domain, D, c, arity=1, prec=None):
        precs = None if prec is None else (prec,) * D
        return cls(domain, arity, D, {(0,) * arity: c}, precs=precs, tail=INF)

    @classmethod
    def zero(cls, domain, D, arity=1):
        return cls(domain, arity, D, {}, tail=INF)

    @classmethod
    def from_terms(cls, domain, D, terms, arity=1, tail=INF, prec=None):
        """Build from ``{exponent or int: raw coefficient}`` (ints for arity 1)."""
        coeffs = {}
        for e, c in terms.items():
            if isinstance(e, int):
                e = (e,)
            coeffs[e] = domain.add(coeffs[e], c) if e in coeffs else c
        precs = None if prec is None else (prec,) * D
        return cls(domain, arity, D, coeffs, precs=precs, tail=tail)

    def _new(self, coeffs, precs=None, tail=None, domain=None, D=None):
        return TruncSeries(
            self.domain if domain is None else domain,
            self.arity,
            self.D if D is None else D,
            coeffs,
            self.precs if precs is None else precs,
            self.tail if tail is None else tail,
        )

    # -- inspection ---------------------------------------------------------

    def graded(self):
        if self._graded is None:
            g = {}
            for e, c in self.coeffs.items():
                g.setdefault(sum(e), []).append((e, c))
            self._graded = g
        return self._graded

    def coefficient(self, e):
        if isinstance(e, int):
            e = (e,)
        return self.coeffs.get(e, self.domain.zero)

    def constant_term(self):
        return self.coefficient((0,) * self.arity)

    def min_prec(self):
        return self.precs[-1] if self.precs else self.domain.N

    def degree(self):
        """Largest total degree present (-1 for the zero series)."""
        return max(self.graded(), default=-1)

    def degree_part(self, n):
        return {e: c for e, c in self.coeffs.items() if sum(e) == n}

    # -- arithmetic ---------------------------------------------------------

    def _check(self, other):
        if not isinstance(other, TruncSeries):
            raise DomainMismatch(f"expected a series, got {type(other).__name__}")
        if other.domain is not self.domain or other.arity != self.arity:
            raise DomainMismatch("series over different domains or arities")

    def _merge_precs(self, other, D):
        return tuple(min(a, b) for a, b in zip(self.precs[:D], other.precs[:D]))

    def __add__(self, other):
        self._check(other)
        D = min(self.D, other.D)
        dom = self.domain
        out = dict(self.coeffs)
        for e, c in other.coeffs.items():
            out[e] = dom.add(out[e], c) if e in out else c
        return TruncSeries(dom, self.arity, D, out, self._merge_precs(other, D), min(self.tail, other.tail))

    def __neg__(self):
        dom = self.domain
        return self._new({e: dom.neg(c) for e, c in self.coeffs.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, TruncSeries):
            return self.scale(other)
        self._check(other)
        D = min(self.D, other.D)
        dom = self.domain
        mul, add = dom.mul, dom.add
        ga, gb = self.graded(), other.graded()
        acc = {}
        for da, la in ga.items():
            for db, lb in gb.items():
                if da + db >= D:
                    continue
                for ea, ca in la:
                    for eb, cb in lb:
                        e = tuple(x + y for x, y in zip(ea, eb))
                        v = mul(ca, cb)
                        acc[e] = add(acc[e], v) if e in acc else v
        exact = self.tail == INF and other.tail == INF and self.degree() + other.degree() < D
        tail = INF if exact else 0
        return TruncSeries(dom, self.arity, D, acc, self._merge_precs(other, D), tail)

    def scale(self, c, prec=None):
        """Multiply every coefficient by the raw domain element ``c``."""
        dom = self.domain
        out = {e: dom.mul(c, v) for e, v in self.coeffs.items()}
        precs = self.precs if prec is None else tuple(min(a, prec) for a in self.precs)
        return self._new(out, precs=precs)

    def scale_base(self, r):
        """Multiply by a raw element of the base ring of an algebra domain."""
        dom = self.domain
        if isinstance(dom, Algebra):
            return self._new({e: dom.scale(r, v) for e, v in self.coeffs.items()})
        return self.scale(r)

    def __pow__(self, n):
        result = TruncSeries.constant(self.domain, self.D, self.domain.one, self.arity)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def truncate(self, D):
        D = min(D, self.D)
        tail = self.tail if D == self.D or self.degree() < D else 0
        return TruncSeries(self.domain, self.arity, D, self.coeffs, self.precs[:D], tail)

    def map_coeffs(self, f, domain, precs=None, tail=None):
        return TruncSeries(domain, self.arity, self.D, {e: f(c) for e, c in self.coeffs.items()},
                           self.precs if precs is None else precs, self.tail if tail is None else tail)

    def with_prec(self, prec):
        return self._new(self.coeffs, precs=tuple(min(a, prec) for a in self.precs))

    def divide_by(self, r, rprec=None):
        """Exact division of every coefficient by a raw base-ring element."""
        dom = self.domain
        out = {}
        precs = list(self.precs)
        for e, c in self.coeffs.items():
            n = sum(e)
            if isinstance(dom, Algebra):
                q, pr = dom.divide_base(c, r, self.precs[n], rprec)
            else:
                q, pr = dom.divide(c, r, self.precs[n], rprec)
            out[e] = q
            precs[n] = min(precs[n], pr)
        return self._new(out, precs=precs)

    def residue(self):
        """Reduction of every coefficient modulo the maximal ideal."""
        dom = self.domain
        if isinstance(dom, Algebra):
            res = dom.residue_algebra()
            f = dom.residue
        else:
            from .ring import residue_field

            res = residue_field(dom.p)
            f = lambda c: (dom.residue(c),)  # noqa: E731
        bad = [n for n in range(self.D) if self.precs[n] < 1]
        if bad:
            from .errors import PrecisionExhausted

            raise PrecisionExhausted(f"degree {bad[0]} has no trusted digit")
        return TruncSeries(res, self.arity, self.D, {e: f(c) for e, c in self.coeffs.items()}, None, 0)

    # -- comparison ---------------------------------------------------------

    def compare(self, other):
        """Compare at per-degree precision.

        Returns ``(equal, first_offending_exponent_or_None, certified_digits)``.
        """
        self._check(other)
        D = min(self.D, other.D)
        precs = self._merge_precs(other, D)
        dom = self.domain
        exps = set(e for e in self.coeffs if sum(e) < D) | set(e for e in other.coeffs if sum(e) < D)
        for e in sorted(exps, key=lambda e: (sum(e), tuple(-x for x in e))):
            a = self.coeffs.get(e, dom.zero)
            b = other.coeffs.get(e, dom.zero)
            if not dom.equal(a, b, precs[sum(e)]):
                return False, e, min(precs) if precs else dom.N
        return True, None, min(precs) if precs else dom.N

    def __eq__(self, other):
        if not isinstance(other, TruncSeries):
            return NotImplemented
        return self.compare(other)[0]

    __hash__ = None

    # -- presentation -------------------------------------------------------

    def term_text(self, e):
        names = VARS.get(self.arity, tuple(f"x{i}" for i in range(self.arity)))
        mono = "·".join(n if k == 1 else f"{n}^{k}" for n, k in zip(names, e) if k)
        dom = self.domain
        c = self.coeffs[e]
        prec = self.precs[sum(e)]
        if dom.equal(c, dom.one, prec) and mono:
            return mono
        ct = dom.text(c, prec)
        body = ct if dom.exact else f"{ct} mod {dom.p}^{prec}"
        return f"({body})·{mono}" if mono else f"({body})"

    def text(self):
        keys = sorted(self.coeffs, key=lambda e: (sum(e), tuple(-x for x in e)))
        terms = [self.term_text(e) for e in keys]
        body = " + ".join(terms) if terms else "0"
        return f"{body} + O(deg {self.D})"

    def __str__(self):
        return self.text()

    __repr__ = __str__


def variables(domain, D, arity):
    return [TruncSeries.variable(domain, D, arity, i) for i in range(arity)]


def embed_series(s, arity, positions):
    """View ``s`` as a series in ``arity`` variables, its variables placed at ``positions``."""
    out = {}
    for e, c in s.coeffs.items():
        full = [0] * arity
        for k, pos in zip(e, positions):
            full[pos] = k
        out[tuple(full)] = c
    return TruncSeries(s.domain, arity, s.D, out, s.precs, s.tail)


# ---------------------------------------------------------------------------
# composition


def _decay(inner, kmax):
    """phi(k): lower bound on the valuation of c^k for the constant term c of ``inner``."""
    dom = inner.domain
    c = inner.constant_term()
    if not _nonzero(dom)(c):
        return [Fraction(0)] + [INF] * kmax
    prof = decay_profile(dom, c, inner.precs[0] if inner.precs else dom.N, kmax)
    if prof is None:
        raise ConstantTermNotComposable(
            f"constant term {dom.text(c)} is a unit or has no certified decay"
        )
    return prof


def _minplus(a, b):
    n = len(a)
    return [min(a[i] + b[k - i] for i in range(k + 1)) for k in range(n)]


def _powers(s, needed):
    """Powers ``s**k`` for ``k`` in ``needed``, sharing work along a fixed step."""
    memo = {0: TruncSeries.constant(s.domain, s.D, s.domain.one, s.arity), 1: s}
    ks = sorted(set(needed))
    gaps = [b - a for a, b in zip(ks, ks[1:]) if b > a]
    step = min(gaps) if gaps else 1

    def get(k):
        if k not in memo:
            if k - step in memo and step in memo:
                memo[k] = memo[k - step] * memo[step]
            else:
                h = get(k // 2)
                sq = h * h
                memo[k] = sq * s if k % 2 else sq
        return memo[k]

    get(step)
    for k in ks:
        get(k)
    return memo


def compose(outer, inners):
    """Substitute the series ``inners`` for the variables of ``outer``.

    ``inners`` may be a single series when ``outer`` has one variable.  Inner
    constant terms must be zero, nilpotent, or topologically nilpotent with a
    certified decay; the precision of each output degree accounts for the
    omitted terms of ``outer`` through ``outer.tail``.
    """
    if isinstance(inners, TruncSeries):
        inners = [inners]
    inners = list(inners)
    if len(inners) != outer.arity:
        raise DomainMismatch(f"outer has {outer.arity} variables, got {len(inners)} inner series")
    dom = outer.domain
    arity = inners[0].arity
    for s in inners:
        if s.domain is not dom or s.arity != arity:
            raise DomainMismatch("inner series must share the outer domain and arity")
    D = min([outer.D] + [s.D for s in inners])
    inners = [s.truncate(D) if s.D > D else s for s in inners]

    decays = [_decay(s, D) for s in inners]
    all_zero = all(d[1] == INF for d in decays) if D >= 1 else True

    needed = [set() for _ in range(outer.arity)]
    for e in outer.coeffs:
        for i, k in enumerate(e):
            needed[i].add(k)
    pw = [_powers(s, needed[i]) for i, s in enumerate(inners)]

    def build(coeffs, var):
        # sum over terms of coeffs (exponents from position var on)
        groups = {}
        for e, c in coeffs.items():
            groups.setdefault(e[0], {})[e[1:]] = c
        total = None
        for k, sub in sorted(groups.items()):
            if var == outer.arity - 1:
                inner_sum = pw[var][k].scale(sub[()])
            else:
                rest = build(sub, var + 1)
                inner_sum = pw[var][k] * rest
            total = inner_sum if total is None else total + inner_sum
        if total is None:
            total = TruncSeries.zero(dom, D, arity)
        return total

    if outer.coeffs:
        result = build(outer.coeffs, 0)
    else:
        result = TruncSeries.zero(dom, D, arity)

    # precision profile
    inner_prec = [min(s.precs[m] for s in inners) for m in range(D)]
    precs = []
    if outer.tail != INF and not all_zero:
        psi = decays[0]
        for d in decays[1:]:
            psi = _minplus(psi, d)
    for m in range(D):
        op = outer.precs[m] if all_zero else outer.precs[D - 1]
        pr = min(op, inner_prec[m], result.precs[m])
        if outer.tail != INF and not all_zero:
            bound = outer.tail + psi[D - m]
            pr = min(pr, dom.digits_for(bound))
        precs.append(pr)
    tail = 0
    if outer.tail == INF and all(s.tail == INF for s in inners):
        # exact polynomials: the composite is exact if nothing was cut off
        degs = [s.degree() for s in inners]
        top = max((sum(k * d for k, d in zip(e, degs)) for e in outer.coeffs), default=-1)
        if top < D:
            tail = INF
    return TruncSeries(dom, arity, D, result.coeffs, precs, tail)


def identity(domain, D):
    return TruncSeries.variable(domain, D)


def comp_inverse(f):
    """Two-sided compositional inverse of a one-variable series.

    The linear coefficient must be a unit; the constant term must be
    composable in the sense of :func:`compose`.
    """
    if f.arity != 1:
        raise DomainMismatch("comp_inverse needs a one-variable series")
    dom = f.domain
    D = f.D
    c1 = f.coefficient(1)
    inv1 = unit_inverse(dom, c1)
    c0 = f.constant_term()
    t = TruncSeries.variable(dom, D)
    f0 = f._new({e: c for e, c in f.coeffs.items() if e != (0,)})
    g = t.scale(inv1)
    for _ in range(D):
        err = t - compose(f0, g)
        g = g + err.scale(inv1)
    exact = f.tail == INF and all(sum(e) <= 1 for e in f0.coeffs)
    g = TruncSeries(dom, 1, D, g.coeffs, tuple(min(a, b) for a, b in zip(g.precs, f.precs)),
                    INF if exact else 0)
    if _nonzero(dom)(c0):
        shift = t - TruncSeries.constant(dom, D, c0)
        shift = TruncSeries(dom, 1, D, shift.coeffs, f.precs, INF)
        g = compose(g, shift)
    return g


# ---------------------------------------------------------------------------
# lacunarity and blowup


def is_lacunary(g, p):
    """True iff every coefficient of total degree not congruent to 1 mod (p-1) vanishes."""
    if p == 2:
        return True
    dom = g.domain
    for e, c in g.coeffs.items():
        n = sum(e)
        if (n - 1) % (p - 1) != 0 and not dom.is_zero(c, g.precs[n]):
            return False
    return True


def blowup(g, lam, p, lam_val=None):
    """Scale the homogeneous piece of degree ``1 + j(p-1)`` by ``lam**j``.

    ``lam`` is a raw element of the base ring of ``g``'s domain and
    ``lam_val`` its normalized valuation (used to strengthen ``tail``).
    """
    if not is_lacunary(g, p):
        raise NotLacunary("series has terms outside degrees 1 mod (p-1)")
    dom = g.domain
    R = dom.base if isinstance(dom, Algebra) else dom
    if (0,) * g.arity in g.coeffs:
        raise NotLacunary("blowup is defined for series without constant term")
    lam_pows = {0: R.one}
    out = {}
    for e, c in g.coeffs.items():
        n = sum(e)
        if (n - 1) % (p - 1):
            continue
        j = (n - 1) // (p - 1)
        if j not in lam_pows:
            lam_pows[j] = R.pow(lam, j)
        lp = lam_pows[j]
        out[e] = dom.scale(lp, c) if isinstance(dom, Algebra) else R.mul(lp, c)
    tail = g.tail
    if lam_val is not None and tail != INF:
        jmin = -(-(g.D - 1) // (p - 1))
        tail = tail + lam_val * jmin
    return TruncSeries(dom, g.arity, g.D, out, g.precs, tail)
