"""Finite free commutative algebras over a tower ring.

Every algebra here is a tensor product of monogenic pieces ``R[g]/(g^d - c(g))``
whose relation coefficients lie in the base ring.  The basis is the set of
exponent tuples ``(e_1, ..., e_k)`` with ``e_i < d_i``; structure constants
are computed lazily from per-generator power tables.

Raw elements are dicts ``{basis index: raw ring element}`` holding only
nonzero coordinates.  They are never mutated once built.
"""

import itertools
import math
from fractions import Fraction

from .errors import (
    BaseMismatch,
    MembershipUncertifiable,
    NotDivisible,
    NotIdempotent,
    NonClosedTable,
    PrecisionExhausted,
    RelationInconsistent,
)
from .ring import INF, RingElement, constants, residue_field, with_precision


class Algebra:
    """``base[g_1, ..., g_k] / (g_i^{d_i} = sum_j c_ij g_i^j)``."""

    def __init__(self, base, names, relations, label=None):
        self.base = base
        self.names = tuple(names)
        if len(set(self.names)) != len(self.names):
            raise RelationInconsistent(f"duplicate generator names {self.names}")
        rels = []
        for name, rel in zip(self.names, relations):
            rel = tuple(tuple(c) for c in rel)
            if len(rel) < 1 or any(len(c) != base.e for c in rel):
                raise RelationInconsistent(f"bad relation for {name}")
            rels.append(rel)
        if len(rels) != len(self.names):
            raise RelationInconsistent("one relation per generator is required")
        self.relations = tuple(rels)
        self.orders = tuple(len(r) for r in rels)
        self.label = label or "[" + ",".join(self.names) + "]"
        self.basis = list(itertools.product(*[range(d) for d in self.orders]))
        self.rank = len(self.basis)
        self._index = {m: i for i, m in enumerate(self.basis)}
        self._powers = [self._power_table(i) for i in range(len(self.names))]
        self._table = {}
        self.zero = {}
        self.one = {0: base.one}
        self._residue_alg = None

    # -- structure ----------------------------------------------------------

    def _power_table(self, i):
        """Normal forms of g_i^k for 0 <= k <= 2d-2 as dicts {exponent: coeff}."""
        R = self.base
        d = self.orders[i]
        rel = self.relations[i]
        forms = [{k: R.one} for k in range(d)]
        for k in range(d, 2 * d - 1):
            prev = forms[k - 1]
            nxt = {}
            for ex, c in prev.items():
                if ex + 1 < d:
                    nxt[ex + 1] = R.add(nxt.get(ex + 1, R.zero), c)
                else:
                    for j, r in enumerate(rel):
                        if any(r):
                            nxt[j] = R.add(nxt.get(j, R.zero), R.mul(c, r))
            forms.append({ex: c for ex, c in nxt.items() if any(c)})
        return forms

    def table(self, a, b):
        """Expansion of basis[a] * basis[b] as a list of (index, coeff or None for 1)."""
        key = (a, b) if a <= b else (b, a)
        hit = self._table.get(key)
        if hit is not None:
            return hit
        R = self.base
        ma, mb = self.basis[a], self.basis[b]
        terms = {(): None}
        for i, (x, y) in enumerate(zip(ma, mb)):
            form = self._powers[i][x + y]
            new = {}
            for ex, c in terms.items():
                for gx, gc in form.items():
                    if c is None:
                        cc = None if gc == R.one else gc
                    else:
                        cc = c if gc == R.one else R.mul(c, gc)
                    k = ex + (gx,)
                    if k in new:
                        prev = new[k]
                        new[k] = R.add(R.one if prev is None else prev, R.one if cc is None else cc)
                    else:
                        new[k] = cc
            terms = new
        out = []
        for ex, c in terms.items():
            if c is not None and not any(c):
                continue
            out.append((self._index[ex], c))
        self._table[key] = out
        return out

    def generator(self, name):
        i = self.names.index(name)
        ex = tuple(int(j == i) for j in range(len(self.names)))
        if self.orders[i] == 1:
            return self.normalize({0: self.relations[i][0]})
        return {self._index[ex]: self.base.one}

    def monomial(self, exps):
        return {self._index[tuple(exps)]: self.base.one}

    def validate(self):
        """Check that every basis product closes inside the basis."""
        for a in range(self.rank):
            for b in range(self.rank):
                for idx, _ in self.table(a, b):
                    if not 0 <= idx < self.rank:
                        raise NonClosedTable(f"{self.basis[a]}*{self.basis[b]}")
        return self

    # -- raw arithmetic -----------------------------------------------------

    def normalize(self, x):
        return {k: v for k, v in x.items() if any(v)}

    def from_base(self, r):
        return {0: r} if any(r) else {}

    def from_int(self, n):
        return self.from_base(self.base.from_int(n))

    def add(self, x, y):
        R = self.base
        out = dict(x)
        for k, v in y.items():
            if k in out:
                s = R.add(out[k], v)
                if any(s):
                    out[k] = s
                else:
                    del out[k]
            else:
                out[k] = v
        return out

    def neg(self, x):
        R = self.base
        return {k: R.neg(v) for k, v in x.items()}

    def sub(self, x, y):
        return self.add(x, self.neg(y))

    def scale(self, r, x):
        """Multiply by a raw base-ring element."""
        R = self.base
        out = {}
        for k, v in x.items():
            w = R.mul(r, v)
            if any(w):
                out[k] = w
        return out

    def mul(self, x, y):
        R = self.base
        rmul, radd = R.mul, R.add
        acc = {}
        for a, xa in x.items():
            for b, yb in y.items():
                c = rmul(xa, yb)
                if not any(c):
                    continue
                for k, r in self.table(a, b):
                    t = c if r is None else rmul(c, r)
                    if k in acc:
                        acc[k] = radd(acc[k], t)
                    else:
                        acc[k] = t
        return {k: v for k, v in acc.items() if any(v)}

    def pow(self, x, n):
        result = self.one
        base = x
        while n:
            if n & 1:
                result = self.mul(result, base)
            n >>= 1
            if n:
                base = self.mul(base, base)
        return result

    def is_zero(self, x, prec=None):
        R = self.base
        return all(R.is_zero(v, prec) for v in x.values())

    def equal(self, x, y, prec=None):
        return self.is_zero(self.sub(x, y), prec)

    def v_min(self, x, prec=None):
        R = self.base
        vals = [R.v_min(v, prec) for v in x.values()]
        if not vals:
            return R.v_min(R.zero, prec)
        return min(vals)

    def digits_for(self, v):
        return self.base.digits_for(v)

    @property
    def p(self):
        return self.base.p

    @property
    def N(self):
        return self.base.N

    @property
    def exact(self):
        return self.base.exact

    @property
    def vp_norm(self):
        return self.base.vp_norm

    def divide_base(self, x, r, xprec=None, rprec=None):
        """Coordinatewise exact division by a raw base-ring element."""
        R = self.base
        prec = R.N if xprec is None else xprec
        out = {}
        if not x:
            _, prec = R.divide(R.zero, r, xprec, rprec)
        for k, v in x.items():
            q, pr = R.divide(v, r, xprec, rprec)
            prec = min(prec, pr)
            if any(q):
                out[k] = q
        return out, prec

    def residue_algebra(self):
        if self._residue_alg is None:
            if self.base.exact:
                self._residue_alg = self
            else:
                F = residue_field(self.base.p)
                rels = [[(self.base.residue(c),) for c in rel] for rel in self.relations]
                self._residue_alg = Algebra(F, self.names, rels, label=self.label + "/M")
        return self._residue_alg

    def residue(self, x):
        res = self.residue_algebra()
        R = self.base
        return res.normalize({k: (R.residue(v),) for k, v in x.items()})

    def monomial_text(self, idx):
        parts = []
        for name, ex in zip(self.names, self.basis[idx]):
            if ex == 1:
                parts.append(name)
            elif ex > 1:
                parts.append(f"{name}^{ex}")
        return "*".join(parts) or "1"

    def text(self, x, prec=None):
        R = self.base
        terms = []
        for k in sorted(x):
            ct = R.text(x[k], prec)
            if ct == "0":
                continue
            mono = self.monomial_text(k)
            if mono == "1":
                terms.append(ct if " " not in ct else f"({ct})")
            elif ct == "1":
                terms.append(mono)
            elif ct == "-1":
                terms.append("-" + mono)
            elif " " in ct or "/" in ct or "*" in ct:
                terms.append(f"({ct})*{mono}")
            else:
                terms.append(f"{ct}*{mono}")
        return " + ".join(terms).replace("+ -", "- ") if terms else "0"

    def dump(self, prec=None):
        """Basis list followed by the rank x rank table of basis products."""
        lines = ["basis: " + ", ".join(self.monomial_text(i) for i in range(self.rank))]
        for a in range(self.rank):
            row = []
            for b in range(self.rank):
                prod = {}
                for k, r in self.table(a, b):
                    prod[k] = self.base.one if r is None else r
                row.append(self.text(prod, prec))
            lines.append(f"{self.monomial_text(a)}: " + " | ".join(row))
        return "\n".join(lines)

    def element(self, raw, prec=None):
        return AlgebraElement(self, raw, self.base.N if prec is None else prec)

    def __repr__(self):
        return f"Algebra({self.label} over {self.base!r}, rank={self.rank})"


class AlgebraElement:
    """Immutable algebra element with known precision."""

    __slots__ = ("alg", "raw", "prec")

    def __init__(self, alg, raw, prec):
        self.alg = alg
        self.raw = alg.normalize(dict(raw))
        self.prec = prec

    def _coerce(self, other):
        if isinstance(other, AlgebraElement):
            if other.alg is not self.alg:
                raise BaseMismatch("elements of different algebras")
            return other
        if isinstance(other, RingElement):
            return AlgebraElement(self.alg, self.alg.from_base(other.coords), other.prec)
        if isinstance(other, int):
            return AlgebraElement(self.alg, self.alg.from_int(other), self.alg.base.N)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return AlgebraElement(self.alg, self.alg.add(self.raw, other.raw), min(self.prec, other.prec))

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return AlgebraElement(self.alg, self.alg.sub(self.raw, other.raw), min(self.prec, other.prec))

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __neg__(self):
        return AlgebraElement(self.alg, self.alg.neg(self.raw), self.prec)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return AlgebraElement(self.alg, self.alg.mul(self.raw, other.raw), min(self.prec, other.prec))

    __rmul__ = __mul__

    def __pow__(self, n):
        return AlgebraElement(self.alg, self.alg.pow(self.raw, n), self.prec)

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self.alg.equal(self.raw, other.raw, min(self.prec, other.prec))

    def __hash__(self):
        return hash((id(self.alg), tuple(sorted(self.raw.items()))))

    def coordinate(self, idx):
        return RingElement(self.alg.base, self.raw.get(idx, self.alg.base.zero), self.prec)

    def residue(self):
        res = self.alg.residue_algebra()
        return AlgebraElement(res, self.alg.residue(self.raw), res.base.N)

    def __str__(self):
        return f"{self.alg.text(self.raw, self.prec)} (mod {self.alg.base.p}^{self.prec})"

    __repr__ = __str__


# ---------------------------------------------------------------------------
# named constructions


def delta_minimal_polynomial(p, variant, ring):
    """Coefficients (low to high, RingElements) of the minimal polynomial of Delta or Delta'.

    ``star``: coefficient of ``T^(p-j)`` is ``C(p,j)/pi^j``; ``star_star``
    uses ``mu`` instead of ``pi``.  The divisions are carried out two digits
    above the working precision so the coefficients are exact mod ``p**N``.
    """
    work = with_precision(ring, ring.N + 2)
    coeffs = _minpoly_coeffs(p, variant, work)
    M = ring.modulus
    return [ring.element(tuple(a % M for a in c.coords), min(ring.N, c.prec)) for c in coeffs]


def _minpoly_coeffs(p, variant, ring):
    c = constants(ring)
    if variant == "star":
        denom = ring.element(c["pi"])
    elif variant == "star_star":
        if "mu" not in c:
            raise BaseMismatch("star_star needs a ring containing mu")
        denom = ring.element(c["mu"])
    else:
        raise ValueError(f"unknown variant {variant!r}")
    coeffs = [ring(0)] * (p + 1)
    coeffs[p] = ring(1)
    power = ring(1)
    for j in range(1, p):
        power = power * denom
        coeffs[p - j] = ring(math.comb(p, j)) / power
    return coeffs


def _relation_from_poly(ring, coeffs):
    """Turn a monic polynomial into the rule g^d = -(lower terms)."""
    prec = min(c.prec for c in coeffs)
    return [ring.neg(c.coords) for c in coeffs[:-1]], prec


def build_B(p, ring):
    """B = o[Delta] with Delta the image of (T-1)/pi in o[T]/(T^p - 1)."""
    rel, prec = _relation_from_poly(ring, delta_minimal_polynomial(p, "star", ring))
    alg = Algebra(ring, ["D"], [rel], label="B")
    alg.relation_prec = prec
    return alg


def build_Bprime(p, ring):
    """B' = O[Delta'] with Delta' = lam * Delta."""
    rel, prec = _relation_from_poly(ring, delta_minimal_polynomial(p, "star_star", ring))
    alg = Algebra(ring, ["Dp"], [rel], label="B'")
    alg.relation_prec = prec
    return alg


def build_torsion_algebra(p, ring, name="a"):
    """A' = O[a]/(mu a + a^p)."""
    c = constants(ring)
    rel = [ring.zero] * p
    rel[1] = ring.neg(c["mu"])
    alg = Algebra(ring, [name], [rel], label="A'")
    alg.relation_prec = ring.N
    return alg


def build_alpha_square(p, names=("a", "b")):
    """kappa[a, b, ...]/(a^p, b^p, ...) over F_p."""
    F = residue_field(p)
    rels = [[F.zero] * p for _ in names]
    return Algebra(F, list(names), rels, label="alpha^" + str(len(names)))


def build_algebra(kind, p, ring=None, **kw):
    """Named constructors with the table checked for closure."""
    makers = {
        "B": lambda: build_B(p, ring),
        "Bprime": lambda: build_Bprime(p, ring),
        "TorsionAlgebra": lambda: build_torsion_algebra(p, ring, **kw),
        "AlphaSquare": lambda: build_alpha_square(p, **kw),
    }
    if kind not in makers:
        raise ValueError(f"unknown algebra {kind!r}")
    return makers[kind]().validate()


def extend_scalars(alg, ring):
    """alg tensored over its base with a larger tower ``ring``."""
    embed = ring.embedding_from(alg.base)
    rels = [[embed(c) for c in rel] for rel in alg.relations]
    out = Algebra(ring, alg.names, rels, label=f"{alg.label}(x){ring.kind}")
    out.relation_prec = getattr(alg, "relation_prec", ring.N)
    return out


def map_from_base_extension(alg, big):
    """Map raw elements of ``alg`` into ``big`` = extend_scalars(alg, ...)."""
    embed = big.base.embedding_from(alg.base)

    def f(x):
        return {k: embed(v) for k, v in x.items()}

    return f


def tensor_algebras(A1, A2):
    """A1 (x) A2 over a common base, generators concatenated."""
    if A1.base is not A2.base:
        raise BaseMismatch(f"{A1.base!r} vs {A2.base!r}")
    names2 = list(A2.names)
    for i, n in enumerate(names2):
        while n in A1.names or n in names2[:i]:
            n = n + "'"
        names2[i] = n
    T = Algebra(A1.base, list(A1.names) + names2, list(A1.relations) + list(A2.relations),
                label=f"{A1.label}(x){A2.label}")
    T.relation_prec = min(getattr(A1, "relation_prec", A1.base.N), getattr(A2, "relation_prec", A2.base.N))
    T.factors = (A1, A2)
    return T


def tensor_embedding(T, which):
    """Raw-element embedding of the left (0) or right (1) factor into T."""
    A1, A2 = T.factors
    k1 = len(A1.names)
    src = A1 if which == 0 else A2

    def f(x):
        out = {}
        for idx, v in x.items():
            ex = src.basis[idx]
            full = ex + (0,) * (len(T.names) - k1) if which == 0 else (0,) * k1 + ex
            out[T._index[full]] = v
        return out

    return f


def gamma_element(B):
    """Gamma = 1 + pi * Delta in B."""
    R = B.base
    pi = constants(R)["pi"]
    return B.add(B.one, B.scale(pi, B.generator(B.names[0])))


def roots_of_unity(ring, p):
    """zeta^k for k = 0..p-1 as raw ring elements."""
    zeta = constants(ring)["zeta"]
    out = [ring.one]
    for _ in range(p - 1):
        out.append(ring.mul(out[-1], zeta))
    return out


def splitting_idempotents(B):
    """Lambda_xi = (xi/p) * sum_i xi^i Gamma^(p-1-i), one per p-th root of unity xi.

    Returns a list of ``(xi, Lambda_xi)`` pairs, ``xi`` a RingElement and
    ``Lambda_xi`` an AlgebraElement.  Raises :class:`NotIdempotent` if the
    result cannot be certified idempotent at its precision.
    """
    R = B.base
    p = R.p
    G = gamma_element(B)
    gpow = [B.one]
    for _ in range(p - 1):
        gpow.append(B.mul(gpow[-1], G))
    out = []
    for xi in roots_of_unity(R, p):
        acc = {}
        xpow = R.one
        for i in range(p):
            acc = B.add(acc, B.scale(xpow, gpow[p - 1 - i]))
            xpow = R.mul(xpow, xi)
        acc = B.scale(xi, acc)
        lam, prec = B.divide_base(acc, R.from_int(p), getattr(B, "relation_prec", R.N))
        if not B.equal(B.mul(lam, lam), lam, prec):
            raise NotIdempotent(f"Lambda for xi={R.text(xi)} is not idempotent mod {p}^{prec}")
        out.append((R.element(xi), AlgebraElement(B, lam, prec)))
    return out


def projection(B, xi):
    """The ring map m_xi: B -> o sending Delta to (xi - 1)/pi."""
    R = B.base
    pi = constants(R)["pi"]
    d, prec = R.divide(R.sub(xi, R.one), pi)

    def m(x):
        acc = R.zero
        dp = R.one
        powers = [R.one]
        for _ in range(B.rank - 1):
            dp = R.mul(dp, d)
            powers.append(dp)
        for k, v in x.items():
            acc = R.add(acc, R.mul(v, powers[B.basis[k][0]]))
        return acc

    m.prec = prec
    return m


def frobenius_defect(x):
    """(x^p - x)/pi for an element of B; raises NotDivisible if x^p - x is not in pi*B."""
    B = x.alg
    R = B.base
    p = R.p
    pi = constants(R)["pi"]
    diff = B.sub(B.pow(x.raw, p), x.raw)
    q, prec = B.divide_base(diff, pi, x.prec)
    return AlgebraElement(B, q, prec)


def to_delta_prime(x, BO, Bp, lam, prec):
    """Rewrite sum c_k Delta^k (in B (x) O) as sum (c_k / lam^k) Delta'^k in B'.

    Raises :class:`MembershipUncertifiable` when some ``c_k`` is not
    divisible by ``lam^k`` at the available precision.
    """
    R = BO.base
    out = {}
    new_prec = prec
    lam_pows = [R.one]
    for _ in range(BO.rank):
        lam_pows.append(R.mul(lam_pows[-1], lam))
    for k, v in x.items():
        ex = BO.basis[k][0]
        if ex == 0:
            out[k] = v
            continue
        try:
            q, pr = R.divide(v, lam_pows[ex], prec)
        except (NotDivisible, PrecisionExhausted) as err:
            raise MembershipUncertifiable(
                f"coefficient of Delta^{ex} = {R.text(v, prec)} is not divisible by lam^{ex}: {err}"
            ) from err
        new_prec = min(new_prec, pr)
        if any(q):
            out[Bp._index[(ex,)]] = q
    return out, new_prec


def from_delta_prime(y, Bp, BO, lam):
    """Inverse of :func:`to_delta_prime`: Delta' -> lam * Delta."""
    R = BO.base
    out = {}
    lp = R.one
    lam_pows = [R.one]
    for _ in range(Bp.rank):
        lp = R.mul(lp, lam)
        lam_pows.append(lp)
    for k, v in y.items():
        ex = Bp.basis[k][0]
        w = R.mul(v, lam_pows[ex])
        if any(w):
            out[BO._index[(ex,)]] = w
    return out


def decay_profile(alg, c, prec, kmax):
    """Lower bounds phi(k) on the coordinate valuation of c^k, for k <= kmax.

    Exact values are used up to a search window; beyond it the bound grows by
    the operator valuation of multiplication by c^q (certified per basis
    element).  Returns a nondecreasing list, or ``None`` if no growth can be
    certified (for instance when ``c`` is a unit).
    """
    window = max(2 * alg.rank, 4) if hasattr(alg, "rank") else 4
    powers = [alg.one]
    for _ in range(window):
        nxt = alg.mul(powers[-1], c)
        if alg.exact and alg.is_zero(nxt):
            # nilpotent over a field: every later power vanishes
            phi = [alg.v_min(pw, prec) for pw in powers]
            phi += [INF] * (kmax + 1 - len(phi))
            for k in range(len(phi) - 2, -1, -1):
                phi[k] = min(phi[k], phi[k + 1])
            return phi[: kmax + 1]
        powers.append(nxt)
    exact_v = [alg.v_min(pw, prec) for pw in powers]
    best = None
    if isinstance(alg, Algebra):
        basis_elems = [alg.monomial(m) for m in alg.basis]
    else:
        basis_elems = [alg.one]
    for q in range(1, window + 1):
        cq = powers[q]
        omega = min(alg.v_min(alg.mul(cq, b), prec) for b in basis_elems)
        if omega > 0 and (best is None or omega / q > best[1] / best[0]):
            best = (q, omega)
    if best is None:
        return None
    q, omega = best
    band = min(exact_v[window - q + 1: window + 1])
    top = max(kmax, window + q)
    phi = []
    for k in range(top + 1):
        if k <= window:
            phi.append(exact_v[k])
        else:
            # c^k = c^j * (c^q)^m with j in the last band of the window
            phi.append(band + (-(-(k - window) // q)) * omega)
    for k in range(top - 1, -1, -1):
        phi[k] = min(phi[k], phi[k + 1])
    return phi[: kmax + 1]
