"""Fixed-precision arithmetic in totally ramified towers over Z_p.

A tower is a chain of Eisenstein extensions.  Internally every level is
flattened onto the power basis of the top uniformizer ``s`` over Z_p, so an
element is a tuple of ``e`` integers modulo ``p**N``.  Valuations are
normalized so that the level-1 uniformizer has valuation 1 (for the
cyclotomic tower that is ``pi = zeta - 1``, hence ``v(p) = p - 1``).

Raw tuples are what the series and algebra layers pass around; the
:class:`RingElement` wrapper adds a known precision and operators.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import sympy

from .errors import (
    InvalidParams,
    NonEisensteinPolynomial,
    NotDivisible,
    PrecisionBudgetTooSmall,
    PrecisionExhausted,
    PrecisionHorizon,
)

INF = math.inf


@dataclass(frozen=True)
class PrecisionParams:
    """Working precision: coefficients mod ``p**N``, series below total degree ``D``."""

    p: int
    N: int
    D: int

    def __post_init__(self):
        if not isinstance(self.p, int) or self.p < 2 or not sympy.isprime(self.p):
            raise InvalidParams(f"p={self.p!r} is not a prime")
        if self.N < 1:
            raise InvalidParams(f"precision N={self.N} must be positive")
        if self.D < 1:
            raise InvalidParams(f"degree bound D={self.D} must be positive")

    @property
    def budget(self):
        return -(-self.D // (self.p - 1)) + 4

    def check_budget(self):
        if self.N < self.budget:
            raise PrecisionBudgetTooSmall(
                f"N={self.N} < ceil(D/(p-1)) + 4 = {self.budget} for p={self.p}, D={self.D}"
            )
        return self


def vp_int(n, p):
    """p-adic valuation of a nonzero integer."""
    k = 0
    while n % p == 0:
        n //= p
        k += 1
    return k


def rational_text(c, p, k):
    """Render an integer mod p**k as a small signed integer or fraction if possible."""
    M = p**k
    c %= M
    if c == 0:
        return "0"
    bound = math.isqrt(M // 2)
    # extended Euclid for rational reconstruction
    r0, r1 = M, c
    s0, s1 = 0, 1
    while r1 > bound:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    if s1 != 0 and abs(s1) <= bound and s1 % p != 0:
        num, den = (r1, s1) if s1 > 0 else (-r1, -s1)
        if (num - c * den) % M == 0:
            g = math.gcd(num, den)
            num, den = num // g, den // g
            return str(num) if den == 1 else f"{num}/{den}"
    return str(c if c <= M // 2 else c - M)


# ---------------------------------------------------------------------------
# nested (level-by-level) integer arithmetic, used only while building towers


def _nzero(degs, k):
    if k == 0:
        return 0
    return [_nzero(degs, k - 1) for _ in range(degs[k - 1])]


def _none(degs, k):
    if k == 0:
        return 1
    z = _nzero(degs, k)
    z[0] = _none(degs, k - 1)
    return z


def _nadd(a, b, k):
    if k == 0:
        return a + b
    return [_nadd(x, y, k - 1) for x, y in zip(a, b)]


def _nneg(a, k):
    if k == 0:
        return -a
    return [_nneg(x, k - 1) for x in a]


def _nmul(a, b, degs, polys, k):
    if k == 0:
        return a * b
    d = degs[k - 1]
    prod = [_nzero(degs, k - 1) for _ in range(2 * d - 1)]
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            prod[i + j] = _nadd(prod[i + j], _nmul(x, y, degs, polys, k - 1), k - 1)
    poly = polys[k - 1]
    for top in range(2 * d - 2, d - 1, -1):
        c = prod[top]
        for i in range(d):
            prod[top - d + i] = _nadd(
                prod[top - d + i], _nneg(_nmul(c, poly[i], degs, polys, k - 1), k - 1), k - 1
            )
    return prod[:d]


def _nflat(a, k):
    if k == 0:
        return [a]
    out = []
    # lowest level varies fastest
    parts = [_nflat(x, k - 1) for x in a]
    for part in parts:
        out.extend(part)
    return out


def _nunflat(vec, degs, k):
    if k == 0:
        return vec[0]
    size = len(vec) // degs[k - 1]
    return [_nunflat(vec[i * size:(i + 1) * size], degs, k - 1) for i in range(degs[k - 1])]


def _ngen(degs, polys, k):
    """The generator of level k as a nested level-k element."""
    d = degs[k - 1]
    if d >= 2:
        g = _nzero(degs, k)
        g[1] = _none(degs, k - 1)
        return g
    return [_nneg(polys[k - 1][0], k - 1)]


def _nlabels(names, degs):
    labels = [()]
    for name, d in zip(names, degs):
        # the new level's exponent is the slow index
        labels = [lab + ((name, i),) for i in range(d) for lab in labels]
    return labels


def _monomial_text(lab):
    parts = []
    for name, i in reversed(lab):
        if i == 1:
            parts.append(name)
        elif i > 1:
            parts.append(f"{name}^{i}")
    return "*".join(parts)


class Ring:
    """A totally ramified tower over Z_p truncated at ``p**N``.

    Elements are raw tuples of length ``e`` (coordinates on ``1, s, ..., s^(e-1)``).
    """

    exact = False

    def __init__(self, p, N, names, level_polys, kind="custom", sub=None):
        self.p = p
        self.N = N
        self.modulus = p**N
        self.kind = kind
        self.names = tuple(names)
        self.level_polys = level_polys
        self.parent = sub
        degs = [len(poly) - 1 for poly in level_polys]
        self.level_degrees = tuple(degs)
        k = len(degs)
        e = 1
        for d in degs:
            e *= d
        self.e = e
        self.rank = e
        # v(p) in normalized units: the level-1 uniformizer has valuation 1
        self.vp_norm = Fraction(degs[0]) if degs else Fraction(1)
        M = self.modulus

        if k == 0:
            self.E = [0, 1]  # not used: s = p
            self._s = (p % M,)
            self._P_inv = [[1]]
            self._P = [[1]]
            self._gen_abs = []
            self.basis_labels = ["1"]
        else:
            polys = level_polys
            top = _ngen(degs, polys, k)
            one = _none(degs, k)
            powers = [one]
            for _ in range(e):
                powers.append(_nmul(powers[-1], top, degs, polys, k))
            cols = [_nflat(pw, k) for pw in powers[:e]]
            P = sympy.Matrix(e, e, lambda r, c: cols[c][r])
            x = sympy.Symbol("x")
            mult = sympy.Matrix(e, e, lambda r, c: _nflat(_nmul(_nunflat([int(i == c) for i in range(e)], degs, k), top, degs, polys, k), k)[r])
            cp = mult.charpoly(x).all_coeffs()[::-1]
            self.E = [int(c) for c in cp]
            if P.det() % p == 0:
                raise NonEisensteinPolynomial("top generator does not generate the tower")
            Pinv = P.inv_mod(M)
            self._P = [[int(P[r, c]) % M for c in range(e)] for r in range(e)]
            self._P_inv = [[int(Pinv[r, c]) % M for c in range(e)] for r in range(e)]
            self._gen_abs = []
            for lev in range(1, k + 1):
                g = _ngen(degs, polys, lev)
                # lift to level k
                for up in range(lev, k):
                    z = _nzero(degs, up + 1)
                    z[0] = g
                    g = z
                self._gen_abs.append(self._nested_to_abs(_nflat(g, k)))
            if e >= 2:
                self._s = tuple(int(i == 1) for i in range(e))
            else:
                self._s = ((-self.E[0]) % M,)
            labels = _nlabels(self.names, degs)
            self.basis_labels = [_monomial_text(lab) or "1" for lab in labels]
            self._check_absolute_eisenstein()

        self._red = {}
        for kk in range(e, 2 * e - 1):
            self._red[kk] = self._power_normal_form(kk)
        self.zero = (0,) * e
        self.one = (1,) + (0,) * (e - 1)
        self._eps = None
        self._cW = {}

    # -- construction helpers ------------------------------------------------

    def _nested_to_abs(self, vec):
        M = self.modulus
        return tuple(sum(r[c] * vec[c] for c in range(len(vec))) % M for r in self._P_inv)

    def abs_to_nested(self, x):
        M = self.modulus
        return [sum(r[c] * x[c] for c in range(self.e)) % M for r in self._P]

    def _check_absolute_eisenstein(self):
        p, E = self.p, self.E
        if E[-1] != 1:
            raise NonEisensteinPolynomial("absolute polynomial is not monic")
        if any(c % p for c in E[:-1]) or E[0] % (p * p) == 0:
            raise NonEisensteinPolynomial(f"absolute polynomial {E} is not Eisenstein")

    def _power_normal_form(self, k):
        """Coordinates of s^k for e <= k <= 2e-2 (only called for e >= 2)."""
        e, M = self.e, self.modulus
        vec = [0] * (k + 1)
        vec[k] = 1
        for top in range(k, e - 1, -1):
            c = vec[top]
            if c:
                vec[top] = 0
                for i in range(e):
                    vec[top - e + i] -= c * self.E[i]
        return tuple(v % M for v in vec[:e])

    # -- raw arithmetic -----------------------------------------------------

    def from_int(self, n):
        return (n % self.modulus,) + (0,) * (self.e - 1)

    def add(self, x, y):
        M = self.modulus
        return tuple((a + b) % M for a, b in zip(x, y))

    def sub(self, x, y):
        M = self.modulus
        return tuple((a - b) % M for a, b in zip(x, y))

    def neg(self, x):
        M = self.modulus
        return tuple(-a % M for a in x)

    def scale(self, n, x):
        M = self.modulus
        return tuple(n * a % M for a in x)

    def mul(self, x, y):
        e, M = self.e, self.modulus
        if e == 1:
            return (x[0] * y[0] % M,)
        prod = [0] * (2 * e - 1)
        for i, a in enumerate(x):
            if a:
                for j, b in enumerate(y):
                    prod[i + j] += a * b
        red = self._red
        for k in range(e, 2 * e - 1):
            c = prod[k]
            if c:
                r = red[k]
                for i in range(e):
                    prod[i] += c * r[i]
        return tuple(v % M for v in prod[:e])

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
        if prec is None or prec >= self.N:
            return not any(x)
        m = self.p**prec
        return all(a % m == 0 for a in x)

    def equal(self, x, y, prec=None):
        return self.is_zero(self.sub(x, y), prec)

    def residue(self, x):
        return x[0] % self.p

    def vs(self, x, prec=None):
        """Valuation in units of ``s``; ``None`` when zero at ``prec`` digits."""
        prec = self.N if prec is None else min(prec, self.N)
        if prec <= 0:
            return None
        m = self.p**prec
        best = None
        for i, c in enumerate(x):
            c %= m
            if c:
                v = self.e * vp_int(c, self.p) + i
                if best is None or v < best:
                    best = v
        return best

    def norm_val(self, vs):
        """Convert s-units to normalized valuation."""
        return Fraction(vs) * self.vp_norm / self.e

    def v_min(self, x, prec=None):
        vs = self.vs(x, prec)
        if vs is None:
            return self.vp_norm * (self.N if prec is None else prec)
        return self.norm_val(vs)

    def digits_for(self, v):
        """p-adic digits guaranteed by a normalized valuation lower bound."""
        if v == INF:
            return INF
        return math.floor(Fraction(v) / self.vp_norm)

    def unit_inverse(self, u):
        u0 = u[0] % self.p
        if u0 == 0:
            raise NotDivisible("element is not a unit")
        z = self.from_int(pow(u[0], -1, self.modulus))
        for _ in range(2 * (self.e * self.N).bit_length() + 2):
            uz = self.mul(u, z)
            if uz == self.one:
                return z
            z = self.mul(z, self.sub(self.from_int(2), uz))
        return z

    def _p_over_s_power(self, W):
        """The integral element p^m / s^W with m = ceil(W/e)."""
        if W in self._cW:
            return self._cW[W]
        e = self.e
        m = -(-W // e)
        if self._eps is None:
            if self.level_degrees:
                b = tuple(c // self.p for c in self.E[:e])
                self._eps = self.neg(self.unit_inverse(b))
            else:
                self._eps = self.one
        c = self.mul(self.pow(self._s, m * e - W), self.pow(self._eps, m))
        self._cW[W] = (m, c)
        return m, c

    def divide(self, x, y, xprec=None, yprec=None):
        """Exact division; returns ``(q, prec)`` with ``q*y == x`` to ``prec`` digits."""
        xprec = self.N if xprec is None else xprec
        yprec = self.N if yprec is None else yprec
        W = self.vs(y, yprec)
        if W is None:
            raise PrecisionHorizon("divisor is zero at its known precision")
        m, c = self._p_over_s_power(W)
        prec = min(xprec, yprec) - m
        if prec <= 0:
            raise PrecisionExhausted(f"division by an element of valuation {self.norm_val(W)} exhausts precision")
        pm = self.p**m
        z = self.mul(x, c)
        if any(a % pm for a in z):
            xv = self.vs(x, xprec)
            if xv is not None and xv < W:
                raise NotDivisible(
                    f"v(x)={self.norm_val(xv)} < v(y)={self.norm_val(W)}"
                )
            raise NotDivisible("quotient not integral at available precision")
        u = tuple(a // pm for a in self.mul(y, c))
        z = tuple(a // pm for a in z)
        q = self.mul(z, self.unit_inverse(u))
        return q, prec

    # -- named constants and presentation -----------------------------------

    def generator(self, level):
        """Absolute coordinates of the level generator (1-based)."""
        return self._gen_abs[level - 1]

    def text(self, x, prec=None):
        prec = self.N if prec is None else prec
        nested = self.abs_to_nested(x)
        terms = []
        for c, lab in zip(nested, self.basis_labels):
            ct = rational_text(c, self.p, prec)
            if ct == "0":
                continue
            if lab == "1":
                terms.append(ct)
            elif ct == "1":
                terms.append(lab)
            elif ct == "-1":
                terms.append("-" + lab)
            else:
                if "/" in ct:
                    ct = f"({ct})"
                terms.append(f"{ct}*{lab}")
        if not terms:
            return "0"
        return " + ".join(terms).replace("+ -", "- ")

    def element(self, raw, prec=None):
        return RingElement(self, tuple(raw), self.N if prec is None else prec)

    def __call__(self, n):
        return self.element(self.from_int(n))

    def embedding_from(self, other):
        """Return a function mapping raw elements of a sub-tower ``other`` into self."""
        return _embedding(self, other)

    def __repr__(self):
        return f"Ring({self.kind}, p={self.p}, N={self.N}, e={self.e})"


@lru_cache(maxsize=None)
def _embedding(big, small):
    if small is big:
        return lambda x: x
    if small.p != big.p or small.names != big.names[: len(small.names)]:
        raise InvalidParams("not a sub-tower")
    k = len(small.names)
    if k == 0:
        return lambda x: big.from_int(x[0])
    img = big.generator(k)
    pw = [big.one]
    for _ in range(1, small.e):
        pw.append(big.mul(pw[-1], img))

    def embed(x):
        acc = big.zero
        for c, b in zip(x, pw):
            if c:
                acc = big.add(acc, big.scale(c, b))
        return acc

    return embed


class ResidueField(Ring):
    """The prime field F_p viewed as an exact one-dimensional ring."""

    exact = True

    def __init__(self, p):
        self.p = p
        self.N = 1
        self.modulus = p
        self.kind = "residue_field"
        self.names = ()
        self.level_polys = []
        self.parent = None
        self.level_degrees = ()
        self.e = self.rank = 1
        self.vp_norm = Fraction(1)
        self.zero = (0,)
        self.one = (1,)
        self.basis_labels = ["1"]
        self._P = self._P_inv = [[1]]
        self._red = {}

    def vs(self, x, prec=None):
        return 0 if x[0] % self.p else None

    def v_min(self, x, prec=None):
        return Fraction(0) if x[0] % self.p else INF

    def digits_for(self, v):
        # a positive lower bound means zero; a bound of 0 certifies nothing
        return INF if v > 0 else 0

    def divide(self, x, y, xprec=None, yprec=None):
        if y[0] % self.p == 0:
            raise NotDivisible("division by zero in the residue field")
        return (x[0] * pow(y[0], -1, self.p) % self.p,), 1

    def text(self, x, prec=None):
        c = x[0] % self.p
        return str(c)

    def __repr__(self):
        return f"ResidueField({self.p})"


@lru_cache(maxsize=None)
def residue_field(p):
    return ResidueField(p)


def cyclotomic_poly(p):
    """Minimal polynomial of zeta_p - 1, low to high: ((1+x)^p - 1)/x."""
    return [math.comb(p, j + 1) for j in range(p)]


def _standard_levels(p, kind):
    if kind == "base_only":
        return [], []
    if kind == "cyclotomic":
        return ["pi"], [cyclotomic_poly(p)]
    if kind == "cyclotomic_plus_sqrt_pi":
        base = cyclotomic_poly(p)
        d1 = p - 1
        degs = [d1]
        pi_nested = _ngen(degs, [base], 1)
        lam_poly = [_nneg(pi_nested, 1), _nzero(degs, 1), _none(degs, 1)]
        return ["pi", "lam"], [base, lam_poly]
    raise InvalidParams(f"unknown tower kind {kind!r}")


def _check_level_eisenstein(sub, poly, p):
    """Each coefficient of ``poly`` is a nested element of ``sub``'s last level."""
    if not sub.level_degrees:
        coeffs = [c for c in poly]
        if coeffs[-1] != 1:
            raise NonEisensteinPolynomial("defining polynomial is not monic")
        if any(c % p for c in coeffs[:-1]):
            raise NonEisensteinPolynomial(f"{coeffs}: non-leading coefficients must be divisible by p")
        if coeffs[0] % (p * p) == 0:
            raise NonEisensteinPolynomial(f"{coeffs}: constant term must have valuation exactly 1")
        return
    k = len(sub.level_degrees)
    vals = []
    for c in poly:
        raw = sub._nested_to_abs(_nflat(c, k))
        vals.append(sub.vs(raw))
    if sub._nested_to_abs(_nflat(poly[-1], k)) != sub.one:
        raise NonEisensteinPolynomial("defining polynomial is not monic")
    for v in vals[:-1]:
        if v is not None and v < 1:
            raise NonEisensteinPolynomial("non-leading coefficient is a unit")
    if vals[0] != 1:
        raise NonEisensteinPolynomial("constant term is not a uniformizer of the base level")


def _build(p, N, names, polys, kind):
    ring = Ring(p, N, [], [], kind="base_only")
    for i in range(len(polys)):
        _check_level_eisenstein(ring, polys[i], p)
        lvl_kind = kind if i == len(polys) - 1 else _prefix_kind(kind, i + 1)
        ring = Ring(p, N, names[: i + 1], polys[: i + 1], kind=lvl_kind, sub=ring)
    return ring


def _prefix_kind(kind, n):
    if kind in ("cyclotomic", "cyclotomic_plus_sqrt_pi") and n == 1:
        return "cyclotomic"
    return "custom"


@lru_cache(maxsize=None)
def _cached_tower(p, N, kind, names, polys_key):
    import ast

    polys = ast.literal_eval(polys_key)
    ring = _build(p, N, list(names), polys, kind)
    ring._key = (kind, names, polys_key)
    return ring


def build_ring(params, spec="cyclotomic", names=None, enforce_budget=True):
    """Build a tower at the precision of ``params``.

    ``spec`` is one of ``"base_only"``, ``"cyclotomic"``,
    ``"cyclotomic_plus_sqrt_pi"`` or a list of Eisenstein polynomials (low to
    high coefficients; beyond level 1 each coefficient is a nested element of
    the previous level, itself a list).
    """
    if enforce_budget:
        params.check_budget()
    p, N = params.p, params.N
    if isinstance(spec, str):
        lvl_names, polys = _standard_levels(p, spec)
        kind = spec
    else:
        polys = [list(poly) for poly in spec]
        lvl_names = list(names) if names else [f"g{i + 1}" for i in range(len(polys))]
        kind = "custom"
    return _cached_tower(p, N, kind, tuple(lvl_names), repr(polys))


def with_precision(ring, N):
    """The same tower rebuilt at precision ``N`` (raw tuples transfer by reduction mod p**N)."""
    if ring.exact:
        return ring
    return _cached_tower(ring.p, N, *ring._key)


def constants(ring):
    """Dictionary of named constants (raw) available in ``ring``."""
    out = {"p": ring.from_int(ring.p), "1": ring.one}
    if ring.kind == "base_only":
        out["pi"] = out["p"]
    elif ring.kind in ("cyclotomic", "cyclotomic_plus_sqrt_pi"):
        out["pi"] = ring.generator(1)
        out["zeta"] = ring.add(ring.one, out["pi"])
        if ring.kind == "cyclotomic_plus_sqrt_pi":
            out["lam"] = ring.generator(2)
            out["mu"] = ring.generator(2)
    else:
        out["pi"] = ring.generator(1)
    return out


class RingElement:
    """An immutable element of a tower together with its known precision."""

    __slots__ = ("ring", "coords", "prec")

    def __init__(self, ring, coords, prec):
        self.ring = ring
        self.coords = tuple(coords)
        self.prec = min(prec, ring.N)

    def _coerce(self, other):
        if isinstance(other, RingElement):
            if other.ring is not self.ring:
                raise InvalidParams("elements of different rings")
            return other
        if isinstance(other, int):
            return self.ring(other)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return RingElement(self.ring, self.ring.add(self.coords, other.coords), min(self.prec, other.prec))

    __radd__ = __add__

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return RingElement(self.ring, self.ring.sub(self.coords, other.coords), min(self.prec, other.prec))

    def __rsub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other - self

    def __neg__(self):
        return RingElement(self.ring, self.ring.neg(self.coords), self.prec)

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return RingElement(self.ring, self.ring.mul(self.coords, other.coords), min(self.prec, other.prec))

    __rmul__ = __mul__

    def __pow__(self, n):
        return RingElement(self.ring, self.ring.pow(self.coords, n), self.prec)

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return exact_divide(self, other)

    def __eq__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self.ring.equal(self.coords, other.coords, min(self.prec, other.prec))

    def __hash__(self):
        return hash((id(self.ring), self.coords))

    def is_zero(self):
        return self.ring.is_zero(self.coords, self.prec)

    def valuation(self):
        return valuation(self)

    def residue(self):
        return residue(self)

    def __str__(self):
        return f"{self.ring.text(self.coords, self.prec)} (mod {self.ring.p}^{self.prec})"

    __repr__ = __str__


def valuation(x):
    """Normalized valuation, ``v(pi) = 1``.

    Returns ``math.inf`` for an element that is zero at full working
    precision; an element that is zero only at a reduced known precision
    cannot be certified and raises :class:`PrecisionHorizon`.
    """
    ring = x.ring
    vs = ring.vs(x.coords, x.prec)
    if vs is None:
        if x.prec >= ring.N or ring.exact:
            return INF
        raise PrecisionHorizon(f"zero mod {ring.p}^{x.prec}; cannot certify")
    if ring.exact:
        return Fraction(0)
    return ring.norm_val(vs)


def exact_divide(x, y):
    q, prec = x.ring.divide(x.coords, y.coords, x.prec, y.prec)
    return RingElement(x.ring, q, prec)


def residue(x):
    """Image in the residue field F_p, as an integer in ``range(p)``."""
    return x.ring.residue(x.coords)
