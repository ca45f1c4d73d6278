"""Shared towers, algebras and hypothesis strategies for the test suite."""

import itertools
from functools import lru_cache

from hypothesis import strategies as st

from ltverify.algebra import build_alpha_square, build_B, build_Bprime, build_torsion_algebra
from ltverify.ring import PrecisionParams, build_ring
from ltverify.series import TruncSeries

PRIMES = (2, 3, 5)


@lru_cache(maxsize=None)
def tower(p, kind="cyclotomic", N=24):
    return build_ring(PrecisionParams(p, N, 2), kind, enforce_budget=False)


@lru_cache(maxsize=None)
def sqrt2_ring(N=16):
    return build_ring(PrecisionParams(2, N, 4), [[-2, 0, 1]], names=["r2"], enforce_budget=False)


def all_towers():
    out = [tower(p, kind) for p in PRIMES for kind in ("base_only", "cyclotomic", "cyclotomic_plus_sqrt_pi")]
    out.append(sqrt2_ring())
    return out


@lru_cache(maxsize=None)
def algebra_B(p, N=24):
    return build_B(p, tower(p, N=N)).validate()


@lru_cache(maxsize=None)
def algebra_Bprime(p, N=24):
    return build_Bprime(p, tower(p, "cyclotomic_plus_sqrt_pi", N)).validate()


@lru_cache(maxsize=None)
def algebra_A(p, N=24):
    return build_torsion_algebra(p, tower(p, "cyclotomic_plus_sqrt_pi", N)).validate()


@lru_cache(maxsize=None)
def alpha_square(p, names=("a", "b")):
    return build_alpha_square(p, names).validate()


def raw_elements(R):
    """Uniform raw elements of a tower (tuples mod p**N)."""
    return st.tuples(*[st.integers(0, R.modulus - 1) for _ in range(R.e)])


def raw_small(R, bound=50):
    """Raw elements with small integer coordinates, easier to shrink."""
    return st.tuples(*[st.integers(-bound, bound).map(lambda n, M=R.modulus: n % M) for _ in range(R.e)])


def algebra_elements(alg, ring_elems=None):
    R = alg.base
    if ring_elems is None:
        ring_elems = raw_elements(R)
    return st.lists(ring_elems, min_size=alg.rank, max_size=alg.rank).map(
        lambda cs: alg.normalize({i: c for i, c in enumerate(cs) if any(c)})
    )


def maximal_ideal_elements(alg):
    """Elements of an AlphaSquare algebra with zero constant coordinate (nilpotent)."""
    F = alg.base
    coords = st.lists(st.integers(0, F.p - 1), min_size=alg.rank - 1, max_size=alg.rank - 1)
    return coords.map(lambda cs: {i + 1: (c,) for i, c in enumerate(cs) if c})


@st.composite
def group_series(draw, alg, D, nilpotent_constant=True):
    """A series over an AlphaSquare algebra with nilpotent constant and unit linear term."""
    p, r = alg.p, alg.rank
    flat = draw(st.lists(st.integers(0, p - 1), min_size=r * D, max_size=r * D))
    unit = draw(st.integers(1, p - 1))
    coeffs = {}
    for k in range(D):
        c = {i: (x,) for i, x in enumerate(flat[k * r:(k + 1) * r]) if x}
        if k == 0:
            c.pop(0, None)
            if not nilpotent_constant:
                c = {}
        elif k == 1:
            c[0] = (unit,)
        if c:
            coeffs[(k,)] = c
    return TruncSeries(alg, 1, D, coeffs, tail=float("inf"))


@st.composite
def ring_series(draw, R, D, arity=1, zero_constant=True):
    """A series over a tower with small random coefficients."""
    exps = [e for e in itertools.product(range(D), repeat=arity)
            if sum(e) < D and not (zero_constant and sum(e) == 0)]
    flat = draw(st.lists(st.integers(-20, 20), min_size=len(exps) * R.e, max_size=len(exps) * R.e))
    coeffs = {}
    for i, e in enumerate(exps):
        c = tuple(n % R.modulus for n in flat[i * R.e:(i + 1) * R.e])
        if any(c):
            coeffs[e] = c
    return TruncSeries(R, arity, D, coeffs, tail=float("inf"))
