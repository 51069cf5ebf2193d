"""Hypothesis strategies for random enveloping-algebra elements."""

import numpy as np
from hypothesis import strategies as st

from heisenberg_index.symbolic import EnvElement

# small Gaussian integers keep normal ordering exact in floating point
gauss_int = st.builds(complex, st.integers(-3, 3), st.integers(-3, 3))


@st.composite
def monomials(draw, n, max_order):
    while True:
        alpha = tuple(draw(st.integers(0, max_order)) for _ in range(n))
        gamma = tuple(draw(st.integers(0, max_order)) for _ in range(n))
        p = draw(st.integers(0, max_order // 2))
        if sum(alpha) + sum(gamma) + 2 * p <= max_order:
            return alpha, gamma, p


@st.composite
def elements(draw, n=None, r=None, max_order=3, max_terms=6):
    n = draw(st.integers(1, 2)) if n is None else n
    r = draw(st.sampled_from([1, 2])) if r is None else r
    k = draw(st.integers(0, max_terms))
    terms = {}
    for _ in range(k):
        mono = draw(monomials(n, max_order))
        coeff = np.array([[draw(gauss_int) for _ in range(r)] for _ in range(r)])
        terms[mono] = coeff
    return EnvElement(n, r, terms)


@st.composite
def element_pairs(draw, count=2, max_order=3, max_terms=6, nmax=2):
    n = draw(st.integers(1, nmax))
    r = draw(st.sampled_from([1, 2]))
    return tuple(draw(elements(n, r, max_order, max_terms)) for _ in range(count))
