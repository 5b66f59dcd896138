"""Monic polynomial sequences from three-term recurrences, the canonical
moment functional they determine, the numerator transform, and root finding
with multiplicities.

Polynomials are dense numpy arrays of complex coefficients in ascending
powers.  Degrees stay small (a few dozen), so dense monomial arithmetic is
well conditioned and the code leans on numpy.polynomial.polynomial.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import MomentsTooShort, NonConvergence

Poly = np.ndarray


def as_poly(c) -> Poly:
    return np.atleast_1d(np.asarray(c, dtype=complex))


def poly_trim(p: Poly, tol: float = 0.0) -> Poly:
    p = as_poly(p)
    n = len(p)
    scale = max(1.0, float(np.max(np.abs(p))))
    while n > 1 and abs(p[n - 1]) <= tol * scale:
        n -= 1
    return p[:n]


def poly_degree(p: Poly) -> int:
    return len(poly_trim(p)) - 1


def poly_add(p: Poly, r: Poly) -> Poly:
    return npoly.polyadd(as_poly(p), as_poly(r))


def poly_sub(p: Poly, r: Poly) -> Poly:
    return npoly.polysub(as_poly(p), as_poly(r))


def poly_mul(p: Poly, r: Poly) -> Poly:
    return npoly.polymul(as_poly(p), as_poly(r))


def poly_eval(p: Poly, x):
    return npoly.polyval(x, as_poly(p))


def poly_der(p: Poly, m: int = 1) -> Poly:
    return npoly.polyder(as_poly(p), m)


def monic(p: Poly) -> Poly:
    p = poly_trim(p)
    lead = p[-1]
    if lead == 0:
        raise ValueError("zero polynomial has no monic normalization")
    return p / lead


@dataclass(frozen=True)
class RecurrenceCoeffs:
    """Streams n -> beta_n and n -> gamma_n (gamma defined for n >= 1).

    Closed forms only: every query re-evaluates the same product formula,
    so repeated queries agree exactly and no recursion error accumulates.
    """

    beta_fn: Callable[[int], complex]
    gamma_fn: Callable[[int], complex]
    provenance: str = ""

    def beta(self, n: int) -> complex:
        return complex(self.beta_fn(n))

    def gamma(self, n: int) -> complex:
        if n < 1:
            raise ValueError("gamma_n is defined for n >= 1")
        return complex(self.gamma_fn(n))

    def shifted(self, N: int) -> "RecurrenceCoeffs":
        """Index shift by N: the stream of the Nth associated sequence."""
        return RecurrenceCoeffs(
            beta_fn=lambda n: self.beta_fn(n + N),
            gamma_fn=lambda n: self.gamma_fn(n + N),
            provenance=f"{self.provenance}+assoc{N}",
        )


def constant_coeffs(beta: complex, gamma: complex) -> RecurrenceCoeffs:
    return RecurrenceCoeffs(lambda n: beta, lambda n: gamma, "constant")


@dataclass
class PolySeq:
    """Monic sequence p_0..p_{n_max} generated from a coefficient stream."""

    polys: list
    source: RecurrenceCoeffs | None = None

    def __getitem__(self, n: int) -> Poly:
        return self.polys[n]

    def __len__(self) -> int:
        return len(self.polys)


def generate_seq(coeffs: RecurrenceCoeffs, n_max: int) -> PolySeq:
    """p_{n+1} = (x - beta_n) p_n - gamma_n p_{n-1}, p_0 = 1, p_1 = x - beta_0."""
    polys = [as_poly([1.0])]
    if n_max >= 1:
        polys.append(as_poly([-coeffs.beta(0), 1.0]))
    for n in range(1, n_max):
        step = poly_mul([-coeffs.beta(n), 1.0], polys[n])
        polys.append(poly_sub(step, coeffs.gamma(n) * polys[n - 1]))
    return PolySeq(polys, coeffs)


def associated_seq(coeffs: RecurrenceCoeffs, N: int, n_max: int) -> PolySeq:
    """Nth associated sequence: the same recurrence with indices shifted by N."""
    if N < 1:
        raise ValueError("association order must be >= 1")
    return generate_seq(coeffs.shifted(N), n_max)


@dataclass(frozen=True)
class MomentVector:
    """mu_k = L_0(x^k) for the canonical functional of a recurrence."""

    mu: np.ndarray

    def __post_init__(self):
        if abs(self.mu[0] - 1.0) > 1e-12:
            raise ValueError("canonical moments start with mu_0 = 1")

    def __len__(self) -> int:
        return len(self.mu)


def canonical_moments(coeffs: RecurrenceCoeffs, k_max: int) -> MomentVector:
    """Moments of the functional with L_0(p_n) = delta_{n,0}.

    Exact table recurrence on t[k][n] = L_0(x^k p_n):
        t[k+1][n] = t[k][n+1] + beta_n t[k][n] + gamma_n t[k][n-1]
    seeded by t[0][n] = delta_{n,0}.  This is the package's independent
    oracle: it never sees a weight, a mass point, or a series.
    """
    width = k_max + 1
    row = np.zeros(width, dtype=complex)
    row[0] = 1.0
    mu = np.empty(k_max + 1, dtype=complex)
    mu[0] = 1.0
    for k in range(k_max):
        nxt = np.zeros(width, dtype=complex)
        for n in range(width - k - 1):
            v = row[n + 1] + coeffs.beta(n) * row[n]
            if n >= 1:
                v += coeffs.gamma(n) * row[n - 1]
            nxt[n] = v
        row = nxt
        mu[k + 1] = row[0]
    return MomentVector(mu)


def oracle_apply(mu: MomentVector, p: Poly, p2: Poly | None = None) -> complex:
    """Linear extension of the moments to a polynomial (or to a product)."""
    c = as_poly(p)
    if p2 is not None:
        c = poly_mul(c, p2)
    if len(c) > len(mu.mu):
        raise MomentsTooShort(
            f"need {len(c)} moments, have {len(mu.mu)}"
        )
    return complex(np.dot(c, mu.mu[: len(c)]))


def numerator_transform(mu: MomentVector, p: Poly) -> Poly:
    """T_1(p)(x) = L_0((p(t) - p(x)) / (t - x)), L_0 acting in t.

    With p = sum c_k t^k the kernel expands to sum_{i+j=k-1} t^i x^j, so the
    output coefficient of x^j is sum_{k>j} c_k mu_{k-1-j}.  Degree drops by
    exactly one and the result is generally not monic.
    """
    c = as_poly(p)
    if len(c) > len(mu.mu):
        raise MomentsTooShort(f"need {len(c) - 1} moments, have {len(mu.mu)}")
    if len(c) == 1:
        return as_poly([0.0])
    out = np.zeros(len(c) - 1, dtype=complex)
    for j in range(len(c) - 1):
        for k in range(j + 1, len(c)):
            out[j] += c[k] * mu.mu[k - 1 - j]
    return out


def _newton(p: Poly, x0: complex, max_iter: int = 80) -> complex:
    dp = poly_der(p)
    x = complex(x0)
    for _ in range(max_iter):
        fx = poly_eval(p, x)
        dfx = poly_eval(dp, x)
        if dfx == 0:
            break
        step = fx / dfx
        x -= step
        if abs(step) <= 1e-15 * max(1.0, abs(x)):
            break
    return x


def roots(p: Poly, cluster_tol: float = 1e-5) -> list[tuple[complex, int]]:
    """All roots with multiplicities, sum of multiplicities = degree.

    Eigenvalues of the companion matrix seed Newton refinement; greedy
    clustering within cluster_tol decides multiplicities, and each cluster
    of size m is re-refined as a simple root of the (m-1)th derivative.
    """
    c = poly_trim(p, tol=0.0)
    deg = len(c) - 1
    if deg < 1:
        raise ValueError("need degree >= 1 to extract roots")
    raw = np.linalg.eigvals(npoly.polycompanion(c))
    raw = sorted((complex(v) for v in raw), key=lambda t: (t.real, t.imag))

    clusters: list[list[complex]] = []
    for v in raw:
        for cl in clusters:
            center = sum(cl) / len(cl)
            if abs(v - center) <= cluster_tol:
                cl.append(v)
                break
        else:
            clusters.append([v])

    out = []
    for cl in clusters:
        m = len(cl)
        center = sum(cl) / m
        target = poly_der(c, m - 1) if m > 1 else c
        loc = _newton(target, center)
        if not np.isfinite(loc.real) or not np.isfinite(loc.imag):
            raise NonConvergence("root refinement produced a non-finite value")
        out.append((loc, m))
    out.sort(key=lambda t: (t[0].real, t[0].imag))
    return out
