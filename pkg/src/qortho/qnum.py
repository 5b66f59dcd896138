"""Complex kernel: q-Pochhammer symbols, q-numbers, terminating basic
hypergeometric sums.

Everything is a pure function of complex scalars.  Infinite products
truncate on factor magnitude, never on a fixed count; a hard cap raises
NonConvergence instead of returning a silently wrong value.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import (
    BaseOutOfDisk,
    DegenerateBase,
    DegenerateDenominator,
    NonConvergence,
)

MAX_INF_FACTORS = 10_000


def qpochhammer(a: complex, q: complex, n: int) -> complex:
    """(a;q)_n = prod_{k=0}^{n-1} (1 - a q^k); the empty product is 1."""
    if n < 0:
        raise ValueError("q-Pochhammer order must be nonnegative")
    out = 1.0 + 0.0j
    f = complex(a)
    for _ in range(n):
        out *= 1.0 - f
        f *= q
    return out


class QPochInf(NamedTuple):
    """Value of (a;q)_inf plus the number of factors actually multiplied."""

    value: complex
    factors: int


def qpochhammer_inf(a: complex, q: complex, tol: float = 1e-14) -> QPochInf:
    """(a;q)_inf truncated once |a q^k| < tol.

    Returns the truncation index alongside the value so callers can report
    how deep the product went.
    """
    q = complex(q)
    if abs(q) >= 1.0:
        raise BaseOutOfDisk(f"|q| = {abs(q):.6g} >= 1; infinite product diverges")
    out = 1.0 + 0.0j
    f = complex(a)
    k = 0
    while abs(f) >= tol:
        if k >= MAX_INF_FACTORS:
            raise NonConvergence(
                f"(a;q)_inf with |a|={abs(a):.3g}, |q|={abs(q):.6g} "
                f"did not settle within {MAX_INF_FACTORS} factors"
            )
        out *= 1.0 - f
        f *= q
        k += 1
    return QPochInf(out, k)


def qnumber(n: int, q: complex) -> complex:
    """[n]_q = (1 - q^n) / (1 - q)."""
    q = complex(q)
    if q == 1:
        raise DegenerateBase("q-number undefined at q = 1")
    return (1.0 - q**n) / (1.0 - q)


@dataclass(frozen=True)
class SeriesSpec:
    """A terminating r-phi-s series.

    The first numerator parameter must be q^(-n) (the terminating
    convention); it is stored explicitly so the term products can be read
    off directly.  `regularized` marks specs whose denominator parameters
    are allowed to contain q^(-j), 0 <= j < n, because the caller already
    folded the offending Pochhammers termwise.
    """

    numerator_params: tuple
    denominator_params: tuple
    base_q: complex
    argument: complex
    termination_degree: int
    regularized: bool = False

    def __post_init__(self):
        n = self.termination_degree
        if n < 0:
            raise ValueError("termination degree must be nonnegative")
        if not self.numerator_params:
            raise ValueError("numerator parameters must at least hold q^-n")
        lead = complex(self.numerator_params[0])
        want = complex(self.base_q) ** (-n)
        if abs(lead - want) > 1e-9 * max(1.0, abs(want)):
            raise ValueError(
                "first numerator parameter is not q^-n for the stated degree"
            )


def phi_terminating(spec: SeriesSpec) -> complex:
    """Evaluate the terminating sum of a SeriesSpec, left to right.

    Term k carries the standard unbalancing factor
    [(-1)^k q^(k(k-1)/2)]^(1+s-r); for a balanced series (r = s+1) that
    factor is 1.  A vanishing numerator Pochhammer terminates the series
    early; a vanishing denominator Pochhammer with live numerator raises
    DegenerateDenominator.
    """
    n = spec.termination_degree
    q = complex(spec.base_q)
    z = complex(spec.argument)
    num = [complex(v) for v in spec.numerator_params]
    den = [complex(v) for v in spec.denominator_params]
    e = 1 + len(den) - len(num)

    total = 1.0 + 0.0j
    num_prod = 1.0 + 0.0j
    den_prod = 1.0 + 0.0j
    zpow = 1.0 + 0.0j
    for k in range(1, n + 1):
        qk1 = q ** (k - 1)
        step = 1.0 + 0.0j
        for av in num:
            step *= 1.0 - av * qk1
        num_prod *= step
        zpow *= z
        if num_prod == 0:
            # an exact numerator zero kills every later term as well
            continue
        dstep = 1.0 - q**k
        for bv in den:
            dstep *= 1.0 - bv * qk1
        if dstep == 0:
            raise DegenerateDenominator(
                f"denominator Pochhammer vanished at term k={k}"
            )
        den_prod *= dstep
        term = num_prod / den_prod * zpow
        if e:
            term *= ((-1) ** k * q ** (k * (k - 1) // 2)) ** e
        total += term
    return total


def phi(
    numerator: Sequence[complex],
    denominator: Sequence[complex],
    q: complex,
    z: complex,
    n: int,
    regularized: bool = False,
) -> complex:
    """Shorthand: build the SeriesSpec with q^-n prepended and evaluate it."""
    spec = SeriesSpec(
        numerator_params=(complex(q) ** (-n), *numerator),
        denominator_params=tuple(denominator),
        base_q=q,
        argument=z,
        termination_degree=n,
        regularized=regularized,
    )
    return phi_terminating(spec)


def qpochhammer_param_derivative(a: complex, q: complex, n: int) -> complex:
    """d/da (a;q)_n by the exact product rule.

    Sum over k of (-q^k) times the product of the remaining factors; this
    stays correct when one factor vanishes, where a log-derivative shortcut
    would not.
    """
    if n < 0:
        raise ValueError("q-Pochhammer order must be nonnegative")
    q = complex(q)
    a = complex(a)
    factors = [1.0 - a * q**m for m in range(n)]
    # prefix[k] = product of factors[:k], suffix[k] = product of factors[k+1:]
    prefix = [1.0 + 0.0j] * (n + 1)
    for m in range(n):
        prefix[m + 1] = prefix[m] * factors[m]
    suffix = [1.0 + 0.0j] * (n + 1)
    for m in range(n - 1, -1, -1):
        suffix[m] = suffix[m + 1] * factors[m]
    out = 0.0 + 0.0j
    for k in range(n):
        out += -(q**k) * prefix[k] * suffix[k + 1]
    return out
