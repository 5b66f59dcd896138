"""Concrete moment functionals.

Every linear functional used by the orthogonality checks is realized here
in one of two numeric shapes: a finite list of (possibly derivative-order)
mass points, or a trapezoid quadrature rule on the unit circle with
precomputed node weights.  Both shapes apply to a polynomial through
`functional_apply`, and `gram_matrix` works uniformly over functionals and
Sobolev-type forms (anything exposing `bilinear`).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    AssumptionViolated,
    BaseOutOfDisk,
    BranchMismatch,
    DegenerateWeight,
    DenominatorVanishes,
    MultipleZero,
    NonConvergence,
    NonNormal,
    ParamsOutsideDisk,
)
from .families import FamilyInstance, omega_index
from .polyengine import (
    RecurrenceCoeffs,
    as_poly,
    generate_seq,
    poly_der,
    poly_eval,
    roots,
)
from .qnum import qpochhammer, qpochhammer_inf, qpochhammer_param_derivative


@dataclass(frozen=True)
class MassPoint:
    location: complex
    derivative_order: int
    weight: complex


@dataclass(frozen=True)
class MomentFunctional:
    """A realized linear functional.

    kind "MassList": finite sum of weight * p^(order)(location).
    kind "CircleQuadrature": trapezoid rule, node_points/node_weights
    precomputed so application is a dot product.
    `normalization` records any divisor already folded into the weights
    (1 for a raw functional).
    """

    label: str
    kind: str  # "MassList" | "CircleQuadrature"
    masses: tuple = ()
    node_count: int = 0
    node_points: tuple = ()
    node_weights: tuple = ()
    normalization: complex = 1.0
    valid_degree: int | None = None
    tail_report: str = ""
    notes: str = ""


@dataclass(frozen=True)
class RootOfUnityData:
    r: complex
    E_N_or_rhs: complex
    N: int
    branch_note: str


def functional_apply(F: MomentFunctional, p) -> complex:
    p = as_poly(p)
    if F.kind == "MassList":
        total = 0.0 + 0.0j
        dcache = {0: p}
        for m in F.masses:
            if m.derivative_order not in dcache:
                dcache[m.derivative_order] = poly_der(p, m.derivative_order)
            total += m.weight * poly_eval(dcache[m.derivative_order], m.location)
        return total
    if F.kind == "CircleQuadrature":
        pts = np.asarray(F.node_points)
        wts = np.asarray(F.node_weights)
        vals = np.polyval(p[::-1], pts)
        return complex(np.dot(wts, vals))
    raise ValueError(f"unknown functional kind {F.kind!r}")


def functional_pair(F: MomentFunctional, p, r) -> complex:
    """F applied to the product p * r.

    The two factors are evaluated separately at every mass / node and the
    values multiplied there.  Expanding the product polynomial first and
    Horner-evaluating it loses all accuracy on wide lattices: the expanded
    coefficients alternate in sign and the cancellation noise at the largest
    abscissa swamps the tiny true value whenever either factor vanishes
    near a mass (which is exactly the situation orthogonality checks probe).
    Derivative-order masses use the Leibniz rule on the factors.
    """
    p = as_poly(p)
    r = as_poly(r)
    if F.kind == "MassList":
        max_order = max((m.derivative_order for m in F.masses), default=0)
        dp = [p]
        dr = [r]
        for j in range(max_order):
            dp.append(poly_der(dp[j], 1))
            dr.append(poly_der(dr[j], 1))
        total = 0.0 + 0.0j
        for m in F.masses:
            d = m.derivative_order
            val = sum(
                math.comb(d, j)
                * poly_eval(dp[j], m.location)
                * poly_eval(dr[d - j], m.location)
                for j in range(d + 1)
            )
            total += m.weight * val
        return total
    if F.kind == "CircleQuadrature":
        pts = np.asarray(F.node_points)
        wts = np.asarray(F.node_weights)
        vals = np.polyval(p[::-1], pts) * np.polyval(r[::-1], pts)
        return complex(np.dot(wts, vals))
    raise ValueError(f"unknown functional kind {F.kind!r}")


def self_normalized(F: MomentFunctional) -> MomentFunctional:
    """Scale the functional so it maps the constant 1 to 1."""
    mu0 = functional_apply(F, [1.0])
    if mu0 == 0:
        raise DegenerateWeight(f"{F.label}: vanishing value on the constant")
    if F.kind == "MassList":
        masses = tuple(
            MassPoint(m.location, m.derivative_order, m.weight / mu0)
            for m in F.masses
        )
        return replace(F, masses=masses, normalization=F.normalization * mu0)
    wts = tuple(w / mu0 for w in F.node_weights)
    return replace(F, node_weights=wts, normalization=F.normalization * mu0)


def functional_moments(F: MomentFunctional, k_max: int) -> list:
    """Power moments F(x^k), k = 0..k_max."""
    out = []
    for k in range(k_max + 1):
        mono = [0.0] * k + [1.0]
        out.append(functional_apply(F, mono))
    return out


def gram_matrix(form, seq, n_max: int) -> np.ndarray:
    """G[n, m] over the first n_max+1 members of seq.

    `form` is a MomentFunctional (applied to products) or any object with
    a `bilinear(p, r)` method (a Sobolev-type form).
    """
    pair = form.bilinear if hasattr(form, "bilinear") else (
        lambda p, r: functional_pair(form, p, r)
    )
    G = np.zeros((n_max + 1, n_max + 1), dtype=complex)
    for n in range(n_max + 1):
        for m in range(n, n_max + 1):
            v = pair(seq[n], seq[m])
            G[n, m] = v
            G[m, n] = v
    return G


def masslist_json(F: MomentFunctional) -> list:
    return [
        {
            "x_re": float(m.location.real),
            "x_im": float(m.location.imag),
            "order": int(m.derivative_order),
            "w_re": float(m.weight.real),
            "w_im": float(m.weight.imag),
        }
        for m in F.masses
    ]


# ---------------------------------------------------------------------------
# circle functional and closed-form norms


def _pochinf_vec(a: np.ndarray, q: complex, tol: float = 1e-17) -> np.ndarray:
    """(a;q)_inf for a vector of arguments, |q| < 1."""
    out = np.ones_like(a)
    f = np.array(a, dtype=complex)
    bound = float(np.max(np.abs(f))) if f.size else 0.0
    aq = abs(q)
    steps = 0
    while bound > tol:
        out *= 1.0 - f
        f *= q
        bound *= aq
        steps += 1
        if steps > 100_000:
            raise NonConvergence("circle weight product did not decay")
    return out


def aw_circle_functional(fam: FamilyInstance, node_count: int = 4096) -> MomentFunctional:
    """Unit-circle trapezoid realization of the continuous orthogonality
    functional: (1/2pi) integral of p(x) w(x)/sqrt(1-x^2) over [-1, 1],
    computed as the theta-average of p(cos t) w(cos t)/2.

    Weight w built from the four-parameter infinite product; requires all
    parameters strictly inside the unit disk so the unit circle separates
    the pole ladders.
    """
    if fam.id != "AW":
        raise ValueError("circle functional is defined for the 4-parameter family")
    if node_count & (node_count - 1):
        raise ValueError("node_count must be a power of two")
    q = fam.q
    if abs(q) >= 1:
        raise BaseOutOfDisk("|q| must be < 1 for the circle weight")
    params = [v for _, v in fam.params]
    if max(abs(v) for v in params) >= 1:
        raise ParamsOutsideDisk(
            "unit-circle rule needs all four parameters inside the disk"
        )
    theta = 2.0 * np.pi * np.arange(node_count) / node_count
    z = np.exp(1j * theta)
    num = _pochinf_vec(z * z, q) * _pochinf_vec(1.0 / (z * z), q)
    den = np.ones_like(z)
    for v in params:
        den *= _pochinf_vec(v * z, q) * _pochinf_vec(v / z, q)
    w = num / den
    pts = np.cos(theta)
    wts = w / (2.0 * node_count)
    return MomentFunctional(
        label=f"circle({node_count})",
        kind="CircleQuadrature",
        node_count=node_count,
        node_points=tuple(pts),
        node_weights=tuple(wts),
    )


def aw_norm_squared(fam: FamilyInstance, n: int) -> complex:
    """Closed-form squared norm of the degree-n monic polynomial under the
    circle functional."""
    q = fam.q
    a, b, c, d = (v for _, v in fam.params)
    abcd = a * b * c * d
    num = qpochhammer_inf(abcd * q ** (2 * n), q).value
    den = 4.0**n * qpochhammer(abcd * q ** (n - 1), q, n)
    for prod in (
        q ** (n + 1),
        a * b * q**n,
        a * c * q**n,
        a * d * q**n,
        b * c * q**n,
        b * d * q**n,
        c * d * q**n,
    ):
        den *= qpochhammer_inf(prod, q).value
    return num / den


# ---------------------------------------------------------------------------
# N-mass functional for the ab = q^{1-N} degeneracy


def _aw_truncation_order(fam: FamilyInstance) -> int:
    a, b, _, _ = (v for _, v in fam.params)
    k = omega_index(a * b, fam.q)
    if k is None:
        raise AssumptionViolated("functional needs ab = q^(1-N)")
    return k + 1  # ab = q^{-k} = q^{1-N}


def qracah_functional(fam: FamilyInstance) -> MomentFunctional:
    """N masses at (q^-j + a^2 q^j)/(2a) with the lattice weights that the
    truncated four-parameter family inherits from its finite relative."""
    q = fam.q
    a, b, c, d = (v for _, v in fam.params)
    N = _aw_truncation_order(fam)
    for bad, who in ((a * a, "a^2"), (b * b, "b^2")):
        k = omega_index(bad, q)
        if k is not None and k <= N - 2:
            raise AssumptionViolated(
                f"{who} lies in the excluded inverse-power range"
            )
    masses = []
    for j in range(N):
        num = (
            qpochhammer(q ** (-N + 1), q, j)
            * qpochhammer(a * c, q, j)
            * qpochhammer(a * d, q, j)
            * qpochhammer(a * a, q, j)
        )
        den = (
            qpochhammer(q, q, j)
            * qpochhammer(a * a * q**N, q, j)
            * qpochhammer(a * q / c, q, j)
            * qpochhammer(a * q / d, q, j)
        )
        if den == 0:
            raise DegenerateWeight(f"weight denominator vanished at j={j}")
        w = num / den * (1 - a * a * q ** (2 * j)) / (
            (c * d * q ** (-N)) ** j * (1 - a * a)
        )
        masses.append(MassPoint((q ** (-j) + a * a * q**j) / (2 * a), 0, w))
    return MomentFunctional(
        label=f"lattice-mass(N={N})",
        kind="MassList",
        masses=tuple(masses),
        valid_degree=2 * N - 2,
    )


# ---------------------------------------------------------------------------
# derivative-mass functional for the doubly degenerate case
# (ab = q^{1-N} and a^2 = q^{-M})


def _mass_weight_and_derivative(alpha, c, d, N, j, q):
    """A_j(alpha) and d/dalpha A_j(alpha), via the exact product rule so a
    vanishing factor poisons nothing."""
    # numerator factors (value, derivative in alpha)
    fac = [
        (qpochhammer(q ** (-N + 1), q, j), 0.0),
        (qpochhammer(alpha * c, q, j), c * qpochhammer_param_derivative(alpha * c, q, j)),
        (qpochhammer(alpha * d, q, j), d * qpochhammer_param_derivative(alpha * d, q, j)),
        (
            qpochhammer(alpha * alpha, q, j),
            2 * alpha * qpochhammer_param_derivative(alpha * alpha, q, j),
        ),
        (1 - alpha * alpha * q ** (2 * j), -2 * alpha * q ** (2 * j)),
    ]
    gac = [
        (qpochhammer(q, q, j), 0.0),
        (
            qpochhammer(alpha * alpha * q**N, q, j),
            2 * alpha * q**N * qpochhammer_param_derivative(alpha * alpha * q**N, q, j),
        ),
        (
            qpochhammer(alpha * q / c, q, j),
            (q / c) * qpochhammer_param_derivative(alpha * q / c, q, j),
        ),
        (
            qpochhammer(alpha * q / d, q, j),
            (q / d) * qpochhammer_param_derivative(alpha * q / d, q, j),
        ),
        ((c * d * q ** (-N)) ** j, 0.0),
        (1 - alpha * alpha, -2 * alpha),
    ]
    P = 1.0 + 0.0j
    for v, _ in fac:
        P *= v
    dP = 0.0 + 0.0j
    for k, (_, dv) in enumerate(fac):
        if dv == 0:
            continue
        rest = 1.0 + 0.0j
        for m, (v, _) in enumerate(fac):
            if m != k:
                rest *= v
        dP += dv * rest
    Q = 1.0 + 0.0j
    for v, _ in gac:
        Q *= v
    dQ = 0.0 + 0.0j
    for k, (_, dv) in enumerate(gac):
        if dv == 0:
            continue
        rest = 1.0 + 0.0j
        for m, (v, _) in enumerate(gac):
            if m != k:
                rest *= v
        dQ += dv * rest
    if Q == 0:
        raise DegenerateWeight(f"weight denominator vanished at j={j}")
    A = P / Q
    dA = (dP * Q - P * dQ) / (Q * Q)
    return A, dA


def mass_weight(fam: FamilyInstance, j: int, alpha=None):
    """A_j evaluated at alpha (default: the family's own first parameter),
    together with its alpha-derivative."""
    q = fam.q
    a, _, c, d = (v for _, v in fam.params)
    N = _aw_truncation_order(fam)
    return _mass_weight_and_derivative(
        a if alpha is None else alpha, c, d, N, j, q
    )


def aw_degenerate_functional(fam: FamilyInstance) -> MomentFunctional:
    """Limit functional when additionally a^2 = q^-M: the plain masses
    cancel pairwise, so the surviving functional carries the
    alpha-derivative of each weight, plus first-derivative masses on the
    paired points."""
    q = fam.q
    a, b, c, d = (v for _, v in fam.params)
    N = _aw_truncation_order(fam)
    M = omega_index(a * a, q)
    if M is None or M > N - 2:
        raise AssumptionViolated("needs a^2 = q^-M with M <= N-2")

    def mu(j):
        return (a * q**j + q ** (-j) / a) / 2.0

    masses = []
    seen = set()
    half = M // 2 if M % 2 == 0 else (M - 1) // 2 + 1  # first index NOT paired
    for j in range(0, (M - 1) // 2 + 1 if M % 2 else M // 2):
        A_j, dA_j = _mass_weight_and_derivative(a, c, d, N, j, q)
        _, dA_mj = _mass_weight_and_derivative(a, c, d, N, M - j, q)
        masses.append(MassPoint(mu(j), 0, dA_j + dA_mj))
        masses.append(MassPoint(mu(j), 1, A_j * (q**j - q ** (M - j))))
        seen.add(j)
        seen.add(M - j)
    if M % 2 == 0:
        _, dA_half = _mass_weight_and_derivative(a, c, d, N, M // 2, q)
        masses.append(MassPoint(mu(M // 2), 0, dA_half))
        if M // 2 in seen:
            raise BranchMismatch("center index collided with a pair")
        seen.add(M // 2)
    for j in range(M + 1, N):
        _, dA_j = _mass_weight_and_derivative(a, c, d, N, j, q)
        masses.append(MassPoint(mu(j), 0, dA_j))
        if j in seen:
            raise BranchMismatch("tail index collided with a pair")
        seen.add(j)
    if seen != set(range(N)):
        raise BranchMismatch("parity branches did not cover 0..N-1 exactly")
    return MomentFunctional(
        label=f"derivative-mass(N={N},M={M})",
        kind="MassList",
        masses=tuple(masses),
        valid_degree=2 * N - 2,
    )


# ---------------------------------------------------------------------------
# Jackson q-integral functionals


def jackson_qintegral(p, lower: complex, upper: complex, q: complex, tol: float = 1e-15) -> complex:
    """integral_lower^upper p(t) d_q t via the two geometric node chains."""
    if abs(q) >= 1:
        raise BaseOutOfDisk("Jackson integral needs |q| < 1")
    p = as_poly(p)
    deg = len(p) - 1

    def chain(endpoint):
        if endpoint == 0:
            return 0.0 + 0.0j
        total = 0.0 + 0.0j
        scale = max(1.0, abs(endpoint)) ** deg * float(np.sum(np.abs(p)))
        s = 0
        qs = 1.0 + 0.0j
        while True:
            total += poly_eval(p, endpoint * qs) * qs
            s += 1
            qs *= q
            if abs(qs) * scale < tol:
                break
            if s > 100_000:
                raise NonConvergence("Jackson chain did not decay")
        return endpoint * (q - 1) * total

    return chain(lower) - chain(upper)


def bqj_functional(fam: FamilyInstance, tol: float = 1e-14, n_max: int = 16) -> MomentFunctional:
    """Jackson-integral orthogonality functional on the two geometric node
    chains q*aq^s and q*cq^s, with the displayed infinite-product weight.

    Truncation is degree-aware: a chain stops once the weight magnitude
    times max(1, |x|)^(2*n_max) falls below tol.
    """
    if fam.id != "bqJ":
        raise ValueError("Jackson functional is defined for the 3-parameter family")
    q = fam.q
    if abs(q) >= 1:
        raise BaseOutOfDisk("Jackson functional needs |q| < 1")
    a, b, c = (v for _, v in fam.params)
    if a == 0:
        raise DegenerateWeight("Jackson functional needs a nonzero first parameter")
    if omega_index(a * b, q) is not None:
        raise NonNormal("ab on the inverse power ladder: family is not normal")

    if c == 0:
        # collapsed lower chain: the pair of c-dependent infinite products
        # in the weight tends to a clean geometric factor b^s along the
        # surviving chain (each step contributes (1 - b x/c)/(1 - x/c) -> b)
        if abs(b * q) >= 1:
            raise NonConvergence("single-chain weight does not decay")
        masses = []
        s = 0
        term = (1 - q) * a * q
        bs = 1.0 + 0.0j
        while True:
            x = a * q ** (s + 1)
            num = qpochhammer_inf(q ** (s + 1), q).value
            den = qpochhammer_inf(x, q).value
            if den == 0:
                raise DegenerateWeight(f"weight pole at node x={x}")
            masses.append(MassPoint(x, 0, term * bs * num / den))
            s += 1
            term *= q
            bs *= b
            if abs(term * bs) * max(1.0, abs(a * q)) ** (2 * n_max) < tol:
                break
            if s > 10_000:
                raise NonConvergence("node chain did not decay")
        return MomentFunctional(
            label="jackson",
            kind="MassList",
            masses=tuple(masses),
            tail_report=f"single chain truncated at {s} nodes",
        )

    def weight(x):
        num = qpochhammer_inf(x / a, q).value * qpochhammer_inf(x / c, q).value
        den = qpochhammer_inf(x, q).value * qpochhammer_inf(b * x / c, q).value
        if den == 0:
            raise DegenerateWeight(f"weight pole at node x={x}")
        return num / den

    masses = []
    counts = []
    for endpoint, sign in ((a * q, 1.0), (c * q, -1.0)):
        s = 0
        qs = 1.0 + 0.0j
        while True:
            x = endpoint * qs
            w = sign * (1 - q) * endpoint * qs * weight(x)
            masses.append(MassPoint(x, 0, w))
            s += 1
            qs *= q
            if abs((1 - q) * endpoint * qs) * max(1.0, abs(endpoint)) ** (
                2 * n_max
            ) < tol:
                break
            if s > 10_000:
                raise NonConvergence("node chain did not decay")
        counts.append(s)
    return MomentFunctional(
        label="jackson",
        kind="MassList",
        masses=tuple(masses),
        tail_report=f"chains truncated at {counts[0]} and {counts[1]} nodes",
    )


def qhahn_functional(a: complex, b: complex, N: int, q: complex) -> MomentFunctional:
    """N masses at q^-x, x = 0..N-1, with the finite lattice weights."""
    if N < 1:
        raise ValueError("N must be positive")
    masses = []
    for x in range(N):
        num = qpochhammer(a * q, q, x) * qpochhammer(q ** (-N + 1), q, x)
        den = qpochhammer(q, q, x) * qpochhammer(q ** (-N + 1) / b, q, x)
        if den == 0:
            raise DegenerateWeight(f"weight denominator vanished at x={x}")
        masses.append(MassPoint(q ** (-x), 0, num / den * (a * b * q) ** (-x)))
    return MomentFunctional(
        label=f"finite-lattice(N={N})",
        kind="MassList",
        masses=tuple(masses),
        valid_degree=2 * N - 2,
    )


def bqj_blimit_functional(a: complex, c: complex, N: int, q: complex) -> MomentFunctional:
    """Limit b -> q^-N of the Jackson functional: N masses at c q^(N-s)."""
    if N < 1:
        raise ValueError("N must be positive")
    masses = []
    for s in range(N):
        num = qpochhammer(a / c * q ** (-N + 1), q, s) * qpochhammer(
            q ** (-N + 1), q, s
        )
        den = qpochhammer(q ** (-N + 1) / c, q, s) * qpochhammer(q, q, s)
        if den == 0:
            raise DegenerateWeight(f"weight denominator vanished at s={s}")
        w = num / den * q ** ((N - 1) * s) / a**s
        masses.append(MassPoint(c * q ** (N - s), 0, w))
    return MomentFunctional(
        label=f"b-limit(N={N})",
        kind="MassList",
        masses=tuple(masses),
        valid_degree=2 * N - 2,
    )


# ---------------------------------------------------------------------------
# root-of-unity functionals


def solve_root_of_unity_r(fam: FamilyInstance, N: int) -> RootOfUnityData:
    """Solve the closure equation for the mass-ladder base point r and pick
    the N-th root with minimal argument (principal square root; argument
    normalized to [0, 2pi), ties by modulus closest to 1)."""
    q = fam.q
    if fam.id == "AW":
        a, b, c, d = (v for _, v in fam.params)
        den = 1 - (a * b * c * d) ** N
        if abs(den) < 1e-14:
            raise DenominatorVanishes("(abcd)^N = 1")
        E = (
            a**N
            + b**N
            + c**N
            + d**N
            - (a * b * c) ** N
            - (a * b * d) ** N
            - (a * c * d) ** N
            - (b * c * d) ** N
        ) / den
        target = E / 2 + cmath.sqrt(E * E / 4 - 1)
        note = "principal square root"
    elif fam.id == "bqJ":
        a, b, c = (v for _, v in fam.params)
        den = 1 - (a * b) ** N
        if abs(den) < 1e-14:
            raise DenominatorVanishes("(ab)^N = 1")
        target = (a**N + c**N - (a * b) ** N - (a * c) ** N) / den
        note = "rational target, no square root"
    else:
        raise ValueError("root ladder defined for the AW/bqJ recurrences")

    base = target ** (1.0 / N)
    cands = [base * cmath.exp(2j * cmath.pi * k / N) for k in range(N)]

    def argkey(r):
        ph = cmath.phase(r) % (2 * math.pi)
        return ph

    best = min(argkey(r) for r in cands)
    ties = [r for r in cands if argkey(r) - best < 1e-12]
    r = min(ties, key=lambda v: abs(abs(v) - 1.0))
    if len(ties) > 1:
        note += "; argument tie broken by modulus nearest 1"
    if abs(r**N - target) > 1e-12 * max(1.0, abs(target)):
        raise AssumptionViolated("root does not satisfy its defining equation")
    return RootOfUnityData(r=r, E_N_or_rhs=target, N=N, branch_note=note)


def aw_rootofunity_functional(fam: FamilyInstance, r_data: RootOfUnityData) -> MomentFunctional:
    """N masses on the ladder x_j = (r q^j + r^-1 q^-j)/2.

    The tabulated mass points are printed on the doubled variable
    (r q^j + r^-1 q^-j); dividing by 2 puts them on the same axis as the
    monic recurrence, where they coincide with the zeros of p_N.

    The weight is the solution of the two-term ladder recursion
    rho(s+1)/rho(s) = A(z_s)/A(1/z_{s+1}) with z_s = r q^s and A the
    rate function of the z-form difference equation; telescoping gives
    the factor (1 - r^2 q^{2j})/(1 - r^2) below (the tabulated display
    carries r where the recursion forces r^2).
    """
    q = fam.q
    a, b, c, d = (v for _, v in fam.params)
    N = r_data.N
    abcd = a * b * c * d
    for k in range(N):
        for prod in (abcd, a * b, a * c, a * d, b * c, b * d, c * d):
            if abs(prod - q**k) < 1e-12:
                raise AssumptionViolated(
                    f"parameter product equals q^{k}; ladder weights undefined"
                )
    r = r_data.r
    masses = []
    for j in range(N):
        num = (
            qpochhammer(a * r, q, j)
            * qpochhammer(b * r, q, j)
            * qpochhammer(c * r, q, j)
            * qpochhammer(d * r, q, j)
        )
        den = (
            qpochhammer(q * r / a, q, j)
            * qpochhammer(q * r / b, q, j)
            * qpochhammer(q * r / c, q, j)
            * qpochhammer(q * r / d, q, j)
        )
        if den == 0:
            raise DegenerateWeight(f"ladder weight denominator vanished at j={j}")
        w = (q / abcd) ** j * (1 - r * r * q ** (2 * j)) * num / (
            (1 - r * r) * den
        )
        x = (r * q**j + q ** (-j) / r) / 2.0
        masses.append(MassPoint(x, 0, w))
    return MomentFunctional(
        label=f"unity-ladder(N={N})",
        kind="MassList",
        masses=tuple(masses),
        valid_degree=2 * N - 2,
    )


def aw_rootofunity_reflected(fam: FamilyInstance, r_data: RootOfUnityData) -> MomentFunctional:
    """Same ladder weights with masses at the negated points."""
    F = aw_rootofunity_functional(fam, r_data)
    masses = tuple(
        MassPoint(-m.location, m.derivative_order, m.weight) for m in F.masses
    )
    return replace(F, label=F.label + "-reflected", masses=masses)


def _ratio_chain(top: complex, bot: complex, q: complex, j: int) -> complex:
    """prod_{i<j} (1 - top q^i)/(1 - bot q^i) with matched zeros cancelled
    exactly (needed when top and bot coincide)."""
    out = 1.0 + 0.0j
    for i in range(j):
        t = 1 - top * q**i
        bvl = 1 - bot * q**i
        if abs(bvl) < 1e-13:
            if abs(t) < 1e-13:
                continue  # common vanishing factor: ratio contributes 1
            raise AssumptionViolated("weight denominator vanished without a match")
        out *= t / bvl
    return out


def bqj_rootofunity_functional(fam: FamilyInstance, r_data: RootOfUnityData) -> MomentFunctional:
    """N masses at r q^j.

    The tabulated weight is a ratio of four infinite products which
    diverge individually on the unit base; the closure equation for r
    makes each length-N block of the combined product equal 1, so after
    cancelling the common tail the usable weight is the finite-product
    form below.  The display mixes two running indices; a single index j
    is used here.  Normalized so the functional maps 1 to 1.

    The parameter c is allowed to sit on the power ladder (the c = 1
    closed-form case): its vanishing denominator factors are matched by
    numerator zeros and cancel exactly.
    """
    q = fam.q
    a, b, c = (v for _, v in fam.params)
    N = r_data.N
    for k in range(N):
        for prod in (a, b, a * b, a * b / c):
            if abs(prod - q**k) < 1e-12:
                raise AssumptionViolated(
                    f"parameter combination equals q^{k}; weights undefined"
                )
    r = r_data.r
    masses = []
    for j in range(N):
        w = (
            q**j
            * _ratio_chain(r, r / c, q, j)
            * _ratio_chain(r * b / c, r / a, q, j)
        )
        masses.append(MassPoint(r * q**j, 0, w))
    F = MomentFunctional(
        label=f"unity-ladder(N={N})",
        kind="MassList",
        masses=tuple(masses),
        valid_degree=2 * N - 2,
        notes="single mass index used where the source display mixes two",
    )
    return self_normalized(F)


def bqj_c1_ladder_weights(a: complex, b: complex, N: int, q: complex) -> list:
    """Closed-form ladder weights for the c = 1 special case."""
    out = []
    for s in range(N):
        num = (1 - a**N) * (1 - a * b * q) * qpochhammer(b, q, s) * q**s
        den = a * q * (b - 1) * (1 - a**N * b**N) * qpochhammer(1 / a, q, s)
        if den == 0:
            raise DegenerateWeight(f"closed-form weight denominator zero at s={s}")
        out.append(num / den)
    return out


def christoffel_functional(coeffs: RecurrenceCoeffs, N: int) -> MomentFunctional:
    """Masses at the zeros of p_N with weights
    gamma_1..gamma_{N-1} / (p_{N-1}(x_s) p_N'(x_s)); zeros must be simple."""
    seq = generate_seq(coeffs, N)
    pN = seq[N]
    pN1 = seq[N - 1]
    root_list = roots(pN)
    if any(mult > 1 for _, mult in root_list):
        raise MultipleZero("p_N has a repeated zero; weights undefined")
    gprod = 1.0 + 0.0j
    for k in range(1, N):
        gprod *= coeffs.gamma(k)
    dpN = poly_der(pN)
    masses = []
    for x, _ in root_list:
        denom = poly_eval(pN1, x) * poly_eval(dpN, x)
        if denom == 0:
            raise DegenerateWeight("zero of p_N is also a zero of p_{N-1}")
        masses.append(MassPoint(x, 0, gprod / denom))
    return MomentFunctional(
        label=f"zero-ladder(N={N})",
        kind="MassList",
        masses=tuple(masses),
        valid_degree=2 * N - 2,
    )


def rho_recursion_report(fam: FamilyInstance, r_data: RootOfUnityData) -> dict:
    """Check the two-term ladder relation A_{s+1} rho(s+1) = C_s rho(s)
    along z_s = r q^s, identifying A_s with the z-form rate function at
    1/z_s (the backward coefficient) and C_s with the rate at z_s (the
    forward coefficient).  Reported, not asserted: the source leaves the
    normalization of the recursion coefficients unstated."""
    from .qdiff import _zform_A

    q = fam.q
    a, b, c, d = (v for _, v in fam.params)
    F = aw_rootofunity_functional(fam, r_data)
    rho = [m.weight for m in F.masses]
    r = r_data.r
    worst = 0.0
    for s in range(r_data.N - 1):
        z0 = r * q**s
        z1 = r * q ** (s + 1)
        lhs = _zform_A(a, b, c, d, q, 1 / z1) * rho[s + 1]
        rhs = _zform_A(a, b, c, d, q, z0) * rho[s]
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(rhs)))
    return {
        "residual": worst,
        "identified_as": "A_s := zform rate at 1/z_s, C_s := rate at z_s",
        "holds": worst < 1e-8,
    }
