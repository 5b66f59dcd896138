"""Difference operators: Hahn D_q and D_{q^-1}, the divided-difference
operator on the trigonometric variable, lattice forward differences, the
second-order hypergeometric operator on the q-linear lattice, and the
z-form difference equation of the four-parameter family.

Operators act on ascending complex coefficient arrays.  Exact monomial
rules are used where available; everything else is sample-and-interpolate
with one guard node asserting the output really is a polynomial.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateBase,
    InapplicableIdentity,
    NotPolynomialOutput,
    SamplePole,
    UnknownParam,
)
from .families import EVAL_ONLY, FamilyInstance, hyper_coeffs, make_family, recurrence
from .polyengine import as_poly, generate_seq, poly_degree, poly_eval, poly_trim
from .qnum import qnumber


@dataclass(frozen=True)
class LatticeSpec:
    form: str  # "qLinear" | "qQuadratic"
    gd: complex = 0.0  # the product carried by the quadratic lattice


@dataclass(frozen=True)
class OperatorSpec:
    kind: str  # "HahnDq" | "HahnDqInv" | "AWDividedDiff" | "LatticeForward"
    base_q: complex
    lattice: LatticeSpec | None = None


# deterministic sample segment in the complex plane, away from lattice
# degeneracies and operator poles
_NODE_LO = 0.29 + 0.41j
_NODE_HI = 2.03 + 1.17j


def _sample_nodes(count: int) -> np.ndarray:
    ts = np.cos(np.pi * np.arange(count) / max(count - 1, 1))
    return _NODE_LO + (_NODE_HI - _NODE_LO) * (ts + 1.15) / 2.3


def _circle_nodes(count: int, radius: float = 1.37, phase: float = 0.31):
    """Interpolation abscissas on a centered circle: monomial Vandermonde
    systems on these are DFT-like and stay well conditioned to high degree."""
    theta = 2 * np.pi * (np.arange(count) + phase) / count
    return radius * np.exp(1j * theta)


def _interp_with_guard(nodes, vals, guard_node, guard_val, what: str):
    V = np.vander(nodes, len(nodes), increasing=True)
    coeffs = np.linalg.solve(V, np.asarray(vals, dtype=complex))
    want = poly_eval(coeffs, guard_node)
    scale = max(1.0, float(np.max(np.abs(vals))), abs(guard_val))
    if abs(guard_val - want) > 1e-9 * scale:
        raise NotPolynomialOutput(
            f"{what}: guard node off by {abs(guard_val - want):.3g} "
            f"(scale {scale:.3g})"
        )
    return poly_trim(coeffs, tol=1e-12)


def _phi_basis_coeffs(p: np.ndarray) -> np.ndarray:
    """Expand p(x) over phi_n(x) = z^n + z^-n with x = (z + 1/z)/2.

    phi_0 = 2, phi_1 = 2x, phi_{n+1} = 2x phi_n - phi_{n-1}; the expansion
    is triangular in the leading coefficients (lead of phi_n is 2^n).
    """
    p = np.array(as_poly(p), dtype=complex)
    n = poly_degree(p)
    out = np.zeros(n + 1, dtype=complex)
    # phi polynomials up to degree n
    phis = [np.array([2.0 + 0.0j]), np.array([0.0, 2.0 + 0.0j])]
    for m in range(2, n + 1):
        nxt = np.zeros(m + 1, dtype=complex)
        nxt[1:] += 2 * phis[m - 1]
        nxt[: m - 1] -= phis[m - 2]
        phis.append(nxt)
    for m in range(n, -1, -1):
        c = p[m] / phis[m][m]
        out[m] = c
        p = p.copy()
        p[: m + 1] -= c * phis[m]
    return out


def _phi_basis_to_mono(c_phi: np.ndarray) -> np.ndarray:
    n = len(c_phi) - 1
    out = np.zeros(n + 1, dtype=complex)
    phi_prev = np.array([2.0 + 0.0j])
    phi_cur = np.array([0.0, 2.0 + 0.0j])
    for m in range(n + 1):
        phi = phi_prev if m == 0 else phi_cur
        out[: m + 1] += c_phi[m] * phi
        if 1 <= m <= n - 1:
            nxt = np.zeros(m + 2, dtype=complex)
            nxt[1:] += 2 * phi_cur
            nxt[: m] -= phi_prev
            phi_prev, phi_cur = phi_cur, nxt
    return out


def apply_operator(op: OperatorSpec, p) -> np.ndarray:
    """Apply a degree-lowering operator; returns ascending coefficients."""
    q = op.base_q
    if q == 1:
        raise DegenerateBase("operators are undefined at q = 1")
    p = np.array(as_poly(p), dtype=complex)
    n = poly_degree(p)
    if n == 0:
        return np.zeros(1, dtype=complex)

    if op.kind == "HahnDq":
        return np.array([p[m] * qnumber(m, q) for m in range(1, n + 1)])
    if op.kind == "HahnDqInv":
        return np.array([p[m] * qnumber(m, 1 / q) for m in range(1, n + 1)])
    if op.kind == "AWDividedDiff":
        # exact on phi_n = z^n + z^-n:
        #   D phi_n = kappa_n (z^n - z^-n)/((z - 1/z)/2) / (q^(1/2)-q^(-1/2)) ...
        # collapsed: D phi_n = kap_n [sum of phi_m, m = n-1, n-3, ...] with the
        # m = 0 term halved; kap_n = 2 (q^(n/2) - q^(-n/2)) / (q^(1/2) - q^(-1/2))
        sq = cmath.sqrt(q)
        if sq == 1 / sq:
            raise DegenerateBase("q^(1/2) = q^(-1/2); shift collapses")
        c_phi = _phi_basis_coeffs(p)
        out_phi = np.zeros(n, dtype=complex)
        for m in range(1, n + 1):
            kap = 2 * (sq**m - sq ** (-m)) / (sq - 1 / sq)
            j = m - 1
            while j >= 0:
                out_phi[j] += c_phi[m] * kap * (0.5 if j == 0 else 1.0)
                j -= 2
        return poly_trim(_phi_basis_to_mono(out_phi))
    if op.kind == "LatticeForward":
        lat = op.lattice
        if lat is None:
            raise UnknownParam("LatticeForward needs a LatticeSpec")
        if lat.form == "qLinear":
            # x(s)=q^s; forward difference on y=q^{-x} is D at base q^-1
            return np.array([p[m] * qnumber(m, 1 / q) for m in range(1, n + 1)])
        if lat.form == "qQuadratic":
            # input variable v(z) = z + gd q / z with z = q^{-x}; the shift
            # x -> x+1 sends z to z/q; output is a polynomial in
            # u(z) = z + gd q^2 / z (the once-shifted lattice).
            #
            # Substituting z = sqrt(gd q) w turns v into 2 sqrt(gd q) X with
            # X = (w + 1/w)/2 and the forward step into the symmetric
            # divided difference at w-tilde = w/sqrt(q), with the output
            # variable u = 2 sqrt(gd q^2) X(w-tilde) -- so the whole step is
            # the trigonometric divided difference conjugated by two affine
            # scalings, and is computed exactly in the phi basis.
            gd = lat.gd
            if gd == 0:
                return np.array(
                    [p[m] * qnumber(m, 1 / q) for m in range(1, n + 1)]
                )
            s1 = cmath.sqrt(gd * q)
            s2 = s1 * cmath.sqrt(q)
            scaled = np.array(
                [p[m] * (2 * s1) ** m for m in range(n + 1)], dtype=complex
            )
            out = apply_operator(OperatorSpec("AWDividedDiff", q), scaled)
            # the difference quotient above is per x-unit; v = 2 s1 x
            return np.array(
                [out[m] / (2 * s2) ** m / (2 * s1) for m in range(len(out))],
                dtype=complex,
            )
        raise UnknownParam(f"unknown lattice form {lat.form!r}")
    raise UnknownParam(f"unknown operator kind {op.kind!r}")


def operator_power(op: OperatorSpec, k: int, p) -> np.ndarray:
    """k-fold application; the quadratic lattice product advances by q each
    step (the output of one step lives on the once-shifted lattice)."""
    out = np.array(as_poly(p), dtype=complex)
    cur = op
    for _ in range(k):
        out = apply_operator(cur, out)
        if cur.kind == "LatticeForward" and cur.lattice.form == "qQuadratic":
            cur = OperatorSpec(
                cur.kind,
                cur.base_q,
                LatticeSpec("qQuadratic", cur.lattice.gd * cur.base_q),
            )
    return out


# ---------------------------------------------------------------------------
# family shift identities


def _shifted_family(fam: FamilyInstance, op_kind: str):
    """Single-step parameter shift rule and the stated monic constant."""
    q = fam.q
    p = fam.params_dict
    if fam.id == "AW" and op_kind in ("HahnDq", "AWDividedDiff"):
        sq = cmath.sqrt(q)
        shifted = make_family(
            "AW", {k: v * sq for k, v in p.items()}, q, fam.q_mode
        )
        if op_kind == "AWDividedDiff":
            # true monic constant for the divided difference: half the
            # leading action kap_n (symmetric bracket)
            return shifted, lambda n: (sq**n - sq**-n) / (sq - 1 / sq)
        return shifted, lambda n: (q**n - 1) / (q - 1)
    if fam.id == "bqJ" and op_kind in ("HahnDqInv", "HahnDq"):
        # D_{q^-1} advances (a, b, c) to (aq, bq, cq); D_q steps back
        mult = q if op_kind == "HahnDqInv" else 1 / q
        shifted = make_family(
            "bqJ", {k: v * mult for k, v in p.items()}, q, fam.q_mode
        )
        base = 1 / q if op_kind == "HahnDqInv" else q
        return shifted, lambda n: (base**n - 1) / (base - 1)
    if fam.id == "qH" and op_kind == "HahnDqInv":
        shifted = make_family(
            "qH",
            {"alpha": p["alpha"] * q, "beta": p["beta"] * q, "N": p["N"] - 1},
            q,
            fam.q_mode,
        )
        return shifted, lambda n: (q**-n - 1) / (q**-1 - 1)
    raise InapplicableIdentity(
        f"no shift rule registered for {fam.id} under {op_kind}"
    )


def shift_identity_residual(fam: FamilyInstance, op: OperatorSpec, n: int) -> float:
    """Max-norm residual of op(p_n) against the stated constant times the
    parameter-shifted p_{n-1}, over deg+1 sample points (relative to the
    right side's scale)."""
    shifted, const = _shifted_family(fam, op.kind)
    p_n = generate_seq(recurrence(fam), n)[n]
    rhs_poly = generate_seq(recurrence(shifted), n - 1)[n - 1]
    lhs = apply_operator(op, p_n)
    cn = const(n)
    nodes = _sample_nodes(n + 1)
    lv = np.array([poly_eval(lhs, x) for x in nodes])
    rv = cn * np.array([poly_eval(rhs_poly, x) for x in nodes])
    scale = max(1.0, float(np.max(np.abs(rv))))
    return float(np.max(np.abs(lv - rv)) / scale)


# ---------------------------------------------------------------------------
# second-order hypergeometric operator (q-linear lattice) and Table 1 data


@dataclass(frozen=True)
class DiffEqData:
    sigma: tuple  # ascending, degree <= 2
    tau: tuple  # ascending, degree 1 (already divided by q-1)
    lambda_formula: object = None  # optional closed form n -> lambda_n


def hyper_operator_apply(data: DiffEqData, q: complex, p) -> np.ndarray:
    """Pointwise realization on x(s)=q^s, interpolated back to coefficients.

    (nabla f / nabla x)(x) = (f(x) - f(x/q)) / (x - x/q); the outer
    difference of that is divided by Delta x(s) = qx - x, and the
    first-order part uses (f(qx) - f(x)) / (qx - x).  Equivalently the
    whole operator is sigma(x) D_q D_{q^-1} + tau(x) D_q, the only divisor
    normalization under which the tabulated sigma/tau rows make p_n an
    eigenfunction (the symmetric half-step divisor fails for n >= 2).
    """
    if q == 1:
        raise DegenerateBase("operator undefined at q = 1")
    p = np.array(as_poly(p), dtype=complex)
    n = poly_degree(p)
    sigma = np.asarray(data.sigma, dtype=complex)
    tau = np.asarray(data.tau, dtype=complex)

    def hval(x):
        g1 = (poly_eval(p, q * x) - poly_eval(p, x)) / (q * x - x)
        g0 = (poly_eval(p, x) - poly_eval(p, x / q)) / (x - x / q)
        second = (g1 - g0) / ((q - 1) * x)
        first = g1  # (Delta f / Delta x)(x) on the same lattice
        return poly_eval(sigma, x) * second + poly_eval(tau, x) * first

    if n == 0:
        return np.zeros(1, dtype=complex)
    nodes = _circle_nodes(n + 1)
    guard = 1.37 * np.exp(1j * 2.231)
    vals = [hval(x) for x in nodes]
    return _interp_with_guard(nodes, vals, guard, hval(guard), "hyper operator")


def _bqj_sigma_tau(a, b, c, q):
    sig = (a * c * q**2, -q * (a + c), 1)
    taup = (q * (a + c - a * b * q - a * c * q), a * b * q**2 - 1)
    return sig, taup


def table1_data(fam: FamilyInstance) -> DiffEqData:
    """sigma and tau making p_n (in this library's variable convention) an
    eigenfunction of the q-linear operator.  tau is stored below as
    (q-1)tau and divided by q-1 on load.

    Rows for families that are parameter slices of the 3-parameter family
    are instantiated from its row, which keeps every row consistent with
    the hypergeometric variable the polynomials are actually built in.
    """
    q = fam.q
    p = fam.params_dict
    fid = fam.id
    if fid == "bqJ":
        sig, taup = _bqj_sigma_tau(p["a"], p["b"], p["c"], q)
    elif fid == "qH":
        sig, taup = _bqj_sigma_tau(p["alpha"], p["beta"], q ** (-p["N"] - 1), q)
    elif fid == "bqL":
        a, b = p["a"], p["b"]
        sig = (a * b * q**2, -q * (a + b), 1)
        taup = (q * (a + b - a * b * q), -1)
    elif fid == "AqK":
        sig, taup = _bqj_sigma_tau(p["p"], 0.0, q ** (-p["N"] - 1), q)
    elif fid == "ACI":
        a = p["a"]
        sig = (a, -1 - a, 1)
        taup = (1 + a, -1)
    elif fid == "lqJ":
        a, b = p["a"], p["b"]
        sig = (0, -1, 1)
        taup = (1 - a * q, a * b * q**2 - 1)
    elif fid == "qK":
        sig, taup = _bqj_sigma_tau(q ** (-p["N"] - 1), -p["p"] * q ** p["N"], 0.0, q)
    elif fid == "AqC":
        a = p["a"]
        sig = (0, -1, 1)
        taup = (1, -(a * q + 1))
    elif fid == "lqL":
        a = p["a"]
        sig = (0, -1, 1)
        taup = (1 - a * q, -1)
    elif fid == "0JB":
        a, b = p["a"], p["b"]
        sig = (0, 0, 1)
        taup = (-a * b * q, a * q - 1)
    elif fid == "0LB":
        a = p["a"]
        sig = (0, 0, 1)
        taup = (-a * q, -1)
    elif fid == "qM":
        b, c = p["b"], p["c"]
        sig = (-b * q, 1)
        taup = (-q / c - 1 + b * q, q / c)
    elif fid == "QqK":
        # obtained by conjugating the 3-parameter row at inverted base
        # through x -> q^N x (the same route the recurrence uses)
        pp, N = p["p"], p["N"]
        sig = (-(q**-N), 1)
        taup = (pp * q + q**-N - 1, -pp * q)
    elif fid == "SW":
        sig = (0, 1)
        taup = (-1, q)
    elif fid == "qL":
        al = p["alpha"]
        sig = (0, 1)
        taup = (q ** (al + 1) - 1, q ** (al + 1))
    elif fid == "qC":
        a = p["a"]
        sig = (0, 1)
        taup = (-q / a - 1, q / a)
    elif fid == "ACII":
        a = p["a"]
        sig = (1,)
        taup = (-1 / a - 1, 1 / a)
    else:
        raise InapplicableIdentity(f"{fid} has no q-linear sigma/tau row")
    tau = tuple(complex(t) / (q - 1) for t in taup)
    return DiffEqData(sigma=tuple(complex(s) for s in sig), tau=tau)


# ---------------------------------------------------------------------------
# z-form difference equation for the four-parameter family


def _zform_A(a, b, c, d, q, z):
    den = (1 - z**2) * (1 - q * z**2)
    if den == 0:
        raise SamplePole("sample hit a pole of A(z)")
    return (1 - a * z) * (1 - b * z) * (1 - c * z) * (1 - d * z) / den


def zform_samples(count: int) -> np.ndarray:
    """Unit-circle samples with a deterministic offset avoiding z = +-1 and
    the +-q^(-1/2) pole pair."""
    theta = 2 * np.pi * (np.arange(count) + 0.37) / count
    return np.exp(1j * theta)


def aw_zform_apply(fam: FamilyInstance, p, count: int = 24):
    """Left side of the z-form difference equation at unit-circle samples.

    Returns (z samples, lhs values, p values at x(z))."""
    if fam.id != "AW":
        raise InapplicableIdentity("z-form is defined for the AW family")
    a, b, c, d = (v for _, v in fam.params)
    q = fam.q
    p = np.array(as_poly(p), dtype=complex)
    zs = zform_samples(count)
    lhs = np.empty(count, dtype=complex)
    pvals = np.empty(count, dtype=complex)

    def x_of(z):
        return (z + 1 / z) / 2

    for i, z in enumerate(zs):
        A_inv = _zform_A(a, b, c, d, q, 1 / z)
        A_dir = _zform_A(a, b, c, d, q, z)
        pv = poly_eval(p, x_of(z))
        lhs[i] = (
            A_inv * poly_eval(p, x_of(z / q))
            - (A_dir + A_inv) * pv
            + A_dir * poly_eval(p, x_of(q * z))
        )
        pvals[i] = pv
    return zs, lhs, pvals


def zform_lambda_printed(fam: FamilyInstance, n: int) -> complex:
    a, b, c, d = (v for _, v in fam.params)
    q = fam.q
    return -4 * q ** (-n + 1) * (1 - q**n) * (1 - a * b * c * d * q ** (n - 1))


def eigen_check(fam: FamilyInstance, n: int):
    """(lambda_fit, residual): least-squares eigenvalue of the family's
    natural second-order operator on p_n, residual relative to ||p_n||."""
    if n == 0:
        return 0.0 + 0.0j, 0.0
    if fam.id in EVAL_ONLY:
        p_n = hyper_coeffs(fam, n)
    else:
        p_n = generate_seq(recurrence(fam), n)[n]

    if fam.id == "AW":
        _, lhs, pv = aw_zform_apply(fam, p_n)
    else:
        data = table1_data(fam)
        out = hyper_operator_apply(data, fam.q, p_n)
        nodes = _sample_nodes(n + 2)
        lhs = np.array([poly_eval(out, x) for x in nodes])
        pv = np.array([poly_eval(p_n, x) for x in nodes])
    denom = np.vdot(pv, pv)
    lam = complex(np.vdot(pv, lhs) / denom)
    residual = float(np.linalg.norm(lhs - lam * pv) / np.sqrt(denom.real))
    return lam, residual
