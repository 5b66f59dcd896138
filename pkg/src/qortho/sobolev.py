"""Sobolev-type bilinear forms for recurrences with a vanishing gamma_N.

Once gamma_N = 0 the canonical functional annihilates p_N * anything, so it
stops determining the sequence past degree N.  Orthogonality is restored by

    <f, g> = L_0(f g) + sum_k L_k(T^(k) f . T^(k) g)

where T^(k) lowers degree by k and L_k is an orthogonality functional for
the image sequence (T^(k) p_{n+k})_n.  This module plans the level set
(which k appear and what runs at each), assembles the bilinear form,
and ships the verification tools: Gram checks, the Gram-Schmidt
characterization, factorization checks of p_{n+N} against p_N times the
associated sequence, and the two-sided regularized series factorization.

Level functionals come from the explicit weight displays where the family
has one (circle weight, Jackson integral, finite lattice masses); every
other family gets the generic construction: apply the operator chain to
p_{N+n}, normalize to monic, recover the image recurrence exactly from the
top two coefficients, and realize its functional as the quadrature rule on
the zeros of the top image polynomial.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import (
    AssumptionViolated,
    DegenerateWeight,
    GammaNotZero,
    NonConvergence,
    NonNormal,
    ParamsOutsideDisk,
    SingularMinor,
)
from .families import (
    FamilyInstance,
    VANISH_TOL,
    lambda_set,
    make_family,
    omega_index,
    recurrence,
    reduce_to_base,
)
from .functionals import (
    MomentFunctional,
    aw_circle_functional,
    aw_degenerate_functional,
    aw_rootofunity_functional,
    aw_rootofunity_reflected,
    bqj_blimit_functional,
    bqj_functional,
    bqj_rootofunity_functional,
    christoffel_functional,
    functional_pair,
    gram_matrix,
    qhahn_functional,
    qracah_functional,
    self_normalized,
    solve_root_of_unity_r,
)
from .polyengine import (
    PolySeq,
    RecurrenceCoeffs,
    as_poly,
    associated_seq,
    generate_seq,
    monic,
    poly_degree,
    poly_mul,
    poly_sub,
)
from .qdiff import LatticeSpec, OperatorSpec, operator_power
from .qnum import phi, qpochhammer


# ---------------------------------------------------------------------------
# small polynomial helpers


def _poly_affine(c, u: complex, v: complex = 0.0) -> np.ndarray:
    """Coefficients of p(u*x + v) given the coefficients of p."""
    c = as_poly(c)
    out = np.array([c[-1]], dtype=complex)
    lin = np.array([v, u], dtype=complex)
    for k in range(len(c) - 2, -1, -1):
        out = poly_mul(out, lin)
        out[0] += c[k]
    return out


def _poly_reflect(c) -> np.ndarray:
    """Coefficients of p(-x)."""
    c = np.array(as_poly(c), dtype=complex)
    c[1::2] *= -1
    return c


def seq_recurrence(polys) -> tuple:
    """Recover (beta_n), (gamma_n) from a monic sequence, plus a residual.

    x p_n - p_{n+1} = beta_n p_n + gamma_n p_{n-1} holds exactly when the
    sequence satisfies a three-term recurrence; beta_n and gamma_n are read
    off the top two coefficients and the residual is the largest leftover
    coefficient (relative), a direct measure of how far the sequence is
    from any recurrence at all.  gammas[0] is a placeholder zero.
    """
    betas: list = []
    gammas: list = [0.0 + 0.0j]
    resid = 0.0
    for n in range(len(polys) - 1):
        r = poly_sub(poly_mul(np.array([0.0, 1.0]), polys[n]), polys[n + 1])
        r = np.concatenate([r, np.zeros(max(0, n + 1 - len(r)), dtype=complex)])
        beta = r[n]
        rem = poly_sub(r, beta * as_poly(polys[n]))
        if n >= 1:
            rem = np.concatenate([rem, np.zeros(max(0, n - len(rem)), dtype=complex)])
            gam = rem[n - 1]
            rem = poly_sub(rem, gam * as_poly(polys[n - 1]))
            gammas.append(gam)
        scale = max(1.0, float(np.max(np.abs(as_poly(polys[n + 1])))))
        if len(rem):
            resid = max(resid, float(np.max(np.abs(rem))) / scale)
        betas.append(beta)
    return betas, gammas, resid


def _list_coeffs(betas, gammas) -> RecurrenceCoeffs:
    return RecurrenceCoeffs(
        beta_fn=lambda n: betas[n],
        gamma_fn=lambda n: gammas[n],
        provenance="image-derived",
    )


# ---------------------------------------------------------------------------
# level plans


@dataclass(frozen=True)
class LevelTerm:
    """Descriptor of one level: operator chain, shift rule, functional id."""

    level: int
    op_kind: str  # "HahnDqInv" | "AWDividedDiff" | "LatticeForward" | "QuotientReflect"
    steps: int
    shift_rule: str
    functional_id: str


@dataclass(frozen=True)
class LevelPlan:
    family: FamilyInstance
    scenario: str
    levels: tuple
    terms: tuple
    base_id: str
    n_max: int
    notes: str = ""


@dataclass(frozen=True)
class SobolevTerm:
    """One assembled level: `functional` applied to transformed factors.

    `scale` records the scalar folded into the functional's weights when the
    level block was balanced against the base block (the theorem leaves each
    level's normalization free); divide it back out to recover the
    unit-normalized level functional.
    """

    level: int
    spec: LevelTerm
    functional: MomentFunctional
    transform: Callable
    scale: complex = 1.0 + 0.0j


@dataclass(frozen=True)
class SobolevForm:
    """<f,g> = base(fg) + sum over terms of L_k(T^(k) f . T^(k) g)."""

    base: MomentFunctional
    terms: tuple
    plan: LevelPlan | None = None

    def bilinear(self, f, g) -> complex:
        total = functional_pair(self.base, f, g)
        for term in self.terms:
            total += functional_pair(
                term.functional, term.transform(f), term.transform(g)
            )
        return complex(total)


def _family_op(fam: FamilyInstance) -> OperatorSpec:
    """The family's natural degree-lowering operator on its own variable."""
    q = fam.q
    p = fam.params_dict
    if fam.id in ("AW", "cdqH"):
        return OperatorSpec("AWDividedDiff", q)
    if fam.id == "qR":
        return OperatorSpec(
            "LatticeForward", q, LatticeSpec("qQuadratic", p["gamma"] * p["delta"])
        )
    if fam.id == "dqH":
        return OperatorSpec(
            "LatticeForward", q, LatticeSpec("qQuadratic", p["gamma"] * p["delta"])
        )
    if fam.id == "dqK":
        return OperatorSpec(
            "LatticeForward",
            q,
            LatticeSpec("qQuadratic", p["c"] * q ** (-p["N"] - 1)),
        )
    if fam.id in ("QqK", "qM"):
        # these two are built through the inverted base, so the lowering
        # operator on their own variable is the forward Hahn difference
        return OperatorSpec("HahnDq", q)
    # remaining recurrence families live on a q-linear lattice
    return OperatorSpec("HahnDqInv", q)


_BQJ_SUBCASES = (
    ("c", "bqj-c"),
    ("a", "bqj-a"),
    ("b", "bqj-b"),
    ("ab/c", "bqj-abc"),
)


def build_level_plan(fam: FamilyInstance, n_max: int) -> LevelPlan:
    """Level set per the degenerate-Favard recursion, truncated at n_max."""
    if fam.q_mode is not None:
        if fam.id not in ("AW", "bqJ"):
            raise AssumptionViolated(
                "root-of-unity level plans are configured for AW and bqJ only"
            )
        N = fam.q_mode.N
        M = fam.q_mode.M
        levels = tuple(j * N for j in range(1, n_max // N + 1))
        terms = []
        for j, level in enumerate(levels, start=1):
            if fam.id == "AW":
                fid = "unity-ladder" if (j * M) % 2 == 0 else "unity-ladder-reflected"
                rule = f"divide by p_{N}^{j}, then x -> (-1)^({j}*{M}) x"
            else:
                fid = "unity-ladder"
                rule = f"divide by p_{N}^{j}"
            terms.append(LevelTerm(level, "QuotientReflect", j, rule, fid))
        return LevelPlan(
            family=fam,
            scenario="unity-aw" if fam.id == "AW" else "unity-bqj",
            levels=levels,
            terms=tuple(terms),
            base_id="unity-ladder",
            n_max=n_max,
            notes=f"arithmetic level chain {N}, 2*{N}, ...; levels above {n_max} dropped",
        )

    profile = lambda_set(fam, n_max)
    if not profile.lambda_set:
        return LevelPlan(fam, "empty", (), (), "canonical", n_max, "no vanishing gamma")
    if len(profile.lambda_set) > 1:
        raise AssumptionViolated(
            f"multiple vanishing gammas {profile.lambda_set}; chained plans "
            "are only configured at roots of unity"
        )
    N = profile.lambda_set[0]
    q = fam.q
    p = fam.params_dict

    if fam.id == "AW":
        kab = omega_index(p["a"] * p["b"], q)
        if kab == N - 1:
            ka2 = omega_index(p["a"] * p["a"], q)
            kb2 = omega_index(p["b"] * p["b"], q)
            doubly = (ka2 is not None and ka2 <= N - 2) or (
                kb2 is not None and kb2 <= N - 2
            )
            scenario = "aw-derivative" if doubly else "aw-truncated"
            term = LevelTerm(
                N,
                "AWDividedDiff",
                N,
                "params -> params * q^(1/2) per application",
                f"aw-circle(params*q^({N}/2))",
            )
            base_id = "aw-derivative-masses" if doubly else "aw-finite-masses"
            return LevelPlan(fam, scenario, (N,), (term,), base_id, n_max)
        return _generic_plan(fam, N, n_max)

    if fam.id == "bqJ":
        hits = dict((name, k) for name, k in profile.omega_hits)
        for name, scenario in _BQJ_SUBCASES:
            if hits.get(name) == N:
                term = LevelTerm(
                    N,
                    "HahnDqInv",
                    N,
                    "(a, b, c) -> (aq, bq, cq) per application",
                    f"jackson(params*q^{N})",
                )
                return LevelPlan(
                    fam, scenario, (N,), (term,), f"finite-masses[{name}]", n_max
                )
        return _generic_plan(fam, N, n_max)

    if fam.id == "qH":
        term = LevelTerm(
            N,
            "HahnDqInv",
            N,
            "(alpha, beta, N) -> (alpha q, beta q, N-1) per application",
            f"jackson(alpha*q^{N}, beta*q^{N}, 1)",
        )
        return LevelPlan(fam, "qhahn", (N,), (term,), "finite-masses", n_max)

    return _generic_plan(fam, N, n_max)


def _generic_plan(fam: FamilyInstance, N: int, n_max: int) -> LevelPlan:
    op = _family_op(fam)
    rule = (
        "lattice product gd -> gd*q per application"
        if op.kind == "LatticeForward"
        else "same operator each application"
    )
    term = LevelTerm(N, op.kind, N, rule, "zero-ladder(image)")
    return LevelPlan(fam, "generic", (N,), (term,), "zero-ladder", n_max)


# ---------------------------------------------------------------------------
# form assembly


def _operator_transform(op: OperatorSpec, steps: int) -> Callable:
    def transform(poly):
        return operator_power(op, steps, poly)

    return transform


def _quotient_transform(divisor: np.ndarray, reflect: bool) -> Callable:
    div = np.array(as_poly(divisor), dtype=complex)

    def transform(poly):
        p = as_poly(poly)
        if poly_degree(p) < poly_degree(div):
            return np.zeros(1, dtype=complex)
        quo, _ = npoly.polydiv(p, div)
        quo = np.atleast_1d(np.asarray(quo, dtype=complex))
        return _poly_reflect(quo) if reflect else quo

    return transform


def _pullback_masses(F: MomentFunctional, u: complex) -> MomentFunctional:
    """Rescale a functional's abscissas by u (pullback through x -> x/u)."""
    if u == 1.0:
        return F
    if F.kind == "MassList":
        masses = tuple(replace(m, location=m.location * u) for m in F.masses)
        return replace(F, masses=masses)
    pts = tuple(x * u for x in F.node_points)
    return replace(F, node_points=pts)


def _level_functional(fam: FamilyInstance, op: OperatorSpec, N: int, count: int):
    """Orthogonality functional of the image sequence T^N p_{N+n}.

    Preferred realization: identify the image family explicitly — reduce to
    the three- or four-parameter base (a pure variable scaling for every
    registered family), shift the base parameters by the operator's rule,
    and take that family's own weight display, with the abscissas scaled
    back into the image variable.  This inherits the chain/quadrature
    conditioning of the display, which stays benign even when the image
    zeros cluster geometrically.  Families built through the inverted base,
    or whose shifted display fails its own guards, use the quadrature on
    the derived image recurrence instead.
    """
    q = fam.q
    base, amap = reduce_to_base(fam)
    if base.q == q and amap.v == 0:
        bp = base.params_dict
        if base.id == "bqJ" and op.kind == "HahnDqInv":
            try:
                shifted = make_family(
                    "bqJ", {k: _snap_unit(v * q**N) for k, v in bp.items()}, q
                )
                lv = self_normalized(bqj_functional(shifted))
            except (DegenerateWeight, NonConvergence, NonNormal):
                lv = None
            if lv is not None:
                # transform output stays in the family variable x = y/u
                return _pullback_masses(lv, 1.0 / amap.u)
        if base.id == "AW" and op.kind in ("AWDividedDiff", "LatticeForward"):
            shift = q ** (N / 2.0)
            try:
                shifted = make_family(
                    "AW", {k: v * shift for k, v in bp.items()}, q
                )
                lv = self_normalized(aw_circle_functional(shifted))
            except (ParamsOutsideDisk, NonNormal):
                lv = None
            if lv is not None:
                if op.kind == "AWDividedDiff":
                    return _pullback_masses(lv, 1.0 / amap.u)
                # the N-fold forward difference lands on the lattice with
                # gd q^N, whose variable is 2 sqrt(gd q^N) sqrt(q) x
                gd = op.lattice.gd
                s2 = cmath.sqrt(gd * q**N) * cmath.sqrt(q)
                return _pullback_masses(lv, 2.0 * s2)
    return _image_level_functional(fam, op, N, count)


def _snap_unit(v: complex) -> complex:
    """Round a shifted parameter to exactly 1 when the product q^-k * q^k
    picked up floating-point dust; the weight displays branch on the exact
    value."""
    if v != 0 and abs(v - 1.0) < 1e-8:
        return 1.0 + 0.0j
    return v


def _image_level_functional(
    fam: FamilyInstance, op: OperatorSpec, N: int, count: int
):
    """Quadrature realization from the derived image recurrence.

    The images are normalized to monic, their recurrence is recovered
    exactly from the top coefficients, and the functional is realized as
    the quadrature rule on the zeros of the top image polynomial (valid
    through every product degree the level term can produce).

    The operator chains map coefficients degree by degree, so the image of
    a degree n+N polynomial has exactly n+1 coefficients and its lead is a
    clean product of per-step constants; the lead must never be trimmed
    against the larger low-order coefficients, however wide the spread.
    """
    coeffs = recurrence(fam)
    seq = generate_seq(coeffs, N + count)
    images = []
    for n in range(count + 1):
        raw = as_poly(operator_power(op, N, seq[N + n]))
        if len(raw) != n + 1 or raw[-1] == 0:
            raise AssumptionViolated(
                f"operator chain does not lower degree by {N} at n = {n}"
            )
        images.append(monic(raw))
    betas, gammas, resid = seq_recurrence(images)
    if resid > 1e-8:
        raise AssumptionViolated(
            f"image sequence fails a three-term recurrence (residual {resid:.2e})"
        )
    gscale = max(1.0, max(abs(g) for g in gammas[1:]) if len(gammas) > 1 else 1.0)
    for k, g in enumerate(gammas[1:], start=1):
        if abs(g) <= VANISH_TOL * gscale:
            raise AssumptionViolated(
                f"image recurrence degenerates again at index {k}; chained "
                "plans are only configured at roots of unity"
            )
    return christoffel_functional(_list_coeffs(betas, gammas), count)


def build_sobolev_form(fam: FamilyInstance, plan: LevelPlan) -> SobolevForm:
    """Assemble base and level functionals with their operator transforms."""
    q = fam.q
    p = fam.params_dict
    scenario = plan.scenario

    if scenario == "empty":
        if fam.id == "AW":
            base = self_normalized(aw_circle_functional(fam))
        elif fam.id == "bqJ":
            base = self_normalized(bqj_functional(fam))
        else:
            base = christoffel_functional(recurrence(fam), plan.n_max + 1)
        return SobolevForm(base=base, terms=(), plan=plan)

    if scenario in ("unity-aw", "unity-bqj"):
        N = fam.q_mode.N
        M = fam.q_mode.M
        rd = solve_root_of_unity_r(fam, N)
        pN = generate_seq(recurrence(fam), N)[N]
        if scenario == "unity-aw":
            base = self_normalized(aw_rootofunity_functional(fam, rd))
            reflected = self_normalized(aw_rootofunity_reflected(fam, rd))
        else:
            base = bqj_rootofunity_functional(fam, rd)
            reflected = base
        terms = []
        for spec in plan.terms:
            j = spec.steps
            odd = scenario == "unity-aw" and (j * M) % 2 == 1
            divisor = pN
            for _ in range(j - 1):
                divisor = poly_mul(divisor, pN)
            terms.append(
                SobolevTerm(
                    level=spec.level,
                    spec=spec,
                    functional=reflected if odd else base,
                    transform=_quotient_transform(divisor, odd),
                )
            )
        return SobolevForm(base=base, terms=tuple(terms), plan=plan)

    N = plan.levels[0]

    if scenario in ("aw-truncated", "aw-derivative"):
        if scenario == "aw-truncated":
            base = self_normalized(qracah_functional(fam))
        else:
            base = self_normalized(aw_degenerate_functional(fam))
        op = OperatorSpec("AWDividedDiff", q)
        level = _level_functional(fam, op, N, max(plan.n_max - N + 1, 1))
    elif scenario in ("bqj-c", "bqj-a", "bqj-b", "bqj-abc", "qhahn"):
        if scenario == "qhahn":
            a, b = p["alpha"], p["beta"]
            base = self_normalized(qhahn_functional(a, b, N, q))
            shifted = make_family(
                "bqJ", {"a": a * q**N, "b": b * q**N, "c": 1.0 + 0.0j}, q
            )
        else:
            a, b, c = p["a"], p["b"], p["c"]
            if scenario == "bqj-c":
                base = self_normalized(qhahn_functional(a, b, N, q))
            elif scenario == "bqj-a":
                base = self_normalized(qhahn_functional(c, a * b / c, N, q))
            elif scenario == "bqj-b":
                base = self_normalized(bqj_blimit_functional(a, c, N, q))
            else:
                base = self_normalized(bqj_blimit_functional(c, a, N, q))
            shifted = make_family(
                "bqJ", {"a": a * q**N, "b": b * q**N, "c": c * q**N}, q
            )
        level = self_normalized(bqj_functional(shifted))
        op = OperatorSpec("HahnDqInv", q)
    elif scenario == "generic":
        base = christoffel_functional(recurrence(fam), N)
        op = _family_op(fam)
        level = _level_functional(fam, op, N, max(plan.n_max - N + 1, 1))
    else:
        raise AssumptionViolated(f"unknown scenario {scenario!r}")

    transform = _operator_transform(op, N)
    level, s = _centered_level(fam, base, level, transform, N, plan.n_max)
    spec = plan.terms[0]
    term = SobolevTerm(
        level=N,
        spec=spec,
        functional=level,
        transform=transform,
        scale=s,
    )
    return SobolevForm(base=base, terms=(term,), plan=plan)


def _scaled_functional(F: MomentFunctional, s: complex) -> MomentFunctional:
    if s == 1.0:
        return F
    if F.kind == "MassList":
        masses = tuple(
            replace(m, weight=m.weight * s) for m in F.masses
        )
        return replace(F, masses=masses, normalization=F.normalization / s)
    wts = tuple(w * s for w in F.node_weights)
    return replace(F, node_weights=wts, normalization=F.normalization / s)


def _centered_level(fam, base, level, transform, N: int, n_max: int):
    """Balance the level's diagonal block against the base's.

    The norms contributed by the level carry the squared leads of the
    operator images, which grow without bound in the degree; the theorem
    leaves the level functional's normalization free, so pick the scalar
    that matches the two blocks' geometric centers.  Returns the scaled
    functional and the scalar applied.
    """
    seq = generate_seq(recurrence(fam), n_max)
    base_block = [
        abs(functional_pair(base, seq[n], seq[n])) for n in range(N)
    ]
    lvl_block = []
    for n in range(N, n_max + 1):
        w = transform(seq[n])
        lvl_block.append(abs(functional_pair(level, w, w)))
    base_block = [v for v in base_block if v > 0.0]
    lvl_block = [v for v in lvl_block if v > 0.0]
    if not base_block or not lvl_block:
        return level, 1.0 + 0.0j
    s = np.sqrt(
        (min(base_block) * max(base_block)) / (min(lvl_block) * max(lvl_block))
    )
    s = complex(s)
    return _scaled_functional(level, s), s


def sobolev_apply(form: SobolevForm, f, g) -> complex:
    """<f, g> under the assembled form."""
    return form.bilinear(f, g)


def plan_summary(plan: LevelPlan) -> dict:
    return {
        "scenario": plan.scenario,
        "base": plan.base_id,
        "levels": list(plan.levels),
        "terms": [
            {
                "level": t.level,
                "op_kind": t.op_kind,
                "steps": t.steps,
                "shift_rule": t.shift_rule,
                "functional_id": t.functional_id,
            }
            for t in plan.terms
        ],
        "notes": plan.notes,
    }


# ---------------------------------------------------------------------------
# verification tools


def gram_check(form, seq, n_max: int, tol: float = 1e-7) -> dict:
    """Gram matrix health report.

    Off-diagonal entries are measured relative to the largest diagonal
    entry.  A vanishing diagonal — the hallmark of a missing level — is
    detected as a collapse without recovery: the entry drops past 1e-10 of
    its predecessor AND everything from there on stays below 1e-10 of
    everything before.  Consecutive norm ratios behave like recurrence
    coefficients and stay many orders of magnitude above roundoff, so a
    genuine annihilation at degree N wipes out the whole tail, while a
    benign dip (two level blocks of very different magnitude meeting at a
    seam) recovers immediately.  (An absolute floor on the whole diagonal
    would misfire both ways: healthy norms decay geometrically below any
    fixed fraction of the largest entry, while a zero hiding below a huge
    entry would pass.)
    """
    G = gram_matrix(form, seq, n_max)
    diag = np.abs(np.diag(G))
    scale = float(np.max(diag))
    if scale == 0.0:
        return {
            "max_offdiag_rel": float("inf"),
            "min_diag_abs": 0.0,
            "diag_scale": 0.0,
            "vanishing_diag_indices": tuple(range(n_max + 1)),
            "pass": False,
        }
    off = G - np.diag(np.diag(G))
    max_off = float(np.max(np.abs(off))) / scale
    vanishing = []
    for n in range(n_max + 1):
        if n == 0:
            collapsed = n_max >= 1 and diag[0] <= 1e-10 * diag[1]
        else:
            collapsed = diag[n] <= 1e-10 * diag[n - 1] and float(
                np.max(diag[n:])
            ) <= 1e-10 * float(np.max(diag[:n]))
        if collapsed:
            vanishing.append(n)
    vanishing = tuple(vanishing)
    return {
        "max_offdiag_rel": max_off,
        "min_diag_abs": float(np.min(diag)),
        "diag_scale": scale,
        "vanishing_diag_indices": vanishing,
        "pass": bool(max_off <= tol and not vanishing),
    }


def _pair(form, f, g) -> complex:
    if hasattr(form, "bilinear"):
        return form.bilinear(f, g)
    return functional_pair(form, f, g)


def gram_schmidt_monic(form, n_max: int) -> PolySeq:
    """Monic orthogonal sequence of the form, from the monomial Gram matrix.

    Classical Gram-Schmidt with one reorthogonalization pass; raises
    SingularMinor when a norm that must be divided by has collapsed
    (relative to the largest norm seen), reporting the offending degree.
    """
    dim = n_max + 1
    S = np.zeros((dim, dim), dtype=complex)
    for i in range(dim):
        ei = np.zeros(i + 1, dtype=complex)
        ei[i] = 1.0
        for j in range(i, dim):
            ej = np.zeros(j + 1, dtype=complex)
            ej[j] = 1.0
            S[i, j] = S[j, i] = _pair(form, ei, ej)

    def inner(u, v) -> complex:
        return complex(u @ S[: len(u), : len(v)] @ v)

    polys = [np.array([1.0 + 0.0j])]
    norms = [inner(polys[0], polys[0])]
    scale = abs(norms[0])
    for n in range(1, dim):
        v = np.zeros(n + 1, dtype=complex)
        v[n] = 1.0
        for _ in range(2):
            for k in range(n):
                if abs(norms[k]) <= 1e-13 * max(scale, 1e-300):
                    raise SingularMinor(f"Gram minor is singular at degree {k}")
                coef = inner(v, polys[k]) / norms[k]
                v = poly_sub(v, coef * np.concatenate(
                    [polys[k], np.zeros(n + 1 - len(polys[k]), dtype=complex)]
                ))
        polys.append(v)
        norms.append(inner(v, v))
        scale = max(scale, abs(norms[-1]))
    return PolySeq(polys, None)


# ---------------------------------------------------------------------------
# factorization of p_{n+N} through the associated sequence


def _associated_target(fam: FamilyInstance, N: int):
    """(target instance, argument scale u) for the tabulated associated
    family, or None when the family is not tabulated at this order."""
    q = fam.q
    p = fam.params_dict
    qn = q**N

    if fam.id == "qH" and round(p["N"].real) == N - 1:
        tgt = make_family(
            "bqJ", {"a": p["alpha"] * qn, "b": p["beta"] * qn, "c": qn}, q
        )
        return tgt, qn
    if fam.id == "dqH" and round(p["N"].real) == N - 1:
        ga, de = p["gamma"], p["delta"]
        s1 = cmath.sqrt(ga * de * q)
        tgt = make_family(
            "cdqH",
            {"a": qn * s1, "b": cmath.sqrt(q / (ga * de)), "c": cmath.sqrt(ga * q / de)},
            q,
        )
        return tgt, 1.0 / (2.0 * s1)
    if fam.id == "qK" and round(p["N"].real) == N - 1:
        tgt = make_family("bqJ", {"a": qn, "b": -p["p"] * q ** (N - 1), "c": 0.0}, q)
        return tgt, qn
    if fam.id == "QqK" and round(p["N"].real) == N - 1:
        tgt = make_family("qM", {"b": qn, "c": -(q**-N) / p["p"]}, q)
        return tgt, qn
    if fam.id == "AqK" and round(p["N"].real) == N - 1:
        tgt = make_family("bqL", {"a": p["p"] * qn, "b": qn}, q)
        return tgt, qn
    if fam.id == "dqK" and round(p["N"].real) == N - 1:
        c = p["c"]
        tgt = make_family(
            "cdqH",
            {"a": cmath.sqrt(c * q ** (N + 1)), "b": cmath.sqrt(q ** (N + 1) / c), "c": 0.0},
            q,
        )
        return tgt, 1.0 / (2.0 * cmath.sqrt(c * q ** (1 - N)))
    if fam.id == "qR" and omega_index(p["alpha"], q) == N:
        ga, de = p["gamma"], p["delta"]
        s1 = cmath.sqrt(ga * de * q)
        tgt = make_family(
            "AW",
            {
                "a": qn * s1,
                "b": cmath.sqrt(q / (ga * de)),
                "c": p["beta"] * cmath.sqrt(de * q / ga),
                "d": cmath.sqrt(ga * q / de),
            },
            q,
        )
        return tgt, 1.0 / (2.0 * s1)
    return None


def factorization_check(fam: FamilyInstance, N: int, n_max: int) -> dict:
    """Residual of p_{n+N} - p_N * p_n^(N) for n <= n_max - N, plus the
    tabulated associated-family identification when one is registered."""
    coeffs = recurrence(fam)
    gN = coeffs.gamma(N)
    bN = coeffs.beta(N)
    if abs(gN) > VANISH_TOL * max(1.0, abs(bN) ** 2):
        raise GammaNotZero(f"gamma_{N} = {gN}; factorization needs a vanishing entry")
    seq = generate_seq(coeffs, n_max)
    count = n_max - N
    assoc = associated_seq(coeffs, N, max(count, 1))
    pN = seq[N]
    resid = 0.0
    for n in range(count + 1):
        lhs = seq[N + n]
        rhs = poly_mul(pN, assoc[n]) if n else pN
        err = float(np.max(np.abs(poly_sub(lhs, rhs))))
        resid = max(resid, err / float(np.max(np.abs(lhs))))

    report = {
        "residual": resid,
        "associated_family_match": None,
        "associated_residual": None,
    }
    target = _associated_target(fam, N)
    if target is not None and count >= 1:
        tgt, u = target
        tseq = generate_seq(recurrence(tgt), count)
        aresid = 0.0
        for n in range(1, count + 1):
            cand = monic(_poly_affine(tseq[n], u))
            err = float(np.max(np.abs(poly_sub(cand, assoc[n]))))
            aresid = max(aresid, err / float(np.max(np.abs(as_poly(assoc[n])))))
        report["associated_residual"] = aresid
        report["associated_family_match"] = bool(aresid <= 1e-8)
    return report


# ---------------------------------------------------------------------------
# regularized series factorization (two-sided)


def regularized_phi_factorization(
    num_params, den_params, q: complex, n: int, N: int, z: complex
) -> tuple:
    """Both sides of the terminating-series factorization, independently.

    Left: the degree-(n+N) series with the vanishing lower parameter q^{1-N}
    folded in termwise — the fold turns the offending Pochhammer into the
    factor (q^{1-N+k}; q)_{n+N-k}, which kills every term below k = N.
    Right: the stated prefactor times the folded degree-N series times the
    plain series at parameters shifted by q^N.  Requires one more numerator
    parameter than denominator parameter (a balanced series).
    """
    a = [complex(v) for v in num_params]
    b = [complex(v) for v in den_params]
    if len(a) != len(b) + 1:
        raise ValueError("factorization needs len(num) == len(den) + 1")
    q = complex(q)
    z = complex(z)

    def folded_term(head: complex, k: int, tail_len: int) -> complex:
        t = qpochhammer(head, q, k) * qpochhammer(q ** (1 - N + k), q, tail_len)
        for av in a:
            t *= qpochhammer(av, q, k)
        for bv in b:
            t /= qpochhammer(bv, q, k)
        return t / qpochhammer(q, q, k) * z**k

    lhs = sum(folded_term(q ** (-n - N), k, n + N - k) for k in range(n + N + 1))

    phi1 = sum(folded_term(q ** (-N), k, N - k) for k in range(N + 1))
    qn = q**N
    phi2 = phi(
        [av * qn for av in a],
        [q ** (N + 1), *[bv * qn for bv in b]],
        q,
        z,
        n,
    )
    rhs = q ** (-n * N) * qpochhammer(q ** (N + 1), q, n) * phi1 * phi2
    return complex(lhs), complex(rhs)
