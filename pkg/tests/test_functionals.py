"""Tests for the concrete moment functionals.

Each functional is checked two ways: against frozen closed-form values
(unit masses, norm formulas) and against the recurrence-derived canonical
moments, which serve as the independent oracle for every realization.
"""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qortho.errors import (
    AssumptionViolated,
    BaseOutOfDisk,
    DegenerateWeight,
    DenominatorVanishes,
    MultipleZero,
    NonNormal,
    ParamsOutsideDisk,
)
from qortho.families import RootOfUnity, make_family, recurrence
from qortho.functionals import (
    MassPoint,
    MomentFunctional,
    aw_circle_functional,
    aw_degenerate_functional,
    aw_norm_squared,
    aw_rootofunity_functional,
    aw_rootofunity_reflected,
    bqj_blimit_functional,
    bqj_c1_ladder_weights,
    bqj_functional,
    bqj_rootofunity_functional,
    christoffel_functional,
    functional_apply,
    functional_moments,
    functional_pair,
    gram_matrix,
    jackson_qintegral,
    mass_weight,
    masslist_json,
    qhahn_functional,
    qracah_functional,
    rho_recursion_report,
    self_normalized,
    solve_root_of_unity_r,
)
from qortho.polyengine import canonical_moments, generate_seq, poly_eval, roots

AW_MAIN = dict(a=0.3, b=-0.2, c=0.4, d=0.25)
Q_MAIN = 0.55


def moment_gap(F, coeffs, k_max):
    mv = canonical_moments(coeffs, k_max)
    mom = functional_moments(self_normalized(F), k_max)
    return max(
        abs(mom[k] - mv.mu[k]) / max(1.0, abs(mv.mu[k])) for k in range(k_max + 1)
    )


def offdiag_rel(G):
    n = G.shape[0]
    scale = max(abs(G[k, k]) for k in range(n))
    return max(abs(G[i, j]) for i in range(n) for j in range(n) if i != j) / scale


# ---------------------------------------------------------------------------
# application primitives


def test_order_one_mass_differentiates():
    F = MomentFunctional(
        label="t", kind="MassList", masses=(MassPoint(2.0, 1, 1.0),)
    )
    assert functional_apply(F, [0.0, 0.0, 1.0]) == pytest.approx(4.0)


def test_mass_list_application_is_linear():
    F = MomentFunctional(
        label="t",
        kind="MassList",
        masses=(MassPoint(0.3, 0, 1.5), MassPoint(-1.2, 1, 0.25)),
    )
    p = [1.0, -2.0, 0.5]
    r = [0.0, 3.0, 0.0, 1.0]
    lhs = functional_apply(F, [a + 2 * b for a, b in zip(p + [0.0], r)])
    rhs = functional_apply(F, p) + 2 * functional_apply(F, r)
    assert abs(lhs - rhs) < 1e-14


def test_self_normalized_rejects_null_total():
    F = MomentFunctional(
        label="t",
        kind="MassList",
        masses=(MassPoint(1.0, 0, 1.0), MassPoint(2.0, 0, -1.0)),
    )
    with pytest.raises(DegenerateWeight):
        self_normalized(F)


def test_masslist_json_roundtrip_fields():
    F = MomentFunctional(
        label="t", kind="MassList", masses=(MassPoint(1 + 2j, 1, 3 - 4j),)
    )
    (row,) = masslist_json(F)
    assert row == {"x_re": 1.0, "x_im": 2.0, "order": 1, "w_re": 3.0, "w_im": -4.0}


# ---------------------------------------------------------------------------
# circle quadrature


@pytest.fixture(scope="module")
def circle_setup():
    fam = make_family("AW", AW_MAIN, Q_MAIN)
    return fam, recurrence(fam), aw_circle_functional(fam, 4096)


def test_circle_value_on_constant_matches_closed_form(circle_setup):
    fam, _, F = circle_setup
    d0 = aw_norm_squared(fam, 0)
    assert abs(functional_apply(F, [1.0]) - d0) / abs(d0) < 1e-8


def test_circle_gram_diagonal_matches_norm_formula(circle_setup):
    fam, coeffs, F = circle_setup
    seq = generate_seq(coeffs, 9)
    G = gram_matrix(F, seq, 8)
    for n in range(9):
        dn = aw_norm_squared(fam, n)
        assert abs(G[n, n] - dn) / abs(dn) < 1e-8
    assert offdiag_rel(G) < 1e-8


def test_circle_gram_diag_ratio_reproduces_recurrence(circle_setup):
    fam, coeffs, F = circle_setup
    seq = generate_seq(coeffs, 9)
    G = gram_matrix(F, seq, 8)
    for n in range(1, 9):
        g = coeffs.gamma(n)
        assert abs(G[n, n] / G[n - 1, n - 1] - g) / abs(g) < 1e-8


def test_circle_node_doubling_is_converged(circle_setup):
    fam, coeffs, F = circle_setup
    F2 = aw_circle_functional(fam, 8192)
    seq = generate_seq(coeffs, 7)
    G1 = gram_matrix(F, seq, 6)
    G2 = gram_matrix(F2, seq, 6)
    assert np.max(np.abs(G1 - G2)) < 1e-10


def test_norm_ratio_equals_gamma():
    fam = make_family("AW", AW_MAIN, Q_MAIN)
    coeffs = recurrence(fam)
    for n in range(1, 11):
        g = coeffs.gamma(n)
        ratio = aw_norm_squared(fam, n) / aw_norm_squared(fam, n - 1)
        assert abs(g - ratio) / abs(g) < 1e-9


def test_circle_rejects_parameters_on_or_outside_circle():
    fam = make_family("AW", dict(a=1.2, b=0.2, c=0.1, d=0.05), 0.5)
    with pytest.raises(ParamsOutsideDisk):
        aw_circle_functional(fam)


def test_circle_rejects_base_outside_disk():
    fam = make_family("AW", dict(a=0.3, b=0.2, c=0.1, d=0.05), 1.5)
    with pytest.raises(BaseOutOfDisk):
        aw_circle_functional(fam)


def test_circle_requires_power_of_two_nodes():
    fam = make_family("AW", AW_MAIN, Q_MAIN)
    with pytest.raises(ValueError):
        aw_circle_functional(fam, 1000)


# ---------------------------------------------------------------------------
# truncated lattice functional (first degeneracy)


@pytest.fixture(scope="module")
def truncated_setup():
    q = 0.5
    fam = make_family("AW", dict(a=3.0, b=q**-4 / 3.0, c=0.35, d=0.15), q)
    return fam, recurrence(fam)


def test_truncated_family_flags_vanishing_gamma(truncated_setup):
    _, coeffs = truncated_setup
    assert abs(coeffs.gamma(5)) < 1e-14
    assert all(abs(coeffs.gamma(k)) > 1e-10 for k in range(1, 5))


def test_lattice_functional_unit_first_weight(truncated_setup):
    fam, _ = truncated_setup
    F = qracah_functional(fam)
    assert F.masses[0].weight == pytest.approx(1.0)
    assert len(F.masses) == 5
    assert F.valid_degree == 8


def test_lattice_gram_orthogonal_with_live_diagonal(truncated_setup):
    fam, coeffs = truncated_setup
    F = qracah_functional(fam)
    seq = generate_seq(coeffs, 6)
    G = gram_matrix(F, seq, 5)
    for n in range(5):
        assert abs(G[n, n]) > 1e-10
    assert abs(G[5, 5]) < 1e-8 * max(abs(G[n, n]) for n in range(5))
    assert offdiag_rel(G[:5, :5]) < 1e-10
# the degree-5 self-pairing vanishes: the masses sit on the zeros of that
# polynomial, which is why the level construction is needed at all


def test_lattice_functional_matches_canonical_moments(truncated_setup):
    fam, coeffs = truncated_setup
    F = qracah_functional(fam)
    assert moment_gap(F, coeffs, 8) < 1e-8


def test_lattice_functional_requires_truncation():
    fam = make_family("AW", AW_MAIN, Q_MAIN)
    with pytest.raises(AssumptionViolated):
        qracah_functional(fam)


def test_lattice_functional_rejects_paired_square():
    q = 0.5
    fam = make_family("AW", dict(a=2.0, b=q**-4 / 2.0, c=0.35, d=0.15), q)
    with pytest.raises(AssumptionViolated):
        qracah_functional(fam)  # a^2 = q^-2 needs the derivative-mass form


# ---------------------------------------------------------------------------
# derivative-mass functional (second degeneracy)


@pytest.fixture(scope="module")
def deriv_setup():
    q = 0.5
    a = 2.0  # a^2 = q^-2, so M = 2 alongside ab = q^-5 (N = 6)
    fam = make_family("AW", dict(a=a, b=q**-5 / a, c=0.3, d=0.2), q)
    return fam, recurrence(fam)


def test_plain_weights_vanish_beyond_pairing_range(deriv_setup):
    fam, _ = deriv_setup
    for j in (3, 4, 5):
        A, _ = mass_weight(fam, j)
        assert abs(A) < 1e-13
    A1, _ = mass_weight(fam, 1)  # center index M/2
    assert abs(A1) < 1e-13


def test_paired_weights_cancel_and_points_collide(deriv_setup):
    fam, _ = deriv_setup
    q = fam.q
    a = fam.param("a")
    A0, _ = mass_weight(fam, 0)
    A2, _ = mass_weight(fam, 2)
    assert abs(A0 + A2) < 1e-13
    mu = lambda j: (a * q**j + q ** (-j) / a) / 2
    assert abs(mu(0) - mu(2)) < 1e-15


def test_derivative_mass_structure(deriv_setup):
    fam, _ = deriv_setup
    F = aw_degenerate_functional(fam)
    orders = sorted((m.location.real, m.derivative_order) for m in F.masses)
    assert (1.25, 1) in [(round(x, 6), o) for x, o in orders]
    assert sum(1 for m in F.masses if m.derivative_order == 1) == 1
    assert len(F.masses) == 6


def test_derivative_mass_gram_orthogonal_through_truncation(deriv_setup):
    fam, coeffs = deriv_setup
    F = aw_degenerate_functional(fam)
    seq = generate_seq(coeffs, 7)
    G = gram_matrix(F, seq, 6)
    scale = max(abs(G[n, n]) for n in range(7))
    worst = max(abs(G[n, m]) for n in range(7) for m in range(7) if n != m)
    assert worst / scale < 1e-7
    # exact-arithmetic cross-check: the degree-6 self-pairing is zero too,
    # so this functional alone cannot normalize the top degree
    assert abs(G[6, 6]) / scale < 1e-7


def test_derivative_mass_matches_canonical_moments(deriv_setup):
    fam, coeffs = deriv_setup
    F = aw_degenerate_functional(fam)
    assert moment_gap(F, coeffs, 10) < 1e-8


def test_top_polynomial_root_multiplicity_pattern(deriv_setup):
    # observed pattern: one double root at the collided pair point, simple
    # roots at the center point and the tail points j = M+1 .. N-1; the
    # point mu_N is NOT a root (degree count forbids one more)
    fam, coeffs = deriv_setup
    q = fam.q
    a = fam.param("a")
    p6 = generate_seq(coeffs, 6)[6]
    mu = lambda j: (a * q**j + q ** (-j) / a) / 2
    found = {round(z.real, 9): m for z, m in roots(p6)}
    assert found[round(mu(0).real, 9)] == 2
    for j in (1, 3, 4, 5):
        assert found[round(mu(j).real, 9)] == 1
    assert abs(poly_eval(p6, mu(6))) > 1e-3


def test_derivative_mass_requires_double_degeneracy(truncated_setup):
    fam, _ = truncated_setup
    with pytest.raises(AssumptionViolated):
        aw_degenerate_functional(fam)


# ---------------------------------------------------------------------------
# Jackson integral


def test_jackson_unit_interval_constant():
    assert jackson_qintegral([1.0], 0, 1, 0.5) == pytest.approx(1.0)


def test_jackson_unit_interval_linear():
    q = 0.5
    assert jackson_qintegral([0.0, 1.0], 0, 1, q) == pytest.approx(1 / (1 + q))


def test_jackson_collapsed_range_is_zero():
    assert jackson_qintegral([1.0, 2.0], 0.7, 0.7, 0.5) == 0


def test_jackson_requires_base_in_disk():
    with pytest.raises(BaseOutOfDisk):
        jackson_qintegral([1.0], 0, 1, 1.1)


@settings(max_examples=30, deadline=None)
@given(
    k=st.integers(min_value=0, max_value=6),
    b=st.floats(min_value=0.1, max_value=2.0),
    q=st.floats(min_value=0.2, max_value=0.8),
)
def test_jackson_monomial_closed_form(k, b, q):
    mono = [0.0] * k + [1.0]
    want = b ** (k + 1) * (1 - q) / (1 - q ** (k + 1))
    got = jackson_qintegral(mono, 0, b, q)
    assert abs(got - want) < 1e-10 * max(1.0, abs(want))


# ---------------------------------------------------------------------------
# Jackson-weight functional


@pytest.fixture(scope="module")
def jackson_setup():
    fam = make_family("bqJ", dict(a=0.4, b=0.3, c=-0.7), 0.5)
    return fam, recurrence(fam), bqj_functional(fam)


def test_jackson_weights_positive_in_classical_window(jackson_setup):
    _, _, F = jackson_setup
    assert all(
        m.weight.real > 0 and abs(m.weight.imag) < 1e-15 for m in F.masses
    )
    assert "truncated" in F.tail_report


def test_jackson_functional_matches_canonical_moments(jackson_setup):
    _, coeffs, F = jackson_setup
    assert moment_gap(F, coeffs, 12) < 1e-8


def test_jackson_gram_diag_ratio(jackson_setup):
    _, coeffs, F = jackson_setup
    seq = generate_seq(coeffs, 7)
    G = gram_matrix(F, seq, 6)
    for n in range(1, 7):
        g = coeffs.gamma(n)
        assert abs(G[n, n] / G[n - 1, n - 1] - g) / abs(g) < 1e-8
    assert offdiag_rel(G) < 1e-9


def test_jackson_functional_rejects_nonnormal_family():
    with pytest.raises(NonNormal):
        fam = make_family("bqJ", dict(a=0.4, b=0.5**-3 / 0.4, c=-0.7), 0.5)
        bqj_functional(fam)


# ---------------------------------------------------------------------------
# finite lattice functionals


def test_finite_lattice_unit_first_weight():
    F = qhahn_functional(0.3, 0.25, 5, 0.5)
    assert F.masses[0].weight == pytest.approx(1.0)
    assert F.masses[0].location == pytest.approx(1.0)


def test_finite_lattice_matches_matching_family_moments():
    # a functional with N masses pairs with the finite family whose N-th
    # recurrence coefficient vanishes (family size parameter N-1)
    q = 0.5
    F = qhahn_functional(0.3, 0.25, 5, q)
    fam = make_family("qH", dict(alpha=0.3, beta=0.25, N=4), q)
    assert moment_gap(F, recurrence(fam), 8) < 1e-8


def test_blimit_matches_family_moments():
    q = 0.5
    N = 4
    F = bqj_blimit_functional(0.4, -0.7, N, q)
    fam = make_family("bqJ", dict(a=0.4, b=q**-N, c=-0.7), q)
    assert moment_gap(F, recurrence(fam), 2 * N - 2) < 1e-8


def test_blimit_equals_mapped_finite_lattice():
    # same functional two ways: directly, and by pulling the plain lattice
    # masses through the variable change x -> x/(c q^N)
    q = 0.5
    N = 4
    a, c = 0.4, -0.7
    FB = self_normalized(bqj_blimit_functional(a, c, N, q))
    FH = qhahn_functional(a / c * q**-N, c, N, q)
    total = sum(m.weight for m in FH.masses)
    for k in range(2 * N - 1):
        direct = sum(m.weight * m.location**k for m in FB.masses)
        mapped = sum(
            m.weight * (c * q**N * m.location) ** k for m in FH.masses
        ) / total
        assert abs(direct - mapped) < 1e-10 * max(1.0, abs(mapped))


def test_variable_change_identity_between_family_instances():
    q = 0.5
    N = 4
    a, c = 0.4, -0.7
    famL = make_family("bqJ", dict(a=a, b=q**-N, c=c), q)
    famR = make_family("bqJ", dict(a=a / c * q**-N, b=c, c=q**-N), q)
    seqL = generate_seq(recurrence(famL), 7)
    seqR = generate_seq(recurrence(famR), 7)
    for n in range(8):
        for x in (0.3, -0.8, 1.7, 0.05, -2.2):
            lhs = poly_eval(seqL[n], x)
            rhs = c**n * q ** (n * N) * poly_eval(seqR[n], x / (c * q**N))
            assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))


def test_finite_lattice_weight_pole_raises():
    with pytest.raises(DegenerateWeight):
        qhahn_functional(0.3, 0.5**-2, 5, 0.5)  # b = q^-2 zeroes a denominator


# ---------------------------------------------------------------------------
# root-of-unity ladders


@pytest.fixture(scope="module")
def unity_setup():
    fam = make_family(
        "AW", dict(a=0.3, b=0.25, c=-0.2, d=0.15), None, RootOfUnity(1, 5)
    )
    return fam, recurrence(fam), solve_root_of_unity_r(fam, 5)


def test_unity_gamma_vanishes_at_order(unity_setup):
    _, coeffs, _ = unity_setup
    assert abs(coeffs.gamma(5)) < 1e-14


def test_unity_base_point_satisfies_equation(unity_setup):
    _, _, rd = unity_setup
    assert abs(rd.r**5 - rd.E_N_or_rhs) <= 1e-12
    assert rd.branch_note


def test_unity_solver_flags_vanishing_denominator():
    # product of parameters is a primitive fifth root of unity, so its
    # fifth power is 1 without any single product on the real power ladder
    w = np.exp(2j * np.pi / 5)
    d = w / (0.3 * 0.25 * -0.2)
    fam = make_family("AW", dict(a=0.3, b=0.25, c=-0.2, d=d), 0.5)
    with pytest.raises(DenominatorVanishes):
        solve_root_of_unity_r(fam, 5)


def test_unity_masses_sit_on_top_polynomial_zeros(unity_setup):
    fam, coeffs, rd = unity_setup
    F = aw_rootofunity_functional(fam, rd)
    p5 = generate_seq(coeffs, 5)[5]
    for m in F.masses:
        assert abs(poly_eval(p5, m.location)) < 1e-12


def test_unity_weights_match_christoffel_up_to_constant(unity_setup):
    fam, coeffs, rd = unity_setup
    F = aw_rootofunity_functional(fam, rd)
    C = christoffel_functional(coeffs, 5)
    key = lambda m: (m.location.real, m.location.imag)
    ratios = [
        a.weight / b.weight
        for a, b in zip(sorted(F.masses, key=key), sorted(C.masses, key=key))
    ]
    assert max(abs(r / ratios[0] - 1) for r in ratios) < 1e-8


def test_unity_gram_live_diagonal_below_order(unity_setup):
    fam, coeffs, rd = unity_setup
    F = aw_rootofunity_functional(fam, rd)
    seq = generate_seq(coeffs, 5)
    G = gram_matrix(F, seq, 4)
    assert all(abs(G[n, n]) > 1e-10 for n in range(5))
    assert offdiag_rel(G) < 1e-12


def test_unity_functional_matches_canonical_moments(unity_setup):
    fam, coeffs, rd = unity_setup
    F = aw_rootofunity_functional(fam, rd)
    assert moment_gap(F, coeffs, 8) < 1e-8


def test_unity_ladder_recursion_report(unity_setup):
    fam, _, rd = unity_setup
    rep = rho_recursion_report(fam, rd)
    assert rep["holds"]
    assert rep["residual"] < 1e-10


def test_unity_reflected_masses_negated(unity_setup):
    fam, _, rd = unity_setup
    F = aw_rootofunity_functional(fam, rd)
    R = aw_rootofunity_reflected(fam, rd)
    for mf, mr in zip(F.masses, R.masses):
        assert mr.location == -mf.location
        assert mr.weight == mf.weight


def test_unity_rejects_parameter_product_on_power_ladder():
    fam = make_family(
        "AW", dict(a=0.5, b=2.0, c=-0.2, d=0.15), None, RootOfUnity(1, 5)
    )  # ab = 1 = q^0
    rd_like = solve_root_of_unity_r
    with pytest.raises((AssumptionViolated, DenominatorVanishes)):
        rd = rd_like(fam, 5)
        aw_rootofunity_functional(fam, rd)


def test_bqj_unity_generic_parameters(unity_setup):
    fam = make_family("bqJ", dict(a=0.4, b=0.3, c=-0.7), None, RootOfUnity(1, 5))
    coeffs = recurrence(fam)
    rd = solve_root_of_unity_r(fam, 5)
    F = bqj_rootofunity_functional(fam, rd)
    assert functional_apply(F, [1.0]) == pytest.approx(1.0)
    G = gram_matrix(F, generate_seq(coeffs, 5), 4)
    assert all(abs(G[n, n]) > 1e-10 for n in range(5))
    assert offdiag_rel(G) < 1e-12
    assert moment_gap(F, coeffs, 8) < 1e-8
    p5 = generate_seq(coeffs, 5)[5]
    for m in F.masses:
        assert abs(poly_eval(p5, m.location)) < 1e-12


def test_bqj_unity_unit_c_matches_closed_form_weights():
    # at c = 1 the generic finite-product machinery must reproduce the
    # closed-form ladder weights; note the resulting functional is NOT an
    # orthogonality functional for the c = 1 sequence (c sits on the
    # power ladder, which the uniqueness assumptions exclude)
    q5 = RootOfUnity(1, 5)
    fam = make_family("bqJ", dict(a=0.4, b=0.3, c=1.0), None, q5)
    rd = solve_root_of_unity_r(fam, 5)
    assert rd.r == pytest.approx(1.0)
    F = bqj_rootofunity_functional(fam, rd)
    closed = bqj_c1_ladder_weights(0.4, 0.3, 5, fam.q)
    total = sum(closed)
    for m, w in zip(F.masses, closed):
        assert abs(m.weight - w / total) < 1e-8


def test_bqj_unity_rejects_parameter_on_power_ladder():
    q5 = RootOfUnity(1, 5)
    fam = make_family("bqJ", dict(a=1.0, b=0.3, c=-0.7), None, q5)  # a = q^0
    rd = solve_root_of_unity_r(fam, 5)
    with pytest.raises(AssumptionViolated):
        bqj_rootofunity_functional(fam, rd)


# ---------------------------------------------------------------------------
# christoffel construction


def test_christoffel_single_mass_base_case():
    fam = make_family("bqJ", dict(a=0.4, b=0.3, c=-0.7), 0.5)
    coeffs = recurrence(fam)
    F = christoffel_functional(coeffs, 1)
    (m,) = F.masses
    assert m.location == pytest.approx(coeffs.beta(0))
    assert m.weight == pytest.approx(1.0)


def test_christoffel_total_weight_is_unit():
    fam = make_family("AW", AW_MAIN, Q_MAIN)
    F = christoffel_functional(recurrence(fam), 6)
    assert sum(m.weight for m in F.masses) == pytest.approx(1.0)


def test_christoffel_matches_canonical_moments():
    fam = make_family("AW", AW_MAIN, Q_MAIN)
    coeffs = recurrence(fam)
    F = christoffel_functional(coeffs, 6)
    assert moment_gap(F, coeffs, 2 * 6 - 2) < 1e-8


def test_christoffel_rejects_repeated_zero(deriv_setup):
    _, coeffs = deriv_setup
    with pytest.raises(MultipleZero):
        christoffel_functional(coeffs, 6)  # double zero at the collided pair
