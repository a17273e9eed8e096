import itertools
import math

import numpy as np
import pytest

from toric_energies.errors import ConfigError, NumericalFailure
from toric_energies.geometry import (FubiniStudy, Guillemin, Perturbed, Polytope, Translated,
                                     generalized_eigenvalues, metric_and_ricci, parse_polynomial,
                                     potential_jet, u_and_h, wedge_density)
from toric_energies.jets import multi_indices
from toric_energies.quad import GridSpec, grid_rule, weighted_sum

FD_WEIGHTS = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0.0, 4 / 5, -1 / 5, 4 / 105, -1 / 280])


def blowup():
    return Guillemin(Polytope.blowup_cp2())


def potentials():
    fs2 = FubiniStudy(2)
    bu = blowup()
    return {
        "fs1": FubiniStudy(1),
        "fs2": fs2,
        "fs2_pert": Perturbed(fs2, parse_polynomial("mu1*mu2 - 0.3*mu1**2", 2), 0.2),
        "blowup": bu,
        "blowup_pert": Perturbed(bu, parse_polynomial("mu1*mu2", 2), 0.2),
    }


def partial_tensor(jet, order):
    return {a: np.asarray(jet.partial(a), dtype=float) for a in multi_indices(jet.n, order)
            if sum(a) == order}


@pytest.mark.parametrize("name", ["fs1", "fs2", "fs2_pert", "blowup", "blowup_pert"])
def test_jets_match_finite_differences(name):
    """Each derivative of order j against an 8th-order difference of order j-1."""
    spec = potentials()[name]
    n = spec.n
    rng = np.random.default_rng(11)
    x = rng.uniform(-4, 4, size=(20, n))
    h = 1e-2
    base = potential_jet(spec, x, 4)
    for order in range(1, 5):
        exact = partial_tensor(base, order)
        for var in range(n):
            shifted = []
            for s in range(-4, 5):
                xs = x.copy()
                xs[:, var] += s * h
                shifted.append(partial_tensor(potential_jet(spec, xs, 4), order - 1))
            for alpha, lower in shifted[4].items():
                up = list(alpha)
                up[var] += 1
                fd = sum(w * sh[alpha] for w, sh in zip(FD_WEIGHTS, shifted)) / h
                ref = exact[tuple(up)]
                scale = np.maximum(np.abs(ref), 1e-3)
                assert np.max(np.abs(fd - ref) / scale) < 1e-6, (name, order, alpha, var)


def test_fubini_study_second_derivative_at_origin():
    jet = potential_jet(FubiniStudy(1), np.zeros((1, 1)), 4)
    assert float(jet.partial((2,))[0]) == pytest.approx(0.5, abs=1e-18)


def test_hessian_symmetric():
    for spec in potentials().values():
        x = np.random.default_rng(2).uniform(-3, 3, size=(7, spec.n))
        H = potential_jet(spec, x).hessian()
        assert np.array_equal(H, np.swapaxes(H, -1, -2))


def test_zero_perturbation_is_exact():
    fs = FubiniStudy(2)
    x = np.random.default_rng(5).uniform(-3, 3, size=(9, 2))
    a = potential_jet(fs, x)
    b = potential_jet(Perturbed(fs, parse_polynomial("mu1*mu2", 2), 0.0), x)
    assert np.array_equal(a.c, b.c)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_fubini_study_is_kahler_einstein(n):
    x = np.random.default_rng(n).uniform(-15, 15, size=(50, n))
    G, R = metric_and_ricci(FubiniStudy(n), x)
    # longdouble cancellation in the log-determinant leaves ~1e-12 at |x| = 15
    assert np.max(np.abs(R - G)) < 1e-10


def test_ricci_deviation_is_first_order_in_eps():
    fs = FubiniStudy(2)
    f = parse_polynomial("mu1*mu2", 2)
    x, _ = grid_rule(2, GridSpec(10.0, 16, 4))
    dev = []
    for eps in (0.05, 0.025):
        G, R = metric_and_ricci(Perturbed(fs, f, eps), x)
        dev.append(np.max(np.abs(R - G)))
    assert dev[0] / dev[1] == pytest.approx(2.0, rel=0.1)


@pytest.mark.parametrize("n", [1, 2])
def test_guillemin_of_simplex_is_fubini_study(n):
    x, _ = grid_rule(n, GridSpec(20.0, 24, 4))
    G0, R0 = metric_and_ricci(FubiniStudy(n), x)
    G1, R1 = metric_and_ricci(Guillemin(Polytope.simplex(n)), x)
    assert np.max(np.abs(G0 - G1)) < 1e-8
    assert np.max(np.abs(R0 - R1)) < 1e-8


@pytest.mark.parametrize("poly", [Polytope.simplex(2), Polytope.blowup_cp2(), Polytope.simplex(1)])
def test_legendre_round_trip(poly):
    g = Guillemin(poly)
    x, _ = grid_rule(poly.n, GridSpec(20.0, 64, 4))
    assert np.max(g.roundtrip_residual(x)) <= 1e-10
    corner = np.array([[-19.971183691887244, 4.283531069208757]])[:, :poly.n]
    assert np.max(g.roundtrip_residual(corner)) <= 1e-10


def test_legendre_point_inside_polytope():
    poly = Polytope.blowup_cp2()
    mu = Guillemin(poly).legendre_point(np.random.default_rng(0).uniform(-10, 10, size=(30, 2)))
    assert np.all(mu @ poly.A.T + poly.b > 0)


def test_legendre_rejects_non_finite():
    with pytest.raises(NumericalFailure):
        blowup().legendre_point(np.array([[np.nan, 0.0]]))


def test_translated_potential_shifts_jets():
    fs = FubiniStudy(2)
    x = np.array([[0.5, -1.0]])
    a = potential_jet(Translated(fs, [0.25, 0.5]), x)
    b = potential_jet(fs, x + np.array([0.25, 0.5]))
    assert np.array_equal(a.c, b.c)


# -- polytopes -----------------------------------------------------------------

def test_polytope_volume_and_barycentre():
    vol, bary = Polytope.blowup_cp2().volume_and_barycenter()
    assert vol == pytest.approx(4.0)
    assert np.allclose(bary, [1 / 12, 1 / 12])
    vol, bary = Polytope.simplex(2).volume_and_barycenter()
    assert vol == pytest.approx(4.5)
    assert np.allclose(Polytope.simplex(2).canonical_centre(), [1.0, 1.0])


@pytest.mark.parametrize("normals, offsets, message", [
    (((1, 0), (0, 1)), (1, 1), "unbounded"),
    (((1, 0), (0, 1), (-1, -2)), (1, 1, 1), "Delzant"),
    (((1, 0), (-1, 0), (0, 1), (0, -1)), (-1, -1, 1, 1), "empty interior"),
    (((1, 0), (0, 1), (-1, -1), (1, 1)), (1, 1, 1), "one offset per normal"),
])
def test_polytope_validation(normals, offsets, message):
    with pytest.raises(ConfigError, match=message):
        Polytope(normals, offsets)


def test_non_integer_normal_rejected():
    with pytest.raises(ConfigError):
        Polytope(((1.5, 0), (0, 1), (-1, -1)), (1, 1, 1))


# -- wedge densities -------------------------------------------------------------

def random_spd(rng, n, batch=6):
    a = rng.normal(size=(batch, n, n))
    return a @ np.swapaxes(a, -1, -2) + n * np.eye(n)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_top_power_is_factorial_times_det(n):
    G = random_spd(np.random.default_rng(n), n)
    assert np.allclose(wedge_density([(G, n)]), math.factorial(n) * np.linalg.det(G))


def test_two_by_two_mixed_identity():
    rng = np.random.default_rng(7)
    A, B = random_spd(rng, 2), random_spd(rng, 2)
    mixed = wedge_density([(A, 1), (B, 1)])
    assert np.allclose(mixed, np.linalg.det(A + B) - np.linalg.det(A) - np.linalg.det(B))


def test_rank_one_squared_vanishes():
    v = np.random.default_rng(1).normal(size=(5, 3))
    P = v[:, :, None] * v[:, None, :]
    G = random_spd(np.random.default_rng(2), 3, 5)
    assert np.max(np.abs(wedge_density([(P, 2), (G, 1)]))) < 1e-12


def test_wedge_multilinear():
    rng = np.random.default_rng(4)
    A, B, C = random_spd(rng, 3), random_spd(rng, 3), random_spd(rng, 3)
    lhs = wedge_density([(A + B, 1), (C, 2)])
    rhs = wedge_density([(A, 1), (C, 2)]) + wedge_density([(B, 1), (C, 2)])
    assert np.allclose(lhs, rhs, rtol=1e-14)


def test_wedge_density_is_symmetric_in_factor_order():
    rng = np.random.default_rng(9)
    A, B, C = random_spd(rng, 3), random_spd(rng, 3), random_spd(rng, 3)
    ref = wedge_density([(A, 1), (B, 1), (C, 1)])
    for perm in itertools.permutations([(A, 1), (B, 1), (C, 1)]):
        assert np.allclose(wedge_density(list(perm)), ref, rtol=1e-14)


def test_wedge_exponent_sum_checked():
    G = random_spd(np.random.default_rng(0), 2)
    with pytest.raises(ValueError):
        wedge_density([(G, 1)])


def test_generalized_eigenvalues_identity():
    G = random_spd(np.random.default_rng(3), 2)
    assert np.allclose(generalized_eigenvalues(G, G), 1.0)
    assert np.allclose(generalized_eigenvalues(-2 * G, G), -2.0)


# -- u and the Ricci potential ------------------------------------------------------

GRID = GridSpec(20.0, 48, 8)


def test_zero_perturbation_gives_zero_u_and_h():
    fs = FubiniStudy(2)
    u, h_ref, h_phi = u_and_h(fs, fs, GRID)
    x, _ = grid_rule(2, GridSpec(10.0, 8, 4))
    assert np.max(np.abs(np.asarray(u(x).value, float))) < 1e-12
    assert np.max(np.abs(h_ref(x))) < 1e-8 and abs(h_phi.constant) < 1e-8


@pytest.mark.parametrize("ref", ["fs", "blowup"])
def test_ddbar_u_is_minus_ricci_plus_omega(ref):
    base = FubiniStudy(2) if ref == "fs" else blowup()
    target = Perturbed(base, parse_polynomial("mu1*mu2", 2), 0.2)
    u, _, _ = u_and_h(base, target, GRID)
    x = np.random.default_rng(8).uniform(-6, 6, size=(25, 2))
    G, R = metric_and_ricci(target, x)
    assert np.max(np.abs(np.asarray(u(x).hessian(), float) - (G - R))) < 1e-7


@pytest.mark.parametrize("ref", ["fs", "blowup"])
def test_target_ricci_potential_normalised(ref):
    base = FubiniStudy(2) if ref == "fs" else blowup()
    target = Perturbed(base, parse_polynomial("mu1*mu2", 2), 0.2)
    _, h_ref, h_phi = u_and_h(base, target, GRID)
    x, w = grid_rule(2, GRID)
    G, _ = metric_and_ricci(target, x)
    dens = 2 * np.linalg.det(G.astype(float))
    V = weighted_sum(dens, w)
    assert abs(weighted_sum((np.exp(h_phi(x)) - 1) * dens, w) / V) <= 1e-8


def test_reference_ricci_potential_of_blowup_solves_its_equation():
    bu = blowup()
    _, h_ref, _ = u_and_h(bu, bu, GRID)
    x = np.random.default_rng(6).uniform(-5, 5, size=(20, 2))
    G, R = metric_and_ricci(bu, x)
    assert np.max(np.abs(np.asarray(h_ref.jet(x).hessian(), float) - (R - G))) < 1e-8


# -- perturbation parser ----------------------------------------------------------

def test_parser_accepts_polynomials():
    f = parse_polynomial("2*mu1*mu2 - mu1**2 + 0.5 + -mu2", 2)
    assert f([1.5, 2.0]) == pytest.approx(2 * 3.0 - 2.25 + 0.5 - 2.0)


@pytest.mark.parametrize("text", ["mu1**-1", "__import__('os')", "mu3", "mu1/2", "mu1**0.5",
                                  "sin(mu1)", "mu1 +", "mu1**mu2"])
def test_parser_rejects(text):
    with pytest.raises(ConfigError):
        parse_polynomial(text, 2)


def test_positivity_failure_names_point():
    bad = Perturbed(FubiniStudy(2), parse_polynomial("mu1**2", 2), 0.2)
    x, _ = grid_rule(2, GridSpec(20.0, 16, 4))
    with pytest.raises(NumericalFailure, match=r"x=\["):
        metric_and_ricci(bad, x)
