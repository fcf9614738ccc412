import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spectral_flow_lab.errors import DomainError, QuadratureWarning, TieWarning
from spectral_flow_lab.lattice import LatticePotential, truncate
from spectral_flow_lab.linalg import eigh
from spectral_flow_lab.scattering import OperatorPath, path_scattering_matrix
from spectral_flow_lab.spectral_shift import (
    birman_solomyak_xi,
    bump,
    flow_density,
    infinitesimal_flow,
    krein_check,
    singular_steps,
    ssf_profile,
    xi_ac,
    xi_ac_detail,
    xi_ac_integral,
    xi_finite,
    xi_singular,
)
from spectral_flow_lab.quadrature import gauss_legendre
from spectral_flow_lab.verify import band_grid

from conftest import random_hermitian

P = LatticePotential.from_mapping
SQRT5 = np.sqrt(5.0)


def closed_form(c, lam):
    return np.arctan(c / (2 * np.sin(np.arccos(lam / 2)))) / np.pi


# -- absolutely continuous part


def test_xi_ac_trivial_path():
    assert xi_ac({}, 0.3) == (0.0, 0.0)


def test_xi_ac_worked_value():
    val, err = xi_ac({0: 1.0}, 0.0)
    assert val == pytest.approx(0.1475836, abs=1e-7)
    assert val == pytest.approx(np.arctan(0.5) / np.pi, abs=1e-14)
    assert err < 1e-10


@pytest.mark.parametrize("c", [-3.0, -0.2, 1.0, 2.5])
def test_xi_ac_closed_form(c):
    for lam in band_grid(25):
        assert xi_ac({0: c}, lam)[0] == pytest.approx(closed_form(c, lam), abs=1e-10)


def test_xi_ac_matches_phase_of_det():
    v = {0: 2.0, 1: -1.0, 4: 0.5}
    for lam in band_grid(15):
        xi, _ = xi_ac(v, lam)
        det = path_scattering_matrix(OperatorPath.straight(P(v)), lam).det
        assert abs(det - np.exp(-2j * np.pi * xi)) <= 1e-9


def test_xi_ac_path_independence():
    direct = OperatorPath((P({}), P({0: 1})))
    detour = OperatorPath((P({}), P({0: 1}), P({0: 1, 5: 2}), P({0: 1})))
    for lam in band_grid(20):
        assert xi_ac(direct, lam)[0] == pytest.approx(xi_ac(detour, lam)[0], abs=1e-9)


def test_xi_ac_chain_and_antisymmetry():
    h0, h1, h2 = P({}), P({0: 1.5, 2: -1}), P({0: -0.5, 1: 2})
    for lam in (-1.3, 0.2, 1.7):
        a, ea = xi_ac(OperatorPath((h0, h1)), lam)
        b, eb = xi_ac(OperatorPath((h1, h2)), lam)
        c, ec = xi_ac(OperatorPath((h0, h2)), lam)
        assert abs(c - a - b) <= 2 * (ea + eb + ec) + 1e-13
        back, _ = xi_ac(OperatorPath((h1, h0)), lam)
        assert back == pytest.approx(-a, abs=1e-13)


def test_xi_ac_flags_unresolved_quadrature():
    with pytest.warns(QuadratureWarning):
        xi_ac({0: 40.0, 1: -40.0}, 0.0, nodes=4, tol=1e-30, flag_tol=1e-300)
    _, _, flagged = xi_ac_detail({0: 40.0, 1: -40.0}, 0.0, nodes=4, tol=1e-30, flag_tol=1e-300)
    assert flagged


def test_flow_density_integrates_to_xi_ac():
    path = OperatorPath.straight(P({0: 1.0, 3: -2.0}))
    lam = 0.4
    dens = gauss_legendre(
        lambda r: np.array([flow_density(path, lam, t).ac_density for t in r]), 0.0, 1.0, n=32, panels=2
    )
    assert dens == pytest.approx(xi_ac(path, lam)[0], abs=1e-10)


def test_flow_density_atoms():
    fd = flow_density({0: 1.0}, 0.0, 1.0)
    assert len(fd.singular_atoms) == 1
    e, w = fd.singular_atoms[0]
    assert e == pytest.approx(SQRT5)
    # E(r) = sqrt(4 + r^2) so dE/dr = 1/sqrt(5)
    assert w == pytest.approx(1 / SQRT5, rel=1e-10)


def test_ssf_profile_empty_and_worked():
    grid = np.linspace(-1.9, 1.9, 39)
    empty = ssf_profile({}, grid)
    np.testing.assert_array_equal(empty.xi_ac, 0.0)
    prof = ssf_profile({0: 1.0}, grid)
    assert prof.xi_ac[19] == pytest.approx(0.1475836, abs=1e-7)
    assert not prof.flagged.any()


# -- singular part


def test_xi_singular_single_site():
    for lam in (2.0001, 2.1, 2.2, SQRT5 - 1e-6):
        assert xi_singular({0: 1.0}, lam) == 1
    for lam in (SQRT5 + 1e-6, 2.5, 10.0, -2.1, -3.0):
        assert xi_singular({0: 1.0}, lam) == 0


def test_xi_singular_is_integer_and_antisymmetric():
    path = OperatorPath((P({}), P({0: 2.0, 1: -3.0}), P({0: 1.0, 4: 1.5})))
    for lam in (-4.0, -2.5, 2.3, 3.1):
        val = xi_singular(path, lam)
        assert isinstance(val, int)
        assert xi_singular(path.reversed(), lam) == -val


def test_xi_singular_trivial_and_domain():
    assert xi_singular({}, 3.0) == 0
    with pytest.raises(DomainError):
        xi_singular({0: 1.0}, 1.5)


def test_xi_singular_matches_truncation():
    v = P({0: 2.0, 1: -3.0, 3: 1.0})
    e0 = eigh(truncate({}, 601))
    e1 = eigh(truncate(v, 601))
    for lam in np.concatenate([np.linspace(2.05, 6, 12), -np.linspace(2.05, 6, 12)]):
        assert xi_singular(v, lam) == xi_finite(e0, e1, lam)


def test_singular_steps_single_site():
    steps = singular_steps({0: 1.0})
    assert ((2.0, pytest.approx(SQRT5)), 1) in [((lo, hi), v) for (lo, hi), v in steps]
    assert all(v == 0 for (lo, hi), v in steps if lo >= SQRT5 or hi <= -2)


# -- finite matrices


def test_xi_finite_examples():
    h = np.diag([0.0, 1.0, 3.0])
    assert xi_finite(h, h, 0.5) == 0
    assert xi_finite(np.diag([0.0]), np.diag([1.0]), 0.5) == 1


def test_xi_finite_truncated_lattice():
    assert xi_finite(truncate({}, 2001), truncate({0: 1}, 2001), 2.1) == 1
    assert xi_singular({0: 1.0}, 2.1) == 1


def test_xi_finite_tie_warns_and_uses_closed_counting():
    with pytest.warns(TieWarning):
        val = xi_finite(np.diag([0.0]), np.diag([1.0]), 1.0)
    # N0 = #{eig <= 1} = 1, N1 = 1
    assert val == 0


@given(st.integers(1, 8), st.integers(0, 2**32 - 1), st.floats(-3, 3))
@settings(max_examples=40, deadline=None)
def test_xi_finite_chain_and_antisymmetry(n, seed, lam):
    rng = np.random.default_rng(seed)
    h0, h1, h2 = (random_hermitian(rng, n) for _ in range(3))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TieWarning)
        assert xi_finite(h0, h2, lam) == xi_finite(h0, h1, lam) + xi_finite(h1, h2, lam)
        assert xi_finite(h1, h0, lam) == -xi_finite(h0, h1, lam)


def test_infinitesimal_flow_examples(rng):
    h = random_hermitian(rng, 4)
    assert infinitesimal_flow(h, np.zeros((4, 4)), np.cos) == 0.0
    v = random_hermitian(rng, 4)
    assert infinitesimal_flow(h, v, lambda x: np.ones_like(x)) == pytest.approx(np.trace(v).real)

    def phi(x):
        return np.where(np.abs(x) < 1, 1.0, 0.0)

    assert infinitesimal_flow(np.diag([0.0, 2.0]), np.diag([1.0, 3.0]), phi) == pytest.approx(1.0)


def test_birman_solomyak_trivial_and_scalar():
    grid = np.array([-0.5, 0.25, 0.5, 0.9, 1.5])
    np.testing.assert_array_equal(birman_solomyak_xi(np.eye(2), np.zeros((2, 2)), grid), 0.0)
    # the r-integrand jumps at r = lambda; Gauss-Legendre error is at most one node weight
    f = birman_solomyak_xi(np.diag([0.0]), np.diag([1.0]), grid, panels=128)
    np.testing.assert_allclose(f, np.clip(grid, 0, 1), atol=5e-4)


def test_birman_solomyak_lattice():
    h0 = truncate({}, 501)
    v = truncate({0: 1}, 501) - h0
    f = birman_solomyak_xi(h0, v, [2.05, 2.1])
    assert abs((f[1] - f[0]) - 0.05) <= 2e-3


def test_birman_solomyak_derivative_is_xi(rng):
    # F(b) - F(a) = int_a^b xi for a small random pair
    h0 = random_hermitian(rng, 3)
    v = random_hermitian(rng, 3)
    grid = np.linspace(-4, 4, 801)
    f = birman_solomyak_xi(h0, v, grid, r_nodes=32, panels=32)
    xi = np.array([xi_finite(h0, h0 + v, x) for x in 0.5 * (grid[:-1] + grid[1:])])
    np.testing.assert_allclose(f[-1] - f[0], np.sum(xi) * (grid[1] - grid[0]), atol=2e-2)


# -- Krein trace formula


def test_krein_trivial_and_scalar():
    f = bump(0.0, 1.0)
    assert krein_check(np.diag([0.3, 1.0]), np.diag([0.3, 1.0]), f) == (0.0, 0.0)
    lhs, rhs = krein_check(np.diag([0.0]), np.diag([1.0]), f)
    assert lhs == pytest.approx(-1.0)
    assert rhs == pytest.approx(-1.0, abs=1e-14)


def test_krein_random_matrices(rng):
    f = bump(0.2, 2.0, power=4)
    for n in (2, 5, 20):
        h0 = random_hermitian(rng, n)
        h1 = h0 + random_hermitian(rng, n)
        lhs, rhs = krein_check(h0, h1, f)
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_krein_truncated_lattice_vs_infinite_model():
    f = bump(0.3, 1.1, 3)
    lhs, rhs = krein_check(truncate({}, 2001), truncate({0: 1}, 2001), f)
    assert abs(lhs - rhs) <= 5e-3 * max(1, abs(lhs))
    ref = xi_ac_integral({0: 1.0}, f, nodes=16, panels=16)
    assert abs(lhs - ref) <= 1e-6
