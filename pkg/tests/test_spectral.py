import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cslab.spectral import (
    Grid,
    HelmholtzFamily,
    cheb_D1,
    cheb_nodes,
    clenshaw_curtis_weights,
    column_l2,
    ddx,
    ddy,
    dealias,
    diff_ops,
    field_from_coeffs,
    field_from_physical,
    l2_norm,
    linf_norm,
    make_grid,
    product,
    solve_helmholtz,
    to_physical,
    to_spectral,
    weighted_l2,
)


@pytest.fixture(scope="module")
def grid():
    return make_grid(32, 64)


def random_field(grid, seed=0, kmax=None, real=True):
    rng = np.random.default_rng(seed)
    kmax = grid.dealias_kmax if kmax is None else kmax
    coeffs = np.zeros(grid.shape, dtype=complex)
    for ik, k in enumerate(grid.k_modes):
        if abs(k) > kmax:
            continue
        prof = rng.normal(size=grid.Ny + 1) + 1j * rng.normal(size=grid.Ny + 1)
        # keep y content smooth: synthesize from a few low Chebyshev-like shapes
        y = grid.y_nodes
        prof = sum(
            (rng.normal() + 1j * rng.normal()) * np.cos(m * np.arccos(np.clip(y, -1, 1)))
            for m in range(8)
        )
        coeffs[ik] = prof
    f = field_from_coeffs(grid, coeffs, real=False)
    if real:
        vals = to_physical(f).real
        return field_from_physical(grid, vals)
    return f


class TestGrid:
    def test_x_spacing(self):
        g = make_grid(8, 16)
        assert g.x_nodes[1] - g.x_nodes[0] == pytest.approx(np.pi / 4)

    def test_cheb_midpoint(self):
        g = make_grid(8, 16)
        assert g.y_nodes[8] == 0.0
        assert g.y_nodes[0] == 1.0
        assert g.y_nodes[16] == -1.0

    def test_k_span(self):
        g = make_grid(64, 128)
        assert g.k_modes.min() == -31
        assert g.k_modes.max() == 32
        assert np.count_nonzero(g.k_modes == 0) == 1

    def test_dealias_cut(self):
        g = make_grid(64, 128)
        assert g.dealias_cut == 21
        assert g.dealias_cut <= 64 // 3

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            make_grid(7, 64)
        with pytest.raises(ValueError):
            make_grid(16, 8)


class TestDiffMatrices:
    @pytest.mark.parametrize("p", [0, 1, 2, 5, 17, 32])
    def test_D1_polynomial_exact(self, p):
        Ny = 32
        y = cheb_nodes(Ny)
        D = cheb_D1(Ny)
        got = D @ y**p
        want = p * y ** (p - 1) if p > 0 else np.zeros_like(y)
        scale = max(np.abs(want).max(), 1.0)
        assert np.abs(got - want).max() <= 1e-10 * scale

    def test_D2_is_D1_squared(self, grid):
        ops = diff_ops(grid)
        assert np.allclose(ops.D2, ops.D1 @ ops.D1, rtol=0, atol=1e-10 * np.abs(ops.D2).max())

    def test_cc_weights_integrate_polys(self):
        w = clenshaw_curtis_weights(16)
        y = cheb_nodes(16)
        for p in range(0, 17):
            exact = (1 - (-1) ** (p + 1)) / (p + 1)
            assert w @ y**p == pytest.approx(exact, abs=1e-14)


class TestTransforms:
    def test_constant(self, grid):
        f = field_from_physical(grid, np.ones(grid.shape))
        assert np.allclose(f.mode(0), 1.0)
        others = f.coeffs[grid.k_modes != 0]
        assert np.abs(others).max() < 1e-14

    def test_cos_x(self, grid):
        X = grid.x_nodes[:, None] * np.ones_like(grid.y_nodes)
        f = field_from_physical(grid, np.cos(X))
        assert np.allclose(f.mode(1), 0.5, atol=1e-14)
        assert np.allclose(f.mode(-1), 0.5, atol=1e-14)

    def test_round_trip(self, grid):
        f = random_field(grid, seed=3)
        vals = to_physical(f)
        back = to_spectral(vals, grid)
        scale = np.abs(f.coeffs).max()
        assert np.abs(back.coeffs - f.coeffs).max() < 1e-12 * scale

    def test_rejects_nonfinite(self, grid):
        vals = np.ones(grid.shape)
        vals[0, 0] = np.nan
        with pytest.raises(ValueError):
            to_spectral(vals, grid)

    def test_reality_defect(self, grid):
        f = random_field(grid, seed=4)
        assert f.check_reality() < 1e-13


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(min_value=0, max_value=10_000))
def test_round_trip_property(seed):
    grid = make_grid(16, 24)
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=grid.shape)
    f = to_spectral(vals, grid)
    assert np.abs(to_physical(f) - vals).max() < 1e-12 * max(np.abs(vals).max(), 1.0)


class TestDerivatives:
    def test_ddx_cos(self, grid):
        X = grid.x_nodes[:, None] * np.ones_like(grid.y_nodes)
        f = field_from_physical(grid, np.cos(X))
        got = to_physical(ddx(f))
        assert np.abs(got - (-np.sin(X))).max() < 1e-12

    def test_ddy_cubic(self, grid):
        Y = np.ones(grid.Nx)[:, None] * grid.y_nodes
        f = field_from_physical(grid, Y**3)
        got = to_physical(ddy(f))
        assert np.abs(got - 3 * Y**2).max() < 1e-10

    def test_ddy_twice_sine(self):
        grid = make_grid(8, 64)
        Y = np.ones(grid.Nx)[:, None] * grid.y_nodes
        f = field_from_physical(grid, np.sin(np.pi * (Y + 1) / 2))
        got = to_physical(ddy(ddy(f)))
        want = -((np.pi / 2) ** 2) * np.sin(np.pi * (Y + 1) / 2)
        assert np.abs(got - want).max() < 1e-8

    def test_ddx_ddy_commute(self, grid):
        f = random_field(grid, seed=5)
        a = ddx(ddy(f)).coeffs
        b = ddy(ddx(f)).coeffs
        assert np.abs(a - b).max() < 1e-10 * max(np.abs(a).max(), 1.0)


class TestProduct:
    def test_identity(self, grid):
        f = random_field(grid, seed=6)
        one = field_from_physical(grid, np.ones(grid.shape))
        got = product(one, f)
        want = dealias(f)
        assert np.abs(got.coeffs - want.coeffs).max() < 1e-12 * np.abs(f.coeffs).max()

    def test_cos_squared(self, grid):
        X = grid.x_nodes[:, None] * np.ones_like(grid.y_nodes)
        f = field_from_physical(grid, np.cos(X))
        got = product(f, f)
        assert np.allclose(got.mode(0), 0.5, atol=1e-14)
        assert np.allclose(got.mode(2), 0.25, atol=1e-14)

    def test_against_convolution(self, grid):
        a = random_field(grid, seed=7, kmax=4)
        b = random_field(grid, seed=8, kmax=4)
        got = product(a, b)
        # dense convolution oracle: c_k = sum_{k1+k2=k} a_{k1} b_{k2}
        for k in range(-grid.dealias_kmax, grid.dealias_kmax + 1):
            acc = np.zeros(grid.Ny + 1, dtype=complex)
            for k1 in range(-4, 5):
                k2 = k - k1
                if abs(k2) <= 4:
                    acc += a.mode(k1) * b.mode(k2)
            assert np.abs(got.mode(k) - acc).max() < 1e-10 * max(np.abs(acc).max(), 1.0)

    def test_grid_mismatch(self, grid):
        other = make_grid(16, 32)
        f = random_field(grid, seed=9)
        g = random_field(other, seed=9)
        with pytest.raises(ValueError):
            product(f, g)


class TestHelmholtz:
    def test_manufactured_parabola(self):
        grid = make_grid(8, 48)
        y = grid.y_nodes
        phi_exact = 1 - y**2
        rhs = -2.0 - phi_exact  # (d_yy - 1) phi
        phi = solve_helmholtz(grid, 1.0, rhs, "dirichlet")
        assert np.abs(phi - phi_exact).max() < 1e-9

    def test_zero_rhs(self, grid):
        phi = solve_helmholtz(grid, 2.0, np.zeros(grid.Ny + 1), "dirichlet")
        assert np.abs(phi).max() == 0.0

    def test_sine_k4(self):
        grid = make_grid(8, 64)
        y = grid.y_nodes
        phi_exact = np.sin(np.pi * (y + 1))
        rhs = -(np.pi**2) * phi_exact - 4.0 * phi_exact
        phi = solve_helmholtz(grid, 4.0, rhs, "dirichlet")
        assert np.abs(phi - phi_exact).max() < 1e-8

    def test_random_rhs_residuals(self):
        grid = make_grid(8, 64)
        ops = diff_ops(grid)
        rng = np.random.default_rng(12)
        y = grid.y_nodes
        for trial in range(100):
            k2 = float(rng.integers(0, 12)) ** 2
            rhs = sum(rng.normal() * np.cos(m * np.arccos(np.clip(y, -1, 1))) for m in range(10))
            rhs = rhs.astype(complex)
            phi = solve_helmholtz(grid, k2, rhs, "dirichlet")
            res = (ops.D2 @ phi - k2 * phi) - rhs
            assert np.abs(res[1:-1]).max() <= 1e-9 * max(np.abs(rhs).max(), 1.0)
            assert abs(phi[0]) < 1e-12 and abs(phi[-1]) < 1e-12

    def test_neumann(self):
        grid = make_grid(8, 48)
        y = grid.y_nodes
        phi_exact = np.cos(np.pi * (y + 1))  # phi' = -pi sin(pi(y+1)) = 0 at walls
        rhs = -(np.pi**2) * phi_exact - phi_exact
        phi = solve_helmholtz(grid, 1.0, rhs, "neumann")
        assert np.abs(phi - phi_exact).max() < 1e-8

    def test_neumann_k0_gauge(self):
        grid = make_grid(8, 48)
        y = grid.y_nodes
        # phi'' = cos(pi(y+1)) has zero integral and zero-flux data
        rhs = np.cos(np.pi * (y + 1)).astype(complex)
        phi = solve_helmholtz(grid, 0.0, rhs, "neumann")
        assert abs(grid.cc_weights @ phi) < 1e-10
        want = -np.cos(np.pi * (y + 1)) / np.pi**2
        want = want - (grid.cc_weights @ want) / 2.0
        assert np.abs(phi - want).max() < 1e-8

    def test_neumann_k0_unsolvable(self):
        grid = make_grid(8, 48)
        rhs = np.ones(grid.Ny + 1, dtype=complex)
        with pytest.raises(ValueError, match="solvability"):
            solve_helmholtz(grid, 0.0, rhs, "neumann")

    def test_family_matches_single(self, grid):
        fam = HelmholtzFamily(grid, 0.0, 1.0, np.array([0, 1, 2, 3]), "dirichlet")
        rng = np.random.default_rng(3)
        rhs = rng.normal(size=grid.Ny + 1).astype(complex)
        rhs[0] = rhs[-1] = 0.0
        for k in [1, 2, 3]:
            a = fam.solve(k, rhs)
            b = solve_helmholtz(grid, float(k) ** 2, rhs, "dirichlet")
            assert np.abs(a - b).max() < 1e-10 * max(np.abs(b).max(), 1.0)


class TestNorms:
    def test_zero(self, grid):
        f = field_from_physical(grid, np.zeros(grid.shape))
        assert l2_norm(f) == 0.0

    def test_constant(self, grid):
        f = field_from_physical(grid, np.ones(grid.shape))
        assert l2_norm(f) == pytest.approx(np.sqrt(4 * np.pi), rel=1e-12)

    def test_sin_x(self, grid):
        X = grid.x_nodes[:, None] * np.ones_like(grid.y_nodes)
        f = field_from_physical(grid, np.sin(X))
        assert l2_norm(f) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-12)
        assert weighted_l2(f, np.ones(grid.Ny + 1)) == pytest.approx(np.sqrt(2 * np.pi), rel=1e-12)

    def test_parseval(self, grid):
        f = random_field(grid, seed=10)
        vals = to_physical(f)
        dx = 2 * np.pi / grid.Nx
        direct = np.sqrt(((vals**2) @ grid.cc_weights).sum() * dx)
        assert l2_norm(f) == pytest.approx(direct, rel=1e-10)

    def test_weighted_2d_matches_1d(self, grid):
        f = random_field(grid, seed=11)
        wy = 1.0 + grid.y_nodes**2
        w2d = np.ones(grid.Nx)[:, None] * wy
        assert weighted_l2(f, wy) == pytest.approx(weighted_l2(f, w2d), rel=1e-10)

    def test_negative_weight_rejected(self, grid):
        f = random_field(grid, seed=12)
        with pytest.raises(ValueError):
            weighted_l2(f, -np.ones(grid.Ny + 1))

    def test_linf(self, grid):
        X = grid.x_nodes[:, None] * np.ones_like(grid.y_nodes)
        f = field_from_physical(grid, 3.0 * np.cos(X))
        assert linf_norm(f) == pytest.approx(3.0, rel=1e-12)

    def test_column_l2(self, grid):
        col = np.ones(grid.Ny + 1, dtype=complex)
        assert column_l2(col, grid) == pytest.approx(np.sqrt(2.0), rel=1e-12)
