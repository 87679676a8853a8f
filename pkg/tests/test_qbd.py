import numpy as np
import pytest

from tandem_pricing import (BoundInapplicable, bound_constants, compute_R, finite_blocking,
                            infinite_buffer_distribution, qbd_blocks)
from tandem_pricing.qbd import mhypo_generator, power_norms, quadratic_residual, spectral_radius


def test_single_phase_R_is_load():
    R, sp = compute_R(qbd_blocks(3.0, (4.0,)))
    assert R.shape == (1, 1)
    assert R[0, 0] == pytest.approx(0.75, abs=1e-13)
    assert sp == pytest.approx(0.75, abs=1e-12)


def test_two_phase_quadratic_residual():
    blocks = qbd_blocks(1.0, (4.0, 4.0))
    R, sp = compute_R(blocks)
    assert quadratic_residual(R, blocks) <= 1e-12
    assert 0 < sp < 1
    assert sp == pytest.approx(max(abs(np.linalg.eigvals(R))), abs=1e-10)


def test_unstable_load_rejected():
    with pytest.raises(BoundInapplicable):
        compute_R(qbd_blocks(5.0, (8.0, 8.0)))


def test_mm1_levels_are_geometric():
    r = 0.6
    blocks = qbd_blocks(r * 5, (5.0,))
    R, _ = compute_R(blocks)
    dist = infinite_buffer_distribution(R, blocks)
    assert dist.empty == pytest.approx(1 - r, abs=1e-13)
    for n in range(1, 8):
        assert dist.level_mass(n) == pytest.approx((1 - r) * r ** n, abs=1e-13)
    assert dist.total == pytest.approx(1.0, abs=1e-12)


def test_tail_mass_identity():
    blocks = qbd_blocks(2.0, (8.0, 6.0, 9.0))
    R, _ = compute_R(blocks)
    dist = infinite_buffer_distribution(R, blocks)
    for n in (1, 3, 10):
        partial = sum(dist.level_mass(k) for k in range(n, n + 400))
        assert dist.tail_mass(n) == pytest.approx(partial, abs=1e-13)


def test_submultiplicative_norms():
    R, _ = compute_R(qbd_blocks(3.0, (8.0, 8.0)))
    norms = power_norms(R, 40)
    for n in range(1, 20):
        assert norms[2 * n - 1] <= norms[n - 1] ** 2 * (1 + 1e-12)


def test_spectral_radius_zero_matrix():
    assert spectral_radius(np.zeros((2, 2))) == 0.0


def test_single_phase_constants():
    bc = bound_constants(3.0, (6.0,))
    assert bc.sp == pytest.approx(0.5, abs=1e-12)
    assert bc.p == pytest.approx(0.75, abs=1e-12)
    assert bc.N == 1
    assert np.isfinite(bc.c) and bc.c > 0


def test_generator_rows_sum_to_zero():
    Q = mhypo_generator(1.5, (3.0, 4.0), 3).toarray()
    assert Q.shape == (1 + 4 * 2, 1 + 4 * 2)
    np.testing.assert_allclose(Q.sum(axis=1), 0, atol=1e-13)


@pytest.mark.parametrize("mu", [(8.0, 8.0), (8.0, 5.0, 11.0)])
def test_blocking_decreases_and_respects_bound(mu):
    lam = 1.5
    bc = bound_constants(lam, mu)
    prev = 1.0
    for B1 in range(0, 40):
        fb = finite_blocking(lam, mu, B1)
        assert fb.beta_direct < prev
        prev = fb.beta_direct
        assert fb.beta_mg1k == pytest.approx(fb.beta_direct, abs=1e-12)
        if B1 >= bc.N:
            assert fb.beta_direct <= bc.bound(B1)


def test_single_phase_blocking_is_mm1k():
    r, B1 = 0.5, 4
    fb = finite_blocking(r * 2.0, (2.0,), B1)
    K = B1 + 1
    assert fb.beta_direct == pytest.approx((1 - r) * r ** K / (1 - r ** (K + 1)), abs=1e-14)


def test_zero_rate_blocking():
    fb = finite_blocking(0.0, (1.0, 1.0), 3)
    assert (fb.beta_direct, fb.beta_formula, fb.beta_mg1k) == (0.0, 0.0, 0.0)
