import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from wgscatter.closedform import t_tls
from wgscatter.model import EmitterSystem
from wgscatter.summation import (
    BorelConfig,
    BorelConvergenceError,
    OutsideRadiusWarning,
    borel_sum_geometric,
    gauss_laguerre,
    g_regularized,
    geometric_closed_sum,
    geometric_partial_sums,
    transmission_from_borel,
)


def test_closed_sum_examples():
    assert geometric_closed_sum(0) == 1
    tls = EmitterSystem.tls(0.0, 1.0)
    r = -1j * tls.Gamma / tls.Gamma
    with pytest.warns(OutsideRadiusWarning):
        value = geometric_closed_sum(r)
    assert value == pytest.approx(-1j)
    assert value == pytest.approx(t_tls(tls, tls.Gamma))


def test_closed_sum_outside_radius_warns():
    with pytest.warns(OutsideRadiusWarning):
        value = geometric_closed_sum(-2j)
    assert value == pytest.approx((1 - 2j) / (1 + 2j))
    with pytest.raises(ZeroDivisionError):
        geometric_closed_sum(1)


def test_partial_sums_converge_inside_radius():
    r = 0.3 - 0.2j
    sums = geometric_partial_sums(r, 60)
    assert abs(sums[-1] - geometric_closed_sum(r)) < 1e-14
    assert len(sums) == 61


@pytest.mark.parametrize("n", [32, 64, 128, 256, 512])
def test_gauss_laguerre_rule(n):
    t, w = gauss_laguerre(n)
    assert np.all(np.isfinite(t)) and np.all(np.isfinite(w))
    assert np.all(np.diff(t) > 0)
    assert w.sum() == pytest.approx(1.0, abs=1e-13)
    assert np.sum(w * t ** 3) == pytest.approx(6.0, rel=1e-12)


def test_borel_examples():
    value, err = borel_sum_geometric(0.0)
    assert value == pytest.approx(1.0, abs=1e-14)
    value, err = borel_sum_geometric(2.0)
    assert abs(value - (0.2 - 0.4j)) < 1e-12
    assert err <= 1e-12
    direct = sum((-0.5j) ** n for n in range(200))
    value, _ = borel_sum_geometric(0.5)
    assert abs(value - direct) < 1e-10


@given(st.floats(-5, 5))
def test_borel_matches_closed_form(x):
    value, _ = borel_sum_geometric(x)
    assert abs(value - 1 / (1 + 1j * x)) < 1e-10


def test_borel_failure_is_reported():
    with pytest.raises(BorelConvergenceError):
        borel_sum_geometric(2.0, BorelConfig(nodes=8, max_nodes=16, tol=1e-30))
    with pytest.raises(ValueError):
        borel_sum_geometric(math.nan)
    with pytest.raises(ValueError):
        BorelConfig(scheme="simpson")


def test_transmission_from_borel():
    tls = EmitterSystem.tls(0.0, 1.0)
    for det in (tls.Gamma / 2, -tls.Gamma / 2, 3 * tls.Gamma):
        t, _ = transmission_from_borel(tls.Gamma / det)
        assert abs(t - t_tls(tls, det)) < 1e-10


def test_g_regularized_examples():
    assert g_regularized(0.0, 0.25) == 4.0
    g = g_regularized(1.0, 1e-8)
    assert abs(g.imag - 1.0) < 1e-15
    assert 0 < g.real <= 1e-8
    area, _ = quad(lambda d: g_regularized(d, 1.0).real, -1e7, 1e7, points=[-10.0, 0.0, 10.0], limit=1000)
    assert area == pytest.approx(math.pi, abs=1e-6)
    with pytest.raises(ValueError):
        g_regularized(1.0, 0.0)
