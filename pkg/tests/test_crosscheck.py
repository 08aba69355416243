import json

import pytest

from wgscatter.crosscheck import (
    ConditionWarning,
    fan_equivalence,
    pg_bound_coefficient,
    pg_equivalence,
    reference_lambda,
    reference_tls,
    unitarity_check,
)
from wgscatter.distamp import OnPoleError


def test_reference_systems():
    tls = reference_tls()
    assert tls.omega == 2e15 and tls.gamma1 == 2e4
    lam = reference_lambda()
    assert lam.dtilde2 == 2e14
    assert lam.gamma2 == pytest.approx(2e4 / 2 ** 0.5)


def test_fan_equivalence_passes():
    report = fan_equivalence(points=40)
    assert report["pass"]
    assert report["max_rel_dev"] <= 1e-10
    assert report["single_photon_max_rel_dev"] <= 1e-14
    assert not report["structural_mismatch"]
    json.dumps(report)


def test_fan_adversarial_grid_reports_conditioning():
    with pytest.warns(ConditionWarning):
        report = fan_equivalence(points=30, adversarial=True)
    assert report["condition"] > 1e4
    assert report["max_rel_dev"] <= 1e-8


@pytest.mark.parametrize("nu", [1, 2])
def test_pg_equivalence_passes(nu):
    report = pg_equivalence(points=20, nu=nu)
    assert report["pass"]
    assert set(report["blocks"]) == {"bound", "preserving", "bound_direct"}
    assert report["max_rel_dev"] <= 1e-10
    assert set(report["sectors"]) == {1, 2}


def test_pg_literal_forms_disagree():
    # the forms as printed carry sign and prefactor slips
    report = pg_equivalence(points=10, literal=True)
    assert not report["pass"]
    assert report["blocks"]["bound"] > 0.1


def test_pg_bound_coefficient_checks_conservation():
    lam = reference_lambda()
    with pytest.raises(ValueError):
        pg_bound_coefficient(lam, 1, 1, 2.1e15, 1.9e15, 2e15, 2.1e15)
    with pytest.raises(OnPoleError):
        pg_bound_coefficient(lam, 1, 1, 2.1e15, 1.9e15, 1.9e15, 2.1e15)


def test_unitarity():
    report = unitarity_check(points=300)
    assert report["pass"]
    assert report["max_tls_dev"] <= 1e-12
    assert report["max_lambda_row_dev"] <= 1e-12


def test_reports_are_deterministic():
    assert fan_equivalence(points=10, seed=5) == fan_equivalence(points=10, seed=5)
    assert pg_equivalence(points=5, seed=5) == pg_equivalence(points=5, seed=5)
    assert unitarity_check(points=50, seed=1) == unitarity_check(points=50, seed=1)
