"""Acceptance suite, one test per criterion.

Run on its own with ``pytest tests/test_acceptance.py``; the terminal
summary prints one PASS/FAIL line per criterion.
"""

import math
import sys

import numpy as np
import pytest
import sympy as sp

from wgscatter.closedform import (
    amp_single_lambda,
    amp_two_lambda,
    amp_two_tls,
    amp_two_tls_fan,
    mixing_delta,
    s_lambda,
    t_tls,
)
from wgscatter.crosscheck import fan_equivalence, pg_equivalence
from wgscatter.distamp import (
    PoleFactor,
    canonicalize,
    equal_on_grid,
    eval_coefficient,
    relative_deviation,
)
from wgscatter.dyson import fixture_check, partial_sum
from wgscatter.model import EmitterSystem
from wgscatter.poles import COMMON, STATE_CHANGING, STATE_PRESERVING, pole_map
from wgscatter.summation import borel_sum_geometric, transmission_from_borel

from conftest import DELTA, GAMMA1, OMEGA

criterion = pytest.mark.criterion


@criterion(1, "single-photon TLS unitarity |t| = 1 over 1e3 log-spaced detunings")
def test_tls_unitarity(tls):
    dets = tls.Gamma * np.logspace(-6, 6, 1000)
    worst = max(abs(abs(t_tls(tls, tls.omega + sign * d)) - 1.0) for d in dets for sign in (1, -1))
    assert worst <= 1e-12


@criterion(2, "single-photon Dyson partial sums through n=8 match t at Delta=1e14")
def test_single_photon_dyson(tls):
    i = tls.omega + 1e14
    report = partial_sum(8, 1, tls, {"i": i})
    assert report.ratio == pytest.approx(1.2566e-5, rel=1e-3)
    assert not report.divergent
    assert relative_deviation(report.value, t_tls(tls, i)) <= 1e-10


@criterion(3, "Borel regime |r| = 2: divergent flag, Borel integral and t to 1e-8")
def test_borel_regime(tls):
    for sign in (1, -1):
        det = sign * tls.Gamma / 2
        x = tls.Gamma / det
        report = partial_sum(8, 1, tls, {"i": tls.omega + det})
        assert report.divergent
        assert relative_deviation(report.value, t_tls(tls, tls.omega + det)) > 0.5
        value, _ = borel_sum_geometric(x)
        assert relative_deviation(value, 1 / (1 + 1j * x)) <= 1e-8
        t, _ = transmission_from_borel(x)
        assert relative_deviation(t, t_tls(tls, tls.omega + det)) <= 1e-8


def _to_sympy(monomials, scale, symbols):
    """Exact sympy form of a monomial sum with the scale as a symbol."""
    G = symbols["Gamma"]
    total = 0
    for m in monomials:
        expr = 1
        weight = 0
        for f in m.factors:
            assert isinstance(f, PoleFactor)
            arg = sum(sp.Rational(c) * symbols[v] for v, c in f.arg.coeffs) + sp.Rational(f.arg.const)
            shift = sp.nsimplify(f.shift.imag / scale, rational=True) * sp.I * G
            assert f.shift.real == 0
            expr *= (arg + shift) ** (-f.power)
            weight += f.power
        coeff = m.prefactor / scale ** weight
        expr *= sp.nsimplify(coeff.real, rational=True, tolerance=1e-12) * G ** weight
        assert abs(coeff.imag) <= 1e-15 * abs(coeff)
        total += expr
    return total


@criterion(4, "canonical raw two-photon TLS amplitude equals the Fan form; t0*t1 exactly")
def test_fan_equivalence(tls):
    report = fan_equivalence(tls, points=100, seed=0)
    assert report["max_rel_dev"] < 1e-10
    assert report["pass"]

    canon = canonicalize(amp_two_tls(tls))
    term = canon.term_for(["f0-i0", "f1-i1"])
    i0, i1, G = sp.symbols("i0 i1 Gamma", real=True)
    symbols = {"i0": i0, "i1": i1, "Gamma": G}
    expr = _to_sympy(term.monomials, tls.Gamma, symbols)
    omega = sp.Rational(int(tls.omega))
    t = lambda i: (i - omega - sp.I * G) / (i - omega + sp.I * G)
    assert sp.simplify(expr - t(i0) * t(i1)) == 0


@criterion(5, "order-8 fixture: 4 species, 16 of 32 contractions, transcription to 1e-12")
def test_order_eight_fixture(tls):
    report = fixture_check(tls, points=50, seed=0, tol=1e-12)
    assert report["species"] == 4
    assert report["surviving"] == 16
    assert report["surviving_contractions"] == 16
    assert report["raw_contractions"] == 32
    assert report["max_rel_dev"] <= 1e-12
    assert report["pass"]


@criterion(6, "Lambda single photon: row unitarity to 1e-12, Raman transfer exactly -1 and 0")
def test_lambda_single_photon(lam):
    rng = np.random.default_rng(0)
    dets = lam.Gamma * np.concatenate([np.logspace(-6, 6, 500), -np.logspace(-6, 6, 500)])
    rng.shuffle(dets)
    worst = 0.0
    for nu in lam.levels:
        other = 3 - nu
        for d in dets:
            row = abs(1 + s_lambda(lam, nu, nu, d)) ** 2 + abs(s_lambda(lam, other, nu, d)) ** 2
            worst = max(worst, abs(row - 1))
    assert worst <= 1e-12

    raman = EmitterSystem.lambda_system(OMEGA, GAMMA1, GAMMA1, 0.0, OMEGA / 10)
    amps = amp_single_lambda(raman, 1, raman.omega)
    values = {mu: (eval_coefficient(a, a.terms[0].deltas, {}) if a.terms else 0j) for mu, a in amps.items()}
    assert values[2] == -1
    assert values[1] == 0


def _grid(system, points, seed):
    rng = np.random.default_rng(seed)
    G = system.Gamma
    out = []
    while len(out) < points:
        i0, i1, f0 = np.round(system.omega + G * rng.uniform(-20, 20, size=3))
        f1 = i0 + i1 - f0
        if min(abs(f - i) for f in (f0, f1) for i in (i0, i1)) < 1e-3 * G:
            continue
        out.append({"i0": float(i0), "i1": float(i1), "f0": float(f0)})
    return out


@criterion(7, "Lambda to TLS reductions: gamma2 = 0 amplitude and degenerate pole set")
def test_lambda_reductions():
    g0 = EmitterSystem.lambda_system(OMEGA, GAMMA1, 0.0, 0.0, OMEGA / 10)
    tls = EmitterSystem.tls(OMEGA, GAMMA1)
    amps = amp_two_lambda(g0, 1)
    report = equal_on_grid(canonicalize(amps[1]), amp_two_tls_fan(tls), _grid(tls, 100, 0), 1e-10)
    assert report.equal and report.max_deviation <= 1e-10
    assert canonicalize(amps[2]).terms == ()

    deg = EmitterSystem.lambda_system(OMEGA, GAMMA1, GAMMA1, 0.0, 0.0)
    pm = pole_map(deg, 1, OMEGA + DELTA, OMEGA - DELTA)
    width = math.pi * (GAMMA1 ** 2 + GAMMA1 ** 2)
    assert set(pm.locations()) == {complex(OMEGA, width), complex(OMEGA, -width)}


@criterion(8, "pole maps at the reference parameters, locations exact and classified")
def test_reference_pole_maps(tls, lam, drive):
    pm = pole_map(tls, None, *drive)
    G = tls.Gamma
    assert set(pm.locations()) == {complex(OMEGA, G), complex(OMEGA, -G)}

    pm = pole_map(lam, 1, *drive)
    G = lam.Gamma
    d2 = lam.dtilde2
    kinds = {p.location: p.kind for p in pm.poles}
    real = {OMEGA + DELTA, OMEGA - DELTA, OMEGA + DELTA - d2, OMEGA - DELTA - d2, OMEGA + DELTA + d2}
    expected = {complex(x, 0) for x in real}
    expected |= {complex(OMEGA - d2, G), complex(OMEGA - d2, -G), complex(OMEGA, G), complex(OMEGA, -G)}
    assert set(kinds) == expected
    assert kinds[complex(OMEGA + DELTA + d2, 0)] == STATE_PRESERVING
    assert kinds[complex(OMEGA - d2, G)] == STATE_CHANGING
    assert kinds[complex(OMEGA - d2, -G)] == STATE_CHANGING
    assert kinds[complex(OMEGA + DELTA, 0)] == COMMON


@criterion(9, "T-matrix bound-state and energy-preserving blocks match to 1e-10")
def test_tmatrix_blocks(lam):
    report = pg_equivalence(lam, points=100, seed=0)
    assert report["max_rel_dev"] < 1e-10
    assert report["pass"]


@criterion(10, "two-photon Dyson partial sums converge to the closed forms by N_max=40")
def test_two_photon_dyson(tls, lam):
    G = tls.Gamma
    pt = {"i0": OMEGA + 12 * G, "i1": OMEGA - 15 * G, "f0": OMEGA + 20 * G}
    report = partial_sum(40, 2, tls, pt)
    exact = eval_coefficient(amp_two_tls_fan(tls), [mixing_delta()], pt)
    assert report.ratio < 0.1
    assert relative_deviation(report.value, exact) <= 1e-8

    G = lam.Gamma
    for mu in lam.levels:
        pt = {"i0": OMEGA + 12 * G, "i1": OMEGA - 15 * G, "f0": OMEGA + 20 * G - lam.dtilde(mu)}
        report = partial_sum(40, 2, lam, pt, nu=1, mu=mu)
        exact = eval_coefficient(canonicalize(amp_two_lambda(lam, 1)[mu]), [mixing_delta(lam, mu, 1)], pt)
        assert report.ratio < 0.1
        assert relative_deviation(report.value, exact) <= 1e-8


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
