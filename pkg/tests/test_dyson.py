import json
import math

import pytest

from wgscatter.closedform import amp_single_lambda, det_form, t_tls
from wgscatter.distamp import GFactor, LinearForm, eval_coefficient, relative_deviation
from wgscatter.dyson import (
    Diagram,
    count_contractions,
    diagram_amplitude,
    enumerate_diagrams,
    fixture_check,
    fixture_transcription,
    order_term,
    partial_sum,
)
from wgscatter.model import LAMBDA, TLS

from conftest import OMEGA

V = LinearForm.var


def test_enumerate_small_orders():
    assert len(enumerate_diagrams(2, 1)) == 1
    assert len(enumerate_diagrams(2, 2)) == 4
    with pytest.raises(ValueError):
        enumerate_diagrams(3, 1)
    with pytest.raises(ValueError):
        enumerate_diagrams(4, 3)


def test_order_eight_species():
    ds = enumerate_diagrams(8, 2)
    assert len(ds) == 16
    species = {}
    for d in ds:
        species[d.species] = species.get(d.species, 0) + 1
    assert species == {"non-mixing": 4, "mixing-1": 4, "mixing-2": 4, "mixing-3": 4}


@pytest.mark.parametrize("n, raw, surviving", [(4, 8, 8), (6, 16, 12), (8, 32, 16)])
def test_contraction_counts(n, raw, surviving):
    counts = count_contractions(n)
    assert (counts.raw, counts.surviving) == (raw, surviving)
    enumerated = sorted((d.s, d.s_out, d.split, d.mixing) for d in enumerate_diagrams(n, 2))
    assert enumerated == list(counts.labels)


def test_non_adjacent_loop_excluded():
    # at n=6 a loop may not enclose the other photon's absorption
    ds = enumerate_diagrams(6, 2)
    assert all(sum(d.loops) == (2 if not d.mixing else 1) for d in ds)
    assert count_contractions(6).raw - len(ds) == 4


def test_order_six_mixing_diagram(tls):
    term = diagram_amplitude(Diagram(6, 2, 0, 0, 1, (0, 1), True), tls)
    (mono,) = term.monomials
    assert mono.prefactor == pytest.approx(-2 * math.pi ** 2 * tls.gamma_sq ** 3, rel=1e-15)
    d_i0 = det_form(tls, "i0")
    d_f0 = det_form(tls, "f0")
    assert set(mono.factors) == {GFactor(d_i0, 1), GFactor(V("i0") - V("f0"), 1),
                                 GFactor(d_i0 + det_form(tls, "i1") - d_f0, 2)}
    assert term.deltas == (V("f0") + V("f1") - V("i0") - V("i1"),)


def test_order_eight_transcribed_forms(tls):
    ref = fixture_transcription(tls)
    non_mixing = ref[(0, 0, 4)]
    assert non_mixing.monomials[0].prefactor == pytest.approx(2 * math.pi ** 4 * tls.gamma_sq ** 4)
    species_c = ref[(1, 0, 2)]
    assert species_c.monomials[0].prefactor == pytest.approx(2 * math.pi ** 3 * tls.gamma_sq ** 4)
    powers = sorted(f.power for f in species_c.monomials[0].factors)
    assert powers == [1, 2, 2]


def test_fixture_check_report(tls):
    report = fixture_check(tls, points=10, seed=3)
    assert report["pass"]
    assert set(report["per_species"]) == {"non-mixing", "mixing-1", "mixing-2", "mixing-3"}
    assert report["max_rel_dev"] <= 1e-12


@pytest.mark.parametrize("n", [2, 4, 6, 8])
def test_single_photon_order_term(tls, n):
    i = OMEGA + 3e11
    amp = order_term(n, 1, tls).amplitude
    value = eval_coefficient(amp, ["f-i"], {"i": i})
    expected = 2 * (-1j * math.sqrt(tls.gamma_sq)) ** n * (math.pi * 1j / (i - OMEGA)) ** (n // 2)
    assert relative_deviation(value, expected) < 1e-14


@pytest.mark.parametrize("n", [2, 4, 6])
def test_single_photon_order_term_lambda(lam, n):
    nu, mu = 1, 2
    i = OMEGA + 3e11
    amp = order_term(n, 1, lam, nu, mu).amplitude
    delta = det_form(lam, "f", mu) - det_form(lam, "i", nu)
    value = eval_coefficient(amp, [delta], {"i": i})
    D = i - OMEGA + lam.dtilde(nu)
    expected = (2 * (-1j) ** n * (lam.Gamma * 1j / D) ** (n // 2)
                * lam.gamma(mu) * lam.gamma(nu) / lam.gamma_sq)
    assert relative_deviation(value, expected) < 1e-14


def test_odd_and_zero_orders(tls):
    assert order_term(3, 2, tls).amplitude.terms == ()
    assert len(order_term(0, 2, tls).amplitude.terms) == 2
    assert len(order_term(0, 1, tls).amplitude.terms) == 1


def test_single_photon_series(tls):
    i = OMEGA + 1e14
    report = partial_sum(8, 1, tls, {"i": i})
    assert relative_deviation(report.value, t_tls(tls, i)) < 1e-10
    assert report.orders == (2, 4, 6, 8)
    assert report.converged_at is not None


def test_single_photon_series_lambda(lam):
    i = OMEGA + 5e12
    for mu in lam.levels:
        amp = amp_single_lambda(lam, 1, i)[mu]
        exact = eval_coefficient(amp, amp.terms[0].deltas, {})
        report = partial_sum(12, 1, lam, {"i": i}, nu=1, mu=mu)
        assert relative_deviation(report.value, exact) < 1e-12


def test_ratio_estimate_tracks_r(tls):
    G = tls.Gamma
    pt = {"i0": OMEGA + 12 * G, "i1": OMEGA - 15 * G, "f0": OMEGA + 20 * G}
    report = partial_sum(40, 2, tls, pt)
    assert report.ratio < 0.1
    assert report.estimated_ratio == pytest.approx(report.ratio, rel=0.1)


def test_series_nmax_two_makes_no_claim(tls):
    report = partial_sum(2, 1, tls, {"i": OMEGA + 1e14})
    assert len(report.sums) == 1
    assert report.converged_at is None
    with pytest.raises(ValueError):
        partial_sum(3, 1, tls, {"i": OMEGA + 1e14})


def test_unfolded_loops_match_folded(lam):
    G = lam.Gamma
    for mu in lam.levels:
        pt = {"i0": OMEGA + 12 * G, "i1": OMEGA - 15 * G, "f0": OMEGA + 20 * G - lam.dtilde(mu)}
        from wgscatter.closedform import mixing_delta

        delta = [mixing_delta(lam, mu, 1)]
        a = eval_coefficient(order_term(8, 2, lam, 1, mu).amplitude, delta, pt)
        b = eval_coefficient(order_term(8, 2, lam, 1, mu, unfold_loops=True).amplitude, delta, pt)
        assert relative_deviation(a, b) < 1e-13
    assert len(enumerate_diagrams(6, 1, LAMBDA, unfold_loops=True)) == 4


def test_diagram_dump_is_json():
    ds = enumerate_diagrams(4, 2, TLS)
    data = json.loads(json.dumps([d.to_dict() for d in ds]))
    assert set(data[0]) == {"n", "p", "s", "s'", "m", "loops", "flags"}
    assert sum(d["flags"]["non_mixing"] for d in data) == 4


def test_malformed_diagrams(tls, lam):
    with pytest.raises(ValueError):
        diagram_amplitude(Diagram(6, 2, 0, 0, 1, (1, 1), True), tls)
    with pytest.raises(ValueError):
        diagram_amplitude(Diagram(4, 2, 0, 0, 1, (0, 0), True), lam, 1, 1)
