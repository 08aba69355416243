import csv
import io
import json

import pytest

from wgscatter.closedform import amp_two_tls, amp_two_tls_fan
from wgscatter.crosscheck import reference_lambda
from wgscatter.distamp import canonicalize
from wgscatter.model import EmitterSystem
from wgscatter.poles import COMMON, STATE_CHANGING, STATE_PRESERVING, Pole, extract_poles, pole_map

from conftest import GAMMA1, OMEGA

I0, I1 = 2.1e15, 1.9e15


def test_tls_bound_state_poles(tls):
    poles = extract_poles(amp_two_tls_fan(tls, I0, I1))
    assert [p.location for p in poles] == [OMEGA - 1j * tls.Gamma, OMEGA + 1j * tls.Gamma]
    assert all(p.order == 1 for p in poles)


def test_tls_map_is_state_preserving(tls):
    pm = pole_map(tls, None, I0, I1)
    assert pm.counts() == {STATE_PRESERVING: 2, STATE_CHANGING: 0, COMMON: 0}
    assert pm.real_poles() == []


def test_raw_amplitude_gives_same_poles(tls):
    raw = canonicalize(amp_two_tls(tls).bind({"i0": I0, "i1": I1}))
    assert [p.location for p in extract_poles(raw)] == [OMEGA - 1j * tls.Gamma, OMEGA + 1j * tls.Gamma]


def test_extract_requires_canonical_bound_amplitude(tls):
    with pytest.raises(ValueError):
        extract_poles(amp_two_tls(tls).bind({"i0": I0, "i1": I1}))
    with pytest.raises(ValueError):
        extract_poles(amp_two_tls_fan(tls))


def test_lambda_reference_map():
    lam = reference_lambda()
    pm = pole_map(lam, 1, I0, I1)
    G = lam.Gamma
    by_location = {p.location: p.kind for p in pm.poles}
    assert by_location == {
        1.7e15: COMMON, 1.9e15: STATE_PRESERVING, 2.1e15: COMMON, 2.3e15: STATE_PRESERVING,
        1.8e15 - 1j * G: STATE_CHANGING, 1.8e15 + 1j * G: STATE_CHANGING,
        2e15 - 1j * G: COMMON, 2e15 + 1j * G: COMMON,
    }
    assert pm.real_poles(STATE_PRESERVING) == [1.9e15, 2.3e15]


def test_conjugate_closure_adds_missing_partners():
    lam = reference_lambda()
    closed = pole_map(lam, 1, I0, I1)
    open_ = pole_map(lam, 1, I0, I1, conjugate_closure=False)
    assert len(open_.poles) == 7 and len(closed.poles) == 8
    assert set(open_.locations()) < set(closed.locations())
    assert all(z.conjugate() in closed.locations() for z in closed.locations())


def test_initial_ground_two():
    pm = pole_map(reference_lambda(), 2, I0, I1)
    assert pm.counts() == {STATE_PRESERVING: 4, STATE_CHANGING: 2, COMMON: 4}


def test_gamma2_zero_reduces_to_tls(tls):
    lam = EmitterSystem.lambda_system(OMEGA, GAMMA1, 0.0, 0.0, OMEGA / 10)
    a = [(p.location, p.order, p.kind) for p in pole_map(lam, 1, I0, I1).poles]
    b = [(p.location, p.order, p.kind) for p in pole_map(tls, None, I0, I1).poles]
    assert a == b


def test_degenerate_lambda_poles_are_common():
    deg = EmitterSystem.lambda_system(OMEGA, GAMMA1, GAMMA1, 0.0, 0.0)
    pm = pole_map(deg, 1, I0, I1)
    assert pm.locations() == [OMEGA - 1j * deg.Gamma, OMEGA + 1j * deg.Gamma]
    assert {p.kind for p in pm.poles} == {COMMON}


def test_f1_variable_mirrors_f0(tls):
    a = pole_map(tls, None, I0, I1)
    b = pole_map(tls, None, I0, I1, variable="f1")
    assert a.locations() == b.locations()
    assert b.variable == "f1"


def test_csv_schema(tls):
    text = pole_map(reference_lambda(), 1, I0, I1).to_csv()
    rows = list(csv.DictReader(io.StringIO(text)))
    assert list(rows[0]) == ["re_f", "im_f", "order", "class", "origin"]
    assert len(rows) == 8
    assert float(rows[0]["re_f"]) == 1.7e15 and float(rows[0]["im_f"]) == 0
    assert text == pole_map(reference_lambda(), 1, I0, I1).to_csv()


def test_json_round_trips_values():
    pm = pole_map(reference_lambda(), 1, I0, I1)
    data = json.loads(pm.to_json())
    assert data["nu"] == 1 and data["i0"] == I0
    assert [complex(p["re"], p["im"]) for p in data["poles"]] == pm.locations()
    assert {p["class"] for p in data["poles"]} == {COMMON, STATE_PRESERVING, STATE_CHANGING}


def test_pole_order_validated():
    with pytest.raises(ValueError):
        Pole(1.0, 0)
