"""Independent derivations used as equivalence oracles.

Two external results are re-expressed in this package's variables.

The Fan form of the two-photon TLS amplitude is compared with the
canonicalized raw amplitude.  The Pletyukhov-Gritsev T-matrix blocks for a
Lambda system are written in their propagator notation, with ground-level
energies ``eps_lam = dtilde_lam`` and resonance ``eps_3 = Omega``, and
compared block by block with the two-photon Lambda amplitude.

Two slips in the published transcription of the T-matrix blocks are
corrected here.  The ``literal=True`` switches reproduce the printed forms
so the tests can demonstrate that those fail.

* The simplified bound-state component drops the ``gamma_lam**2`` weight of
  the intermediate propagator; the unsimplified form keeps it.
* The energy-preserving component places the outgoing propagator on
  ``p0``; on the support of its own deltas it must be ``p1``, otherwise
  even the TLS limit fails.
"""

from __future__ import annotations

import itertools
import math
import warnings
from typing import Iterable

import numpy as np

from .closedform import (
    amp_single_lambda,
    amp_single_tls,
    amp_single_tls_raw,
    amp_two_lambda,
    amp_two_tls,
    amp_two_tls_fan,
    lambda_blocks,
    mixing_delta,
    s_lambda,
    t_tls,
)
from .distamp import (
    EPS_POLE,
    Amplitude,
    LinearForm,
    Monomial,
    OnPoleError,
    PoleFactor,
    Term,
    canonicalize,
    equal_on_grid,
    eval_coefficient,
    relative_deviation,
)
from .model import EmitterSystem

__all__ = [
    "reference_tls",
    "reference_lambda",
    "fan_equivalence",
    "pg_bound_amplitude",
    "pg_preserving_amplitude",
    "pg_bound_coefficient",
    "pg_equivalence",
    "unitarity_check",
    "ConditionWarning",
]

PI = math.pi
V = LinearForm.var
C = LinearForm.constant


class ConditionWarning(UserWarning):
    """Grid points where cancellation between terms limits the accuracy."""


def reference_tls() -> EmitterSystem:
    """Reference TLS: Omega = 2e15 rad/s, gamma = 2e4 (rad/s)**0.5."""
    return EmitterSystem.tls(2e15, 2e4)


def reference_lambda() -> EmitterSystem:
    """Lambda system with Omega = 2e15, dtilde2 = Omega/10, gamma2 = gamma1/sqrt(2)."""
    return EmitterSystem.lambda_system(2e15, 2e4, 2e4 / math.sqrt(2), 0.0, 2e15 / 10)


def _tls_grid(system: EmitterSystem, points: int, rng: np.random.Generator, adversarial: bool):
    G = system.Gamma
    grid = []
    while len(grid) < points:
        i0, i1 = np.round(system.omega + G * rng.uniform(-20, 20, size=2))
        if adversarial:
            target = (i0, i1)[rng.integers(2)]
            f0 = target + G * 10 ** rng.uniform(-5, -3) * rng.choice([-1, 1])
        else:
            f0 = round(system.omega + G * rng.uniform(-20, 20))
        f1 = i0 + i1 - f0
        if not adversarial and min(abs(f - i) for f in (f0, f1) for i in (i0, i1)) < 1e-3 * G:
            continue
        grid.append({"i0": float(i0), "i1": float(i1), "f0": float(f0)})
    return grid


def fan_equivalence(system: EmitterSystem | None = None, points: int = 100, seed: int = 0,
                    adversarial: bool = False, tol: float | None = None) -> dict:
    """Canonicalized raw two-photon TLS amplitude against the Fan form.

    Also compares the canonical single-photon g form with the closed-form
    transmission.  ``adversarial`` draws f0 within 1e-3 Gamma of an input,
    where individual terms of the raw form nearly cancel; a
    :class:`ConditionWarning` reports the worst cancellation ratio.
    """
    system = system or reference_tls()
    tol = tol if tol is not None else (1e-8 if adversarial else 1e-10)
    rng = np.random.default_rng(seed)
    grid = _tls_grid(system, points, rng, adversarial)
    canon = canonicalize(amp_two_tls(system))
    report = equal_on_grid(canon, amp_two_tls_fan(system), grid, tol)

    single = canonicalize(amp_single_tls_raw(system))
    dets = system.Gamma * np.logspace(-6, 6, 200)
    single_dev = 0.0
    for d in np.concatenate([-dets, [0.0], dets]):
        i = system.omega + d
        single_dev = max(single_dev, relative_deviation(
            eval_coefficient(single, ["f-i"], {"i": i}), t_tls(system, i)))

    condition = None
    if adversarial:
        condition = _worst_cancellation(canon, system, grid)
        if condition > 1e4:
            warnings.warn(f"terms cancel by a factor {condition:.2e} on the adversarial grid",
                          ConditionWarning, stacklevel=2)
    return {
        "check": "fan",
        "points": points,
        "seed": seed,
        "max_rel_dev": report.max_deviation,
        "skipped": report.skipped,
        "structural_mismatch": report.structural_mismatch,
        "single_photon_max_rel_dev": float(single_dev),
        "condition": condition,
        "pass": bool(report.equal and single_dev <= 1e-14),
    }


def _worst_cancellation(amp: Amplitude, system: EmitterSystem, grid) -> float:
    bound = next(t for t in amp.terms if len(t.deltas) == 1)
    worst = 1.0
    for pt in grid:
        parts = [eval_coefficient(Amplitude((Term(bound.deltas, (m,)),), amp.roles, amp.scale),
                                  bound.deltas, pt) for m in bound.monomials]
        total = abs(sum(parts))
        if total:
            worst = max(worst, sum(abs(p) for p in parts) / total)
    return worst


def _eps(system: EmitterSystem, level: int) -> LinearForm:
    return C(system.dtilde(level))


def _perms(names: tuple[str, str]) -> list[tuple[str, str]]:
    return [names, names[::-1]]


def pg_bound_amplitude(system: EmitterSystem, mu: int, nu: int, literal: bool = False) -> Amplitude:
    """Bound-state T-matrix block, eight components on the conservation delta.

    Component ``-2*pi*i * g_lam**2 * g_mu*g_nu / ((k0+eps_nu-p0-eps_lam)
    (p1+eps_mu-Omega+i*Gamma)(k0+eps_nu-Omega+i*Gamma))`` summed over the
    orderings of inputs ``(k0, k1)``, outputs ``(p0, p1)`` and over ``lam``.
    """
    G = system.Gamma
    gmn = system.gamma(mu) * system.gamma(nu)
    omega = C(system.omega)
    conservation = V("f0") + V("f1") + _eps(system, mu) - V("i0") - V("i1") - _eps(system, nu)
    monos = []
    for (k0, k1), (p0, p1) in itertools.product(_perms(("i0", "i1")), _perms(("f0", "f1"))):
        for lam in system.levels:
            weight = 1.0 if literal else system.gamma(lam) ** 2
            factors = (
                PoleFactor(V(k0) + _eps(system, nu) - V(p0) - _eps(system, lam), 0j),
                PoleFactor(V(p1) + _eps(system, mu) - omega, 1j * G),
                PoleFactor(V(k0) + _eps(system, nu) - omega, 1j * G),
            )
            monos.append(Monomial(-2j * PI * weight * gmn, factors, f"pg-bound,{k0},{p0},lam={lam}"))
    roles = {"i0": "input", "i1": "input", "f0": "output", "f1": "output"}
    return Amplitude((Term((conservation,), tuple(monos)),), roles, G)


def pg_preserving_amplitude(system: EmitterSystem, mu: int, nu: int, literal: bool = False) -> Amplitude:
    """Individually energy-preserving T-matrix block.

    Component ``(g_lam**2/(2 g_mu g_nu)) * (2*pi*i*g_mu*g_nu)/(D_k0,nu + i*Gamma)
    * (2*pi*i*g_mu*g_nu)/(D_p1,mu + i*Gamma)`` on
    ``delta(p1 + eps_mu - k1 - eps_lam) delta(E_out - E_in)``.
    """
    G = system.Gamma
    gmn = system.gamma(mu) * system.gamma(nu)
    omega = C(system.omega)
    conservation = V("f0") + V("f1") + _eps(system, mu) - V("i0") - V("i1") - _eps(system, nu)
    terms = []
    for (k0, k1), (p0, p1) in itertools.product(_perms(("i0", "i1")), _perms(("f0", "f1"))):
        out = p0 if literal else p1
        for lam in system.levels:
            if gmn == 0:
                continue
            pref = system.gamma(lam) ** 2 / (2 * gmn) * (2j * PI * gmn) * (2j * PI * gmn)
            factors = (
                PoleFactor(V(k0) + _eps(system, nu) - omega, 1j * G),
                PoleFactor(V(out) + _eps(system, mu) - omega, 1j * G),
            )
            deltas = (V(p1) + _eps(system, mu) - V(k1) - _eps(system, lam), conservation)
            terms.append(Term.product(deltas, pref, factors, f"pg-pair,{k0},{p0},lam={lam}"))
    roles = {"i0": "input", "i1": "input", "f0": "output", "f1": "output"}
    return Amplitude(tuple(terms), roles, G)


def pg_bound_coefficient(system: EmitterSystem, mu: int, nu: int, k0: float, k1: float,
                         p0: float, p1: float, literal: bool = False) -> complex:
    """Bound-state T-matrix coefficient evaluated directly in floating point."""
    G = system.Gamma
    eps = {lam: system.dtilde(lam) for lam in system.levels}
    mismatch = p0 + p1 + eps[mu] - k0 - k1 - eps[nu]
    if abs(mismatch) > 1e-9 * G + 1e-12 * max(abs(k0), abs(k1), abs(p0), abs(p1)):
        raise ValueError(f"frequencies violate energy conservation by {mismatch:.3g}")
    gmn = system.gamma(mu) * system.gamma(nu)
    total = 0j
    for (a0, a1), (b0, b1) in itertools.product([(k0, k1), (k1, k0)], [(p0, p1), (p1, p0)]):
        for lam in system.levels:
            weight = 1.0 if literal else system.gamma(lam) ** 2
            dens = (
                math.fsum([a0, eps[nu], -b0, -eps[lam]]),
                math.fsum([b1, eps[mu], -system.omega]) + 1j * G,
                math.fsum([a0, eps[nu], -system.omega]) + 1j * G,
            )
            if abs(dens[0]) < EPS_POLE * G:
                raise OnPoleError("bound-state coefficient evaluated on its real pole")
            total += -2j * PI * weight * gmn / (dens[0] * dens[1] * dens[2])
    return total


def _lambda_grid(system: EmitterSystem, nu: int, points: int, rng: np.random.Generator):
    G = system.Gamma
    base_in = system.omega - system.dtilde(nu)
    grid = []
    while len(grid) < points:
        i0, i1 = base_in + G * rng.uniform(-20, 20, size=2)
        f0 = system.omega - system.dtilde(rng.choice(system.levels)) + G * rng.uniform(-20, 20)
        # integer frequencies keep the conservation sum exact in floating point
        grid.append({"i0": float(round(i0)), "i1": float(round(i1)), "f0": float(round(f0))})
    return grid


def pg_equivalence(system: EmitterSystem | None = None, points: int = 100, seed: int = 0, nu: int = 1,
                   sectors: Iterable[int] | None = None, literal: bool = False, tol: float = 1e-10) -> dict:
    """T-matrix blocks against the two-photon Lambda amplitude, per block and sector.

    Both sides of each block are canonicalized and compared with
    :func:`~wgscatter.distamp.equal_on_grid`.  The bound block is also
    checked through :func:`pg_bound_coefficient`.
    """
    system = system or reference_lambda()
    rng = np.random.default_rng(seed)
    grid = _lambda_grid(system, nu, points, rng)
    sectors = tuple(sectors) if sectors is not None else system.levels
    blocks = {"bound": 0.0, "preserving": 0.0, "bound_direct": 0.0}
    ok = True
    detail = {}
    for mu in sectors:
        ours = lambda_blocks(system, nu, mu)
        bound = equal_on_grid(canonicalize(pg_bound_amplitude(system, mu, nu, literal)),
                              canonicalize(ours["bound"]), grid, tol)
        pres = equal_on_grid(canonicalize(pg_preserving_amplitude(system, mu, nu, literal)),
                             canonicalize(ours["pair"]), grid, tol)
        canon = canonicalize(ours["bound"])
        direct = 0.0
        for pt in grid:
            f1 = pt["i0"] + pt["i1"] + system.dtilde(nu) - system.dtilde(mu) - pt["f0"]
            try:
                a = pg_bound_coefficient(system, mu, nu, pt["i0"], pt["i1"], pt["f0"], f1, literal)
                b = eval_coefficient(canon, [mixing_delta(system, mu, nu)], pt)
            except OnPoleError:
                continue
            direct = max(direct, relative_deviation(a, b))
        detail[mu] = {"bound": bound.max_deviation, "preserving": pres.max_deviation, "bound_direct": direct,
                      "structural_mismatch": bound.structural_mismatch or pres.structural_mismatch}
        blocks["bound"] = max(blocks["bound"], bound.max_deviation)
        blocks["preserving"] = max(blocks["preserving"], pres.max_deviation)
        blocks["bound_direct"] = max(blocks["bound_direct"], direct)
        ok = ok and bound.equal and pres.equal and direct <= tol
    return {
        "check": "pg",
        "points": points,
        "seed": seed,
        "nu": nu,
        "blocks": blocks,
        "sectors": detail,
        "max_rel_dev": max(blocks.values()),
        "pass": bool(ok),
    }


def unitarity_check(points: int = 1000, seed: int = 0, tol: float = 1e-12) -> dict:
    """|t| = 1 and Lambda single-photon row sums = 1 at random detunings."""
    rng = np.random.default_rng(seed)
    tls = reference_tls()
    lam = reference_lambda()
    mags = 10 ** rng.uniform(-6, 6, size=points) * rng.choice([-1.0, 1.0], size=points)
    t_dev = max(abs(abs(t_tls(tls, tls.omega + x * tls.Gamma)) - 1) for x in mags)
    row_dev = 0.0
    for nu in lam.levels:
        other = 3 - nu
        for x in mags:
            d = x * lam.Gamma
            total = abs(1 + s_lambda(lam, nu, nu, d)) ** 2 + abs(s_lambda(lam, other, nu, d)) ** 2
            row_dev = max(row_dev, abs(total - 1))
    return {
        "check": "unitarity",
        "points": points,
        "seed": seed,
        "max_tls_dev": float(t_dev),
        "max_lambda_row_dev": float(row_dev),
        "max_rel_dev": float(max(t_dev, row_dev)),
        "pass": bool(t_dev <= tol and row_dev <= tol),
    }
