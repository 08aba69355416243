"""Order-by-order Dyson series for one and two photons.

Diagrams are built constructively.  An order-``n`` diagram has ``m = n/2``
absorption-emission interactions.  A single photon is absorbed once,
re-emitted and re-absorbed in ``m - 1`` loops, and finally emitted.  Two
photons either scatter independently (one photon passes untouched) or mix:
photon ``i_s`` is absorbed, loops ``split - 1`` times, is emitted as
``f_s'``, then photon ``i_{s^1}`` is absorbed, loops ``m - split - 1``
times and leaves as ``f_{s'^1}``.  Loops attach only between an absorption
and the emission that follows it; contractions that skip over another
interaction cancel and are never generated.

Each interaction contributes a ``g`` factor of the detuning of the total
absorbed energy.  Lambda-system loops sum over both ground states and fold
into ``gamma1**2 + gamma2**2``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .closedform import det_form, mixing_delta
from .distamp import (
    Amplitude,
    GFactor,
    LinearForm,
    Monomial,
    Term,
    _complete,
    _normalize,
    _subst_factor,
    eval_coefficient,
    principal_value,
    reduce_deltas,
    relative_deviation,
)
from .model import LAMBDA, TLS, EmitterSystem

__all__ = [
    "Diagram",
    "OrderTerm",
    "SeriesReport",
    "ContractionCount",
    "enumerate_diagrams",
    "diagram_amplitude",
    "order_term",
    "partial_sum",
    "count_contractions",
    "collapse",
    "fixture_transcription",
    "fixture_check",
]

PI = math.pi
V = LinearForm.var
INS = ("i0", "i1")
OUTS = ("f0", "f1")


@dataclass(frozen=True)
class Diagram:
    """One time-ordered diagram.

    Attributes
    ----------
    n : int
        Perturbative order (twice the number of interactions).
    photons : int
        1 or 2.
    s, s_out : int
        Index of the first absorbed input and of the first emitted output.
    split : int
        Interactions of the first absorbed photon; equals ``n // 2`` for a
        non-mixing two-photon diagram.
    loops : tuple of int
        Loop count per segment.
    mixing : bool
    branch : int or None
        Intermediate ground state between the two segments (Lambda mixing).
    loop_branches : tuple of int or None
        Explicit ground state of every loop when loops are not folded.
    kind : str
    """

    n: int
    photons: int
    s: int = 0
    s_out: int = 0
    split: int = 0
    loops: tuple[int, ...] = ()
    mixing: bool = False
    branch: int | None = None
    loop_branches: tuple[int, ...] | None = None
    kind: str = TLS

    @property
    def interactions(self) -> int:
        return self.n // 2

    @property
    def species(self) -> str:
        if self.photons == 1:
            return "single"
        return f"mixing-{self.split}" if self.mixing else "non-mixing"

    def to_dict(self) -> dict:
        """Debug form ``{n, p, s, s', m, loops, flags}``; ``m`` is the split."""
        return {
            "n": self.n,
            "p": self.photons,
            "s": self.s,
            "s'": self.s_out,
            "m": self.split,
            "loops": list(self.loops),
            "flags": {
                "kind": self.kind,
                "species": self.species,
                "mixing": self.mixing,
                "non_mixing": self.photons == 2 and not self.mixing,
                "branch": self.branch,
                "loop_branches": None if self.loop_branches is None else list(self.loop_branches),
            },
        }


def _check_order(n: int) -> None:
    if n % 2 or n < 2:
        raise ValueError(f"order must be even and >= 2, got {n}")


def enumerate_diagrams(n: int, p: int, kind: str = TLS, unfold_loops: bool = False) -> list[Diagram]:
    """All surviving order-``n`` diagrams for ``p`` photons.

    With ``unfold_loops`` each Lambda loop carries an explicit ground-state
    label instead of the folded coupling sum.
    """
    _check_order(n)
    if p not in (1, 2):
        raise ValueError("only one or two photons are supported")
    m = n // 2
    levels = (1, 2) if kind == LAMBDA else (1,)

    def labelings(count: int):
        if unfold_loops and kind == LAMBDA:
            return list(itertools.product(levels, repeat=count))
        return [None]

    out = []
    if p == 1:
        for lb in labelings(m - 1):
            out.append(Diagram(n, 1, loops=(m - 1,), loop_branches=lb, kind=kind))
        return out
    for s, sp in itertools.product((0, 1), repeat=2):
        for lb in labelings(m - 1):
            out.append(Diagram(n, 2, s, sp, m, (m - 1,), False, None, lb, kind))
    for split in range(1, m):
        for s, sp in itertools.product((0, 1), repeat=2):
            branches = levels if kind == LAMBDA else (None,)
            for lam in branches:
                for lb in labelings(m - 2):
                    out.append(Diagram(n, 2, s, sp, split, (split - 1, m - split - 1), True, lam, lb, kind))
    return out


def _loop_weight(system: EmitterSystem, d: Diagram, count: int) -> float:
    if d.loop_branches is None:
        return system.gamma_sq ** count
    if len(d.loop_branches) != count:
        raise ValueError("loop labels do not match the loop count")
    return math.prod(system.gamma(lam) ** 2 for lam in d.loop_branches)


def diagram_amplitude(d: Diagram, system: EmitterSystem, nu: int | None = None, mu: int | None = None
                      ) -> Term:
    """Term contributed by diagram ``d`` (g factors unexpanded)."""
    _check_order(d.n)
    m = d.interactions
    lam_sys = not system.is_tls
    if lam_sys and (nu is None or mu is None):
        raise ValueError("Lambda diagrams need initial and final ground states")
    if not lam_sys:
        nu = mu = None
    ends = system.gamma(mu) * system.gamma(nu) if lam_sys else system.gamma_sq
    label = f"n={d.n},s={d.s},s'={d.s_out},split={d.split}"

    if d.photons == 1:
        if sum(d.loops) != m - 1:
            raise ValueError("malformed single-photon diagram")
        pref = 2 * (-PI) ** m * ends * _loop_weight(system, d, m - 1)
        delta = det_form(system, "f", mu) - det_form(system, "i", nu)
        return Term.product([delta], pref, [GFactor(det_form(system, "i", nu), m)], label)

    s, sp = d.s, d.s_out
    d_in = det_form(system, INS[s], nu)
    if not d.mixing:
        if d.split != m or d.loops != (m - 1,):
            raise ValueError("malformed non-mixing diagram")
        pref = 2 * (-PI) ** m * ends * _loop_weight(system, d, m - 1)
        deltas = (det_form(system, OUTS[sp], mu) - d_in, V(OUTS[sp ^ 1]) - V(INS[s ^ 1]))
        return Term.product(deltas, pref, [GFactor(d_in, m)], label)

    j1, j2 = d.split, m - d.split
    if j1 < 1 or j2 < 1 or d.loops != (j1 - 1, j2 - 1):
        raise ValueError("malformed mixing diagram")
    lam = d.branch if lam_sys else None
    if lam_sys and lam not in system.levels:
        raise ValueError("Lambda mixing diagram needs an intermediate ground state")
    bridge = system.gamma(lam) ** 2 if lam_sys else system.gamma_sq
    pref = (2 / PI) * (-PI) ** m * ends * bridge * _loop_weight(system, d, m - 2)
    middle = d_in - det_form(system, OUTS[sp], lam)
    second = middle + det_form(system, INS[s ^ 1], lam)
    factors = [GFactor(d_in, j1), GFactor(middle, 1), GFactor(second, j2)]
    delta = mixing_delta(system, mu, nu) if lam_sys else mixing_delta()
    return Term.product([delta], pref, factors, label + (f",lam={lam}" if lam_sys else ""))


@dataclass(frozen=True)
class OrderTerm:
    n: int
    amplitude: Amplitude


def _identity(p: int, system: EmitterSystem, nu: int | None, mu: int | None) -> list[Term]:
    if not system.is_tls and nu != mu:
        return []
    if p == 1:
        return [Term.product([V("f") - V("i")], 1.0, (), "identity")]
    return [
        Term.product([V("f0") - V("i0"), V("f1") - V("i1")], 1.0, (), "identity"),
        Term.product([V("f0") - V("i1"), V("f1") - V("i0")], 1.0, (), "identity"),
    ]


def order_term(n: int, p: int, system: EmitterSystem, nu: int | None = None, mu: int | None = None,
               unfold_loops: bool = False) -> OrderTerm:
    """Sum of all order-``n`` diagrams; ``n = 0`` gives the identity."""
    roles = {"i": "input", "f": "output"} if p == 1 else {
        "i0": "input", "i1": "input", "f0": "output", "f1": "output"}
    if system.is_tls:
        nu = mu = None
    elif nu is None or mu is None:
        raise ValueError("Lambda order terms need nu and mu")
    if n == 0:
        terms = _identity(p, system, nu, mu)
    elif n % 2:
        terms = []
    else:
        terms = [diagram_amplitude(d, system, nu, mu)
                 for d in enumerate_diagrams(n, p, system.kind, unfold_loops)]
    return OrderTerm(n, Amplitude(tuple(terms), roles, system.Gamma))


@dataclass(frozen=True)
class SeriesReport:
    """Partial sums ``S_n`` (orders 0..n) for n = 2, 4, ..., N_max.

    ``ratio`` is the expansion parameter ``pi*gamma**2/|Delta|`` at the
    worst relevant detuning; ``estimated_ratio`` is ``|T_n/T_{n-2}|`` from
    the last two nonzero order terms.
    """

    orders: tuple[int, ...]
    terms: tuple[complex, ...]
    sums: tuple[complex, ...]
    ratio: float
    divergent: bool
    converged_at: int | None
    estimated_ratio: float | None

    @property
    def value(self) -> complex:
        return self.sums[-1]


def _default_deltas(p: int, system: EmitterSystem, nu, mu) -> list[LinearForm]:
    if p == 1:
        return [det_form(system, "f", mu) - det_form(system, "i", nu)]
    return [mixing_delta(system, mu, nu)]


def series_ratio(p: int, system: EmitterSystem, point: Mapping[str, float], nu=None, mu=None) -> float:
    """``pi*gamma**2 / |Delta|`` at the smallest relevant detuning."""
    G = system.Gamma
    if p == 1:
        dets = [det_form(system, "i", nu).evaluate(point)]
    else:
        red = reduce_deltas(tuple(_default_deltas(2, system, nu, mu)))
        values = _complete(red, point, G)
        dets = [det_form(system, x, nu).evaluate(values) for x in INS]
        dets += [det_form(system, x, mu).evaluate(values) for x in OUTS]
    smallest = min(abs(x) for x in dets)
    return math.inf if smallest == 0 else G / smallest


def partial_sum(n_max: int, p: int, system: EmitterSystem, point: Mapping[str, float],
                deltaset: Sequence | None = None, nu: int | None = None, mu: int | None = None,
                rtol: float = 1e-12) -> SeriesReport:
    """Partial sums of the coefficient of ``deltaset`` up to order ``n_max``.

    The default delta structure is the single-photon delta (``p = 1``) or
    the overall conservation delta (``p = 2``).
    """
    if n_max < 2 or n_max % 2:
        raise ValueError("n_max must be even and >= 2")
    if system.is_tls:
        nu = mu = None
    deltas = list(deltaset) if deltaset is not None else _default_deltas(p, system, nu, mu)
    r = series_ratio(p, system, point, nu, mu)
    total = eval_coefficient(order_term(0, p, system, nu, mu).amplitude, deltas, point)
    orders, terms, sums = [], [], []
    converged = None
    for n in range(2, n_max + 1, 2):
        t = eval_coefficient(order_term(n, p, system, nu, mu).amplitude, deltas, point)
        total += t
        orders.append(n)
        terms.append(t)
        sums.append(total)
        if converged is None and len(sums) > 1 and total != 0 and abs(t) <= rtol * abs(total):
            converged = n
    est = None
    nonzero = [t for t in terms if t != 0]
    if len(nonzero) >= 2:
        est = abs(nonzero[-1] / nonzero[-2])
    return SeriesReport(tuple(orders), tuple(terms), tuple(sums), r, r >= 1, converged, est)


@dataclass(frozen=True)
class ContractionCount:
    raw: int
    surviving: int
    labels: tuple[tuple[int, int, int, bool], ...]


def count_contractions(n: int) -> ContractionCount:
    """Brute-force count of two-photon Wick contractions at order ``n``.

    Interactions alternate absorption, emission.  An absorption takes an
    input photon or a photon emitted earlier; unused emissions create the
    outputs and an unabsorbed input passes straight to the remaining
    output.  A contraction survives when every internal photon is
    re-absorbed at the very next absorption.  Survivors are labelled
    ``(s, s', split, mixing)`` for comparison with the constructive
    enumeration.
    """
    _check_order(n)
    m = n // 2
    raw = 0
    labels = []

    def walk(k, used_in, used_em, sources):
        nonlocal raw
        if k == m:
            ext = [j for j in range(m) if j not in used_em]
            if len(ext) != len(used_in):
                return
            for outs in itertools.permutations(range(2), len(ext)):
                raw += 1
                if all(src[1] == j - 1 for j, src in enumerate(sources) if isinstance(src, tuple)):
                    s = sources[0]
                    mixing = len(ext) == 2
                    split = ext[0] + 1 if mixing else m
                    labels.append((s, outs[0], split, mixing))
            return
        options = [x for x in (0, 1) if x not in used_in]
        options += [("em", j) for j in range(k) if j not in used_em]
        for o in options:
            if isinstance(o, tuple):
                walk(k + 1, used_in, used_em | {o[1]}, sources + [o])
            else:
                walk(k + 1, used_in | {o}, used_em, sources + [o])

    walk(0, frozenset(), frozenset(), [])
    return ContractionCount(raw, len(labels), tuple(sorted(labels)))


def collapse(term: Term) -> Term:
    """Substitute a term's delta supports into its factors without expanding g."""
    red = reduce_deltas(term.deltas)
    if red is None:
        raise ValueError("term vanishes identically")
    mapping = red.mapping
    monos = []
    for m in term.monomials:
        mono = _normalize(Monomial(m.prefactor * float(red.jacobian),
                                   tuple(_subst_factor(f, mapping) for f in m.factors), m.label))
        if mono is not None:
            monos.append(mono)
    return Term(red.deltas, tuple(monos))


def fixture_transcription(system: EmitterSystem) -> dict[tuple[int, int, int], Term]:
    """The order-8 two-photon TLS terms written out by hand.

    Keys are ``(s, s', split)``; ``split == 4`` marks the non-mixing term.
    """
    g2 = system.gamma_sq
    out = {}
    for s, sp in itertools.product((0, 1), repeat=2):
        di = det_form(system, INS[s])
        df = det_form(system, OUTS[sp ^ 1])
        mid = V(INS[s]) - V(OUTS[sp])
        out[(s, sp, 4)] = Term.product(
            [V(OUTS[sp]) - V(INS[s]), V(OUTS[sp ^ 1]) - V(INS[s ^ 1])],
            2 * PI ** 4 * g2 ** 4, [GFactor(di, 4)])
        for j in (3, 2, 1):
            out[(s, sp, j)] = Term.product(
                [V("f0") + V("f1") - V("i0") - V("i1")],
                2 * PI ** 3 * g2 ** 4, [GFactor(di, j), GFactor(mid, 1), GFactor(df, 4 - j)])
    return out


def _offshell_point(system: EmitterSystem, rng: np.random.Generator) -> dict[str, float]:
    G = system.Gamma
    while True:
        x = rng.uniform(-30, 30, size=3)
        point = {"i0": system.omega + G * x[0], "i1": system.omega + G * x[1], "f0": system.omega + G * x[2]}
        point["f1"] = point["i0"] + point["i1"] - point["f0"]
        dets = [point[k] - system.omega for k in ("i0", "i1", "f0", "f1")]
        diffs = [point[a] - point[b] for a in INS for b in OUTS]
        if min(abs(v) for v in dets + diffs) > 0.05 * G:
            return point


def fixture_check(system: EmitterSystem | None = None, points: int = 50, seed: int = 0,
                  tol: float = 1e-12) -> dict:
    """Compare the order-8 enumeration with the hand transcription.

    Checks the species count, the surviving and raw contraction counts, a
    structural match per term after substitution on the delta support, and
    a numeric match of principal values on random off-shell points.
    """
    if system is None:
        system = EmitterSystem.tls(2e15, 2e4)
    diagrams = enumerate_diagrams(8, 2, TLS)
    counts = count_contractions(8)
    enumerated = sorted((d.s, d.s_out, d.split, d.mixing) for d in diagrams)
    reference = fixture_transcription(system)
    rng = np.random.default_rng(seed)
    grid = [_offshell_point(system, rng) for _ in range(points)]

    species: dict[str, dict] = {}
    for d in diagrams:
        term = diagram_amplitude(d, system)
        ref = reference[(d.s, d.s_out, d.split)]
        a, b = collapse(term), collapse(ref)
        structural = (a.deltas == b.deltas and len(a.monomials) == len(b.monomials) == 1
                      and a.monomials[0].factors == b.monomials[0].factors
                      and relative_deviation(a.monomials[0].prefactor, b.monomials[0].prefactor) <= 1e-15)
        worst = max(relative_deviation(principal_value(term, pt, system.Gamma),
                                       principal_value(ref, pt, system.Gamma)) for pt in grid)
        entry = species.setdefault(d.species, {"terms": 0, "structural": True, "max_rel_dev": 0.0})
        entry["terms"] += 1
        entry["structural"] = entry["structural"] and structural
        entry["max_rel_dev"] = max(entry["max_rel_dev"], worst)
    for entry in species.values():
        entry["pass"] = entry["structural"] and entry["max_rel_dev"] <= tol
    ok = (len(species) == 4 and len(diagrams) == 16 and counts.surviving == 16 and counts.raw == 32
          and enumerated == list(counts.labels) and all(e["pass"] for e in species.values()))
    return {
        "check": "a8",
        "points": points,
        "species": len(species),
        "surviving": len(diagrams),
        "raw_contractions": counts.raw,
        "surviving_contractions": counts.surviving,
        "enumeration_matches_contractions": enumerated == list(counts.labels),
        "per_species": species,
        "max_rel_dev": max(e["max_rel_dev"] for e in species.values()),
        "pass": ok,
    }
