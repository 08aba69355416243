"""Closed-form one- and two-photon scattering amplitudes.

Constructors return :class:`~wgscatter.distamp.Amplitude` objects over the
frequency variables ``i, f`` (one photon) or ``i0, i1, f0, f1`` (two
photons).  Passing numeric input frequencies binds those variables exactly.

Lambda-system amplitudes are returned per final ground state as a dict
``{mu: Amplitude}``.  Scattering from ground ``nu`` to ground ``mu`` shifts
the photon energy so that ``f = i + dtilde_nu - dtilde_mu``.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

from .distamp import (
    Amplitude,
    GFactor,
    LinearForm,
    Monomial,
    PoleFactor,
    Resolvent,
    Term,
    canonicalize,
    eval_coefficient,
)
from .model import EmitterSystem, detuning

__all__ = [
    "t_tls",
    "s_lambda",
    "det_form",
    "amp_single_tls",
    "amp_single_tls_raw",
    "amp_single_lambda",
    "amp_two_tls",
    "amp_two_tls_fan",
    "amp_two_lambda",
    "lambda_blocks",
    "mixing_delta",
    "mixing_coefficient",
    "mixing_spectrum",
    "SpectrumPoint",
]

PI = math.pi
V = LinearForm.var


def _require(system: EmitterSystem, tls: bool) -> None:
    if system.is_tls != tls:
        raise ValueError(f"expected a {'TLS' if tls else 'Lambda'} system, got {system.kind}")


def t_tls(system: EmitterSystem, i: float) -> complex:
    """Single-photon transmission ``(D - i*Gamma)/(D + i*Gamma)``, ``D = i - Omega``."""
    d = detuning(system, None, i)
    G = system.Gamma
    return (d - 1j * G) / (d + 1j * G)


def _coupling(system: EmitterSystem, mu: int, nu: int) -> float:
    return system.gamma(mu) * system.gamma(nu)


def _s_numerator(system: EmitterSystem, mu: int, nu: int) -> complex:
    return -2j * (PI * _coupling(system, mu, nu))


def s_lambda(system: EmitterSystem, mu: int, nu: int, delta: float) -> complex:
    """Single-photon scattering kernel ``-2i*pi*g_mu*g_nu/(delta + i*pi*(g1**2 + g2**2))``."""
    return _s_numerator(system, mu, nu) / (delta + 1j * system.Gamma)


def det_form(system: EmitterSystem, var: str | LinearForm, level: int | None = None) -> LinearForm:
    """Symbolic detuning ``var - Omega (+ dtilde_level)`` with exact constants."""
    form = V(var) if isinstance(var, str) else var
    form = form - LinearForm.constant(system.omega)
    if level is not None:
        form = form + LinearForm.constant(system.dtilde(level))
    return form


def _bind(amp: Amplitude, values: Mapping[str, float | None]) -> Amplitude:
    fixed = {k: v for k, v in values.items() if v is not None}
    return amp.bind(fixed) if fixed else amp


def _roles(n: int) -> dict[str, str]:
    if n == 1:
        return {"i": "input", "f": "output"}
    return {"i0": "input", "i1": "input", "f0": "output", "f1": "output"}


def _t_monomials(system: EmitterSystem, var: str) -> list:
    """Factors of ``(D - i*Gamma)/(D + i*Gamma)`` for detuning ``D`` of ``var``."""
    d = det_form(system, var)
    G = system.Gamma
    return [PoleFactor(d, -1j * G, -1), PoleFactor(d, 1j * G, 1)]


def amp_single_tls(system: EmitterSystem, i: float | None = None) -> Amplitude:
    """Canonical single-photon TLS amplitude ``t(i) delta(f - i)``."""
    _require(system, True)
    term = Term.product([V("f") - V("i")], 1.0, _t_monomials(system, "i"), "t(i)")
    return _bind(Amplitude((term,), _roles(1), system.Gamma), {"i": i})


def amp_single_tls_raw(system: EmitterSystem, i: float | None = None) -> Amplitude:
    """Single-photon TLS amplitude in g form, ``(1 - G*g)/(1 + G*g) delta(f - i)``.

    Written as ``1 - 2*G*g/(1 + G*g)``; canonicalization recovers ``t(i)``.
    """
    _require(system, True)
    G = system.Gamma
    d = det_form(system, "i")
    term = Term((V("f") - V("i"),), (
        Monomial(1.0, (), "identity"),
        Monomial(-2 * G, (GFactor(d), Resolvent(d, G)), "scattered"),
    ))
    return _bind(Amplitude((term,), _roles(1), G), {"i": i})


def amp_single_lambda(system: EmitterSystem, nu: int, i: float | None = None) -> dict[int, Amplitude]:
    """Single-photon Lambda amplitudes ``[delta_mu_nu + s_mu_nu] delta(D_f,mu - D_i,nu)``."""
    _require(system, False)
    G = system.Gamma
    out = {}
    for mu in system.levels:
        delta = det_form(system, "f", mu) - det_form(system, "i", nu)
        monos = []
        if mu == nu:
            monos.append(Monomial(1.0, (), "identity"))
        monos.append(Monomial(_s_numerator(system, mu, nu),
                              (PoleFactor(det_form(system, "i", nu), 1j * G, 1),), f"s{mu}{nu}"))
        term = Term((delta,), tuple(monos))
        out[mu] = _bind(Amplitude((term,), _roles(1), G), {"i": i})
    return out


def _perm_deltas() -> list[tuple[LinearForm, LinearForm]]:
    return [
        (V("f0") - V("i0"), V("f1") - V("i1")),
        (V("f0") - V("i1"), V("f1") - V("i0")),
    ]


def mixing_delta(system: EmitterSystem | None = None, mu: int | None = None, nu: int | None = None
                 ) -> LinearForm:
    """Overall energy conservation ``f0 + f1 - i0 - i1 + dtilde_mu - dtilde_nu``."""
    form = V("f0") + V("f1") - V("i0") - V("i1")
    if system is not None and mu is not None and not system.is_tls:
        form = form + LinearForm.constant(system.dtilde(mu)) - LinearForm.constant(system.dtilde(nu))
    return form


def amp_two_tls(system: EmitterSystem, i0: float | None = None, i1: float | None = None) -> Amplitude:
    """Raw two-photon TLS amplitude with g factors, not canonicalized.

    Two non-mixing terms with coefficient ``t(i0) + t(i1) - 1`` and four
    frequency-mixing terms, one per ``(s, s')``.
    """
    _require(system, True)
    G = system.Gamma
    gamma4 = system.gamma_sq ** 2
    terms = []
    for deltas in _perm_deltas():
        monos = (
            Monomial(1.0, tuple(_t_monomials(system, "i0")), "t(i0)"),
            Monomial(1.0, tuple(_t_monomials(system, "i1")), "t(i1)"),
            Monomial(-1.0, (), "identity"),
        )
        terms.append(Term(deltas, monos))
    ins, outs = ("i0", "i1"), ("f0", "f1")
    for s in (0, 1):
        for sp in (0, 1):
            d_in = det_form(system, ins[s])
            d_out = det_form(system, outs[sp ^ 1])
            factors = (
                GFactor(d_in),
                GFactor(V(ins[s]) - V(outs[sp])),
                GFactor(d_out),
                Resolvent(d_in, G),
                Resolvent(d_out, G),
            )
            terms.append(Term.product([mixing_delta()], 2 * PI * gamma4, factors, f"s={s},s'={sp}"))
    return _bind(Amplitude(tuple(terms), _roles(2), G), {"i0": i0, "i1": i1})


def amp_two_tls_fan(system: EmitterSystem, i0: float | None = None, i1: float | None = None) -> Amplitude:
    """Canonical two-photon TLS amplitude.

    ``t(i0) t(i1)`` on both permutation delta structures plus the bound-state
    term ``4*pi*i*gamma**4 / ((D_f0 + iG)(D_f1 + iG)) * (1/(D_i0 + iG) + 1/(D_i1 + iG))``
    on the conservation delta.
    """
    _require(system, True)
    G = system.Gamma
    gamma4 = system.gamma_sq ** 2
    tt = tuple(_t_monomials(system, "i0") + _t_monomials(system, "i1"))
    terms = [Term.product(deltas, 1.0, tt, "t(i0)t(i1)") for deltas in _perm_deltas()]
    out_poles = (PoleFactor(det_form(system, "f0"), 1j * G), PoleFactor(det_form(system, "f1"), 1j * G))
    monos = tuple(
        Monomial(4j * PI * gamma4, out_poles + (PoleFactor(det_form(system, x), 1j * G),), f"bound,{x}")
        for x in ("i0", "i1")
    )
    terms.append(Term((mixing_delta(),), monos))
    return canonicalize(_bind(Amplitude(tuple(terms), _roles(2), G), {"i0": i0, "i1": i1}))


def lambda_blocks(system: EmitterSystem, nu: int, mu: int) -> dict[str, Amplitude]:
    """The three parts of the two-photon Lambda amplitude for ``nu -> mu``.

    ``"N"`` holds the identity and single-scatter terms, ``"pair"`` the
    double-delta terms where each photon scatters once through an
    intermediate ground ``lam``, and ``"bound"`` the single-conservation-delta
    terms.  None is canonicalized.
    """
    _require(system, False)
    G = system.Gamma
    gmn = _coupling(system, mu, nu)
    s_num = _s_numerator(system, mu, nu)
    ins, outs = ("i0", "i1"), ("f0", "f1")
    roles = _roles(2)

    n_terms = []
    if mu == nu:
        n_terms += [Term.product(d, 1.0, (), "identity") for d in _perm_deltas()]
    for s in (0, 1):
        for sp in (0, 1):
            deltas = (
                V(outs[sp ^ 1]) - V(ins[s ^ 1]),
                det_form(system, outs[sp], mu) - det_form(system, ins[s], nu),
            )
            pole = PoleFactor(det_form(system, ins[s], nu), 1j * G)
            n_terms.append(Term.product(deltas, s_num, (pole,), f"single,s={s},s'={sp}"))

    pair_terms = []
    bound_terms = []
    for s in (0, 1):
        for sp in (0, 1):
            d_in = det_form(system, ins[s], nu)
            d_out = det_form(system, outs[sp ^ 1], mu)
            shared = (PoleFactor(d_in, 1j * G), PoleFactor(d_out, 1j * G))
            bound_monos = []
            for lam in system.levels:
                glam = system.gamma(lam) ** 2
                label = f"s={s},s'={sp},lam={lam}"
                deltas = (
                    det_form(system, ins[s ^ 1], lam) - d_out,
                    d_in - det_form(system, outs[sp], lam),
                )
                pair_terms.append(Term.product(deltas, -2 * PI ** 2 * glam * gmn, shared, "pair," + label))
                bound_monos.append(Monomial(
                    -2j * PI * glam * gmn,
                    shared + (PoleFactor(d_in - det_form(system, outs[sp], lam), 0j),),
                    "bound," + label,
                ))
            bound_terms.append(Term((mixing_delta(system, mu, nu),), tuple(bound_monos)))
    return {
        "N": Amplitude(tuple(n_terms), roles, G),
        "pair": Amplitude(tuple(pair_terms), roles, G),
        "bound": Amplitude(tuple(bound_terms), roles, G),
    }


def amp_two_lambda(system: EmitterSystem, nu: int, i0: float | None = None, i1: float | None = None
                   ) -> dict[int, Amplitude]:
    """Raw two-photon Lambda amplitudes per final ground ``mu``."""
    out = {}
    for mu in system.levels:
        blocks = lambda_blocks(system, nu, mu)
        amp = blocks["N"] + blocks["pair"] + blocks["bound"]
        out[mu] = _bind(amp, {"i0": i0, "i1": i1})
    return out


def _sector_amplitude(system: EmitterSystem, nu: int, mu: int, i0: float, i1: float) -> Amplitude:
    if system.is_tls:
        return amp_two_tls_fan(system, i0, i1)
    return canonicalize(amp_two_lambda(system, nu, i0, i1)[mu])


def mixing_coefficient(system: EmitterSystem, nu: int, mu: int, i0: float, i1: float, f0: float
                       ) -> complex:
    """Bound-state (conservation-delta) coefficient at ``f0`` with ``f1`` from conservation."""
    amp = _sector_amplitude(system, nu, mu, i0, i1)
    delta = mixing_delta(system, mu, nu).substitute({"i0": LinearForm.constant(i0),
                                                      "i1": LinearForm.constant(i1)})
    return eval_coefficient(amp, [delta], {"f0": f0})


class SpectrumPoint(tuple):
    """``(f, abs2, flag)``; ``abs2`` is None when ``flag == "at-resonance"``."""

    __slots__ = ()

    def __new__(cls, f: float, abs2: float | None, flag: str = ""):
        return super().__new__(cls, (f, abs2, flag))

    f = property(lambda self: self[0])
    abs2 = property(lambda self: self[1])
    flag = property(lambda self: self[2])


def mixing_spectrum(system: EmitterSystem, nu: int, mu: int, i0: float, i1: float,
                    fgrid: Sequence[float]) -> list[SpectrumPoint]:
    """Squared modulus of the bound-state coefficient along ``f0 = f``.

    Grid points within ``EPS_POLE * Gamma`` of a genuine real pole are
    flagged ``"at-resonance"`` and carry no value.  Removable singularities
    of individual terms are bridged by the contour mean.
    """
    from .poles import sector_function

    if len(fgrid) == 0:
        raise ValueError("empty frequency grid")
    func = sector_function(system, nu, mu, i0, i1)
    return [SpectrumPoint(*func.spectrum_value(f)) for f in fgrid]
