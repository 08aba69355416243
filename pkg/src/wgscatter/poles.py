"""Poles of the frequency-mixing coefficient in the complex f0 plane.

The bound-state part of a two-photon amplitude multiplies the overall
conservation delta.  Eliminating f1 with that delta leaves a sum of
products of factors linear in f0, so every candidate pole is the zero of a
linear form and is located exactly (real parts as rationals).  Candidates
whose Laurent coefficients cancel across terms are removable and dropped;
the cancellation is measured with a trapezoidal contour integral around
each candidate.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .closedform import amp_two_lambda, amp_two_tls_fan, mixing_delta
from .distamp import EPS_POLE, Amplitude, LinearForm, PoleFactor, canonicalize, exact, reduce_deltas
from .model import EmitterSystem

__all__ = [
    "STATE_PRESERVING",
    "STATE_CHANGING",
    "COMMON",
    "Pole",
    "PoleMap",
    "SectorFunction",
    "sector_function",
    "extract_poles",
    "pole_map",
]

STATE_PRESERVING = "state-preserving"
STATE_CHANGING = "state-changing"
COMMON = "common"

MERGE_TOL = 1e-6
REMOVABLE_TOL = 1e-8
CONTOUR_POINTS = 64


@dataclass(frozen=True)
class Pole:
    """A pole of the mixing coefficient.

    ``kind`` is one of ``state-preserving``, ``state-changing``, ``common``
    or empty for poles not yet classified.
    """

    location: complex
    order: int
    kind: str = ""
    origin: str = ""

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("pole order must be >= 1")


@dataclass(frozen=True)
class _Candidate:
    re: Fraction
    im: float
    origin: str

    @property
    def location(self) -> complex:
        return complex(float(self.re), self.im)


class SectorFunction:
    """Bound-state coefficient of one sector as an explicit function of f0.

    Parameters
    ----------
    amp : Amplitude
        Canonical amplitude with the input frequencies bound.
    conservation : LinearForm
        The overall conservation delta (inputs bound).
    variable : str
        Plane variable, ``"f0"`` or ``"f1"``.
    scale : float
        Natural frequency scale used for tolerances.
    sector : str
        Prefix for origin labels.
    """

    def __init__(self, amp: Amplitude, conservation: LinearForm, variable: str = "f0",
                 scale: float | None = None, sector: str = ""):
        self.variable = variable
        self.scale = amp.scale if scale is None else scale
        self.sector = sector
        others = [k for k in conservation.variables if k != variable]
        if variable not in conservation.variables or len(others) != 1:
            raise ValueError(f"conservation delta({conservation}) must relate {variable} to one other output")
        other = others[0]
        a = conservation.coefficient(other)
        solve = (LinearForm.var(other) * a - conservation) * (1 / a)
        mapping = {other: solve}
        self.monomials = []
        target = _normal(conservation)
        for t in amp.terms:
            if len(t.deltas) != 1:
                continue
            if t.deltas[0] != target:
                raise ValueError(f"term with delta({t.deltas[0]}) lacks the conservation delta")
            for m in t.monomials:
                const = complex(m.prefactor)
                linear = []
                for f in m.factors:
                    if not isinstance(f, PoleFactor):
                        raise ValueError("amplitude must be canonical")
                    arg = f.arg.substitute(mapping)
                    extra = [k for k in arg.variables if k != variable]
                    if extra:
                        raise ValueError(f"unbound variables {extra} in factor ({arg})")
                    slope = arg.coefficient(variable)
                    if slope == 0:
                        const *= (float(arg.const) + f.shift) ** (-f.power)
                    else:
                        linear.append((slope, arg.const, f.shift, f.power, f"({f.arg}{_shift_str(f.shift)})"))
                self.monomials.append((const, tuple(linear), m.label))

    def __call__(self, z: complex) -> complex:
        return complex(self.evaluate(np.asarray([z], dtype=complex))[0])

    def evaluate(self, z: np.ndarray, per_monomial: bool = False):
        z = np.asarray(z, dtype=complex)
        parts = []
        for const, linear, _ in self.monomials:
            v = np.full(z.shape, const, dtype=complex)
            for slope, b, shift, power, _ in linear:
                v = v * (float(slope) * z + (float(b) + shift)) ** (-power)
            parts.append(v)
        if per_monomial:
            return parts
        return np.sum(parts, axis=0) if parts else np.zeros(z.shape, dtype=complex)

    def _evaluate_near(self, re: Fraction, im: float, w: np.ndarray) -> list[np.ndarray]:
        """Monomials at ``re + i*im + w`` with the offset of each factor formed exactly."""
        parts = []
        for const, linear, _ in self.monomials:
            v = np.full(w.shape, const, dtype=complex)
            for slope, b, shift, power, _ in linear:
                c_re = float(slope * re + b + exact(shift.real))
                c_im = float(slope) * im + shift.imag
                v = v * (float(slope) * w + complex(c_re, c_im)) ** (-power)
            parts.append(v)
        return parts

    def candidates(self) -> list[_Candidate]:
        out = []
        for const, linear, label in self.monomials:
            for slope, b, shift, power, name in linear:
                if power <= 0:
                    continue
                re = -(b + exact(shift.real)) / slope
                im = -shift.imag / float(slope) + 0.0
                origin = ";".join(x for x in (self.sector, label, name) if x)
                out.append(_Candidate(re, im, origin))
        return out

    def laurent(self, re: Fraction, im: float, radius: float, jmax: int,
                points: int = CONTOUR_POINTS) -> tuple[np.ndarray, np.ndarray]:
        """Principal-part coefficients ``c_{-j}``, j = 1..jmax, and their magnitude scales."""
        w = radius * np.exp(2j * np.pi * np.arange(points) / points)
        parts = self._evaluate_near(re, im, w)
        coeffs = np.zeros(jmax, dtype=complex)
        scales = np.zeros(jmax)
        for j in range(1, jmax + 1):
            weight = w ** j / points
            each = [np.sum(p * weight) for p in parts]
            coeffs[j - 1] = np.sum(each)
            scales[j - 1] = np.sum(np.abs(each))
        return coeffs, scales

    def poles(self, merge_tol: float = MERGE_TOL, removable_tol: float = REMOVABLE_TOL) -> list[Pole]:
        """Genuine poles, sorted by real then imaginary part."""
        groups = _merge_candidates(self.candidates(), merge_tol * self.scale)
        sites = [g[0] for g in groups]
        out = []
        for k, group in enumerate(groups):
            rep = group[0]
            loc = rep.location
            others = [abs(s.location - loc) for j, s in enumerate(sites) if j != k]
            radius = 0.25 * min(others) if others else self.scale
            radius = min(radius, self.scale)
            jmax = self._max_order(rep, merge_tol * self.scale)
            coeffs, scales = self.laurent(rep.re, rep.im, radius, jmax)
            order = 0
            for j in range(jmax, 0, -1):
                if scales[j - 1] > 0 and abs(coeffs[j - 1]) > removable_tol * scales[j - 1]:
                    order = j
                    break
            if order:
                origin = " | ".join(sorted({c.origin for c in group}))
                out.append(Pole(loc, order, "", origin))
        return sorted(out, key=lambda p: (p.location.real, p.location.imag))

    def _max_order(self, rep: _Candidate, tol: float) -> int:
        best = 1
        for _, linear, _ in self.monomials:
            total = 0
            for slope, b, shift, power, _ in linear:
                if power <= 0:
                    continue
                re = -(b + exact(shift.real)) / slope
                im = -shift.imag / float(slope)
                if abs(complex(float(re - rep.re), im - rep.im)) <= tol:
                    total += power
            best = max(best, total)
        return best

    def spectrum_value(self, f: float, genuine: Sequence[Pole] | None = None) -> tuple[float, float | None, str]:
        """``(f, |c(f)|**2, flag)`` on the real axis."""
        if genuine is None:
            genuine = self.real_poles()
        eps = EPS_POLE * self.scale
        near = [abs(p.location.real - f) for p in genuine]
        if near and min(near) < eps:
            return (f, None, "at-resonance")
        w = np.zeros(1, dtype=complex)
        re = Fraction(f)
        blocked = any(
            power > 0 and abs(complex(float(slope * re + b + exact(shift.real)), shift.imag)) < eps
            for _, linear, _ in self.monomials for slope, b, shift, power, _ in linear
        )
        if not blocked:
            v = complex(sum(p[0] for p in self._evaluate_near(re, 0.0, w)))
            return (f, abs(v) ** 2, "")
        radius = min(1e-3 * self.scale, 0.5 * min(near) if near else self.scale)
        w = radius * np.exp(2j * np.pi * np.arange(CONTOUR_POINTS) / CONTOUR_POINTS)
        v = complex(np.mean(np.sum(self._evaluate_near(re, 0.0, w), axis=0)))
        return (f, abs(v) ** 2, "removable")

    def real_poles(self) -> list[Pole]:
        if not hasattr(self, "_real"):
            self._real = [p for p in self.poles() if p.location.imag == 0]
        return self._real


def _shift_str(shift: complex) -> str:
    if shift == 0:
        return ""
    if shift.real == 0:
        return f"{shift.imag:+.17g}j"
    return f"{shift:+}"


def _normal(form: LinearForm) -> LinearForm:
    red = reduce_deltas((form,))
    return red.deltas[0]


def _merge_candidates(cands: Iterable[_Candidate], tol: float) -> list[list[_Candidate]]:
    groups: list[list[_Candidate]] = []
    for c in sorted(cands, key=lambda c: (c.re, c.im, c.origin)):
        for g in groups:
            if abs(g[0].location - c.location) <= tol:
                g.append(c)
                break
        else:
            groups.append([c])
    return groups


def extract_poles(amp: Amplitude, variable: str = "f0", conservation: LinearForm | None = None,
                  scale: float | None = None, sector: str = "") -> list[Pole]:
    """Genuine poles of the bound-state coefficient of ``amp`` in ``variable``.

    ``amp`` must be canonical with its inputs bound.  When ``conservation`` is
    omitted it is taken from the unique single-delta structure.
    """
    if conservation is None:
        singles = {t.deltas[0] for t in amp.terms if len(t.deltas) == 1}
        if len(singles) != 1:
            raise ValueError("amplitude has no unique conservation delta")
        conservation = singles.pop()
    return SectorFunction(amp, conservation, variable, scale, sector).poles()


def sector_function(system: EmitterSystem, nu: int, mu: int, i0: float, i1: float,
                    variable: str = "f0") -> SectorFunction:
    """Bound-state coefficient for ``nu -> mu`` as a function of ``variable``."""
    if system.is_tls:
        amp = amp_two_tls_fan(system, i0, i1)
        mu = nu = 1
    else:
        amp = canonicalize(amp_two_lambda(system, nu, i0, i1)[mu])
    delta = mixing_delta(system, mu, nu).substitute(
        {"i0": LinearForm.constant(i0), "i1": LinearForm.constant(i1)})
    return SectorFunction(amp, delta, variable, system.Gamma, f"mu={mu}")


@dataclass(frozen=True)
class PoleMap:
    """Classified poles of the two-photon mixing coefficient."""

    poles: tuple[Pole, ...]
    i0: float
    i1: float
    nu: int
    system: EmitterSystem
    variable: str = "f0"
    sectors: dict = field(default_factory=dict, compare=False)

    def locations(self, kind: str | None = None) -> list[complex]:
        return [p.location for p in self.poles if kind is None or p.kind == kind]

    def real_poles(self, kind: str | None = None) -> list[float]:
        return [p.location.real for p in self.poles
                if p.location.imag == 0 and (kind is None or p.kind == kind)]

    def counts(self) -> dict[str, int]:
        out = {STATE_PRESERVING: 0, STATE_CHANGING: 0, COMMON: 0}
        for p in self.poles:
            out[p.kind] = out.get(p.kind, 0) + 1
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["re_f", "im_f", "order", "class", "origin"])
        for p in self.poles:
            writer.writerow([f"{p.location.real:.17g}", f"{p.location.imag:.17g}", p.order, p.kind, p.origin])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "variable": self.variable,
            "i0": self.i0,
            "i1": self.i1,
            "nu": self.nu,
            "system": self.system.as_dict(),
            "poles": [
                {"re": p.location.real, "im": p.location.imag, "order": p.order,
                 "class": p.kind, "origin": p.origin}
                for p in self.poles
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def _close_conjugates(poles: list[Pole], tol: float) -> list[Pole]:
    out = list(poles)
    for p in poles:
        if p.location.imag == 0:
            continue
        conj = p.location.conjugate()
        if not any(abs(q.location - conj) <= tol for q in out):
            out.append(Pole(conj, p.order, p.kind, "conjugate of " + p.origin))
    return out


def pole_map(system: EmitterSystem, nu: int | None, i0: float, i1: float, conjugate_closure: bool = True,
             variable: str = "f0") -> PoleMap:
    """Pole map of the two-photon mixing coefficient for initial ground ``nu``.

    Each final-ground sector is analysed separately.  A location found in
    both sectors is ``common``; otherwise it is ``state-preserving``
    (``mu == nu``) or ``state-changing``.  With ``conjugate_closure`` every
    complex pole is accompanied by its conjugate, i.e. the poles of the
    analytically continued squared modulus.
    """
    if nu is None:
        nu = system.levels[0]
    tol = MERGE_TOL * system.Gamma
    per_sector = {}
    for mu in system.levels:
        func = sector_function(system, nu, mu, i0, i1, variable)
        found = func.poles()
        if conjugate_closure:
            found = _close_conjugates(found, tol)
        per_sector[mu] = found
    merged: list[tuple[Pole, set[int]]] = []
    for mu, found in per_sector.items():
        for p in found:
            for k, (q, owners) in enumerate(merged):
                if abs(q.location - p.location) <= tol:
                    owners.add(mu)
                    order = max(q.order, p.order)
                    merged[k] = (Pole(q.location, order, "", q.origin + " | " + p.origin), owners)
                    break
            else:
                merged.append((p, {mu}))
    poles = []
    for p, owners in merged:
        if len(owners) > 1:
            kind = COMMON
        elif nu in owners:
            kind = STATE_PRESERVING
        else:
            kind = STATE_CHANGING
        poles.append(Pole(p.location, p.order, kind, p.origin))
    poles.sort(key=lambda p: (p.location.real, p.location.imag))
    return PoleMap(tuple(poles), i0, i1, nu, system, variable, per_sector)
