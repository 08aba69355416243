"""Exact algebra of distributional amplitudes.

An amplitude is a finite sum of terms.  Each term is a product of Dirac
deltas of linear forms in the frequency variables, multiplied by a smooth
coefficient.  The coefficient is a sum of monomials, each a complex
prefactor times a product of factors:

``GFactor``
    ``g(L)**p`` with ``g(L) = pi*delta(L) + i/L``.
``Resolvent``
    ``(1 + c*g(L))**-p``.  On the support of ``delta(L)`` the product
    ``L*delta(L)`` vanishes, so the resolvent equals ``(L/(L + i*c))**p``.
``PoleFactor``
    ``(L + shift)**-p`` with a complex constant ``shift``.  A negative power
    places the factor in the numerator.

Linear forms have exact rational coefficients and an exact rational
constant, so delta supports, substitutions and pole locations are computed
without rounding.  Deltas are never evaluated numerically: the numeric
output of an amplitude is always the coefficient attached to one delta
structure.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Any, Iterable, Iterator, Mapping, Sequence

__all__ = [
    "EPS_POLE",
    "DistributionError",
    "IllDefinedDistribution",
    "PinchSingularity",
    "OnPoleError",
    "ConstraintViolation",
    "LinearForm",
    "GFactor",
    "Resolvent",
    "PoleFactor",
    "Monomial",
    "Term",
    "Amplitude",
    "Reduction",
    "EquivalenceReport",
    "exact",
    "reduce_deltas",
    "expand_resolvents",
    "expand_g",
    "canonicalize",
    "eval_coefficient",
    "principal_value",
    "equal_on_grid",
    "to_json",
    "from_json",
    "format_amplitude",
]

#: Relative distance (in units of the amplitude scale) below which a
#: denominator counts as vanishing.
EPS_POLE = 1e-9


class DistributionError(ValueError):
    """Base class for errors in distribution algebra."""


class IllDefinedDistribution(DistributionError):
    """A product such as delta(L)**2 or delta(0) appeared."""


class PinchSingularity(DistributionError):
    """A pole factor became identically zero on a delta support."""


class OnPoleError(DistributionError):
    """A coefficient was requested at (or numerically on) one of its poles."""


class ConstraintViolation(DistributionError):
    """An assignment does not satisfy the requested delta structure."""


def exact(x: Any) -> Fraction:
    """Exact rational value of an int, float or Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, bool):
        raise TypeError("booleans are not numbers here")
    if isinstance(x, int):
        return Fraction(x)
    x = float(x)
    if not math.isfinite(x):
        raise ValueError("non-finite constant in a linear form")
    return Fraction(x)


_NAME = re.compile(r"([A-Za-z_]+)(\d*)")


def variable_rank(name: str) -> tuple:
    """Elimination order: outputs ``f*`` first, then inputs ``i*``, then the rest."""
    m = _NAME.fullmatch(name)
    head, idx = (m.groups() if m else (name, ""))
    group = {"f": 0, "i": 1}.get(head, 2)
    return (group, head, int(idx) if idx else -1, name)


def _fmt_fraction(q: Fraction) -> str:
    return str(q.numerator) if q.denominator == 1 else f"{q.numerator}/{q.denominator}"


@dataclass(frozen=True)
class LinearForm:
    """``sum_k c_k * x_k + const`` with exact rational coefficients.

    Build instances with :meth:`build`, :meth:`var` or :meth:`constant`;
    they keep the coefficient list sorted in elimination order and free of
    zeros, so structural equality is value equality.
    """

    coeffs: tuple[tuple[str, Fraction], ...] = ()
    const: Fraction = Fraction(0)

    @classmethod
    def build(cls, coeffs: Mapping[str, Any] | Iterable = (), const: Any = 0) -> "LinearForm":
        items = coeffs.items() if isinstance(coeffs, Mapping) else coeffs
        acc: dict[str, Fraction] = {}
        for name, c in items:
            acc[name] = acc.get(name, Fraction(0)) + exact(c)
        ordered = tuple(sorted(((k, v) for k, v in acc.items() if v != 0),
                               key=lambda kv: variable_rank(kv[0])))
        return cls(ordered, exact(const))

    @classmethod
    def var(cls, name: str) -> "LinearForm":
        return cls(((name, Fraction(1)),), Fraction(0))

    @classmethod
    def constant(cls, value: Any) -> "LinearForm":
        return cls((), exact(value))

    @staticmethod
    def _coerce(other: Any) -> "LinearForm":
        if isinstance(other, LinearForm):
            return other
        return LinearForm.constant(other)

    def __add__(self, other: Any) -> "LinearForm":
        other = self._coerce(other)
        return LinearForm.build(self.coeffs + other.coeffs, self.const + other.const)

    __radd__ = __add__

    def __neg__(self) -> "LinearForm":
        return LinearForm(tuple((k, -v) for k, v in self.coeffs), -self.const)

    def __sub__(self, other: Any) -> "LinearForm":
        return self + (-self._coerce(other))

    def __rsub__(self, other: Any) -> "LinearForm":
        return self._coerce(other) - self

    def __mul__(self, scalar: Any) -> "LinearForm":
        q = exact(scalar)
        if q == 0:
            return LinearForm()
        return LinearForm(tuple((k, v * q) for k, v in self.coeffs), self.const * q)

    __rmul__ = __mul__

    @property
    def variables(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.coeffs)

    @property
    def is_constant(self) -> bool:
        return not self.coeffs

    def coefficient(self, name: str) -> Fraction:
        for k, v in self.coeffs:
            if k == name:
                return v
        return Fraction(0)

    def substitute(self, mapping: Mapping[str, "LinearForm"]) -> "LinearForm":
        """Replace variables by linear forms."""
        if not any(k in mapping for k, _ in self.coeffs):
            return self
        keep = []
        out = LinearForm.constant(self.const)
        for k, v in self.coeffs:
            if k in mapping:
                out = out + mapping[k] * v
            else:
                keep.append((k, v))
        return out + LinearForm.build(keep)

    def evaluate(self, values: Mapping[str, float]) -> float:
        """Numeric value, summed with :func:`math.fsum` to limit cancellation."""
        try:
            parts = [float(v) * values[k] for k, v in self.coeffs]
        except KeyError as exc:
            raise KeyError(f"no value for variable {exc.args[0]!r} in {self}") from None
        parts.append(float(self.const))
        return math.fsum(parts)

    def evaluate_exact(self, values: Mapping[str, Fraction]) -> Fraction:
        return sum((v * values[k] for k, v in self.coeffs), self.const)

    def __str__(self) -> str:
        chunks = []
        for k, v in self.coeffs:
            sign = "-" if v < 0 else "+"
            mag = abs(v)
            body = k if mag == 1 else f"{_fmt_fraction(mag)}*{k}"
            chunks.append(sign + body)
        if self.const != 0 or not chunks:
            sign = "-" if self.const < 0 else "+"
            chunks.append(sign + _fmt_fraction(abs(self.const)))
        text = "".join(chunks)
        return text[1:] if text.startswith("+") else text

    def __repr__(self) -> str:
        return f"LinearForm({str(self)!r})"

    @classmethod
    def parse(cls, text: str) -> "LinearForm":
        """Inverse of ``str``: accepts strings such as ``"f0+f1-i0-2*i1+3/2"``."""
        s = text.replace(" ", "")
        if not s:
            raise ValueError("empty linear form")
        chunks = re.findall(r"[+-]?[^+-]+", s)
        if "".join(chunks) != s:
            raise ValueError(f"cannot parse linear form {text!r}")
        coeffs: list[tuple[str, Fraction]] = []
        const = Fraction(0)
        for chunk in chunks:
            sign = -1 if chunk.startswith("-") else 1
            body = chunk.lstrip("+-")
            m = re.fullmatch(r"(?:(\d+(?:/\d+)?)\*)?([A-Za-z_]\w*)|(\d+(?:/\d+)?)", body)
            if not m:
                raise ValueError(f"cannot parse term {chunk!r} in {text!r}")
            num, name, bare = m.groups()
            if name is not None:
                coeffs.append((name, sign * Fraction(num or 1)))
            else:
                const += sign * Fraction(bare)
        return cls.build(coeffs, const)


def _as_form(x: Any) -> LinearForm:
    return x if isinstance(x, LinearForm) else LinearForm.parse(x) if isinstance(x, str) else LinearForm.constant(x)


@dataclass(frozen=True)
class GFactor:
    """``g(arg)**power`` with ``g(L) = pi*delta(L) + i/L``."""

    arg: LinearForm
    power: int = 1

    def __post_init__(self):
        if self.power < 1:
            raise ValueError("GFactor power must be >= 1")


@dataclass(frozen=True)
class Resolvent:
    """``(1 + strength*g(arg))**-power``."""

    arg: LinearForm
    strength: float
    power: int = 1

    def __post_init__(self):
        if self.power < 1:
            raise ValueError("Resolvent power must be >= 1")


@dataclass(frozen=True)
class PoleFactor:
    """``(arg + shift)**-power``; negative powers are numerator factors."""

    arg: LinearForm
    shift: complex = 0j
    power: int = 1

    def __post_init__(self):
        object.__setattr__(self, "shift", complex(self.shift))

    def value(self, values: Mapping[str, float]) -> complex:
        return self.arg.evaluate(values) + self.shift


def _factor_key(f) -> tuple:
    kind = {GFactor: 0, Resolvent: 1, PoleFactor: 2}[type(f)]
    shift = getattr(f, "shift", 0j)
    strength = getattr(f, "strength", 0.0)
    return (kind, str(f.arg), shift.real, shift.imag, strength, f.power)


def _factor_str(f) -> str:
    if isinstance(f, GFactor):
        return f"g({f.arg})" + (f"^{f.power}" if f.power != 1 else "")
    if isinstance(f, Resolvent):
        return f"(1{f.strength:+.17g}*g({f.arg}))^-{f.power}"
    shift = ""
    if f.shift:
        shift = f"{f.shift.real:+.17g}" if f.shift.imag == 0 else f"{f.shift.real:+.17g}{f.shift.imag:+.17g}j"
        if f.shift.real == 0 and f.shift.imag != 0:
            shift = f"{f.shift.imag:+.17g}j"
    return f"({f.arg}{shift})^{-f.power}"


@dataclass(frozen=True)
class Monomial:
    """``prefactor * prod(factors)``; ``label`` records where it came from."""

    prefactor: complex
    factors: tuple = ()
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "prefactor", complex(self.prefactor))
        object.__setattr__(self, "factors", tuple(self.factors))

    def __str__(self) -> str:
        p = self.prefactor
        parts = [f"({p.real:.17g}{p.imag:+.17g}j)"]
        parts += [_factor_str(f) for f in self.factors]
        return "*".join(parts)


@dataclass(frozen=True)
class Term:
    """Product of deltas times a coefficient given as a sum of monomials."""

    deltas: tuple[LinearForm, ...]
    monomials: tuple[Monomial, ...]

    def __post_init__(self):
        deltas = tuple(_as_form(d) for d in self.deltas)
        for d in deltas:
            if d.is_constant and d.const == 0:
                raise IllDefinedDistribution("delta(0) is divergent")
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "monomials", tuple(self.monomials))

    @classmethod
    def product(cls, deltas: Sequence, prefactor: complex, factors: Sequence = (),
                label: str = "") -> "Term":
        return cls(tuple(deltas), (Monomial(prefactor, tuple(factors), label),))

    @property
    def gfactors(self) -> list:
        return [f for m in self.monomials for f in m.factors if isinstance(f, (GFactor, Resolvent))]


@dataclass(frozen=True)
class Amplitude:
    """Sum of terms with a symbol table of variable roles.

    ``scale`` is the natural frequency scale (Gamma) used for on-pole
    detection.
    """

    terms: tuple[Term, ...]
    roles: tuple[tuple[str, str], ...] = ()
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        roles = self.roles.items() if isinstance(self.roles, Mapping) else self.roles
        object.__setattr__(self, "roles", tuple(sorted(roles, key=lambda kv: variable_rank(kv[0]))))

    @property
    def symbols(self) -> dict[str, str]:
        return dict(self.roles)

    def structures(self) -> list[tuple[LinearForm, ...]]:
        seen = []
        for t in self.terms:
            if t.deltas not in seen:
                seen.append(t.deltas)
        return seen

    def term_for(self, deltas: Sequence) -> Term | None:
        target = reduce_deltas(tuple(_as_form(d) for d in deltas))
        if target is None:
            return None
        for t in self.terms:
            if t.deltas == target.deltas:
                return t
        return None

    @property
    def is_canonical(self) -> bool:
        return canonicalize(self) == self

    def __add__(self, other: "Amplitude") -> "Amplitude":
        roles = dict(self.roles)
        roles.update(other.roles)
        return Amplitude(self.terms + other.terms, roles, self.scale)

    def bind(self, values: Mapping[str, float]) -> "Amplitude":
        """Substitute numeric values (exactly) for some variables."""
        mapping = {k: LinearForm.constant(v) for k, v in values.items()}
        terms = []
        for t in self.terms:
            deltas = tuple(d.substitute(mapping) for d in t.deltas)
            monos = tuple(
                Monomial(m.prefactor, tuple(_subst_factor(f, mapping) for f in m.factors), m.label)
                for m in t.monomials
            )
            terms.append(Term(deltas, monos))
        roles = {k: r for k, r in self.roles if k not in values}
        return Amplitude(tuple(terms), roles, self.scale)


def _subst_factor(f, mapping):
    arg = f.arg.substitute(mapping)
    if arg is f.arg:
        return f
    if isinstance(f, GFactor):
        return GFactor(arg, f.power)
    if isinstance(f, Resolvent):
        return Resolvent(arg, f.strength, f.power)
    return PoleFactor(arg, f.shift, f.power)


@dataclass(frozen=True)
class Reduction:
    """Reduced row echelon form of a delta product.

    ``delta(original) = jacobian * delta(deltas)``; ``solution`` expresses
    each pivot variable through the free variables.
    """

    deltas: tuple[LinearForm, ...]
    jacobian: Fraction
    solution: tuple[tuple[str, LinearForm], ...]

    @property
    def pivots(self) -> tuple[str, ...]:
        return tuple(k for k, _ in self.solution)

    @property
    def mapping(self) -> dict[str, LinearForm]:
        return dict(self.solution)


@lru_cache(maxsize=65536)
def reduce_deltas(deltas: tuple[LinearForm, ...]) -> Reduction | None:
    """Exact elimination on a product of deltas.

    Returns None when the product vanishes identically (a row reduces to a
    nonzero constant).  Raises :class:`IllDefinedDistribution` for dependent
    rows such as ``delta(L)**2``.
    """
    rows = [(dict(d.coeffs), d.const) for d in deltas]
    names = sorted({k for d in deltas for k in d.variables}, key=variable_rank)
    jac = Fraction(1)
    pivots: list[str] = []
    r = 0
    for v in names:
        k = next((j for j in range(r, len(rows)) if rows[j][0].get(v, 0) != 0), None)
        if k is None:
            continue
        rows[r], rows[k] = rows[k], rows[r]
        coeffs, const = rows[r]
        a = coeffs[v]
        jac /= abs(a)
        coeffs = {n: c / a for n, c in coeffs.items()}
        const = const / a
        rows[r] = (coeffs, const)
        for j in range(len(rows)):
            c = rows[j][0].get(v, 0)
            if j == r or c == 0:
                continue
            oc, ok = rows[j]
            new = dict(oc)
            for n, x in coeffs.items():
                new[n] = new.get(n, 0) - c * x
            rows[j] = ({n: x for n, x in new.items() if x != 0}, ok - c * const)
        pivots.append(v)
        r += 1
    leftover = rows[r:]
    if any(const == 0 for _, const in leftover):
        raise IllDefinedDistribution(
            "dependent delta arguments (delta(L)**2 or delta(0)) in "
            + ", ".join(f"delta({d})" for d in deltas)
        )
    if leftover:
        return None
    forms = tuple(LinearForm.build(c, k) for c, k in rows[:r])
    solution = tuple((v, LinearForm.var(v) - form) for v, form in zip(pivots, forms))
    return Reduction(forms, jac, solution)


def expand_resolvents(mono: Monomial) -> Monomial:
    """Rewrite every resolvent as ``L**p * (L + i*c)**-p``."""
    factors = []
    for f in mono.factors:
        if isinstance(f, Resolvent):
            factors.append(PoleFactor(f.arg, 0j, -f.power))
            factors.append(PoleFactor(f.arg, 1j * f.strength, f.power))
        else:
            factors.append(f)
    return Monomial(mono.prefactor, tuple(factors), mono.label)


def _normalize(mono: Monomial) -> Monomial | None:
    """Fold constant factors into the prefactor and merge equal factors.

    Returns None for a monomial that vanishes identically.
    """
    pref = mono.prefactor
    gpow: dict[LinearForm, int] = {}
    ppow: dict[tuple[LinearForm, complex], int] = {}
    others = []
    for f in mono.factors:
        if isinstance(f, GFactor):
            if f.arg.is_constant:
                c = f.arg.const
                if c == 0:
                    raise IllDefinedDistribution("g(0) is divergent")
                pref *= (1j / float(c)) ** f.power
            else:
                gpow[f.arg] = gpow.get(f.arg, 0) + f.power
        elif isinstance(f, Resolvent):
            if f.arg.is_constant:
                c = float(f.arg.const)
                if c == 0:
                    return None
                pref *= (c / (c + 1j * f.strength)) ** f.power
            else:
                others.append(f)
        else:
            key = (f.arg, f.shift)
            ppow[key] = ppow.get(key, 0) + f.power
    factors = [GFactor(a, p) for a, p in gpow.items()]
    ppow = {k: p for k, p in ppow.items() if p != 0}
    zeros = [(k, p) for k, p in ppow.items() if k[0].is_constant and float(k[0].const) + k[1] == 0]
    # a vanishing numerator wins: L*delta(L) = 0 takes precedence over 1/L
    if any(p < 0 for _, p in zeros):
        return None
    if zeros:
        (arg, shift), _ = zeros[0]
        raise PinchSingularity(
            f"factor ({arg}{shift:+}) vanishes identically on the delta support"
            + (f" in monomial {mono.label!r}" if mono.label else "")
        )
    for (arg, shift), p in ppow.items():
        if arg.is_constant:
            pref *= (float(arg.const) + shift) ** (-p)
        else:
            factors.append(PoleFactor(arg, shift, p))
    factors += others
    if pref == 0:
        return None
    return Monomial(pref, tuple(sorted(factors, key=_factor_key)), mono.label)


def _substitute(mono: Monomial, mapping: Mapping[str, LinearForm]) -> Monomial | None:
    if not mapping:
        return _normalize(mono)
    return _normalize(Monomial(mono.prefactor, tuple(_subst_factor(f, mapping) for f in mono.factors),
                               mono.label))


def _branches(deltas: tuple[LinearForm, ...], mono: Monomial, max_deltas: int | None = None
              ) -> Iterator[tuple[tuple[LinearForm, ...], Monomial]]:
    """Binomial expansion of every g(L)**p in ``mono``.

    Yields (deltas, monomial-without-g) pairs.  ``max_deltas`` caps how many
    delta factors a single g power may contribute.
    """
    mono = _normalize(expand_resolvents(mono))
    if mono is None:
        return
    gs = [f for f in mono.factors if isinstance(f, GFactor)]
    rest = tuple(f for f in mono.factors if not isinstance(f, GFactor))
    choices = [range(0, (g.power if max_deltas is None else min(g.power, max_deltas)) + 1) for g in gs]
    for pick in product(*choices):
        mult = complex(mono.prefactor)
        extra = []
        factors = list(rest)
        for g, c in zip(gs, pick):
            mult *= math.comb(g.power, c) * math.pi ** c * 1j ** (g.power - c)
            extra += [g.arg] * c
            if g.power - c:
                factors.append(PoleFactor(g.arg, 0j, g.power - c))
        yield deltas + tuple(extra), Monomial(mult, tuple(factors), mono.label)


def expand_g(term: Term) -> list[Term]:
    """Expand every g factor and collapse each resulting term on its support.

    Every output term has its deltas in reduced form, its coefficient free of
    g factors and resolvents, and every pivot variable eliminated from the
    coefficient.
    """
    out = []
    for mono in term.monomials:
        # reduce every branch first so a squared delta is reported before any pinch
        branches = [(reduce_deltas(deltas), m) for deltas, m in _branches(term.deltas, mono)]
        for red, m in branches:
            if red is None:
                continue
            m2 = _substitute(m, red.mapping)
            if m2 is None:
                continue
            if red.jacobian != 1:
                m2 = Monomial(m2.prefactor * float(red.jacobian), m2.factors, m2.label)
            out.append(Term(red.deltas, (m2,)))
    return out


def _structure_key(deltas: tuple[LinearForm, ...]) -> tuple:
    return (len(deltas), tuple(str(d) for d in deltas))


def _merge(terms: Iterable[Term]) -> tuple[Term, ...]:
    groups: dict[tuple[LinearForm, ...], dict[tuple, list]] = {}
    for t in terms:
        bucket = groups.setdefault(t.deltas, {})
        for m in t.monomials:
            key = m.factors
            entry = bucket.setdefault(key, [0j, 0.0, []])
            entry[0] += m.prefactor
            entry[1] += abs(m.prefactor)
            if m.label and m.label not in entry[2]:
                entry[2].append(m.label)
    merged = []
    for deltas, bucket in groups.items():
        monos = []
        for factors, (pref, mag, labels) in bucket.items():
            if pref == 0 or abs(pref) <= 1e-14 * mag:
                continue
            monos.append(Monomial(pref, factors, "+".join(labels)))
        if monos:
            monos.sort(key=lambda m: tuple(_factor_key(f) for f in m.factors))
            merged.append(Term(deltas, tuple(monos)))
    merged.sort(key=lambda t: _structure_key(t.deltas))
    return tuple(merged)


def canonicalize(amp: Amplitude) -> Amplitude:
    """Expand all g factors, collapse on supports and merge equal structures.

    The result is a fixed point: ``canonicalize(canonicalize(a)) ==
    canonicalize(a)``.
    """
    expanded = [t2 for t in amp.terms for t2 in expand_g(t)]
    return Amplitude(_merge(expanded), amp.roles, amp.scale)


def _propagate(forms: Sequence[LinearForm], values: dict[str, float]) -> None:
    """Solve any delta with exactly one unknown variable, repeatedly."""
    progress = True
    while progress:
        progress = False
        for form in forms:
            unknown = [k for k in form.variables if k not in values]
            if len(unknown) != 1:
                continue
            v = unknown[0]
            a = form.coefficient(v)
            rest = form - LinearForm.var(v) * a
            values[v] = -rest.evaluate(values) / float(a)
            progress = True


def _check(forms: Sequence[LinearForm], values: Mapping[str, float], scale: float) -> None:
    for form in forms:
        residual = form.evaluate(values)
        size = max((abs(values[k]) for k in form.variables), default=0.0)
        if abs(residual) > 1e-9 * scale + 1e-12 * size:
            raise ConstraintViolation(f"assignment breaks delta({form}) by {residual:.3g}")


def _complete(target: Reduction, assignment: Mapping[str, float], scale: float) -> dict[str, float]:
    values = {k: float(v) for k, v in assignment.items()}
    _propagate(target.deltas, values)
    _check(target.deltas, values, scale)
    return values


def _fill(target: Reduction, point: Mapping[str, float]) -> dict[str, float]:
    """Take grid values in elimination-reversed order, skipping determined ones."""
    values: dict[str, float] = {}
    for k in sorted(point, key=variable_rank, reverse=True):
        if k not in values:
            values[k] = float(point[k])
            _propagate(target.deltas, values)
    return values


def _eval_monomial(mono: Monomial, values: Mapping[str, float], scale: float) -> complex:
    num = mono.prefactor
    den = 1 + 0j
    for f in mono.factors:
        if not isinstance(f, PoleFactor):
            raise DistributionError("unexpanded g factor in evaluation")
        v = f.value(values)
        if f.power > 0:
            if abs(v) < EPS_POLE * scale:
                raise OnPoleError(f"denominator ({f.arg}{f.shift:+}) = {v:.3g} is on a pole")
            den *= v ** f.power
        else:
            num *= v ** (-f.power)
    return num / den


def _coefficient(terms: Iterable[Term], target: Reduction, values: Mapping[str, float],
                 scale: float, principal: bool = False) -> complex:
    total = 0j
    for term in terms:
        for mono in term.monomials:
            for deltas, m in _branches(term.deltas, mono, max_deltas=0 if principal else 1):
                try:
                    red = reduce_deltas(deltas)
                except IllDefinedDistribution:
                    if len(deltas) == len(term.deltas):
                        raise
                    continue
                if red is None or red.deltas != target.deltas:
                    continue
                m2 = _substitute(m, red.mapping)
                if m2 is None:
                    continue
                ratio = red.jacobian / target.jacobian
                total += float(ratio) * _eval_monomial(m2, values, scale)
    return total


def eval_coefficient(amp: Amplitude, deltaset: Sequence, assignment: Mapping[str, float]) -> complex:
    """Coefficient of the delta product ``deltaset`` at ``assignment``.

    Pivot variables of ``deltaset`` missing from ``assignment`` are solved
    for; supplied ones must satisfy the deltas.  The amplitude need not be
    canonical: g factors are expanded on the fly and only the branches whose
    delta structure matches ``deltaset`` contribute.
    """
    target = reduce_deltas(tuple(_as_form(d) for d in deltaset))
    if target is None:
        raise ValueError("requested delta structure vanishes identically")
    values = _complete(target, assignment, amp.scale)
    return _coefficient(amp.terms, target, values, amp.scale)


def principal_value(term: Term, assignment: Mapping[str, float], scale: float = 1.0) -> complex:
    """Coefficient of ``term`` on its own deltas with every g(L) := i/L.

    Values in ``assignment`` that the deltas determine are recomputed from
    the remaining ones (inputs are kept, outputs adjusted).
    """
    target = reduce_deltas(term.deltas)
    if target is None:
        return 0j
    values = _complete(target, _fill(target, assignment), scale)
    return _coefficient([term], target, values, scale, principal=True)


@dataclass(frozen=True)
class EquivalenceReport:
    equal: bool
    max_deviation: float
    points: int
    skipped: int = 0
    only_in_a: tuple[str, ...] = ()
    only_in_b: tuple[str, ...] = ()

    @property
    def structural_mismatch(self) -> bool:
        return bool(self.only_in_a or self.only_in_b)

    def __bool__(self) -> bool:
        return self.equal


def relative_deviation(a: complex, b: complex) -> float:
    scale = max(abs(a), abs(b))
    return 0.0 if scale == 0 else abs(a - b) / scale


def equal_on_grid(a: Amplitude, b: Amplitude, grid: Sequence[Mapping[str, float]],
                  tol: float = 1e-10) -> EquivalenceReport:
    """Compare two canonical amplitudes structure by structure on a grid.

    Pivot variables of each structure are recomputed from the grid point,
    so a point only needs to fix the free variables.  Points on a pole of
    either side are skipped and counted.
    """
    sa = {t.deltas for t in a.terms}
    sb = {t.deltas for t in b.terms}
    if sa != sb:
        fmt = lambda ds: "*".join(f"delta({d})" for d in ds)
        return EquivalenceReport(
            False, math.inf, 0, 0,
            tuple(sorted(fmt(s) for s in sa - sb)), tuple(sorted(fmt(s) for s in sb - sa)),
        )
    worst = 0.0
    skipped = 0
    scale = max(a.scale, b.scale)
    for deltas in sorted(sa, key=_structure_key):
        target = reduce_deltas(deltas)
        ta = [t for t in a.terms if t.deltas == deltas]
        tb = [t for t in b.terms if t.deltas == deltas]
        for point in grid:
            try:
                values = _complete(target, _fill(target, point), scale)
                va = _coefficient(ta, target, values, scale)
                vb = _coefficient(tb, target, values, scale)
            except OnPoleError:
                skipped += 1
                continue
            worst = max(worst, relative_deviation(va, vb))
    return EquivalenceReport(worst <= tol, worst, len(grid), skipped)


def _factor_to_json(f) -> dict:
    if isinstance(f, GFactor):
        return {"kind": "g", "arg": str(f.arg), "power": f.power}
    if isinstance(f, Resolvent):
        return {"kind": "resolvent", "arg": str(f.arg), "strength": f.strength, "power": f.power}
    return {"kind": "pole", "arg": str(f.arg), "shift": [f.shift.real, f.shift.imag], "power": f.power}


def _factor_from_json(d: Mapping) -> Any:
    arg = LinearForm.parse(d["arg"])
    if d["kind"] == "g":
        return GFactor(arg, int(d["power"]))
    if d["kind"] == "resolvent":
        return Resolvent(arg, float(d["strength"]), int(d["power"]))
    if d["kind"] == "pole":
        re_, im_ = d["shift"]
        return PoleFactor(arg, complex(re_, im_), int(d["power"]))
    raise ValueError(f"unknown factor kind {d['kind']!r}")


def amplitude_to_dict(amp: Amplitude) -> dict:
    return {
        "scale": amp.scale,
        "symbols": dict(amp.roles),
        "terms": [
            {
                "deltas": [str(d) for d in t.deltas],
                "monomials": [
                    {
                        "prefactor": [m.prefactor.real, m.prefactor.imag],
                        "factors": [_factor_to_json(f) for f in m.factors],
                        "label": m.label,
                    }
                    for m in t.monomials
                ],
            }
            for t in amp.terms
        ],
    }


def amplitude_from_dict(data: Mapping) -> Amplitude:
    terms = []
    for t in data["terms"]:
        monos = tuple(
            Monomial(complex(*m["prefactor"]), tuple(_factor_from_json(f) for f in m["factors"]),
                     m.get("label", ""))
            for m in t["monomials"]
        )
        terms.append(Term(tuple(LinearForm.parse(d) for d in t["deltas"]), monos))
    return Amplitude(tuple(terms), data.get("symbols", {}), float(data.get("scale", 1.0)))


def to_json(amp: Amplitude, **kwargs) -> str:
    """Serialize an amplitude; floats use their shortest round-trip repr."""
    return json.dumps(amplitude_to_dict(amp), **kwargs)


def from_json(text: str) -> Amplitude:
    return amplitude_from_dict(json.loads(text))


def format_amplitude(amp: Amplitude) -> str:
    """Human-readable listing, one delta structure per block."""
    lines = []
    for t in amp.terms:
        lines.append(" * ".join(f"delta({d})" for d in t.deltas) + " x [")
        for m in t.monomials:
            lines.append(f"    {m}")
        lines.append("]")
    return "\n".join(lines)
