"""Multivariate matrix polynomials and the structural rewrites used for verification.

A polynomial is a coefficient-weighted list of ordered monomials. Matrix powers
are always expanded (``x^2*y`` is stored as variables ``(x, x, y)``) and
products are evaluated strictly left to right, so multiplication counts are
deterministic.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .field import PrimeField
from .matspace import DimensionMismatch, OpCounter, mat_add, mat_mul, mat_scalar_mul


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 1, col: int = 1):
        super().__init__(f"line {line}, column {col}: {message}")
        self.line = line
        self.col = col


class ValidationError(ValueError):
    pass


class Degree1Monomial(ValueError):
    pass


@dataclass(frozen=True)
class Monomial:
    coeff: int
    vars: tuple[int, ...]

    def __post_init__(self):
        if not self.vars:
            raise ValidationError("monomial degree must be >= 1")

    @property
    def degree(self) -> int:
        return len(self.vars)


@dataclass(frozen=True)
class PolySpec:
    monomials: tuple[Monomial, ...]
    arity: int
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        if not self.monomials:
            raise ValidationError("polynomial needs at least one monomial")
        top = max(v for m in self.monomials for v in m.vars)
        if top >= self.arity:
            raise ValidationError(f"variable index {top} out of range for arity {self.arity}")
        if self.names is not None and len(self.names) != self.arity:
            raise ValidationError("one name per variable required")

    @classmethod
    def build(cls, terms, arity: int | None = None, names=None) -> "PolySpec":
        """``terms`` is an iterable of ``(coeff, vars)`` pairs."""
        monos = tuple(Monomial(int(c), tuple(int(v) for v in vs)) for c, vs in terms)
        if arity is None:
            arity = max(v for m in monos for v in m.vars) + 1
        return cls(monos, arity, tuple(names) if names is not None else None)

    @property
    def degree(self) -> int:
        return max(m.degree for m in self.monomials)

    @property
    def mat_mult_count(self) -> int:
        return sum(m.degree - 1 for m in self.monomials)

    def scalar_mult_count(self, q: int) -> int:
        return sum(1 for m in self.monomials if m.coeff % q != 1)

    def var_name(self, v: int) -> str:
        if self.names is not None:
            return self.names[v]
        return f"x{v}"


def poly_eval(field: PrimeField, psi: PolySpec, inputs: Sequence[np.ndarray], counter: OpCounter | None = None) -> np.ndarray:
    if len(inputs) != psi.arity:
        raise DimensionMismatch(f"polynomial takes {psi.arity} inputs, got {len(inputs)}")
    total = None
    for mono in psi.monomials:
        prod = inputs[mono.vars[0]]
        for v in mono.vars[1:]:
            prod = mat_mul(field, prod, inputs[v], counter)
        if mono.coeff % field.q != 1:
            prod = mat_scalar_mul(field, mono.coeff, prod, counter)
        total = prod % field.q if total is None else mat_add(field, total, prod)
    return total


# -- degree classes (companion computation) -----------------------------------


@dataclass(frozen=True)
class DegreeClass:
    degree: int
    variables: tuple[int, ...]
    monomials: tuple[Monomial, ...]


@dataclass(frozen=True)
class DegreeDecomposition:
    """Monomials grouped into homogeneous classes of equal degree.

    The companion polynomial has the same shape as the original, but each
    class reads its own copy of the variables it uses; classes are laid out
    in ascending degree, variables in ascending index.
    """

    source: PolySpec
    classes: tuple[DegreeClass, ...]
    lcm: int
    companion: PolySpec

    @property
    def companion_arity(self) -> int:
        return self.companion.arity

    def exponents(self) -> list[int]:
        return [self.lcm // c.degree for c in self.classes]

    def class_poly(self, k: int) -> PolySpec:
        c = self.classes[k]
        return PolySpec(c.monomials, self.source.arity, self.source.names)

    def companion_inputs(self, field: PrimeField, inputs: Sequence[np.ndarray], v: int, counter: OpCounter | None = None) -> list[np.ndarray]:
        """Per-class copies of the inputs, class k scaled by ``v**(lcm/degree_k)``."""
        out = []
        for c, e in zip(self.classes, self.exponents()):
            scale = field.pow(v, e)
            out.extend(mat_scalar_mul(field, scale, inputs[var], counter) for var in c.variables)
        return out


def degree_decompose(psi: PolySpec) -> DegreeDecomposition:
    by_degree: dict[int, list[Monomial]] = {}
    for m in psi.monomials:
        by_degree.setdefault(m.degree, []).append(m)
    classes = []
    companion_terms = []
    names = []
    offset = 0
    for deg in sorted(by_degree):
        monos = tuple(by_degree[deg])
        variables = tuple(sorted({v for m in monos for v in m.vars}))
        slot = {v: offset + i for i, v in enumerate(variables)}
        companion_terms.extend((m.coeff, [slot[v] for v in m.vars]) for m in monos)
        names.extend(f"{psi.var_name(v)}_{deg}" for v in variables)
        classes.append(DegreeClass(deg, variables, monos))
        offset += len(variables)
    lcm = math.lcm(*(c.degree for c in classes))
    companion = PolySpec.build(companion_terms, arity=offset, names=names)
    return DegreeDecomposition(psi, tuple(classes), lcm, companion)


# -- occurrence expansion (border augmentation) ------------------------------

FIRST, MIDDLE, LAST = "first", "middle", "last"


@dataclass(frozen=True)
class OccurrenceExpansion:
    """Position-tagged rewrite of a polynomial whose monomials all have degree >= 2.

    ``tagged[k] = (var, tag)`` says input k of the rewritten polynomial is the
    original input ``var`` prepared for position ``tag``. Identical (var, tag)
    pairs are shared across monomials.
    """

    source: PolySpec
    tagged: tuple[tuple[int, str], ...]
    expanded: PolySpec

    @property
    def arity(self) -> int:
        return len(self.tagged)

    def expand_inputs(self, inputs: Sequence[np.ndarray]) -> list[tuple[np.ndarray, str]]:
        return [(inputs[var], tag) for var, tag in self.tagged]


def _position_tags(degree: int) -> list[str]:
    return [FIRST] + [MIDDLE] * (degree - 2) + [LAST]


def occurrence_expand(psi: PolySpec) -> OccurrenceExpansion:
    slots: dict[tuple[int, str], int] = {}
    terms = []
    for m in psi.monomials:
        if m.degree < 2:
            raise Degree1Monomial("degree-1 monomials must be evaluated by the master, not expanded")
        new_vars = []
        for var, tag in zip(m.vars, _position_tags(m.degree)):
            key = (var, tag)
            if key not in slots:
                slots[key] = len(slots)
            new_vars.append(slots[key])
        terms.append((m.coeff, new_vars))
    tagged = tuple(sorted(slots, key=slots.get))
    names = [f"{psi.var_name(v)}_{tag}" for v, tag in tagged]
    return OccurrenceExpansion(psi, tagged, PolySpec.build(terms, arity=len(tagged), names=names))


def split_linear(psi: PolySpec) -> tuple[PolySpec | None, PolySpec | None]:
    """Split into (degree >= 2 part, degree-1 part); either may be None."""
    high = [m for m in psi.monomials if m.degree >= 2]
    low = [m for m in psi.monomials if m.degree == 1]
    mk = lambda ms: PolySpec(tuple(ms), psi.arity, psi.names) if ms else None  # noqa: E731
    return mk(high), mk(low)


# -- tasks --------------------------------------------------------------------


@dataclass(frozen=True)
class Group:
    poly: PolySpec
    inputs: tuple[tuple[int, ...], ...]


@dataclass(frozen=True)
class TaskSpec:
    """The requested computations: ``groups[j].poly`` applied to each input tuple."""

    dataset: tuple[np.ndarray, ...]
    groups: tuple[Group, ...]

    def __post_init__(self):
        if not self.groups:
            raise ValidationError("at least one group required")
        shapes = {x.shape for x in self.dataset}
        if len(shapes) > 1:
            raise ValidationError("dataset matrices must share one shape")
        for shape in shapes:
            if len(shape) != 2 or shape[0] != shape[1]:
                raise ValidationError("dataset matrices must be square")
        for j, g in enumerate(self.groups):
            if not g.inputs:
                raise ValidationError(f"group {j + 1} has no computations")
            for tup in g.inputs:
                if len(tup) != g.poly.arity:
                    raise ValidationError(f"group {j + 1}: tuple {tup} does not match arity {g.poly.arity}")
                if any(not 0 <= i < len(self.dataset) for i in tup):
                    raise ValidationError(f"group {j + 1}: index out of range in {tup}")

    @property
    def L(self) -> int:
        return len(self.groups)

    @property
    def ell_per_group(self) -> list[int]:
        return [len(g.inputs) for g in self.groups]

    @property
    def ell(self) -> int:
        return sum(self.ell_per_group)

    @property
    def arities(self) -> list[int]:
        return [g.poly.arity for g in self.groups]

    @property
    def degrees(self) -> list[int]:
        return [g.poly.degree for g in self.groups]

    @property
    def n(self) -> int:
        return self.dataset[0].shape[0]

    def tuple_matrices(self, j: int, i: int) -> list[np.ndarray]:
        return [self.dataset[k] for k in self.groups[j].inputs[i]]

    def computations(self):
        for j, g in enumerate(self.groups):
            for i in range(len(g.inputs)):
                yield j, i


def plaintext_outputs(field: PrimeField, task: TaskSpec) -> list[np.ndarray]:
    """Every requested value computed directly, in (group, index) order."""
    return [poly_eval(field, task.groups[j].poly, task.tuple_matrices(j, i)) for j, i in task.computations()]


def example1_task(field: PrimeField, n: int, rng: np.random.Generator) -> TaskSpec:
    """Random A, B, C with requests A^2, B^2 and AB + BC^2."""
    a, b, c = (field.random_matrix(rng, (n, n)) for _ in range(3))
    square = parse_polynomial("x^2")
    mixed = parse_polynomial("x*y + y*z^2")
    return TaskSpec((a, b, c), (Group(square, ((0,), (1,))), Group(mixed, ((0, 1, 2),))))


# -- grammar ------------------------------------------------------------------
#   poly   := term ('+' term)*
#   term   := [INT ['*']] factor ('*' factor)*
#   factor := IDENT ['^' INT]

_TOKEN = re.compile(r"\s*(?:(?P<int>\d+)|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[+*^])|(?P<bad>\S))")


def _tokenize(text: str, line: int, col0: int):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            break
        kind = m.lastgroup
        start = m.start(kind)
        if kind == "bad":
            raise ParseError(f"unexpected character {m.group(kind)!r}", line, col0 + start)
        out.append((kind, m.group(kind), col0 + start))
        pos = m.end()
    out.append(("end", "", col0 + len(text)))
    return out


def parse_polynomial(text: str, line: int = 1, col: int = 1) -> PolySpec:
    """Parse e.g. ``"x*y + 3*y*z^2"``. Variables are numbered by first appearance."""
    toks = _tokenize(text, line, col)
    pos = 0
    names: list[str] = []
    terms = []

    def peek():
        return toks[pos]

    def take(kind, value=None):
        nonlocal pos
        tok = toks[pos]
        if tok[0] != kind or (value is not None and tok[1] != value):
            want = value or kind
            got = tok[1] or "end of input"
            raise ParseError(f"expected {want}, found {got!r}", line, tok[2])
        pos += 1
        return tok

    while True:
        coeff = 1
        tvars: list[int] = []
        if peek()[0] == "int":
            coeff = int(take("int")[1])
            if coeff == 0:
                raise ValidationError("zero coefficient: every monomial must be nonzero")
            if peek()[:2] == ("op", "*"):
                take("op", "*")
        while True:
            name = take("ident")[1]
            power = 1
            if peek()[:2] == ("op", "^"):
                take("op", "^")
                power_tok = take("int")
                power = int(power_tok[1])
                if power == 0:
                    raise ValidationError(f"{name}^0 makes a constant factor; monomial degree must be >= 1")
            if name not in names:
                names.append(name)
            tvars.extend([names.index(name)] * power)
            if peek()[:2] == ("op", "*"):
                take("op", "*")
                continue
            break
        terms.append((coeff, tvars))
        if peek()[0] == "end":
            break
        take("op", "+")
    return PolySpec.build(terms, arity=len(names), names=names)


def format_polynomial(psi: PolySpec) -> str:
    parts = []
    for m in psi.monomials:
        factors = []
        k = 0
        while k < len(m.vars):
            run = 1
            while k + run < len(m.vars) and m.vars[k + run] == m.vars[k]:
                run += 1
            name = psi.var_name(m.vars[k])
            factors.append(name if run == 1 else f"{name}^{run}")
            k += run
        body = "*".join(factors)
        parts.append(body if m.coeff == 1 else f"{m.coeff}*{body}")
    return " + ".join(parts)
