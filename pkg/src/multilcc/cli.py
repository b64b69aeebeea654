"""Experiment runner: parse a task description, simulate, print metric tables.

Config files are flat ``key = value`` lines; ``#`` starts a comment. Example::

    q = 2147483647
    n = 4
    T = 1
    d = 14
    A = 1
    matrices = A B C
    group = x^2 : [A] [B]
    group = x*y + y*z^2 : [A, B, C]
    schemes = 1,2,3,4,4A,4B

``group`` may repeat; its inputs are matrix names in brackets. Matrices listed
in ``matrices`` are seeded uniform random; ``matrix.NAME = 1 2; 3 4`` gives one
explicitly. Command-line flags override file values.
"""

from __future__ import annotations

import argparse
import math
import re
import sys
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .field import MERSENNE31, PrimeField, _is_prime, role_rng
from .funcspec import (
    Group,
    ParseError,
    PolySpec,
    TaskSpec,
    ValidationError,
    degree_decompose,
    format_polynomial,
    parse_polynomial,
)
from .schemes import InsufficientResponses, InsufficientWorkers, closed_form
from .sharing import plan_points
from .simulator import SimConfig, metrics_close, outputs_correct, place_roles, run_simulation

SCHEME_LABELS = ("1", "2", "3", "4", "4A", "4B")
INT_KEYS = ("q", "n", "seed", "T", "d", "A", "adversaries", "stragglers", "trials")
REQUIRED = ("q", "T", "d")
TSV_COLUMNS = ("scheme", "verify", "d", "A", "T", "S", "SR_formula", "SR_measured", "UC", "DC", "MN_dot", "WN_dot",
               "WN_matmul", "matmul_dim", "accept_rate", "correct_rate", "false_accept_rate")


@dataclass(frozen=True)
class ExperimentSpec:
    q: int
    n: int | None
    T: int
    d: int
    A: int
    matrices: tuple[str, ...]  # dataset order
    explicit: tuple[tuple[str, tuple[tuple[int, ...], ...]], ...]  # name -> rows
    groups: tuple[tuple[PolySpec, tuple[tuple[str, ...], ...]], ...]
    schemes: tuple[str, ...] = ("4",)
    verify: str = "none"
    adversaries: int = 0
    stragglers: int = 0
    trials: int = 1
    seed: int = 0
    corruption: str = "random"
    format: str = "table"

    def runs(self) -> list[tuple[str, str]]:
        """(scheme, verify) pairs; ``verify`` applies to plain scheme-4 entries."""
        out = []
        for s in self.schemes:
            if s in ("4A", "4B"):
                out.append(("4", s))
            elif s == "4":
                out.append(("4", self.verify))
            else:
                out.append((s, "none"))
        return out

    def task(self) -> TaskSpec:
        field = PrimeField(self.q)
        explicit = dict(self.explicit)
        rng = role_rng(self.seed, "dataset")
        data = []
        for name in self.matrices:
            if name in explicit:
                data.append(field.array(explicit[name]))
            else:
                data.append(field.random_matrix(rng, (self.n, self.n)))
        index = {name: k for k, name in enumerate(self.matrices)}
        groups = tuple(Group(poly, tuple(tuple(index[x] for x in tup) for tup in inputs)) for poly, inputs in self.groups)
        return TaskSpec(tuple(data), groups)


def example1_spec(**overrides) -> ExperimentSpec:
    spec = ExperimentSpec(
        q=MERSENNE31, n=4, T=1, d=14, A=1, matrices=("A", "B", "C"), explicit=(),
        groups=((parse_polynomial("x^2"), (("A",), ("B",))), (parse_polynomial("x*y + y*z^2"), (("A", "B", "C"),))),
        schemes=SCHEME_LABELS,
    )
    return replace(spec, **overrides)


# -- parsing ------------------------------------------------------------------

_LINE = re.compile(r"^\s*(?P<key>[A-Za-z_][A-Za-z_0-9.]*)\s*=\s*(?P<value>.*?)\s*$")
_TUPLE = re.compile(r"\[([^\]]*)\]")
_IDENT = re.compile(r"^[A-Za-z_][A-Za-z_0-9]*$")


def _parse_int(text: str, line: int, col: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"expected an integer, found {text!r}", line, col) from None


def _parse_group(value: str, line: int, col: int) -> tuple[PolySpec, tuple[tuple[str, ...], ...]]:
    if ":" not in value:
        raise ParseError("group needs 'polynomial : [inputs] ...'", line, col)
    poly_text, rest = value.split(":", 1)
    poly = parse_polynomial(poly_text, line, col)
    rest_col = col + len(poly_text) + 1
    tuples = []
    consumed = _TUPLE.sub("", rest).strip()
    if consumed:
        raise ParseError(f"unexpected text {consumed!r} in group inputs", line, rest_col)
    for m in _TUPLE.finditer(rest):
        names = tuple(x for x in re.split(r"[\s,]+", m.group(1).strip()) if x)
        for x in names:
            if not _IDENT.match(x):
                raise ParseError(f"bad matrix name {x!r}", line, rest_col + m.start())
        tuples.append(names)
    if not tuples:
        raise ValidationError(f"line {line}: group has no input tuples")
    return poly, tuple(tuples)


def _parse_matrix(value: str, line: int, col: int) -> tuple[tuple[int, ...], ...]:
    rows = []
    for row in value.split(";"):
        rows.append(tuple(_parse_int(x, line, col) for x in row.split()))
    if not rows or any(len(r) != len(rows) for r in rows):
        raise ValidationError(f"line {line}: explicit matrix must be square")
    return tuple(rows)


def _parse_schemes(value: str) -> tuple[str, ...]:
    out = tuple(x.strip().upper() for x in value.split(",") if x.strip())
    for s in out:
        if s not in SCHEME_LABELS:
            raise ValidationError(f"unknown scheme {s!r}; choose from {', '.join(SCHEME_LABELS)}")
    if not out:
        raise ValidationError("scheme list is empty")
    return out


def parse_experiment(text: str, overrides: dict | None = None) -> ExperimentSpec:
    """Parse and fully validate an experiment description."""
    raw: dict[str, object] = {}
    groups, explicit = [], {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0]
        if not body.strip():
            continue
        m = _LINE.match(body)
        if not m:
            raise ParseError("expected 'key = value'", lineno, len(body) - len(body.lstrip()) + 1)
        key, value, vcol = m.group("key"), m.group("value"), m.start("value") + 1
        if key == "group":
            groups.append(_parse_group(value, lineno, vcol))
        elif key.startswith("matrix."):
            name = key[len("matrix."):]
            if not _IDENT.match(name):
                raise ParseError(f"bad matrix name {name!r}", lineno, m.start("key") + 1)
            explicit[name] = _parse_matrix(value, lineno, vcol)
        elif key in INT_KEYS:
            raw[key] = _parse_int(value, lineno, vcol)
        elif key == "matrices":
            raw[key] = tuple(x for x in re.split(r"[\s,]+", value) if x)
        elif key == "schemes":
            raw[key] = _parse_schemes(value)
        elif key in ("verify", "corruption", "format"):
            raw[key] = value
        else:
            raise ParseError(f"unknown key {key!r}", lineno, m.start("key") + 1)
    if groups:
        raw["groups"] = tuple(groups)
    if explicit:
        raw["explicit"] = tuple(sorted(explicit.items()))
    raw.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return _validate(raw)


def _validate(raw: dict) -> ExperimentSpec:
    for key in REQUIRED:
        if key not in raw:
            raise ValidationError(f"missing required key {key!r}")
    if "groups" not in raw:
        raise ValidationError("at least one group is required")
    q = raw["q"]
    if q < 3 or not _is_prime(q):
        raise ValidationError(f"q={q} must be an odd prime")
    explicit = dict(raw.get("explicit", ()))
    used = [x for _, inputs in raw["groups"] for tup in inputs for x in tup]
    matrices = tuple(raw.get("matrices", ()))
    matrices += tuple(x for x in sorted(explicit) if x not in matrices)
    missing = sorted(set(used) - set(matrices))
    if missing:
        raise ValidationError(f"undeclared matrices: {', '.join(missing)}")
    if len(set(matrices)) != len(matrices):
        raise ValidationError("matrix names must be unique")
    sizes = {len(rows) for rows in explicit.values()}
    n = raw.get("n")
    if n is not None:
        sizes.add(n)
    if len(sizes) > 1:
        raise ValidationError(f"matrix sizes disagree: {sorted(sizes)}")
    if not sizes:
        raise ValidationError("missing required key 'n'")
    n = sizes.pop()
    if n < 1:
        raise ValidationError("n must be positive")
    for key in ("T", "d", "A", "adversaries", "stragglers", "seed"):
        if raw.get(key, 0) < 0:
            raise ValidationError(f"{key} must be non-negative")
    if raw.get("trials", 1) < 1:
        raise ValidationError("trials must be positive")
    if raw.get("adversaries", 0) + raw.get("stragglers", 0) > raw["d"]:
        raise ValidationError("adversaries plus stragglers exceed d")
    if raw.get("verify", "none") not in ("none", "4A", "4B"):
        raise ValidationError(f"verify must be none, 4A or 4B, not {raw['verify']!r}")
    if raw.get("corruption", "random") not in ("random", "offset", "primary"):
        raise ValidationError(f"unknown corruption rule {raw['corruption']!r}")
    if raw.get("format", "table") not in ("table", "tsv"):
        raise ValidationError(f"format must be table or tsv, not {raw['format']!r}")
    spec = ExperimentSpec(
        q=q, n=n, T=raw["T"], d=raw["d"], A=raw.get("A", 0), matrices=matrices,
        explicit=tuple(sorted(explicit.items())), groups=tuple(raw["groups"]),
        schemes=tuple(raw.get("schemes", ("4",))), verify=raw.get("verify", "none"),
        adversaries=raw.get("adversaries", 0), stragglers=raw.get("stragglers", 0),
        trials=raw.get("trials", 1), seed=raw.get("seed", 0), corruption=raw.get("corruption", "random"),
        format=raw.get("format", "table"),
    )
    task = spec.task()  # raises ValidationError on arity or index problems
    if spec.q <= task.ell + spec.T + spec.d:
        raise ValidationError(f"q={spec.q} is too small for {task.ell + spec.T + spec.d} distinct evaluation points")
    return spec


def emit_experiment(spec: ExperimentSpec) -> str:
    """Canonical text that parses back to ``spec``."""
    lines = [f"q = {spec.q}", f"n = {spec.n}", f"T = {spec.T}", f"d = {spec.d}", f"A = {spec.A}",
             f"seed = {spec.seed}", f"adversaries = {spec.adversaries}", f"stragglers = {spec.stragglers}",
             f"trials = {spec.trials}", f"schemes = {','.join(spec.schemes)}", f"verify = {spec.verify}",
             f"corruption = {spec.corruption}", f"format = {spec.format}",
             f"matrices = {' '.join(spec.matrices)}"]
    for name, rows in spec.explicit:
        lines.append(f"matrix.{name} = " + "; ".join(" ".join(str(x) for x in r) for r in rows))
    for poly, inputs in spec.groups:
        lines.append(f"group = {format_polynomial(poly)} : " + " ".join("[" + ", ".join(t) + "]" for t in inputs))
    return "\n".join(lines) + "\n"


# -- running ------------------------------------------------------------------


def false_accept_bound(field: PrimeField, task: TaskSpec, verify: str) -> float:
    """Per-run false-accept bound: sum of lcm degrees over q-1 (4A), 3 per computation over q (4B)."""
    if verify == "4A":
        lcms = [degree_decompose(g.poly).lcm for g in task.groups]
        return sum(lcms[j] for j, _ in task.computations()) / (field.q - 1)
    if verify == "4B":
        return 3 * task.ell / field.q
    return 1.0


def _fmt(value) -> str:
    if isinstance(value, tuple):
        return "|".join(str(v) for v in value)
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def run_and_report(spec: ExperimentSpec, out=None) -> tuple[int, list[dict]]:
    """Simulate every selected scheme; exit code 0 when formulas and verdicts behave as expected."""
    out = out or sys.stdout
    field = PrimeField(spec.q)
    task = spec.task()
    rows, ok = [], True
    for scheme, verify in spec.runs():
        label = scheme if verify == "none" else verify
        try:
            cf = closed_form(label, task, spec.d, spec.A, spec.T, field.q)
            plan = plan_points(field, task.ell_per_group, spec.T, spec.d)
            _, strag = place_roles(spec.d, 0, spec.stragglers, spec.seed)
            ref = run_simulation(field, task, SimConfig(scheme, spec.d, verify, spec.A, spec.T, (), strag, seed=spec.seed), plan)
        except (InsufficientWorkers, InsufficientResponses) as exc:
            print(f"scheme {label}: {exc}", file=sys.stderr)
            ok = False
            continue
        close = metrics_close(field, task, ref)
        accepted = correct = false_accept = 0
        for t in range(spec.trials):
            seed = spec.seed + t
            adv, strag = place_roles(spec.d, spec.adversaries, spec.stragglers, seed)
            cfg = SimConfig(scheme, spec.d, verify, spec.A, spec.T, adv, strag, spec.corruption, seed)
            try:
                rep = run_simulation(field, task, cfg, plan, measure=False)
            except InsufficientResponses:
                continue
            good = outputs_correct(field, task, rep)
            accepted += rep.accepted
            correct += good
            false_accept += rep.accepted and not good
        trials = spec.trials
        row = {
            "scheme": label, "verify": verify, "d": spec.d, "A": spec.A, "T": spec.T, "S": spec.stragglers,
            "SR_formula": cf.SR, "SR_measured": ref.metrics.SR, "UC": ref.metrics.UC, "DC": ref.metrics.DC,
            "MN_dot": ref.metrics.MN_dot, "WN_dot": ref.metrics.WN_dot, "WN_matmul": ref.metrics.WN_matmul,
            "matmul_dim": ref.metrics.matmul_dim, "accept_rate": accepted / trials, "correct_rate": correct / trials,
            "false_accept_rate": false_accept / trials,
        }
        rows.append(row)
        ok &= close["all_match"]
        if spec.adversaries <= spec.A:
            ok &= correct == trials
        elif verify != "none":
            p = false_accept_bound(field, task, verify)
            ok &= row["false_accept_rate"] <= p + 3 * math.sqrt(p * (1 - p) / trials)
    _print_rows(rows, spec.format, out)
    return (0 if ok else 1), rows


def _print_rows(rows: list[dict], fmt: str, out) -> None:
    cells = [list(TSV_COLUMNS)] + [[_fmt(r[c]) for c in TSV_COLUMNS] for r in rows]
    if fmt == "tsv":
        for line in cells:
            print("\t".join(line), file=out)
        return
    widths = [max(len(line[k]) for line in cells) for k in range(len(TSV_COLUMNS))]
    for i, line in enumerate(cells):
        print("  ".join(x.rjust(w) for x, w in zip(line, widths)), file=out)
        if i == 0:
            print("  ".join("-" * w for w in widths), file=out)


def selftest(out=None) -> int:
    """Oracle-equivalence grid: random tasks, every scheme, one adversary within budget, two spare workers."""
    out = out or sys.stdout
    field = PrimeField(97)
    rng = np.random.default_rng(2024)
    failures = 0
    polys = ["x^2", "x*y + y*z^2", "2*x*y*x + y", "x^3 + 3*x", "x*y*z*w"]
    for case in range(6):
        L = int(rng.integers(1, 4))
        chosen = [parse_polynomial(polys[int(k)]) for k in rng.choice(len(polys), size=L, replace=False)]
        n = int(rng.integers(1, 4))
        data = tuple(field.random_matrix(rng, (n, n)) for _ in range(3))
        groups = []
        for p in chosen:
            count = int(rng.integers(1, 3))
            groups.append(Group(p, tuple(tuple(int(x) for x in rng.integers(0, 3, size=p.arity)) for _ in range(count))))
        task = TaskSpec(data, tuple(groups))
        for label in SCHEME_LABELS:
            scheme, verify = (label, "none") if label in "123" else ("4", "none" if label == "4" else label)
            d = _minimum_workers(label, task) + 2
            if field.q <= task.ell + 1 + d:
                continue
            cfg = SimConfig(scheme, d, verify, 1, 1, adversaries=(0,), seed=case)
            rep = run_simulation(field, task, cfg, measure=False)
            good = outputs_correct(field, task, rep)
            failures += not good
            print(f"case {case} scheme {label:>2} L={L} n={n} d={d}: {'ok' if good else 'FAIL'}", file=out)
    print(f"selftest: {'PASS' if not failures else f'{failures} failures'}", file=out)
    return 0 if not failures else 1


def _minimum_workers(label: str, task: TaskSpec) -> int:
    """Smallest d that admits A=1, T=1 for the scheme."""
    from .schemes import k_per_group, k_scheme1, k_scheme4
    from .funcspec import occurrence_expand, split_linear

    if label == "1":
        return k_scheme1(task, 1) + 2
    if label == "2":
        return sum(k + 2 for k in k_per_group(task, 1))
    if label == "3":
        return max(k_per_group(task, 1)) + 2
    if label == "4B":
        degs = [occurrence_expand(split_linear(g.poly)[0]).expanded.degree for g in task.groups]
        return k_scheme4(task, 1, degs) + 2
    return k_scheme4(task, 1) + 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="multilcc", description=__doc__.splitlines()[0])
    p.add_argument("--config", metavar="PATH")
    p.add_argument("--schemes", "--scheme", dest="schemes", metavar="LIST")
    p.add_argument("--verify", choices=["none", "4A", "4B"])
    p.add_argument("--q", type=int, metavar="PRIME")
    p.add_argument("--n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--adversaries", type=int)
    p.add_argument("--budget", type=int, dest="A", metavar="A")
    p.add_argument("--colluders", type=int, dest="T", metavar="T")
    p.add_argument("--stragglers", type=int)
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--format", choices=["table", "tsv"])
    p.add_argument("--example1", action="store_true", help="use the built-in A^2, B^2, AB + BC^2 task")
    p.add_argument("--selftest", action="store_true", help="run the oracle-equivalence grid")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.selftest:
        return selftest()
    overrides = {k: getattr(args, k) for k in ("q", "n", "d", "A", "T", "adversaries", "stragglers", "trials", "seed", "verify", "format")}
    try:
        if args.schemes is not None:
            overrides["schemes"] = _parse_schemes(args.schemes)
        if args.config:
            with open(args.config) as fh:
                text = fh.read()
        elif args.example1:
            text = emit_experiment(example1_spec())
        else:
            print("error: give --config PATH or --example1", file=sys.stderr)
            return 2
        spec = parse_experiment(text, overrides)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return 2
    except (ValidationError, OSError) as exc:
        print(f"invalid experiment: {exc}", file=sys.stderr)
        return 2
    code, _ = run_and_report(spec)
    return code


if __name__ == "__main__":
    sys.exit(main())
