"""Staged compilation driver.

Stages, in order:

- ``ast``: parsed module, untyped.
- ``typed``: after deductive fix-point type checking.
- ``simplified``: constants folded, algebraic identities applied, dead
  operations removed.
- ``explicit``: implicit conversions turned into explicit casts and
  broadcasts, ellipsis subscripts expanded.
- ``generators``: elementwise array operations rewritten to generator
  form with loop-invariant subtrees hoisted.
- ``optimized``: reductions factored into staged sweeps, conditionals
  converted to selections, single-use producers fused, exact rational
  literals lowered to machine constants.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

from .diagnostics import Diagnostic
from .ir import Operation, verify
from .normalize import materialize_casts, simplify, to_generator_form
from .optimize import optimize
from .parser import parse_source
from .typecheck import type_check, verify_semantic

STAGES = ("ast", "typed", "simplified", "explicit", "generators", "optimized")


@dataclass
class CompileResult:
    module: Operation | None
    diagnostics: list[Diagnostic] = field(default_factory=list)
    warnings: list[Diagnostic] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.module is not None and not any(
            d.severity == "error" for d in self.diagnostics
        )


def compile_source(
    source: str,
    filename: str = "<input>",
    stage: str = "optimized",
    fast_math: bool = False,
    lift: bool = True,
    fuse: bool = True,
) -> CompileResult:
    """Compile EKL source up to and including the requested stage."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    module, diagnostics = parse_source(source, filename)
    result = CompileResult(module, diagnostics)
    if not result.ok or stage == "ast":
        result.module = None if not result.ok else module
        return result
    _, type_diags = type_check(module)
    result.diagnostics.extend(type_diags)
    if not result.ok:
        result.module = None
        return result
    if stage == "typed":
        return result
    simplify(module)
    if stage == "simplified":
        return result
    materialize_casts(module)
    if stage == "explicit":
        return result
    to_generator_form(module)
    if stage == "generators":
        return result
    result.warnings.extend(optimize(module, fast_math=fast_math, lift=lift, fuse=fuse))
    return result


def compile_all_stages(
    source: str,
    filename: str = "<input>",
    fast_math: bool = False,
    lift: bool = True,
    fuse: bool = True,
) -> tuple[dict[str, Operation], list[Diagnostic]]:
    """Compile once, snapshotting a deep copy of the module at each stage.

    Returns an empty dict together with the diagnostics when any stage
    fails. The ``ast`` snapshot is omitted since its values carry no
    types and cannot be evaluated.
    """
    module, diagnostics = parse_source(source, filename)
    if any(d.severity == "error" for d in diagnostics):
        return {}, diagnostics
    _, type_diags = type_check(module)
    diagnostics.extend(type_diags)
    if any(d.severity == "error" for d in diagnostics):
        return {}, diagnostics
    stages = {"typed": copy.deepcopy(module)}
    simplify(module)
    stages["simplified"] = copy.deepcopy(module)
    materialize_casts(module)
    stages["explicit"] = copy.deepcopy(module)
    to_generator_form(module)
    stages["generators"] = copy.deepcopy(module)
    diagnostics.extend(optimize(module, fast_math=fast_math, lift=lift, fuse=fuse))
    stages["optimized"] = module
    return stages, diagnostics


def check_module(module: Operation) -> list[Diagnostic]:
    """Structural plus semantic verification of a typed module."""
    return verify(module) + verify_semantic(module)
