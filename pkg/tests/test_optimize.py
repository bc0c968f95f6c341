from __future__ import annotations

import numpy as np

from conftest import corpus_source
from eklc.interp import eval_module, kernels_of, random_inputs
from eklc.ir import walk_lexical
from eklc.pipeline import compile_source
from eklc.typecheck import verify_semantic

SUMFACT = """
kernel sumfact(
  in S: rational[4, 4],
  in u: rational[4, 4, 4],
  out t: rational[4, 4, 4]
) {
  let t[i, j, k] =+ (l, m, n) S[l, i] * S[m, j] * S[n, k] * u[l, m, n];
}
"""


def _compiled(src, **kw):
    result = compile_source(src, "t.ekl", stage="optimized", **kw)
    assert result.ok, [str(d) for d in result.diagnostics]
    return result.module


def _kinds(module):
    return [op.kind for op in walk_lexical(module)]


def test_reduction_lifting_factors_the_triple_sum():
    naive = _compiled(SUMFACT, lift=False, fuse=False)
    lifted = _compiled(SUMFACT)
    inputs = random_inputs(
        kernels_of(naive)[0], np.random.default_rng(11)
    )
    out_n, c_n = eval_module(naive, inputs)
    out_l, c_l = eval_module(lifted, inputs)
    # 64 outputs x 64 reduction points x 3 multiplies each.
    assert c_n.multiplies == 12288
    # Three single-axis contractions of 64 elements with one multiply each,
    # plus the element-wise combination passes.
    assert c_l.multiplies == 768
    assert np.array_equal(out_n["t"], out_l["t"])  # exact rationals


def test_lifting_preserves_float_semantics_only_under_fast_math():
    src = SUMFACT.replace("rational", "f64")
    default = _compiled(src)
    fast = _compiled(src, fast_math=True)
    # Reassociating a float sum needs an explicit opt-in.
    inputs = random_inputs(kernels_of(default)[0], np.random.default_rng(3))
    _, c_default = eval_module(default, inputs)
    _, c_fast = eval_module(fast, inputs)
    assert c_default.multiplies == 12288
    assert c_fast.multiplies == 768


def test_lifted_module_still_checks():
    lifted = _compiled(SUMFACT)
    assert verify_semantic(lifted) == []


def test_single_use_producers_are_fused():
    src = (
        "kernel k(in x: f64[8], out y: f64[8]) "
        "{ let a[i] = x[i] * 2; let y[i] = a[i] + 1; }"
    )
    fused = _compiled(src)
    unfused = _compiled(src, fuse=False)
    assert _kinds(fused).count("ekl.assoc") < _kinds(unfused).count("ekl.assoc")
    inputs = random_inputs(kernels_of(fused)[0], np.random.default_rng(5))
    out_f, _ = eval_module(fused, inputs)
    out_u, _ = eval_module(unfused, inputs)
    np.testing.assert_array_equal(out_f["y"], out_u["y"])


def test_conditional_expressions_become_choices():
    src = (
        "kernel k(in c: bool, in a: f64, in b: f64, out y: f64) "
        "{ let y = if (c) a else b; }"
    )
    module = _compiled(src)
    kinds = _kinds(module)
    assert "ekl.choice" in kinds and "ekl.if" not in kinds


def test_constant_conditions_dissolve():
    src = (
        "kernel k(in a: f64, in b: f64, out y: f64) "
        "{ let y = if (true) a else b; }"
    )
    module = _compiled(src)
    kinds = _kinds(module)
    assert "ekl.choice" not in kinds and "ekl.if" not in kinds


def test_inexact_rational_constants_warn_when_narrowed():
    result = compile_source(
        "kernel k(in a: f32, out y: f32) { let y = a + 1/3; }",
        "t.ekl",
        stage="optimized",
    )
    assert result.ok
    assert any("1/3" in w.message for w in result.warnings)


def test_exact_rational_constants_lower_silently():
    result = compile_source(
        "kernel k(in a: f32, out y: f32) { let y = a + 1/2; }",
        "t.ekl",
        stage="optimized",
    )
    assert result.ok and not result.warnings
    assert "ekl.cast" not in _kinds(result.module)


def test_corpus_kernels_survive_full_optimization():
    for name in (
        "taumol_sw.ekl",
        "inv_helm.ekl",
        "elliptic_r.ekl",
        "elliptic_d.ekl",
        "convection.ekl",
    ):
        result = compile_source(corpus_source(name), name, stage="optimized")
        assert result.ok, (name, [str(d) for d in result.diagnostics])
        assert verify_semantic(result.module) == [], name
