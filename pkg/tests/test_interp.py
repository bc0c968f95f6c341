from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

import eklc.interp as interp_mod
from conftest import corpus_source
from eklc.interp import (
    BoundsTrap,
    Interpreter,
    eval_ast_oracle,
    eval_module,
    kernels_of,
    random_inputs,
)
from eklc.pipeline import compile_source


def _module(src, stage="generators", **kw):
    result = compile_source(src, "t.ekl", stage=stage, **kw)
    assert result.ok, [str(d) for d in result.diagnostics]
    return result.module


def test_counters_match_the_element_at_a_time_model():
    module = _module(
        "kernel k(in A: f64[3,4], out y: f64[3]) { let y[i] =+ (k) A[i, k] * 2; }"
    )
    inputs = random_inputs(kernels_of(module)[0], np.random.default_rng(0))
    out, counters = eval_module(module, inputs)
    # 12 reduction points, one multiply each; the running sum adds one per
    # point; gather reads one element per point.
    assert counters.multiplies == 12
    assert counters.adds == 12
    assert counters.gather_reads == 12


def test_out_of_range_index_input_traps():
    module = _module(
        "kernel k(in j: index<4>[2], in T: f64[4], out y: f64[2]) "
        "{ let y[i] = T[j[i]]; }"
    )
    good = {"j": np.array([0, 3]), "T": np.arange(4.0)}
    out, _ = eval_module(module, good)
    np.testing.assert_array_equal(out["y"], [0.0, 3.0])
    with pytest.raises(BoundsTrap):
        eval_module(module, {"j": np.array([0, 4]), "T": np.arange(4.0)})
    with pytest.raises(BoundsTrap):
        eval_module(module, {"j": np.array([-1, 0]), "T": np.arange(4.0)})


def test_vectorized_and_scalar_paths_agree(monkeypatch):
    src = (
        "kernel k(in A: f64[4,5], in j: index<3>[4], in s: rational, "
        "out y: f64[4]) "
        "{ let y[i] =+ (k) (A[i, k] + A[i, j[i] + 1]) * s; }"
    )
    module = _module(src, stage="optimized")
    inputs = random_inputs(kernels_of(module)[0], np.random.default_rng(42))
    out_vec, c_vec = eval_module(module, inputs)
    monkeypatch.setattr(
        Interpreter, "_try_vectorized", lambda self, op, env: None
    )
    out_scalar, c_scalar = eval_module(module, inputs)
    np.testing.assert_array_equal(out_vec["y"], out_scalar["y"])
    assert c_vec.as_dict() == c_scalar.as_dict()


def test_instrumented_evaluator_matches_the_oracle():
    src = (
        "kernel k(in a: f32[3], in b: si16[3], out y: f32[3], out z: f64) "
        "{ let y[i] = a[i] * b[i] + 1/4; let z = a[_0] - b[_2]; }"
    )
    module = _module(src, stage="optimized")
    kernel = kernels_of(module)[0]
    oracle_module = _module(src, stage="typed")
    for seed in range(5):
        inputs = random_inputs(kernel, np.random.default_rng(seed))
        got, _ = eval_module(module, inputs)
        want = eval_ast_oracle(kernels_of(oracle_module)[0], inputs)
        for name in want:
            np.testing.assert_allclose(
                np.asarray(got[name], dtype=float),
                np.asarray(want[name], dtype=float),
                rtol=1e-6,
            )


def test_rational_evaluation_is_exact():
    module = _module(
        "kernel k(in a: rational[3], out y: rational[1]) "
        "{ let y[o] =+ (i) a[i] / 3; }",
        stage="optimized",
    )
    thirds = np.array([Fraction(1, 7), Fraction(2, 7), Fraction(4, 7)], dtype=object)
    out, _ = eval_module(module, {"a": thirds})
    assert out["y"][0] == Fraction(1, 3)


def test_interpolated_flux_kernel_on_unit_inputs():
    module = _module(
        corpus_source("mini/convection_l5.ekl"), stage="optimized"
    )
    kernel = kernels_of(module)[0]
    inputs = {}
    block = kernel.body()
    for i, arg in enumerate(block.args):
        name = kernel.attrs[f"in{i}"].value
        shape = arg.type.shape
        inputs[name] = np.full(shape, Fraction(1), dtype=object)
    out, _ = eval_module(module, inputs)
    for name, arr in out.items():
        flat = np.asarray(arr, dtype=object).ravel()
        assert all(v == Fraction(24) for v in flat), name


def test_random_inputs_follow_declared_ranges():
    module = _module(
        "kernel k(in f: f64[50], in s: si32[50], in j: index<6>[50], "
        "in q: rational[20], in b: bool[10], out y: f64) { let y = f[_0]; }"
    )
    kernel = kernels_of(module)[0]
    rng = np.random.default_rng(123)
    inputs = random_inputs(kernel, rng)
    assert ((inputs["f"] >= -1.0) & (inputs["f"] <= 1.0)).all()
    assert ((inputs["s"] >= -1000) & (inputs["s"] <= 1000)).all()
    assert ((inputs["j"] >= 0) & (inputs["j"] < 6)).all()
    assert inputs["b"].dtype == bool
    for v in inputs["q"]:
        assert isinstance(v, Fraction)
        assert abs(v.numerator) <= 100 * 100 and v.denominator <= 100

    # Seeded generation is reproducible.
    again = random_inputs(kernel, np.random.default_rng(123))
    np.testing.assert_array_equal(inputs["f"], again["f"])
