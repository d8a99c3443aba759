"""Smoke tests for the python bindings."""

import pytest

try:
    import pimflow as pf
except ImportError:  # in-build module is a bare extension
    import _pimflow as pf


def test_expr_render():
    e = pf.binary(pf.BinaryOp.Add, pf.input(0), pf.const_i32(1))
    assert e.render() == "(in0 + 1i32)"
    assert e.op_count() == 1


def test_reference_execute_map():
    p = pf.build([pf.ScalarType.Int32], {},
                 [pf.Stage.map(pf.binary(pf.BinaryOp.Add, pf.input(0), pf.const_i32(10)))])
    assert pf.reference_execute(p, [[1, 2, 3]]) == [11, 12, 13]


def test_run_matches_reference():
    p = pf.build(
        [pf.ScalarType.Int32, pf.ScalarType.Int32], {},
        [pf.Stage.map(pf.binary(pf.BinaryOp.Mul, pf.input(0), pf.input(1))),
         pf.Stage.reduce(pf.Reducer.sum(pf.ScalarType.Int32))])
    out = pf.run(p, [[1, 2, 3], [4, 5, 6]], dpus=2)
    assert out["output"] == [32]
    assert out["counters"]["host_to_mram_bytes"] == 24


def test_run_workload():
    r = pf.run_workload("reduce", 1000, seed=3, dpus=8)
    assert r["verified"]
    assert 1 <= r["loc"] <= 20


def test_errors_surface():
    with pytest.raises(pf.PimflowError):
        pf.build([pf.ScalarType.Int32], {}, [])


def test_loc_report():
    report = pf.loc_report()
    assert set(report) == {"vecadd", "select", "reduce", "unique", "histogram", "gemv"}
    assert all(1 <= v <= 20 for v in report.values())
