import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from starforms import MultiPoly, PolyForm, build_chain, glue_bc, glue_no_bc, partition_of_unity
from starforms.chain import ChainError, NotClosedError, TraceError, smoothstep, verify_chain
from starforms.constants import BoundRangeError
from starforms.exterior import DegreeError

CHAIN2 = build_chain(2, n=2)


def test_smoothstep_ends():
    t = np.array([-1.0, 0.0, 0.5, 1.0, 2.0])
    assert np.allclose(smoothstep(t), [0, 0, 0.5, 1, 1])


def test_partition_sums_to_one():
    chain = build_chain(4, n=2)
    X = chain.domain.sample(10_000, np.random.default_rng(0))
    phi = chain.pou(X)
    assert np.max(np.abs(phi.sum(axis=1) - 1)) <= 1e-12
    assert phi.min() >= 0 and phi.max() <= 1
    assert np.max(np.abs(chain.pou.gradient(X).sum(axis=1))) <= 1e-12


def test_partition_midpoint_half():
    a, b = CHAIN2.segments[1][0], CHAIN2.segments[0][1]
    mid = np.array([[0.5 * (a + b), 0.1]])
    assert np.allclose(CHAIN2.pou(mid), [[0.5, 0.5]], atol=1e-14)


def test_partition_rejects_disjoint_links():
    with pytest.raises(ChainError):
        partition_of_unity([(0, 1), (2, 3)], 0.5, 2)


def test_separation_constant_grows_as_overlap_shrinks():
    vals = [build_chain(3, overlap_fraction=f).C_S for f in (0.3, 0.2, 0.1)]
    assert vals[0] < vals[1] < vals[2]


def test_separation_constant_rigid_motion():
    base = build_chain(3).C_S
    moved = build_chain(3, axis=[1.0, 1.0], origin=[2.0, -1.0]).C_S
    assert moved == pytest.approx(base, rel=1e-12)


def test_build_chain_rejects_bad_parameters():
    with pytest.raises(ChainError):
        build_chain(1)
    with pytest.raises(ChainError):
        build_chain(3, overlap_fraction=0.6)
    with pytest.raises(ChainError) as err:
        build_chain(3, link_length=1.0, radius=0.6, overlap_fraction=0.45)
    assert err.value.witness is not None


def test_verify_chain_reports_checks():
    checks = verify_chain(CHAIN2, samples=2000, seed=1)
    assert all(np.isfinite(v) for v in checks.values())


def test_glue_exact_differential():
    # u = dx_1 has primitive x_1 up to a constant on every link
    u = PolyForm(2, 1, {(1,): MultiPoly.constant(2, 1.0)})
    v, rep = glue_no_bc(build_chain(3), u, samples=200)
    assert rep.max_dv_residual <= 1e-12 and rep.max_interface_jump <= 1e-12
    X = np.array([[0.0, 0.0], [1.0, 0.2]])
    assert v(X)[1, 0] - v(X)[0, 0] == pytest.approx(1.0, abs=1e-12)
    assert rep.bound_holds


def test_glue_rejects_bad_inputs():
    not_closed = PolyForm(2, 1, {(1,): MultiPoly.variable(2, 1)})
    with pytest.raises(NotClosedError):
        glue_no_bc(CHAIN2, not_closed)
    with pytest.raises(DegreeError):
        glue_no_bc(CHAIN2, PolyForm.scalar(MultiPoly.constant(2, 1.0)))
    with pytest.raises(DegreeError):
        glue_no_bc(CHAIN2, PolyForm(3, 1, {(1,): MultiPoly.constant(3, 1.0)}))


def test_glue_bc_rejects_nonvanishing_trace():
    u = PolyForm(2, 1, {(1,): MultiPoly.constant(2, 1.0)})
    with pytest.raises(TraceError) as err:
        glue_bc(CHAIN2, u)
    assert err.value.value > 0


def test_glue_bc_rejects_top_degree():
    u = PolyForm(2, 2, {(1, 2): MultiPoly.constant(2, 1.0)})
    with pytest.raises(BoundRangeError):
        glue_bc(CHAIN2, u)


@settings(max_examples=8, deadline=None)
@given(st.integers(2, 5), st.floats(0.05, 0.3), st.integers(0, 2**31))
def test_partition_invariants(N, frac, seed):
    chain = build_chain(N, overlap_fraction=frac, samples=500, seed=seed % 1000)
    X = chain.domain.sample(500, np.random.default_rng(seed))
    phi = chain.pou(X)
    assert np.max(np.abs(phi.sum(axis=1) - 1)) <= 1e-12
    # each phi_i vanishes outside link i
    member = chain.membership(X)
    assert np.all(phi[~member] == 0)
