import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qconserve.errors import DimMismatch, ExplosionCap, InvalidInstrument, UnknownLabel
from qconserve.instrument import (
    Instrument, choi_matrix, compose, compose_povm, heisenberg_apply, heisenberg_each,
    identity_instrument, induced_povm, n_fold, projective_instrument, random_instrument,
    schrodinger_branch, schrodinger_each, unitary_instrument,
)
from qconserve.models import p_pc, p_pc_k, p_qc, photon_counting_instrument, quantum_counter_instrument
from qconserve.operators import adjoint, identity, is_psd, projector, random_density, random_hermitian
from qconserve.outcomes import OutcomeSpace, extend_kernel, random_kernel
from qconserve.povm import (
    Povm, find_post_processing, kernel_residual, post_process, povm_equal, random_povm,
    trivial_povm, validate_povm,
)

from conftest import LN2


def test_uneven_kraus_lists_are_padded():
    a = np.sqrt(0.5) * np.eye(2)
    ins = Instrument(["x", "y"], [[a, 0.0 * a], [a]])
    assert ins.kraus.shape == (2, 2, 2, 2)
    assert ins.normalization_defect() < 1e-15


def test_normalization_enforced():
    with pytest.raises(InvalidInstrument):
        Instrument([0], [0.9 * np.eye(2)])


def test_heisenberg_examples():
    pc = photon_counting_instrument(LN2, 2)
    d = pc.dim
    assert np.allclose(heisenberg_apply(pc, pc.space.labels, identity(d)), identity(d), atol=1e-15)
    assert np.array_equal(heisenberg_apply(pc, [], identity(d)), np.zeros((d, d)))
    out = heisenberg_apply(pc, [1], projector(0, d))
    assert np.allclose(out, 0.5 * projector(1, d), atol=1e-15)
    with pytest.raises(UnknownLabel):
        heisenberg_apply(pc, [7], identity(d))
    with pytest.raises(DimMismatch):
        heisenberg_apply(pc, [0], identity(2))


@given(st.integers(0, 2**32 - 1))
def test_heisenberg_linear_positive_additive(seed):
    r = np.random.default_rng(seed)
    ins = random_instrument(3, 3, r)
    a, b = random_hermitian(3, r), random_hermitian(3, r)
    x = r.normal()
    lhs = heisenberg_apply(ins, [0, 2], a + x * b)
    rhs = heisenberg_apply(ins, [0, 2], a) + x * heisenberg_apply(ins, [0, 2], b)
    assert np.allclose(lhs, rhs, atol=1e-12)
    p = random_density(3, r)
    assert is_psd(heisenberg_apply(ins, [1], p))
    parts = heisenberg_apply(ins, [0], a) + heisenberg_apply(ins, [1, 2], a)
    assert np.allclose(parts, heisenberg_apply(ins, [0, 1, 2], a), atol=1e-12)


def test_induced_povm_examples():
    u = np.array([[0, 1], [1, 0]], dtype=complex)
    assert povm_equal(induced_povm(unitary_instrument(u)), trivial_povm(2))
    pc = photon_counting_instrument(0.4, 5)
    e = induced_povm(pc)
    for m in range(6):
        assert np.allclose(np.diag(e[m]).real, [p_pc(m, n, 0.4) for n in range(6)], atol=1e-15)
        assert np.count_nonzero(e[m] - np.diag(np.diag(e[m]))) == 0
    qc = quantum_counter_instrument(LN2, 2, 20)
    e = induced_povm(qc)
    for m in range(21):
        assert e[m][0, 0].real == pytest.approx(2.0 ** -(m + 1), abs=1e-15)


def test_schrodinger_examples(rng):
    u = np.linalg.qr(rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)))[0]
    rho = random_density(3, rng)
    b = schrodinger_branch(unitary_instrument(u), 0, rho)
    assert b.prob == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(b.post, u @ rho @ adjoint(u), atol=1e-12)
    pc = photon_counting_instrument(LN2, 3)
    b = schrodinger_branch(pc, 1, projector(1, 4))
    assert b.prob == pytest.approx(0.5, abs=1e-15)
    assert np.allclose(b.post, projector(0, 4), atol=1e-15)
    b = schrodinger_branch(pc, 1, projector(0, 4))
    assert b.prob == 0.0 and b.post is None


@given(st.integers(0, 2**32 - 1))
def test_duality_and_total_probability(seed):
    r = np.random.default_rng(seed)
    ins = random_instrument(3, 4, r)
    rho, a = random_density(3, r), random_hermitian(3, r)
    total = 0.0
    for m in ins.space.labels:
        b = schrodinger_branch(ins, m, rho)
        total += b.prob
        lhs = np.trace(rho @ heisenberg_apply(ins, [m], a))
        assert abs(lhs - b.prob * np.trace(b.post @ a)) < 1e-10
    assert total == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(schrodinger_each(ins, rho).trace(axis1=1, axis2=2).sum(), 1.0)


def test_compose_examples(rng):
    i1 = random_instrument(2, 3, rng)
    c = compose(i1, identity_instrument(2, "id"))
    assert c.space.labels == tuple((m, "id") for m in range(3))
    assert np.allclose(induced_povm(c).effects, induced_povm(i1).effects, atol=1e-14)
    pc = photon_counting_instrument(0.7, 3)
    two = compose(pc, pc)
    eff = induced_povm(two)
    for m1 in range(4):
        for m2 in range(4):
            want = [p_pc(m2, n - m1, 0.7) * p_pc(m1, n, 0.7) for n in range(4)]
            assert np.allclose(np.diag(eff[(m1, m2)]).real, want, atol=1e-15)


@given(st.integers(0, 2**32 - 1))
def test_compose_defining_property(seed):
    r = np.random.default_rng(seed)
    i1, i2 = random_instrument(2, 2, r), random_instrument(2, 3, r)
    a = random_hermitian(2, r)
    c = compose(i1, i2)
    b1, b2 = [1], [0, 2]
    lhs = heisenberg_apply(c, [(x, y) for x in b1 for y in b2], a)
    rhs = heisenberg_apply(i1, b1, heisenberg_apply(i2, b2, a))
    assert np.allclose(lhs, rhs, atol=1e-12)
    assert c.normalization_defect() < 1e-12


@given(st.integers(0, 2**32 - 1))
def test_compose_associative_and_induced(seed):
    r = np.random.default_rng(seed)
    i1, i2, i3 = (random_instrument(2, 2, r) for _ in range(3))
    left = induced_povm(compose(compose(i1, i2), i3))
    right = induced_povm(compose(i1, compose(i2, i3)))
    assert left.space == right.space
    assert np.max(np.abs(left.effects - right.effects)) < 1e-12
    assert povm_equal(induced_povm(compose(i1, i2)), compose_povm(i1, induced_povm(i2)))


def test_compose_povm_examples(rng):
    ins = random_instrument(3, 2, rng)
    e = compose_povm(ins, trivial_povm(3, "*"))
    assert e.space.labels == ((0, "*"), (1, "*"))
    assert np.allclose(e.effects, induced_povm(ins).effects, atol=1e-14)
    f = random_povm(3, 3, rng)
    g = compose_povm(identity_instrument(3, "id"), f)
    assert np.allclose(g.effects, f.effects, atol=1e-14)
    assert validate_povm(compose_povm(ins, f)) == []


def test_compose_povm_pc_number():
    pc = photon_counting_instrument(LN2, 4)
    en = Povm(range(5), [projector(n, 5) for n in range(5)])
    comp = compose_povm(pc, en)
    for m in range(5):
        for n2 in range(5):
            eff = comp[(m, n2)]
            n = n2 + m
            if n <= 4:
                assert eff[n, n].real == pytest.approx(p_pc(m, n, LN2), abs=1e-15)
                assert np.count_nonzero(eff) == (1 if p_pc(m, n, LN2) > 0 else 0)
            else:
                assert np.count_nonzero(eff) == 0


def test_weighted_sums_pass_through_heisenberg(rng):
    for _ in range(5):
        ins = random_instrument(3, 3, rng)
        e = random_povm(3, 4, rng)
        f = rng.normal(size=4)
        comp = compose_povm(ins, e)
        b1 = [0, 2]
        lhs = sum(f[w] * comp[(m, w)] for m in b1 for w in range(4))
        rhs = heisenberg_apply(ins, b1, np.einsum("w,wab->ab", f, e.effects))
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_n_fold_examples():
    pc = photon_counting_instrument(LN2, 3)
    assert n_fold(pc, 1) is pc
    assert povm_equal(induced_povm(n_fold(pc, 2)), induced_povm(compose(pc, pc)))
    e3 = induced_povm(n_fold(pc, 3))
    assert all(len(lab) == 3 for lab in e3.space.labels)
    for m in range(4):
        tot = sum(e3[lab] for lab in e3.space.labels if sum(lab) == m)
        assert np.allclose(np.diag(tot).real, [p_pc_k(m, n, LN2, 3) for n in range(4)], atol=1e-14)
    with pytest.raises(ExplosionCap):
        n_fold(pc, 20)


@given(st.integers(0, 2**32 - 1))
def test_extended_kernel_transports_order(seed):
    r = np.random.default_rng(seed)
    d = int(r.integers(2, 5))
    ins = random_instrument(d, 2, r)
    e3 = random_povm(d, 3, r)
    nu = random_kernel(e3.space, OutcomeSpace.range(2), r)
    e2 = post_process(e3, nu)
    lifted = extend_kernel(nu, ins.space)
    res = kernel_residual(compose_povm(ins, e2), compose_povm(ins, e3), lifted)
    assert res <= kernel_residual(e2, e3, nu) + 1e-10


def test_projective_instrument_is_repeatable():
    p = projective_instrument([projector(0, 2), projector(1, 2)])
    f = induced_povm(p)
    assert find_post_processing(compose_povm(p, f), f).feasible
    assert find_post_processing(f, compose_povm(p, f)).feasible


def test_choi_matrix_is_psd_with_unit_partial_trace(rng):
    ins = random_instrument(2, 2, rng)
    total = sum(choi_matrix(ins, m) for m in ins.space.labels)
    assert all(is_psd(choi_matrix(ins, m)) for m in ins.space.labels)
    # tracing out the output leg of the summed Choi matrix gives the identity
    part = np.einsum("iaja->ij", total.reshape(2, 2, 2, 2))
    assert np.allclose(part, np.eye(2), atol=1e-12)


def test_heisenberg_each_matches_apply(rng):
    ins = random_instrument(3, 3, rng)
    a = random_hermitian(3, rng)
    each = heisenberg_each(ins, a)
    for k, m in enumerate(ins.space.labels):
        assert np.allclose(each[k], heisenberg_apply(ins, [m], a), atol=1e-13)


def test_qc_normalization_exact():
    qc = quantum_counter_instrument(0.3, 5, 25)
    assert qc.normalization_defect() < 1e-12
    assert qc.space.labels[-1] == "overflow"
    assert p_qc(0, 0, 0.3) == pytest.approx(np.exp(-0.3))
