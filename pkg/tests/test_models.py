import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qconserve.errors import GridDeficient, InvalidParams
from qconserve.instrument import compose, heisenberg_apply, induced_povm, n_fold
from qconserve.models import (
    OVERFLOW, REST, Grid, ModelParams, default_grid, gauss_legendre_grid, number_povm, p_pc,
    p_pc_k, p_qc, p_qc_intensity, photon_counting_instrument, poisson_effect, poisson_weights,
    quantum_counter_instrument, x_povm,
)
from qconserve.operators import identity, projector
from qconserve.povm import validate_povm

from conftest import LN2


def test_p_pc_examples():
    assert p_pc(0, 0, 0.3) == 1.0
    assert p_pc(2, 1, 0.3) == 0.0
    assert p_pc(1, 2, LN2) == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("lt", [0.1, LN2, 2.0])
def test_p_pc_normalized(lt):
    for n in range(31):
        assert abs(p_pc(np.arange(n + 1), n, lt).sum() - 1.0) < 1e-12


def test_p_qc_examples():
    assert p_qc(0, 0, LN2) == pytest.approx(0.5, abs=1e-15)
    assert p_qc(1, 0, LN2) == pytest.approx(0.25, abs=1e-15)
    assert p_qc(np.arange(41), 0, LN2).sum() == pytest.approx(1 - 2.0 ** -41, abs=1e-15)


@given(st.floats(0.05, 3.0), st.integers(0, 10))
def test_p_qc_partial_sums_monotone_to_one(lt, n):
    partial = np.cumsum(p_qc(np.arange(4000), n, lt))
    assert np.all(np.diff(partial) >= 0)
    assert partial[-1] == pytest.approx(1.0, abs=1e-9)


def test_p_pc_k_examples():
    assert p_pc_k(1, 1, LN2, 2) == pytest.approx(0.75, abs=1e-15)
    assert p_pc_k(3, 3, 0.4, 5) == pytest.approx((1 - np.exp(-2.0)) ** 3, rel=1e-13)
    assert p_pc_k(0, 1, LN2, 10) == pytest.approx(2.0 ** -10, rel=1e-12)
    with pytest.raises(InvalidParams):
        p_pc_k(0, 0, LN2, 0)


def test_p_qc_intensity_examples():
    assert p_qc_intensity(0, 0.0, 0.5) == 1.0
    assert p_qc_intensity(3, 0.0, 0.5) == 0.0
    assert p_qc_intensity(0, 1.0, LN2) == pytest.approx(np.exp(-1), abs=1e-15)
    m = np.arange(200)
    for x, lt in [(0.5, 0.2), (2.0, LN2), (4.0, 1.0)]:
        assert (m * p_qc_intensity(m, x, lt)).sum() == pytest.approx(np.expm1(lt) * x, abs=1e-10)


def test_lambda_t_validated():
    with pytest.raises(InvalidParams):
        p_pc(0, 0, 0.0)
    with pytest.raises(InvalidParams):
        photon_counting_instrument(-1.0, 3)


def test_pc_instrument_examples():
    pc0 = photon_counting_instrument(0.5, 0)
    assert pc0.space.labels == (0,) and np.allclose(pc0.kraus[0, 0], [[1.0]])
    pc = photon_counting_instrument(0.8, 6)
    for m in range(7):
        for n1 in range(7):
            out = heisenberg_apply(pc, [m], projector(n1, 7))
            want = np.zeros((7, 7))
            if m + n1 <= 6:
                want[m + n1, m + n1] = p_pc(m, m + n1, 0.8)
            assert np.max(np.abs(out - want)) < 1e-15
    e = induced_povm(pc)
    for m in range(7):
        assert np.allclose(e[m], np.diag([p_pc(m, n, 0.8) for n in range(7)]), atol=1e-15)


@pytest.mark.parametrize("lt", [0.1, LN2, 2.0])
def test_model_normalization(lt):
    assert photon_counting_instrument(lt, 30).normalization_defect() < 1e-12
    assert quantum_counter_instrument(lt, 30, 40).normalization_defect() < 1e-12


def test_qc_instrument_examples():
    qc = quantum_counter_instrument(LN2, 3, 20)
    e = induced_povm(qc)
    for m in range(21):
        assert e[m][0, 0].real == pytest.approx(2.0 ** -(m + 1), abs=1e-15)
    assert e[OVERFLOW][0, 0].real == pytest.approx(2.0 ** -21, rel=1e-6)
    assert qc.dim == 3 + 20 + 1
    # raising structure: K_m maps |n> to |n + m>
    k = qc.kraus_of(2)[0]
    assert k[3, 1] == pytest.approx(np.sqrt(p_qc(2, 1, LN2)))
    assert validate_povm(e) == []


def test_qc_pointwise_identity():
    lt, cutoff = LN2, 8
    qc = quantum_counter_instrument(lt, cutoff, 40)
    q = np.exp(-lt)
    for x in [0.5, 1.0, 3.0, 5.0, 8.0]:
        f = poisson_effect(x, qc.dim - 1)
        for m in range(11):
            lhs = heisenberg_apply(qc, [m], f)[: cutoff + 1, : cutoff + 1]
            rhs = q * p_qc_intensity(m, q * x, lt) * poisson_effect(q * x, cutoff)
            assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_qc_k_fold_against_quadrature():
    lt, cutoff, m_max = 0.4, 2, 12
    qc = quantum_counter_instrument(lt, cutoff, m_max)
    t, w = np.polynomial.legendre.leggauss(200)
    xs, ws = 30.0 * (t + 1), 30.0 * w
    for k, ms in [(1, (2,)), (2, (0, 1)), (3, (1, 0, 2))]:
        op = identity(qc.dim)
        for m in reversed(ms):
            op = heisenberg_apply(qc, [m], op)
        for n in range(cutoff + 1):
            integrand = np.ones_like(xs)
            for i, m in enumerate(ms):
                integrand = integrand * p_qc_intensity(m, np.exp(lt * i) * xs, lt)
            want = np.sum(ws * integrand * poisson_weights_at(n, xs))
            assert abs(op[n, n].real - want) < 1e-6


def poisson_weights_at(n, xs):
    return np.array([poisson_weights(x, n + 1)[n] for x in xs])


def test_pc_n_fold_closed_form():
    pc = photon_counting_instrument(LN2, 10)
    for k in range(1, 4):
        e = induced_povm(n_fold(pc, k))
        for m in range(11):
            tot = np.zeros(11)
            for lab in e.space.labels:
                if (sum(lab) if k > 1 else lab) == m:
                    tot += np.diag(e[lab]).real
            assert np.max(np.abs(tot - p_pc_k(m, np.arange(11), LN2, k))) < 1e-10


def test_number_povm_examples():
    assert np.allclose(number_povm(0).effects, [[[1.0]]])
    e = number_povm(4)
    assert np.allclose(e.effects.sum(axis=0), identity(5))
    for a in range(5):
        for b in range(5):
            prod = e.effects[a] @ e.effects[b]
            assert np.allclose(prod, e.effects[a] if a == b else 0)
    assert e[2][2, 2] == 1 and np.count_nonzero(e[2]) == 1


def test_poisson_effect_examples():
    assert np.allclose(poisson_effect(0.0, 3), projector(0, 4))
    f = poisson_effect(1.0, 4)
    assert f[0, 0].real == pytest.approx(0.3678794, abs=1e-7)
    assert f[2, 2].real == pytest.approx(0.1839397, abs=1e-7)
    assert np.trace(f).real == pytest.approx(sum(np.exp(-1) / math.factorial(n) for n in range(5)))
    with pytest.raises(InvalidParams):
        poisson_effect(-1.0, 2)


def test_x_povm_examples():
    e = x_povm(8, gauss_legendre_grid(64, 40.0))
    assert np.diag(e[REST]).real.max() < 1e-8
    assert e.space.labels[-1] == REST and len(e) == 65
    g = gauss_legendre_grid(64, 40.0)
    assert np.sum(g.weights * np.exp(-g.nodes)) == pytest.approx(1.0, abs=1e-10)
    e0 = x_povm(0, g)
    assert e0[REST][0, 0].real == pytest.approx(1 - np.sum(g.weights * np.exp(-g.nodes)), abs=1e-15)
    assert validate_povm(x_povm(6)) == []


def test_x_povm_rejects_overshooting_grid():
    g = Grid([1.0, 2.0], [3.0, 3.0])
    with pytest.raises(GridDeficient):
        x_povm(2, g)


def test_grid_and_params_validation():
    with pytest.raises(InvalidParams):
        Grid([2.0, 1.0], [1.0, 1.0])
    with pytest.raises(InvalidParams):
        Grid([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(InvalidParams) as err:
        ModelParams(lambda_t=-1, cutoff=-2, m_max=-1)
    msg = str(err.value)
    assert "lambda_t" in msg and "cutoff" in msg and "m_max" in msg
    p = ModelParams(0.5, 10)
    assert p.grid().nodes[-1] < 50.0 and len(p.grid()) == 64
    assert default_grid(12).nodes[-1] > 59.0


def test_pc_two_step_chain():
    pc = photon_counting_instrument(0.9, 5)
    e = induced_povm(compose(pc, pc))
    for m1 in range(6):
        for m2 in range(6):
            want = [p_pc(m2, n - m1, 0.9) * p_pc(m1, n, 0.9) for n in range(6)]
            assert np.allclose(np.diag(e[(m1, m2)]).real, want, atol=1e-15)
