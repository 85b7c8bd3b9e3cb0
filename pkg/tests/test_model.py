import math

import numpy as np
import pytest

from placement._utils import DegenerateInputError, InfeasibleForceError, InvalidPositionError
from placement.model import ForceVector, Instance, compute_gap, max_gap, rms_gap


def test_instance_rejects_bounds_not_straddling_zero():
    with pytest.raises(DegenerateInputError):
        Instance(psi=[1.0], U=[[1.0]], f_lower=[0.5], f_upper=[1.0])


def test_instance_rejects_zero_column():
    with pytest.raises(DegenerateInputError, match="all-zero"):
        Instance(psi=[1.0, 2.0], U=[[1.0, 0.0], [1.0, 0.0]], f_lower=[-1, -1], f_upper=[1, 1])


def test_instance_rejects_shape_mismatch():
    with pytest.raises(DegenerateInputError):
        Instance(psi=[1.0, 2.0, 3.0], U=[[1.0], [1.0]], f_lower=[-1], f_upper=[1])
    with pytest.raises(ValueError):
        Instance(psi=[1.0, 2.0], U=[[1.0], [1.0]], f_lower=[-1, -1], f_upper=[1])


def test_instance_arrays_are_read_only(cancel_instance):
    with pytest.raises(ValueError):
        cancel_instance.U[0, 0] = 3.0
    assert cancel_instance.n == 2 and cancel_instance.m == 1


def test_fingerprint_tracks_content(rng, make_instance):
    a = make_instance(rng, 4, 3)
    b = Instance(psi=a.psi, U=a.U, f_lower=a.f_lower, f_upper=a.f_upper)
    assert a.fingerprint == b.fingerprint
    c = Instance(psi=a.psi + 1e-15, U=a.U, f_lower=a.f_lower, f_upper=a.f_upper)
    assert a.fingerprint != c.fingerprint


def test_compute_gap_empty_forces_returns_psi(cancel_instance):
    delta = compute_gap(cancel_instance, ForceVector())
    np.testing.assert_array_equal(delta, cancel_instance.psi)


def test_compute_gap_exact_cancellation(cancel_instance):
    delta = compute_gap(cancel_instance, ForceVector.from_mapping({0: -1.0}))
    np.testing.assert_array_equal(delta, [0.0, 0.0])


def test_compute_gap_matches_loop_oracle(rng, make_instance):
    inst = make_instance(rng, 5, 3)
    forces = ForceVector((2, 0), rng.uniform(-5, 5, size=2))
    expected = [
        inst.psi[i] + sum(inst.U[i, j] * v for j, v in zip(forces.positions, forces.values))
        for i in range(inst.n)
    ]
    np.testing.assert_allclose(compute_gap(inst, forces), expected, rtol=0, atol=1e-12)


def test_compute_gap_is_linear(rng, make_instance):
    inst = make_instance(rng, 6, 4)
    f1 = rng.uniform(-2, 2, size=4)
    f2 = rng.uniform(-2, 2, size=4)
    pos = tuple(range(4))
    g1 = compute_gap(inst, ForceVector(pos, f1)) - inst.psi
    g2 = compute_gap(inst, ForceVector(pos, f2)) - inst.psi
    g12 = compute_gap(inst, ForceVector(pos, f1 + f2)) - inst.psi
    np.testing.assert_allclose(g12, g1 + g2, atol=1e-12)


def test_compute_gap_errors(cancel_instance):
    with pytest.raises(InvalidPositionError):
        compute_gap(cancel_instance, ForceVector.from_mapping({3: 0.0}))
    with pytest.raises(IndexError):
        compute_gap(cancel_instance, ForceVector.from_mapping({-1: 0.0}))
    with pytest.raises(InfeasibleForceError):
        compute_gap(cancel_instance, ForceVector.from_mapping({0: 11.0}))


def test_force_vector_rejects_duplicates():
    with pytest.raises(DegenerateInputError):
        ForceVector((1, 1), [0.0, 0.0])


def test_force_vector_keeps_position_order():
    fv = ForceVector((3, 1), [2.0, -1.0])
    assert fv.positions == (3, 1) and len(fv) == 2
    assert fv.as_dict() == {3: 2.0, 1: -1.0}


@pytest.mark.parametrize(
    "delta, mg, rms",
    [
        ([0.0, 0.0, 0.0], 0.0, 0.0),
        ([1.0, -3.0, 2.0], 3.0, math.sqrt(14.0 / 3.0)),
        ([3.0, 4.0], 4.0, math.sqrt(12.5)),
    ],
)
def test_metrics_known_values(delta, mg, rms):
    assert max_gap(delta) == mg
    assert rms_gap(delta) == pytest.approx(rms, abs=1e-12)


def test_metrics_against_oracles(rng):
    delta = rng.standard_normal(20)
    assert max_gap(delta) == max(abs(x) for x in delta)
    mean_sq = sum(x * x for x in delta) / len(delta)
    assert rms_gap(delta) == pytest.approx(math.sqrt(mean_sq), abs=1e-12)
    assert max_gap(delta) >= rms_gap(delta) >= 0
    assert max_gap(-delta) == max_gap(delta)
    assert rms_gap(-delta) == rms_gap(delta)


def test_metrics_reject_empty():
    with pytest.raises(DegenerateInputError):
        max_gap([])
    with pytest.raises(DegenerateInputError):
        rms_gap(np.zeros(0))
