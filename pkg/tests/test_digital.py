import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from tspqa.digital import (
    GadgetLayout,
    QuantumState,
    apply_diagonal,
    apply_driver,
    apply_problem_phase,
    apply_subtour_gadget,
    gadget_circuit,
    gadget_reference,
    gadget_unitary,
    problem_diagonal,
    resource_report_digital,
    run_digital_qa,
)
from tspqa.encoding import QuadraticModel, encode_edge
from tspqa.errors import CapacityError, PreconditionError
from tspqa.instances import CycleCover, generate_instance
from tspqa.oracles import optimal_tour
from tspqa.solvers import random_qubo

X = np.array([[0, 1], [1, 0]], dtype=complex)


def random_state(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=1 << n) + 1j * rng.normal(size=1 << n)
    return QuantumState(n, v / np.linalg.norm(v))


def test_driver_zero_angle_is_identity():
    st_ = random_state(3, 0)
    before = st_.amplitudes.copy()
    apply_driver(st_, 0.0)
    assert np.allclose(st_.amplitudes, before)


def test_driver_quarter_turn_balances_amplitudes():
    st_ = QuantumState.basis(1, 0)
    apply_driver(st_, math.pi / 4)
    assert np.allclose(np.abs(st_.amplitudes), [2**-0.5, 2**-0.5])


def test_driver_matches_matrix_exponential():
    st_ = random_state(1, 4)
    expected = expm(1j * 0.37 * X) @ st_.amplitudes
    apply_driver(st_, 0.37)
    assert np.allclose(st_.amplitudes, expected)


def test_driver_angles_add():
    a, b = random_state(3, 1), random_state(3, 1)
    apply_driver(apply_driver(a, 0.2), 0.3)
    apply_driver(b, 0.5)
    assert np.allclose(a.amplitudes, b.amplitudes)


def test_uniform_state_is_driver_eigenstate():
    st_ = QuantumState.uniform(3)
    apply_driver(st_, 0.4)
    assert np.allclose(st_.amplitudes, np.exp(3j * 0.4) * QuantumState.uniform(3).amplitudes)


def test_single_qubit_problem_phase():
    model = QuadraticModel(1, np.array([1.0]), {}, 0.0)
    st_ = QuantumState.uniform(1)
    apply_problem_phase(st_, model, 0.3)
    rel = st_.amplitudes[1] / st_.amplitudes[0]
    assert np.angle(rel) == pytest.approx(-0.3)


def test_gate_phase_equals_diagonal():
    model = random_qubo(8, 2)
    a, b = random_state(8, 2), random_state(8, 2)
    apply_problem_phase(a, model, 0.7)
    apply_diagonal(b, problem_diagonal(model), 0.7)
    assert np.allclose(a.amplitudes, b.amplitudes)


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(0, 1000), st.floats(-3, 3, allow_nan=False))
def test_norm_preserved(n, seed, angle):
    st_ = random_state(n, seed)
    apply_driver(st_, angle)
    apply_problem_phase(st_, random_qubo(n, seed), angle)
    assert st_.norm() == pytest.approx(1.0, abs=1e-10)


def test_capacity():
    with pytest.raises(CapacityError):
        QuantumState.basis(27)


# -- gadget -----------------------------------------------------------------------


def test_gadget_m4_basis_states():
    layout = GadgetLayout((0, 1, 2, 3), (4, 5), 0.9)
    for idx in range(16):
        st_ = QuantumState.basis(6, idx)
        apply_subtour_gadget(st_, layout)
        expected = np.exp(-0.9j) if idx == 0 else 1.0
        assert st_.amplitudes[idx] == pytest.approx(expected)
        assert st_.probabilities()[idx] == pytest.approx(1.0)


def test_gadget_theta_zero_is_identity():
    layout = GadgetLayout((0, 1, 2), (3,), 0.0)
    u = gadget_unitary(layout, 4)
    assert np.allclose(u, np.eye(16))


def test_gadget_requires_clean_ancillas():
    layout = GadgetLayout((0, 1, 2), (3,), 0.5)
    with pytest.raises(PreconditionError):
        apply_subtour_gadget(QuantumState.basis(4, 1 << 3), layout)


def test_gadget_layout_validation():
    with pytest.raises(PreconditionError):
        GadgetLayout((0,), (), 1.0)
    with pytest.raises(PreconditionError):
        GadgetLayout((0, 1, 2), (), 1.0)
    with pytest.raises(PreconditionError):
        GadgetLayout((0, 1, 2), (2,), 1.0)


@pytest.mark.parametrize("m", [2, 3, 4, 5, 6])
@pytest.mark.parametrize("schedule", ["tree", "ladder"])
def test_gadget_equals_reference_on_clean_ancillas(m, schedule):
    layout = GadgetLayout(tuple(range(m)), tuple(range(m, 2 * m - 2)), 1.3, schedule)
    n = 2 * m - 2
    u = gadget_unitary(layout, n)
    ref = gadget_reference(layout, n)
    clean = np.arange(1 << m)  # columns with every ancilla in |0>
    assert np.max(np.abs(u[:, clean] - np.diag(ref)[:, clean])) < 1e-12
    circ = gadget_circuit(layout)
    assert circ.toffoli_count == 2 * (m - 2)


@pytest.mark.parametrize("m", [2, 3, 4, 5, 8, 16])
def test_tree_depth_formula(m):
    layout = GadgetLayout(tuple(range(m)), tuple(range(m, 2 * m - 2)), 1.0)
    assert gadget_circuit(layout).layers == 2 * math.ceil(math.log2(m)) + 1


def test_gadget_commutes_with_problem_phase():
    layout = GadgetLayout((0, 1, 2), (3,), 0.8)
    model = random_qubo(3, 0)
    st0 = random_state(3, 5)
    amps = np.kron(np.array([1, 0]), st0.amplitudes)  # ancilla (bit 3) in |0>
    a, b = QuantumState(4, amps.copy()), QuantumState(4, amps.copy())
    apply_problem_phase(apply_subtour_gadget(a, layout), model, 0.4)
    apply_subtour_gadget(apply_problem_phase(b, model, 0.4), layout)
    assert np.allclose(a.amplitudes, b.amplitudes)


# -- end to end ---------------------------------------------------------------------


def test_zero_steps_is_uniform():
    res = run_digital_qa(generate_instance(4, 0), steps=0, dt=0.1)
    assert np.allclose(res.probabilities, 1 / 64)


def test_probabilities_normalised():
    res = run_digital_qa(generate_instance(5, 1), steps=10, dt=0.2, subsets=[((0, 1), 1.0)])
    assert res.probabilities.sum() == pytest.approx(1.0)
    assert res.n_qubits == 10 + (6 - 2)


def test_anneal_finds_optimal_tour():
    inst = generate_instance(5, 0)
    res = run_digital_qa(inst, steps=50, dt=0.1)
    assert isinstance(res.decoded, CycleCover) and res.decoded.is_tour
    assert res.decoded.total_weight == pytest.approx(optimal_tour(inst).length)


def test_digital_capacity():
    with pytest.raises(CapacityError):
        run_digital_qa(generate_instance(8, 0), steps=1, dt=0.1)


def test_sampling_deterministic():
    res = run_digital_qa(generate_instance(4, 0), steps=5, dt=0.2)
    assert res.sample(100, seed=1) == res.sample(100, seed=1)
    assert sum(res.sample(100, seed=1).values()) == 100


def test_resource_report():
    rep = resource_report_digital(12, [4, 2, 16])
    assert rep.problem_qubits == 66
    assert rep.ancillas == (2, 0, 14)
    assert rep.toffolis == (4, 0, 28)
    assert rep.depths == (5, 3, 9)
    assert rep.total_qubits == 80
