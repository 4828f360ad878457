from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heavyhex_pepo import CircuitSpec, back_propagate, build_ibm127, build_patch, extract_lightcone
from heavyhex_pepo.lattice import Lattice
from heavyhex_pepo.oracle import statevector_expectation
from heavyhex_pepo.pauli import PauliSum, observable_library, relabel, zero_state_expectation
from heavyhex_pepo.pepo import (
    Pepo,
    apply_rx_layer,
    apply_rzz_layer,
    close_and_contract,
    contraction_cost,
    evolve,
    init_pepo,
)
from heavyhex_pepo.tensor import MemoryCapError

from helpers import z62_t3, z62_t4

UNTRUNCATED = 4**8


@pytest.fixture(scope="module")
def ibm127():
    return build_ibm127()


def _physical(pepo: Pepo, site: int) -> np.ndarray:
    return pepo.tensors[site].reshape(4)


def test_init_product(ibm127):
    pepo = init_pepo(ibm127, observable_library("Z62"))
    assert set(pepo.bond_dims()) == {1}
    np.testing.assert_array_equal(_physical(pepo, 62), [0, 0, 0, 1])
    assert all(np.array_equal(_physical(pepo, s), [1, 0, 0, 0]) for s in range(127) if s != 62)
    assert pepo.log_scale == 0.0
    assert close_and_contract(pepo) == 1.0
    pepo.check()


def test_init_w10(ibm127):
    pepo = init_pepo(ibm127, observable_library("W10"))
    non_identity = [s for s in range(127) if not np.array_equal(_physical(pepo, s), [1, 0, 0, 0])]
    assert len(non_identity) == 10
    assert close_and_contract(pepo) == 0.0


def test_init_rejects(ibm127):
    two = PauliSum.single({1: "Z"})
    two.add(PauliSum.single({2: "Z"}).sorted_keys()[0], 1.0)
    with pytest.raises(ValueError):
        init_pepo(ibm127, two)
    with pytest.raises(ValueError):
        init_pepo(ibm127, PauliSum.single({1: "Z"}, 0.5))
    with pytest.raises(ValueError):
        init_pepo(build_patch(1, 1), observable_library("Z62"))


def test_rx_layer():
    lat = Lattice(1, ())
    pepo = init_pepo(lat, PauliSum.single({0: "Z"}))
    apply_rx_layer(pepo, 0.0)
    np.testing.assert_array_equal(_physical(pepo, 0), [0, 0, 0, 1])
    theta = 0.83
    apply_rx_layer(pepo, theta)
    np.testing.assert_allclose(_physical(pepo, 0), [0, 0, math.sin(theta), math.cos(theta)], atol=1e-15)
    clifford = init_pepo(lat, PauliSum.single({0: "Z"}))
    apply_rx_layer(clifford, math.pi / 2)
    np.testing.assert_array_equal(_physical(clifford, 0), [0, 0, 1, 0])


@pytest.mark.parametrize("ops", [{}, {0: "Z"}, {1: "Z"}, {0: "Z", 1: "Z"}])
def test_rzz_trivial_updates(ops):
    lat = Lattice(2, ((0, 1),))
    pepo = init_pepo(lat, PauliSum.single(ops))
    before = [t.copy() for t in pepo.tensors]
    _, dw = apply_rzz_layer(pepo, [0], chi=1)
    assert dw == [0.0]
    assert pepo.bond_dims() == [1]
    for a, b in zip(before, pepo.tensors):
        np.testing.assert_allclose(a * math.exp(pepo.log_scale / 2), b * math.exp(pepo.log_scale / 2), atol=1e-15)
    assert close_and_contract(pepo) == pytest.approx(1.0, abs=1e-15)


def test_rzz_layer_validation(ibm127):
    pepo = init_pepo(ibm127, observable_library("Z62"))
    e1, e2 = ibm127.edge_index(61, 62), ibm127.edge_index(62, 63)
    with pytest.raises(ValueError):
        apply_rzz_layer(pepo, [e1, e2], chi=2)
    with pytest.raises(ValueError):
        apply_rzz_layer(pepo, [e1], chi=0)


def test_zero_steps_unchanged(ibm127):
    pepo, report = evolve(init_pepo(ibm127, observable_library("W10")), CircuitSpec(0.3, 0), chi=4)
    assert set(pepo.bond_dims()) == {1}
    assert report.layers == []


@settings(max_examples=10, deadline=None)
@given(
    st.dictionaries(st.integers(0, 126), st.sampled_from("XYZ"), min_size=1, max_size=6),
    st.integers(0, 6),
    st.booleans(),
)
def test_clifford_point_stays_product(ibm127, ops, steps, extra):
    obs = PauliSum.single(ops)
    circuit = CircuitSpec(math.pi / 2, steps, extra)
    pepo, report = evolve(init_pepo(ibm127, obs), circuit, chi=1)
    assert set(pepo.bond_dims()) == {1}
    assert all(r.max_discarded == 0.0 for r in report.layers)
    assert close_and_contract(pepo) == zero_state_expectation(back_propagate(obs, circuit, ibm127))


def test_t3_untruncated_closed_form(ibm127):
    pepo, report = evolve(init_pepo(ibm127, observable_library("Z62")), CircuitSpec(0.4, 3), chi=UNTRUNCATED)
    assert report.max_discarded < 1e-25
    assert close_and_contract(pepo) == pytest.approx(z62_t3(0.4), abs=1e-10)


@pytest.mark.parametrize("theta", [0.25, 0.7, 1.2])
def test_t4_chi5(ibm127, theta):
    pepo, _ = evolve(init_pepo(ibm127, observable_library("Z62")), CircuitSpec(theta, 4), chi=5)
    assert close_and_contract(pepo) == pytest.approx(z62_t4(theta), abs=1e-12)


def test_light_cone_preserved(ibm127):
    for steps in (1, 2, 3):
        pepo, _ = evolve(init_pepo(ibm127, observable_library("Z62")), CircuitSpec(0.9, steps), chi=8)
        inside = ibm127.ball([62], steps)
        for k, (a, b) in enumerate(ibm127.edges):
            if a not in inside or b not in inside:
                assert pepo.weights[k].shape == (1,)
        for s in set(range(127)) - inside:
            v = _physical(pepo, s)
            assert np.all(np.abs(v[1:]) <= 1e-15 * abs(v[0]))


def test_report_structure(ibm127):
    circuit = CircuitSpec(0.5, 2, extra_rx=True)
    pepo, report = evolve(init_pepo(ibm127, observable_library("Z62")), circuit, chi=3)
    names = [r.name for r in report.layers]
    nl = len(ibm127.layers)
    assert names == ["RX"] + (["RZZ[%d]" % k for k in range(nl)] + ["RX"]) * 2
    for r in report.layers:
        assert 0.0 <= r.max_discarded <= 1.0
        assert r.max_discarded <= r.sum_discarded or r.sum_discarded == r.max_discarded == 0.0
    assert report.final_bond_dims == pepo.bond_dims()
    assert max(pepo.bond_dims()) <= 3
    pepo.check()


@pytest.mark.parametrize("theta, steps", [(0.3, 4), (0.8, 5), (1.1, 6)])
def test_discarded_weight_monotone_at_first_truncation(ibm127, theta, steps):
    # Runs share every input up to the first layer that truncates at the smaller chi,
    # so at that layer the larger chi cannot discard more.
    reports = {}
    for chi in (1, 2, 3, 4, 8):
        _, rep = evolve(init_pepo(ibm127, observable_library("Z62")), CircuitSpec(theta, steps), chi=chi)
        reports[chi] = [r.max_discarded for r in rep.layers]
    chis = sorted(reports)
    for lo, hi in zip(chis, chis[1:]):
        first = next((k for k, v in enumerate(reports[lo]) if v > 0), None)
        if first is None:
            continue
        for k in range(first + 1):
            assert reports[hi][k] <= reports[lo][k]


def test_deterministic(ibm127):
    runs = []
    for _ in range(2):
        pepo, _ = evolve(init_pepo(ibm127, observable_library("Z62")), CircuitSpec(0.6, 4), chi=3)
        runs.append(close_and_contract(pepo))
    assert runs[0] == runs[1]


def test_checkpoint_round_trip(ibm127, tmp_path):
    pepo, _ = evolve(init_pepo(ibm127, observable_library("Z62")), CircuitSpec(0.6, 3), chi=4)
    path = tmp_path / "state.npz"
    pepo.save(path)
    again = Pepo.load(path)
    assert again.log_scale == pepo.log_scale
    assert close_and_contract(again) == close_and_contract(pepo)
    again.check()


def test_memory_cap(ibm127):
    pepo, _ = evolve(init_pepo(ibm127, observable_library("Z62")), CircuitSpec(0.6, 3), chi=4)
    peak, _ = contraction_cost(pepo)
    with pytest.raises(MemoryCapError):
        close_and_contract(pepo, mem_cap=peak * 8 - 1)
    close_and_contract(pepo, mem_cap=peak * 8)


@settings(max_examples=8, deadline=None)
@given(st.floats(0.01, 1.56), st.integers(0, 6), st.booleans())
def test_matches_other_engines_on_tree(ibm127, theta, steps, extra):
    sub, mapping = extract_lightcone(ibm127, [62], 3)
    obs = relabel(observable_library("Z62"), mapping)
    circuit = CircuitSpec(theta, steps, extra)
    pepo, _ = evolve(init_pepo(sub, obs), circuit, chi=UNTRUNCATED)
    got = close_and_contract(pepo)
    assert got == pytest.approx(statevector_expectation(sub, circuit, obs), abs=1e-8)
    if steps <= 4:
        assert got == pytest.approx(zero_state_expectation(back_propagate(obs, circuit, sub)), abs=1e-8)


@settings(max_examples=6, deadline=None)
@given(st.floats(0.01, 1.56), st.integers(1, 6), st.integers(0, 11))
def test_matches_oracle_on_plaquette(theta, steps, site):
    lat = build_patch(1, 1)
    obs = PauliSum.single({site: "Z"})
    circuit = CircuitSpec(theta, steps)
    pepo, _ = evolve(init_pepo(lat, obs), circuit, chi=UNTRUNCATED)
    assert close_and_contract(pepo) == pytest.approx(statevector_expectation(lat, circuit, obs), abs=1e-8)
