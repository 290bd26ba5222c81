"""Tests for NPT witnesses, separable superchannels, the bound POVM and the no-go check."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pptdyn.config import settings
from pptdyn.exceptions import DimensionError, InvalidObjectError, SolverError
from pptdyn.measures import superchannel_spec
from pptdyn.quantum import (
    identity_superchannel,
    input_swap_superchannel,
    is_channel,
    is_ppt_channel,
    is_superchannel_valid,
    random_ppt_channel,
    random_ppt_comb,
    random_ppt_pre_post,
    random_ppt_superchannel,
    swap_channel,
)
from pptdyn.tensor import identity, is_psd, partial_transpose
from pptdyn.witness_scenarios import (
    Witness,
    bound_povm_channel,
    component_pairings,
    distillation_no_go,
    random_witness,
    seps_from_pre_post,
    seps_ppt_relaxation,
    sequential_no_go,
    split_product_operator,
    tiles_state,
    witness_assemble,
    witness_pairing,
    witness_validate,
)

SOURCE = (1, 1, 2, 2)
TARGET = (1, 1, 2, 2)
HADAMARD = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
PAULI_X = np.array([[0, 1], [1, 0]])
PAULI_Z = np.diag([1, -1])


class TestWitness:
    def test_random_witness_is_assembled(self):
        w = random_witness(SOURCE, TARGET, seed=1)
        assert isinstance(w, Witness)
        assert w.matrix.labels == superchannel_spec(SOURCE, TARGET).labels
        assert w.source_dims == SOURCE
        assert w.target_dims == TARGET

    def test_y_and_z_vanish_on_superchannels(self):
        w = random_witness(SOURCE, TARGET, seed=2)
        for seed in range(3):
            theta = random_ppt_superchannel(SOURCE, TARGET, seed=seed)
            pairings = component_pairings(w, theta)
            assert abs(pairings['Y']) <= 1e-8
            assert abs(pairings['Z']) <= 1e-8
            assert pairings['P'] >= -1e-10
            assert pairings['X'] >= -1e-10

    def test_pairing_is_sum_of_components(self):
        w = random_witness(SOURCE, TARGET, seed=3)
        theta = identity_superchannel(SOURCE)
        assert witness_pairing(w, theta) == pytest.approx(sum(component_pairings(w, theta).values()))

    def test_validate_random_witness(self):
        w = random_witness(SOURCE, TARGET, seed=4)
        min_value, _ = witness_validate(w)
        assert min_value >= -1e-6

    def test_negative_direction_attains_min_eigenvalue(self):
        w = random_witness(SOURCE, TARGET, seed=5)
        v = w.negative_direction
        assert np.linalg.norm(v) == pytest.approx(1.0)
        assert np.real(v.conj() @ w.matrix.entries @ v) == pytest.approx(w.min_eigenvalue, abs=1e-10)

    def test_stalled_validation_raises(self, monkeypatch):
        monkeypatch.setattr(settings, "max_iter", 1)
        with pytest.raises(SolverError) as info:
            witness_validate(random_witness(SOURCE, TARGET, seed=4))
        assert info.value.dump.startswith("# pptdyn conic program")

    def test_identity_functional(self):
        # Tr J is fixed by the unit marginal: |A1 B1 A0' B0'|
        eye = identity(superchannel_spec(SOURCE, TARGET))
        min_value, is_witness = witness_validate(eye)
        assert min_value == pytest.approx(4.0, abs=1e-5)
        assert not is_witness

    def test_z_must_be_traceless(self):
        d = superchannel_spec(SOURCE, TARGET).total_dim
        with pytest.raises(InvalidObjectError):
            witness_assemble(np.eye(d), np.eye(d), np.zeros((4, 4)), np.eye(4), SOURCE, TARGET)

    def test_y_marginal_must_vanish(self):
        d = superchannel_spec(SOURCE, TARGET).total_dim
        with pytest.raises(InvalidObjectError):
            witness_assemble(np.eye(d), np.eye(d), np.eye(4), np.zeros((4, 4)), SOURCE, TARGET)

    def test_p_must_be_psd(self):
        d = superchannel_spec(SOURCE, TARGET).total_dim
        with pytest.raises(InvalidObjectError):
            witness_assemble(-np.eye(d), np.eye(d), np.zeros((4, 4)), np.zeros((4, 4)),
                             SOURCE, TARGET)

    def test_wrong_component_shape(self):
        d = superchannel_spec(SOURCE, TARGET).total_dim
        with pytest.raises(InvalidObjectError):
            witness_assemble(np.eye(d), np.eye(d), np.zeros((8, 8)), np.zeros((4, 4)),
                             SOURCE, TARGET)


class TestSeparableSuperchannels:
    def pre(self):
        return [(np.eye(1), np.eye(1))]

    def post(self, p: float = 0.3):
        return [(np.sqrt(p) * HADAMARD, np.eye(2)),
                (np.sqrt(1 - p) * PAULI_Z, PAULI_X)]

    def test_product_kraus_superchannel(self):
        theta = seps_from_pre_post(self.pre(), self.post(), SOURCE, TARGET)
        assert is_superchannel_valid(theta)
        assert seps_ppt_relaxation(theta)

    def test_full_product_operators_are_split(self):
        post = [np.kron(HADAMARD, PAULI_X)]
        theta = seps_from_pre_post(self.pre(), post, SOURCE, TARGET)
        assert seps_ppt_relaxation(theta)

    def test_split_recovers_factors(self):
        x, y = split_product_operator(np.kron(HADAMARD, PAULI_Z), (2, 2), (2, 2))
        assert_allclose(np.kron(x, y), np.kron(HADAMARD, PAULI_Z), atol=1e-12)

    def test_entangling_operator_rejected(self):
        cnot = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]])
        with pytest.raises(InvalidObjectError):
            split_product_operator(cnot, (2, 2), (2, 2))

    def test_wrong_kraus_shape(self):
        with pytest.raises(DimensionError):
            seps_from_pre_post(self.pre(), [(np.eye(3), np.eye(2))], SOURCE, TARGET)

    def test_input_swap_fails_relaxation(self):
        assert not seps_ppt_relaxation(input_swap_superchannel((2, 2, 1, 1)))


class TestBoundPovm:
    def test_tiles_state_is_ppt(self):
        rho = tiles_state()
        assert np.trace(rho.entries).real == pytest.approx(1.0)
        assert is_psd(rho)
        assert is_psd(partial_transpose(rho, ("B",)))

    def test_tiles_state_has_rational_entries(self):
        rho = tiles_state()
        scaled = rho.entries * 72
        assert_allclose(scaled, np.round(scaled.real), atol=1e-12)
        e = np.eye(3)
        for tile in (np.kron(e[0], e[0] - e[1]), np.kron(e[1] - e[2], e[0]), np.ones(9)):
            assert_allclose(rho.entries @ tile, 0, atol=1e-12)

    def test_povm_channel_is_ppt(self):
        channel, report = bound_povm_channel(tiles_state(), measures=False)
        assert is_channel(channel)
        assert is_ppt_channel(channel)
        assert report.is_ppt_channel
        assert report.min_pt_eigenvalue >= -1e-9
        assert report.beta_max_eigenvalue == pytest.approx(0.25)
        assert report.ln_max is None

    def test_beta_above_identity_rejected(self):
        with pytest.raises(InvalidObjectError):
            bound_povm_channel(tiles_state() * 5.0, measures=False)

    @pytest.mark.slow
    def test_povm_channel_measures(self):
        _, report = bound_povm_channel(tiles_state())
        assert report.ln_max <= 1e-5
        assert report.negativity <= 1e-5


class TestNoGo:
    def test_ppt_comb_on_ppt_channels(self):
        rng = np.random.default_rng(7)
        comb = random_ppt_comb([(2, 2, 2, 2)], rng)
        report = distillation_no_go(comb, [random_ppt_channel((2, 2, 2, 2), rng)])
        assert report.preconditions_met
        assert not report.violation
        assert report.output_dims == (1, 1, 2, 2)
        assert report.certified_separable
        assert report.min_pt_eigenvalue >= -1e-8

    def test_non_ppt_input_is_a_precondition_failure(self):
        comb = random_ppt_comb([(2, 2, 2, 2)], seed=7)
        report = distillation_no_go(comb, [swap_channel(2)])
        assert not report.preconditions_met
        assert not report.violation
        assert report.min_pt_eigenvalue is None

    def test_wrong_slot_count(self):
        comb = random_ppt_comb([(2, 2, 2, 2)], seed=7)
        report = distillation_no_go(comb, [])
        assert any("slots" in reason for reason in report.precondition_failures)

    def test_sequential_repetition(self, mixed2):
        pre, post = random_ppt_pre_post((1, 1, 2, 2), (2, 2, 2, 2), seed=9)
        report = sequential_no_go(pre, post, mixed2, repetitions=2)
        assert report.preconditions_met
        assert not report.violation
        assert report.slots == 2
        assert report.output_dims == (2, 2, 2, 2)


@pytest.mark.slow
class TestSeededScenarios:
    @pytest.mark.parametrize("seed", range(100))
    def test_two_slot_no_go(self, seed):
        rng = np.random.default_rng(seed)
        comb = random_ppt_comb([(2, 2, 2, 2)] * 2, rng)
        inputs = [random_ppt_channel((2, 2, 2, 2), rng) for _ in range(2)]
        report = distillation_no_go(comb, inputs)
        assert report.preconditions_met
        assert report.min_pt_eigenvalue >= -1e-8

    @pytest.mark.parametrize("seed", range(50))
    def test_random_witnesses_are_valid(self, seed):
        min_value, _ = witness_validate(random_witness(SOURCE, TARGET, seed=seed))
        assert min_value >= -1e-6
