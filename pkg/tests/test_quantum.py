"""Tests for channels, superchannels, combs and POVMs."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from pptdyn.exceptions import DimensionError, InvalidObjectError, LabelError
from pptdyn.quantum import (
    A0,
    B0,
    BipartiteChannel,
    Channel,
    Comb,
    Povm,
    Superchannel,
    apply_channel,
    apply_superchannel,
    channel_gamma,
    channel_tensor,
    comb_apply,
    comb_from_channels,
    comb_gamma,
    depolarizing_channel,
    exact_cost_superchannel,
    identity_superchannel,
    input_swap_superchannel,
    is_channel,
    is_comb_valid,
    is_povm_channel,
    is_ppt_channel,
    is_ppt_comb,
    is_ppt_superchannel,
    is_restricted_ppt,
    is_superchannel_valid,
    isotropic_state,
    phi_plus,
    povm_channel,
    random_channel,
    random_ppt_channel,
    random_ppt_comb,
    random_ppt_pre_post,
    random_ppt_superchannel,
    replacer_superchannel,
    sequential_comb,
    state_preparation,
    superchannel_from_pre_post,
    superchannel_gamma,
    twirl,
)
from pptdyn.quantum.channels import mix_to_ppt, povm_from_channel
from pptdyn.tensor import DimSpec, LabeledMatrix, identity, kron, partial_transpose, unnormalized_max_entangled


def density(rng, d: int, label: str) -> LabeledMatrix:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    rho = g @ g.conj().T
    return LabeledMatrix(DimSpec.of((label, d)), rho / np.trace(rho).real, hermitian=True)


class TestChannels:
    def test_named_channels_are_channels(self, identity2, swap2, depolarizing2, phi2):
        for n in (identity2, swap2, depolarizing2, phi2):
            assert is_channel(n)

    def test_ppt_classification(self, identity2, swap2, depolarizing2, phi2, mixed2):
        assert is_ppt_channel(identity2)
        assert is_ppt_channel(depolarizing2)
        assert is_ppt_channel(mixed2)
        assert not is_ppt_channel(swap2)
        assert not is_ppt_channel(phi2)

    def test_isotropic_threshold(self):
        assert is_ppt_channel(state_preparation(isotropic_state(2, 0.5)))
        assert not is_ppt_channel(state_preparation(isotropic_state(2, 0.6)))
        assert is_ppt_channel(state_preparation(isotropic_state(3, 1 / 3)))

    def test_gamma_twice_is_identity(self, rng):
        n = random_channel((2, 2, 2, 2), rng)
        back = channel_gamma(channel_gamma(n))
        assert_allclose(back.choi.entries, n.choi.entries, atol=1e-10)

    def test_swap_exchanges_product_inputs(self, rng, swap2):
        a, b = density(rng, 2, "A"), density(rng, 2, "B")
        out = apply_channel(swap2, kron(a, b))
        assert_allclose(out.entries, np.kron(b.entries, a.entries), atol=1e-10)

    def test_identity_channel_application(self, rng, identity2):
        rho = kron(density(rng, 2, "A"), density(rng, 2, "B"))
        assert_allclose(apply_channel(identity2, rho).entries, rho.entries, atol=1e-10)

    def test_state_preparation_ignores_input(self):
        n = state_preparation(phi_plus(2))
        assert n.is_state
        assert n.dims == (1, 1, 2, 2)

    def test_random_channels(self, rng):
        assert is_channel(random_channel((2, 1, 1, 2), rng))
        n = random_ppt_channel((2, 2, 2, 2), rng)
        assert is_channel(n)
        assert is_ppt_channel(n)

    def test_random_channel_is_seeded(self):
        a = random_channel((2, 2, 2, 2), 7)
        b = random_channel((2, 2, 2, 2), 7)
        assert_allclose(a.choi.entries, b.choi.entries)

    def test_mix_to_ppt_keeps_interior_channels(self, depolarizing2):
        _, lam = mix_to_ppt(depolarizing2)
        assert lam == 1.0

    def test_mix_to_ppt_shrinks_swap(self, swap2):
        n, lam = mix_to_ppt(swap2)
        assert 0.0 < lam < 1.0
        assert is_ppt_channel(BipartiteChannel(n.choi))

    def test_channel_tensor_dims(self, identity2, phi2):
        n = channel_tensor(identity2, phi2)
        assert n.dims == (2, 2, 4, 4)
        assert is_channel(n)

    def test_wrong_dims(self):
        with pytest.raises(DimensionError):
            random_channel((2, 2, 2))

    def test_wrong_labels(self):
        spec = DimSpec.of(("X", 1), ("Y", 1), ("Z", 2), ("W", 2))
        with pytest.raises(LabelError):
            BipartiteChannel(identity(spec))

    def test_twirl_fixes_phi_plus(self):
        g = twirl(2)
        assert is_channel(g)
        out = apply_channel(g, phi_plus(2))
        assert_allclose(out.entries, phi_plus(2).entries, atol=1e-10)


class TestPovm:
    def computational(self):
        spec = DimSpec.of((A0, 2), (B0, 1))
        return Povm([LabeledMatrix(spec, np.diag([1.0, 0.0]), True),
                     LabeledMatrix(spec, np.diag([0.0, 1.0]), True)])

    def test_povm_channel(self):
        n = povm_channel(self.computational())
        assert n.dims == (2, 1, 2, 1)
        assert is_channel(n)
        assert is_povm_channel(n)
        assert is_ppt_channel(n)

    def test_povm_round_trip_elements(self):
        p = self.computational()
        recovered = povm_from_channel(povm_channel(p))
        for e, r in zip(p.elements, recovered):
            assert_allclose(e.entries, r.entries, atol=1e-12)

    def test_incomplete_povm_rejected(self):
        spec = DimSpec.of((A0, 2), (B0, 1))
        with pytest.raises(InvalidObjectError):
            Povm([LabeledMatrix(spec, np.diag([1.0, 0.0]), True)])

    def test_identity_channel_is_not_a_povm_channel(self, identity2):
        assert not is_povm_channel(identity2)


class TestSuperchannels:
    def test_identity_superchannel(self, rng):
        dims = (1, 1, 2, 2)
        theta = identity_superchannel(dims)
        assert is_superchannel_valid(theta)
        assert is_ppt_superchannel(theta)
        n = random_channel(dims, rng)
        assert_allclose(apply_superchannel(theta, n).choi.entries, n.choi.entries, atol=1e-10)

    def test_input_swap_is_valid_but_not_ppt(self):
        theta = input_swap_superchannel((2, 2, 1, 1))
        assert is_superchannel_valid(theta)
        assert not is_ppt_superchannel(theta)

    def test_input_swap_needs_equal_inputs(self):
        with pytest.raises(DimensionError):
            input_swap_superchannel((2, 1, 1, 1))

    def test_replacer_outputs_target(self, rng, phi2):
        theta = replacer_superchannel((1, 1, 2, 2), phi2)
        assert is_superchannel_valid(theta)
        out = apply_superchannel(theta, random_channel((1, 1, 2, 2), rng))
        assert_allclose(out.choi.entries, phi2.choi.entries, atol=1e-10)

    def test_random_ppt_superchannel(self):
        theta = random_ppt_superchannel((1, 1, 2, 2), seed=3)
        assert is_superchannel_valid(theta)
        assert is_ppt_superchannel(theta)

    def test_superchannel_preserves_channels(self, rng):
        pre, post = random_ppt_pre_post((1, 1, 2, 2), (1, 1, 2, 2), rng)
        theta = superchannel_from_pre_post(pre, post)
        n = random_channel((1, 1, 2, 2), rng)
        assert is_channel(apply_superchannel(theta, n))

    def test_ppt_superchannel_maps_ppt_to_ppt(self, rng, mixed2):
        theta = random_ppt_superchannel((1, 1, 2, 2), seed=rng)
        assert is_ppt_channel(apply_superchannel(theta, mixed2))

    def test_gamma_commutes_with_application(self, rng):
        theta = random_ppt_superchannel((1, 1, 2, 2), seed=rng)
        n = random_channel((1, 1, 2, 2), rng)
        lhs = channel_gamma(apply_superchannel(theta, n))
        rhs = apply_superchannel(superchannel_gamma(theta), channel_gamma(n))
        assert_allclose(lhs.choi.entries, rhs.choi.entries, atol=1e-10)

    def test_exact_cost_superchannel_produces_target(self, phi2):
        r = depolarizing_channel((1, 1, 2, 2))
        theta = exact_cost_superchannel(phi2, r, 2)
        assert is_superchannel_valid(theta)
        out = apply_superchannel(theta, phi_plus_slot(2))
        assert_allclose(out.choi.entries, phi2.choi.entries, atol=1e-10)

    def test_exact_cost_superchannel_ppt_condition(self, phi2):
        # with 𝒩 = φ⁺ the condition −ℛ^Γ ≤ 𝒩^Γ ≤ 3ℛ^Γ is tight for ℛ = (I − φ⁺)/3
        rest = state_preparation((identity(phi_plus(2).spec) - phi_plus(2)) / 3)
        assert is_ppt_superchannel(exact_cost_superchannel(phi2, rest, 2))
        noise = state_preparation(identity(phi_plus(2).spec) / 4)
        theta = exact_cost_superchannel(phi2, noise, 2)
        assert is_superchannel_valid(theta)
        assert not is_ppt_superchannel(theta)

    def test_sampled_pre_post_is_restricted_ppt(self, rng):
        pre, post = random_ppt_pre_post((2, 2, 1, 2), (1, 1, 2, 2), rng)
        assert is_restricted_ppt(pre, post)

    def test_wire_across_the_cut_is_not_restricted_ppt(self, rng):
        _, post = random_ppt_pre_post((1, 2, 1, 1), (2, 1, 1, 1), rng)
        # pre-processing that hands Alice's input straight to Bob
        wire = kron(unnormalized_max_entangled(("A0'", 2), ("B0", 2)),
                    identity(DimSpec.of(("B0'", 1), ("A0", 1), ("MA", 1), ("MB", 1))))
        pre = Channel(wire, ("A0'", "B0'"), ("A0", "B0", "MA", "MB"), ("B0'", "B0", "MB"))
        assert pre.is_cp()
        assert not is_restricted_ppt(pre, post)

    def test_wrong_superchannel_labels(self, identity2):
        with pytest.raises(LabelError):
            Superchannel(identity2.choi)


def phi_plus_slot(m: int) -> BipartiteChannel:
    return state_preparation(phi_plus(m))


class TestCombs:
    def test_random_ppt_comb(self):
        c = random_ppt_comb([(2, 2, 2, 2)], seed=5)
        assert isinstance(c, Comb)
        assert c.slot_count == 1
        assert c.slot_dims(1) == (2, 2, 2, 2)
        assert is_comb_valid(c)
        assert is_ppt_comb(c)

    def test_comb_apply_gives_channel(self, identity2):
        c = random_ppt_comb([(2, 2, 2, 2)], seed=5)
        out = comb_apply(c, [identity2])
        assert is_channel(out)
        assert out.dims == (1, 1, 2, 2)

    def test_comb_apply_slot_count(self, identity2):
        c = random_ppt_comb([(2, 2, 2, 2)], seed=5)
        with pytest.raises(DimensionError):
            comb_apply(c, [identity2, identity2])

    def test_single_layer_rejected(self, identity2):
        with pytest.raises(DimensionError):
            comb_from_channels([identity2])

    def test_sequential_comb_matches_repeated_superchannel(self, rng, mixed2):
        pre, post = random_ppt_pre_post((1, 1, 2, 2), (1, 1, 2, 2), rng)
        theta = superchannel_from_pre_post(pre, post)
        comb = sequential_comb([(pre, post)])
        assert is_comb_valid(comb)
        direct = apply_superchannel(theta, mixed2)
        via_comb = comb_apply(comb, [mixed2])
        assert_allclose(via_comb.choi.entries, direct.choi.entries, atol=1e-9)

    def test_comb_gamma_of_output(self, identity2):
        c = random_ppt_comb([(2, 2, 2, 2)], seed=11)
        out = comb_apply(c, [identity2])
        gamma = partial_transpose(out.choi, ("B0", "B1"))
        assert np.min(np.linalg.eigvalsh(gamma.entries)) > -1e-9

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_gamma_passes_through_comb(self, seed):
        rng = np.random.default_rng(seed)
        c = random_ppt_comb([(2, 2, 2, 2)], seed=rng)
        n = random_channel((2, 2, 2, 2), rng)
        direct = comb_apply(c, [n])
        through = channel_gamma(comb_apply(comb_gamma(c), [channel_gamma(n)]))
        assert_allclose(through.choi.entries, direct.choi.entries, atol=1e-10)
