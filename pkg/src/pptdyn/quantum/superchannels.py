"""
Superchannels on bipartite channels.

The Choi matrix of Θ is the Choi matrix of its processing network
Q^Θ = (id_{A0B0} ⊗ ℰ) ∘ (ℱ ⊗ id_{A1B1}) from (A1, B1, A0', B0') to (A0, B0, A1', B1'),
reordered to (A0, A1, B0, B1, A0', A1', B0', B1'). With this convention

    J^{Θ[𝒩]} = Tr_{AB}[J^Θ ((J^𝒩)^T ⊗ I_{A'B'})],

which is the link product of J^Θ and J^𝒩 over the unprimed factors.
"""

import logging
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from ..config import MARGINAL_TOL
from ..exceptions import DimensionError, LabelError, SamplingError
from ..tensor import (
    DimSpec,
    LabeledMatrix,
    identity,
    is_psd,
    kron,
    kron_all,
    link_product,
    maximally_mixed,
    partial_trace,
    partial_transpose,
    permute,
    relabel,
    unnormalized_max_entangled,
)
from .base import (
    A0,
    A0P,
    A1,
    A1P,
    B0,
    B0P,
    B1,
    B1P,
    CHANNEL_LABELS,
    PRIME,
    SUPERCHANNEL_BOB,
    SUPERCHANNEL_LABELS,
    UNPRIME,
    BipartiteChannel,
    Channel,
    Superchannel,
)
from .channels import Seed, _rng, is_ppt, phi_plus, random_ppt_general_channel

logger = logging.getLogger(__name__)

PRE_INPUTS = (A0P, B0P)
POST_OUTPUTS = (A1P, B1P)


def _check_entry_close(a: LabeledMatrix, b: LabeledMatrix, tol: float) -> bool:
    return float(np.max(np.abs(a.entries - b.entries))) <= tol


def superchannel_from_pre_post(pre: Channel, post: Channel,
                               memory_dims: Optional[Mapping[str, int]] = None) -> Superchannel:
    """Build Θ[𝒩] = ℰ∘(id_E ⊗ 𝒩)∘ℱ from pre-processing ℱ and post-processing ℰ.

    Args:
        pre: Channel with inputs (A0', B0') and outputs (A0, B0) plus memory factors
        post: Channel with inputs (A1, B1) plus the same memory factors, outputs (A1', B1')
        memory_dims: Expected memory labels and dims; inferred from `pre` when omitted

    Returns:
        Superchannel whose Choi is the Choi of the processing network
    """
    if sorted(pre.inputs) != sorted(PRE_INPUTS):
        raise DimensionError(f"pre-processing must take {PRE_INPUTS}, takes {pre.inputs}")
    if sorted(post.outputs) != sorted(POST_OUTPUTS):
        raise DimensionError(f"post-processing must produce {POST_OUTPUTS}, produces {post.outputs}")
    pre_memory = [lb for lb in pre.outputs if lb not in (A0, B0)]
    post_memory = [lb for lb in post.inputs if lb not in (A1, B1)]
    if not {A0, B0} <= set(pre.outputs) or not {A1, B1} <= set(post.inputs):
        raise DimensionError("pre must output (A0, B0) and post must take (A1, B1)")
    if sorted(pre_memory) != sorted(post_memory):
        raise DimensionError(f"memory wiring mismatch: pre emits {pre_memory}, post takes {post_memory}")
    for label in pre_memory:
        d_pre, d_post = pre.spec.dim(label), post.spec.dim(label)
        if d_pre != d_post:
            raise DimensionError(f"memory {label} has dim {d_pre} in pre but {d_post} in post")
        if memory_dims is not None and memory_dims.get(label) != d_pre:
            raise DimensionError(f"memory {label} has dim {d_pre}, expected {memory_dims.get(label)}")
    if memory_dims is not None and set(memory_dims) != set(pre_memory):
        raise DimensionError(f"memory labels {sorted(memory_dims)} do not match wiring {pre_memory}")

    network = link_product(pre.choi, post.choi)
    return Superchannel(permute(network, SUPERCHANNEL_LABELS).hermitized())


def is_superchannel_valid(t: Superchannel, tol: float = MARGINAL_TOL) -> bool:
    """PSD and both marginal conditions.

    J_{ABA0'B0'} = J_{A0B0A0'B0'} ⊗ u_{A1B1} and J_{A1B1A0'B0'} = I.
    """
    if not t.is_cp():
        return False
    choi = t.choi
    outer = partial_trace(choi, (A0, A1, B0, B1, A0P, B0P))
    inner = partial_trace(choi, (A0, B0, A0P, B0P))
    u = maximally_mixed(choi.spec.subset((A1, B1)))
    expected = permute(kron(inner, u), outer.labels)
    if not _check_entry_close(outer, expected, tol):
        logger.debug("Superchannel fails the no-signalling marginal")
        return False
    causal = partial_trace(choi, (A1, B1, A0P, B0P))
    if not _check_entry_close(causal, identity(causal.spec), tol):
        logger.debug("Superchannel fails the unit marginal")
        return False
    return True


def superchannel_gamma(t: Superchannel) -> Superchannel:
    """Θ^Γ = Υ_{B'}∘Θ∘Υ_B: partial transpose on B0, B1, B0', B1'."""
    return Superchannel(partial_transpose(t.choi, SUPERCHANNEL_BOB))


def is_ppt_superchannel(t: Superchannel) -> bool:
    return is_superchannel_valid(t) and is_psd(superchannel_gamma(t).choi)


def contract_superchannel(theta: LabeledMatrix, choi: LabeledMatrix) -> BipartiteChannel:
    """Tr_{AB}[J^Θ ((J^𝒩)^T ⊗ I)] for supermap and map Choi matrices, no validity checks."""
    if theta.labels != SUPERCHANNEL_LABELS or choi.labels != CHANNEL_LABELS:
        raise LabelError("contraction expects a superchannel Choi and a bipartite channel Choi")
    for label in CHANNEL_LABELS:
        if theta.spec.dim(label) != choi.spec.dim(label):
            raise DimensionError(
                f"slot factor {label}: superchannel expects {theta.spec.dim(label)}, "
                f"channel has {choi.spec.dim(label)}")
    out = link_product(theta, choi)
    out = relabel(out, UNPRIME)
    return BipartiteChannel(permute(out, CHANNEL_LABELS).hermitized())


def apply_superchannel(t: Superchannel, n: BipartiteChannel) -> BipartiteChannel:
    return contract_superchannel(t.choi, n.choi)


# ---------------------------------------------------------------------------
# Named superchannels
# ---------------------------------------------------------------------------

def _identity_wires(pairs: Sequence[Tuple[str, str]], spec_dims: Mapping[str, int]) -> LabeledMatrix:
    return kron_all(*(unnormalized_max_entangled((a, spec_dims[a]), (b, spec_dims[b]))
                      for a, b in pairs))


def identity_superchannel(dims: Sequence[int]) -> Superchannel:
    """Θ[𝒩] = 𝒩 on channels of dims (A0, B0, A1, B1)."""
    a0, b0, a1, b1 = dims
    pre = Channel(_identity_wires([(A0P, A0), (B0P, B0)], {A0P: a0, A0: a0, B0P: b0, B0: b0}),
                  PRE_INPUTS, (A0, B0), (B0P, B0))
    post = Channel(_identity_wires([(A1, A1P), (B1, B1P)], {A1: a1, A1P: a1, B1: b1, B1P: b1}),
                   (A1, B1), POST_OUTPUTS, (B1, B1P))
    return superchannel_from_pre_post(pre, post)


def input_swap_superchannel(dims: Sequence[int]) -> Superchannel:
    """Θ[𝒩] = 𝒩∘SWAP: the produced channel feeds Alice's input to Bob's slot and vice versa.

    Requires |A0| = |B0|. It is a valid superchannel but moves a wire across the cut, so
    it is not PPT.
    """
    a0, b0, a1, b1 = dims
    if a0 != b0:
        raise DimensionError(f"input swap needs |A0| = |B0|, got {a0} and {b0}")
    pre = Channel(_identity_wires([(A0P, B0), (B0P, A0)], {A0P: a0, B0: a0, B0P: a0, A0: a0}),
                  PRE_INPUTS, (A0, B0), (B0P, B0))
    post = Channel(_identity_wires([(A1, A1P), (B1, B1P)], {A1: a1, A1P: a1, B1: b1, B1P: b1}),
                   (A1, B1), POST_OUTPUTS, (B1, B1P))
    return superchannel_from_pre_post(pre, post)


def replacer_superchannel(source_dims: Sequence[int], target: BipartiteChannel) -> Superchannel:
    """Θ[𝒩] = ℳ for every 𝒩: J^Θ = u_{A0B0} ⊗ I_{A1B1} ⊗ J^ℳ."""
    a0, b0, a1, b1 = source_dims
    u_in = maximally_mixed(DimSpec.of((A0, a0), (B0, b0)))
    i_out = identity(DimSpec.of((A1, a1), (B1, b1)))
    target_primed = relabel(target.choi, PRIME)
    return Superchannel(permute(kron_all(u_in, i_out, target_primed), SUPERCHANNEL_LABELS))


def twirl(m: int) -> BipartiteChannel:
    """Isotropic twirl 𝒢(ω) = φ⁺Tr[φ⁺ω] + (I−φ⁺)Tr[(I−φ⁺)ω]/(m²−1) on an m×m system.

    The Choi of X ↦ A·Tr[BX] is B^T ⊗ A, and φ⁺ is real symmetric.
    """
    if m < 2:
        raise DimensionError(f"twirl needs m ≥ 2, got {m}")
    phi = phi_plus(m).entries.real
    rest = np.eye(m * m) - phi
    choi = np.kron(phi, phi) + np.kron(rest, rest) / (m * m - 1)
    return BipartiteChannel.from_entries(choi, (m, m, m, m))


def exact_cost_superchannel(n: BipartiteChannel, r: BipartiteChannel, m: int) -> Superchannel:
    """Θ[ℳ] = 𝒩·Tr[φ⁺ℳ] + ℛ·Tr[(I−φ⁺)ℳ] on the m×m state-preparation slot.

    The slot is the unprimed side (|A0| = |B0| = 1, |A1| = |B1| = m); 𝒩 and ℛ sit on the
    primed side. Θ is PPT iff −(m−1)ℛ^Γ ≤ 𝒩^Γ ≤ (m+1)ℛ^Γ.
    """
    if m < 2:
        raise DimensionError(f"exact-cost superchannel needs m ≥ 2, got {m}")
    if n.dims != r.dims:
        raise DimensionError(f"𝒩 has dims {n.dims} but ℛ has {r.dims}")
    slot = DimSpec.of((A0, 1), (B0, 1), (A1, m), (B1, m))
    phi = phi_plus(m).entries
    probe = LabeledMatrix(slot, phi, hermitian=True)
    rest = LabeledMatrix(slot, np.eye(m * m) - phi, hermitian=True)
    choi = kron(probe, relabel(n.choi, PRIME)) + kron(rest, relabel(r.choi, PRIME))
    return Superchannel(permute(choi, SUPERCHANNEL_LABELS))


# ---------------------------------------------------------------------------
# Restricted PPT superchannels and random instances
# ---------------------------------------------------------------------------

def is_restricted_ppt(pre: Channel, post: Channel) -> bool:
    """Both processing channels PPT across their Alice/Bob cut."""
    return is_ppt(pre) and is_ppt(post)


def random_ppt_pre_post(source_dims: Sequence[int], target_dims: Sequence[int], seed: Seed = None,
                        memory_dims: Tuple[int, int] = (1, 1)) -> Tuple[Channel, Channel]:
    """Random PPT pre- and post-processing with Alice memory MA and Bob memory MB."""
    rng = _rng(seed)
    a0, b0, a1, b1 = source_dims
    c0, d0, c1, d1 = target_dims
    ma, mb = memory_dims
    pre = random_ppt_general_channel(
        DimSpec.of((A0P, c0), (B0P, d0)),
        DimSpec.of((A0, a0), (B0, b0), ("MA", ma), ("MB", mb)),
        (B0P, B0, "MB"), rng)
    post = random_ppt_general_channel(
        DimSpec.of(("MA", ma), ("MB", mb), (A1, a1), (B1, b1)),
        DimSpec.of((A1P, c1), (B1P, d1)),
        ("MB", B1, B1P), rng)
    if not is_restricted_ppt(pre, post):
        raise SamplingError("sampled pre/post pair is not PPT across the Alice/Bob cut")
    return pre, post


def random_ppt_superchannel(source_dims: Sequence[int], target_dims: Optional[Sequence[int]] = None,
                            seed: Seed = None,
                            memory_dims: Tuple[int, int] = (1, 1)) -> Superchannel:
    """Random restricted-PPT superchannel from source_dims channels to target_dims channels."""
    target_dims = tuple(target_dims or source_dims)
    pre, post = random_ppt_pre_post(source_dims, target_dims, seed, memory_dims)
    return superchannel_from_pre_post(pre, post)
