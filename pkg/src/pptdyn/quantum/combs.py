"""Quantum combs: multi-slot networks stored as the Choi of their composite channel."""

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..config import MARGINAL_TOL
from ..exceptions import DimensionError, LabelError
from ..tensor import (
    DimSpec,
    LabeledMatrix,
    is_psd,
    link_product,
    partial_trace,
    partial_transpose,
    permute,
    relabel,
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
    BipartiteChannel,
    Channel,
    Comb,
    comb_label,
    comb_labels,
)
from .channels import Seed, _rng, compose, random_ppt_general_channel

logger = logging.getLogger(__name__)


def comb_from_channels(layers: Sequence[Channel]) -> Comb:
    """Chain layers ℰ_1, ..., ℰ_{n+1} through their memory wires.

    Layer k takes its memory inputs plus (A0_k, B0_k) and emits (A1_k, B1_k) plus memory
    outputs, which must be exactly the memory inputs of layer k+1. The first layer has no
    memory inputs and the last none outputs.
    """
    if len(layers) < 2:
        raise DimensionError(f"a comb needs at least two layers, got {len(layers)}")
    n = len(layers) - 1
    carried: List[str] = []
    network: Optional[LabeledMatrix] = None
    for k, layer in enumerate(layers, start=1):
        slot_in = {comb_label(A0, k), comb_label(B0, k)}
        slot_out = {comb_label(A1, k), comb_label(B1, k)}
        if not slot_in <= set(layer.inputs) or not slot_out <= set(layer.outputs):
            raise DimensionError(f"layer {k} must take {sorted(slot_in)} and emit {sorted(slot_out)}")
        memory_in = [lb for lb in layer.inputs if lb not in slot_in]
        if sorted(memory_in) != sorted(carried):
            raise DimensionError(f"layer {k} takes memory {memory_in}, previous layer emits {carried}")
        if network is not None:
            for label in carried:
                if network.spec.dim(label) != layer.spec.dim(label):
                    raise DimensionError(f"memory {label} changes dimension between layers")
            network = link_product(network, layer.choi)
        else:
            network = layer.choi
        carried = [lb for lb in layer.outputs if lb not in slot_out]
    if carried:
        raise DimensionError(f"last layer leaves memory {carried} open")
    assert network is not None
    return Comb(permute(network, comb_labels(n)).hermitized(), n)


def _slot_mapping(k: int) -> dict:
    """Bipartite channel labels → comb labels for slot k."""
    return {A0: comb_label(A1, k), B0: comb_label(B1, k),
            A1: comb_label(A0, k + 1), B1: comb_label(B0, k + 1)}


def contract_comb(choi: LabeledMatrix, slot_count: int,
                  inputs: Sequence[LabeledMatrix]) -> BipartiteChannel:
    """Plug bipartite map Choi matrices into the slots, no validity checks."""
    if len(inputs) != slot_count:
        raise DimensionError(f"comb has {slot_count} slots, got {len(inputs)} channels")
    out = choi
    for k, slot_choi in enumerate(inputs, start=1):
        if slot_choi.labels != CHANNEL_LABELS:
            raise LabelError(f"slot {k} input must be a bipartite channel Choi")
        mapped = relabel(slot_choi, _slot_mapping(k))
        for label in mapped.labels:
            if choi.spec.dim(label) != mapped.spec.dim(label):
                raise DimensionError(f"slot {k} factor {label}: comb has {choi.spec.dim(label)}, "
                                     f"channel has {mapped.spec.dim(label)}")
        out = link_product(out, mapped)
    n1 = slot_count + 1
    out = relabel(out, {comb_label(A0, 1): A0, comb_label(B0, 1): B0,
                        comb_label(A1, n1): A1, comb_label(B1, n1): B1})
    return BipartiteChannel(permute(out, CHANNEL_LABELS).hermitized())


def comb_apply(c: Comb, inputs: Sequence[BipartiteChannel]) -> BipartiteChannel:
    """𝒞_n[𝒩_1, ..., 𝒩_n] as a channel (A0_1, B0_1) → (A1_{n+1}, B1_{n+1})."""
    return contract_comb(c.choi, c.slot_count, [n.choi for n in inputs])


def comb_gamma(c: Comb) -> Comb:
    """Partial transpose on every Bob factor of the comb Choi."""
    return Comb(partial_transpose(c.choi, c.bob_labels), c.slot_count)


def is_comb_valid(c: Comb, tol: float = MARGINAL_TOL) -> bool:
    """PSD plus the causal marginals, peeled from the last step.

    With J^(n+1) = J: Tr_{out_k} J^(k) = I_{in_k} ⊗ J^(k−1) for k = n+1, ..., 1 and J^(0) = 1.
    """
    if not c.is_cp():
        return False
    current = c.choi
    for k in range(c.slot_count + 1, 0, -1):
        outs = set(c.step_outputs(k))
        ins = c.step_inputs(k)
        reduced = partial_trace(current, [lb for lb in current.labels if lb not in outs])
        d_in = reduced.spec.dim_of(ins)
        rest = [lb for lb in reduced.labels if lb not in ins]
        previous = partial_trace(reduced, rest) / d_in if rest else None
        if previous is None:
            expected = np.eye(reduced.dim)
        else:
            expected = np.kron(np.eye(d_in), previous.entries)
            expected = permute(LabeledMatrix(reduced.spec.reorder(list(ins) + rest), expected),
                               reduced.labels).entries
        if float(np.max(np.abs(reduced.entries - expected))) > tol:
            logger.debug(f"Comb fails the causal marginal at step {k}")
            return False
        if previous is None:
            break
        current = previous
    return True


def is_ppt_comb(c: Comb) -> bool:
    return is_comb_valid(c) and is_psd(comb_gamma(c).choi)


def sequential_comb(steps: Sequence[Tuple[Channel, Channel]]) -> Comb:
    """Comb realizing Θ_n[𝒩_n]∘…∘Θ_1[𝒩_1] from per-step (pre, post) processing pairs.

    Each pair follows the superchannel_from_pre_post wiring. Step k's post-processing is
    composed with step k+1's pre-processing into a single comb layer.
    """
    if not steps:
        raise DimensionError("a sequential comb needs at least one step")
    n = len(steps)
    layers: List[Channel] = []
    pending: Optional[Channel] = None
    for k, (pre, post) in enumerate(steps, start=1):
        tag = f"@{k}"
        memory = [lb for lb in pre.outputs if lb not in (A0, B0)]
        pre_map = {A0P: comb_label(A0, 1) if k == 1 else f"W{tag}",
                   B0P: comb_label(B0, 1) if k == 1 else f"V{tag}",
                   A0: comb_label(A1, k), B0: comb_label(B1, k)}
        pre_map.update({lb: f"{lb}{tag}" for lb in memory})
        last = k == n
        post_map = {A1: comb_label(A0, k + 1), B1: comb_label(B0, k + 1),
                    A1P: comb_label(A1, n + 1) if last else f"W@{k + 1}",
                    B1P: comb_label(B1, n + 1) if last else f"V@{k + 1}"}
        post_map.update({lb: f"{lb}{tag}" for lb in memory})
        pre_k = _relabel_channel(pre, pre_map)
        post_k = _relabel_channel(post, post_map)
        layers.append(pre_k if pending is None else compose(pending, pre_k))
        pending = post_k
    assert pending is not None
    layers.append(pending)
    return comb_from_channels(layers)


def _relabel_channel(n: Channel, mapping: dict) -> Channel:
    return Channel(relabel(n.choi, mapping),
                   [mapping.get(lb, lb) for lb in n.inputs],
                   [mapping.get(lb, lb) for lb in n.outputs],
                   [mapping.get(lb, lb) for lb in n.bob_labels])


def random_ppt_comb(slot_dims: Sequence[Sequence[int]], seed: Seed = None,
                    memory_dims: Tuple[int, int] = (1, 1),
                    io_dims: Tuple[Tuple[int, int], Tuple[int, int]] = ((1, 1), (2, 2))) -> Comb:
    """Random comb whose layers are all PPT channels (so the comb is PPT).

    Args:
        slot_dims: Per-slot bipartite channel dims (A0, B0, A1, B1)
        seed: Seed or generator
        memory_dims: (Alice, Bob) memory dims carried between layers
        io_dims: Global input (A, B) dims and global output (A, B) dims

    Returns:
        A PPT comb with len(slot_dims) slots
    """
    rng = _rng(seed)
    n = len(slot_dims)
    ma, mb = memory_dims
    layers: List[Channel] = []
    for k in range(1, n + 2):
        in_factors: List[Tuple[str, int]] = []
        bob = []
        if k > 1:
            in_factors += [(f"MA{k - 1}", ma), (f"MB{k - 1}", mb)]
            bob.append(f"MB{k - 1}")
            prev = slot_dims[k - 2]
            in_factors += [(comb_label(A0, k), prev[2]), (comb_label(B0, k), prev[3])]
        else:
            in_factors += [(comb_label(A0, 1), io_dims[0][0]), (comb_label(B0, 1), io_dims[0][1])]
        if k <= n:
            cur = slot_dims[k - 1]
            out_factors = [(comb_label(A1, k), cur[0]), (comb_label(B1, k), cur[1]),
                           (f"MA{k}", ma), (f"MB{k}", mb)]
            bob.append(f"MB{k}")
        else:
            out_factors = [(comb_label(A1, k), io_dims[1][0]), (comb_label(B1, k), io_dims[1][1])]
        bob += [comb_label(B0, k), comb_label(B1, k)]
        layers.append(random_ppt_general_channel(DimSpec.of(*in_factors), DimSpec.of(*out_factors),
                                                 bob, rng))
    return comb_from_channels(layers)
