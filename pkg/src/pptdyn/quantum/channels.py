"""Channel constructors, application and PPT predicates."""

import logging
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import unitary_group

from ..config import MARGINAL_TOL, settings
from ..exceptions import DimensionError, InvalidObjectError, LabelError, SamplingError
from ..tensor import (
    DimSpec,
    LabeledMatrix,
    flip_operator,
    identity,
    kron,
    link_product,
    maximally_mixed,
    merge,
    min_eigenvalue,
    partial_trace,
    partial_transpose,
    permute,
    projector,
    relabel,
)
from .base import A0, A1, B0, B1, CHANNEL_LABELS, BipartiteChannel, Channel, Povm

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.Generator, None]


def _rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def _bipartite_spec(dims: Sequence[int]) -> DimSpec:
    if len(dims) != 4:
        raise DimensionError(f"bipartite dims must be (A0, B0, A1, B1), got {tuple(dims)}")
    return DimSpec.of(*zip(CHANNEL_LABELS, dims))


def choi_from_kraus(kraus: Sequence[np.ndarray], input_spec: DimSpec,
                    output_spec: DimSpec) -> LabeledMatrix:
    """Σ_k |K_k⟩⟩⟨⟨K_k| with |K⟩⟩ = Σ_i |i⟩ ⊗ K|i⟩, over input_spec ⊗ output_spec."""
    d_in, d_out = input_spec.total_dim, output_spec.total_dim
    total = np.zeros((d_in, d_in), dtype=complex)
    choi = np.zeros((d_in * d_out, d_in * d_out), dtype=complex)
    for k in kraus:
        k = np.asarray(k, dtype=complex)
        if k.shape != (d_out, d_in):
            raise DimensionError(f"Kraus operator of shape {k.shape}, expected {(d_out, d_in)}")
        total += k.conj().T @ k
        v = k.T.reshape(-1)
        choi += np.outer(v, v.conj())
    err = float(np.max(np.abs(total - np.eye(d_in))))
    if err > MARGINAL_TOL:
        raise InvalidObjectError(f"Kraus operators are not complete: max|ΣK†K − I| = {err:.2e}")
    return LabeledMatrix(input_spec.concat(output_spec), choi, hermitian=True)


def channel_from_kraus(kraus: Sequence[np.ndarray], dims: Sequence[int]) -> BipartiteChannel:
    """Bipartite channel from Kraus operators mapping A0B0 to A1B1."""
    spec = _bipartite_spec(dims)
    return BipartiteChannel(choi_from_kraus(kraus, spec.subset((A0, B0)), spec.subset((A1, B1))))


def apply_channel(n: Channel, rho: LabeledMatrix) -> LabeledMatrix:
    """𝒩(ρ) = Tr_in[(ρ^T ⊗ I_out) J^𝒩].

    ρ is matched to the channel's inputs by position; its labels are free.
    """
    in_spec = n.input_spec
    if rho.spec.dims != in_spec.dims:
        raise DimensionError(f"state over {rho.spec} does not fit channel inputs {in_spec}")
    rho_in = LabeledMatrix(in_spec, rho.entries, rho.hermitian)
    out = link_product(rho_in, n.choi)
    return permute(out, n.outputs)


def is_channel(n: Channel) -> bool:
    """CP (PSD Choi) and trace-preserving (Tr_out J = I_in entrywise within tolerance)."""
    if not n.is_cp():
        return False
    marginal = permute(partial_trace(n.choi, n.inputs), n.inputs)
    err = float(np.max(np.abs(marginal.entries - np.eye(marginal.dim))))
    return err <= MARGINAL_TOL


def gamma(n: Channel) -> Channel:
    """Γ: partial transpose on Bob's factors."""
    return Channel(partial_transpose(n.choi, n.bob_labels), n.inputs, n.outputs, n.bob_labels)


def is_ppt(n: Channel) -> bool:
    return gamma(n).is_cp()


def is_ppt_channel(n: BipartiteChannel) -> bool:
    """(J^𝒩)^{T_{B0 B1}} is PSD."""
    return is_ppt(n)


def channel_gamma(n: BipartiteChannel) -> BipartiteChannel:
    """𝒩^Γ. The result is a Hermitian-preserving map; it is a channel iff 𝒩 is PPT."""
    return BipartiteChannel(partial_transpose(n.choi, (B0, B1)))


def compose(first: Channel, second: Channel) -> Channel:
    """second ∘ first, wiring first's outputs into second's inputs by label.

    Outputs of `first` that `second` does not consume stay open, as do inputs of `second`
    that `first` does not produce.
    """
    wired = [label for label in first.outputs if label in second.inputs]
    clash = (set(first.choi.labels) & set(second.choi.labels)) - set(wired)
    if clash:
        raise LabelError(f"composition would identify unwired labels {sorted(clash)}")
    choi = link_product(first.choi, second.choi)
    inputs = list(first.inputs) + [lb for lb in second.inputs if lb not in wired]
    outputs = [lb for lb in first.outputs if lb not in wired] + list(second.outputs)
    bob = (first.bob_labels | second.bob_labels) - set(wired)
    return Channel(choi, inputs, outputs, bob)


def as_bipartite(n: Channel, mapping: Optional[dict] = None) -> BipartiteChannel:
    """Relabel a channel onto (A0, B0, A1, B1) and wrap it."""
    choi = relabel(n.choi, mapping) if mapping else n.choi
    return BipartiteChannel(permute(choi, CHANNEL_LABELS))


def channel_tensor(n: BipartiteChannel, m: BipartiteChannel) -> BipartiteChannel:
    """𝒩 ⊗ ℳ with fused factors A0 = A0⊗A0', etc."""
    tag = {label: f"{label}#2" for label in CHANNEL_LABELS}
    joint = kron(n.choi, relabel(m.choi, tag))
    merged = merge(joint, [(label, [label, tag[label]]) for label in CHANNEL_LABELS])
    return BipartiteChannel(merged)


# ---------------------------------------------------------------------------
# Named channels and states
# ---------------------------------------------------------------------------

def identity_channel(a: int, b: int) -> BipartiteChannel:
    return channel_from_kraus([np.eye(a * b)], (a, b, a, b))


def depolarizing_channel(dims: Sequence[int]) -> BipartiteChannel:
    """Completely depolarizing channel 𝒩(ρ) = Tr[ρ] u_{A1B1}."""
    spec = _bipartite_spec(dims)
    choi = kron(identity(spec.subset((A0, B0))), maximally_mixed(spec.subset((A1, B1))))
    return BipartiteChannel(choi)


def swap_channel(d: int = 2) -> BipartiteChannel:
    """Alice's input goes to Bob's output and vice versa."""
    return channel_from_kraus([flip_operator(d).entries], (d, d, d, d))


def state_preparation(rho: LabeledMatrix) -> BipartiteChannel:
    """Channel with trivial inputs that prepares ρ (two factors: Alice then Bob)."""
    if len(rho.spec.factors) != 2:
        raise DimensionError(f"a bipartite state needs two factors, got {rho.spec}")
    state = LabeledMatrix(DimSpec.of((A1, rho.spec.dims[0]), (B1, rho.spec.dims[1])),
                          rho.entries, hermitian=True)
    trivial = identity(DimSpec.of((A0, 1), (B0, 1)))
    return BipartiteChannel(kron(trivial, state))


def phi_plus(m: int) -> LabeledMatrix:
    """Normalized maximally entangled state φ⁺_m over (A, B)."""
    return projector(DimSpec.of(("A", m), ("B", m)), np.eye(m).reshape(-1) / np.sqrt(m))


def phi_plus_preparation(m: int = 2) -> BipartiteChannel:
    return state_preparation(phi_plus(m))


def choi_probe(m: int) -> LabeledMatrix:
    """Unnormalized Φ⁺ = m·φ⁺_m. CP but not a state; used inside supermap Choi matrices."""
    return phi_plus(m) * float(m)


def isotropic_state(m: int, p: float) -> LabeledMatrix:
    """p·φ⁺ + (1−p)(I−φ⁺)/(m²−1). PPT iff p ≤ 1/m."""
    phi = phi_plus(m).entries
    rest = (np.eye(m * m) - phi) / (m * m - 1)
    return LabeledMatrix(DimSpec.of(("A", m), ("B", m)), p * phi + (1 - p) * rest, hermitian=True)


def maximally_mixed_preparation(a: int = 2, b: int = 2) -> BipartiteChannel:
    return state_preparation(maximally_mixed(DimSpec.of(("A", a), ("B", b))))


def random_state(a: int, b: int, seed: Seed = None, rank: Optional[int] = None) -> LabeledMatrix:
    """Wishart-type random density matrix over (A, B)."""
    rng = _rng(seed)
    d = a * b
    r = rank or d
    g = rng.standard_normal((d, r)) + 1j * rng.standard_normal((d, r))
    rho = g @ g.conj().T
    return LabeledMatrix(DimSpec.of(("A", a), ("B", b)), rho / np.trace(rho).real, hermitian=True)


# ---------------------------------------------------------------------------
# Random instances
# ---------------------------------------------------------------------------

def random_general_channel(input_spec: DimSpec, output_spec: DimSpec, bob: Iterable[str] = (),
                           seed: Seed = None, kraus_rank: Optional[int] = None) -> Channel:
    """Random channel from a Haar-random isometry split into Kraus blocks."""
    rng = _rng(seed)
    d_in, d_out = input_spec.total_dim, output_spec.total_dim
    k = kraus_rank or max(2, d_in)
    if d_out * k < d_in:
        raise DimensionError(f"Kraus rank {k} too small for a {d_in}→{d_out} isometry")
    u = unitary_group.rvs(d_out * k, random_state=rng)
    v = u[:, :d_in]
    kraus = [v[i * d_out:(i + 1) * d_out, :] for i in range(k)]
    choi = choi_from_kraus(kraus, input_spec, output_spec)
    return Channel(choi, input_spec.labels, output_spec.labels, bob)


def random_channel(dims: Sequence[int], seed: Seed = None,
                   kraus_rank: Optional[int] = None) -> BipartiteChannel:
    spec = _bipartite_spec(dims)
    n = random_general_channel(spec.subset((A0, B0)), spec.subset((A1, B1)), (B0, B1),
                               seed, kraus_rank)
    return BipartiteChannel(n.choi)


def _depolarizing_like(n: Channel) -> LabeledMatrix:
    choi = kron(identity(n.input_spec), maximally_mixed(n.output_spec))
    return permute(choi, n.choi.labels)


def mix_to_ppt(n: Channel, margin: Optional[float] = None, steps: int = 40) -> Tuple[Channel, float]:
    """Largest λ with (λ𝒩 + (1−λ)·depolarizing)^Γ having min eigenvalue ≥ margin.

    The min eigenvalue is concave in λ and equals 1/|out| at λ = 0, so bisection applies.
    """
    margin = settings.sampling_margin if margin is None else margin
    dep = _depolarizing_like(n).entries
    bob = n.bob_labels

    def mixed(lam: float) -> LabeledMatrix:
        return LabeledMatrix(n.choi.spec, lam * n.choi.entries + (1 - lam) * dep, hermitian=True)

    def margin_at(lam: float) -> float:
        return min_eigenvalue(partial_transpose(mixed(lam), bob))

    if margin_at(1.0) >= margin:
        return n, 1.0
    lo, hi = 0.0, 1.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if margin_at(mid) >= margin:
            lo = mid
        else:
            hi = mid
    return Channel(mixed(lo), n.inputs, n.outputs, bob), lo


def random_ppt_general_channel(input_spec: DimSpec, output_spec: DimSpec, bob: Iterable[str],
                               seed: Seed = None, kraus_rank: Optional[int] = None) -> Channel:
    """Random channel pushed into the PPT set by depolarizing mixing, with rejection."""
    rng = _rng(seed)
    for attempt in range(settings.max_attempts):
        n = random_general_channel(input_spec, output_spec, bob, rng, kraus_rank)
        mixed, lam = mix_to_ppt(n)
        if lam >= settings.min_mixing_weight:
            logger.debug(f"PPT sample accepted on attempt {attempt + 1} with weight {lam:.4f}")
            return mixed
        logger.debug(f"Rejecting PPT sample with weight {lam:.2e}")
    raise SamplingError(f"no PPT sample with weight ≥ {settings.min_mixing_weight} "
                        f"after {settings.max_attempts} attempts")


def random_ppt_channel(dims: Sequence[int], seed: Seed = None,
                       kraus_rank: Optional[int] = None) -> BipartiteChannel:
    spec = _bipartite_spec(dims)
    n = random_ppt_general_channel(spec.subset((A0, B0)), spec.subset((A1, B1)), (B0, B1),
                                   seed, kraus_rank)
    return BipartiteChannel(n.choi)


# ---------------------------------------------------------------------------
# POVMs
# ---------------------------------------------------------------------------

def povm_channel(p: Povm, outcome_dims: Optional[Tuple[int, int]] = None) -> BipartiteChannel:
    """Quantum-to-classical channel 𝒩(ρ) = Σ_x Tr[ρE^x] |x⟩⟨x|.

    By default the classical register sits on Alice's output (|A1| = #outcomes, |B1| = 1);
    `outcome_dims` = (nx, ny) splits it as |xy⟩ with element index x·ny + y.
    """
    nx, ny = outcome_dims or (len(p), 1)
    if nx * ny != len(p):
        raise DimensionError(f"outcome dims {(nx, ny)} do not match {len(p)} POVM elements")
    d_in = p.spec.total_dim
    k = len(p)
    choi = np.zeros((d_in * k, d_in * k), dtype=complex)
    for x, e in enumerate(p.elements):
        ket = np.zeros(k)
        ket[x] = 1.0
        choi += np.kron(e.entries.T, np.outer(ket, ket))
    dims = p.spec.dims + (nx, ny)
    return BipartiteChannel.from_entries(choi, dims)


def is_povm_channel(n: BipartiteChannel, tol: float = MARGINAL_TOL) -> bool:
    """𝒟∘𝒩 = 𝒩 for the completely dephasing 𝒟 on A1B1 in the computational basis."""
    d_in = n.spec.dim_of((A0, B0))
    d_out = n.spec.dim_of((A1, B1))
    t = n.choi.entries.reshape(d_in, d_out, d_in, d_out)
    mask = np.eye(d_out)[None, :, None, :]
    dephased = t * mask
    return float(np.max(np.abs(t - dephased))) <= tol


def povm_from_channel(n: BipartiteChannel) -> List[LabeledMatrix]:
    """Recover E^x = (⟨x|J|x⟩)^T for a quantum-to-classical channel."""
    d_in = n.spec.dim_of((A0, B0))
    d_out = n.spec.dim_of((A1, B1))
    t = n.choi.entries.reshape(d_in, d_out, d_in, d_out)
    spec = n.spec.subset((A0, B0))
    return [LabeledMatrix(spec, t[:, x, :, x].T, hermitian=True) for x in range(d_out)]
