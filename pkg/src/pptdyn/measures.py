"""
SDP-backed resource measures of bipartite channels.

Every measure has a pure builder (`build_*_program`) returning a ConicProgram and a
solving wrapper returning a MeasureResult. Builders express their constraints as
batched linear maps over Choi-space arrays; see solver.ProgramBuilder.
"""

import logging
import math
import time
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .config import settings
from .exceptions import BoundViolation, DimensionError, PreconditionError, SolverError
from .quantum import (
    A0,
    A0P,
    A1,
    A1P,
    B0,
    B0P,
    B1,
    B1P,
    SUPERCHANNEL_LABELS,
    BipartiteChannel,
    Superchannel,
    apply_superchannel,
    channel_tensor,
    is_channel,
)
from .quantum.base import PRIME
from .solver import (
    ConicProgram,
    FeasibilityCertificate,
    ProgramBuilder,
    Solution,
    dump_triplets,
    feasibility,
    scalar_times,
    scaled,
    solve,
    trace_map,
)
from .tensor import (
    DimSpec,
    LabeledMatrix,
    Norm,
    kron,
    kron_identity,
    link_kernel,
    partial_transpose,
    permute,
    permute_array,
    relabel,
    schatten_norm,
    trace_out,
    transpose_on,
)

logger = logging.getLogger(__name__)

CHANNEL_BOB_IDX = (1, 3)


class MeasureResult(BaseModel):
    """Value of a measure with its solve diagnostics.

    `primal` and `dual` hold certificate blocks (arrays, channels) and are excluded from
    serialization; `details` holds scalar side values that reports carry along.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    name: str
    value: float
    status: str = "optimal"
    primal_value: Optional[float] = None
    dual_value: Optional[float] = None
    gap: float = 0.0
    residual: float = 0.0
    iterations: int = 0
    sizes: Dict[str, int] = Field(default_factory=dict)
    wall_time: float = 0.0
    flagged: bool = False
    notes: List[str] = Field(default_factory=list)
    details: Dict[str, Any] = Field(default_factory=dict)
    primal: Dict[str, Any] = Field(default_factory=dict, exclude=True, repr=False)
    dual: Dict[str, Any] = Field(default_factory=dict, exclude=True, repr=False)

    @classmethod
    def from_solution(cls, name: str, sol: Solution, value: Optional[float] = None,
                      **kwargs) -> "MeasureResult":
        return cls(
            name=name,
            value=sol.primal_value if value is None else value,
            status=sol.status.value,
            primal_value=sol.primal_value,
            dual_value=sol.dual_value,
            gap=sol.gap,
            residual=sol.residual,
            iterations=sol.iterations,
            sizes=sol.program.sizes(),
            wall_time=sol.wall_time,
            primal=dict(sol.values),
            **kwargs,
        )


# ---------------------------------------------------------------------------
# Shared pieces
# ---------------------------------------------------------------------------

def _identity_map(x: np.ndarray) -> np.ndarray:
    return x


def _solve(program: ConicProgram) -> Solution:
    if program.sizes()['largest_block'] > settings.max_block_dim:
        logger.warning(f"{program.name}: block of dimension {program.sizes()['largest_block']} "
                       f"exceeds max_block_dim={settings.max_block_dim}; expect a slow solve")
    sol = solve(program)
    if not sol.optimal:
        raise SolverError(f"{program.name} ended with status {sol.status.value} "
                          f"({sol.solver_status})", sol, dump_triplets(program))
    return sol


def _require_channel(n: BipartiteChannel, what: str = "channel") -> None:
    if not is_channel(n):
        raise PreconditionError(f"{what} is not a valid CPTP bipartite channel")


def _clip_nonnegative(value: float, name: str) -> float:
    if -settings.feas_tol * 10 < value < 0:
        return 0.0
    if value < 0:
        logger.warning(f"{name}: negative value {value:.3e} for a nonnegative measure")
    return value


def _log2(value: float) -> float:
    return math.log2(value) if value > 0 else float('-inf')


def _choi_gamma(n: BipartiteChannel) -> np.ndarray:
    return partial_transpose(n.choi, (B0, B1)).entries


def _marginal_map(spec: DimSpec, labels: Sequence[str]):
    dims = spec.dims
    idx = [spec.index(label) for label in labels]
    return lambda x: trace_out(x, dims, idx)


def _pt_map(spec: DimSpec, labels: Sequence[str]):
    dims = spec.dims
    idx = [spec.index(label) for label in labels]
    return lambda x: transpose_on(x, dims, idx)


def superchannel_spec(source_dims: Sequence[int], target_dims: Sequence[int]) -> DimSpec:
    """Factor space of superchannels from source_dims channels to target_dims channels."""
    a0, b0, a1, b1 = source_dims
    c0, d0, c1, d1 = target_dims
    return DimSpec.of((A0, a0), (A1, a1), (B0, b0), (B1, b1),
                      (A0P, c0), (A1P, c1), (B0P, d0), (B1P, d1))


def add_ppt_superchannel(b: ProgramBuilder, source_dims: Sequence[int],
                         target_dims: Sequence[int], name: str = "theta") -> DimSpec:
    """Add a PPT-superchannel Choi block and its cone constraints to a program.

    Constraints: J ≥ 0, J^{T_{BB'}} ≥ 0 (through the `<name>_gamma` block),
    Tr_{A1'B1'} J = J_{A0B0A0'B0'} ⊗ u_{A1B1} and Tr_{A0B0A1'B1'} J = I.
    """
    spec = superchannel_spec(source_dims, target_dims)
    dims = spec.dims
    a0, b0, a1, b1 = source_dims
    c0, d0, c1, d1 = target_dims
    d = spec.total_dim
    pt = _pt_map(spec, (B0, B1, B0P, B1P))

    def no_signalling(x: np.ndarray) -> np.ndarray:
        outer = trace_out(x, dims, [0, 1, 2, 3, 4, 6])
        inner = kron_identity(trace_out(x, dims, [0, 2, 4, 6]), a1 * b1)
        inner = permute_array(inner, (a0, b0, c0, d0, a1, b1), [0, 4, 1, 5, 2, 3])
        return outer - inner / (a1 * b1)

    b.psd(name, spec)
    b.psd(f"{name}_gamma", spec)
    b.equal(f"{name}_ppt", {f"{name}_gamma": _identity_map, name: scaled(-1.0, pt)},
            np.zeros((d, d)))
    k = a0 * a1 * b0 * b1 * c0 * d0
    b.equal(f"{name}_no_signalling", {name: no_signalling}, np.zeros((k, k)))
    b.equal(f"{name}_unit", {name: lambda x: trace_out(x, dims, [1, 3, 4, 6])},
            np.eye(a1 * b1 * c0 * d0))
    return spec


def _contraction_map(theta_spec: DimSpec, n: BipartiteChannel):
    """J^Θ ↦ J^{Θ[𝒩]} as a batched map, output in channel factor order."""
    def contract(x: np.ndarray) -> np.ndarray:
        res, out_spec = link_kernel(x, theta_spec, n.choi)
        return permute_array(res, out_spec.dims, [0, 2, 1, 3])
    return contract


def _contraction_adjoint(n: BipartiteChannel, target_dims: Sequence[int]):
    """ζ ↦ (J^𝒩)^T ⊗ ζ in superchannel factor order."""
    nt = n.choi.entries.T
    a0, b0, a1, b1 = n.dims
    c0, d0, c1, d1 = target_dims
    arrangement = (a0, b0, a1, b1, c0, d0, c1, d1)

    def adjoint(x: np.ndarray) -> np.ndarray:
        batch = x.shape[:-2]
        res = np.einsum('ij,...kl->...ikjl', nt, x)
        size = nt.shape[0] * x.shape[-1]
        res = res.reshape(batch + (size, size))
        return permute_array(res, arrangement, [0, 2, 1, 3, 4, 6, 5, 7])
    return adjoint


# ---------------------------------------------------------------------------
# Diamond norms, negativity
# ---------------------------------------------------------------------------

def build_diamond_norm_program(choi: LabeledMatrix, inputs: Sequence[str] = (A0, B0)) -> ConicProgram:
    """‖Φ‖⋄ for a Hermitian-preserving map: min ‖Tr_out Y‖∞ s.t. −Y ≤ J ≤ Y.

    Y is split as Y = Y_plus + J with Y_plus = Y − J ≥ 0 and Y_minus = Y + J ≥ 0.
    """
    spec = choi.spec
    in_spec = spec.subset(inputs)
    marg = _marginal_map(spec, inputs)
    j = choi.entries
    eye = np.eye(in_spec.total_dim)

    b = ProgramBuilder("diamond_norm")
    b.psd("Y_plus", spec)
    b.psd("Y_minus", spec)
    b.psd("norm_slack", in_spec)
    b.nonneg("lam")
    b.equal("split", {"Y_minus": _identity_map, "Y_plus": scaled(-1.0)}, 2 * j)
    b.equal("norm", {"norm_slack": _identity_map, "Y_plus": marg, "lam": scalar_times(-eye)},
            -marg(j[None])[0])
    b.objective("lam", [[1.0]])
    return b.build("min")


def diamond_norm_hp(choi: LabeledMatrix, inputs: Sequence[str] = (A0, B0)) -> MeasureResult:
    sol = _solve(build_diamond_norm_program(choi, inputs))
    return MeasureResult.from_solution("diamond_norm", sol)


def build_diamond_distance_program(n: BipartiteChannel, m: BipartiteChannel) -> ConicProgram:
    """½‖𝒩 − ℳ‖⋄ = min ‖ω_in‖∞ s.t. ω ≥ 0, ω ≥ J^𝒩 − J^ℳ."""
    if n.dims != m.dims:
        raise DimensionError(f"diamond distance needs equal dims, got {n.dims} and {m.dims}")
    spec = n.spec
    in_spec = spec.subset((A0, B0))
    marg = _marginal_map(spec, (A0, B0))

    b = ProgramBuilder("diamond_distance")
    b.psd("omega", spec)
    b.psd("excess", spec)
    b.psd("norm_slack", in_spec)
    b.nonneg("lam")
    b.equal("dominate", {"omega": _identity_map, "excess": scaled(-1.0)},
            n.choi.entries - m.choi.entries)
    b.equal("norm", {"norm_slack": _identity_map, "omega": marg,
                     "lam": scalar_times(-np.eye(in_spec.total_dim))},
            np.zeros((in_spec.total_dim,) * 2))
    b.objective("lam", [[1.0]])
    return b.build("min")


def diamond_distance(n: BipartiteChannel, m: BipartiteChannel) -> MeasureResult:
    sol = _solve(build_diamond_distance_program(n, m))
    value = _clip_nonnegative(sol.primal_value, "diamond_distance")
    return MeasureResult.from_solution("diamond_distance", sol, value=value)


def gamma_diamond_norm(n: BipartiteChannel) -> MeasureResult:
    """‖Υ_B[𝒩]‖⋄, the diamond norm of the partially transposed map."""
    _require_channel(n)
    gamma = LabeledMatrix(n.spec, _choi_gamma(n), hermitian=True)
    return diamond_norm_hp(gamma)


def negativity(n: BipartiteChannel, norm: Optional[MeasureResult] = None) -> MeasureResult:
    """N(𝒩) = (‖Υ_B[𝒩]‖⋄ − 1)/2."""
    norm = norm or gamma_diamond_norm(n)
    value = _clip_nonnegative((norm.value - 1) / 2, "negativity")
    return norm.model_copy(update={'name': "negativity", 'value': value,
                                   'details': {'gamma_diamond_norm': norm.value}})


def log_negativity(n: BipartiteChannel, norm: Optional[MeasureResult] = None) -> MeasureResult:
    """LN(𝒩) = log₂‖Υ_B[𝒩]‖⋄."""
    norm = norm or gamma_diamond_norm(n)
    value = _clip_nonnegative(_log2(norm.value), "log_negativity")
    return norm.model_copy(update={'name': "log_negativity", 'value': value,
                                   'details': {'gamma_diamond_norm': norm.value}})


def state_negativity(rho: LabeledMatrix) -> float:
    """(‖ρ^{T_B}‖₁ − 1)/2 for a two-factor state, from eigenvalues."""
    if len(rho.spec.factors) != 2:
        raise DimensionError(f"state negativity needs two factors, got {rho.spec}")
    pt = partial_transpose(rho, [rho.labels[1]])
    return (schatten_norm(pt, Norm.TRACE) - 1) / 2


# ---------------------------------------------------------------------------
# Max-logarithmic negativity
# ---------------------------------------------------------------------------

def _envelope_blocks(b: ProgramBuilder, n: BipartiteChannel) -> None:
    """P ≥ 0 with −P^Γ ≤ J^Γ ≤ P^Γ."""
    spec = n.spec
    jg = _choi_gamma(n)
    pt = _pt_map(spec, (B0, B1))
    b.psd("P", spec)
    b.psd("S_plus", spec)
    b.psd("S_minus", spec)
    b.equal("upper", {"S_plus": _identity_map, "P": scaled(-1.0, pt)}, -jg)
    b.equal("lower", {"S_minus": _identity_map, "P": scaled(-1.0, pt)}, jg)


def _marginal_variant(n: BipartiteChannel, variant: int):
    """P ↦ P_{A0B0} (variant 0) or P_{A0B0}^{T_B0} (variant 1)."""
    if variant not in (0, 1):
        raise ValueError(f"variant must be 0 or 1, got {variant}")
    marg = _marginal_map(n.spec, (A0, B0))
    if variant == 0:
        return marg
    in_dims = n.dims[:2]
    return lambda x: transpose_on(marg(x), in_dims, [1])


def build_ln_max_program(n: BipartiteChannel, variant: int) -> ConicProgram:
    """min λ over envelopes P with ‖P_{A0B0}‖∞ ≤ λ (variant 0) or ‖P_{A0B0}^{T_B0}‖∞ ≤ λ (variant 1)."""
    d_in = n.dims[0] * n.dims[1]
    b = ProgramBuilder(f"ln_max{variant}")
    _envelope_blocks(b, n)
    b.psd("T", d_in)
    b.nonneg("lam")
    b.equal("norm", {"T": _identity_map, "P": _marginal_variant(n, variant),
                     "lam": scalar_times(-np.eye(d_in))}, np.zeros((d_in, d_in)))
    b.objective("lam", [[1.0]])
    return b.build("min")


def build_ln_max_dual_program(n: BipartiteChannel, variant: int) -> ConicProgram:
    """max Tr[J^Γ(V − W)] s.t. (V + W)^Γ ≤ ρ⊗I_out (ρ^{T_B0}⊗I_out for variant 1), V, W ≥ 0, Tr ρ = 1."""
    if variant not in (0, 1):
        raise ValueError(f"variant must be 0 or 1, got {variant}")
    spec = n.spec
    a0, b0, a1, b1 = n.dims
    d_in, d_out = a0 * b0, a1 * b1
    jg = _choi_gamma(n)
    pt = _pt_map(spec, (B0, B1))
    if variant == 0:
        def lift(x: np.ndarray) -> np.ndarray:
            return -kron_identity(x, d_out)
    else:
        def lift(x: np.ndarray) -> np.ndarray:
            return -kron_identity(transpose_on(x, (a0, b0), [1]), d_out)

    b = ProgramBuilder(f"ln_max{variant}_dual")
    b.psd("V", spec)
    b.psd("W", spec)
    b.psd("K", spec)
    b.psd("rho", d_in)
    b.equal("envelope", {"K": _identity_map, "V": pt, "W": pt, "rho": lift},
            np.zeros((spec.total_dim,) * 2))
    b.equal("normalization", {"rho": trace_map}, [[1.0]])
    b.objective("V", jg)
    b.objective("W", -jg)
    return b.build("max")


def build_ln_max_minimax_program(n: BipartiteChannel) -> ConicProgram:
    """One λ bounding both ‖P_{A0B0}‖∞ and ‖P_{A0B0}^{T_B0}‖∞."""
    d_in = n.dims[0] * n.dims[1]
    eye = np.eye(d_in)
    b = ProgramBuilder("ln_max_minimax")
    _envelope_blocks(b, n)
    b.psd("T0", d_in)
    b.psd("T1", d_in)
    b.nonneg("lam")
    for variant in (0, 1):
        b.equal(f"norm{variant}", {f"T{variant}": _identity_map,
                                    "P": _marginal_variant(n, variant),
                                    "lam": scalar_times(-eye)}, np.zeros((d_in, d_in)))
    b.objective("lam", [[1.0]])
    return b.build("min")


def _ln_max_variant(n: BipartiteChannel, variant: int, with_dual: bool = True) -> MeasureResult:
    _require_channel(n)
    name = f"ln_max{variant}"
    primal = _solve(build_ln_max_program(n, variant))
    value = _clip_nonnegative(_log2(primal.primal_value), name)
    result = MeasureResult.from_solution(name, primal, value=value)
    if not with_dual:
        return result
    dual = _solve(build_ln_max_dual_program(n, variant))
    dual_log = _log2(dual.primal_value)
    result.dual = dict(dual.values)
    result.dual_value = dual.primal_value
    result.wall_time += dual.wall_time
    result.details['dual_log'] = dual_log
    disagreement = abs(_log2(primal.primal_value) - dual_log)
    if disagreement > settings.agreement_tol:
        result.flagged = True
        result.notes.append(f"primal and dual differ by {disagreement:.3e}")
        logger.warning(f"{name}: primal {primal.primal_value:.9g} vs dual {dual.primal_value:.9g}")
    return result


def ln_max0(n: BipartiteChannel, with_dual: bool = True) -> MeasureResult:
    return _ln_max_variant(n, 0, with_dual)


def ln_max1(n: BipartiteChannel, with_dual: bool = True) -> MeasureResult:
    return _ln_max_variant(n, 1, with_dual)


def ln_max(n: BipartiteChannel, with_dual: bool = True) -> MeasureResult:
    """LN_max = max(LN_max^(0), LN_max^(1)), each certified by its dual."""
    start = time.perf_counter()
    parts = [ln_max0(n, with_dual), ln_max1(n, with_dual)]
    best = max(parts, key=lambda r: r.value)
    return best.model_copy(update={
        'name': "ln_max",
        'flagged': any(p.flagged for p in parts),
        'notes': [note for p in parts for note in p.notes],
        'details': {'ln_max0': parts[0].value, 'ln_max1': parts[1].value},
        'wall_time': time.perf_counter() - start,
    })


def ln_max_minimax(n: BipartiteChannel) -> MeasureResult:
    _require_channel(n)
    sol = _solve(build_ln_max_minimax_program(n))
    value = _clip_nonnegative(_log2(sol.primal_value), "ln_max_minimax")
    return MeasureResult.from_solution("ln_max_minimax", sol, value=value)


# ---------------------------------------------------------------------------
# PPT conversion distance
# ---------------------------------------------------------------------------

def build_conversion_distance_program(n: BipartiteChannel, m: BipartiteChannel) -> ConicProgram:
    """min Tr α/|A0'B0'| over PPT superchannels Θ and α ≥ 0 with
    α ≥ J^{Θ[𝒩]} − J^ℳ and α_{A0'B0'} uniform."""
    b = ProgramBuilder("conversion_distance")
    theta_spec = add_ppt_superchannel(b, n.dims, m.dims)
    t_spec = m.spec
    c0, d0, _, _ = m.dims
    d_in = c0 * d0
    marg = _marginal_map(t_spec, (A0, B0))
    eye = np.eye(d_in)

    b.psd("alpha", t_spec)
    b.psd("excess", t_spec)
    b.equal("dominate", {"excess": _identity_map, "alpha": scaled(-1.0),
                         "theta": _contraction_map(theta_spec, n)}, m.choi.entries)
    b.equal("uniform", {"alpha": lambda x: marg(x) - trace_map(x) * eye / d_in},
            np.zeros((d_in, d_in)))
    b.objective("alpha", np.eye(t_spec.total_dim) / d_in)
    return b.build("min")


def build_conversion_distance_dual_program(n: BipartiteChannel, m: BipartiteChannel) -> ConicProgram:
    """Lagrange dual of build_conversion_distance_program.

    max Tr σ − Tr[ζ J^ℳ] s.t. ζ ≤ η⊗I_out, Tr η = 1, ζ ≥ 0 and
    (J^𝒩)^T⊗ζ − β⊗I_{A1'B1'} + u_{A1B1}⊗Tr_{A1B1}β⊗I_{A1'B1'} − I_{A0B0A1'B1'}⊗σ = P + X^{T_{BB'}}
    with P, X ≥ 0 and β, σ free. β is gauge-fixed by Tr_{A1B1}β = 0 and Tr_{A0B0}β = 0.
    """
    a0, b0, a1, b1 = n.dims
    c0, d0, c1, d1 = m.dims
    theta_spec = superchannel_spec(n.dims, m.dims)
    t_spec = m.spec
    beta_spec = DimSpec.of((A0, a0), (A1, a1), (B0, b0), (B1, b1), (A0P, c0), (B0P, d0))
    sigma_spec = DimSpec.of((A1, a1), (B1, b1), (A0P, c0), (B0P, d0))
    pt = _pt_map(theta_spec, (B0, B1, B0P, B1P))
    beta_dims = beta_spec.dims
    contraction = _contraction_adjoint(n, m.dims)

    def beta_adjoint(x: np.ndarray) -> np.ndarray:
        full = permute_array(kron_identity(x, c1 * d1), beta_dims + (c1, d1),
                             [0, 1, 2, 3, 4, 6, 5, 7])
        inner = kron_identity(trace_out(x, beta_dims, [0, 2, 4, 5]), a1 * b1 * c1 * d1)
        inner = permute_array(inner, (a0, b0, c0, d0, a1, b1, c1, d1), [0, 4, 1, 5, 2, 6, 3, 7])
        return full - inner / (a1 * b1)

    def sigma_adjoint(x: np.ndarray) -> np.ndarray:
        lifted = kron_identity(x, a0 * b0 * c1 * d1, before=True)
        return permute_array(lifted, (a0, b0, c1, d1, a1, b1, c0, d0), [0, 4, 1, 5, 6, 2, 7, 3])

    b = ProgramBuilder("conversion_distance_dual")
    b.psd("zeta", t_spec)
    b.psd("eta", c0 * d0)
    b.psd("K", t_spec)
    b.psd("P", theta_spec)
    b.psd("X", theta_spec)
    b.free("beta", beta_spec)
    b.free("sigma", sigma_spec)
    b.equal("cone", {"P": _identity_map, "X": pt, "beta": beta_adjoint, "sigma": sigma_adjoint,
                     "zeta": scaled(-1.0, contraction)},
            np.zeros((theta_spec.total_dim,) * 2))
    b.equal("envelope", {"K": _identity_map, "zeta": _identity_map,
                         "eta": lambda x: -kron_identity(x, c1 * d1)},
            np.zeros((t_spec.total_dim,) * 2))
    b.equal("normalization", {"eta": trace_map}, [[1.0]])
    # β ↦ β + I_{A1B1}⊗γ and (β, σ) ↦ (β + I_{A0B0}⊗τ, σ − τ) leave the dual unchanged;
    # both traces vanishing pins β down.
    b.equal("beta_gauge_inner", {"beta": lambda x: trace_out(x, beta_dims, [0, 2, 4, 5])},
            np.zeros((a0 * b0 * c0 * d0,) * 2))
    b.equal("beta_gauge_outer", {"beta": lambda x: trace_out(x, beta_dims, [1, 3, 4, 5])},
            np.zeros((a1 * b1 * c0 * d0,) * 2))
    b.objective("sigma", np.eye(sigma_spec.total_dim))
    b.objective("zeta", -m.choi.entries)
    return b.build("max")


def conversion_distance_ppt(n: BipartiteChannel, m: BipartiteChannel,
                            with_dual: bool = True, recheck: bool = True) -> MeasureResult:
    """d_PPT(𝒩 → ℳ) = min over PPT superchannels Θ of ½‖Θ[𝒩] − ℳ‖⋄."""
    _require_channel(n, "source")
    _require_channel(m, "target")
    start = time.perf_counter()
    sol = _solve(build_conversion_distance_program(n, m))
    value = min(1.0, _clip_nonnegative(sol.primal_value, "conversion_distance"))
    result = MeasureResult.from_solution("conversion_distance_ppt", sol, value=value)
    theta = Superchannel(LabeledMatrix(superchannel_spec(n.dims, m.dims), sol.values["theta"]).hermitized())
    result.primal['superchannel'] = theta

    if with_dual:
        dual = _solve(build_conversion_distance_dual_program(n, m))
        result.dual = dict(dual.values)
        result.dual_value = dual.primal_value
        disagreement = abs(sol.primal_value - dual.primal_value)
        result.details['dual'] = dual.primal_value
        if disagreement > settings.agreement_tol:
            result.flagged = True
            result.notes.append(f"primal and dual differ by {disagreement:.3e}")
            logger.warning(f"conversion distance: primal {sol.primal_value:.9g} "
                           f"vs dual {dual.primal_value:.9g}")

    if recheck:
        produced = apply_superchannel(theta, n)
        check = diamond_distance(produced, m)
        result.details['recheck'] = check.value
        if abs(check.value - sol.primal_value) > settings.agreement_tol:
            result.flagged = True
            result.notes.append(f"optimal superchannel reaches {check.value:.9g}")
    result.wall_time = time.perf_counter() - start
    return result


# ---------------------------------------------------------------------------
# Complete family f_P / G_P
# ---------------------------------------------------------------------------

def build_fp_program(n: BipartiteChannel, p: BipartiteChannel) -> ConicProgram:
    """max Tr[J((J^𝒩)^T ⊗ J^𝒫)] over PPT superchannel Choi matrices J."""
    b = ProgramBuilder("f_p")
    add_ppt_superchannel(b, n.dims, p.dims)
    coeff = permute(kron(n.choi.transpose(), relabel(p.choi, PRIME)), SUPERCHANNEL_LABELS)
    b.objective("theta", coeff.hermitized().entries)
    return b.build("max")


def build_ppt_overlap_program(p: BipartiteChannel) -> ConicProgram:
    """max Tr[J^ℳ J^𝒫] over PPT channels ℳ with the dims of 𝒫."""
    spec = p.spec
    d_in = p.dims[0] * p.dims[1]
    b = ProgramBuilder("ppt_overlap")
    b.psd("M", spec)
    b.psd("M_gamma", spec)
    b.equal("ppt", {"M_gamma": _identity_map, "M": scaled(-1.0, _pt_map(spec, (B0, B1)))},
            np.zeros((spec.total_dim,) * 2))
    b.equal("trace_preserving", {"M": _marginal_map(spec, (A0, B0))}, np.eye(d_in))
    b.objective("M", p.choi.entries)
    return b.build("max")


def f_p(n: BipartiteChannel, p: BipartiteChannel) -> MeasureResult:
    _require_channel(n)
    _require_channel(p, "probe")
    sol = _solve(build_fp_program(n, p))
    return MeasureResult.from_solution("f_p", sol)


def g_p(n: BipartiteChannel, p: BipartiteChannel) -> MeasureResult:
    """G_P(𝒩) = f_P(𝒩) − max over PPT channels ℳ of Tr[J^ℳ J^𝒫]."""
    f = f_p(n, p)
    overlap = _solve(build_ppt_overlap_program(p))
    value = _clip_nonnegative(f.value - overlap.primal_value, "g_p")
    return f.model_copy(update={
        'name': "g_p",
        'value': value,
        'wall_time': f.wall_time + overlap.wall_time,
        'details': {'f_p': f.value, 'ppt_overlap': overlap.primal_value},
    })


# ---------------------------------------------------------------------------
# Exact single-shot PPT cost
# ---------------------------------------------------------------------------

def build_exact_cost_program(n: BipartiteChannel, m: int, relaxed: bool = False) -> ConicProgram:
    """Feasibility of −(m−1)ℛ^Γ ≤ 𝒩^Γ ≤ (m+1)ℛ^Γ.

    ℛ ranges over channels, or with `relaxed` over CP maps with ℛ_{A0B0} ≤ I and
    (ℛ^Γ)_{A0B0} ≤ I.
    """
    if m < 1:
        raise ValueError(f"m must be positive, got {m}")
    spec = n.spec
    jg = _choi_gamma(n)
    pt = _pt_map(spec, (B0, B1))
    marg = _marginal_map(spec, (A0, B0))
    d_in = n.dims[0] * n.dims[1]

    b = ProgramBuilder(f"exact_cost_m{m}")
    b.psd("R", spec)
    b.psd("S_upper", spec)
    b.psd("S_lower", spec)
    b.equal("upper", {"S_upper": _identity_map, "R": scaled(-(m + 1.0), pt)}, -jg)
    lower = {"S_lower": _identity_map}
    if m > 1:
        lower["R"] = scaled(-(m - 1.0), pt)
    b.equal("lower", lower, jg)
    if relaxed:
        b.psd("R_slack", d_in)
        b.psd("R_gamma_slack", d_in)
        b.equal("marginal", {"R_slack": _identity_map, "R": marg}, np.eye(d_in))
        b.equal("gamma_marginal", {"R_gamma_slack": _identity_map, "R": lambda x: marg(pt(x))},
                np.eye(d_in))
    else:
        b.equal("trace_preserving", {"R": marg}, np.eye(d_in))
    return b.build("min")


def exact_cost_single_shot(n: BipartiteChannel, m_max: Optional[int] = None, relaxed: bool = False,
                           ln_max_hint: Optional[float] = None) -> MeasureResult:
    """E^(1)_PPT(𝒩) = log₂ m* for the smallest feasible m ≤ m_max, by bisection.

    Feasibility is monotone in m. `ln_max_hint` seeds the bracket with m ≥ 2^{LN_max} − 1.
    The result carries ℛ at m* and the phase-I certificate at m* − 1.
    """
    _require_channel(n)
    m_max = m_max or settings.m_max
    start = time.perf_counter()
    cache: Dict[int, Tuple[bool, FeasibilityCertificate]] = {}

    def feasible(m: int) -> bool:
        if m not in cache:
            cache[m] = feasibility(build_exact_cost_program(n, m, relaxed))
            logger.debug(f"exact cost m={m}: shift {cache[m][1].margin:.3e}")
        return cache[m][0]

    lo = 1
    if ln_max_hint is not None:
        lo = max(1, math.ceil(2 ** ln_max_hint - 1 - settings.agreement_tol))
    name = "exact_cost_relaxed" if relaxed else "exact_cost"
    if lo > m_max:
        return MeasureResult(name=name, value=float('inf'), status="exceeds_budget", flagged=True,
                             notes=[f"lower bound m ≥ {lo} exceeds m_max={m_max}"],
                             details={'m_max': m_max}, wall_time=time.perf_counter() - start)

    bad, m = lo - 1, lo
    while not feasible(m):
        bad = m
        if m >= m_max:
            return MeasureResult(name=name, value=float('inf'), status="exceeds_budget",
                                 flagged=True, notes=[f"infeasible for every m ≤ {m_max}"],
                                 details={'m_max': m_max, 'margin': cache[m][1].margin},
                                 wall_time=time.perf_counter() - start)
        m = min(2 * m, m_max)
    good = m
    while good - bad > 1:
        mid = (good + bad) // 2
        if feasible(mid):
            good = mid
        else:
            bad = mid

    m_star = good
    _, cert = cache[m_star]
    r = BipartiteChannel(LabeledMatrix(n.spec, cert.point["R"]).hermitized())
    result = MeasureResult(
        name=name,
        value=math.log2(m_star),
        sizes=cert.solution.program.sizes(),
        iterations=sum(c.solution.iterations for _, c in cache.values()),
        residual=cert.solution.residual,
        gap=cert.solution.gap,
        details={'m': m_star, 'margin': cert.margin, 'probes': sorted(cache)},
        primal={'R': r, 'm': m_star},
    )
    if m_star > 1:
        ok, below = cache.get(m_star - 1) or feasibility(build_exact_cost_program(n, m_star - 1, relaxed))
        result.dual = {'m': m_star - 1, 'margin': below.margin, 'duals': below.duals}
        result.details['margin_below'] = below.margin
        if ok:
            result.flagged = True
            result.notes.append(f"m={m_star - 1} is feasible below the seeded bracket")
    result.wall_time = time.perf_counter() - start
    return result


# ---------------------------------------------------------------------------
# Bound cross-checks
# ---------------------------------------------------------------------------

class PowerEntry(BaseModel):
    copies: int
    exact_cost: float
    per_copy: float
    ln_max: float


class SkippedPower(BaseModel):
    copies: int
    reason: str


class CostBoundsReport(BaseModel):
    ln_max: float
    exact_cost: float
    m: Optional[int] = None
    lower: float
    upper: float
    holds: bool
    sequence: List[PowerEntry] = Field(default_factory=list)
    skipped: List[SkippedPower] = Field(default_factory=list)


def cost_bounds(ln_max_value: float) -> Tuple[float, float]:
    """log₂(2^L − 1) clipped at 0, and log₂(2^L + 2)."""
    lower = 2 ** ln_max_value - 1
    return (max(0.0, math.log2(lower)) if lower > 0 else 0.0), math.log2(2 ** ln_max_value + 2)


def cost_bounds_check(n: BipartiteChannel, slack: float = 1e-5, powers: Sequence[int] = (1, 2),
                      max_block_dim: Optional[int] = None) -> CostBoundsReport:
    """Check log₂(2^{LN_max} − 1) ≤ E^(1)_PPT ≤ log₂(2^{LN_max} + 2) and tabulate (1/k)E^(1)(𝒩^{⊗k}).

    Powers whose Choi dimension exceeds `max_block_dim` are skipped. The default of 32 skips
    the second power of every channel with a 16-dimensional Choi matrix, since that power
    needs 256-dimensional blocks.

    Raises:
        BoundViolation: if the sandwich fails beyond `slack`
    """
    max_block_dim = max_block_dim or settings.max_block_dim
    lnm = ln_max(n).value
    cost = exact_cost_single_shot(n)
    lower, upper = cost_bounds(lnm)
    if cost.status == "exceeds_budget":
        # m* > m_max only shows the cost is at least log₂(m_max + 1)
        holds = math.log2(cost.details['m_max'] + 1) <= upper + slack
    else:
        holds = lower - slack <= cost.value <= upper + slack
    report = CostBoundsReport(ln_max=lnm, exact_cost=cost.value, m=cost.details.get('m'),
                              lower=lower, upper=upper, holds=holds)

    for k in powers:
        power = n
        for _ in range(k - 1):
            power = channel_tensor(power, n)
        dim = power.spec.total_dim
        if dim > max_block_dim:
            report.skipped.append(SkippedPower(copies=k, reason=(
                f"Choi dimension {dim} exceeds max_block_dim={max_block_dim}; "
                f"pass max_block_dim >= {dim} (or set PPTDYN_MAX_BLOCK_DIM) to tabulate it")))
            continue
        value = cost.value if k == 1 else exact_cost_single_shot(power).value
        report.sequence.append(PowerEntry(copies=k, exact_cost=value, per_copy=value / k, ln_max=k * lnm))

    if not holds:
        logger.error(f"Cost sandwich violated: {lower:.9g} ≤ {cost.value:.9g} ≤ {upper:.9g}")
        raise BoundViolation(f"exact cost {cost.value:.9g} outside [{lower:.9g}, {upper:.9g}]", report)
    return report
