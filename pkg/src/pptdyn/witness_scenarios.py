"""
NPT witnesses against the PPT-superchannel cone, and scenario checks built on it:
separable superchannels, a bound entangled POVM and the PPT-comb distillation no-go.
"""

import logging
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field

from .config import MARGINAL_TOL, PSD_TOL, settings
from .exceptions import DimensionError, InvalidObjectError, SolverError
from .measures import add_ppt_superchannel, ln_max, negativity, superchannel_spec
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
    Channel,
    Comb,
    Povm,
    Superchannel,
    comb_apply,
    is_channel,
    is_comb_valid,
    is_ppt_channel,
    is_ppt_comb,
    is_ppt_superchannel,
    povm_channel,
    sequential_comb,
    superchannel_from_pre_post,
)
from .quantum.channels import Seed, _rng, choi_from_kraus
from .solver import ProgramBuilder, dump_triplets, solve
from .tensor import (
    DimSpec,
    LabeledMatrix,
    eigvalsh,
    hermitian_eig,
    identity,
    is_hermitian,
    is_psd,
    kron,
    maximally_mixed,
    min_eigenvalue,
    partial_trace,
    partial_transpose,
    permute,
)

logger = logging.getLogger(__name__)

KrausItem = Union[np.ndarray, Tuple[np.ndarray, np.ndarray]]


# ---------------------------------------------------------------------------
# Witnesses
# ---------------------------------------------------------------------------

def _y_spec(spec: DimSpec) -> DimSpec:
    return spec.subset((A0, A1, B0, B1, A0P, B0P))


def _z_spec(spec: DimSpec) -> DimSpec:
    return spec.subset((A1, B1, A0P, B0P))


class Witness:
    """W = P + X^{T_{BB'}} + Y⊗I_{A1'B1'} + I_{A0B0A1'B1'}⊗Z over the superchannel factors.

    Y lives on (A0, A1, B0, B1, A0', B0') with Tr_{A1B1} Y = 0 and Z on (A1, B1, A0', B0')
    with Tr Z = 0, so both pair to zero with every superchannel Choi.
    """

    def __init__(self, p: LabeledMatrix, x: LabeledMatrix, y: LabeledMatrix, z: LabeledMatrix):
        self.p = p
        self.x = x
        self.y = y
        self.z = z
        self.spec = p.spec
        self.terms = {
            'P': p,
            'X': partial_transpose(x, (B0, B1, B0P, B1P)),
            'Y': permute(kron(y, identity(self.spec.subset((A1P, B1P)))), SUPERCHANNEL_LABELS),
            'Z': permute(kron(identity(self.spec.subset((A0, B0, A1P, B1P))), z), SUPERCHANNEL_LABELS),
        }
        total = sum((t.entries for t in self.terms.values()), np.zeros_like(p.entries))
        self.matrix = LabeledMatrix(self.spec, total, hermitian=True)
        w, v = hermitian_eig(self.matrix)
        scale = max(float(np.max(np.abs(w))), 1.0)
        self.min_eigenvalue = float(w[-1])
        # unit vector with ⟨v|W|v⟩ = min_eigenvalue
        self.negative_direction = v[:, -1]
        self.proper = bool(w[-1] < -PSD_TOL * scale)

    @property
    def source_dims(self) -> Tuple[int, int, int, int]:
        s = self.spec
        return (s.dim(A0), s.dim(B0), s.dim(A1), s.dim(B1))

    @property
    def target_dims(self) -> Tuple[int, int, int, int]:
        s = self.spec
        return (s.dim(A0P), s.dim(B0P), s.dim(A1P), s.dim(B1P))

    def __repr__(self) -> str:
        return f"Witness(spec={self.spec}, proper={self.proper}, min_eig={self.min_eigenvalue:.3e})"


def witness_assemble(p, x, y, z, source_dims: Sequence[int], target_dims: Sequence[int],
                     tol: float = MARGINAL_TOL) -> Witness:
    """Assemble and check witness components given as arrays or labeled matrices.

    Raises:
        InvalidObjectError: if a component violates its cone constraint
    """
    spec = superchannel_spec(source_dims, target_dims)
    y_spec, z_spec = _y_spec(spec), _z_spec(spec)

    def load(value, target: DimSpec, name: str) -> LabeledMatrix:
        entries = value.entries if isinstance(value, LabeledMatrix) else value
        try:
            m = LabeledMatrix(target, entries)
        except DimensionError as e:
            raise InvalidObjectError(f"witness component {name}: {e}") from e
        if not is_hermitian(m):
            raise InvalidObjectError(f"witness component {name} is not Hermitian")
        return m.hermitized()

    p_m, x_m = load(p, spec, "P"), load(x, spec, "X")
    y_m, z_m = load(y, y_spec, "Y"), load(z, z_spec, "Z")
    for name, m in (("P", p_m), ("X", x_m)):
        if not is_psd(m):
            raise InvalidObjectError(f"witness component {name} is not PSD")
    y_marginal = partial_trace(y_m, (A0, B0, A0P, B0P)).entries
    if float(np.max(np.abs(y_marginal), initial=0.0)) > tol * max(1.0, float(np.max(np.abs(y_m.entries)))):
        raise InvalidObjectError("witness component Y must satisfy Tr_{A1B1} Y = 0")
    z_trace = abs(z_m.trace())
    if z_trace > tol * max(1.0, float(np.max(np.abs(z_m.entries)))):
        raise InvalidObjectError(f"witness component Z must be traceless, |Tr Z| = {z_trace:.3e}")
    return Witness(p_m, x_m, y_m, z_m)


def _wishart(rng: np.random.Generator, d: int) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    w = g @ g.conj().T
    return w / np.trace(w).real


def _random_hermitian(rng: np.random.Generator, d: int) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return (g + g.conj().T) / 2


def random_witness(source_dims: Sequence[int], target_dims: Sequence[int],
                   seed: Seed = None) -> Witness:
    """Witness with Wishart P, X, a marginal-free Y and a traceless Z."""
    rng = _rng(seed)
    spec = superchannel_spec(source_dims, target_dims)
    y_spec, z_spec = _y_spec(spec), _z_spec(spec)
    d = spec.total_dim

    h = LabeledMatrix(y_spec, _random_hermitian(rng, y_spec.total_dim), hermitian=True)
    marginal = partial_trace(h, (A0, B0, A0P, B0P))
    u = maximally_mixed(y_spec.subset((A1, B1)))
    y = h - permute(kron(marginal, u), y_spec.labels)

    z = _random_hermitian(rng, z_spec.total_dim)
    z = z - np.trace(z) * np.eye(z_spec.total_dim) / z_spec.total_dim

    return witness_assemble(_wishart(rng, d), _wishart(rng, d), y, z, source_dims, target_dims)


def witness_pairing(w: Witness, theta: Union[Superchannel, LabeledMatrix]) -> float:
    """Tr[W J^Θ]."""
    choi = theta.choi if isinstance(theta, Superchannel) else theta
    return float(np.real(np.trace(w.matrix.entries @ choi.entries)))


def component_pairings(w: Witness, theta: Union[Superchannel, LabeledMatrix]) -> Dict[str, float]:
    """Tr[term · J^Θ] for each of the P, X, Y and Z terms."""
    choi = theta.choi if isinstance(theta, Superchannel) else theta
    return {name: float(np.real(np.trace(t.entries @ choi.entries))) for name, t in w.terms.items()}


def witness_validate(w: Union[Witness, LabeledMatrix]) -> Tuple[float, bool]:
    """Minimum of Tr[W J] over PPT-superchannel Choi matrices J.

    `w` is an assembled Witness or a bare matrix over the superchannel factors.

    Returns:
        (min_value, is_witness): is_witness requires min_value ≥ −1e-6 and W not PSD

    Raises:
        SolverError: if the minimization does not reach a certified optimum
    """
    if isinstance(w, Witness):
        matrix, proper = w.matrix, w.proper
    else:
        if w.labels != SUPERCHANNEL_LABELS:
            raise DimensionError(f"witness must be over {SUPERCHANNEL_LABELS}, got {w.labels}")
        matrix = w
        eig = eigvalsh(w)
        proper = bool(eig[-1] < -PSD_TOL * max(float(np.max(np.abs(eig))), 1.0))
    s = matrix.spec
    source = (s.dim(A0), s.dim(B0), s.dim(A1), s.dim(B1))
    target = (s.dim(A0P), s.dim(B0P), s.dim(A1P), s.dim(B1P))

    b = ProgramBuilder("witness_validate")
    add_ppt_superchannel(b, source, target)
    b.objective("theta", matrix.entries)
    program = b.build("min")
    sol = solve(program)
    if not sol.optimal:
        logger.error(f"Witness validation ended with {sol.status.value}")
        raise SolverError(f"{program.name} ended with status {sol.status.value} ({sol.solver_status})",
                          sol, dump_triplets(program))
    min_value = sol.primal_value
    return min_value, bool(min_value >= -1e-6 and proper)


# ---------------------------------------------------------------------------
# Separable superchannels
# ---------------------------------------------------------------------------

def split_product_operator(k: np.ndarray, out_dims: Tuple[int, int],
                           in_dims: Tuple[int, int], tol: float = 1e-10) -> Tuple[np.ndarray, np.ndarray]:
    """Factor K = X ⊗ Y via the operator Schmidt decomposition.

    Raises:
        InvalidObjectError: if K has operator Schmidt rank above one
    """
    oa, ob = out_dims
    ia, ib = in_dims
    k = np.asarray(k, dtype=complex)
    if k.shape != (oa * ob, ia * ib):
        raise DimensionError(f"Kraus operator of shape {k.shape}, expected {(oa * ob, ia * ib)}")
    realigned = k.reshape(oa, ob, ia, ib).transpose(0, 2, 1, 3).reshape(oa * ia, ob * ib)
    u, s, vh = np.linalg.svd(realigned)
    if s.size > 1 and s[1] > tol * max(s[0], 1.0):
        raise InvalidObjectError(f"Kraus operator is not a product across the cut (σ₂ = {s[1]:.2e})")
    root = np.sqrt(s[0])
    return (root * u[:, 0]).reshape(oa, ia), (root * vh[0, :]).reshape(ob, ib)


def _product_kraus(items: Sequence[KrausItem], out_dims: Tuple[int, int],
                   in_dims: Tuple[int, int]) -> List[np.ndarray]:
    kraus = []
    for item in items:
        if isinstance(item, tuple):
            x, y = (np.asarray(f, dtype=complex) for f in item)
        else:
            x, y = split_product_operator(item, out_dims, in_dims)
        if x.shape != (out_dims[0], in_dims[0]) or y.shape != (out_dims[1], in_dims[1]):
            raise DimensionError(f"Kraus pair shapes {x.shape}, {y.shape} do not fit "
                                 f"{in_dims} → {out_dims}")
        kraus.append(np.kron(x, y))
    return kraus


def seps_from_pre_post(pre: Sequence[KrausItem], post: Sequence[KrausItem],
                       source_dims: Sequence[int], target_dims: Sequence[int],
                       memory_dims: Tuple[int, int] = (1, 1)) -> Superchannel:
    """Superchannel from separable pre- and post-processing in product-Kraus form.

    Pre Kraus pairs map A0' → A0⊗MA and B0' → B0⊗MB; post pairs map A1⊗MA → A1' and
    B1⊗MB → B1'. Items are (X, Y) pairs or full operators that factor across the cut.
    """
    a0, b0, a1, b1 = source_dims
    c0, d0, c1, d1 = target_dims
    ma, mb = memory_dims
    pre_in = DimSpec.of((A0P, c0), (B0P, d0))
    pre_out = DimSpec.of((A0, a0), ("MA", ma), (B0, b0), ("MB", mb))
    post_in = DimSpec.of((A1, a1), ("MA", ma), (B1, b1), ("MB", mb))
    post_out = DimSpec.of((A1P, c1), (B1P, d1))

    pre_k = _product_kraus(pre, (a0 * ma, b0 * mb), (c0, d0))
    post_k = _product_kraus(post, (c1, d1), (a1 * ma, b1 * mb))
    pre_ch = Channel(choi_from_kraus(pre_k, pre_in, pre_out), pre_in.labels, pre_out.labels,
                     (B0P, B0, "MB"))
    post_ch = Channel(choi_from_kraus(post_k, post_in, post_out), post_in.labels, post_out.labels,
                      ("MB", B1, B1P))
    return superchannel_from_pre_post(pre_ch, post_ch)


def seps_ppt_relaxation(t: Superchannel) -> bool:
    """Necessary condition for a separable superchannel: it is PPT."""
    return is_ppt_superchannel(t)


# ---------------------------------------------------------------------------
# Bound entangled POVM
# ---------------------------------------------------------------------------

def tiles_state() -> LabeledMatrix:
    """3⊗3 PPT entangled state (I − Σ_i |ψ_i⟩⟨ψ_i|)/4 from the five tile vectors.

    ψ0 = |0⟩(|0⟩−|1⟩)/√2, ψ1 = (|0⟩−|1⟩)|2⟩/√2, ψ2 = |2⟩(|1⟩−|2⟩)/√2,
    ψ3 = (|1⟩−|2⟩)|0⟩/√2, ψ4 = (|0⟩+|1⟩+|2⟩)^{⊗2}/3.
    """
    e = np.eye(3, dtype=int)
    tiles = [
        np.kron(e[0], e[0] - e[1]),
        np.kron(e[0] - e[1], e[2]),
        np.kron(e[2], e[1] - e[2]),
        np.kron(e[1] - e[2], e[0]),
    ]
    center = np.ones(9, dtype=int)
    # tiles have squared norm 2 and the center 9, so with lcm(4·2, 4·9) = 72:
    # 72ρ = 18I − 9Σ|t_i⟩⟨t_i| − 2|c⟩⟨c|, an integer matrix
    numerators = (18 * np.eye(9, dtype=int) - 9 * sum(np.outer(t, t) for t in tiles)
                  - 2 * np.outer(center, center))
    spec = DimSpec.of(("A", 3), ("B", 3))
    return LabeledMatrix(spec, numerators / 72, hermitian=True)


class BoundPovmReport(BaseModel):
    is_ppt_channel: bool
    ln_max: Optional[float] = None
    negativity: Optional[float] = None
    min_pt_eigenvalue: float
    beta_max_eigenvalue: float


def bound_povm_channel(beta: LabeledMatrix, measures: bool = True) -> Tuple[BipartiteChannel, BoundPovmReport]:
    """Binary POVM {β, I − β} on (A0, B0) as a quantum-to-classical channel.

    Raises:
        InvalidObjectError: if I − β is not PSD
    """
    if len(beta.spec.factors) != 2:
        raise DimensionError(f"β must be a bipartite operator, got {beta.spec}")
    spec = DimSpec.of((A0, beta.spec.dims[0]), (B0, beta.spec.dims[1]))
    e = LabeledMatrix(spec, beta.entries, hermitian=True)
    top = float(eigvalsh(e)[0])
    if top > 1 + PSD_TOL:
        raise InvalidObjectError(f"β has eigenvalue {top:.6g} > 1, so I − β is not PSD")
    f = identity(spec) - e
    channel = povm_channel(Povm([e, f]))
    gamma = partial_transpose(channel.choi, (B0, B1))
    report = BoundPovmReport(
        is_ppt_channel=is_ppt_channel(channel),
        min_pt_eigenvalue=min_eigenvalue(gamma),
        beta_max_eigenvalue=top,
    )
    if measures:
        report.ln_max = ln_max(channel).value
        report.negativity = negativity(channel).value
    logger.info(f"Bound POVM channel: PPT={report.is_ppt_channel}, LN_max={report.ln_max}")
    return channel, report


# ---------------------------------------------------------------------------
# Distillation no-go
# ---------------------------------------------------------------------------

class NoGoReport(BaseModel):
    violation: bool = False
    min_pt_eigenvalue: Optional[float] = None
    precondition_failures: List[str] = Field(default_factory=list)
    slots: int
    output_dims: Tuple[int, int, int, int] = (0, 0, 0, 0)
    certified_separable: Optional[bool] = None

    @property
    def preconditions_met(self) -> bool:
        return not self.precondition_failures


def distillation_no_go(c: Comb, inputs: Sequence[BipartiteChannel]) -> NoGoReport:
    """Check that a PPT comb fed with PPT channels outputs a PPT channel.

    Precondition failures are reported in `precondition_failures` and leave `violation`
    false; for 2⊗2 output states a PPT output is certified separable.
    """
    report = NoGoReport(slots=c.slot_count)
    if not is_comb_valid(c):
        report.precondition_failures.append("comb fails the causal marginal conditions")
    elif not is_ppt_comb(c):
        report.precondition_failures.append("comb is not PPT")
    if len(inputs) != c.slot_count:
        report.precondition_failures.append(f"comb has {c.slot_count} slots, got {len(inputs)} channels")
    for k, n in enumerate(inputs, start=1):
        if not is_channel(n):
            report.precondition_failures.append(f"slot {k} input is not a channel")
        elif not is_ppt_channel(n):
            report.precondition_failures.append(f"slot {k} input is not PPT")
    if report.precondition_failures:
        logger.info(f"No-go preconditions failed: {report.precondition_failures}")
        return report

    out = comb_apply(c, inputs)
    gamma = partial_transpose(out.choi, (B0, B1))
    w = eigvalsh(gamma)
    scale = max(float(np.max(np.abs(w))), 1.0)
    report.min_pt_eigenvalue = float(w[-1])
    report.output_dims = out.dims
    report.violation = bool(w[-1] < -PSD_TOL * scale)
    if out.is_state and out.dims[2:] == (2, 2):
        report.certified_separable = not report.violation
    if report.violation:
        logger.error(f"No-go violated: PT min eigenvalue {w[-1]:.3e}")
    return report


def sequential_no_go(pre: Channel, post: Channel, channel: BipartiteChannel,
                     repetitions: int = 2) -> NoGoReport:
    """Adaptive repetition of one PPT superchannel on copies of a PPT channel."""
    if repetitions < 1:
        raise ValueError(f"repetitions must be positive, got {repetitions}")
    comb = sequential_comb([(pre, post)] * repetitions)
    report = distillation_no_go(comb, [channel] * repetitions)
    if settings.debug:
        logger.debug(f"Sequential no-go over {repetitions} steps: {report}")
    return report
