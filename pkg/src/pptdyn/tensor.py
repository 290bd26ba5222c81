"""
Dense linear algebra over labeled tensor factors.

Every matrix carries a DimSpec: an ordered list of (label, dim) factors. All reshapes
derive their strides from that order, row-major, so the first factor is the most
significant index.
"""

import logging
from enum import Enum
from functools import reduce
from typing import Dict, Iterable, List, Mapping, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, field_validator

from .config import EIG_TOL, HERM_TOL, PSD_TOL
from .exceptions import DimensionError, LabelError, NotHermitianError

logger = logging.getLogger(__name__)

# numpy.einsum accepts the 52 letters a-z and A-Z as integer subscripts
EINSUM_SUBSCRIPTS = 52


class Norm(str, Enum):
    """Schatten norms supported by schatten_norm."""
    TRACE = "trace"
    OPERATOR = "operator"
    FROBENIUS = "frobenius"


class DimSpec(BaseModel):
    """Ordered subsystem labels with their dimensions."""

    model_config = ConfigDict(frozen=True)

    factors: Tuple[Tuple[str, int], ...]

    @field_validator('factors')
    @classmethod
    def _check_factors(cls, v: Tuple[Tuple[str, int], ...]) -> Tuple[Tuple[str, int], ...]:
        labels = [label for label, _ in v]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in {labels}")
        for label, dim in v:
            if dim < 1:
                raise ValueError(f"factor {label} has dimension {dim} < 1")
        return v

    @classmethod
    def of(cls, *pairs: Tuple[str, int]) -> "DimSpec":
        return cls(factors=tuple((str(label), int(dim)) for label, dim in pairs))

    @property
    def labels(self) -> Tuple[str, ...]:
        return tuple(label for label, _ in self.factors)

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(dim for _, dim in self.factors)

    @property
    def total_dim(self) -> int:
        return reduce(lambda x, y: x * y, self.dims, 1)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"unknown label '{label}' (have {list(self.labels)})") from None

    def dim(self, label: str) -> int:
        return self.factors[self.index(label)][1]

    def dim_of(self, labels: Iterable[str]) -> int:
        """Product of the dimensions of the given labels."""
        return reduce(lambda x, y: x * y, (self.dim(label) for label in labels), 1)

    def subset(self, labels: Iterable[str]) -> "DimSpec":
        """Sub-spec holding the given labels, in this spec's order."""
        wanted = set(labels)
        for label in wanted:
            self.index(label)
        return DimSpec(factors=tuple(f for f in self.factors if f[0] in wanted))

    def reorder(self, order: Sequence[str]) -> "DimSpec":
        if sorted(order) != sorted(self.labels):
            raise LabelError(f"order {list(order)} is not a permutation of {list(self.labels)}")
        return DimSpec(factors=tuple((label, self.dim(label)) for label in order))

    def relabel(self, mapping: Mapping[str, str]) -> "DimSpec":
        for label in mapping:
            self.index(label)
        return DimSpec(factors=tuple((mapping.get(label, label), dim) for label, dim in self.factors))

    def concat(self, other: "DimSpec") -> "DimSpec":
        clash = set(self.labels) & set(other.labels)
        if clash:
            raise LabelError(f"label collision: {sorted(clash)}")
        return DimSpec(factors=self.factors + other.factors)

    def __str__(self) -> str:
        return "(" + ", ".join(f"{label}:{dim}" for label, dim in self.factors) + ")"


class LabeledMatrix:
    """A square complex matrix over a DimSpec. Entries are read-only after construction."""

    __slots__ = ("spec", "entries", "hermitian")

    def __init__(self, spec: DimSpec, entries, hermitian: bool = False):
        arr = np.array(entries, dtype=complex)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        n = spec.total_dim
        if arr.shape != (n, n):
            raise DimensionError(f"matrix shape {arr.shape} does not match spec {spec} (dim {n})")
        if hermitian and not _hermitian_entries(arr):
            raise NotHermitianError(f"matrix over {spec} is not Hermitian within {HERM_TOL}")
        arr.setflags(write=False)
        self.spec = spec
        self.entries = arr
        self.hermitian = hermitian

    @property
    def labels(self) -> Tuple[str, ...]:
        return self.spec.labels

    @property
    def dim(self) -> int:
        return self.spec.total_dim

    def trace(self) -> complex:
        return complex(np.trace(self.entries))

    def dag(self) -> "LabeledMatrix":
        return LabeledMatrix(self.spec, self.entries.conj().T, self.hermitian)

    def transpose(self) -> "LabeledMatrix":
        return LabeledMatrix(self.spec, self.entries.T, self.hermitian)

    def hermitized(self) -> "LabeledMatrix":
        """(M + M†)/2, flagged Hermitian."""
        return LabeledMatrix(self.spec, (self.entries + self.entries.conj().T) / 2, True)

    def _check_same(self, other: "LabeledMatrix") -> None:
        if other.spec != self.spec:
            raise DimensionError(f"spec mismatch: {self.spec} vs {other.spec}")

    def __add__(self, other: "LabeledMatrix") -> "LabeledMatrix":
        self._check_same(other)
        return LabeledMatrix(self.spec, self.entries + other.entries,
                             self.hermitian and other.hermitian)

    def __sub__(self, other: "LabeledMatrix") -> "LabeledMatrix":
        self._check_same(other)
        return LabeledMatrix(self.spec, self.entries - other.entries,
                             self.hermitian and other.hermitian)

    def __mul__(self, scalar) -> "LabeledMatrix":
        real = np.isreal(scalar)
        return LabeledMatrix(self.spec, self.entries * scalar, self.hermitian and bool(real))

    __rmul__ = __mul__

    def __truediv__(self, scalar) -> "LabeledMatrix":
        return self * (1.0 / scalar)

    def __neg__(self) -> "LabeledMatrix":
        return self * -1.0

    def __matmul__(self, other: "LabeledMatrix") -> "LabeledMatrix":
        self._check_same(other)
        return LabeledMatrix(self.spec, self.entries @ other.entries)

    def allclose(self, other: "LabeledMatrix", atol: float = 1e-10) -> bool:
        return self.spec == other.spec and bool(np.allclose(self.entries, other.entries, atol=atol, rtol=0))

    def __repr__(self) -> str:
        return f"LabeledMatrix(spec={self.spec}, hermitian={self.hermitian})"


def _hermitian_entries(arr: np.ndarray, tol: float = HERM_TOL) -> bool:
    scale = float(np.max(np.abs(arr))) if arr.size else 0.0
    if scale == 0.0:
        return True
    return float(np.max(np.abs(arr - arr.conj().T))) <= tol * scale


# ---------------------------------------------------------------------------
# Array kernels on (..., D, D) arrays. The solver's modelling layer calls these on
# batches of basis matrices.
# ---------------------------------------------------------------------------

def trace_out(arr: np.ndarray, dims: Sequence[int], keep: Sequence[int]) -> np.ndarray:
    """Partial trace keeping factor positions `keep` (in original order)."""
    k = len(dims)
    keep = sorted(keep)
    batch = arr.shape[:-2]
    t = arr.reshape(batch + tuple(dims) + tuple(dims))
    ket = list(range(k))
    bra = [i if i not in keep else k + i for i in range(k)]
    out = [i for i in keep] + [k + i for i in keep]
    res = np.einsum(t, [Ellipsis] + ket + bra, [Ellipsis] + out)
    dk = reduce(lambda x, y: x * y, (dims[i] for i in keep), 1)
    return res.reshape(batch + (dk, dk))


def transpose_on(arr: np.ndarray, dims: Sequence[int], which: Iterable[int]) -> np.ndarray:
    """Transpose the selected factor positions only."""
    which = set(which)
    if not which:
        return arr.copy()
    k = len(dims)
    batch = arr.shape[:-2]
    nb = len(batch)
    t = arr.reshape(batch + tuple(dims) + tuple(dims))
    axes = list(range(nb))
    ket_axes = [nb + (k + i if i in which else i) for i in range(k)]
    bra_axes = [nb + (i if i in which else k + i) for i in range(k)]
    return t.transpose(axes + ket_axes + bra_axes).reshape(arr.shape)


def permute_array(arr: np.ndarray, dims: Sequence[int], order: Sequence[int]) -> np.ndarray:
    """Reorder factors: new factor j is old factor order[j]."""
    k = len(dims)
    batch = arr.shape[:-2]
    nb = len(batch)
    t = arr.reshape(batch + tuple(dims) + tuple(dims))
    axes = list(range(nb)) + [nb + i for i in order] + [nb + k + i for i in order]
    return t.transpose(axes).reshape(arr.shape)


def kron_identity(arr: np.ndarray, dim: int, before: bool = False) -> np.ndarray:
    """Batched A ⊗ I_dim (or I_dim ⊗ A)."""
    eye = np.eye(dim)
    if before:
        res = np.einsum('ij,...kl->...ikjl', eye, arr)
    else:
        res = np.einsum('...ij,kl->...ikjl', arr, eye)
    n = arr.shape[-1] * dim
    return res.reshape(arr.shape[:-2] + (n, n))


def link_kernel(arr: np.ndarray, spec: DimSpec, other: LabeledMatrix,
                optimize: bool = True) -> Tuple[np.ndarray, DimSpec]:
    """Batched link product of (..., D, D) arrays over `spec` with a fixed labeled matrix.

    Kets meet kets and bras meet bras over the shared labels. The result lists the
    array's remaining factors followed by the other matrix's.
    """
    other_labels = set(other.labels)
    shared = [label for label in spec.labels if label in other_labels]
    for label in shared:
        if spec.dim(label) != other.spec.dim(label):
            raise DimensionError(
                f"shared factor {label} has dim {spec.dim(label)} vs {other.spec.dim(label)}")

    needed = 2 * len(set(spec.labels) | other_labels)
    if needed > EINSUM_SUBSCRIPTS:
        raise DimensionError(
            f"link product needs {needed} einsum subscripts, at most {EINSUM_SUBSCRIPTS} are available")

    counter = iter(range(needed))
    ket: Dict[Tuple[str, str], int] = {}
    bra: Dict[Tuple[str, str], int] = {}
    for label in shared:
        ket[('s', label)] = next(counter)
        bra[('s', label)] = next(counter)
    for side, labels in (('a', spec.labels), ('b', other.labels)):
        for label in labels:
            if label not in shared:
                ket[(side, label)] = next(counter)
                bra[(side, label)] = next(counter)

    def subs(side: str, labels: Sequence[str]) -> List[int]:
        keys = [('s', label) if label in shared else (side, label) for label in labels]
        return [ket[k] for k in keys] + [bra[k] for k in keys]

    free_a = [label for label in spec.labels if label not in shared]
    free_b = [label for label in other.labels if label not in shared]
    out = ([ket[('a', label)] for label in free_a] + [ket[('b', label)] for label in free_b]
           + [bra[('a', label)] for label in free_a] + [bra[('b', label)] for label in free_b])

    batch = arr.shape[:-2]
    ta = arr.reshape(batch + spec.dims + spec.dims)
    tb = other.entries.reshape(other.spec.dims + other.spec.dims)
    res = np.einsum(ta, [Ellipsis] + subs('a', spec.labels), tb, subs('b', other.labels),
                    [Ellipsis] + out, optimize=optimize)

    out_spec = DimSpec.of(*([(label, spec.dim(label)) for label in free_a]
                            + [(label, other.spec.dim(label)) for label in free_b]))
    n = out_spec.total_dim
    return res.reshape(batch + (n, n)), out_spec


# ---------------------------------------------------------------------------
# Labeled operations
# ---------------------------------------------------------------------------

def kron(a: LabeledMatrix, b: LabeledMatrix) -> LabeledMatrix:
    spec = a.spec.concat(b.spec)
    return LabeledMatrix(spec, np.kron(a.entries, b.entries), a.hermitian and b.hermitian)


def kron_all(*mats: LabeledMatrix) -> LabeledMatrix:
    return reduce(kron, mats)


def partial_trace(m: LabeledMatrix, keep: Iterable[str]) -> LabeledMatrix:
    """Trace out every factor not in `keep`; kept factors stay in their original order."""
    keep = set(keep)
    idx = [m.spec.index(label) for label in keep]
    spec = m.spec.subset(keep)
    return LabeledMatrix(spec, trace_out(m.entries, m.spec.dims, idx), m.hermitian)


def trace_over(m: LabeledMatrix, traced: Iterable[str]) -> LabeledMatrix:
    traced = set(traced)
    for label in traced:
        m.spec.index(label)
    return partial_trace(m, [label for label in m.labels if label not in traced])


def partial_transpose(m: LabeledMatrix, subset: Iterable[str]) -> LabeledMatrix:
    idx = [m.spec.index(label) for label in set(subset)]
    return LabeledMatrix(m.spec, transpose_on(m.entries, m.spec.dims, idx), m.hermitian)


def permute(m: LabeledMatrix, order: Sequence[str]) -> LabeledMatrix:
    spec = m.spec.reorder(order)
    idx = [m.spec.index(label) for label in order]
    return LabeledMatrix(spec, permute_array(m.entries, m.spec.dims, idx), m.hermitian)


def relabel(m: LabeledMatrix, mapping: Mapping[str, str]) -> LabeledMatrix:
    return LabeledMatrix(m.spec.relabel(mapping), m.entries, m.hermitian)


def merge(m: LabeledMatrix, groups: Sequence[Tuple[str, Sequence[str]]]) -> LabeledMatrix:
    """Fuse groups of factors into single factors.

    Args:
        m: Matrix to regroup
        groups: (new_label, [old labels]) pairs covering every factor exactly once

    Returns:
        Matrix over one factor per group, in group order
    """
    order = [label for _, labels in groups for label in labels]
    p = permute(m, order)
    spec = DimSpec.of(*((new, m.spec.dim_of(labels)) for new, labels in groups))
    return LabeledMatrix(spec, p.entries, m.hermitian)


def link_product(a: LabeledMatrix, b: LabeledMatrix) -> LabeledMatrix:
    """Contract a and b over their shared labels.

    Computes Tr_S[(a^{T_S} ⊗ I)(I ⊗ b)] for the shared factors S without forming the
    extended operators. The result lists a's remaining factors followed by b's.
    """
    res, spec = link_kernel(a.entries, a.spec, b)
    return LabeledMatrix(spec, res, a.hermitian and b.hermitian)


def hermitian_eig(m: LabeledMatrix) -> Tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and unitary eigenvectors of a Hermitian matrix."""
    if not _hermitian_entries(m.entries):
        raise NotHermitianError(f"hermitian_eig called on non-Hermitian matrix over {m.spec}")
    h = (m.entries + m.entries.conj().T) / 2
    w, v = np.linalg.eigh(h)
    w, v = w[::-1], v[:, ::-1]
    scale = max(float(np.max(np.abs(w))), 1.0) if w.size else 1.0
    err = float(np.max(np.abs(v @ np.diag(w) @ v.conj().T - h))) if w.size else 0.0
    if err > EIG_TOL * scale:
        logger.warning(f"Eigen-reconstruction error {err:.2e} exceeds {EIG_TOL} over {m.spec}")
    return w, v


def eigvalsh(m: LabeledMatrix) -> np.ndarray:
    if not _hermitian_entries(m.entries):
        raise NotHermitianError(f"eigenvalues requested for non-Hermitian matrix over {m.spec}")
    return np.linalg.eigvalsh((m.entries + m.entries.conj().T) / 2)[::-1]


def schatten_norm(m: LabeledMatrix, p: Norm | str) -> float:
    p = Norm(p)
    if p is Norm.FROBENIUS:
        return float(np.linalg.norm(m.entries))
    w = np.abs(eigvalsh(m))
    if p is Norm.TRACE:
        return float(np.sum(w))
    return float(np.max(w)) if w.size else 0.0


def min_eigenvalue(m: LabeledMatrix) -> float:
    return float(eigvalsh(m)[-1])


def is_hermitian(m: LabeledMatrix, tol: float = HERM_TOL) -> bool:
    return _hermitian_entries(m.entries, tol)


def is_psd(m: LabeledMatrix, tol: float = PSD_TOL) -> bool:
    """min eigenvalue ≥ −tol·‖m‖∞."""
    if not is_hermitian(m):
        return False
    w = eigvalsh(m)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    return bool(w[-1] >= -tol * scale)


# ---------------------------------------------------------------------------
# Standard matrices
# ---------------------------------------------------------------------------

def identity(spec: DimSpec) -> LabeledMatrix:
    return LabeledMatrix(spec, np.eye(spec.total_dim), True)


def maximally_mixed(spec: DimSpec) -> LabeledMatrix:
    """u = I/|spec|."""
    return LabeledMatrix(spec, np.eye(spec.total_dim) / spec.total_dim, True)


def projector(spec: DimSpec, vector) -> LabeledMatrix:
    """|ψ⟩⟨ψ| for an (unnormalized) vector."""
    psi = np.asarray(vector, dtype=complex).reshape(-1)
    if psi.size != spec.total_dim:
        raise DimensionError(f"vector of length {psi.size} does not fit {spec}")
    return LabeledMatrix(spec, np.outer(psi, psi.conj()), True)


def unnormalized_max_entangled(a: Tuple[str, int], b: Tuple[str, int]) -> LabeledMatrix:
    """Φ⁺ = Σ_ij |ii⟩⟨jj| on two factors of equal dimension."""
    if a[1] != b[1]:
        raise DimensionError(f"maximally entangled pair needs equal dims, got {a} and {b}")
    d = a[1]
    psi = np.eye(d).reshape(-1)
    return projector(DimSpec.of(a, b), psi)


def flip_operator(d: int, labels: Tuple[str, str] = ("A", "B")) -> LabeledMatrix:
    """F|ij⟩ = |ji⟩ on d⊗d."""
    f = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            f[j * d + i, i * d + j] = 1.0
    return LabeledMatrix(DimSpec.of((labels[0], d), (labels[1], d)), f, True)
