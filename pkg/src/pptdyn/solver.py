"""
Semidefinite programs over Hermitian blocks.

Programs are written against complex Hermitian variables and compiled to the real
standard form of `cvxopt.solvers.conelp`:

    minimize c'x  subject to  Gx + s = h,  Ax = b,  s ⪰ 0

Each Hermitian block is parameterized by d² real coordinates in an orthonormal basis;
PSD blocks enter the 's' cone through the real symmetric embedding
[[Re H, −Im H], [Im H, Re H]] and nonnegative scalars the 'l' cone.
"""

import logging
import time
from enum import Enum
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse
from cvxopt import matrix, solvers, spmatrix

from .config import settings
from .exceptions import ProgramError, SolverError
from .tensor import DimSpec

logger = logging.getLogger(__name__)

LinearMap = Callable[[np.ndarray], np.ndarray]


class BlockKind(str, Enum):
    HERMITIAN_PSD = "hermitian_psd"
    FREE_HERMITIAN = "free_hermitian"
    NONNEG_SCALAR = "nonneg_scalar"


class Sense(str, Enum):
    MIN = "min"
    MAX = "max"


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    MAX_ITER = "max_iter"


# ---------------------------------------------------------------------------
# Hermitian coordinates
# ---------------------------------------------------------------------------

def hermitian_basis(d: int) -> np.ndarray:
    """Orthonormal basis of d×d Hermitian matrices, shape (d², d, d).

    Order: E_ii, then (E_ij + E_ji)/√2 and (iE_ij − iE_ji)/√2 for i < j.
    """
    iu, ju = np.triu_indices(d, 1)
    m = len(iu)
    basis = np.zeros((d * d, d, d), dtype=complex)
    basis[np.arange(d), np.arange(d), np.arange(d)] = 1.0
    r = 1 / np.sqrt(2)
    k = d + np.arange(m)
    basis[k, iu, ju] = r
    basis[k, ju, iu] = r
    k = d + m + np.arange(m)
    basis[k, iu, ju] = 1j * r
    basis[k, ju, iu] = -1j * r
    return basis


def hermitian_coords(h: np.ndarray) -> np.ndarray:
    """Coordinates Tr[B_k H] of (batched) Hermitian matrices in hermitian_basis order."""
    d = h.shape[-1]
    iu, ju = np.triu_indices(d, 1)
    diag = np.real(np.diagonal(h, axis1=-2, axis2=-1))
    upper = h[..., iu, ju]
    return np.concatenate([diag, np.sqrt(2) * upper.real, np.sqrt(2) * upper.imag], axis=-1)


def hermitian_from_coords(x: np.ndarray, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    iu, ju = np.triu_indices(d, 1)
    m = len(iu)
    h = np.zeros((d, d), dtype=complex)
    h[np.arange(d), np.arange(d)] = x[:d]
    upper = (x[d:d + m] + 1j * x[d + m:d + 2 * m]) / np.sqrt(2)
    h[iu, ju] = upper
    h[ju, iu] = upper.conj()
    return h


def embed_matrix(h: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[Re H, −Im H], [Im H, Re H]] (batched)."""
    re, im = h.real, h.imag
    top = np.concatenate([re, -im], axis=-1)
    bottom = np.concatenate([im, re], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def extract_hermitian(s: np.ndarray) -> np.ndarray:
    """Inverse of embed_matrix, averaging the two copies."""
    d = s.shape[-1] // 2
    re = (s[..., :d, :d] + s[..., d:, d:]) / 2
    im = (s[..., d:, :d] - s[..., :d, d:]) / 2
    return re + 1j * im


# ---------------------------------------------------------------------------
# Program model
# ---------------------------------------------------------------------------

class Block:
    """A variable block of a conic program."""

    def __init__(self, name: str, kind: BlockKind, dim: int = 1, spec: Optional[DimSpec] = None):
        if kind is BlockKind.NONNEG_SCALAR:
            dim = 1
        if spec is not None and spec.total_dim != dim:
            raise ProgramError(f"block {name}: spec {spec} does not have dimension {dim}")
        if dim < 1:
            raise ProgramError(f"block {name} has dimension {dim}")
        self.name = name
        self.kind = BlockKind(kind)
        self.dim = dim
        self.spec = spec

    @property
    def size(self) -> int:
        """Number of real coordinates."""
        return self.dim * self.dim

    def __repr__(self) -> str:
        return f"Block({self.name}, {self.kind.value}, {self.dim})"


class Equality:
    """Σ_b terms[b](X_b) = target, with Hermitian-valued linear maps."""

    def __init__(self, name: str, terms: Mapping[str, LinearMap], target):
        target = np.atleast_2d(np.asarray(target, dtype=complex))
        if target.shape[0] != target.shape[1]:
            raise ProgramError(f"constraint {name}: target must be square, got {target.shape}")
        self.name = name
        self.terms = dict(terms)
        self.target = target

    @property
    def dim(self) -> int:
        return self.target.shape[0]


class ConicProgram:
    """Immutable description of an SDP: blocks, linear objective, affine equalities, sense."""

    def __init__(self, name: str, blocks: Sequence[Block], objective: Mapping[str, np.ndarray],
                 constraints: Sequence[Equality], sense: Union[Sense, str] = Sense.MIN,
                 constant: float = 0.0):
        self.name = name
        self.blocks = tuple(blocks)
        self.objective = {k: np.atleast_2d(np.asarray(v, dtype=complex)) for k, v in objective.items()}
        self.constraints = tuple(constraints)
        self.sense = Sense(sense)
        self.constant = float(constant)
        self._validate()

    def _validate(self) -> None:
        if not self.blocks:
            raise ProgramError(f"program {self.name} has no variables")
        names = [b.name for b in self.blocks]
        if len(set(names)) != len(names):
            raise ProgramError(f"program {self.name} has duplicate block names {names}")
        by_name = self.block_map
        for key, coeff in self.objective.items():
            if key not in by_name:
                raise ProgramError(f"objective references unknown block {key}")
            if coeff.shape != (by_name[key].dim, by_name[key].dim):
                raise ProgramError(f"objective coefficient for {key} has shape {coeff.shape}")
            if np.max(np.abs(coeff - coeff.conj().T), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(coeff))):
                raise ProgramError(f"objective coefficient for {key} is not Hermitian")
            self.objective[key] = (coeff + coeff.conj().T) / 2
        for eq in self.constraints:
            for key, fn in eq.terms.items():
                if key not in by_name:
                    raise ProgramError(f"constraint {eq.name} references unknown block {key}")
                block = by_name[key]
                probe = np.asarray(fn(np.zeros((1, block.dim, block.dim), dtype=complex)))
                if probe.shape[-2:] != eq.target.shape:
                    raise ProgramError(
                        f"constraint {eq.name}: term {key} maps to {probe.shape[-2:]}, "
                        f"target is {eq.target.shape}")

    @property
    def block_map(self) -> Dict[str, Block]:
        return {b.name: b for b in self.blocks}

    def sizes(self) -> Dict[str, int]:
        return {
            'blocks': len(self.blocks),
            'variables': sum(b.size for b in self.blocks),
            'equality_rows': sum(eq.dim * eq.dim for eq in self.constraints),
            'largest_block': max(b.dim for b in self.blocks),
        }

    def __repr__(self) -> str:
        return f"ConicProgram({self.name}, {self.sense.value}, {self.sizes()})"


class ProgramBuilder:
    """Incremental construction of a ConicProgram."""

    def __init__(self, name: str):
        self.name = name
        self._blocks: List[Block] = []
        self._objective: Dict[str, np.ndarray] = {}
        self._constraints: List[Equality] = []
        self._constant = 0.0

    def psd(self, name: str, spec: Union[DimSpec, int]) -> Block:
        return self._add(name, BlockKind.HERMITIAN_PSD, spec)

    def free(self, name: str, spec: Union[DimSpec, int]) -> Block:
        return self._add(name, BlockKind.FREE_HERMITIAN, spec)

    def nonneg(self, name: str) -> Block:
        return self._add(name, BlockKind.NONNEG_SCALAR, 1)

    def _add(self, name: str, kind: BlockKind, spec: Union[DimSpec, int]) -> Block:
        if isinstance(spec, DimSpec):
            block = Block(name, kind, spec.total_dim, spec)
        else:
            block = Block(name, kind, int(spec))
        self._blocks.append(block)
        return block

    def equal(self, name: str, terms: Mapping[str, LinearMap], target) -> None:
        self._constraints.append(Equality(name, terms, target))

    def objective(self, name: str, coeff) -> None:
        self._objective[name] = np.atleast_2d(np.asarray(coeff, dtype=complex))

    def constant(self, value: float) -> None:
        self._constant = float(value)

    def build(self, sense: Union[Sense, str]) -> ConicProgram:
        return ConicProgram(self.name, self._blocks, self._objective, self._constraints,
                            sense, self._constant)


def scaled(factor: float, fn: Optional[LinearMap] = None) -> LinearMap:
    """X ↦ factor·fn(X) (fn defaults to the identity map)."""
    if fn is None:
        return lambda x: factor * x
    return lambda x: factor * fn(x)


def scalar_times(matrix_value: np.ndarray) -> LinearMap:
    """t ↦ t·M for a scalar (1×1) block."""
    mv = np.asarray(matrix_value, dtype=complex)
    return lambda x: x[..., 0:1, 0:1] * mv


def trace_map(x: np.ndarray) -> np.ndarray:
    return np.trace(x, axis1=-2, axis2=-1)[..., None, None]


# ---------------------------------------------------------------------------
# Standard form
# ---------------------------------------------------------------------------

class StandardForm:
    """Real conelp data for a ConicProgram, with the block layout needed to map back."""

    def __init__(self, program: ConicProgram):
        self.program = program
        self.offsets: Dict[str, int] = {}
        n = 0
        for b in program.blocks:
            self.offsets[b.name] = n
            n += b.size
        self.n = n
        self._bases = {d: hermitian_basis(d) for d in {b.dim for b in program.blocks}}
        self._build_objective()
        self._build_cones()
        self._build_equalities()

    def basis(self, d: int) -> np.ndarray:
        return self._bases[d]

    def _build_objective(self) -> None:
        c = np.zeros(self.n)
        for name, coeff in self.program.objective.items():
            o = self.offsets[name]
            c[o:o + coeff.shape[0] ** 2] = hermitian_coords(coeff)
        self.c_raw = c
        self.c = -c if self.program.sense is Sense.MAX else c

    def _build_cones(self) -> None:
        rows, cols, vals = [], [], []
        linear = [b for b in self.program.blocks if b.kind is BlockKind.NONNEG_SCALAR]
        for i, b in enumerate(linear):
            rows.append(np.array([i]))
            cols.append(np.array([self.offsets[b.name]]))
            vals.append(np.array([-1.0]))
        row = len(linear)
        s_dims = []
        self.cone_rows: Dict[str, Tuple[int, int]] = {}
        for b in self.program.blocks:
            if b.kind is not BlockKind.HERMITIAN_PSD:
                continue
            emb = embed_matrix(self.basis(b.dim)).reshape(b.size, -1)
            k, e = np.nonzero(emb)
            rows.append(row + e)
            cols.append(self.offsets[b.name] + k)
            vals.append(-emb[k, e])
            self.cone_rows[b.name] = (row, 2 * b.dim)
            row += (2 * b.dim) ** 2
            s_dims.append(2 * b.dim)
        if row == 0:
            raise ProgramError(f"program {self.program.name} has no conic constraints")
        self.dims = {'l': len(linear), 'q': [], 's': s_dims}
        self.G = scipy.sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(row, self.n))
        self.h = np.zeros(row)

    def _build_equalities(self) -> None:
        blocks = self.program.block_map
        rows_total = sum(eq.dim * eq.dim for eq in self.program.constraints)
        a = np.zeros((rows_total, self.n))
        b = np.zeros(rows_total)
        self.eq_rows: Dict[str, Tuple[int, int]] = {}
        r = 0
        for eq in self.program.constraints:
            k = eq.dim * eq.dim
            self.eq_rows[eq.name] = (r, eq.dim)
            b[r:r + k] = hermitian_coords(eq.target)
            for name, fn in eq.terms.items():
                block = blocks[name]
                out = np.asarray(fn(self.basis(block.dim)), dtype=complex)
                skew = np.max(np.abs(out - np.swapaxes(out.conj(), -1, -2)), initial=0.0)
                if skew > 1e-10 * max(1.0, np.max(np.abs(out), initial=0.0)):
                    raise ProgramError(f"constraint {eq.name}: term {name} is not Hermitian-preserving")
                o = self.offsets[name]
                a[r:r + k, o:o + block.size] += hermitian_coords(out).T
            r += k
        self.A_full = a
        self.b_full = b
        self._reduce_rows()
        self._check_free_columns()

    def _check_free_columns(self) -> None:
        # free coordinates only appear in A; a null direction there makes the KKT system singular
        cols = [np.arange(self.offsets[blk.name], self.offsets[blk.name] + blk.size)
                for blk in self.program.blocks if blk.kind is BlockKind.FREE_HERMITIAN]
        self.free_null_dim = 0
        if not cols:
            return
        idx = np.concatenate(cols)
        rank = np.linalg.matrix_rank(self.A_full[:, idx]) if self.A_full.shape[0] else 0
        self.free_null_dim = len(idx) - int(rank)
        if self.free_null_dim:
            logger.warning(f"{self.program.name}: free blocks have {self.free_null_dim} "
                           f"unconstrained directions; expect the solver to stall")

    def _reduce_rows(self) -> None:
        a, b = self.A_full, self.b_full
        self.inconsistent = False
        if a.shape[0] == 0:
            self.keep = np.arange(0)
            return
        r, piv = scipy.linalg.qr(a.T, mode='r', pivoting=True)
        diag = np.abs(np.diag(r))
        tol = 1e-9 * max(diag[0], 1.0) if diag.size else 0.0
        rank = int(np.sum(diag > tol))
        self.keep = np.sort(piv[:rank])
        if rank < a.shape[0]:
            logger.debug(f"{self.program.name}: dropped {a.shape[0] - rank} dependent equality rows")
            x, *_ = np.linalg.lstsq(a[self.keep], b[self.keep], rcond=None)
            resid = float(np.max(np.abs(a @ x - b)))
            if resid > 1e-8 * (1.0 + float(np.max(np.abs(b)))):
                logger.info(f"{self.program.name}: equality constraints are inconsistent ({resid:.2e})")
                self.inconsistent = True

    @property
    def A(self) -> np.ndarray:
        return self.A_full[self.keep]

    @property
    def b(self) -> np.ndarray:
        return self.b_full[self.keep]

    def block_value(self, x: np.ndarray, block: Block) -> np.ndarray:
        o = self.offsets[block.name]
        if block.kind is BlockKind.NONNEG_SCALAR:
            return np.array([[x[o]]], dtype=complex)
        return hermitian_from_coords(x[o:o + block.size], block.dim)

    def residual(self, x: np.ndarray) -> float:
        if self.A_full.shape[0] == 0:
            return 0.0
        err = float(np.max(np.abs(self.A_full @ x - self.b_full)))
        return err / (1.0 + float(np.max(np.abs(self.b_full))))


def embed_hermitian(p: ConicProgram) -> StandardForm:
    """Compile a program to its real symmetric standard form."""
    return StandardForm(p)


def dump_triplets(p: Union[ConicProgram, StandardForm]) -> str:
    """Text dump of the standard form in sparse-triplet format.

    Sections: header lines (name, sense, n, cones), then `c`, `G`, `h`, `A`, `b`, each
    followed by `row col value` (or `index value`) lines listing nonzeros, 0-based.
    """
    sf = p if isinstance(p, StandardForm) else StandardForm(p)
    lines = [
        "# pptdyn conic program",
        f"name {sf.program.name}",
        f"sense {sf.program.sense.value}",
        f"n {sf.n}",
        f"cones l={sf.dims['l']} s={sf.dims['s']}",
    ]

    def vector(tag: str, v: np.ndarray) -> None:
        idx = np.nonzero(v)[0]
        lines.append(f"{tag} {len(v)} nnz={len(idx)}")
        lines.extend(f"{i} {v[i]:.17g}" for i in idx)

    def sparse(tag: str, m) -> None:
        m = scipy.sparse.coo_matrix(m)
        lines.append(f"{tag} {m.shape[0]} {m.shape[1]} nnz={m.nnz}")
        lines.extend(f"{i} {j} {v:.17g}" for i, j, v in zip(m.row, m.col, m.data))

    vector("c", sf.c)
    sparse("G", sf.G)
    vector("h", sf.h)
    sparse("A", sf.A)
    vector("b", sf.b)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Solving
# ---------------------------------------------------------------------------

class Solution:
    """Result of a solve. Block values are complex Hermitian arrays keyed by block name."""

    def __init__(self, program: ConicProgram, status: SolveStatus, primal_value: float,
                 dual_value: float, values: Dict[str, np.ndarray], duals: Dict[str, np.ndarray],
                 iterations: int, residual: float, solver_status: str,
                 certificate: Optional[Dict[str, np.ndarray]] = None, wall_time: float = 0.0):
        self.program = program
        self.status = status
        self.primal_value = primal_value
        self.dual_value = dual_value
        self.values = values
        self.duals = duals
        self.iterations = iterations
        self.residual = residual
        self.solver_status = solver_status
        self.certificate = certificate
        self.wall_time = wall_time

    @property
    def gap(self) -> float:
        if not (np.isfinite(self.primal_value) and np.isfinite(self.dual_value)):
            return float('inf')
        return abs(self.primal_value - self.dual_value) / max(1.0, abs(self.primal_value))

    @property
    def optimal(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    @property
    def value(self) -> float:
        return self.primal_value

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def __repr__(self) -> str:
        return (f"Solution({self.program.name}, {self.status.value}, primal={self.primal_value:.9g}, "
                f"dual={self.dual_value:.9g}, gap={self.gap:.2e}, iters={self.iterations})")


_STATUS = {
    'optimal': SolveStatus.OPTIMAL,
    'primal infeasible': SolveStatus.INFEASIBLE,
    'dual infeasible': SolveStatus.UNBOUNDED,
    'unknown': SolveStatus.MAX_ITER,
}


def _to_cvxopt_sparse(m, shape: Tuple[int, int]):
    m = scipy.sparse.coo_matrix(m)
    return spmatrix(m.data.tolist(), m.row.tolist(), m.col.tolist(), (int(shape[0]), int(shape[1])))


def solve(p: ConicProgram, gap_tol: Optional[float] = None, feas_tol: Optional[float] = None,
          max_iter: Optional[int] = None) -> Solution:
    """Solve a conic program with cvxopt's primal-dual interior-point method.

    The reported status is recomputed from the returned point: `optimal` requires
    gap ≤ gap_tol and equality residual ≤ feas_tol·(1 + ‖target‖∞).
    """
    gap_tol = settings.gap_tol if gap_tol is None else gap_tol
    feas_tol = settings.feas_tol if feas_tol is None else feas_tol
    max_iter = max_iter or settings.max_iter
    start = time.perf_counter()
    sf = StandardForm(p)
    sizes = p.sizes()
    logger.debug(f"Solving {p.name}: {sizes}, cones s={sf.dims['s']} l={sf.dims['l']}, "
                 f"{len(sf.keep)} independent equalities")

    if sf.inconsistent:
        return Solution(p, SolveStatus.INFEASIBLE, float('nan'), float('nan'), {}, {}, 0,
                        float('inf'), 'inconsistent equalities',
                        {'equality_rows': sf.A_full, 'targets': sf.b_full},
                        time.perf_counter() - start)

    options = {
        'show_progress': bool(settings.debug),
        'maxiters': int(max_iter),
        'abstol': gap_tol / 10,
        'reltol': gap_tol / 10,
        'feastol': feas_tol / 10,
    }
    c = matrix(np.ascontiguousarray(sf.c, dtype=float))
    g = _to_cvxopt_sparse(sf.G, sf.G.shape)
    h = matrix(np.ascontiguousarray(sf.h, dtype=float))
    if len(sf.keep):
        a = _to_cvxopt_sparse(sf.A, sf.A.shape)
        b = matrix(np.ascontiguousarray(sf.b, dtype=float))
    else:
        a, b = None, None

    try:
        raw = solvers.conelp(c, g, h, sf.dims, a, b, options=options)
    except (ValueError, ArithmeticError) as e:
        logger.error(f"conelp rejected {p.name}: {e}")
        raise ProgramError(f"solver rejected program {p.name}: {e}") from e

    solver_status = raw['status']
    status = _STATUS.get(solver_status, SolveStatus.MAX_ITER)
    iterations = int(raw.get('iterations', 0) or 0)
    elapsed = time.perf_counter() - start

    if status in (SolveStatus.INFEASIBLE, SolveStatus.UNBOUNDED):
        cert = {key: np.array(raw[key]).reshape(-1) for key in ('x', 'y', 'z', 's')
                if raw.get(key) is not None}
        logger.info(f"{p.name}: solver reports {solver_status} after {iterations} iterations")
        return Solution(p, status, float('nan'), float('nan'), {}, {}, iterations,
                        float('inf'), solver_status, cert, elapsed)

    x = np.array(raw['x']).reshape(-1)
    sign = -1.0 if p.sense is Sense.MAX else 1.0
    primal_value = float(sf.c_raw @ x) + p.constant
    dual_obj = raw.get('dual objective')
    dual_value = sign * float(dual_obj) + p.constant if dual_obj is not None else float('nan')
    residual = sf.residual(x)

    values = {blk.name: sf.block_value(x, blk) for blk in p.blocks}
    duals: Dict[str, np.ndarray] = {}
    if raw.get('y') is not None and len(sf.keep):
        y_full = np.zeros(sf.A_full.shape[0])
        y_full[sf.keep] = np.array(raw['y']).reshape(-1)
        for name, (r, d) in sf.eq_rows.items():
            duals[name] = hermitian_from_coords(y_full[r:r + d * d], d)

    solution = Solution(p, status, primal_value, dual_value, values, duals, iterations,
                        residual, solver_status, None, elapsed)
    certified = solution.gap <= gap_tol and residual <= feas_tol
    if status is SolveStatus.OPTIMAL and not certified:
        logger.warning(f"{p.name}: solver claims optimal but gap={solution.gap:.2e}, "
                       f"residual={residual:.2e}")
        solution.status = SolveStatus.MAX_ITER
    elif status is SolveStatus.MAX_ITER and certified:
        logger.debug(f"{p.name}: accepting stalled iterate with gap={solution.gap:.2e}")
        solution.status = SolveStatus.OPTIMAL

    weak = (primal_value - dual_value) if p.sense is Sense.MIN else (dual_value - primal_value)
    if weak < -gap_tol * max(1.0, abs(primal_value)):
        logger.warning(f"{p.name}: weak duality off by {-weak:.2e}")

    logger.debug(f"{p.name}: {solution}")
    return solution


# ---------------------------------------------------------------------------
# Feasibility
# ---------------------------------------------------------------------------

SHIFT = "__shift"
FLOOR = "__floor"


class FeasibilityCertificate:
    """Outcome of a phase-I solve.

    `margin` is the smallest uniform shift t* with every conic block X' − t*·I feasible;
    `point` holds the shifted blocks when feasible, `duals` the phase-I multipliers otherwise.
    """

    def __init__(self, margin: float, point: Dict[str, np.ndarray], duals: Dict[str, np.ndarray],
                 solution: Solution):
        self.margin = margin
        self.point = point
        self.duals = duals
        self.solution = solution

    def __repr__(self) -> str:
        return f"FeasibilityCertificate(margin={self.margin:.3e}, status={self.solution.status.value})"


def phase_one(p: ConicProgram) -> ConicProgram:
    """min t s.t. the constraints of p hold with X = X' − tI for conic blocks, t ≥ −1."""
    blocks = p.block_map
    conic = {b.name for b in p.blocks if b.kind is not BlockKind.FREE_HERMITIAN}
    constraints: List[Equality] = []
    for eq in p.constraints:
        shift = np.zeros(eq.target.shape, dtype=complex)
        for name, fn in eq.terms.items():
            if name in conic:
                eye = np.eye(blocks[name].dim, dtype=complex)[None]
                shift = shift - np.asarray(fn(eye))[0]
        terms = dict(eq.terms)
        if np.any(shift):
            terms[SHIFT] = scalar_times(shift)
        constraints.append(Equality(eq.name, terms, eq.target))
    constraints.append(Equality(FLOOR, {FLOOR: lambda x: x, SHIFT: lambda x: -x}, [[1.0]]))
    new_blocks = list(p.blocks) + [Block(SHIFT, BlockKind.FREE_HERMITIAN, 1),
                                   Block(FLOOR, BlockKind.NONNEG_SCALAR, 1)]
    return ConicProgram(f"{p.name}/phase1", new_blocks, {SHIFT: [[1.0]]}, constraints, Sense.MIN)


def feasibility(p: ConicProgram, margin: Optional[float] = None,
                gap_tol: Optional[float] = None, feas_tol: Optional[float] = None,
                max_iter: Optional[int] = None) -> Tuple[bool, FeasibilityCertificate]:
    """Decide feasibility of a zero-objective program through its phase-I program.

    Returns:
        (feasible, certificate): feasible iff the optimal shift t* ≤ margin

    Raises:
        SolverError: if the phase-I solve stalls, with the triplet dump attached
    """
    if any(np.any(c) for c in p.objective.values()):
        raise ProgramError(f"feasibility expects a zero objective, {p.name} has one")
    margin = settings.feasibility_margin if margin is None else margin
    phase1 = phase_one(p)
    sol = solve(phase1, gap_tol=gap_tol, feas_tol=feas_tol, max_iter=max_iter)
    if sol.status is SolveStatus.INFEASIBLE:
        return False, FeasibilityCertificate(float('inf'), {}, {}, sol)
    if sol.status is not SolveStatus.OPTIMAL:
        t = float(sol.values[SHIFT][0, 0].real) if SHIFT in sol.values else float('nan')
        logger.error(f"{p.name}: phase-I ended with {sol.status.value}, shift {t:.3e}")
        raise SolverError(f"{phase1.name} ended with status {sol.status.value} ({sol.solver_status})",
                          sol, dump_triplets(phase1))
    t = float(sol.values[SHIFT][0, 0].real)
    feasible = t <= margin
    point = {}
    if feasible:
        for b in p.blocks:
            value = sol.values[b.name]
            if b.kind is not BlockKind.FREE_HERMITIAN:
                value = value - t * np.eye(b.dim)
            point[b.name] = value
    logger.debug(f"{p.name}: phase-I shift {t:.3e} -> {'feasible' if feasible else 'infeasible'}")
    return feasible, FeasibilityCertificate(t, point, {} if feasible else sol.duals, sol)
