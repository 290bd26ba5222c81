"""
Command-line front end.

Choi objects travel as JSON documents (see docs/choi-schema.md); every command prints a
Report. Exit codes: 0 success, 2 validation failure, 3 solver non-optimal or flagged,
4 bound violation, 64 usage error.
"""

import argparse
import hashlib
import json
import logging
import sys
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import measures
from . import witness_scenarios as ws
from .config import apply_settings, load_tolerance_profile, settings
from .exceptions import (
    BoundViolation,
    ConfigurationError,
    DocumentError,
    PptdynError,
    SolverError,
)
from .quantum import (
    CHANNEL_LABELS,
    SUPERCHANNEL_LABELS,
    BipartiteChannel,
    Comb,
    Povm,
    Role,
    Superchannel,
    is_channel,
    is_comb_valid,
    is_ppt_channel,
    is_ppt_superchannel,
    is_superchannel_valid,
    povm_channel,
    random_channel,
    random_ppt_channel,
    random_ppt_comb,
    random_ppt_superchannel,
    random_state,
    state_preparation,
    swap_channel,
)
from .quantum.base import comb_labels
from .tensor import DimSpec, LabeledMatrix

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_SOLVER = 3
EXIT_BOUND = 4
EXIT_USAGE = 64

ChoiObject = Union[BipartiteChannel, Superchannel, Comb, Povm]


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------

class Factor(BaseModel):
    label: str
    dim: int = Field(ge=1)


class MatrixPayload(BaseModel):
    """Row-major real and imaginary parts."""

    re: List[List[float]]
    im: List[List[float]]

    def to_array(self) -> np.ndarray:
        return np.asarray(self.re, dtype=float) + 1j * np.asarray(self.im, dtype=float)

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "MatrixPayload":
        arr = np.asarray(arr, dtype=complex)
        return cls(re=arr.real.tolist(), im=arr.imag.tolist())


class ChoiDocument(BaseModel):
    model_config = ConfigDict(extra='forbid')

    schema_version: int = SCHEMA_VERSION
    role: Role
    dims: List[Factor]
    matrix: Optional[MatrixPayload] = None
    elements: Optional[List[MatrixPayload]] = None
    slots: Optional[int] = Field(default=None, ge=1)

    @property
    def spec(self) -> DimSpec:
        return DimSpec.of(*((f.label, f.dim) for f in self.dims))


def _check_payload(payload: MatrixPayload, n: int, path: str, hermitian_tol: float = 1e-9) -> List[Tuple[str, str]]:
    errors = []
    re, im = np.asarray(payload.re, dtype=float), np.asarray(payload.im, dtype=float)
    if re.ndim != 2 or re.shape[0] != re.shape[1]:
        return [(f"{path}.re", f"must be a square 2-D array, got shape {re.shape}")]
    if im.shape != re.shape:
        return [(f"{path}.im", f"shape {im.shape} differs from re {re.shape}")]
    if re.shape[0] != n:
        return [(path, f"size {re.shape[0]} does not match the dims product {n}")]
    arr = re + 1j * im
    scale = max(float(np.max(np.abs(arr))), 1.0)
    if float(np.max(np.abs(arr - arr.conj().T))) > hermitian_tol * scale:
        errors.append((path, "matrix is not Hermitian within 1e-9"))
    return errors


def _check_document(doc: ChoiDocument) -> None:
    errors: List[Tuple[str, str]] = []
    try:
        n = doc.spec.total_dim
    except ValidationError as e:
        raise DocumentError([("dims", err['msg']) for err in e.errors()]) from e
    if doc.role is Role.POVM:
        if not doc.elements:
            errors.append(("elements", "a povm document needs a non-empty elements list"))
        for i, element in enumerate(doc.elements or []):
            errors += _check_payload(element, n, f"elements.{i}")
    elif doc.matrix is None:
        errors.append(("matrix", f"a {doc.role.value} document needs a matrix"))
    else:
        errors += _check_payload(doc.matrix, n, "matrix")
    if doc.role is Role.COMB and doc.slots is None:
        errors.append(("slots", "a comb document needs a slot count"))
    if errors:
        raise DocumentError(errors)


def parse_choi(data: Union[bytes, str]) -> ChoiDocument:
    """Validate a JSON Choi document.

    Raises:
        DocumentError: with (path, reason) pairs for schema, size or Hermiticity failures
    """
    try:
        doc = ChoiDocument.model_validate_json(data)
    except ValidationError as e:
        raise DocumentError([(".".join(str(p) for p in err['loc']) or "<root>", err['msg'])
                             for err in e.errors()]) from e
    _check_document(doc)
    return doc


def serialize_choi(doc: ChoiDocument) -> str:
    return doc.model_dump_json(indent=2, exclude_none=True)


def to_object(doc: ChoiDocument) -> ChoiObject:
    """Interpret a validated document according to its role."""
    spec = doc.spec
    if doc.role is Role.POVM:
        if len(spec.factors) != 2:
            raise DocumentError([("dims", "a povm document needs exactly two factors")])
        povm_spec = DimSpec.of(*zip(CHANNEL_LABELS[:2], spec.dims))
        return Povm([LabeledMatrix(povm_spec, e.to_array(), hermitian=True) for e in doc.elements])
    entries = doc.matrix.to_array()
    if doc.role is Role.STATE:
        if len(spec.factors) != 2:
            raise DocumentError([("dims", "a state document needs exactly two factors")])
        return state_preparation(LabeledMatrix(spec, entries, hermitian=True))
    if doc.role is Role.CHANNEL:
        expected: Sequence[str] = CHANNEL_LABELS
    elif doc.role is Role.SUPERCHANNEL:
        expected = SUPERCHANNEL_LABELS
    else:
        expected = comb_labels(doc.slots)
    if spec.labels != tuple(expected):
        raise DocumentError([("dims", f"{doc.role.value} labels must be {list(expected)}, got {list(spec.labels)}")])
    choi = LabeledMatrix(spec, entries, hermitian=True)
    if doc.role is Role.CHANNEL:
        return BipartiteChannel(choi)
    if doc.role is Role.SUPERCHANNEL:
        return Superchannel(choi)
    return Comb(choi, doc.slots)


def from_object(obj: ChoiObject) -> ChoiDocument:
    if isinstance(obj, Povm):
        return ChoiDocument(role=Role.POVM,
                            dims=[Factor(label=lb, dim=d) for lb, d in obj.spec.factors],
                            elements=[MatrixPayload.from_array(e.entries) for e in obj.elements])
    dims = [Factor(label=lb, dim=d) for lb, d in obj.spec.factors]
    slots = obj.slot_count if isinstance(obj, Comb) else None
    return ChoiDocument(role=obj.role, dims=dims, matrix=MatrixPayload.from_array(obj.choi.entries),
                        slots=slots)


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

class ResultEntry(BaseModel):
    name: str
    value: Optional[Union[float, bool]] = None
    status: str = "ok"
    gap: Optional[float] = None
    residual: Optional[float] = None
    flagged: bool = False
    notes: List[str] = Field(default_factory=list)
    details: Dict[str, Any] = Field(default_factory=dict)


class Report(BaseModel):
    command: List[str]
    inputs_digest: Dict[str, str] = Field(default_factory=dict)
    results: List[ResultEntry] = Field(default_factory=list)
    timings: Optional[Dict[str, float]] = None
    version: str
    seed: Optional[int] = None
    exit_code: int = EXIT_OK
    output: str = Field(default="json", exclude=True)


def _round(value: Any, digits: int) -> Any:
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float):
        if not np.isfinite(value):
            return str(value)
        return float(f"{value:.{digits}g}")
    if isinstance(value, (int, str)):
        return value
    if isinstance(value, np.generic):
        return _round(value.item(), digits)
    if isinstance(value, dict):
        return {str(k): _round(v, digits) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_round(v, digits) for v in value]
    if isinstance(value, BaseModel):
        return _round(value.model_dump(), digits)
    return str(value)


def _entry(result: measures.MeasureResult) -> ResultEntry:
    return ResultEntry(name=result.name, value=result.value, status=result.status, gap=result.gap,
                       residual=result.residual, flagged=result.flagged, notes=result.notes,
                       details=result.details)


class Context:
    """Per-invocation state: loaded inputs, digests and timings."""

    def __init__(self, args: argparse.Namespace, argv: Sequence[str]):
        self.args = args
        self.report = Report(command=list(argv), version=settings.app_version,
                             seed=getattr(args, "seed", None), output=args.output)
        self.timings: Dict[str, float] = {}

    def load(self, path: str) -> ChoiObject:
        raw = Path(path).read_bytes()
        self.report.inputs_digest[path] = hashlib.sha256(raw).hexdigest()
        return to_object(parse_choi(raw))

    def load_channel(self, path: str) -> BipartiteChannel:
        obj = self.load(path)
        if isinstance(obj, Povm):
            return povm_channel(obj)
        if not isinstance(obj, BipartiteChannel):
            raise DocumentError([("role", f"{path} must hold a channel or state, got {obj.role.value}")])
        return obj

    def timed(self, name: str, fn: Callable, *args, **kwargs):
        start = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            self.timings[name] = time.perf_counter() - start

    def add(self, entry: ResultEntry) -> None:
        self.report.results.append(entry)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_check(ctx: Context) -> int:
    obj = ctx.load(ctx.args.file)
    what = ctx.args.what
    if what == "ppt-channel":
        if not isinstance(obj, (BipartiteChannel, Povm)):
            raise DocumentError([("role", "ppt-channel needs a channel, state or povm")])
        channel = povm_channel(obj) if isinstance(obj, Povm) else obj
        passed = is_channel(channel) and is_ppt_channel(channel)
    elif what == "ppt-superchannel":
        if not isinstance(obj, Superchannel):
            raise DocumentError([("role", "ppt-superchannel needs a superchannel")])
        passed = is_superchannel_valid(obj) and is_ppt_superchannel(obj)
    else:
        if isinstance(obj, Superchannel):
            passed = is_superchannel_valid(obj)
        elif isinstance(obj, Comb):
            passed = is_comb_valid(obj)
        elif isinstance(obj, Povm):
            passed = True
        else:
            passed = is_channel(obj)
    ctx.add(ResultEntry(name=what, value=bool(passed), status="pass" if passed else "fail"))
    return EXIT_OK if passed else EXIT_INVALID


def cmd_measure(ctx: Context) -> int:
    n = ctx.load_channel(ctx.args.file)
    which = ctx.args.which
    with_dual = not ctx.args.no_dual
    if which in ("negativity", "ln"):
        norm = ctx.timed("gamma_diamond_norm", measures.gamma_diamond_norm, n)
        result = measures.negativity(n, norm) if which == "negativity" else measures.log_negativity(n, norm)
        results = [result]
    elif which == "lnmax":
        results = [ctx.timed("ln_max", measures.ln_max, n, with_dual)]
    else:
        if not ctx.args.probe:
            raise DocumentError([("--probe", "measure fp needs a probe channel")])
        p = ctx.load_channel(ctx.args.probe)
        results = [ctx.timed("g_p", measures.g_p, n, p)]
    for r in results:
        ctx.add(_entry(r))
    return EXIT_SOLVER if any(r.flagged for r in results) else EXIT_OK


def cmd_convert_distance(ctx: Context) -> int:
    n = ctx.load_channel(ctx.args.source)
    m = ctx.load_channel(ctx.args.target)
    result = ctx.timed("conversion_distance", measures.conversion_distance_ppt, n, m,
                       not ctx.args.no_dual)
    ctx.add(_entry(result))
    return EXIT_SOLVER if result.flagged else EXIT_OK


def cmd_exact_cost(ctx: Context) -> int:
    n = ctx.load_channel(ctx.args.source)
    if ctx.args.bounds:
        report = ctx.timed("cost_bounds", measures.cost_bounds_check, n)
        ctx.add(ResultEntry(name="cost_bounds", value=report.holds, status="pass",
                            details=report.model_dump()))
        return EXIT_OK
    result = ctx.timed("exact_cost", measures.exact_cost_single_shot, n, ctx.args.m_max,
                       ctx.args.relaxed)
    ctx.add(_entry(result))
    if result.status == "exceeds_budget":
        return EXIT_OK
    return EXIT_SOLVER if result.flagged else EXIT_OK


def cmd_witness(ctx: Context) -> int:
    if ctx.args.action == "assemble":
        w = ws.random_witness(ctx.args.source_dims, ctx.args.target_dims, ctx.args.seed)
        details: Dict[str, Any] = {'proper': w.proper, 'min_eigenvalue': w.min_eigenvalue}
        if ctx.args.probe_seed is not None:
            theta = random_ppt_superchannel(ctx.args.source_dims, ctx.args.target_dims,
                                            ctx.args.probe_seed)
            details['pairings'] = ws.component_pairings(w, theta)
        ctx.add(ResultEntry(name="witness_assemble", value=w.proper, details=details))
        if ctx.args.validate:
            min_value, ok = ctx.timed("witness_validate", ws.witness_validate, w)
            ctx.add(ResultEntry(name="witness_validate", value=min_value,
                                status="witness" if ok else "not_witness"))
        return EXIT_OK
    obj = ctx.load(ctx.args.file)
    if not isinstance(obj, Superchannel):
        raise DocumentError([("role", "a witness document uses the superchannel role")])
    min_value, ok = ctx.timed("witness_validate", ws.witness_validate, obj.choi)
    ctx.add(ResultEntry(name="witness_validate", value=min_value,
                        status="witness" if ok else "not_witness"))
    return EXIT_OK if ok else EXIT_INVALID


def cmd_demo(ctx: Context) -> int:
    which = ctx.args.which
    if which == "bound-povm":
        _, report = ctx.timed("bound_povm", ws.bound_povm_channel, ws.tiles_state())
        ctx.add(ResultEntry(name="bound_povm", value=report.is_ppt_channel, details=report.model_dump()))
        return EXIT_OK
    if which == "swap":
        n = swap_channel(2)
        norm = ctx.timed("gamma_diamond_norm", measures.gamma_diamond_norm, n)
        ln = measures.log_negativity(n, norm)
        lnm = ctx.timed("ln_max", measures.ln_max, n)
        ctx.add(_entry(ln))
        ctx.add(_entry(lnm))
        return EXIT_SOLVER if lnm.flagged else EXIT_OK

    if ctx.args.seed is None:
        raise DocumentError([("--seed", "demo no-go needs a seed")])
    rng = np.random.default_rng(ctx.args.seed)
    slot = tuple(ctx.args.slot_dims)
    comb = random_ppt_comb([slot] * ctx.args.slots, rng)
    inputs = [random_ppt_channel(slot, rng) for _ in range(ctx.args.slots)]
    report = ctx.timed("no_go", ws.distillation_no_go, comb, inputs)
    status = "violation" if report.violation else (
        "precondition_failed" if report.precondition_failures else "no violation")
    ctx.add(ResultEntry(name="no_go", value=report.violation, status=status, details=report.model_dump()))
    if report.precondition_failures:
        return EXIT_INVALID
    return EXIT_BOUND if report.violation else EXIT_OK


def cmd_random(ctx: Context) -> int:
    dims = tuple(ctx.args.dims)
    if ctx.args.kind == "state":
        # output dims (|A1|, |B1|) of the preparation
        rho = random_state(dims[2], dims[3], ctx.args.seed)
        doc = ChoiDocument(role=Role.STATE, dims=[Factor(label=lb, dim=d) for lb, d in rho.spec.factors],
                           matrix=MatrixPayload.from_array(rho.entries))
    else:
        if ctx.args.kind == "channel":
            obj: ChoiObject = random_channel(dims, ctx.args.seed)
        elif ctx.args.kind == "ppt-channel":
            obj = random_ppt_channel(dims, ctx.args.seed)
        else:
            target = tuple(ctx.args.target_dims) if ctx.args.target_dims else None
            obj = random_ppt_superchannel(dims, target, ctx.args.seed)
        doc = from_object(obj)
    text = serialize_choi(doc)
    if ctx.args.out:
        Path(ctx.args.out).write_text(text)
        ctx.add(ResultEntry(name=f"random_{ctx.args.kind}", status="written", details={'path': ctx.args.out}))
    else:
        ctx.add(ResultEntry(name=f"random_{ctx.args.kind}", status="generated",
                            details={'document': json.loads(text)}))
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class UsageError(Exception):
    pass


class Parser(argparse.ArgumentParser):
    """ArgumentParser that raises instead of exiting, so usage errors map to exit 64."""

    def error(self, message: str):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _dims(n: int):
    return {'nargs': n, 'type': int, 'metavar': 'D'}


def build_parser() -> Parser:
    parser = Parser(prog="pptdyn", description="PPT resource theory of bipartite channels")
    parser.add_argument("--output", choices=("json", "text"), default="json")
    parser.add_argument("--settings", type=Path, help="YAML tolerance profile")
    parser.add_argument("--timings", action="store_true", help="include wall times in the report")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=Parser)
    sub.required = True

    p = sub.add_parser("check", help="validity and PPT predicates")
    p.add_argument("what", choices=("ppt-channel", "ppt-superchannel", "valid"))
    p.add_argument("file")
    p.set_defaults(handler=cmd_check)

    p = sub.add_parser("measure", help="negativity, log-negativity, LN_max or f_P/G_P")
    p.add_argument("which", choices=("negativity", "ln", "lnmax", "fp"))
    p.add_argument("file")
    p.add_argument("--probe", help="probe channel for fp")
    p.add_argument("--no-dual", action="store_true")
    p.set_defaults(handler=cmd_measure)

    p = sub.add_parser("convert-distance", help="PPT conversion distance between channels")
    p.add_argument("source")
    p.add_argument("target")
    p.add_argument("--no-dual", action="store_true")
    p.set_defaults(handler=cmd_convert_distance)

    p = sub.add_parser("exact-cost", help="single-shot exact PPT entanglement cost")
    p.add_argument("source")
    p.add_argument("--m-max", type=int, default=None)
    p.add_argument("--relaxed", action="store_true")
    p.add_argument("--bounds", action="store_true", help="check the LN_max sandwich")
    p.set_defaults(handler=cmd_exact_cost)

    p = sub.add_parser("witness", help="NPT witnesses against the PPT-superchannel cone")
    wsub = p.add_subparsers(dest="action", parser_class=Parser)
    wsub.required = True
    pa = wsub.add_parser("assemble")
    pa.add_argument("--source-dims", required=True, **_dims(4))
    pa.add_argument("--target-dims", required=True, **_dims(4))
    pa.add_argument("--seed", type=int, required=True)
    pa.add_argument("--probe-seed", type=int, default=None)
    pa.add_argument("--validate", action="store_true")
    pa.set_defaults(handler=cmd_witness)
    pv = wsub.add_parser("validate")
    pv.add_argument("file")
    pv.set_defaults(handler=cmd_witness)

    p = sub.add_parser("demo", help="scenario demonstrations")
    p.add_argument("which", choices=("bound-povm", "no-go", "swap"))
    p.add_argument("--slots", type=int, default=2)
    p.add_argument("--slot-dims", default=[2, 2, 2, 2], **_dims(4))
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(handler=cmd_demo)

    p = sub.add_parser("random", help="seeded random instances as Choi documents")
    p.add_argument("kind", choices=("channel", "ppt-channel", "ppt-superchannel", "state"))
    p.add_argument("--dims", default=[1, 1, 2, 2], **_dims(4))
    p.add_argument("--target-dims", default=None, **_dims(4))
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_random)
    return parser


def render(report: Report, output: str) -> str:
    payload = _round(report.model_dump(exclude_none=True), settings.report_digits)
    if output == "json":
        return json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False)
    lines = [f"pptdyn {report.version}: {' '.join(report.command)}"]
    for entry in payload['results']:
        flag = " [flagged]" if entry.get('flagged') else ""
        lines.append(f"{entry['name']}: {entry.get('value')} ({entry['status']}){flag}")
        for note in entry.get('notes', []):
            lines.append(f"  note: {note}")
    if report.timings:
        lines += [f"time {name}: {t:.3f}s" for name, t in sorted(report.timings.items())]
    lines.append(f"exit {report.exit_code}")
    return "\n".join(lines)


def execute(argv: Sequence[str]) -> Tuple[int, Optional[Report]]:
    """Parse and dispatch; returns the exit code and the report (None on usage errors)."""
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except UsageError as e:
        print(str(e), file=sys.stderr)
        return EXIT_USAGE, None

    if args.verbose:
        logging.getLogger("pptdyn").setLevel(logging.DEBUG)
    if args.settings:
        try:
            apply_settings(load_tolerance_profile(args.settings))
        except ConfigurationError as e:
            print(f"pptdyn: {e}", file=sys.stderr)
            return EXIT_USAGE, None

    ctx = Context(args, argv)
    try:
        code = args.handler(ctx)
    except DocumentError as e:
        logger.debug(f"Document rejected: {e}")
        ctx.add(ResultEntry(name="document", status="invalid", notes=[f"{p}: {r}" for p, r in e.errors]))
        code = EXIT_INVALID
    except SolverError as e:
        logger.error(f"Solver failure: {e}")
        if e.dump:
            logger.debug(f"Program triplets:\n{e.dump}")
        details = {'dump_lines': len(e.dump.splitlines())} if e.dump else {}
        ctx.add(ResultEntry(name="solver", status="non_optimal", notes=[str(e)], details=details))
        code = EXIT_SOLVER
    except BoundViolation as e:
        report = e.report.model_dump() if isinstance(e.report, BaseModel) else {}
        ctx.add(ResultEntry(name="bound", status="violation", notes=[str(e)], details=report))
        code = EXIT_BOUND
    except (OSError, PptdynError) as e:
        ctx.add(ResultEntry(name="input", status="invalid", notes=[str(e)]))
        code = EXIT_INVALID

    if args.timings:
        ctx.report.timings = ctx.timings
    ctx.report.exit_code = code
    return code, ctx.report


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    code, report = execute(argv)
    if report is not None:
        print(render(report, report.output))
    return code
