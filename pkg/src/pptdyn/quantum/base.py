"""Base types for Choi-matrix carriers: channels, superchannels, combs and POVMs."""

from abc import ABC, abstractmethod
from enum import Enum
from typing import FrozenSet, Iterable, List, Sequence, Tuple

import numpy as np

from ..config import MARGINAL_TOL
from ..exceptions import DimensionError, InvalidObjectError, LabelError
from ..tensor import DimSpec, LabeledMatrix, is_psd

# Bipartite channel factors, in Choi order
A0, B0, A1, B1 = "A0", "B0", "A1", "B1"
CHANNEL_LABELS: Tuple[str, ...] = (A0, B0, A1, B1)

# Output-side factors of a superchannel carry a prime
A0P, B0P, A1P, B1P = "A0'", "B0'", "A1'", "B1'"
SUPERCHANNEL_LABELS: Tuple[str, ...] = (A0, A1, B0, B1, A0P, A1P, B0P, B1P)
SUPERCHANNEL_BOB: FrozenSet[str] = frozenset({B0, B1, B0P, B1P})
PRIME = {A0: A0P, B0: B0P, A1: A1P, B1: B1P}
UNPRIME = {v: k for k, v in PRIME.items()}


class Role(str, Enum):
    """What a Choi matrix represents."""
    CHANNEL = "channel"
    STATE = "state"
    SUPERCHANNEL = "superchannel"
    COMB = "comb"
    POVM = "povm"


def comb_label(base: str, k: int) -> str:
    """Label of factor `base` (A0, B0, A1, B1) at comb step k (1-based)."""
    return f"{base}_{k}"


def comb_labels(slot_count: int) -> Tuple[str, ...]:
    """Interleaved comb factor order A0_k, B0_k, A1_k, B1_k for k = 1..n+1."""
    return tuple(comb_label(base, k)
                 for k in range(1, slot_count + 2)
                 for base in CHANNEL_LABELS)


class ChoiCarrier(ABC):
    """A Choi matrix plus the role metadata needed to interpret it."""

    role: Role

    def __init__(self, choi: LabeledMatrix):
        if not choi.hermitian:
            choi = LabeledMatrix(choi.spec, choi.entries, hermitian=True)
        self.choi = choi

    @property
    def spec(self) -> DimSpec:
        return self.choi.spec

    @property
    @abstractmethod
    def bob_labels(self) -> FrozenSet[str]:
        """Factors on Bob's side of the cut (the ones Γ transposes)."""
        pass

    def is_cp(self) -> bool:
        return is_psd(self.choi)

    def __repr__(self) -> str:
        return f"{type(self).__name__}(spec={self.spec})"


class Channel(ChoiCarrier):
    """Choi matrix of a linear map with labeled input and output factors.

    The Choi matrix is J = Σ_ij |i⟩⟨j|_in ⊗ 𝒩(|i⟩⟨j|) (unnormalized). Factor order in the
    spec is free; the input/output split is recorded explicitly.
    """

    role = Role.CHANNEL

    def __init__(self, choi: LabeledMatrix, inputs: Sequence[str], outputs: Sequence[str],
                 bob: Iterable[str] = ()):
        super().__init__(choi)
        inputs, outputs = tuple(inputs), tuple(outputs)
        if sorted(inputs + outputs) != sorted(choi.labels):
            raise LabelError(
                f"inputs {list(inputs)} and outputs {list(outputs)} do not partition {list(choi.labels)}")
        bob = frozenset(bob)
        if not bob <= set(choi.labels):
            raise LabelError(f"Bob labels {sorted(bob)} not all in {list(choi.labels)}")
        self.inputs = inputs
        self.outputs = outputs
        self._bob = bob

    @property
    def bob_labels(self) -> FrozenSet[str]:
        return self._bob

    @property
    def input_spec(self) -> DimSpec:
        return self.spec.subset(self.inputs).reorder(self.inputs)

    @property
    def output_spec(self) -> DimSpec:
        return self.spec.subset(self.outputs).reorder(self.outputs)

    @property
    def input_dim(self) -> int:
        return self.spec.dim_of(self.inputs)

    @property
    def output_dim(self) -> int:
        return self.spec.dim_of(self.outputs)


class BipartiteChannel(Channel):
    """Channel A0B0 → A1B1 with Alice holding (A0, A1) and Bob holding (B0, B1).

    States are the case |A0| = |B0| = 1. The carrier holds any Hermitian-preserving
    bipartite map; CPTP-ness is checked by quantum.channels.is_channel.
    """

    def __init__(self, choi: LabeledMatrix):
        if choi.labels != CHANNEL_LABELS:
            raise LabelError(f"bipartite channel Choi must be over {CHANNEL_LABELS}, got {choi.labels}")
        super().__init__(choi, (A0, B0), (A1, B1), (B0, B1))

    @classmethod
    def from_entries(cls, entries, dims: Sequence[int]) -> "BipartiteChannel":
        if len(dims) != 4:
            raise DimensionError(f"bipartite channel needs 4 dims (A0, B0, A1, B1), got {dims}")
        return cls(LabeledMatrix(DimSpec.of(*zip(CHANNEL_LABELS, dims)), entries, hermitian=True))

    @property
    def dims(self) -> Tuple[int, int, int, int]:
        d = self.spec.dims
        return (d[0], d[1], d[2], d[3])

    @property
    def is_state(self) -> bool:
        return self.dims[0] == 1 and self.dims[1] == 1


class Superchannel(ChoiCarrier):
    """Supermap Choi over (A0, A1, B0, B1, A0', A1', B0', B1').

    Unprimed factors are the slot channel's wires, primed factors the produced channel's.
    """

    role = Role.SUPERCHANNEL

    def __init__(self, choi: LabeledMatrix):
        if choi.labels != SUPERCHANNEL_LABELS:
            raise LabelError(f"superchannel Choi must be over {SUPERCHANNEL_LABELS}, got {choi.labels}")
        super().__init__(choi)

    @property
    def bob_labels(self) -> FrozenSet[str]:
        return SUPERCHANNEL_BOB

    @property
    def input_dims(self) -> Tuple[int, int, int, int]:
        """Slot channel dims (A0, B0, A1, B1)."""
        s = self.spec
        return (s.dim(A0), s.dim(B0), s.dim(A1), s.dim(B1))

    @property
    def output_dims(self) -> Tuple[int, int, int, int]:
        """Produced channel dims (A0', B0', A1', B1')."""
        s = self.spec
        return (s.dim(A0P), s.dim(B0P), s.dim(A1P), s.dim(B1P))


class Comb(ChoiCarrier):
    """n-slot comb, stored as the Choi of its composite channel 𝒬.

    𝒬 maps (A0_k, B0_k)_{k=1..n+1} to (A1_k, B1_k)_{k=1..n+1}. Slot k's channel is plugged
    from (A1_k, B1_k) into (A0_{k+1}, B0_{k+1}).
    """

    role = Role.COMB

    def __init__(self, choi: LabeledMatrix, slot_count: int):
        if slot_count < 1:
            raise DimensionError(f"a comb needs at least one slot, got {slot_count}")
        expected = comb_labels(slot_count)
        if choi.labels != expected:
            raise LabelError(f"comb Choi must be over {expected}, got {choi.labels}")
        super().__init__(choi)
        self.slot_count = slot_count

    @property
    def bob_labels(self) -> FrozenSet[str]:
        return frozenset(label for label in self.choi.labels if label.startswith("B"))

    def step_inputs(self, k: int) -> Tuple[str, str]:
        return comb_label(A0, k), comb_label(B0, k)

    def step_outputs(self, k: int) -> Tuple[str, str]:
        return comb_label(A1, k), comb_label(B1, k)

    def slot_dims(self, k: int) -> Tuple[int, int, int, int]:
        """Dims (A0, B0, A1, B1) of the channel that fits slot k."""
        s = self.spec
        return (s.dim(comb_label(A1, k)), s.dim(comb_label(B1, k)),
                s.dim(comb_label(A0, k + 1)), s.dim(comb_label(B0, k + 1)))

    def as_channel(self) -> Channel:
        n = self.slot_count
        inputs = [lb for k in range(1, n + 2) for lb in self.step_inputs(k)]
        outputs = [lb for k in range(1, n + 2) for lb in self.step_outputs(k)]
        return Channel(self.choi, inputs, outputs, self.bob_labels)


class Povm:
    """Bipartite POVM: PSD elements over (A0, B0) summing to the identity."""

    role = Role.POVM

    def __init__(self, elements: List[LabeledMatrix], tol: float = MARGINAL_TOL):
        if not elements:
            raise InvalidObjectError("a POVM needs at least one element")
        spec = elements[0].spec
        if spec.labels != (A0, B0):
            raise LabelError(f"POVM elements must be over (A0, B0), got {spec.labels}")
        for i, e in enumerate(elements):
            if e.spec != spec:
                raise DimensionError(f"POVM element {i} is over {e.spec}, expected {spec}")
            if not is_psd(e):
                raise InvalidObjectError(f"POVM element {i} is not PSD")
        total = sum((e.entries for e in elements), np.zeros_like(elements[0].entries))
        err = float(np.max(np.abs(total - np.eye(spec.total_dim))))
        if err > tol:
            raise InvalidObjectError(f"POVM elements sum to I only within {err:.2e} (> {tol})")
        self.elements = [e.hermitized() for e in elements]
        self.spec = spec

    def __len__(self) -> int:
        return len(self.elements)
