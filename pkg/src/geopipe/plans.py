"""Model description and parallel-plan data types."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Tuple

from .errors import InputFileError


@dataclass(frozen=True)
class LayerSpec:
    """One model layer; flops and activation bytes are per sample."""

    fwd_flops: float
    bwd_input_flops: float
    bwd_weight_flops: float
    activation_out_bytes: float
    param_bytes: float

    def __post_init__(self):
        for name in ("fwd_flops", "bwd_input_flops", "bwd_weight_flops",
                     "activation_out_bytes", "param_bytes"):
            if getattr(self, name) <= 0:
                raise InputFileError(f"layer field {name} must be positive")

    @property
    def total_flops(self) -> float:
        return self.fwd_flops + self.bwd_input_flops + self.bwd_weight_flops


@dataclass(frozen=True)
class ModelSpec:
    """Ordered layers plus the batch / micro-batch candidate sets."""

    layers: Tuple[LayerSpec, ...]
    global_batch_candidates: Tuple[int, ...] = (128, 256)
    microbatch_candidates: Tuple[int, ...] = (8, 16, 32)

    def __post_init__(self):
        if not self.layers:
            raise InputFileError("model has no layers")
        for b in self.global_batch_candidates:
            if b <= 0:
                raise InputFileError("batch candidates must be positive")
            for m in self.microbatch_candidates:
                if m <= 0:
                    raise InputFileError("micro-batch candidates must be positive")
                if b % m != 0:
                    raise InputFileError(
                        f"micro-batch {m} does not divide batch {b}"
                    )

    @property
    def num_layers(self) -> int:
        return len(self.layers)


class SplitKind(enum.Enum):
    """Intra-group strategy used inside one pipeline stage's device group."""

    UNIFORM = "uniform"
    ASYMMETRIC_PP = "asymmetric_pp"
    ASYMMETRIC_DP = "asymmetric_dp"
    ASYMMETRIC_TP_DP = "asymmetric_tp_dp"


@dataclass(frozen=True)
class IntraSplit:
    """How a stage's work is divided across its second-level groups.

    ``parts`` encodes, per kind:
      ASYMMETRIC_PP    -> ((sg_id, layer_start, layer_end), ...)
      ASYMMETRIC_DP    -> ((unit_id, data_fraction), ...)
      ASYMMETRIC_TP_DP -> ((device_id, row_fraction, col_fraction), ...)
      UNIFORM          -> ()
    """

    kind: SplitKind
    parts: Tuple[tuple, ...] = ()


@dataclass(frozen=True)
class StageAssignment:
    """One pipeline stage: a first-level group and its layer range."""

    fg_id: str
    layer_start: int
    layer_end: int  # exclusive
    intra_split: IntraSplit = IntraSplit(SplitKind.UNIFORM)

    @property
    def layer_range(self) -> range:
        return range(self.layer_start, self.layer_end)


@dataclass(frozen=True)
class ParallelPlan:
    """Ordered stage assignments plus batch sizing."""

    stages: Tuple[StageAssignment, ...]
    batch_b: int
    microbatch_m: int

    def __post_init__(self):
        if self.batch_b <= 0 or self.microbatch_m <= 0:
            raise InputFileError("batch and micro-batch must be positive")
        if self.batch_b % self.microbatch_m != 0:
            raise InputFileError(
                f"micro-batch {self.microbatch_m} does not divide batch {self.batch_b}"
            )
        fgs = [s.fg_id for s in self.stages]
        if len(set(fgs)) != len(fgs):
            raise InputFileError("stage order must use distinct first-level groups")
        pos = 0
        for s in self.stages:
            if s.layer_start != pos or s.layer_end <= s.layer_start:
                raise InputFileError(
                    "stage layer ranges must tile the layer list without gaps"
                )
            pos = s.layer_end

    @property
    def micro_count(self) -> int:
        return self.batch_b // self.microbatch_m

    @property
    def num_layers(self) -> int:
        return self.stages[-1].layer_end

    @property
    def num_stages(self) -> int:
        return len(self.stages)


def stage_layers(plan: ParallelPlan, model: ModelSpec, s: int) -> Tuple[LayerSpec, ...]:
    a = plan.stages[s]
    return model.layers[a.layer_start:a.layer_end]


def stage_param_bytes(plan: ParallelPlan, model: ModelSpec, s: int) -> float:
    return sum(l.param_bytes for l in stage_layers(plan, model, s))
