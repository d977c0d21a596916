"""Runtime micro-batch resizing driven by transfer-latency monitoring.

Each monitored link direction keeps a ring of the last 20 per-sample transfer
latencies plus a long-run baseline.  When the recent window drifts above the
baseline the producing stage's micro-batch is halved; when it returns near
the baseline a previously reduced stage is doubled back.  Latencies are
normalized per sample before recording so that resizing itself never
triggers another signal.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Deque, Dict, List, Optional, Tuple

WINDOW_CAPACITY = 20
BASELINE_ALPHA = 0.05
DEGRADE_FACTOR = 1.2
RECOVER_FACTOR = 1.05


class Signal(enum.Enum):
    DEGRADED = "degraded"
    RECOVERED = "recovered"
    STABLE = "stable"


class Phase(enum.Enum):
    FILL = "fill"
    RUN = "run"
    DRAIN = "drain"


@dataclass
class MonitorWindow:
    """Ring of recent normalized transfer latencies plus a baseline mean.

    The baseline is an exponential moving average of samples observed while
    the monitored stage is at its configured size; it is frozen while the
    stage is reduced so that recovery is judged against the healthy network,
    not against the degraded one.
    """

    samples: Deque[float] = field(
        default_factory=lambda: deque(maxlen=WINDOW_CAPACITY)
    )
    baseline: float = 0.0
    count: int = 0
    samples_since_adjust: int = 0

    def mean(self) -> float:
        return sum(self.samples) / len(self.samples)

    @property
    def full(self) -> bool:
        return len(self.samples) == WINDOW_CAPACITY


def record_transfer(window: MonitorWindow, latency: float,
                    freeze_baseline: bool = False) -> MonitorWindow:
    """Append one normalized (per-sample) latency sample."""
    if latency < 0:
        raise ValueError("latency must be non-negative")
    window.samples.append(latency)
    window.count += 1
    window.samples_since_adjust += 1
    if not freeze_baseline:
        if window.count == 1:
            window.baseline = latency
        else:
            window.baseline += BASELINE_ALPHA * (latency - window.baseline)
    return window


def detect_fluctuation(window: MonitorWindow, reduced: bool = False,
                       degrade_factor: float = DEGRADE_FACTOR,
                       recover_factor: float = RECOVER_FACTOR) -> Signal:
    """Classify the recent window against the baseline."""
    if not window.full or window.baseline <= 0:
        return Signal.STABLE
    mean = window.mean()
    if mean > degrade_factor * window.baseline:
        return Signal.DEGRADED
    if reduced and mean < recover_factor * window.baseline:
        return Signal.RECOVERED
    return Signal.STABLE


@dataclass
class StageBatchState:
    """Per-stage micro-batch sizing state."""

    stage: int
    configured_m: int
    current: int
    phase: Phase = Phase.FILL

    @property
    def reduced(self) -> bool:
        return self.current < self.configured_m


def adjust(state: StageBatchState, signal: Signal, phase: Phase) -> int:
    """Return the stage's new micro-batch size for the given signal/phase."""
    if phase is Phase.DRAIN:
        return max(1, state.current // 2)
    if signal is Signal.DEGRADED:
        return max(1, state.current // 2)
    if signal is Signal.RECOVERED:
        return min(state.configured_m, state.current * 2)
    return state.current


@dataclass(frozen=True)
class AdapterAction:
    """One logged size change: (t, stage, old, new, signal)."""

    t: float
    stage: int
    old_size: int
    new_size: int
    signal: str


@dataclass
class AdapterConfig:
    degrade_factor: float = DEGRADE_FACTOR
    recover_factor: float = RECOVER_FACTOR


class DynamicBatchAdapter:
    """Engine-facing orchestration of the monitors and stage states.

    Owned by the simulator's event loop; all hooks run synchronously at
    transfer-completion and phase-boundary events.
    """

    def __init__(self, num_stages: int, microbatch_m: int,
                 config: Optional[AdapterConfig] = None):
        self.config = config or AdapterConfig()
        self.states = [
            StageBatchState(stage=s, configured_m=microbatch_m,
                            current=microbatch_m)
            for s in range(num_stages)
        ]
        # One monitor per (boundary, direction); "fwd" watches activations,
        # "bwd" watches gradients.
        self.windows: Dict[Tuple[int, str], MonitorWindow] = {}
        self.actions: List[AdapterAction] = []
        self.degraded: Dict[Tuple[int, str], bool] = {}

    def _window(self, boundary: int, direction: str) -> MonitorWindow:
        key = (boundary, direction)
        if key not in self.windows:
            self.windows[key] = MonitorWindow()
            self.degraded[key] = False
        return self.windows[key]

    def current_size(self, stage: int) -> int:
        return self.states[stage].current

    def _apply(self, t: float, stage: int, new_size: int, signal: str):
        st = self.states[stage]
        if new_size != st.current:
            self.actions.append(
                AdapterAction(t=t, stage=stage, old_size=st.current,
                              new_size=new_size, signal=signal)
            )
            st.current = new_size

    def on_transfer_complete(self, t: float, boundary: int, direction: str,
                             raw_seconds: float, size: int) -> None:
        """Record a finished transfer and react to the resulting signal.

        The producer of a forward (activation) transfer on boundary ``i`` is
        stage ``i``; for a backward (gradient) transfer it is stage ``i+1``.
        """
        producer = boundary if direction == "fwd" else boundary + 1
        window = self._window(boundary, direction)
        state = self.states[producer]
        record_transfer(window, raw_seconds / size,
                        freeze_baseline=state.reduced)
        # Detection runs only on a full, refreshed window: after any
        # adjustment the window must fill with new samples first, which
        # bounds the reaction rate and prevents repeated halving on the
        # same evidence.
        if window.samples_since_adjust < WINDOW_CAPACITY:
            return
        signal = detect_fluctuation(
            window, reduced=state.reduced,
            degrade_factor=self.config.degrade_factor,
            recover_factor=self.config.recover_factor,
        )
        if signal is Signal.STABLE:
            return
        self.degraded[(boundary, direction)] = signal is Signal.DEGRADED
        new_size = adjust(state, signal, state.phase)
        if new_size != state.current:
            window.samples_since_adjust = 0
            self._apply(t, producer, new_size, signal.value)

    def on_iteration_start(self, t: float, stage: int) -> None:
        """Enter the fill phase; start reduced when the network looks poor."""
        st = self.states[stage]
        st.phase = Phase.FILL
        poor = any(
            self.degraded.get((b, d), False)
            for b in (stage - 1, stage)
            for d in ("fwd", "bwd")
        )
        size = max(1, st.configured_m // 2) if poor else st.configured_m
        self._apply(t, stage, size, "fill")

    def on_run_phase(self, stage: int) -> None:
        self.states[stage].phase = Phase.RUN

    def on_drain(self, t: float) -> None:
        """All forwards of the iteration finished; halve every stage once."""
        for st in self.states:
            st.phase = Phase.DRAIN
            self._apply(t, st.stage, adjust(st, Signal.STABLE, Phase.DRAIN),
                        "drain")
