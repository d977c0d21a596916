"""Deterministic event-driven execution of a pipeline plan.

One engine serves both the static schedule generator and the network
simulator: with a constant trace and no adapter it reproduces the policy's
schedule exactly; with a trace it splits transfers at bandwidth breakpoints;
with the adapter enabled micro-batches become variable-size sample chunks
re-chunked on the fly.

Per-stage execution picks, whenever the stage is idle, the highest-priority
ready operation under the active policy:

* GPIPE: all forwards, then backwards (weight update fused right behind
  each backward), weight sync and optimizer at the end.
* ONE_F_ONE_B: ``num_stages - stage_index`` warm-up forwards, then strict
  alternation enforced by a backward-completion credit; updates fused.
* ZB_ORIGINAL: 1F1B-shaped with updates decoupled; an update runs only when
  no warm-up forward and no backward is ready, and forwards beyond the
  warm-up quota rank below pending updates.
* ZB_COMPACT: no warm-up quota; forward > backward > update, updates fill
  every idle slot and defer (never mid-op) to newly ready work.

Links carry one in-flight transfer per direction at a time, FIFO.
"""

from __future__ import annotations

import enum
import heapq
import itertools
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from .adapter import DynamicBatchAdapter
from .errors import InvalidTimingError, SchedulingBugError
from .nettrace import CONSTANT_TRACE, NetworkTrace, transfer_end_time
from .timing import PlanTiming


class OpKind(enum.Enum):
    FORWARD = "F"
    BACKWARD = "B"
    WEIGHT_UPDATE = "W"
    WEIGHT_SYNC = "S"
    OPTIMIZER_STEP = "O"


class Policy(enum.Enum):
    GPIPE = "gpipe"
    ONE_F_ONE_B = "1f1b"
    ZB_ORIGINAL = "zb_original"
    ZB_COMPACT = "zb_compact"


@dataclass(frozen=True)
class PipeOp:
    """One executed operation on a stage's timeline."""

    kind: OpKind
    stage: int
    start: float
    end: float
    size: int
    iteration: int
    microbatch_id: Optional[int] = None


@dataclass(frozen=True)
class TransferRecord:
    link_id: str
    direction: str  # "fwd" or "bwd"
    boundary: int
    start: float
    end: float
    size: int
    iteration: int
    microbatch_id: int


@dataclass
class EngineResult:
    ops: List[List[PipeOp]]  # per stage, in start order
    makespan: float
    transfers: List[TransferRecord]
    iteration_ends: List[float]


_SYNC_PRIORITY = 8
_OPT_PRIORITY = 9


class _Pools:
    """Sample accounting for one (stage, iteration)."""

    __slots__ = (
        "fwd_avail", "fwd_taken", "fwd_done", "bwd_avail", "bwd_taken",
        "bwd_done", "w_queue", "w_done", "sync_done", "opt_done",
        "fwd_next_id", "bwd_next_id", "first_bwd_done",
    )

    def __init__(self):
        self.fwd_avail = 0
        self.fwd_taken = 0
        self.fwd_done = 0
        self.bwd_avail = 0
        self.bwd_taken = 0
        self.bwd_done = 0
        self.w_queue = deque()  # (microbatch_id, size) of completed backwards
        self.w_done = 0
        self.sync_done = False
        self.opt_done = False
        self.fwd_next_id = 0
        self.bwd_next_id = 0
        self.first_bwd_done = False


@dataclass(frozen=True)
class _OpChoice:
    priority: int
    kind: OpKind
    size: int
    microbatch_id: Optional[int]


class PipelineEngine:
    def __init__(
        self,
        timing: PlanTiming,
        policy: Policy,
        iterations: int = 1,
        trace: NetworkTrace = CONSTANT_TRACE,
        adapter: Optional[DynamicBatchAdapter] = None,
        async_iterations: bool = False,
    ):
        if timing.num_stages < 1:
            raise InvalidTimingError("plan has no stages")
        if len(timing.boundaries) != timing.num_stages - 1:
            raise InvalidTimingError(
                f"expected {timing.num_stages - 1} boundaries, "
                f"got {len(timing.boundaries)}"
            )
        self.timing = timing
        self.policy = policy
        self.iterations = iterations
        self.trace = trace
        self.adapter = adapter
        self.async_iterations = async_iterations
        self.S = timing.num_stages
        self.batch = timing.batch
        self.m = timing.microbatch

    # -- policy rules -----------------------------------------------------

    def _quota_samples(self, s: int) -> int:
        return (self.S - s) * self.m

    def _ready_op(self, s: int, pools: _Pools) -> Optional[_OpChoice]:
        """Highest-priority startable op for a stage, or None."""
        policy = self.policy
        candidates: List[_OpChoice] = []
        size = self.adapter.current_size(s) if self.adapter else self.m

        # Forward chunk
        fwd_remaining = self.batch - pools.fwd_taken
        if fwd_remaining > 0:
            chunk = min(size, fwd_remaining)
            if pools.fwd_avail - pools.fwd_taken >= chunk:
                if policy is Policy.ZB_COMPACT or policy is Policy.GPIPE:
                    prio = 0 if policy is Policy.ZB_COMPACT else 1
                    candidates.append(
                        _OpChoice(prio, OpKind.FORWARD, chunk, pools.fwd_next_id))
                else:
                    quota = self._quota_samples(s)
                    if pools.fwd_taken < quota:
                        prio = 0 if policy is Policy.ZB_ORIGINAL else 1
                        candidates.append(
                            _OpChoice(prio, OpKind.FORWARD, chunk,
                                      pools.fwd_next_id))
                    elif pools.fwd_taken + chunk <= quota + pools.bwd_done:
                        prio = 3 if policy is Policy.ZB_ORIGINAL else 2
                        candidates.append(
                            _OpChoice(prio, OpKind.FORWARD, chunk,
                                      pools.fwd_next_id))

        # Backward chunk
        bwd_remaining = self.batch - pools.bwd_taken
        gpipe_gate = policy is not Policy.GPIPE or pools.fwd_done == self.batch
        if bwd_remaining > 0 and gpipe_gate:
            chunk = min(size, bwd_remaining)
            avail = min(pools.bwd_avail, pools.fwd_done) - pools.bwd_taken
            if s == self.S - 1:
                avail = pools.fwd_done - pools.bwd_taken
            if avail >= chunk:
                prio = 1 if policy is Policy.ZB_COMPACT or policy is Policy.ZB_ORIGINAL else 2
                candidates.append(
                    _OpChoice(prio, OpKind.BACKWARD, chunk, pools.bwd_next_id))

        # Weight update (head of queue)
        if pools.w_queue:
            mb_id, w_size = pools.w_queue[0]
            prio = 0 if policy in (Policy.GPIPE, Policy.ONE_F_ONE_B) else 2
            candidates.append(_OpChoice(prio, OpKind.WEIGHT_UPDATE, w_size, mb_id))

        # Iteration close
        if (pools.w_done == self.batch and not pools.w_queue
                and not pools.sync_done):
            candidates.append(
                _OpChoice(_SYNC_PRIORITY, OpKind.WEIGHT_SYNC, 0, None))
        if pools.sync_done and not pools.opt_done:
            candidates.append(
                _OpChoice(_OPT_PRIORITY, OpKind.OPTIMIZER_STEP, 0, None))

        if not candidates:
            return None
        return min(candidates, key=lambda c: c.priority)

    def _op_duration(self, s: int, choice: _OpChoice) -> float:
        if choice.kind is OpKind.FORWARD:
            return self.timing.fwd_seconds(s, choice.size)
        if choice.kind is OpKind.BACKWARD:
            return self.timing.bwd_seconds(s, choice.size)
        if choice.kind is OpKind.WEIGHT_UPDATE:
            return self.timing.wgt_seconds(s, choice.size)
        if choice.kind is OpKind.WEIGHT_SYNC:
            return self.timing.stages[s].sync_seconds
        return self.timing.stages[s].opt_seconds

    # -- engine run -------------------------------------------------------

    def run(self) -> EngineResult:
        S = self.S
        pools: Dict[Tuple[int, int], _Pools] = {}
        current_iter = [0] * S
        stage_busy = [False] * S
        ops: List[List[PipeOp]] = [[] for _ in range(S)]
        transfers: List[TransferRecord] = []
        iteration_fwd_done = [0] * self.iterations
        iteration_ends: List[float] = [0.0] * self.iterations
        stages_closed = [0] * self.iterations
        link_busy: Dict[Tuple[int, str], bool] = {}
        link_queue: Dict[Tuple[int, str], deque] = {}
        for b in range(S - 1):
            for d in ("fwd", "bwd"):
                link_busy[(b, d)] = False
                link_queue[(b, d)] = deque()

        events: List[tuple] = []  # (time, seq, kind, payload)
        seq = itertools.count()

        activated = set()

        def pool(s: int, it: int) -> _Pools:
            key = (s, it)
            if key not in pools:
                pools[key] = _Pools()
            return pools[key]

        def activate(s: int, it: int, t: float):
            if (s, it) in activated:
                return
            activated.add((s, it))
            p = pool(s, it)
            if s == 0:
                p.fwd_avail = self.batch
            if self.adapter:
                self.adapter.on_iteration_start(t, s)

        for s in range(S):
            activate(s, 0, 0.0)

        def enqueue_transfer(t: float, boundary: int, direction: str,
                             size: int, it: int, mb_id: int):
            link_queue[(boundary, direction)].append((size, it, mb_id))
            try_start_link(t, boundary, direction)

        def try_start_link(t: float, boundary: int, direction: str):
            key = (boundary, direction)
            if link_busy[key] or not link_queue[key]:
                return
            size, it, mb_id = link_queue[key].popleft()
            link_busy[key] = True
            bt = self.timing.boundaries[boundary]
            per_sample = (bt.act_bytes_per_sample if direction == "fwd"
                          else bt.grad_bytes_per_sample)
            end = transfer_end_time(
                t, per_sample * size, bt.bandwidth_bytes_per_s,
                bt.latency_seconds, self.trace, bt.link_id,
            )
            heapq.heappush(events, (end, next(seq), "xfer", (boundary, direction, size, it, mb_id, t)))

        def start_op(s: int, t: float) -> bool:
            it = current_iter[s]
            if it >= self.iterations:
                return False
            p = pool(s, it)
            choice = self._ready_op(s, p)
            if (choice is None and self.async_iterations
                    and p.fwd_taken == self.batch
                    and it + 1 < self.iterations):
                # Next iteration's forwards may start before this iteration's
                # optimizer step when running asynchronously.
                activate(s, it + 1, t)
                nxt = pool(s, it + 1)
                remaining = self.batch - nxt.fwd_taken
                size = self.adapter.current_size(s) if self.adapter else self.m
                chunk = min(size, remaining)
                if remaining > 0 and nxt.fwd_avail - nxt.fwd_taken >= chunk:
                    nxt.fwd_taken += chunk
                    stage_busy[s] = True
                    op = PipeOp(kind=OpKind.FORWARD, stage=s, start=t,
                                end=t + self.timing.fwd_seconds(s, chunk),
                                size=chunk, iteration=it + 1,
                                microbatch_id=nxt.fwd_next_id)
                    ops[s].append(op)
                    heapq.heappush(events, (op.end, next(seq), "op", op))
                    return True
                return False
            if choice is None:
                return False
            duration = self._op_duration(s, choice)
            if choice.kind is OpKind.FORWARD:
                p.fwd_taken += choice.size
            elif choice.kind is OpKind.BACKWARD:
                p.bwd_taken += choice.size
            elif choice.kind is OpKind.WEIGHT_UPDATE:
                p.w_queue.popleft()
            stage_busy[s] = True
            op = PipeOp(kind=choice.kind, stage=s, start=t, end=t + duration,
                        size=choice.size, iteration=it,
                        microbatch_id=choice.microbatch_id)
            ops[s].append(op)
            heapq.heappush(events, (op.end, next(seq), "op", op))
            return True

        def dispatch(t: float):
            progress = True
            while progress:
                progress = False
                for s in range(S):
                    if not stage_busy[s] and start_op(s, t):
                        progress = True

        def finish_op(op: PipeOp, t: float):
            s = op.stage
            it = op.iteration
            p = pool(s, it)
            stage_busy[s] = False
            if op.kind is OpKind.FORWARD:
                p.fwd_done += op.size
                p.fwd_next_id += 1
                if s < S - 1:
                    enqueue_transfer(t, s, "fwd", op.size, it, op.microbatch_id)
                iteration_fwd_done[it] += op.size
                if (self.adapter
                        and iteration_fwd_done[it] == S * self.batch):
                    self.adapter.on_drain(t)
            elif op.kind is OpKind.BACKWARD:
                p.bwd_done += op.size
                p.bwd_next_id += 1
                p.w_queue.append((op.microbatch_id, op.size))
                if not p.first_bwd_done:
                    p.first_bwd_done = True
                    if self.adapter:
                        self.adapter.on_run_phase(s)
                if s > 0:
                    enqueue_transfer(t, s - 1, "bwd", op.size, it, op.microbatch_id)
            elif op.kind is OpKind.WEIGHT_UPDATE:
                p.w_done += op.size
            elif op.kind is OpKind.WEIGHT_SYNC:
                p.sync_done = True
            elif op.kind is OpKind.OPTIMIZER_STEP:
                p.opt_done = True
                stages_closed[it] += 1
                if stages_closed[it] == S:
                    iteration_ends[it] = t
                current_iter[s] = it + 1
                if it + 1 < self.iterations:
                    activate(s, it + 1, t)

        def finish_transfer(payload, t: float):
            boundary, direction, size, it, mb_id, t_start = payload
            link_busy[(boundary, direction)] = False
            if direction == "fwd":
                pool(boundary + 1, it).fwd_avail += size
            else:
                pool(boundary, it).bwd_avail += size
            bt = self.timing.boundaries[boundary]
            transfers.append(
                TransferRecord(link_id=bt.link_id, direction=direction,
                               boundary=boundary, start=t_start, end=t,
                               size=size, iteration=it, microbatch_id=mb_id)
            )
            if self.adapter:
                self.adapter.on_transfer_complete(
                    t, boundary, direction, t - t_start, size)
            try_start_link(t, boundary, direction)

        dispatch(0.0)
        now = 0.0
        while events:
            now, _, kind, payload = heapq.heappop(events)
            if kind == "op":
                finish_op(payload, now)
            else:
                finish_transfer(payload, now)
            dispatch(now)

        unfinished = [s for s in range(S) if current_iter[s] < self.iterations]
        if unfinished:
            dump = {
                "unfinished_stages": unfinished,
                "current_iterations": list(current_iter),
                "pools": {
                    f"{k[0]}/{k[1]}": {
                        "fwd": (p.fwd_avail, p.fwd_taken, p.fwd_done),
                        "bwd": (p.bwd_avail, p.bwd_taken, p.bwd_done),
                        "w_done": p.w_done,
                    }
                    for k, p in pools.items()
                },
            }
            raise SchedulingBugError(
                f"event loop stalled with work remaining on stages {unfinished}",
                state_dump=dump,
            )
        return EngineResult(
            ops=ops,
            makespan=now,
            transfers=transfers,
            iteration_ends=iteration_ends,
        )
