"""Deterministic discrete-event simulation of a prefill tier."""

from __future__ import annotations

import heapq
import logging
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from laps_sim.controller import (
    ControllerConfig,
    InstanceStats,
    Pool,
    PoolState,
    aggregate,
    decide,
    pressure,
)
from laps_sim.cost_model import (
    BatchShape,
    CostParams,
    ExecOverheads,
    KernelKind,
    batch_service_time,
    prefill_boundary,
    reprefill_boundary,
)
from laps_sim.errors import ConfigError, InvariantViolation
from laps_sim.metrics.report import MetricsReport, compute_report
from laps_sim.scheduler import (
    AWDState,
    BatchPlan,
    Chunk,
    DispatchReason,
    GraphGrid,
    RequestQueue,
    SchedConfig,
    SchedMode,
    awd_step,
    awd_wakeup,
    fcfs_admit,
    long_chunk_dispatch,
    observe_service,
    token_max_admit,
)
from laps_sim.workload import ClosedLoopSource, Request, RequestClass, classify
from .events import Event, EventKind, EventLog, RecordKind

logger = logging.getLogger(__name__)


class Policy(str, Enum):
    LAPS = "laps"
    FCFS_UNIFIED = "fcfs_unified"
    BUCKET_NO_DISAGG = "bucket_no_disagg"
    DISAGG_ONLY = "disagg_only"

    @property
    def dual_queue(self) -> bool:
        return self in (Policy.LAPS, Policy.DISAGG_ONLY)

    @property
    def uses_graphs(self) -> bool:
        return self in (Policy.LAPS, Policy.BUCKET_NO_DISAGG)


class DisaggMode(str, Enum):
    TEMPORAL = "temporal"
    SPATIAL = "spatial"


class Router(str, Enum):
    """How a unified policy hands arrivals to instances.

    ``shared`` keeps one global queue that every idle instance drains. The
    other two give each instance its own queue and pick one on arrival.
    """

    SHARED = "shared"
    ROUND_ROBIN = "round_robin"
    LEAST_LOADED = "least_loaded"


@dataclass(frozen=True)
class SimConfig:
    n_instances: int = 2
    policy: Policy = Policy.LAPS
    disagg: DisaggMode = DisaggMode.SPATIAL
    controller: bool = False
    short_instances: int | None = None
    seed: int = 42
    duration: float = 60_000.0
    slo: float = 400.0
    capture_startup_ms: float = 0.0
    router: Router = Router.SHARED

    def __post_init__(self) -> None:
        if self.n_instances < 1:
            raise ConfigError(f"n_instances must be >= 1, got {self.n_instances}")
        if self.duration <= 0 or self.slo <= 0:
            raise ConfigError("duration and slo must be > 0")
        if self.capture_startup_ms < 0:
            raise ConfigError("capture_startup_ms must be >= 0")
        if self.policy.dual_queue and self.router != Router.SHARED:
            raise ConfigError("routing applies to unified policies only")
        if not self.policy.dual_queue:
            if self.controller:
                raise ConfigError(f"policy {self.policy.value} has no pools to control")
            return
        if self.disagg == DisaggMode.TEMPORAL:
            if self.n_instances != 1:
                raise ConfigError("temporal disaggregation runs on exactly 1 instance")
            if self.controller:
                raise ConfigError("the controller needs spatial disaggregation")
        else:
            if self.n_instances < 2:
                raise ConfigError("spatial disaggregation needs >= 2 instances")
            if self.short_instances is not None and not (
                1 <= self.short_instances < self.n_instances
            ):
                raise ConfigError(
                    f"short_instances must be in [1, {self.n_instances - 1}]"
                )

    @property
    def initial_short(self) -> int:
        if self.short_instances is not None:
            return self.short_instances
        return max(1, self.n_instances // 2)


@dataclass(frozen=True)
class InFlight:
    members: tuple[int, ...]
    dispatch_time: float


@dataclass
class InstanceState:
    id: int
    awd: AWDState
    available_at: float = 0.0
    busy_until: float | None = None
    in_flight: InFlight | None = None
    chunks: deque[Chunk] = field(default_factory=deque)
    long_request: Request | None = None
    wake_token: int = 0
    busy_spans: list[tuple[float, float]] = field(default_factory=list)
    lateness: list[tuple[float, float]] = field(default_factory=list)
    queue: RequestQueue | None = None

    @property
    def busy(self) -> bool:
        return self.busy_until is not None


@dataclass(frozen=True)
class SimResult:
    report: MetricsReport
    log: EventLog


class Simulator:
    """Single-threaded event loop over one request stream.

    Events are ordered by ``(time, seq)`` with ``seq`` assigned at scheduling
    time, so identical inputs replay to identical logs.
    """

    def __init__(
        self,
        sim: SimConfig,
        requests: Sequence[Request] = (),
        cost: CostParams | None = None,
        overheads: ExecOverheads | None = None,
        sched: SchedConfig | None = None,
        ctrl: ControllerConfig | None = None,
        grid: GraphGrid | None = None,
        source: ClosedLoopSource | None = None,
    ) -> None:
        self.sim = sim
        self.cost = cost or CostParams()
        self.overheads = overheads or ExecOverheads()
        self.sched = sched or SchedConfig()
        self.ctrl = ctrl or ControllerConfig()
        self.grid = grid or GraphGrid()
        self.source = source
        self.log = EventLog()

        self._requests = list(requests)
        if any(
            b.arrival_time < a.arrival_time
            for a, b in zip(self._requests, self._requests[1:])
        ):
            raise InvariantViolation("requests must be sorted by arrival time")
        self._next_arrival = 0

        self._heap: list[Event] = []
        self._seq = 0
        self._now = 0.0
        self._arrived = 0
        self._completed = 0
        self._class_of: dict[int, RequestClass] = {}
        self._deadline_of: dict[int, float] = {}

        self._l_m_first = (
            self.sched.short_boundary
            if self.sched.short_boundary is not None
            else prefill_boundary(self.cost)
        )
        self._l_m_re = (
            self.sched.reprefill_boundary
            if self.sched.reprefill_boundary is not None
            else self._l_m_first
        )

        if sim.policy.dual_queue:
            self.queues: dict[Pool | None, RequestQueue] = {
                Pool.SHORT: RequestQueue("short"),
                Pool.LONG: RequestQueue("long"),
            }
        else:
            self.queues = {None: RequestQueue("unified")}

        self.pools: PoolState | None = None
        if sim.policy.dual_queue and sim.disagg == DisaggMode.SPATIAL:
            self.pools = PoolState.split(sim.n_instances, sim.initial_short)
            if sim.controller:
                self.pools.validate(self.ctrl)
        self._controlled = self.pools is not None and sim.controller

        startup = sim.capture_startup_ms if sim.policy.uses_graphs else 0.0
        self.instances = [
            InstanceState(
                id=i,
                awd=AWDState.initial(self.sched, self.grid),
                available_at=startup,
            )
            for i in range(sim.n_instances)
        ]
        self._routed = sim.router != Router.SHARED
        self._next_route = 0
        if self._routed:
            for instance in self.instances:
                instance.queue = RequestQueue(f"instance-{instance.id}")

    # -- event plumbing -------------------------------------------------

    def _push(self, time: float, kind: EventKind, payload: object = None) -> None:
        heapq.heappush(self._heap, Event(time, self._seq, kind, payload))
        self._seq += 1

    def _push_next_arrival(self) -> None:
        if self._next_arrival < len(self._requests):
            request = self._requests[self._next_arrival]
            self._next_arrival += 1
            self._push(request.arrival_time, EventKind.ARRIVAL, (request, True))

    def _work_remaining(self) -> bool:
        return (
            self._next_arrival < len(self._requests)
            or self._arrived > self._completed
            or any(e.kind == EventKind.ARRIVAL for e in self._heap)
        )

    # -- classification and queues --------------------------------------

    def _classify(self, r: Request) -> RequestClass:
        l_m_re = self._l_m_re
        if self.sched.h_dependent_boundary and r.turn > 1:
            l_m_re = reprefill_boundary(self.cost, r.history_tokens)
        return classify(r, self._l_m_first, l_m_re)

    # -- main loop -------------------------------------------------------

    def run(self) -> SimResult:
        self._push_next_arrival()
        if self.source is not None:
            for request in self.source.initial_requests():
                self._push(request.arrival_time, EventKind.ARRIVAL, (request, False))
        for instance in self.instances:
            if instance.available_at > 0:
                self._push(
                    instance.available_at, EventKind.WINDOW_EXPIRY, (instance.id, 0)
                )
        if self.pools is not None and self.sim.controller:
            self._push(self.ctrl.dt, EventKind.CONTROLLER_TICK)

        while self._heap:
            event = heapq.heappop(self._heap)
            self._now = event.time
            if event.kind == EventKind.ARRIVAL:
                self._on_arrival(*event.payload)
            elif event.kind == EventKind.BATCH_COMPLETE:
                self._on_complete(self.instances[event.payload])
            elif event.kind == EventKind.WINDOW_EXPIRY:
                instance_id, token = event.payload
                instance = self.instances[instance_id]
                if token == instance.wake_token:
                    self._try_schedule([instance])
            elif event.kind == EventKind.CONTROLLER_TICK:
                self._on_tick()

        if self._completed != self._arrived:
            raise InvariantViolation(
                f"{self._arrived - self._completed} requests never completed"
            )
        report = compute_report(self.log, self.sim.slo)
        logger.info(
            "simulated %d requests (%s): short TTFT %.2f ms, long TTFT %.2f ms",
            report.completions,
            self.sim.policy.value,
            report.short.ttft_mean,
            report.long.ttft_mean,
        )
        return SimResult(report=report, log=self.log)

    # -- handlers --------------------------------------------------------

    def _on_arrival(self, r: Request, scripted: bool) -> None:
        if r.id in self._class_of:
            raise InvariantViolation(f"duplicate request id {r.id}")
        klass = self._classify(r)
        self._class_of[r.id] = klass
        self._deadline_of[r.id] = (
            r.deadline if r.deadline is not None else r.arrival_time + self.sim.slo
        )
        self._arrived += 1
        target = self._route() if self._routed else None
        self.log.append(
            self._now,
            RecordKind.ARRIVAL,
            instance=None if target is None else target.id,
            request_ids=(r.id,),
            klass=klass.value,
            tokens=r.new_tokens,
            deadline_ms=r.deadline,
        )
        if target is not None:
            assert target.queue is not None
            target.queue.push(r)
        elif self.sim.policy.dual_queue:
            self.queues[Pool(klass.value)].push(r)
        else:
            self.queues[None].push(r)
        if scripted:
            self._push_next_arrival()
        self._try_schedule(self.instances if target is None else [target])

    def _route(self) -> InstanceState:
        if self.sim.router == Router.ROUND_ROBIN:
            target = self.instances[self._next_route % len(self.instances)]
            self._next_route += 1
            return target
        return min(self.instances, key=lambda i: (self._load(i), i.id))

    @staticmethod
    def _load(instance: InstanceState) -> int:
        queued = len(instance.queue) if instance.queue is not None else 0
        running = len(instance.in_flight.members) if instance.in_flight else 0
        return queued + running

    def _on_complete(self, instance: InstanceState) -> None:
        batch = instance.in_flight
        assert batch is not None and instance.busy_until is not None
        service = instance.busy_until - batch.dispatch_time

        finished: tuple[int, ...]
        if instance.long_request is not None:
            chunk_done = not instance.chunks
            finished = (instance.long_request.id,) if chunk_done else ()
        else:
            finished = batch.members
            instance.awd = observe_service(
                instance.awd, service, len(batch.members), self.sched
            )

        self.log.append(
            self._now,
            RecordKind.COMPLETE,
            instance=instance.id,
            request_ids=batch.members,
            finished=finished,
        )
        for request_id in finished:
            self._completed += 1
            if self._controlled:
                late = max(0.0, self._now - self._deadline_of[request_id])
                instance.lateness.append((self._now, late))
            if self.source is not None:
                follow_up = self.source.on_complete(request_id, self._now)
                if follow_up is not None:
                    self._push(
                        follow_up.arrival_time, EventKind.ARRIVAL, (follow_up, False)
                    )

        instance.in_flight = None
        instance.busy_until = None
        if instance.chunks:
            self._run_next_chunk(instance)
            return
        instance.long_request = None
        self._try_schedule([instance])

    def _on_tick(self) -> None:
        assert self.pools is not None
        now = self._now
        scores: dict[int, float] = {}
        for instance in self.instances:
            scores[instance.id] = pressure(self._stats(instance, now), self.ctrl)

        pool_pressure = {}
        for pool in (Pool.SHORT, Pool.LONG):
            members = [scores[i] for i in self.pools.members(pool)]
            pool_pressure[pool] = max(
                0.0, aggregate(members, self.ctrl.aggregator_percentile)
            )

        migration = decide(
            pool_pressure[Pool.SHORT],
            pool_pressure[Pool.LONG],
            self.pools,
            self.ctrl,
            now,
            scores=scores,
        )
        if migration is not None:
            self.log.append(
                now,
                RecordKind.MIGRATE,
                instance=migration.instance,
                reason=f"{migration.source.value}_to_{migration.target.value}",
            )
            instance = self.instances[migration.instance]
            if migration.target == Pool.SHORT:
                instance.awd = AWDState.initial(self.sched, self.grid)
            instance.wake_token += 1
            self._try_schedule([instance])

        if self._work_remaining():
            self._push(now + self.ctrl.dt, EventKind.CONTROLLER_TICK)

    # -- controller inputs -----------------------------------------------

    def _stats(self, instance: InstanceState, now: float) -> InstanceStats:
        assert self.pools is not None
        pool = self.pools.assignment[instance.id]
        size = len(self.pools.members(pool))
        q = len(self.queues[pool]) / size

        since = now - self.ctrl.dt
        instance.lateness = [(t, late) for t, late in instance.lateness if t > since]
        e = (
            sum(late for _, late in instance.lateness) / len(instance.lateness)
            if instance.lateness
            else 0.0
        )

        busy = sum(
            max(0.0, min(end, now) - max(start, since))
            for start, end in instance.busy_spans
        )
        instance.busy_spans = [(s, t) for s, t in instance.busy_spans if t > since]
        return InstanceStats(q=q, e=e, u=min(1.0, busy / self.ctrl.dt))

    # -- dispatch --------------------------------------------------------

    def _try_schedule(self, candidates: Sequence[InstanceState]) -> None:
        seen: set[int] = set()
        for instance in candidates:
            if instance.id in seen:
                continue
            seen.add(instance.id)
            if instance.busy or self._now < instance.available_at:
                continue
            self._schedule_instance(instance)

    def _schedule_instance(self, instance: InstanceState) -> None:
        policy = self.sim.policy
        if not policy.dual_queue:
            queue = instance.queue if instance.queue is not None else self.queues[None]
            if policy == Policy.FCFS_UNIFIED:
                plan = fcfs_admit(queue, self.sched, self._now)
                if plan is not None:
                    self._start_batch(instance, plan, queue)
            else:
                self._short_round(instance, queue)
            return

        if self.pools is None:
            self._temporal_round(instance)
        elif self.pools.assignment[instance.id] == Pool.SHORT:
            self._short_round(instance, self.queues[Pool.SHORT])
        else:
            self._start_long(instance)

    def _temporal_round(self, instance: InstanceState) -> None:
        short_head = self.queues[Pool.SHORT].head()
        long_head = self.queues[Pool.LONG].head()
        if long_head is not None and (
            short_head is None
            or (long_head.arrival_time, long_head.id)
            < (short_head.arrival_time, short_head.id)
        ):
            self._start_long(instance)
        elif short_head is not None:
            self._short_round(instance, self.queues[Pool.SHORT])

    def _short_round(self, instance: InstanceState, queue: RequestQueue) -> None:
        if not queue:
            return
        policy = self.sim.policy
        now = self._now
        if policy == Policy.DISAGG_ONLY:
            plan = fcfs_admit(queue, self.sched, now)
            wake = None
        elif self.sched.mode == SchedMode.DEADLINE_FREE:
            plan = token_max_admit(queue, self.sched, self.grid, now)
            head = queue.head()
            wake = None if head is None else head.arrival_time + self.sched.t_max
        else:
            plan, instance.awd = awd_step(
                instance.awd, queue, now, self.grid, self.sched, policy.uses_graphs
            )
            wake = None if plan else awd_wakeup(
                instance.awd, queue, now, self.grid, self.sched
            )

        if plan is not None:
            self._start_batch(instance, plan, queue)
        elif wake is not None:
            instance.wake_token += 1
            self._push(
                max(wake, now),
                EventKind.WINDOW_EXPIRY,
                (instance.id, instance.wake_token),
            )

    def _batch_class(self, plan: BatchPlan) -> str:
        classes = {self._class_of[r.id] for r in plan.requests}
        return classes.pop().value if len(classes) == 1 else "mixed"

    def _start_batch(
        self, instance: InstanceState, plan: BatchPlan, queue: RequestQueue
    ) -> None:
        queue.remove(plan.members)
        service = batch_service_time(
            plan.shape, plan.service_members(), self.cost, self.overheads
        )
        self._launch(
            instance,
            members=plan.members,
            shape=plan.shape,
            reason=plan.reason,
            klass=self._batch_class(plan),
            tokens=plan.tokens,
            service=service,
        )

    def _start_long(self, instance: InstanceState) -> None:
        queue = self.queues[Pool.LONG]
        head = queue.head()
        if head is None:
            return
        queue.remove([head.id])
        instance.long_request = head
        instance.chunks = deque(long_chunk_dispatch(head, self.sched))
        self._run_next_chunk(instance)

    def _run_next_chunk(self, instance: InstanceState) -> None:
        assert instance.long_request is not None
        chunk = instance.chunks.popleft()
        shape = BatchShape(l_pad=chunk.tokens, depth=1, kind=KernelKind.STANDARD)
        service = batch_service_time(
            shape,
            [(float(chunk.tokens), float(chunk.history))],
            self.cost,
            self.overheads,
        )
        self._launch(
            instance,
            members=(chunk.request_id,),
            shape=shape,
            reason=DispatchReason.CHUNK,
            klass=RequestClass.LONG.value,
            tokens=chunk.tokens,
            service=service,
        )

    def _launch(
        self,
        instance: InstanceState,
        members: tuple[int, ...],
        shape: BatchShape,
        reason: DispatchReason,
        klass: str,
        tokens: int,
        service: float,
    ) -> None:
        instance.wake_token += 1
        instance.in_flight = InFlight(members=members, dispatch_time=self._now)
        instance.busy_until = self._now + service
        if self._controlled:
            instance.busy_spans.append((self._now, instance.busy_until))
        self.log.append(
            self._now,
            RecordKind.DISPATCH,
            instance=instance.id,
            request_ids=members,
            reason=reason.value,
            klass=klass,
            l_pad=shape.l_pad,
            depth=shape.depth,
            kernel=shape.kind.value,
            tokens=tokens,
        )
        self._push(instance.busy_until, EventKind.BATCH_COMPLETE, instance.id)


def run(
    sim: SimConfig,
    requests: Sequence[Request],
    cost: CostParams | None = None,
    overheads: ExecOverheads | None = None,
    sched: SchedConfig | None = None,
    ctrl: ControllerConfig | None = None,
    grid: GraphGrid | None = None,
    source: ClosedLoopSource | None = None,
) -> SimResult:
    """Simulate ``requests`` (plus any closed-loop ``source``) to completion."""
    return Simulator(sim, requests, cost, overheads, sched, ctrl, grid, source).run()
