"""
Deterministic discrete-event engine for the three-phase protocol.

Time is integer simulated milliseconds. Round r opens at r * round_period_ms:
heads without a base-station session run the handshake, readings are
generated setup_ms later, each node flushes toward its parent once its
children have reported (or at its deadline) and the head forwards the cluster
aggregate to the base station over its session key. A metric snapshot closes
the round one millisecond before the next one opens.
"""
import heapq
import logging
import math
from enum import Enum, unique
from typing import Any, Dict, Iterable, List, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel

from .adversary import Adversary, AttackKind, AttackSpec, Injection, Medium
from .aggregation import (
    AggregatePayload,
    ClusterNode,
    DataPacket,
    TrafficEvent,
    TrafficEventKind,
    process_incoming,
    rejection_event,
    send_hop,
)
from .auth import (
    AuthLogEntry,
    BaseStationAuthority,
    InitiatorSession,
    Msg1,
    Verdict,
    confirm,
    handshake_finalize,
    handshake_msg1,
    handshake_msg2,
)
from .config import ScenarioConfig
from .crypto import KEY_SIZE, get_curve
from .energy import EnergyLedger, aggregation_energy, rx_energy, tx_energy
from .exceptions import AegisnetError, InsufficientNodes
from .keys import KeyRing, establish_link_keys, initial_state
from .log import LoggingMixin
from .network import (
    BASE_STATION_ID,
    ClusterTopology,
    NodeState,
    Role,
    build_aggregation_tree,
    default_head_count,
    deploy,
    distance,
    elect_cluster_heads,
    topology_lines,
)

LOGGER = logging.getLogger(__name__)

METRICS_HEADER = [
    "round",
    "alive",
    "total_energy_j",
    "sent",
    "delivered",
    "pdr",
    "mean_delay_ms",
    "bytes_tx",
    "attack_attempts",
    "attack_accepted",
]
TRACE_HEADER = "time_ms,src,dst,epoch,ctr,event"
AUTH_LOG_HEADER = "time_ms,session_id,msg,verdict,reason"
SUMMARY_ROUND = -1
NA = "NA"


@unique
class EventKind(Enum):
    ROUND_START = "round-start"
    TOPOLOGY_REBUILD = "topology-rebuild"
    HANDSHAKE_MSG = "handshake-msg"
    HANDSHAKE_TIMEOUT = "handshake-timeout"
    READINGS = "readings"
    NODE_FLUSH = "node-flush"
    PACKET_DELIVERY = "packet-delivery"
    INJECTION = "injection"
    NODE_DEATH = "node-death"
    METRIC_SNAPSHOT = "metric-snapshot"


class Event(NamedTuple):
    time: int
    sequence: int
    kind: EventKind
    payload: Any = None


class EventQueue(object):
    """Min-heap on (time, sequence); sequence numbers are unique so payloads never compare"""

    def __init__(self) -> None:
        self._heap: List[Event] = []
        self._sequence = 0

    def push(self, time: int, kind: EventKind, payload: Any = None) -> Event:
        event = Event(time, self._sequence, kind, payload)
        self._sequence += 1
        heapq.heappush(self._heap, event)
        return event

    def pop(self) -> Event:
        return heapq.heappop(self._heap)

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)


class MetricsRecord(BaseModel):
    round: int
    alive: int
    total_energy: float
    sent: int
    delivered: int
    pdr: Optional[float] = None
    mean_delay: Optional[float] = None
    bytes_tx: int
    attack_attempts: int = 0
    attack_accepted: int = 0

    def row(self) -> List[str]:
        return [
            str(self.round),
            str(self.alive),
            f"{self.total_energy:.9f}",
            str(self.sent),
            str(self.delivered),
            NA if self.pdr is None else f"{self.pdr:.6f}",
            NA if self.mean_delay is None else f"{self.mean_delay:.3f}",
            str(self.bytes_tx),
            str(self.attack_attempts),
            str(self.attack_accepted),
        ]


def ratio(numerator: float, denominator: float) -> Optional[float]:
    return numerator / denominator if denominator else None


class Flush(NamedTuple):
    node: int
    round: int
    # Set when forwarding a single reading in store-and-forward mode
    payload: Optional[AggregatePayload] = None


class Delivery(NamedTuple):
    packet: DataPacket
    round: int


class HandshakeAttempt(object):
    def __init__(self, head: int, session_id: int, initiator: InitiatorSession, attempt: int) -> None:
        self.head = head
        self.session_id = session_id
        self.initiator = initiator
        self.attempt = attempt
        self.confirmed = False


def node_identity(node_id: int) -> bytes:
    return f"node-{node_id}".encode()


class Simulation(LoggingMixin):
    def __init__(
        self, config: ScenarioConfig, seed: int, medium: Optional[Medium] = None
    ) -> None:
        self.config = config
        self.seed = seed
        streams = np.random.SeedSequence(seed).spawn(5)
        deploy_rng, self.key_rng, self.reading_rng, self.auth_rng, attack_rng = [
            np.random.default_rng(stream) for stream in streams
        ]
        if medium is None:
            medium = Adversary(config.attack, attack_rng) if config.attack else Medium()
        self.medium = medium
        self.attack_rng = attack_rng

        network, energy = config.network, config.energy
        self.nodes: Dict[int, NodeState] = deploy(
            network.node_count,
            network.area_width,
            network.area_height,
            energy.initial_energy,
            deploy_rng,
            base_station=network.base_station,
        )
        self.initial_total = self.total_energy()
        self.authority = BaseStationAuthority(
            master=self.key_rng.bytes(KEY_SIZE),
            curve=get_curve(config.protocol.curve),
            freshness_ms=config.protocol.freshness_ms,
        )
        self.queue = EventQueue()
        self.now = 0
        self.round_index = -1
        self.finished = False
        self.topology = ClusterTopology()
        self.agents: Dict[int, ClusterNode] = {}
        self.handshakes: Dict[int, HandshakeAttempt] = {}
        self.pending_uplink: Dict[int, List[AggregatePayload]] = {}
        self.ledger = EnergyLedger()
        self.records: List[MetricsRecord] = []
        self.trace: List[TrafficEvent] = []
        self.auth_log: List[AuthLogEntry] = []
        self.initial_topology: List[str] = []
        self.dispatched: List[int] = []
        self.bytes_tx = 0
        self._round_readings: List[Tuple[int, int]] = []
        self._rebuild_at: Optional[int] = None
        self._last_rebuild: Optional[int] = None
        self._reset_round_counters()
        self._handlers = {
            EventKind.ROUND_START: self._on_round_start,
            EventKind.TOPOLOGY_REBUILD: self._on_topology_rebuild,
            EventKind.HANDSHAKE_MSG: self._on_handshake_msg,
            EventKind.HANDSHAKE_TIMEOUT: self._on_handshake_timeout,
            EventKind.READINGS: self._on_readings,
            EventKind.NODE_FLUSH: self._on_node_flush,
            EventKind.PACKET_DELIVERY: self._on_packet_delivery,
            EventKind.INJECTION: self._on_injection,
            EventKind.NODE_DEATH: self._on_node_death,
            EventKind.METRIC_SNAPSHOT: self._on_metric_snapshot,
        }

    # ---- bookkeeping ----

    def _reset_round_counters(self) -> None:
        self.sent = 0
        self.delivered = 0
        self.readings_at_bs = 0
        self.delay_sum = 0

    @property
    def protocol(self):
        return self.config.protocol

    @property
    def aggregating(self) -> bool:
        return not self.config.run.baseline

    def sensors(self) -> List[NodeState]:
        return [node for _, node in sorted(self.nodes.items()) if not node.is_base_station]

    def alive_sensors(self) -> List[NodeState]:
        return [node for node in self.sensors() if node.alive]

    def alive_count(self) -> int:
        """Alive sensors plus the base station, which never runs out"""
        return len(self.alive_sensors()) + 1

    def total_energy(self) -> float:
        return math.fsum(node.energy for node in self.sensors())

    def schedule(self, time: int, kind: EventKind, payload: Any = None) -> Event:
        if time < self.now:
            raise ValueError(f"Cannot schedule {kind.value} at {time}, clock is at {self.now}")
        return self.queue.push(time, kind, payload)

    def charge(self, node_id: int, joules: float, category: str) -> None:
        """Draw energy from a sensor; a node at or below the threshold dies at once"""
        node = self.nodes[node_id]
        if node.is_base_station or not node.alive:
            return
        drawn = min(joules, node.energy)
        node.energy -= drawn
        self.ledger.record(category, drawn)
        if node.energy <= self.config.energy.death_threshold:
            node.alive = False
            self.schedule(self.now, EventKind.NODE_DEATH, node_id)

    def _link_distance(self, a: int, b: int) -> float:
        return distance(self.nodes[a].position, self.nodes[b].position)

    def _record(self, packet: DataPacket, kind: TrafficEventKind) -> None:
        self.trace.append(TrafficEvent.for_packet(self.now, packet, kind))

    def _auth(self, session_id: int, msg: str, verdict: Verdict, reason: str = "") -> None:
        self.auth_log.append(
            AuthLogEntry(
                time_ms=self.now, session_id=session_id, msg=msg, verdict=verdict, reason=reason
            )
        )

    # ---- engine ----

    def start(self) -> None:
        """Schedule phase 1 and the first round at time 0"""
        self.schedule(0, EventKind.TOPOLOGY_REBUILD)
        self._rebuild_at = 0
        self.schedule(0, EventKind.ROUND_START, 0)

    def step(self) -> Event:
        event = self.queue.pop()
        if event.time < self.now:
            raise RuntimeError(f"Event {event.kind.value} at {event.time} precedes clock {self.now}")
        self.now = event.time
        self.dispatched.append(event.time)
        self.log.debug("t=%d dispatch %s %s", event.time, event.kind.value, event.payload)
        self._handlers[event.kind](event)
        return event

    def run(self) -> List[MetricsRecord]:
        if not self.queue and not self.records:
            self.start()
        while self.queue and not self.finished:
            self.step()
        self.log.info(
            "Finished %d round(s), %d node(s) alive, %.6f J left",
            len(self.records),
            self.alive_count(),
            self.total_energy(),
        )
        return self.records

    # ---- phase 1 ----

    def rebuild_topology(self) -> ClusterTopology:
        """Elect heads, grow the trees, key every edge and drop all head sessions"""
        alive = self.alive_sensors()
        network = self.config.network
        if not alive:
            raise InsufficientNodes("No sensor is alive")
        k = network.head_count or default_head_count(len(alive), network.head_fraction)
        heads = elect_cluster_heads(
            self.nodes,
            min(k, len(alive)),
            self.config.energy.initial_energy,
            network.energy_weight,
            network.distance_weight,
        )
        self.topology = build_aggregation_tree(heads, self.nodes, network.radio_range)
        rings = establish_link_keys(self.topology, self.key_rng, window=self.protocol.window)
        self.agents = {
            node.id: ClusterNode(node, rings.get(node.id, KeyRing(node.id)))
            for node in self.nodes.values()
        }
        for session_head in list(self.authority.sessions):
            self.authority.drop_session(session_head)
        self.authority.pending.clear()
        self.handshakes = {}
        self.pending_uplink = {}
        for head in self.topology.heads:
            self.authority.ensure_registered(node_identity(head))
        if not self.initial_topology:
            self.initial_topology = topology_lines(self.topology, self.nodes)
        self._last_rebuild = self.now
        self.log.info(
            "Re-clustered at t=%d: %d cluster(s), heads %s, %d isolated",
            self.now,
            len(self.topology.clusters),
            self.topology.heads,
            len(self.topology.isolated),
        )
        return self.topology

    def _request_rebuild(self, time: int) -> None:
        if self._rebuild_at == time:
            return
        self._rebuild_at = time
        self.schedule(time, EventKind.TOPOLOGY_REBUILD)

    def _on_topology_rebuild(self, event: Event) -> None:
        if self._last_rebuild == self.now:
            return
        try:
            self.rebuild_topology()
        except InsufficientNodes as err:
            self.log.info("Stopping: %s", err.message)
            self.finished = True

    def _on_node_death(self, event: Event) -> None:
        node = self.nodes[event.payload]
        self.log.info("Node %d died at t=%d", node.id, self.now)
        if node.role is Role.CLUSTER_HEAD or node.children:
            self._request_rebuild(self._next_round_time())
        if not self.alive_sensors():
            self.log.info("All sensors are dead at t=%d", self.now)

    def _next_round_time(self) -> int:
        return (self.round_index + 1) * self.protocol.round_period_ms

    # ---- rounds ----

    def _on_round_start(self, event: Event) -> None:
        if self.finished:
            return
        self.round_index = event.payload
        self._reset_round_counters()
        for head in self.topology.heads:
            if self.nodes[head].alive and head not in self.handshakes:
                self._start_handshake(head, attempt=1)
        for injection in self.medium.begin_round(self, self.round_index):
            self.schedule(
                self.now + self.protocol.setup_ms + injection.delay_ms,
                EventKind.INJECTION,
                injection,
            )
        self.schedule(self.now + self.protocol.setup_ms, EventKind.READINGS, self.round_index)
        self.schedule(
            self.now + self.protocol.round_period_ms - 1,
            EventKind.METRIC_SNAPSHOT,
            self.round_index,
        )

    def _participants(self) -> List[int]:
        nodes = []
        for cluster in self.topology.clusters:
            nodes.extend(node for node in cluster.post_order() if self.nodes[node].alive)
        return sorted(nodes)

    def _on_readings(self, event: Event) -> None:
        protocol = self.protocol
        hop = protocol.hop_ms
        heights: Dict[int, int] = {}
        for cluster in self.topology.clusters:
            heights.update(cluster.heights())
        for node_id in self._participants():
            reading = int(self.reading_rng.integers(protocol.reading_min, protocol.reading_max + 1))
            agent = self.agents[node_id]
            agent.start_round(reading, self.now)
            agent.awaiting = {child for child in agent.awaiting if self.nodes[child].alive}
            if not self.aggregating or not agent.awaiting:
                self.schedule(
                    self.now + protocol.processing_ms,
                    EventKind.NODE_FLUSH,
                    Flush(node=node_id, round=self.round_index),
                )
            if agent.awaiting:
                deadline = self.now + 2 * (heights[node_id] + 1) * hop + 1
                self.schedule(
                    deadline, EventKind.NODE_FLUSH, Flush(node=node_id, round=self.round_index)
                )

    def _on_node_flush(self, event: Event) -> None:
        flush: Flush = event.payload
        if flush.round != self.round_index:
            return
        agent = self.agents[flush.node]
        if not agent.state.alive:
            return
        if flush.payload is not None:
            self._send_up(agent, flush.payload)
            return
        if agent.flushed or agent.accumulator is None:
            return
        agent.flushed = True
        self._send_up(agent, agent.accumulator)

    def _send_up(self, agent: ClusterNode, payload: AggregatePayload) -> None:
        state = agent.state
        if state.role is Role.CLUSTER_HEAD:
            parent = BASE_STATION_ID
            if (BASE_STATION_ID, state.id) not in agent.ring:
                self.pending_uplink.setdefault(state.id, []).append(payload)
                self.log.debug("Head %d holds its aggregate until authenticated", state.id)
                return
        else:
            parent = state.parent
        packet = send_hop(agent, parent, payload, cluster=state.cluster or 0)
        cost = tx_energy(
            self.config.energy, self.protocol.data_bits, self._link_distance(state.id, parent)
        )
        self.charge(state.id, cost, "tx")
        self.sent += 1
        self.bytes_tx += self.protocol.data_bits // 8
        self._record(packet, TrafficEventKind.SENT)
        carried = self.medium.carry_packet(packet)
        if carried is None:
            return
        self.schedule(
            self.now + self.protocol.tx_latency_ms,
            EventKind.PACKET_DELIVERY,
            Delivery(packet=carried, round=self.round_index),
        )

    def _receive(self, packet: DataPacket, aggregate: bool) -> AggregatePayload:
        receiver = self.agents[packet.dst]
        self.charge(receiver.id, rx_energy(self.config.energy, self.protocol.data_bits), "rx")
        payload = process_incoming(receiver, packet, self.protocol.aggregation, aggregate=aggregate)
        if aggregate:
            self.charge(
                receiver.id,
                aggregation_energy(self.config.energy, self.protocol.data_bits),
                "aggregation",
            )
        return payload

    def _on_packet_delivery(self, event: Event) -> None:
        delivery: Delivery = event.payload
        packet = delivery.packet
        if delivery.round != self.round_index or packet.dst not in self.agents:
            return
        receiver = self.agents[packet.dst]
        if not receiver.state.alive:
            return
        to_bs = packet.dst == BASE_STATION_ID
        try:
            payload = self._receive(packet, aggregate=self.aggregating and not to_bs)
        except AegisnetError as err:
            self.log.debug("Rejected %s on %s: %s", packet.ctr, packet.link, err.reason)
            self._record(packet, rejection_event(err))
            self.medium.observe(packet, False, err.reason)
            return
        self.delivered += 1
        self._record(packet, TrafficEventKind.DELIVERED)
        self.medium.observe(packet, True)
        if to_bs:
            self.readings_at_bs += payload.count
            self.delay_sum += payload.count * (self.now - payload.max_delay_origin)
            return
        if not self.aggregating:
            self.schedule(
                self.now + self.protocol.processing_ms,
                EventKind.NODE_FLUSH,
                Flush(node=receiver.id, round=self.round_index, payload=payload),
            )
        elif not receiver.awaiting and not receiver.flushed:
            self.schedule(
                self.now + self.protocol.processing_ms,
                EventKind.NODE_FLUSH,
                Flush(node=receiver.id, round=self.round_index),
            )

    # ---- phase 3 ----

    def _start_handshake(self, head: int, attempt: int) -> None:
        registration = self.authority.ensure_registered(node_identity(head))
        session_id = self.authority.new_session_id()
        try:
            initiator = handshake_msg1(
                registration,
                self.auth_rng,
                self.now,
                self.authority.curve,
                self.authority.freshness.window,
            )
        except AegisnetError as err:
            self._auth(session_id, "m1", Verdict.REJECTED, err.reason)
            return
        self.handshakes[head] = HandshakeAttempt(head, session_id, initiator, attempt)
        self._auth(session_id, "m1", Verdict.PENDING)
        self._send_control(head, BASE_STATION_ID, "m1", initiator.m1, session_id)
        self.schedule(
            self.now + 3 * self.protocol.hop_ms + 1, EventKind.HANDSHAKE_TIMEOUT, (head, session_id)
        )

    def _send_control(self, src: int, dst: int, name: str, message: BaseModel, session_id: int) -> None:
        head = dst if src == BASE_STATION_ID else src
        cost = tx_energy(
            self.config.energy, self.protocol.control_bits, self._link_distance(src, dst)
        )
        self.charge(src, cost, "control_tx")
        self.bytes_tx += self.protocol.control_bits // 8
        carried = self.medium.carry_message(name, message)
        if carried is None:
            return
        self.schedule(
            self.now + self.protocol.hop_ms,
            EventKind.HANDSHAKE_MSG,
            (head, session_id, name, carried),
        )

    def _on_handshake_msg(self, event: Event) -> None:
        head, session_id, name, message = event.payload
        attempt = self.handshakes.get(head)
        if attempt is None or attempt.session_id != session_id or not self.nodes[head].alive:
            return
        try:
            if name == "m1":
                server = handshake_msg2(self.authority, message, self.auth_rng, self.now, session_id)
                self.medium.observe(message, True)
                self._auth(session_id, "m2", Verdict.PENDING)
                self._send_control(BASE_STATION_ID, head, "m2", server.m2, session_id)
            elif name == "m2":
                self.charge(head, rx_energy(self.config.energy, self.protocol.control_bits), "control_rx")
                m3 = handshake_finalize(attempt.initiator, message, self.now)
                self.medium.observe(message, True)
                self._send_control(head, BASE_STATION_ID, "m3", m3, session_id)
            else:
                key = confirm(self.authority, session_id, message, self.now)
                self.medium.observe(message, True)
                # The head keeps its aggregate until the base station has confirmed
                for node_id in (BASE_STATION_ID, head):
                    self.agents[node_id].ring.put(
                        initial_state((BASE_STATION_ID, head), key, self.protocol.window)
                    )
                attempt.confirmed = True
                self._auth(session_id, "m3", Verdict.ACCEPTED)
                for payload in self.pending_uplink.pop(head, []):
                    self._send_up(self.agents[head], payload)
        except AegisnetError as err:
            self.authority.pending.pop(session_id, None)
            self.medium.observe(message, False, err.reason)
            self._auth(session_id, name, Verdict.REJECTED, err.reason)
            self.log.warning(
                "Handshake %d of head %d rejected at %s: %s", session_id, head, name, err.reason
            )

    def _on_handshake_timeout(self, event: Event) -> None:
        head, session_id = event.payload
        attempt = self.handshakes.get(head)
        if attempt is None or attempt.session_id != session_id or attempt.confirmed:
            return
        self.agents[head].ring.discard((BASE_STATION_ID, head))
        del self.handshakes[head]
        if not self.nodes[head].alive:
            return
        if attempt.attempt >= self.protocol.max_handshake_attempts:
            self.log.warning("Head %d gave up after %d handshake attempts", head, attempt.attempt)
            return
        self._start_handshake(head, attempt.attempt + 1)

    # ---- adversary ----

    def _on_injection(self, event: Event) -> None:
        injection: Injection = event.payload
        item = injection.item
        if item is None:
            item = self.medium.forge(injection.spec_index, self.now)
        try:
            if isinstance(item, DataPacket):
                if item.dst not in self.agents or not self.agents[item.dst].state.alive:
                    self.medium.report(injection, False, "MessageDropped")
                    return
                try:
                    self._receive(item, aggregate=self.aggregating and item.dst != BASE_STATION_ID)
                except AegisnetError as err:
                    self._record(item, rejection_event(err))
                    raise
            elif isinstance(item, Msg1):
                handshake_msg2(self.authority, item, self.attack_rng, self.now)
            else:
                raise ValueError(f"Cannot inject {type(item).__name__}")
        except AegisnetError as err:
            self.medium.report(injection, False, err.reason)
            return
        self.log.warning("Injected %s accepted at t=%d", type(item).__name__, self.now)
        self.medium.report(injection, True)

    # ---- metrics ----

    def metrics_snapshot(self) -> MetricsRecord:
        return MetricsRecord(
            round=self.round_index,
            alive=self.alive_count(),
            total_energy=self.total_energy(),
            sent=self.sent,
            delivered=self.delivered,
            pdr=ratio(self.delivered, self.sent),
            mean_delay=ratio(self.delay_sum, self.readings_at_bs),
            bytes_tx=self.bytes_tx,
            attack_attempts=self.medium.round_attempts,
            attack_accepted=self.medium.round_accepted,
        )

    def _on_metric_snapshot(self, event: Event) -> None:
        record = self.metrics_snapshot()
        self.records.append(record)
        self._round_readings.append((self.readings_at_bs, self.delay_sum))
        self.log.debug("Round %d: %s", record.round, record.row())
        next_round = self.round_index + 1
        if next_round >= self.config.run.rounds or not self.alive_sensors():
            self.finished = True
            return
        start = self._next_round_time()
        if next_round % self.config.network.recluster_every == 0:
            self._request_rebuild(start)
        self.schedule(start, EventKind.ROUND_START, next_round)

    def summary(self) -> MetricsRecord:
        sent = sum(record.sent for record in self.records)
        delivered = sum(record.delivered for record in self.records)
        readings = sum(count for count, _ in self._round_readings)
        delay = sum(total for _, total in self._round_readings)
        return MetricsRecord(
            round=SUMMARY_ROUND,
            alive=self.alive_count(),
            total_energy=self.total_energy(),
            sent=sent,
            delivered=delivered,
            pdr=ratio(delivered, sent),
            mean_delay=ratio(delay, readings),
            bytes_tx=self.bytes_tx,
            attack_attempts=sum(record.attack_attempts for record in self.records),
            attack_accepted=sum(record.attack_accepted for record in self.records),
        )

    def metrics_rows(self) -> List[List[str]]:
        return [METRICS_HEADER] + [record.row() for record in self.records] + [self.summary().row()]

    def trace_lines(self) -> List[str]:
        return [TRACE_HEADER] + [event.line() for event in self.trace]

    def auth_log_lines(self) -> List[str]:
        return [AUTH_LOG_HEADER] + [entry.line() for entry in self.auth_log]


def run(
    config: ScenarioConfig, seed: int, medium: Optional[Medium] = None
) -> Tuple[List[MetricsRecord], Simulation]:
    """Run a scenario to completion; returns the per-round records and the final state"""
    simulation = Simulation(config, seed, medium=medium)
    records = simulation.run()
    return records, simulation


def flexibility_sweep(
    config: ScenarioConfig, seed: int, intensities: Iterable[float]
) -> List[Tuple[float, Optional[float]]]:
    """Overall PDR as in-flight tamper probability on data packets grows"""
    curve = []
    for intensity in intensities:
        attack = AttackSpec(kind=AttackKind.TAMPER, target="data", intensity=intensity)
        scenario = config.copy(update={"attack": list(config.attack) + [attack]})
        _, simulation = run(scenario, seed)
        curve.append((intensity, simulation.summary().pdr))
        LOGGER.info("Tamper intensity %.3f: pdr %s", intensity, curve[-1][1])
    return curve
