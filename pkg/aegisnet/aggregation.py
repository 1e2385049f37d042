"""
Phase 2: hop-by-hop encrypted aggregation inside a cluster.

Every tree edge encrypts under its own ratcheting link key. A relay decrypts
what its children send, folds it into its per-round accumulator together with
its own reading, and flushes the result once toward its parent.
"""
import logging
import struct
from enum import Enum, unique
from typing import Callable, Dict, List, Optional, Set, Tuple, Union

from pydantic import BaseModel, validator

from .crypto import TAG_SIZE, hop_decrypt, hop_encrypt, mac_tag, verify_tag
from .exceptions import (
    AegisnetError,
    EpochOutOfWindow,
    LinkFlagged,
    TagInvalid,
)
from .keys import (
    KeyRing,
    Link,
    LinkKeyState,
    advance_after_delivery,
    flag,
    ratchet,
    resync,
)
from .network import ClusterTopology, NodeState

LOGGER = logging.getLogger(__name__)

PAYLOAD_FORMAT = ">qIQ"
PAYLOAD_SIZE = struct.calcsize(PAYLOAD_FORMAT)
HEADER_FORMAT = ">IIIQQH"
HEADER_SIZE = struct.calcsize(HEADER_FORMAT)


@unique
class AggregationFunction(Enum):
    SUM = "sum"
    MEAN = "mean"
    MAX = "max"


@unique
class TrafficEventKind(Enum):
    SENT = "sent"
    DELIVERED = "delivered"
    TAG_INVALID = "tag_invalid"
    EPOCH_OOW = "epoch_oow"


class AggregatePayload(BaseModel):
    # Running sum for sum/mean, running maximum for max
    value: int
    count: int = 1
    # Earliest generation timestamp (simulated ms) among folded readings
    max_delay_origin: int = 0

    def encode(self) -> bytes:
        return struct.pack(PAYLOAD_FORMAT, self.value, self.count, self.max_delay_origin)

    @classmethod
    def decode(cls, data: bytes) -> "AggregatePayload":
        value, count, origin = struct.unpack(PAYLOAD_FORMAT, data)
        return cls(value=value, count=count, max_delay_origin=origin)

    def result(self, function: AggregationFunction) -> Union[int, float]:
        if function is AggregationFunction.MEAN:
            return self.value / self.count
        return self.value


def fold(
    left: Optional[AggregatePayload],
    right: AggregatePayload,
    function: AggregationFunction = AggregationFunction.SUM,
) -> AggregatePayload:
    if left is None:
        return right
    if function is AggregationFunction.MAX:
        value = max(left.value, right.value)
    else:
        value = left.value + right.value
    return AggregatePayload(
        value=value,
        count=left.count + right.count,
        max_delay_origin=min(left.max_delay_origin, right.max_delay_origin),
    )


class DataPacket(BaseModel):
    src: int
    dst: int
    cluster: int = 0
    epoch: int
    ctr: int
    body: bytes
    tag: bytes

    @validator("tag")
    def check_tag(cls, tag: bytes) -> bytes:
        if len(tag) != TAG_SIZE:
            raise ValueError(f"tag must be {TAG_SIZE} bytes")
        return tag

    @property
    def link(self) -> Link:
        return (self.dst, self.src)

    def header_bytes(self) -> bytes:
        return make_header(self.src, self.dst, self.cluster, self.epoch, self.ctr, len(self.body))

    def to_bytes(self) -> bytes:
        return self.header_bytes() + self.body + self.tag

    @classmethod
    def from_bytes(cls, data: bytes) -> "DataPacket":
        src, dst, cluster, epoch, ctr, length = struct.unpack(
            HEADER_FORMAT, data[:HEADER_SIZE]
        )
        body = data[HEADER_SIZE:-TAG_SIZE]
        if len(body) != length:
            raise TagInvalid(f"Body length {len(body)} does not match header {length}")
        return cls(
            src=src, dst=dst, cluster=cluster, epoch=epoch, ctr=ctr, body=body, tag=data[-TAG_SIZE:]
        )


def make_header(src: int, dst: int, cluster: int, epoch: int, ctr: int, length: int) -> bytes:
    return struct.pack(HEADER_FORMAT, src, dst, cluster, epoch, ctr, length)


class TrafficEvent(BaseModel):
    time_ms: int
    src: int
    dst: int
    epoch: int
    ctr: int
    event: TrafficEventKind

    def line(self) -> str:
        return f"{self.time_ms},{self.src},{self.dst},{self.epoch},{self.ctr},{self.event.value}"

    @classmethod
    def for_packet(cls, time_ms: int, packet: DataPacket, event: TrafficEventKind) -> "TrafficEvent":
        return cls(
            time_ms=time_ms,
            src=packet.src,
            dst=packet.dst,
            epoch=packet.epoch,
            ctr=packet.ctr,
            event=event,
        )


def rejection_event(error: AegisnetError) -> TrafficEventKind:
    if isinstance(error, (EpochOutOfWindow, LinkFlagged)):
        return TrafficEventKind.EPOCH_OOW
    return TrafficEventKind.TAG_INVALID


def encrypt_hop(
    payload: AggregatePayload, key: LinkKeyState, ctr: int, cluster: int = 0
) -> DataPacket:
    """Encrypt toward the parent end of key.link under the key's current epoch"""
    if key.flagged:
        raise LinkFlagged(f"Link {key.link} is flagged for re-establishment")
    parent, child = key.link
    body = hop_encrypt(key.current, ctr, payload.encode())
    header = make_header(child, parent, cluster, key.send_epoch, ctr, len(body))
    return DataPacket(
        src=child,
        dst=parent,
        cluster=cluster,
        epoch=key.send_epoch,
        ctr=ctr,
        body=body,
        tag=mac_tag(key.current, header + body),
    )


def decrypt_hop(packet: DataPacket, key: LinkKeyState) -> AggregatePayload:
    """Verify and decrypt with a key already synchronised to packet.epoch"""
    if key.send_epoch != packet.epoch or not verify_tag(
        key.current, packet.header_bytes() + packet.body, packet.tag
    ):
        raise TagInvalid(f"Tag check failed for packet {packet.src}->{packet.dst} ctr {packet.ctr}")
    if len(packet.body) != PAYLOAD_SIZE:
        raise TagInvalid(f"Unexpected body length {len(packet.body)}")
    return AggregatePayload.decode(hop_decrypt(key.current, packet.ctr, packet.body))


class ClusterNode(object):
    """Runtime protocol state of one node: key ring, counters, accumulator"""

    def __init__(self, state: NodeState, ring: Optional[KeyRing] = None) -> None:
        self.state = state
        self.ring = ring if ring is not None else KeyRing(state.id)
        self.accumulator: Optional[AggregatePayload] = None
        self.counters: Dict[Link, int] = {}
        self.delivered: Set[Tuple[Link, int]] = set()
        self.awaiting: Set[int] = set()
        self.flushed = False

    @property
    def id(self) -> int:
        return self.state.id

    def start_round(self, reading: Optional[int], now: int = 0) -> None:
        self.accumulator = (
            AggregatePayload(value=reading, count=1, max_delay_origin=now)
            if reading is not None
            else None
        )
        self.awaiting = set(self.state.children)
        self.flushed = False


def process_incoming(
    node: ClusterNode,
    packet: DataPacket,
    function: AggregationFunction = AggregationFunction.SUM,
    aggregate: bool = True,
) -> AggregatePayload:
    """
    Resync on the packet epoch, verify, decrypt and (when aggregating) fold
    into the node's accumulator. Both failure modes leave the link state as
    it was, except that an epoch beyond the window flags the link.
    """
    if packet.dst != node.id:
        raise ValueError(f"Packet for {packet.dst} delivered to {node.id}")
    link = packet.link
    if link not in node.ring:
        raise TagInvalid(f"Node {node.id} holds no key for link {link}")
    state = node.ring.get(link)
    try:
        candidate = resync(state, packet.epoch)
    except EpochOutOfWindow as err:
        if err.ahead:
            LOGGER.warning("Flagging link %s for re-establishment: %s", link, err.message)
            node.ring.put(flag(state))
        raise
    payload = decrypt_hop(packet, candidate)
    node.ring.put(advance_after_delivery(candidate))
    node.delivered.add((link, packet.ctr))
    node.awaiting.discard(packet.src)
    if aggregate:
        node.accumulator = fold(node.accumulator, payload, function)
    return payload


def send_hop(
    node: ClusterNode, parent: int, payload: AggregatePayload, cluster: int = 0
) -> DataPacket:
    """Encrypt payload toward parent and ratchet the sender side of the link"""
    link = (parent, node.id)
    state = node.ring.get(link)
    ctr = node.counters.get(link, 0)
    packet = encrypt_hop(payload, state, ctr, cluster=cluster)
    node.counters[link] = ctr + 1
    node.ring.put(ratchet(state))
    return packet


def flush(node: ClusterNode, parent: int, cluster: int = 0) -> Optional[DataPacket]:
    """Send the accumulated aggregate once per round"""
    if node.flushed or node.accumulator is None:
        return None
    node.flushed = True
    return send_hop(node, parent, node.accumulator, cluster=cluster)


class RoundCollection(BaseModel):
    payloads: Dict[int, AggregatePayload] = {}
    trace: List[TrafficEvent] = []
    sent: int = 0
    delivered: int = 0


# Adversary hook: returns the packet to deliver, or None when it is lost
Channel = Callable[[DataPacket], Optional[DataPacket]]


def _deliver(
    receiver: ClusterNode,
    packet: DataPacket,
    channel: Optional[Channel],
    function: AggregationFunction,
    aggregate: bool,
    collection: RoundCollection,
    now: int,
) -> Optional[AggregatePayload]:
    collection.sent += 1
    collection.trace.append(TrafficEvent.for_packet(now, packet, TrafficEventKind.SENT))
    arrived = channel(packet) if channel else packet
    if arrived is None:
        return None
    try:
        payload = process_incoming(receiver, arrived, function, aggregate=aggregate)
    except (TagInvalid, EpochOutOfWindow, LinkFlagged) as err:
        LOGGER.debug("Rejected packet on %s: %s", arrived.link, err.reason)
        collection.trace.append(TrafficEvent.for_packet(now, arrived, rejection_event(err)))
        return None
    collection.delivered += 1
    collection.trace.append(TrafficEvent.for_packet(now, arrived, TrafficEventKind.DELIVERED))
    return payload


def collect_round(
    topology: ClusterTopology,
    nodes: Dict[int, ClusterNode],
    readings: Dict[int, int],
    function: AggregationFunction = AggregationFunction.SUM,
    now: int = 0,
    channel: Optional[Channel] = None,
    store_and_forward: bool = False,
) -> RoundCollection:
    """
    One loss-free-scheduled collection round: post-order flush, one packet
    per reached edge. With store_and_forward every reading travels to the
    head in its own packet, re-encrypted at each hop, and only the head folds.
    """
    collection = RoundCollection()
    for cluster in topology.clusters:
        parents = cluster.parent_map()
        reached = [cluster.head] + [node for node in cluster.post_order() if node != cluster.head]
        for node_id in reached:
            nodes[node_id].start_round(readings.get(node_id), now)
        for node_id in cluster.post_order():
            if node_id == cluster.head:
                continue
            if store_and_forward:
                _forward_reading(
                    node_id, cluster.id, cluster.head, parents, nodes, channel, function, collection, now
                )
                continue
            packet = flush(nodes[node_id], parents[node_id], cluster=cluster.id)
            if packet is not None:
                _deliver(
                    nodes[parents[node_id]], packet, channel, function, True, collection, now
                )
        head = nodes[cluster.head]
        if head.accumulator is not None:
            collection.payloads[cluster.head] = head.accumulator
    return collection


def _forward_reading(
    origin: int,
    cluster_id: int,
    head: int,
    parents: Dict[int, int],
    nodes: Dict[int, ClusterNode],
    channel: Optional[Channel],
    function: AggregationFunction,
    collection: RoundCollection,
    now: int,
) -> None:
    payload = nodes[origin].accumulator
    sender = origin
    while payload is not None and sender != head:
        parent = parents[sender]
        packet = send_hop(nodes[sender], parent, payload, cluster=cluster_id)
        payload = _deliver(
            nodes[parent], packet, channel, function, parent == head, collection, now
        )
        sender = parent
