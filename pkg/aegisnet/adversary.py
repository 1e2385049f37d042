"""
Dolev-Yao style attacker over the simulated medium.

The standalone attack functions take recorded traffic and a victim callable
that raises an AegisnetError when it rejects an item. `Adversary` wires the
same attacks into a running simulation: it sits on the medium, records what
it sees, drops or tampers in flight, and injects replays and forgeries at the
rounds its specs are scheduled for.
"""
import itertools
import logging
from collections import Counter
from enum import Enum, unique
from typing import (
    Any,
    Callable,
    Dict,
    Iterator,
    List,
    Optional,
    Sequence,
    Set,
    Tuple,
    TYPE_CHECKING,
    Union,
)

from numpy.random import Generator
from pydantic import BaseModel, root_validator
from toolz.itertoolz import groupby

from .aggregation import DataPacket, decrypt_hop
from .auth import (
    AuthTranscript,
    BaseStationAuthority,
    Msg1,
    Msg2,
    Msg3,
    Registration,
    Verdict,
    handshake_msg2,
    pseudonym,
    run_handshake,
)
from .crypto import (
    INFINITY,
    TAG_SIZE,
    CurveParams,
    SymmetricKey,
    ec_point_add,
    ec_scalar_mul,
    encode_point,
    mac_tag,
    u64,
)
from .exceptions import AegisnetError, EpochOutOfWindow, LinkFlagged, TagInvalid
from .keys import Link, LinkKeyState, ratchet
from .log import LoggingMixin

if TYPE_CHECKING:
    from .simulator import Simulation

LOGGER = logging.getLogger(__name__)

# Furthest an eavesdropper fast-forwards a stolen chain to test one packet
MAX_TRACKED_GAP = 4096

HandshakeMessage = Union[Msg1, Msg2, Msg3]
Victim = Callable[[Any], Any]


@unique
class AttackKind(Enum):
    REPLAY = "replay"
    IMPERSONATE = "impersonate"
    COMPROMISE_LINK = "compromise_link"
    DROP = "drop"
    TAMPER = "tamper"


class AttackSpec(BaseModel):
    """
    target selectors: "*" (anything), "link:P-C", "link:random", "node:N",
    "data" (data packets only), "handshake" or "handshake:m1|m2|m3".
    intensity: replay and impersonate take an attempt count (replay with no
    intensity re-sends every selected item once); drop takes a burst length
    when >= 1 and a per-item probability below 1; tamper takes a probability.
    """

    kind: AttackKind
    target: str = "*"
    # Rounds the attack fires in; empty means every round
    rounds: List[int] = []
    intensity: Optional[float] = None

    class Config:
        extra = "forbid"

    @root_validator(skip_on_failure=True)
    def check_intensity(cls, values: Dict) -> Dict:
        intensity = values.get("intensity")
        if intensity is not None and intensity < 0:
            raise ValueError("intensity must be >= 0")
        if values["kind"] is AttackKind.TAMPER and intensity is not None and intensity > 1:
            raise ValueError("tamper intensity is a probability and must be <= 1")
        parse_target(values.get("target", "*"))
        return values

    def fires_in(self, round_index: int) -> bool:
        return not self.rounds or round_index in self.rounds


class AttackOutcome(BaseModel):
    kind: AttackKind
    attempts: int = 0
    accepted_by_victim: int = 0
    plaintexts_recovered: int = 0
    links_affected: Set[Link] = set()
    recovered_per_link: Dict[Link, int] = {}
    rejections: Dict[str, int] = {}
    dropped: int = 0
    links_flagged: Set[Link] = set()
    retries_accepted: int = 0

    def tally(self, accepted: bool, reason: Optional[str] = None) -> None:
        self.attempts += 1
        if accepted:
            self.accepted_by_victim += 1
        elif reason:
            self.rejections[reason] = self.rejections.get(reason, 0) + 1

    def recovered(self, link: Link) -> None:
        self.plaintexts_recovered += 1
        self.recovered_per_link[link] = self.recovered_per_link.get(link, 0) + 1
        self.links_affected.add(link)


def parse_target(target: str) -> Tuple[str, Any]:
    if target in ("*", "", "data", "handshake"):
        return (target or "*", None)
    kind, _, value = target.partition(":")
    if kind == "link":
        if value == "random":
            return ("link", "random")
        parent, _, child = value.partition("-")
        return ("link", (int(parent), int(child)))
    if kind == "node":
        return ("node", int(value))
    if kind == "handshake" and value in ("m1", "m2", "m3"):
        return ("handshake", value)
    raise ValueError(f"Unknown attack target {target!r}")


def matches(target: Tuple[str, Any], item: Any, name: Optional[str] = None) -> bool:
    kind, value = target
    if kind == "*":
        return True
    if isinstance(item, DataPacket):
        if kind == "data":
            return True
        if kind == "link":
            return value == "random" or item.link == tuple(value)
        if kind == "node":
            return value in (item.src, item.dst)
        return False
    if kind == "handshake":
        return value is None or value == name
    return False


def _message_name(item: Any) -> Optional[str]:
    return {Msg1: "m1", Msg2: "m2", Msg3: "m3"}.get(type(item))


def _attempt(outcome: AttackOutcome, victim: Victim, item: Any) -> None:
    try:
        victim(item)
    except AegisnetError as err:
        outcome.tally(False, err.reason)
        return
    outcome.tally(True)


def replay_attack(
    trace: Sequence[Any], spec: AttackSpec, victim: Victim
) -> AttackOutcome:
    """Re-inject recorded packets or handshake messages verbatim"""
    target = parse_target(spec.target)
    selected = [item for item in trace if matches(target, item, _message_name(item))]
    outcome = AttackOutcome(kind=AttackKind.REPLAY)
    if not selected:
        return outcome
    count = len(selected) if spec.intensity is None else int(spec.intensity)
    for item in itertools.islice(itertools.cycle(selected), count):
        _attempt(outcome, victim, item)
    LOGGER.debug("Replay: %d attempts, %d accepted", outcome.attempts, outcome.accepted_by_victim)
    return outcome


def forge_msg1(
    curve: CurveParams,
    rng: Generator,
    clock: int,
    identity: Optional[bytes] = None,
    token: Optional[bytes] = None,
) -> Msg1:
    """
    An m1 built without the victim's token: a random tag, or a proper tag
    under a guessed or revoked token. Knowing the identity lets the forger
    produce the right pseudonym.
    """
    aid = pseudonym(identity, clock) if identity else rng.bytes(16)
    scalar = int(rng.integers(1, min(curve.n, 2 ** 62)))
    r1 = ec_scalar_mul(curve, scalar, curve.g)
    if token is None:
        tag = rng.bytes(TAG_SIZE)
    else:
        tag = mac_tag(SymmetricKey(key=token), aid + encode_point(curve, r1) + u64(clock))
    return Msg1(aid=aid, r1=r1, t1=clock, tag1=tag)


def impersonation_attack(
    spec: AttackSpec,
    rng: Generator,
    bs: BaseStationAuthority,
    clock: int,
    identity: Optional[bytes] = None,
    token: Optional[bytes] = None,
    captured: Optional[Msg1] = None,
) -> AttackOutcome:
    """
    Present forged m1 messages to the base station; each gets its own
    timestamp so freshness alone never explains a rejection. A captured m1
    is re-presented as-is instead.
    """
    outcome = AttackOutcome(kind=AttackKind.IMPERSONATE)
    count = 1 if spec.intensity is None else int(spec.intensity)
    for attempt in range(count):
        now = clock + attempt
        m1 = captured if captured else forge_msg1(bs.curve, rng, now, identity, token)
        _attempt(outcome, lambda message: handshake_msg2(bs, message, rng, now), m1)
    return outcome


class StolenChain(object):
    """An eavesdropper's copy of a compromised link's key schedule"""

    def __init__(self, state: LinkKeyState) -> None:
        # Epoch-ordered states from the stolen one onward, extended on demand
        self.states = [state.copy(update={"flagged": False})]

    @property
    def link(self) -> Link:
        return self.states[0].link

    @property
    def base_epoch(self) -> int:
        return self.states[0].send_epoch

    def state_at(self, epoch: int) -> Optional[LinkKeyState]:
        gap = epoch - self.base_epoch
        if gap < 0 or gap > MAX_TRACKED_GAP:
            return None
        while len(self.states) <= gap:
            self.states.append(ratchet(self.states[-1]))
        return self.states[gap]

    def try_recover(self, packet: DataPacket) -> bool:
        candidate = self.state_at(packet.epoch)
        if candidate is None:
            return False
        try:
            decrypt_hop(packet, candidate)
        except TagInvalid:
            return False
        return True


def compromise_link(
    state: LinkKeyState, traffic: Sequence[DataPacket], spec: Optional[AttackSpec] = None
) -> AttackOutcome:
    """Try the stolen key chain against every packet observed afterwards"""
    chain = StolenChain(state)
    outcome = AttackOutcome(kind=AttackKind.COMPROMISE_LINK)
    for packet in traffic:
        outcome.attempts += 1
        if chain.try_recover(packet):
            outcome.recovered(packet.link)
    return outcome


def _should_drop(spec: AttackSpec, rng: Optional[Generator], dropped_so_far: int) -> bool:
    intensity = 1.0 if spec.intensity is None else spec.intensity
    if intensity >= 1:
        return dropped_so_far < int(intensity)
    return rng is not None and rng.random() < intensity


def drop_attack(
    spec: AttackSpec,
    packets: Sequence[DataPacket],
    victim: Victim,
    rng: Optional[Generator] = None,
) -> AttackOutcome:
    """
    Silently discard selected packets from an ordered stream and deliver the
    rest; links on which a later packet falls out of the epoch window are
    reported as flagged.
    """
    target = parse_target(spec.target)
    outcome = AttackOutcome(kind=AttackKind.DROP)
    for packet in packets:
        selected = matches(target, packet)
        if selected and _should_drop(spec, rng, outcome.dropped):
            outcome.dropped += 1
            outcome.links_affected.add(packet.link)
            continue
        try:
            victim(packet)
        except (EpochOutOfWindow, LinkFlagged) as err:
            outcome.tally(False, err.reason)
            outcome.links_flagged.add(packet.link)
            continue
        except AegisnetError as err:
            outcome.tally(False, err.reason)
            continue
        outcome.tally(True)
    return outcome


def handshake_drop_attack(
    spec: AttackSpec,
    bs: BaseStationAuthority,
    registration: Registration,
    rng: Generator,
    clock: int,
    latency_ms: int = 0,
) -> AttackOutcome:
    """Drop one handshake message, then retry the handshake straight away"""
    _, message = parse_target(spec.target)
    outcome = AttackOutcome(kind=AttackKind.DROP)

    def channel(name: str, item: BaseModel) -> Optional[BaseModel]:
        if message in (None, name) and outcome.dropped == 0:
            outcome.dropped += 1
            return None
        return item

    first = run_handshake(bs, registration, rng, clock, channel=channel, latency_ms=latency_ms)
    outcome.tally(first.verdict is Verdict.ACCEPTED, first.reason)
    retry = run_handshake(
        bs, registration, rng, clock + 3 * latency_ms + 1, latency_ms=latency_ms
    )
    if retry.verdict is Verdict.ACCEPTED:
        outcome.retries_accepted += 1
    return outcome


def flip_bit(data: bytes, bit: int) -> bytes:
    flipped = bytearray(data)
    flipped[bit // 8] ^= 1 << (bit % 8)
    return bytes(flipped)


def tamper_packet(packet: DataPacket, rng: Generator) -> DataPacket:
    """Flip one random bit of the body or tag"""
    protected = packet.body + packet.tag
    changed = flip_bit(protected, int(rng.integers(0, len(protected) * 8)))
    return packet.copy(
        update={"body": changed[: len(packet.body)], "tag": changed[len(packet.body) :]}
    )


def _tampered_point(curve: CurveParams, point: Any) -> Any:
    if point is INFINITY:
        return curve.g
    return ec_point_add(curve, point, curve.g)


def field_tampers(message: BaseModel, curve: CurveParams) -> Iterator[Tuple[str, BaseModel]]:
    """One modified copy of the message per field"""
    for field, value in message.dict().items():
        if isinstance(value, bytes):
            changed: Any = flip_bit(value, 0) if value else b"\x00"
        elif isinstance(value, int):
            changed = value ^ 1
        else:
            changed = _tampered_point(curve, getattr(message, field))
        yield field, message.copy(update={field: changed})


def tamper_message(message: BaseModel, curve: CurveParams, rng: Generator) -> BaseModel:
    variants = list(field_tampers(message, curve))
    return variants[int(rng.integers(0, len(variants)))][1]


def tamper_attack(
    spec: AttackSpec,
    rng: Generator,
    items: Sequence[Any],
    victim: Victim,
    curve: Optional[CurveParams] = None,
) -> AttackOutcome:
    """Modify selected in-flight items with probability spec.intensity"""
    target = parse_target(spec.target)
    probability = 1.0 if spec.intensity is None else spec.intensity
    outcome = AttackOutcome(kind=AttackKind.TAMPER)
    for item in items:
        if not matches(target, item, _message_name(item)) or rng.random() >= probability:
            continue
        if isinstance(item, DataPacket):
            modified = tamper_packet(item, rng)
            outcome.links_affected.add(item.link)
        else:
            modified = tamper_message(item, curve, rng)
        _attempt(outcome, victim, modified)
    return outcome


def handshake_tamper_sweep(
    bs: BaseStationAuthority,
    registration: Registration,
    rng: Generator,
    clock: int,
    latency_ms: int = 0,
) -> Tuple[AttackOutcome, List[AuthTranscript]]:
    """Run one handshake per (message, field), tampering exactly that field"""
    outcome = AttackOutcome(kind=AttackKind.TAMPER)
    transcripts = []
    plan = [("m1", Msg1), ("m2", Msg2), ("m3", Msg3)]
    now = clock
    for name, model in plan:
        for field in model.__fields__:

            def channel(msg_name: str, item: BaseModel, name=name, field=field) -> BaseModel:
                if msg_name != name:
                    return item
                return dict(field_tampers(item, bs.curve))[field]

            transcript = run_handshake(
                bs, registration, rng, now, channel=channel, latency_ms=latency_ms
            )
            outcome.tally(transcript.verdict is Verdict.ACCEPTED, transcript.reason)
            transcripts.append(transcript)
            now += 3 * latency_ms + 1
    return outcome, transcripts


class Medium(object):
    """The honest radio medium: every hook passes traffic through untouched"""

    round_attempts = 0
    round_accepted = 0

    def begin_round(self, sim: "Simulation", round_index: int) -> List["Injection"]:
        return []

    def carry_packet(self, packet: DataPacket) -> Optional[DataPacket]:
        return packet

    def carry_message(self, name: str, message: BaseModel) -> Optional[BaseModel]:
        return message

    def observe(self, item: Any, accepted: bool, reason: Optional[str] = None) -> None:
        pass

    def report(self, injection: "Injection", accepted: bool, reason: Optional[str] = None) -> None:
        pass


class Injection(BaseModel):
    delay_ms: int
    item: Any
    spec_index: int


class Adversary(Medium, LoggingMixin):
    """
    In-path attacker plugged into a Simulation as its medium. With no specs
    every hook is a pass-through and the run is identical to an honest one.
    """

    def __init__(self, specs: Sequence[AttackSpec], rng: Generator) -> None:
        self.specs = list(specs)
        self.rng = rng
        self.targets = [parse_target(spec.target) for spec in self.specs]
        self.outcomes = [AttackOutcome(kind=spec.kind) for spec in self.specs]
        self.recorded_packets: List[DataPacket] = []
        self.recorded_messages: List[Tuple[str, BaseModel]] = []
        self.chains: Dict[int, StolenChain] = {}
        self.round_index = -1
        self.round_attempts = 0
        self.round_accepted = 0
        self._burst_dropped: Dict[int, int] = {}
        self._in_flight: Dict[int, Tuple[Any, int]] = {}
        self._curve: Optional[CurveParams] = None

    def _active(self, kind: AttackKind) -> Iterator[Tuple[int, AttackSpec]]:
        for index, spec in enumerate(self.specs):
            if spec.kind is kind and spec.fires_in(self.round_index):
                yield index, spec

    def _tally(self, index: int, accepted: bool, reason: Optional[str] = None) -> None:
        self.outcomes[index].tally(accepted, reason)
        self.round_attempts += 1
        if accepted:
            self.round_accepted += 1

    def begin_round(self, sim: "Simulation", round_index: int) -> List[Injection]:
        self.round_index = round_index
        self.round_attempts = 0
        self.round_accepted = 0
        self._burst_dropped = {}
        self._in_flight = {}
        self._curve = sim.authority.curve
        injections: List[Injection] = []
        for index, spec in self._active(AttackKind.COMPROMISE_LINK):
            self._steal_link(sim, index)
        for index, spec in self._active(AttackKind.REPLAY):
            injections.extend(self._replays(index, spec))
        for index, spec in self._active(AttackKind.IMPERSONATE):
            count = 1 if spec.intensity is None else int(spec.intensity)
            for attempt in range(count):
                injections.append(Injection(delay_ms=attempt, item=None, spec_index=index))
        return injections

    def _steal_link(self, sim: "Simulation", index: int) -> None:
        if index in self.chains:
            return
        kind, value = self.targets[index]
        edges = sorted((parent, child) for _, parent, child in sim.topology.edges())
        if not edges:
            self.log.info("No link to compromise in round %d", self.round_index)
            return
        if kind == "link" and value != "random":
            link = tuple(value)
            if link not in edges:
                self.log.info("Link %s does not exist; compromise is a no-op", link)
                return
        else:
            link = edges[int(self.rng.integers(0, len(edges)))]
        self.chains[index] = StolenChain(sim.agents[link[1]].ring.get(link))
        self.log.info("Compromised link %s in round %d", link, self.round_index)

    def _replays(self, index: int, spec: AttackSpec) -> List[Injection]:
        target = self.targets[index]
        pool: List[Any] = [
            packet for packet in self.recorded_packets if matches(target, packet)
        ]
        pool += [
            message
            for name, message in self.recorded_messages
            if name == "m1" and matches(target, message, name)
        ]
        if not pool:
            return []
        count = len(pool) if spec.intensity is None else int(spec.intensity)
        return [
            Injection(delay_ms=0, item=item, spec_index=index)
            for item in itertools.islice(itertools.cycle(pool), count)
        ]

    def forge(self, index: int, now: int) -> Msg1:
        return forge_msg1(self._curve, self.rng, now)

    def carry_packet(self, packet: DataPacket) -> Optional[DataPacket]:
        for index, chain in self.chains.items():
            if chain.try_recover(packet):
                self.outcomes[index].recovered(packet.link)
        for index, spec in self._active(AttackKind.DROP):
            if not matches(self.targets[index], packet):
                continue
            dropped = self._burst_dropped.get(index, 0)
            if _should_drop(spec, self.rng, dropped):
                self._burst_dropped[index] = dropped + 1
                self.outcomes[index].dropped += 1
                self.outcomes[index].links_affected.add(packet.link)
                return None
        self.recorded_packets.append(packet)
        for index, spec in self._active(AttackKind.TAMPER):
            probability = 1.0 if spec.intensity is None else spec.intensity
            if matches(self.targets[index], packet) and self.rng.random() < probability:
                packet = tamper_packet(packet, self.rng)
                self.outcomes[index].links_affected.add(packet.link)
                self._in_flight[id(packet)] = (packet, index)
        return packet

    def carry_message(self, name: str, message: BaseModel) -> Optional[BaseModel]:
        for index, spec in self._active(AttackKind.DROP):
            if not matches(self.targets[index], message, name):
                continue
            dropped = self._burst_dropped.get(index, 0)
            if _should_drop(spec, self.rng, dropped):
                self._burst_dropped[index] = dropped + 1
                self.outcomes[index].dropped += 1
                return None
        self.recorded_messages.append((name, message))
        for index, spec in self._active(AttackKind.TAMPER):
            probability = 1.0 if spec.intensity is None else spec.intensity
            if matches(self.targets[index], message, name) and self.rng.random() < probability:
                message = tamper_message(message, self._curve, self.rng)
                self._in_flight[id(message)] = (message, index)
        return message

    def observe(self, item: Any, accepted: bool, reason: Optional[str] = None) -> None:
        """Victim verdict on an item that went through the medium"""
        tracked = self._in_flight.pop(id(item), None)
        if tracked is not None and tracked[0] is item:
            self._tally(tracked[1], accepted, reason)
        if not accepted and reason in ("EpochOutOfWindow", "LinkFlagged") and isinstance(
            item, DataPacket
        ):
            for spec_index, spec in enumerate(self.specs):
                if spec.kind is AttackKind.DROP and item.link in self.outcomes[spec_index].links_affected:
                    self.outcomes[spec_index].links_flagged.add(item.link)

    def report(self, injection: Injection, accepted: bool, reason: Optional[str] = None) -> None:
        """Victim verdict on an injected replay or forgery"""
        self._tally(injection.spec_index, accepted, reason)

    def summary(self) -> Dict[str, Dict[str, int]]:
        by_kind = groupby(lambda outcome: outcome.kind.value, self.outcomes)
        return {
            kind: {
                "attempts": sum(outcome.attempts for outcome in outcomes),
                "accepted": sum(outcome.accepted_by_victim for outcome in outcomes),
                "recovered": sum(outcome.plaintexts_recovered for outcome in outcomes),
            }
            for kind, outcomes in by_kind.items()
        }

    def rejection_histogram(self) -> Counter:
        histogram: Counter = Counter()
        for outcome in self.outcomes:
            histogram.update(outcome.rejections)
        return histogram
