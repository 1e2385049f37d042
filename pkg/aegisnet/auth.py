"""
Phase 3: ECC-based mutual authentication between a cluster head and the
base station.

A head registers once and shares a token X with the base station. Each
session runs three messages:

    m1  head -> BS   AID = H(id || t1), R1 = r1*G, t1, tag1 = MAC_X(AID || R1 || t1)
    m2  BS -> head   R2 = r2*G, t2, tag2 = MAC_X(R2 || R1 || t2)
    m3  head -> BS   tag3 = MAC_SK("confirm" || t1 || t2)

with SK = H(x(r1*r2*G) || AID || t1 || t2). The base station accepts after
tag1 and tag3 verify, the head after tag2 verifies.
"""
import hashlib
import logging
from enum import Enum, unique
from typing import Callable, Dict, List, Optional, Set, Tuple

from numpy.random import Generator
from pydantic import BaseModel

from .crypto import (
    INFINITY,
    TOY_CURVE,
    CurveParams,
    CurvePoint,
    SymmetricKey,
    digest16,
    ec_scalar_mul,
    encode_point,
    is_on_curve,
    kdf,
    mac_tag,
    u64,
    verify_tag,
)
from .exceptions import (
    AegisnetError,
    DuplicateIdentity,
    MessageDropped,
    RegistrationRevoked,
    ReplayDetected,
    StaleTimestamp,
    TagInvalid,
    UnknownIdentity,
    UnknownSession,
)
from .log import LoggingMixin

LOGGER = logging.getLogger(__name__)

DEFAULT_FRESHNESS_MS = 500
REGISTRATION_LABEL = b"reg"
CONFIRM_LABEL = b"confirm"


@unique
class RegistrationStatus(Enum):
    ACTIVE = "active"
    REVOKED = "revoked"


@unique
class Verdict(Enum):
    PENDING = "pending"
    ACCEPTED = "accepted"
    REJECTED = "rejected"


class Registration(BaseModel):
    identity: bytes
    token: bytes
    status: RegistrationStatus = RegistrationStatus.ACTIVE

    @property
    def active(self) -> bool:
        return self.status is RegistrationStatus.ACTIVE


class Msg1(BaseModel):
    aid: bytes
    r1: CurvePoint
    t1: int
    tag1: bytes


class Msg2(BaseModel):
    r2: CurvePoint
    t2: int
    tag2: bytes


class Msg3(BaseModel):
    tag3: bytes


class FreshnessState(BaseModel):
    clock: int = 0
    window: int = DEFAULT_FRESHNESS_MS
    replay_cache: Set[Tuple[bytes, int]] = set()

    def evict(self, now: int) -> None:
        self.clock = now
        self.replay_cache = {
            (aid, t1) for aid, t1 in self.replay_cache if now - t1 <= self.window
        }

    def check(self, aid: bytes, t1: int, now: int) -> None:
        self.evict(now)
        if abs(now - t1) > self.window:
            raise StaleTimestamp(f"Timestamp {t1} outside {self.window} ms of {now}")
        if (aid, t1) in self.replay_cache:
            raise ReplayDetected(f"Pseudonym {aid.hex()} already used at {t1}")

    def remember(self, aid: bytes, t1: int) -> None:
        self.replay_cache.add((aid, t1))


class InitiatorSession(BaseModel):
    """Cluster-head side of one handshake; r1 never leaves this object"""

    registration: Registration
    curve: CurveParams = TOY_CURVE
    window: int = DEFAULT_FRESHNESS_MS
    r1: int
    m1: Msg1
    session_key: Optional[bytes] = None

    def __repr__(self) -> str:
        return f"InitiatorSession(identity={self.registration.identity!r}, t1={self.m1.t1})"


class ServerSession(BaseModel):
    session_id: int
    identity: bytes
    m1: Msg1
    m2: Msg2
    session_key: bytes
    confirmed: bool = False


class AuthTranscript(BaseModel):
    session_id: int = -1
    m1: Optional[Msg1] = None
    m2: Optional[Msg2] = None
    m3: Optional[Msg3] = None
    initiator_key: Optional[bytes] = None
    server_key: Optional[bytes] = None
    verdict: Verdict = Verdict.PENDING
    reason: Optional[str] = None

    @property
    def session_key(self) -> Optional[bytes]:
        if self.verdict is Verdict.ACCEPTED:
            return self.server_key
        return None


class AuthLogEntry(BaseModel):
    time_ms: int
    session_id: int
    msg: str
    verdict: Verdict
    reason: str = ""

    def line(self) -> str:
        return f"{self.time_ms},{self.session_id},{self.msg},{self.verdict.value},{self.reason}"


def identity_counter(identity: bytes) -> int:
    return int.from_bytes(hashlib.sha256(identity).digest()[:8], "big")


def register(
    bs_master: bytes,
    identity: bytes,
    registry: Optional[Dict[bytes, Registration]] = None,
) -> Registration:
    """Derive the head's token from the master secret; store it when given a registry"""
    if registry is not None and identity in registry:
        raise DuplicateIdentity(f"Identity {identity!r} is already registered")
    token = kdf(SymmetricKey(key=bs_master), REGISTRATION_LABEL, identity_counter(identity))
    registration = Registration(identity=identity, token=token)
    if registry is not None:
        registry[identity] = registration
    return registration


def pseudonym(identity: bytes, t1: int) -> bytes:
    return digest16(identity, u64(t1))


def random_scalar(rng: Generator, order: int) -> int:
    """Uniform-ish scalar in [1, order - 1]"""
    size = (order.bit_length() + 7) // 8 + 8
    return int.from_bytes(rng.bytes(size), "big") % (order - 1) + 1


def derive_session_key(
    curve: CurveParams, shared: CurvePoint, aid: bytes, t1: int, t2: int
) -> bytes:
    if shared is INFINITY:
        raise TagInvalid("Degenerate shared point")
    x = shared[0].to_bytes(curve.coordinate_size, "big")
    return digest16(x, aid, u64(t1), u64(t2))


def _msg1_body(curve: CurveParams, m1: Msg1) -> bytes:
    return m1.aid + encode_point(curve, m1.r1) + u64(m1.t1)


def _msg2_body(curve: CurveParams, m2: Msg2, r1: CurvePoint) -> bytes:
    return encode_point(curve, m2.r2) + encode_point(curve, r1) + u64(m2.t2)


def _confirm_body(t1: int, t2: int) -> bytes:
    return CONFIRM_LABEL + u64(t1) + u64(t2)


def _require_point(curve: CurveParams, point: CurvePoint) -> None:
    if point is INFINITY or not is_on_curve(curve, point):
        raise TagInvalid(f"Ephemeral point {point} is not a valid curve point")


class BaseStationAuthority(LoggingMixin):
    """Registry, freshness state and session table held by the base station"""

    def __init__(
        self,
        master: bytes,
        curve: CurveParams = TOY_CURVE,
        freshness_ms: int = DEFAULT_FRESHNESS_MS,
    ) -> None:
        self.master = master
        self.curve = curve
        self.registry: Dict[bytes, Registration] = {}
        self.freshness = FreshnessState(window=freshness_ms)
        self.pending: Dict[int, ServerSession] = {}
        self.sessions: Dict[bytes, bytes] = {}
        self._next_session_id = 0

    def register(self, identity: bytes) -> Registration:
        registration = register(self.master, identity, self.registry)
        self.log.debug("Registered %r", identity)
        return registration

    def ensure_registered(self, identity: bytes) -> Registration:
        if identity in self.registry:
            return self.registry[identity]
        return self.register(identity)

    def revoke(self, identity: bytes) -> None:
        registration = self.registry[identity]
        self.registry[identity] = registration.copy(
            update={"status": RegistrationStatus.REVOKED}
        )
        self.sessions.pop(identity, None)
        self.log.info("Revoked registration of %r", identity)

    def identify(self, aid: bytes, t1: int) -> Registration:
        """Linear search over registered heads for the one owning this pseudonym"""
        revoked = None
        for registration in self.registry.values():
            if pseudonym(registration.identity, t1) != aid:
                continue
            if registration.active:
                return registration
            revoked = registration
        if revoked is not None:
            raise RegistrationRevoked(f"Registration {revoked.identity!r} is revoked")
        raise UnknownIdentity(f"No registered head owns pseudonym {aid.hex()}")

    def new_session_id(self) -> int:
        session_id = self._next_session_id
        self._next_session_id += 1
        return session_id

    def session_key_for(self, identity: bytes) -> bytes:
        try:
            return self.sessions[identity]
        except KeyError:
            raise UnknownSession(f"No confirmed session for {identity!r}")

    def drop_session(self, identity: bytes) -> None:
        self.sessions.pop(identity, None)


def handshake_msg1(
    registration: Registration,
    rng: Generator,
    clock: int,
    curve: CurveParams = TOY_CURVE,
    window: int = DEFAULT_FRESHNESS_MS,
) -> InitiatorSession:
    if not registration.active:
        raise RegistrationRevoked(f"Registration {registration.identity!r} is revoked")
    r1 = random_scalar(rng, curve.n)
    aid = pseudonym(registration.identity, clock)
    m1 = Msg1(aid=aid, r1=ec_scalar_mul(curve, r1, curve.g), t1=clock, tag1=b"")
    m1.tag1 = mac_tag(SymmetricKey(key=registration.token), _msg1_body(curve, m1))
    return InitiatorSession(registration=registration, curve=curve, window=window, r1=r1, m1=m1)


def handshake_msg2(
    bs: BaseStationAuthority,
    m1: Msg1,
    rng: Generator,
    clock: int,
    session_id: Optional[int] = None,
) -> ServerSession:
    curve = bs.curve
    bs.freshness.check(m1.aid, m1.t1, clock)
    registration = bs.identify(m1.aid, m1.t1)
    token = SymmetricKey(key=registration.token)
    if not is_on_curve(curve, m1.r1) or not verify_tag(token, _msg1_body(curve, m1), m1.tag1):
        raise TagInvalid(f"tag1 does not verify for {registration.identity!r}")
    _require_point(curve, m1.r1)
    bs.freshness.remember(m1.aid, m1.t1)

    r2 = random_scalar(rng, curve.n)
    m2 = Msg2(r2=ec_scalar_mul(curve, r2, curve.g), t2=clock, tag2=b"")
    m2.tag2 = mac_tag(token, _msg2_body(curve, m2, m1.r1))
    shared = ec_scalar_mul(curve, r2, m1.r1)
    session = ServerSession(
        session_id=bs.new_session_id() if session_id is None else session_id,
        identity=registration.identity,
        m1=m1,
        m2=m2,
        session_key=derive_session_key(curve, shared, m1.aid, m1.t1, m2.t2),
    )
    bs.pending[session.session_id] = session
    return session


def handshake_finalize(initiator: InitiatorSession, m2: Msg2, clock: int) -> Msg3:
    curve = initiator.curve
    if abs(clock - m2.t2) > initiator.window:
        raise StaleTimestamp(f"t2 {m2.t2} outside {initiator.window} ms of {clock}")
    token = SymmetricKey(key=initiator.registration.token)
    if not is_on_curve(curve, m2.r2) or not verify_tag(
        token, _msg2_body(curve, m2, initiator.m1.r1), m2.tag2
    ):
        raise TagInvalid("tag2 does not verify: base station not authenticated")
    _require_point(curve, m2.r2)
    shared = ec_scalar_mul(curve, initiator.r1, m2.r2)
    session_key = derive_session_key(curve, shared, initiator.m1.aid, initiator.m1.t1, m2.t2)
    initiator.session_key = session_key
    return Msg3(tag3=mac_tag(SymmetricKey(key=session_key), _confirm_body(initiator.m1.t1, m2.t2)))


def confirm(bs: BaseStationAuthority, session_id: int, m3: Msg3, clock: int) -> bytes:
    """Base-station side of m3: completes mutual authentication"""
    session = bs.pending.pop(session_id, None)
    if session is None:
        raise UnknownSession(f"No pending session {session_id}")
    if clock - session.m2.t2 > bs.freshness.window:
        raise StaleTimestamp(f"m3 for session {session_id} arrived too late")
    key = SymmetricKey(key=session.session_key)
    if not verify_tag(key, _confirm_body(session.m1.t1, session.m2.t2), m3.tag3):
        raise TagInvalid(f"tag3 does not verify for session {session_id}")
    session.confirmed = True
    bs.sessions[session.identity] = session.session_key
    return session.session_key


# Adversary hook on the wire: returns the message to deliver, or None to drop
AuthChannel = Callable[[str, BaseModel], Optional[BaseModel]]


def _carry(channel: Optional[AuthChannel], name: str, message: BaseModel) -> BaseModel:
    if channel is None:
        return message
    carried = channel(name, message)
    if carried is None:
        raise MessageDropped(f"{name} lost in transit")
    return carried


def run_handshake(
    bs: BaseStationAuthority,
    registration: Registration,
    rng: Generator,
    clock: int,
    channel: Optional[AuthChannel] = None,
    latency_ms: int = 0,
    log: Optional[List[AuthLogEntry]] = None,
) -> AuthTranscript:
    """Drive one complete session; every failure ends with no key on either side"""
    transcript = AuthTranscript(session_id=bs.new_session_id())
    initiator: Optional[InitiatorSession] = None
    stage, now = "m1", clock

    def record(verdict: Verdict, reason: str = "") -> None:
        if log is not None:
            log.append(
                AuthLogEntry(
                    time_ms=now,
                    session_id=transcript.session_id,
                    msg=stage,
                    verdict=verdict,
                    reason=reason,
                )
            )

    try:
        initiator = handshake_msg1(registration, rng, now, bs.curve, bs.freshness.window)
        transcript.m1 = initiator.m1
        record(Verdict.PENDING)
        m1 = _carry(channel, "m1", initiator.m1)
        now += latency_ms
        server = handshake_msg2(bs, m1, rng, now, session_id=transcript.session_id)
        transcript.m2 = server.m2
        stage = "m2"
        record(Verdict.PENDING)
        m2 = _carry(channel, "m2", server.m2)
        now += latency_ms
        m3 = handshake_finalize(initiator, m2, now)
        transcript.m3 = m3
        stage = "m3"
        m3 = _carry(channel, "m3", m3)
        now += latency_ms
        transcript.server_key = confirm(bs, transcript.session_id, m3, now)
        transcript.initiator_key = initiator.session_key
        transcript.verdict = Verdict.ACCEPTED
        record(Verdict.ACCEPTED)
    except AegisnetError as err:
        bs.pending.pop(transcript.session_id, None)
        if initiator is not None:
            initiator.session_key = None
        transcript.initiator_key = None
        transcript.server_key = None
        transcript.verdict = Verdict.REJECTED
        transcript.reason = err.reason
        record(Verdict.REJECTED, err.reason)
        LOGGER.warning(
            "Handshake %d for %r rejected at %s: %s",
            transcript.session_id,
            registration.identity,
            stage,
            err.reason,
        )
    return transcript
