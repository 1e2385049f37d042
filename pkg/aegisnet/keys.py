"""
Phase-1 link keys and their per-connection ratchet.

Every tree edge (parent, child) gets an independent epoch-0 key at
bootstrap. Each endpoint keeps its own LinkKeyState copy: the sender ratchets
after every transmission, the receiver follows via the epoch carried in the
packet header and ratchets again after every verified delivery so the key
that protected a delivered packet no longer exists anywhere.
"""
import logging
from typing import Dict, Iterator, List, Optional, Tuple, TYPE_CHECKING

from numpy.random import Generator
from pydantic import BaseModel

from .crypto import KEY_SIZE, RATCHET_LABEL, SymmetricKey, kdf
from .exceptions import EpochOutOfWindow, LinkFlagged

if TYPE_CHECKING:
    from .network import ClusterTopology

LOGGER = logging.getLogger(__name__)

DEFAULT_WINDOW = 8

# (parent node id, child node id)
Link = Tuple[int, int]


class LinkKeyState(BaseModel):
    link: Link
    current: SymmetricKey
    send_epoch: int = 0
    recv_window_base: int = 0
    window: int = DEFAULT_WINDOW
    # Set when an epoch beyond the window was observed; the link stays
    # unusable until keys are re-established
    flagged: bool = False

    @property
    def epoch(self) -> int:
        return self.send_epoch

    def describe(self, reveal: bool = False) -> Dict[str, object]:
        return {
            "link": f"{self.link[0]}->{self.link[1]}",
            "epoch": self.send_epoch,
            "recv_window_base": self.recv_window_base,
            "window": self.window,
            "flagged": self.flagged,
            "key": self.current.key.hex() if reveal else "<redacted>",
        }


def initial_state(link: Link, key: bytes, window: int = DEFAULT_WINDOW) -> LinkKeyState:
    return LinkKeyState(link=link, current=SymmetricKey(key=key, epoch=0), window=window)


def ratchet(state: LinkKeyState) -> LinkKeyState:
    """One-way key update; the previous key material is not retained"""
    epoch = state.send_epoch + 1
    key = SymmetricKey(key=kdf(state.current, RATCHET_LABEL, epoch), epoch=epoch)
    return state.copy(update={"current": key, "send_epoch": epoch})


def key_at_epoch(epoch0_key: bytes, epoch: int) -> SymmetricKey:
    """Recompute the epoch-e key from the epoch-0 material"""
    state = initial_state((0, 0), epoch0_key)
    for _ in range(epoch):
        state = ratchet(state)
    return state.current


def resync(state: LinkKeyState, observed_epoch: int) -> LinkKeyState:
    """
    Fast-forward the local chain to the observed epoch if it lies within
    [recv_window_base, recv_window_base + window]. The returned state is a
    candidate: callers commit it only after the packet verifies.
    """
    if state.flagged:
        raise LinkFlagged(f"Link {state.link} is flagged for re-establishment")
    lowest = max(state.recv_window_base, state.send_epoch)
    highest = state.recv_window_base + state.window
    if not lowest <= observed_epoch <= highest:
        raise EpochOutOfWindow(
            f"Epoch {observed_epoch} outside [{lowest}, {highest}] on link {state.link}",
            ahead=observed_epoch > highest,
        )
    synced = state
    while synced.send_epoch < observed_epoch:
        synced = ratchet(synced)
    if synced is state:
        return state
    return synced.copy(update={"recv_window_base": observed_epoch})


def advance_after_delivery(state: LinkKeyState) -> LinkKeyState:
    """Receiver-side ratchet closing a connection"""
    ratcheted = ratchet(state)
    return ratcheted.copy(update={"recv_window_base": ratcheted.send_epoch})


def flag(state: LinkKeyState) -> LinkKeyState:
    return state.copy(update={"flagged": True})


class KeyRing(object):
    """Link key states held by one node, one per incident tree edge"""

    def __init__(self, node_id: int) -> None:
        self.node_id = node_id
        self.links: Dict[Link, LinkKeyState] = {}

    def __contains__(self, link: Link) -> bool:
        return link in self.links

    def __iter__(self) -> Iterator[LinkKeyState]:
        return iter(self.links[link] for link in sorted(self.links))

    def __len__(self) -> int:
        return len(self.links)

    def get(self, link: Link) -> LinkKeyState:
        return self.links[link]

    def put(self, state: LinkKeyState) -> None:
        self.links[state.link] = state

    def discard(self, link: Link) -> None:
        self.links.pop(link, None)

    def link_with(self, neighbour: int) -> Optional[Link]:
        for link in self.links:
            if neighbour in link:
                return link
        return None

    def describe(self, reveal: bool = False) -> List[Dict[str, object]]:
        return [state.describe(reveal=reveal) for state in self]


def establish_link_keys(
    topology: "ClusterTopology", rng: Generator, window: int = DEFAULT_WINDOW
) -> Dict[int, KeyRing]:
    """
    Trusted pre-deployment keying: draw a fresh uniformly random epoch-0 key
    per tree edge and install identical copies at both endpoints.
    """
    rings: Dict[int, KeyRing] = {}
    seen = set()
    for cluster in topology.clusters:
        rings.setdefault(cluster.head, KeyRing(cluster.head))
        for parent, child in cluster.edges:
            key = rng.bytes(KEY_SIZE)
            while key in seen:
                key = rng.bytes(KEY_SIZE)
            seen.add(key)
            for endpoint in (parent, child):
                rings.setdefault(endpoint, KeyRing(endpoint)).put(
                    initial_state((parent, child), key, window=window)
                )
    LOGGER.info(
        "Established %d link keys across %d clusters", len(seen), len(topology.clusters)
    )
    return rings
