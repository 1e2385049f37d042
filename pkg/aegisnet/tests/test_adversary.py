import itertools
import os
from collections import Counter

import numpy as np
import pytest
from pydantic import ValidationError

import aegisnet.adversary as adversary
from aegisnet.adversary import Adversary, AttackKind, AttackSpec, Medium
from aegisnet.aggregation import (
    AggregatePayload,
    ClusterNode,
    TrafficEventKind,
    collect_round,
    process_incoming,
    rejection_event,
    send_hop,
)
from aegisnet.auth import (
    BaseStationAuthority,
    Verdict,
    confirm,
    handshake_finalize,
    handshake_msg1,
    handshake_msg2,
    run_handshake,
)
from aegisnet.config import ScenarioConfig, load_config
from aegisnet.crypto import SECP256K1
from aegisnet.exceptions import AegisnetError
from aegisnet.keys import KeyRing, establish_link_keys, initial_state
from aegisnet.network import NodeState, build_aggregation_tree, deploy, elect_cluster_heads
from aegisnet.simulator import Simulation, run

MASTER = bytes(range(16, 32))
HEAD = b"node-3"
KEY = bytes(range(16))
SCENARIOS = f"{os.path.dirname(os.path.abspath(__file__))}/fixtures/scenarios"


def link_pair(window=8):
    nodes = []
    for node_id in (1, 2):
        node = ClusterNode(NodeState(id=node_id, position=(float(node_id), 0.0), energy=0.5))
        node.ring.put(initial_state((1, 2), KEY, window=window))
        nodes.append(node)
    parent, child = nodes
    parent.state.children = {2}
    child.state.parent = 1
    return parent, child


def cluster_network(seed, count=20):
    rng = np.random.default_rng(seed)
    nodes = deploy(count, 50, 50, 0.5, rng)
    heads = elect_cluster_heads(nodes, 2, 0.5)
    topology = build_aggregation_tree(heads, nodes, radio_range=25)
    rings = establish_link_keys(topology, rng)
    agents = {
        node_id: ClusterNode(state, rings.get(node_id, KeyRing(node_id)))
        for node_id, state in nodes.items()
    }
    return topology, agents, rng


def record_rounds(topology, agents, rng, rounds):
    captured = []

    def tap(packet):
        captured.append(packet)
        return packet

    for _ in range(rounds):
        readings = {node_id: int(rng.integers(0, 100)) for node_id in agents if node_id}
        collect_round(topology, agents, readings, channel=tap)
    return captured


@pytest.fixture
def bs():
    authority = BaseStationAuthority(MASTER)
    authority.register(HEAD)
    return authority


@pytest.fixture
def rng():
    return np.random.default_rng(17)


ATTACK_SPEC_TESTS = {
    "negative_intensity": {"kind": "replay", "intensity": -1},
    "tamper_probability_above_one": {"kind": "tamper", "intensity": 1.5},
    "unknown_target": {"kind": "drop", "target": "cluster:3"},
    "unknown_kind": {"kind": "jam"},
    "extra_field": {"kind": "drop", "at": 5},
}


@pytest.mark.parametrize("spec", ATTACK_SPEC_TESTS.values(), ids=list(ATTACK_SPEC_TESTS.keys()))
def test_attack_spec_validation(spec):
    with pytest.raises(ValidationError):
        AttackSpec(**spec)


def test_attack_spec_targets():
    assert adversary.parse_target("link:3-7") == ("link", (3, 7))
    assert adversary.parse_target("node:4") == ("node", 4)
    assert adversary.parse_target("handshake:m2") == ("handshake", "m2")
    assert adversary.parse_target("") == ("*", None)
    assert AttackSpec(kind="drop").fires_in(12)
    assert not AttackSpec(kind="drop", rounds=[1, 2]).fires_in(3)


def test_replayed_data_packets_are_never_accepted():
    parent, child = link_pair()
    recorded = []
    for value in range(40):
        packet = send_hop(child, 1, AggregatePayload(value=value))
        process_incoming(parent, packet)
        recorded.append(packet)
    spec = AttackSpec(kind=AttackKind.REPLAY, target="data")
    outcome = adversary.replay_attack(recorded, spec, lambda packet: process_incoming(parent, packet))
    assert outcome.attempts == 40
    assert outcome.accepted_by_victim == 0
    assert outcome.rejections == {"EpochOutOfWindow": 40}
    assert not parent.ring.get((1, 2)).flagged


def test_replayed_m1_of_accepted_sessions(bs, rng):
    registration = bs.registry[HEAD]
    transcripts = [run_handshake(bs, registration, rng, clock) for clock in range(0, 1000, 10)]
    assert all(transcript.verdict is Verdict.ACCEPTED for transcript in transcripts)
    recorded = [transcript.m1 for transcript in transcripts]
    spec = AttackSpec(kind=AttackKind.REPLAY, target="handshake:m1")

    fresh = adversary.replay_attack(recorded, spec, lambda m1: handshake_msg2(bs, m1, rng, 1000))
    assert fresh.attempts == 100
    assert fresh.accepted_by_victim == 0
    # the last fifty fall inside the freshness window and hit the replay cache
    assert fresh.rejections == {"StaleTimestamp": 50, "ReplayDetected": 50}


def test_replayed_m2_and_m3_of_accepted_sessions(bs, rng):
    registration = bs.registry[HEAD]
    transcripts = [run_handshake(bs, registration, rng, clock) for clock in range(0, 1000, 10)]
    sessions = {transcript.m3.tag3: transcript.session_id for transcript in transcripts}
    recorded = [message for transcript in transcripts for message in (transcript.m2, transcript.m3)]
    clock = itertools.count(5000, 10)

    finished = adversary.replay_attack(
        recorded,
        AttackSpec(kind=AttackKind.REPLAY, target="handshake:m3"),
        lambda m3: confirm(bs, sessions[m3.tag3], m3, 1000),
    )
    assert finished.attempts == 100
    assert finished.rejections == {"UnknownSession": 100}

    def fresh_head(m2):
        now = next(clock)
        return handshake_finalize(handshake_msg1(registration, rng, now), m2, now)

    stale_m2 = adversary.replay_attack(
        recorded, AttackSpec(kind=AttackKind.REPLAY, target="handshake:m2"), fresh_head
    )
    assert stale_m2.rejections == {"StaleTimestamp": 100}

    def fresh_server(m3):
        now = next(clock)
        session = handshake_msg2(bs, handshake_msg1(registration, rng, now).m1, rng, now)
        return confirm(bs, session.session_id, m3, now)

    spliced_m3 = adversary.replay_attack(
        recorded, AttackSpec(kind=AttackKind.REPLAY, target="handshake:m3"), fresh_server
    )
    assert spliced_m3.rejections == {"TagInvalid": 100}
    assert not bs.pending


def test_fresh_m2_spliced_into_another_session(rng):
    # tag2 binds the head's ephemeral point, which cannot repeat on a full-size curve
    bs = BaseStationAuthority(MASTER, curve=SECP256K1)
    registration = bs.register(HEAD)
    recorded = [run_handshake(bs, registration, rng, clock).m2 for clock in range(0, 200, 10)]

    def spliced_head(m2):
        initiator = handshake_msg1(registration, rng, m2.t2, curve=SECP256K1)
        return handshake_finalize(initiator, m2, m2.t2)

    outcome = adversary.replay_attack(
        recorded, AttackSpec(kind=AttackKind.REPLAY, target="handshake:m2"), spliced_head
    )
    assert outcome.attempts == 20
    assert outcome.rejections == {"TagInvalid": 20}


def test_replay_storm_histogram_matches_trace():
    parent, child = link_pair()
    recorded = []
    for value in range(12):
        packet = send_hop(child, 1, AggregatePayload(value=value))
        process_incoming(parent, packet)
        recorded.append(packet)
    for _ in range(20):
        send_hop(child, 1, AggregatePayload(value=0))
    # never delivered and far ahead of the receiver's window
    recorded.append(send_hop(child, 1, AggregatePayload(value=99)))
    trace = []

    def victim(packet):
        try:
            process_incoming(parent, packet)
        except AegisnetError as err:
            trace.append((rejection_event(err), err.reason))
            raise
        trace.append((TrafficEventKind.DELIVERED, ""))

    spec = AttackSpec(kind=AttackKind.REPLAY, target="link:1-2", intensity=100)
    outcome = adversary.replay_attack(recorded, spec, victim)
    assert outcome.attempts == len(trace) == 100
    assert outcome.accepted_by_victim == 0
    assert outcome.rejections == dict(Counter(reason for _, reason in trace))
    assert Counter(event for event, _ in trace) == {TrafficEventKind.EPOCH_OOW: 100}
    # the ahead-of-window packet flags the link and every later replay is refused outright
    assert outcome.rejections == {"EpochOutOfWindow": 13, "LinkFlagged": 87}
    assert parent.ring.get((1, 2)).flagged


def test_replay_with_empty_selection():
    outcome = adversary.replay_attack([], AttackSpec(kind=AttackKind.REPLAY), lambda item: None)
    assert outcome.attempts == 0


def test_random_tag_forgeries_are_rejected(bs, rng):
    spec = AttackSpec(kind=AttackKind.IMPERSONATE, intensity=10_000)
    outcome = adversary.impersonation_attack(spec, rng, bs, clock=0)
    assert outcome.attempts == 10_000
    assert outcome.accepted_by_victim == 0
    assert outcome.rejections == {"UnknownIdentity": 10_000}
    assert not bs.pending


def test_forgeries_naming_a_real_head_fail_the_tag(bs, rng):
    spec = AttackSpec(kind=AttackKind.IMPERSONATE, intensity=2_000)
    outcome = adversary.impersonation_attack(spec, rng, bs, clock=0, identity=HEAD)
    assert outcome.accepted_by_victim == 0
    assert outcome.rejections == {"TagInvalid": 2_000}
    guessed = adversary.impersonation_attack(spec, rng, bs, clock=5_000, identity=HEAD, token=bytes(16))
    assert guessed.rejections == {"TagInvalid": 2_000}


def test_forgery_with_revoked_token(bs, rng):
    token = bs.registry[HEAD].token
    bs.revoke(HEAD)
    spec = AttackSpec(kind=AttackKind.IMPERSONATE, intensity=10)
    outcome = adversary.impersonation_attack(spec, rng, bs, clock=0, identity=HEAD, token=token)
    assert outcome.accepted_by_victim == 0
    assert outcome.rejections == {"RegistrationRevoked": 10}


def test_captured_m1_is_stale_or_replayed(bs, rng):
    captured = run_handshake(bs, bs.registry[HEAD], rng, 0).m1
    spec = AttackSpec(kind=AttackKind.IMPERSONATE, intensity=5)
    soon = adversary.impersonation_attack(spec, rng, bs, clock=10, captured=captured)
    assert soon.rejections == {"ReplayDetected": 5}
    later = adversary.impersonation_attack(spec, rng, bs, clock=10_000, captured=captured)
    assert later.rejections == {"StaleTimestamp": 5}


def test_compromised_link_exposes_only_its_own_traffic():
    topology, agents, rng = cluster_network(2)
    before = record_rounds(topology, agents, rng, 3)
    _, parent, child = topology.edges()[0]
    link = (parent, child)
    stolen = agents[child].ring.get(link)
    after = record_rounds(topology, agents, rng, 5)

    outcome = adversary.compromise_link(stolen, after)
    assert outcome.attempts == len(after)
    assert set(outcome.recovered_per_link) == {link}
    assert outcome.recovered_per_link[link] == sum(1 for packet in after if packet.link == link) == 5
    assert outcome.links_affected == {link}
    # keys from before the theft are out of reach
    assert adversary.compromise_link(stolen, before).plaintexts_recovered == 0
    idle = [packet for packet in after if packet.link != link]
    assert adversary.compromise_link(stolen, idle).plaintexts_recovered == 0


def test_stolen_chain_limits():
    chain = adversary.StolenChain(initial_state((1, 2), KEY).copy(update={"send_epoch": 4}))
    assert chain.state_at(3) is None
    assert chain.state_at(4 + adversary.MAX_TRACKED_GAP + 1) is None
    assert chain.state_at(6).send_epoch == 6


@pytest.mark.parametrize("seed", range(20))
def test_compromise_locality_in_simulation(seed):
    config = ScenarioConfig(
        network={"node_count": 100},
        attack=[{"kind": "compromise_link", "target": "link:random", "rounds": [1]}],
        run={"rounds": 50},
    )
    _, simulation = run(config, seed)
    medium = simulation.medium
    assert isinstance(medium, Adversary)
    (chain,) = medium.chains.values()
    (outcome,) = medium.outcomes
    assert set(outcome.recovered_per_link) == {chain.link}
    assert outcome.plaintexts_recovered > 0
    assert outcome.accepted_by_victim == 0


@pytest.mark.parametrize("dropped", [1, 4, 8])
def test_drops_inside_window_recover(dropped):
    parent, child = link_pair(window=8)
    stream = [send_hop(child, 1, AggregatePayload(value=value)) for value in range(20)]
    spec = AttackSpec(kind=AttackKind.DROP, target="link:1-2", intensity=dropped)
    outcome = adversary.drop_attack(spec, stream, lambda packet: process_incoming(parent, packet))
    assert outcome.dropped == dropped
    assert outcome.accepted_by_victim == 20 - dropped
    assert outcome.links_affected == {(1, 2)}
    assert not outcome.links_flagged


def test_drops_past_window_flag_the_link():
    parent, child = link_pair(window=8)
    stream = [send_hop(child, 1, AggregatePayload(value=value)) for value in range(20)]
    spec = AttackSpec(kind=AttackKind.DROP, target="data", intensity=9)
    outcome = adversary.drop_attack(spec, stream, lambda packet: process_incoming(parent, packet))
    assert outcome.dropped == 9
    assert outcome.accepted_by_victim == 0
    assert outcome.links_flagged == {(1, 2)}
    assert outcome.rejections == {"EpochOutOfWindow": 1, "LinkFlagged": 10}


def test_probabilistic_drops_never_corrupt_data():
    parent, child = link_pair(window=8)
    stream = [send_hop(child, 1, AggregatePayload(value=value)) for value in range(200)]
    spec = AttackSpec(kind=AttackKind.DROP, intensity=0.3)
    received = []
    outcome = adversary.drop_attack(
        spec,
        stream,
        lambda packet: received.append(process_incoming(parent, packet).value),
        np.random.default_rng(1),
    )
    assert 0 < outcome.dropped < 200
    assert received == sorted(received)
    assert set(received) <= set(range(200))


@pytest.mark.parametrize("message", ["m1", "m2", "m3"])
def test_dropped_handshake_message_then_retry(bs, rng, message):
    spec = AttackSpec(kind=AttackKind.DROP, target=f"handshake:{message}")
    outcome = adversary.handshake_drop_attack(spec, bs, bs.registry[HEAD], rng, clock=0, latency_ms=10)
    assert outcome.dropped == 1
    assert outcome.accepted_by_victim == 0
    assert outcome.rejections == {"MessageDropped": 1}
    assert outcome.retries_accepted == 1
    assert HEAD in bs.sessions


def test_single_bit_flips_on_data_packets():
    parent, child = link_pair()
    packets = []
    for value in range(1000):
        # every packet goes out under the epoch-0 key with its own counter
        child.ring.put(initial_state((1, 2), KEY))
        packets.append(send_hop(child, 1, AggregatePayload(value=value)))
    spec = AttackSpec(kind=AttackKind.TAMPER, target="data", intensity=1.0)
    outcome = adversary.tamper_attack(
        spec, np.random.default_rng(3), packets, lambda packet: process_incoming(parent, packet)
    )
    assert outcome.attempts == 1000
    assert outcome.accepted_by_victim == 0
    assert outcome.rejections == {"TagInvalid": 1000}
    assert process_incoming(parent, packets[0]).value == 0


def test_every_field_tamper_of_handshakes_is_rejected(bs, rng):
    transcripts = []
    for session in range(100):
        outcome, swept = adversary.handshake_tamper_sweep(
            bs, bs.registry[HEAD], rng, clock=session * 1000, latency_ms=5
        )
        assert outcome.attempts == 8
        assert outcome.accepted_by_victim == 0
        transcripts.extend(swept)
    assert len(transcripts) == 800
    for transcript in transcripts:
        assert transcript.verdict is Verdict.REJECTED
        assert transcript.initiator_key is None and transcript.server_key is None
    assert HEAD not in bs.sessions


def test_tamper_with_zero_probability_is_a_no_op():
    parent, child = link_pair()
    packets = [send_hop(child, 1, AggregatePayload(value=value)) for value in range(10)]
    spec = AttackSpec(kind=AttackKind.TAMPER, intensity=0)
    outcome = adversary.tamper_attack(spec, np.random.default_rng(0), packets, lambda packet: None)
    assert outcome.attempts == 0


def traces(simulation):
    return simulation.trace_lines(), simulation.metrics_rows(), simulation.auth_log_lines()


def test_empty_adversary_leaves_run_untouched():
    config = load_config(f"{SCENARIOS}/small.yml")
    honest = Simulation(config, 3, medium=Medium())
    honest.run()
    watched = Simulation(config, 3, medium=Adversary([], np.random.default_rng(0)))
    watched.run()
    assert traces(watched) == traces(honest)
    assert watched.medium.summary() == {}


def watching(*specs):
    medium = Adversary(list(specs), np.random.default_rng(0))
    simulation = Simulation(load_config(f"{SCENARIOS}/small.yml"), 0, medium=medium)
    return medium, simulation


def test_only_the_adversary_forges_handshakes():
    assert not hasattr(Medium(), "forge")
    medium, simulation = watching(AttackSpec(kind=AttackKind.IMPERSONATE, intensity=2))
    injections = medium.begin_round(simulation, 0)
    assert [injection.item for injection in injections] == [None, None]
    forged = medium.forge(0, 1234)
    assert forged.t1 == 1234
    assert len(forged.aid) == 16


def test_dropped_packets_are_not_replay_candidates():
    drop = AttackSpec(kind=AttackKind.DROP, target="link:1-2", intensity=3, rounds=[0])
    replay = AttackSpec(kind=AttackKind.REPLAY, target="data", rounds=[1])
    medium, simulation = watching(drop, replay)
    _, child = link_pair()
    medium.begin_round(simulation, 0)
    packets = [send_hop(child, 1, AggregatePayload(value=value)) for value in range(5)]
    carried = [medium.carry_packet(packet) for packet in packets]
    assert carried[:3] == [None, None, None]
    assert medium.recorded_packets == packets[3:]
    injections = medium.begin_round(simulation, 1)
    assert [injection.item for injection in injections] == packets[3:]


def test_unobserved_tampering_is_forgotten_at_round_start():
    medium, simulation = watching(AttackSpec(kind=AttackKind.TAMPER, target="link:1-2"))
    _, child = link_pair()
    medium.begin_round(simulation, 0)
    stale = medium.carry_packet(send_hop(child, 1, AggregatePayload(value=1)))
    medium.begin_round(simulation, 1)
    medium.observe(stale, False, "TagInvalid")
    assert medium.outcomes[0].attempts == 0
    fresh = medium.carry_packet(send_hop(child, 1, AggregatePayload(value=2)))
    medium.observe(fresh, False, "TagInvalid")
    assert medium.outcomes[0].attempts == 1
    assert medium.round_attempts == 1


def test_zero_probability_tamper_in_simulation():
    config = load_config(f"{SCENARIOS}/small.yml")
    _, clean = run(config, 8)
    quiet = AttackSpec(kind=AttackKind.TAMPER, intensity=0)
    _, tampered = run(config.copy(update={"attack": [quiet]}), 8)
    assert traces(tampered) == traces(clean)


def test_attacked_scenario_tallies_reconcile():
    config = load_config(f"{SCENARIOS}/attacked.yml")
    records, simulation = run(config, 4)
    medium = simulation.medium
    assert sum(record.attack_attempts for record in records) == sum(
        outcome.attempts for outcome in medium.outcomes
    )
    assert sum(record.attack_accepted for record in records) == 0
    summary = medium.summary()
    assert summary["impersonate"] == {"attempts": 25, "accepted": 0, "recovered": 0}
    assert summary["replay"]["attempts"] == 40
    assert summary["replay"]["accepted"] == 0
    assert records[2].attack_attempts == 25
    assert records[3].attack_attempts == records[4].attack_attempts == 20
    histogram = medium.rejection_histogram()
    assert sum(histogram.values()) == 65
    replay_rejections = Counter(
        line.rsplit(",", 1)[1]
        for line in simulation.trace_lines()[1:]
        if line.endswith(("tag_invalid", "epoch_oow"))
    )
    assert sum(replay_rejections.values()) == 40
