"""
Phase 1 topology: deployment, cluster-head election and the per-cluster
aggregation tree (a multi-level star rooted at the head).
"""
import logging
import math
from enum import Enum, unique
from typing import Dict, Iterable, List, Optional, Set, Tuple

from numpy.random import Generator
from pydantic import BaseModel

from .exceptions import ConfigInvalid, InsufficientNodes, UnreachableNode

LOGGER = logging.getLogger(__name__)

BASE_STATION_ID = 0
# Slack on the disk-range comparison so nodes spaced exactly at range connect
RANGE_TOLERANCE = 1e-9


@unique
class Role(Enum):
    MEMBER = "member"
    CLUSTER_HEAD = "cluster-head"
    BASE_STATION = "base-station"


class NodeState(BaseModel):
    id: int
    position: Tuple[float, float]
    energy: float
    role: Role = Role.MEMBER
    parent: Optional[int] = None
    children: Set[int] = set()
    cluster: Optional[int] = None
    alive: bool = True
    isolated: bool = False

    @property
    def is_base_station(self) -> bool:
        return self.role is Role.BASE_STATION


class Cluster(BaseModel):
    id: int
    head: int
    members: Set[int] = set()
    # (parent, child), in the order BFS discovered the children
    edges: List[Tuple[int, int]] = []

    def parent_map(self) -> Dict[int, int]:
        return {child: parent for parent, child in self.edges}

    def children_map(self) -> Dict[int, List[int]]:
        children: Dict[int, List[int]] = {node: [] for node in self.nodes()}
        for parent, child in self.edges:
            children[parent].append(child)
        return children

    def nodes(self) -> List[int]:
        return [self.head] + sorted(self.members)

    def reached(self) -> Set[int]:
        return {child for _, child in self.edges}

    def depths(self) -> Dict[int, int]:
        depth = {self.head: 0}
        for parent, child in self.edges:
            depth[child] = depth[parent] + 1
        return depth

    def heights(self) -> Dict[int, int]:
        """Longest hop distance from each reached node down to a leaf"""
        height: Dict[int, int] = {}
        children = self.children_map()
        for node in self.post_order():
            height[node] = 1 + max((height[c] for c in children[node]), default=-1)
        return height

    def post_order(self) -> List[int]:
        children = self.children_map()
        order: List[int] = []
        stack: List[Tuple[int, bool]] = [(self.head, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            stack.append((node, True))
            for child in reversed(children[node]):
                stack.append((child, False))
        return order


class ClusterTopology(BaseModel):
    clusters: List[Cluster] = []
    base_station: int = BASE_STATION_ID
    isolated: Set[int] = set()

    @property
    def heads(self) -> List[int]:
        return [cluster.head for cluster in self.clusters]

    def cluster_of(self, node_id: int) -> Optional[Cluster]:
        for cluster in self.clusters:
            if node_id == cluster.head or node_id in cluster.members:
                return cluster
        return None

    def edges(self) -> List[Tuple[int, int, int]]:
        return [
            (cluster.id, parent, child)
            for cluster in self.clusters
            for parent, child in cluster.edges
        ]

    @property
    def max_depth(self) -> int:
        return max(
            (max(cluster.depths().values()) for cluster in self.clusters), default=0
        )


def distance(a: Tuple[float, float], b: Tuple[float, float]) -> float:
    return math.hypot(a[0] - b[0], a[1] - b[1])


def deploy(
    node_count: int,
    width: float,
    height: float,
    initial_energy: float,
    rng: Generator,
    base_station: Optional[Tuple[float, float]] = None,
) -> Dict[int, NodeState]:
    """
    Place node_count sensors (ids 1..node_count) uniformly at random and the
    base station (id 0) at the given position, default the area center.
    """
    if node_count < 1:
        raise ConfigInvalid(f"node_count must be >= 1, got {node_count}")
    if width <= 0 or height <= 0:
        raise ConfigInvalid(f"area must have positive dimensions, got {width}x{height}")
    bs_position = base_station if base_station else (width / 2, height / 2)
    nodes = {
        BASE_STATION_ID: NodeState(
            id=BASE_STATION_ID,
            position=bs_position,
            energy=initial_energy,
            role=Role.BASE_STATION,
        )
    }
    xs = rng.uniform(0, width, size=node_count)
    ys = rng.uniform(0, height, size=node_count)
    for index in range(node_count):
        node_id = index + 1
        nodes[node_id] = NodeState(
            id=node_id, position=(float(xs[index]), float(ys[index])), energy=initial_energy
        )
    LOGGER.info("Deployed %d nodes in a %sx%s m area", node_count, width, height)
    return nodes


def head_score(
    node: NodeState,
    base_station: NodeState,
    initial_energy: float,
    d_max: float,
    energy_weight: float = 0.7,
    distance_weight: float = 0.3,
) -> float:
    energy_term = node.energy / initial_energy if initial_energy else 0.0
    distance_term = 1.0 - (distance(node.position, base_station.position) / d_max if d_max else 0.0)
    return energy_weight * energy_term + distance_weight * distance_term


def default_head_count(alive: int, fraction: float = 0.05) -> int:
    # 0.1 * 30 is 3.0000000000000004 in binary floating point
    return max(1, math.ceil(round(fraction * alive, 9)))


def elect_cluster_heads(
    nodes: Dict[int, NodeState],
    k: int,
    initial_energy: float,
    energy_weight: float = 0.7,
    distance_weight: float = 0.3,
) -> List[int]:
    """The k alive sensors with the highest score; ties go to the lower id"""
    if k < 1:
        raise InsufficientNodes(f"Need at least one cluster head, asked for {k}")
    base_station = next(node for node in nodes.values() if node.is_base_station)
    candidates = [
        node for node in nodes.values() if node.alive and not node.is_base_station
    ]
    if len(candidates) < k:
        raise InsufficientNodes(
            f"Asked for {k} cluster heads but only {len(candidates)} nodes are alive"
        )
    d_max = max(distance(node.position, base_station.position) for node in candidates)
    ranked = sorted(
        candidates,
        key=lambda node: (
            -head_score(
                node, base_station, initial_energy, d_max, energy_weight, distance_weight
            ),
            node.id,
        ),
    )
    return sorted(node.id for node in ranked[:k])


def nearest_head(
    node: NodeState, heads: Iterable[int], nodes: Dict[int, NodeState]
) -> int:
    return min(heads, key=lambda head: (distance(node.position, nodes[head].position), head))


def _bfs_tree(
    head: int, members: Set[int], nodes: Dict[int, NodeState], radio_range: float
) -> List[Tuple[int, int]]:
    """
    Level-by-level BFS from the head. A member at hop h picks, among in-range
    nodes at hop h-1, the one closest to the head, then the lower id.
    """
    head_position = nodes[head].position
    edges: List[Tuple[int, int]] = []
    frontier = [head]
    unreached = set(members)
    while frontier and unreached:
        next_frontier = []
        for member in sorted(unreached):
            position = nodes[member].position
            in_range = [
                candidate
                for candidate in frontier
                if distance(position, nodes[candidate].position)
                <= radio_range + RANGE_TOLERANCE
            ]
            if not in_range:
                continue
            parent = min(
                in_range,
                key=lambda candidate: (
                    distance(nodes[candidate].position, head_position),
                    candidate,
                ),
            )
            edges.append((parent, member))
            next_frontier.append(member)
        unreached.difference_update(next_frontier)
        frontier = next_frontier
    return edges


def build_aggregation_tree(
    heads: Iterable[int],
    nodes: Dict[int, NodeState],
    radio_range: float,
    strict: bool = False,
) -> ClusterTopology:
    """
    Assign every alive member to its nearest head and grow a BFS tree per
    cluster over links no longer than radio_range. Members with no path to
    their head are marked isolated, or raise UnreachableNode when strict.
    """
    heads = sorted(heads)
    if not heads:
        raise InsufficientNodes("Cannot build clusters without cluster heads")
    base_station = next(node.id for node in nodes.values() if node.is_base_station)
    assignment: Dict[int, Set[int]] = {head: set() for head in heads}
    for node in sorted(nodes.values(), key=lambda node: node.id):
        if node.is_base_station or not node.alive or node.id in assignment:
            continue
        assignment[nearest_head(node, heads, nodes)].add(node.id)

    clusters = []
    isolated: Set[int] = set()
    for cluster_id, head in enumerate(heads):
        edges = _bfs_tree(head, assignment[head], nodes, radio_range)
        cluster = Cluster(id=cluster_id, head=head, members=assignment[head], edges=edges)
        isolated.update(assignment[head] - cluster.reached())
        clusters.append(cluster)

    if isolated and strict:
        raise UnreachableNode(isolated)
    if isolated:
        LOGGER.warning(
            "UnreachableNode: %d node(s) isolated this period: %s",
            len(isolated),
            sorted(isolated),
        )
    topology = ClusterTopology(clusters=clusters, base_station=base_station, isolated=isolated)
    apply_topology(topology, nodes)
    return topology


def apply_topology(topology: ClusterTopology, nodes: Dict[int, NodeState]) -> None:
    """Write roles, parents, children and cluster membership onto node states"""
    for node in nodes.values():
        if node.is_base_station:
            continue
        node.role = Role.MEMBER
        node.parent = None
        node.children = set()
        node.cluster = None
        node.isolated = node.id in topology.isolated
    for cluster in topology.clusters:
        nodes[cluster.head].role = Role.CLUSTER_HEAD
        nodes[cluster.head].cluster = cluster.id
        for member in cluster.members:
            nodes[member].cluster = cluster.id
        for parent, child in cluster.edges:
            nodes[child].parent = parent
            nodes[parent].children.add(child)


def topology_lines(topology: ClusterTopology, nodes: Dict[int, NodeState]) -> List[str]:
    """Lines for --dump-topology: one per edge, then heads and isolated nodes"""
    lines = ["cluster_id,parent_id,child_id,length_m"]
    for cluster_id, parent, child in topology.edges():
        length = distance(nodes[parent].position, nodes[child].position)
        lines.append(f"{cluster_id},{parent},{child},{length:.3f}")
    lines.append("heads," + ",".join(str(head) for head in topology.heads))
    lines.append("isolated," + ",".join(str(node) for node in sorted(topology.isolated)))
    return lines
