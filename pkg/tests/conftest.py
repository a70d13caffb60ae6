"""Shared fixtures: golden markets and seeded random instance pools."""

import json
import random

import pytest

from ucmarket import MarketInstance, NetworkSpec, ProducerSpec, Topology, parse_instance

REFERENCE_TEXT = json.dumps({
    "periods": 1,
    "demand": {"node1": [150.0]},
    "network": {"topology": "two_node", "f_max": 50.0},
    "producers": [
        {"id": "P1", "node": 1, "g_min": 100.0, "g_max": 200.0, "a": 15.0, "w": 20.0},
        {"id": "P2", "node": 2, "g_min": 150.0, "g_max": 200.0, "a": 10.0, "w": 0.0},
    ],
})


@pytest.fixture(scope="session")
def reference() -> MarketInstance:
    """Two-node single-period market with a congestible line and an FTR."""
    return parse_instance(REFERENCE_TEXT)


@pytest.fixture(scope="session")
def merit_pair() -> MarketInstance:
    """Two flexible units at one node; marginal pricing closes the gap."""
    return MarketInstance(
        periods=1, demand=((150.0,),),
        producers=(ProducerSpec("X", 1, 0.0, 100.0, 10.0, 0.0),
                   ProducerSpec("Y", 1, 0.0, 100.0, 15.0, 0.0)),
        network=NetworkSpec(Topology.UNINODE))


@pytest.fixture(scope="session")
def forced_unit() -> MarketInstance:
    """One inflexible unit pinned at its only output level."""
    return MarketInstance(
        periods=1, demand=((100.0,),),
        producers=(ProducerSpec("U", 1, 100.0, 100.0, 10.0, 0.0),),
        network=NetworkSpec(Topology.UNINODE))


@pytest.fixture(scope="session")
def colocated_pair() -> MarketInstance:
    """The reference producers moved onto a single node."""
    return MarketInstance(
        periods=1, demand=((150.0,),),
        producers=(ProducerSpec("P1", 1, 100.0, 200.0, 15.0, 20.0),
                   ProducerSpec("P2", 1, 150.0, 200.0, 10.0, 0.0)),
        network=NetworkSpec(Topology.UNINODE))


def random_instance(rng: random.Random, *, two_node=None, max_producers=3,
                    max_periods=2, max_span=30) -> MarketInstance:
    """Feasible-by-construction integer instance.

    Demand is read off a randomly drawn commitment and dispatch, so the
    instance always clears and integer optima land on the unit grid.
    """
    if two_node is None:
        two_node = rng.random() < 0.5
    n = rng.randint(1, max_producers)
    T = rng.randint(1, max_periods)
    f_max = float(rng.randint(0, 25)) if two_node else 0.0
    producers = []
    for k in range(n):
        g_min = float(rng.choice([0, rng.randint(0, 15)]))
        g_max = g_min + rng.randint(0, max_span)
        a = rng.randint(500, 4000) / 100.0
        w = float(rng.randint(0, 200))
        node = rng.randint(1, 2) if two_node else 1
        producers.append(ProducerSpec(f"G{k}", node, g_min, float(g_max), a, w))
    rows1, rows2 = [], []
    for _ in range(T):
        gen1 = gen2 = 0
        for p in producers:
            if rng.random() < 0.6:
                g = rng.randint(int(p.g_min), int(p.g_max))
                if p.node == 1:
                    gen1 += g
                else:
                    gen2 += g
        if two_node:
            f = rng.randint(-min(int(f_max), gen2), min(int(f_max), gen1))
            rows1.append(float(gen1 - f))
            rows2.append(float(gen2 + f))
        else:
            rows1.append(float(gen1 + gen2))
    demand = (tuple(rows1), tuple(rows2)) if two_node else (tuple(rows1),)
    network = NetworkSpec(Topology.TWO_NODE, f_max) if two_node \
        else NetworkSpec(Topology.UNINODE)
    return MarketInstance(periods=T, demand=demand,
                          producers=tuple(producers), network=network)


def random_cent_kink_instance(rng: random.Random, max_producers=3) -> MarketInstance:
    """Uninode instance whose dual kinks all land on the cent grid.

    a is in whole cents and w is an integer multiple of g_max/100 with
    g_min restricted to {0, g_max/2, g_max}, so every average-cost
    candidate a + w/g is a whole number of cents.
    """
    n = rng.randint(1, max_producers)
    producers = []
    for k in range(n):
        g_max = float(rng.choice([100, 200, 400]))
        g_min = float(rng.choice([0.0, g_max / 2, g_max]))
        a = rng.randint(500, 4000) / 100.0
        w = rng.randint(0, 500) * g_max / 100.0
        producers.append(ProducerSpec(f"G{k}", 1, g_min, g_max, a, w))
    demand = 0.0
    for p in producers:
        if rng.random() < 0.6:
            demand += rng.randint(int(p.g_min), int(p.g_max))
    if demand == 0.0:
        # a zero-demand dual is flat below the cheapest entry threshold, so
        # its argmax is a convention, not a number a scan could confirm
        p0 = producers[0]
        demand = float(rng.randint(max(int(p0.g_min), 1), int(p0.g_max)))
    return MarketInstance(periods=1, demand=((float(demand),),),
                          producers=tuple(producers),
                          network=NetworkSpec(Topology.UNINODE))


def random_prices(rng: random.Random, instance: MarketInstance):
    return tuple(tuple(rng.uniform(-5.0, 45.0) for _ in range(instance.periods))
                 for _ in range(instance.node_count))


@pytest.fixture(scope="session")
def pool_200() -> list[MarketInstance]:
    rng = random.Random(20260816)
    return [random_instance(rng) for _ in range(200)]


@pytest.fixture(scope="session")
def oracle_pool_50() -> list[MarketInstance]:
    rng = random.Random(4711)
    return [random_instance(rng, max_span=25) for _ in range(50)]


@pytest.fixture(scope="session")
def cent_pool_50() -> list[MarketInstance]:
    rng = random.Random(99)
    return [random_cent_kink_instance(rng) for _ in range(50)]
