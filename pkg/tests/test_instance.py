import json
import random

import pytest

from ucmarket import (
    InstanceSchemaError,
    InstanceSyntaxError,
    InstanceValidationError,
    MarketInstance,
    NetworkSpec,
    ProducerSpec,
    Topology,
    parse_instance,
    serialize_instance,
    validate,
)
from tests.conftest import REFERENCE_TEXT, random_instance


def test_parse_reference_fields(reference):
    assert reference.periods == 1
    assert reference.network.topology is Topology.TWO_NODE
    assert reference.network.f_max == 50.0
    assert reference.demand == ((150.0,), (0.0,))
    p1 = reference.producer("P1")
    assert (p1.node, p1.g_min, p1.g_max, p1.a, p1.w) == (1, 100.0, 200.0, 15.0, 20.0)
    p2 = reference.producer("P2")
    assert (p2.node, p2.g_min, p2.g_max, p2.a, p2.w) == (2, 150.0, 200.0, 10.0, 0.0)
    assert validate(reference) == []


def test_uninode_demand_defaults_single_row():
    inst = parse_instance(json.dumps({
        "periods": 2,
        "demand": {"node1": [5.0, 0.0]},
        "network": {"topology": "uninode"},
        "producers": [],
    }))
    assert inst.node_count == 1
    assert inst.demand == ((5.0, 0.0),)


def test_two_node_demand_node2_defaults_to_zeros():
    inst = parse_instance(json.dumps({
        "periods": 2,
        "demand": {"node1": [5.0, 1.0]},
        "network": {"topology": "two_node", "f_max": 3.0},
        "producers": [],
    }))
    assert inst.demand[1] == (0.0, 0.0)


def test_round_trip_identity_reference(reference):
    text = serialize_instance(reference)
    again = parse_instance(text)
    assert again == reference
    assert serialize_instance(again) == text


def test_round_trip_identity_random_instances():
    rng = random.Random(7)
    for _ in range(40):
        inst = random_instance(rng)
        assert parse_instance(serialize_instance(inst)) == inst


def test_round_trip_preserves_awkward_floats():
    # repr round-trip must survive values that a fixed decimal format would mangle
    inst = MarketInstance(
        periods=1, demand=((0.1 + 0.2,),),
        producers=(ProducerSpec("G", 1, 0.0, 1e-9, 1 / 3, 0.0),),
        network=NetworkSpec(Topology.UNINODE))
    assert parse_instance(serialize_instance(inst)) == inst


def test_syntax_error():
    with pytest.raises(InstanceSyntaxError):
        parse_instance("{not json")


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("periods"),
    lambda d: d.pop("demand"),
    lambda d: d.pop("producers"),
    lambda d: d.update(extra=1),
    lambda d: d["network"].update(loss=0.1),
    lambda d: d["producers"][0].update(ramp=5),
    lambda d: d["producers"][0].pop("a"),
    lambda d: d.update(periods="one"),
    lambda d: d.update(periods=True),
    lambda d: d["demand"].update(node3=[0.0]),
    lambda d: d["producers"][0].update(g_min="low"),
])
def test_schema_errors(mutate):
    doc = json.loads(REFERENCE_TEXT)
    mutate(doc)
    with pytest.raises(InstanceSchemaError):
        parse_instance(json.dumps(doc))


def test_f_max_required_only_for_two_node():
    doc = json.loads(REFERENCE_TEXT)
    del doc["network"]["f_max"]
    with pytest.raises(InstanceSchemaError):
        parse_instance(json.dumps(doc))
    uni = {
        "periods": 1,
        "demand": {"node1": [0.0]},
        "network": {"topology": "uninode", "f_max": 1.0},
        "producers": [],
    }
    with pytest.raises(InstanceSchemaError):
        parse_instance(json.dumps(uni))


def test_network_block_optional_defaults_to_uninode():
    inst = parse_instance(json.dumps({
        "periods": 1,
        "demand": {"node1": [3.0]},
        "producers": [
            {"id": "G", "node": 1, "g_min": 0.0, "g_max": 5.0, "a": 1.0, "w": 0.0},
        ],
    }))
    assert inst.network.topology is Topology.UNINODE
    # but a node-2 producer cannot ride in on the default
    with pytest.raises(InstanceValidationError):
        doc = json.loads(REFERENCE_TEXT)
        del doc["network"]
        parse_instance(json.dumps(doc))


def test_node2_demand_rejected_for_uninode():
    doc = {
        "periods": 1,
        "demand": {"node1": [0.0], "node2": [0.0]},
        "network": {"topology": "uninode"},
        "producers": [],
    }
    with pytest.raises(InstanceSchemaError):
        parse_instance(json.dumps(doc))


def _expect_violation(doc, field, rule):
    with pytest.raises(InstanceValidationError) as exc:
        parse_instance(json.dumps(doc))
    hits = [(v.field, v.rule) for v in exc.value.violations]
    assert (field, rule) in hits, hits


def test_validation_records():
    base = json.loads(REFERENCE_TEXT)

    doc = json.loads(REFERENCE_TEXT)
    doc["producers"][0]["g_min"] = 300.0
    _expect_violation(doc, "producers[0].g_max", "ordered")

    doc = json.loads(REFERENCE_TEXT)
    doc["demand"]["node1"] = [-1.0]
    _expect_violation(doc, "demand.node1[0]", "nonnegative")

    doc = json.loads(REFERENCE_TEXT)
    doc["producers"][1]["w"] = -2.0
    _expect_violation(doc, "producers[1].w", "nonnegative")

    doc = json.loads(REFERENCE_TEXT)
    doc["periods"] = 0
    _expect_violation(doc, "periods", "positive")

    doc = json.loads(REFERENCE_TEXT)
    doc["network"]["f_max"] = -1.0
    _expect_violation(doc, "network.f_max", "nonnegative")

    doc = json.loads(REFERENCE_TEXT)
    doc["producers"][1]["id"] = "P1"
    _expect_violation(doc, "producers[1].id", "unique")

    doc = {
        "periods": 1,
        "demand": {"node1": [0.0]},
        "network": {"topology": "uninode"},
        "producers": [dict(base["producers"][0], node=2)],
    }
    _expect_violation(doc, "producers[0].node", "topology")


def test_demand_length_mismatch_is_schema_error():
    doc = json.loads(REFERENCE_TEXT)
    doc["demand"]["node1"] = [150.0, 10.0]
    with pytest.raises(InstanceSchemaError):
        parse_instance(json.dumps(doc))


def test_multiple_violations_collected():
    doc = json.loads(REFERENCE_TEXT)
    doc["producers"][0]["g_min"] = 300.0
    doc["producers"][1]["w"] = -2.0
    with pytest.raises(InstanceValidationError) as exc:
        parse_instance(json.dumps(doc))
    assert len(exc.value.violations) >= 2


def test_empty_producer_list_is_valid():
    inst = parse_instance(json.dumps({
        "periods": 1,
        "demand": {"node1": [0.0]},
        "network": {"topology": "uninode"},
        "producers": [],
    }))
    assert inst.producers == ()


def test_producer_lookup_and_cost(reference):
    with pytest.raises(KeyError):
        reference.producer("nope")
    p1 = reference.producer("P1")
    assert p1.cost(1, 150.0) == 15.0 * 150.0 + 20.0
    assert p1.cost(0, 0.0) == 0.0
    assert reference.producers_at(2) == (reference.producer("P2"),)
