import numpy as np
import pytest

from analysis.odgen import build_zero_mask
from analysis.synthetic import demo_network
from core.demand import ODMatrix
from core.network import CostWeights, Link, Node, RoadNetwork, Sensor, VdfParams, ZONE_CONNECTOR, Zone


@pytest.fixture
def demo_net():
    return demo_network()


@pytest.fixture
def demo_od(demo_net):
    mask = build_zero_mask(demo_net.zones)
    demand = np.zeros(mask.shape)
    demand[0, 4], demand[0, 6] = 300.0, 200.0   # Z1 -> Z5, Z7
    demand[2, 5], demand[2, 6] = 250.0, 150.0   # Z3 -> Z6, Z7
    demand[4, 1] = 100.0                        # Z5 -> Z2
    demand[5, 3] = 90.0                         # Z6 -> Z4
    demand[6, 1], demand[6, 3] = 120.0, 110.0   # Z7 -> Z2, Z4
    return ODMatrix(demand=demand, mask=mask, hour_index=17)


def make_two_link_network(t0_a=10.0, cap_a=1000.0, t0_b=10.0, cap_b=1000.0):
    """Въезд 1 -> две параллельные связи 2 и 3 -> бордюр; коннекторы короткие и широкие"""
    nodes = {1: Node(1, ZONE_CONNECTOR), 2: Node(2, ZONE_CONNECTOR), 10: Node(10), 11: Node(11)}
    links = {
        1: Link(1, 1, 10, length=10.0, capacity=1e6, free_flow_time=0.5),
        2: Link(2, 10, 11, length=100.0, capacity=cap_a, free_flow_time=t0_a),
        3: Link(3, 10, 11, length=100.0, capacity=cap_b, free_flow_time=t0_b),
        4: Link(4, 11, 2, length=10.0, capacity=1e6, free_flow_time=0.5),
    }
    zones = [Zone(0, "Z1", [1]), Zone(1, "Z5", [4])]
    sensors = [Sensor(0, 2), Sensor(1, 3)]
    net = RoadNetwork(nodes=nodes, links=links, zones=zones, sensors=sensors,
                      cost_weights=CostWeights(1.0, 0.0, 0.0), vdf=VdfParams(0.15, 4.0))
    net.validate()
    return net


def two_link_od(net, demand):
    mask = build_zero_mask(net.zones)
    values = np.zeros(mask.shape)
    values[0, 1] = demand
    return ODMatrix(demand=values, mask=mask)


@pytest.fixture
def two_link_net():
    return make_two_link_network
