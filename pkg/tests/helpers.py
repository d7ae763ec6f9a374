"""Small builders shared by the node / RIC tests."""

from uavric.channel import ChannelModel, LinkBudget
from uavric.mobility import Trajectory, Waypoint
from uavric.phy_frame import TddConfig
from uavric.ran_node import RanNode, UeContext
from uavric.sched import SchedConfig

GNB = (0.0, 0.0, 2.5)


def static(pos, name="s"):
    return Trajectory(name, "static", (Waypoint(tuple(float(c) for c in pos)),))


def make_node(loads=(2e6,), positions=None, seed=1, channel=None, **ue_kw):
    positions = positions or [(10, 0, 1)] * len(loads)
    ues = [UeContext(i + 1, "ground", load, static(p), **ue_kw) for i, (load, p) in enumerate(zip(loads, positions))]
    return RanNode(TddConfig(), SchedConfig(), channel or ChannelModel(los_mode="los"), LinkBudget(), GNB, ues, seed)
