import threading
import time

import pytest

from helpers import make_node
from uavric.e2 import codec
from uavric.e2.messages import (
    ERR_PROTOCOL_VIOLATION,
    KPM_FUNCTION_ID,
    REASON_BAD_PERIOD,
    REASON_DUPLICATE_SUB_ID,
    REASON_UNKNOWN_FUNCTION,
    ErrorIndication,
    Indication,
    RanFunction,
    SetupRequest,
    SetupResponse,
    SubscriptionRequest,
    SubscriptionResponse,
)
from uavric.e2.ric import ConnState, NearRtRic, SubscriptionRejected, SubStatus
from uavric.e2.store import MetricStore
from uavric.e2.transport import SocketStream, pipe_pair
from uavric.ran_node import E2Agent, E2AgentError


def send(stream, msg):
    stream.send(codec.encode(msg))


def recv(stream):
    return codec.decode_payload(codec.read_frame(stream.recv_exact))


@pytest.fixture
def ric():
    r = NearRtRic(MetricStore())
    yield r
    r.shutdown()


def test_setup_establishes(ric):
    node, ric_end = pipe_pair()
    conn = ric.attach(ric_end)
    send(node, SetupRequest(5, (RanFunction(KPM_FUNCTION_ID, "KPM"),)))
    assert recv(node) == SetupResponse((2,))
    assert conn.wait_established(2)
    assert conn.state is ConnState.ESTABLISHED and conn.node_id == 5


def test_message_before_setup_closes(ric):
    node, ric_end = pipe_pair()
    conn = ric.attach(ric_end)
    send(node, SubscriptionRequest(1, 2, 100))
    err = recv(node)
    assert isinstance(err, ErrorIndication) and err.code == ERR_PROTOCOL_VIOLATION
    assert conn.wait_closed(2)
    assert conn.state is ConnState.CLOSED


def test_xapp_ids_start_at_one(ric):
    assert ric.register_xapp("kpm_mon") == 1
    assert ric.register_xapp("other") == 2


def test_subscribe_unknown_function_sends_nothing(ric):
    node, ric_end = pipe_pair()
    conn = ric.attach(ric_end)
    send(node, SetupRequest(1, (RanFunction(2, "KPM"),)))
    recv(node)
    ric.wait_for_node(2, timeout=2)
    before = conn.messages_out
    x = ric.register_xapp("kpm_mon")
    with pytest.raises(SubscriptionRejected):
        ric.xapp_subscribe(x, 99, 100)
    assert conn.messages_out == before


def test_subscribe_flow_with_scripted_node(ric):
    node, ric_end = pipe_pair()
    conn = ric.attach(ric_end)
    send(node, SetupRequest(1, (RanFunction(2, "KPM"),)))
    recv(node)
    x = ric.register_xapp("kpm_mon")
    result = {}
    t = threading.Thread(target=lambda: result.setdefault("sub", ric.xapp_subscribe(x, 2, 100)))
    t.start()
    req = recv(node)
    assert req == SubscriptionRequest(1, 2, 100)
    send(node, SubscriptionResponse(1, True))
    t.join(2)
    assert result["sub"] == 1 and ric.subscriptions[1].status is SubStatus.ACTIVE
    # setup + response + request + response
    assert conn.messages_in + conn.messages_out == 4
    send(node, Indication(1, 1, ()))
    assert ric.inbox(x).get(timeout=2) == Indication(1, 1, ())
    # a replayed seq is refused and not delivered
    send(node, Indication(1, 1, ()))
    assert isinstance(recv(node), ErrorIndication)
    assert ric.inbox(x).empty()


def agent_pair(ric, node, transport="inproc"):
    if transport == "inproc":
        a, b = pipe_pair()
        ric.attach(b)
    else:
        host, port = ric.listen("127.0.0.1", 0)
        a = SocketStream.connect((host, port))
    agent = E2Agent(node, a)
    agent.setup(timeout=5)
    return agent


def test_agent_rejections(ric):
    node = make_node()
    agent = agent_pair(ric, node)
    conn = ric.wait_for_node(2)
    x = ric.register_xapp("x")
    sub = ric.xapp_subscribe(x, 2, 100)
    with pytest.raises(SubscriptionRejected) as err:
        ric.xapp_subscribe(x, 2, 0)
    assert err.value.reason_code == REASON_BAD_PERIOD
    assert agent._admit(SubscriptionRequest(sub, 2, 100)).reason_code == REASON_DUPLICATE_SUB_ID
    assert agent._admit(SubscriptionRequest(77, 99, 100)).reason_code == REASON_UNKNOWN_FUNCTION
    assert conn.state is ConnState.ESTABLISHED
    agent.close()


@pytest.mark.parametrize("transport", ["inproc", "socket"])
def test_indications_flow_gapless_and_stored(ric, transport):
    node = make_node(loads=(2e6, 5e6), positions=[(10, 0, 1), (15, 0, 5)])
    agent = agent_pair(ric, node, transport)
    conn = ric.wait_for_node(2)
    x = ric.register_xapp("kpm_mon")
    sub = ric.xapp_subscribe(x, 2, 100)
    node.run(1.0)
    agent.close()
    conn.wait_closed(5)
    inbox = ric.inbox(x)
    got = []
    while not inbox.empty():
        got.append(inbox.get())
    inds = [m for m in got if isinstance(m, Indication)]
    assert [i.seq for i in inds] == list(range(1, 11))
    assert got[-1] == ("end", sub)
    delivered = [r for i in inds for r in i.records]
    assert len(delivered) == 20
    assert ric.store.query() == sorted(delivered, key=lambda r: r.t_ms)


def test_two_subscriptions_interleave(ric):
    node = make_node()
    agent = agent_pair(ric, node)
    conn = ric.wait_for_node(2)
    x = ric.register_xapp("kpm_mon")
    a = ric.xapp_subscribe(x, 2, 100)
    b = ric.xapp_subscribe(x, 2, 250)
    node.run(1.0)
    agent.close()
    conn.wait_closed(5)
    inds = []
    while not ric.inbox(x).empty():
        m = ric.inbox(x).get()
        if isinstance(m, Indication):
            inds.append(m)
    assert sum(i.sub_id == a for i in inds) == 10
    assert sum(i.sub_id == b for i in inds) == 4
    times = [i.records[0].t_ms for i in inds]
    assert times == sorted(times)


def test_backpressure_never_drops():
    ric = NearRtRic(MetricStore(), inbox_capacity=1)
    node = make_node()
    agent = agent_pair(ric, node)
    conn = ric.wait_for_node(2)
    x = ric.register_xapp("slow")
    ric.xapp_subscribe(x, 2, 10)
    seen = []

    def consume():
        while True:
            m = ric.inbox(x).get()
            if m is None:
                return
            if isinstance(m, Indication):
                seen.append(m.seq)

    t = threading.Thread(target=consume)
    t.start()
    node.run(1.0)
    agent.close()
    conn.wait_closed(5)
    ric.shutdown()
    t.join(5)
    assert seen == list(range(1, 101))


def test_unsubscribe_stops_stream(ric):
    node = make_node()
    agent = agent_pair(ric, node)
    conn = ric.wait_for_node(2)
    x = ric.register_xapp("x")
    sub = ric.xapp_subscribe(x, 2, 100)
    node.run(0.3)
    inbox = ric.inbox(x)
    msgs = [inbox.get(timeout=2) for _ in range(3)]
    ric.xapp_unsubscribe(sub)
    # the agent thread queues the delete; the loop applies it at its next slot
    for _ in range(200):
        if not node.control.empty():
            break
        time.sleep(0.01)
    node.advance()
    assert sub not in node.windows
    node.run(0.5)
    agent.close()
    conn.wait_closed(5)
    while not inbox.empty():
        msgs.append(inbox.get())
    inds = [m for m in msgs if isinstance(m, Indication)]
    assert len(inds) == 3
    assert ("end", sub) in msgs
    assert ric.subscriptions[sub].status is SubStatus.DELETED


def test_agent_rejects_request_before_setup():
    node = make_node()
    a, b = pipe_pair()
    agent = E2Agent(node, a)
    with pytest.raises(E2AgentError):
        agent.handle(SubscriptionRequest(1, 2, 100))
    assert isinstance(recv(b), ErrorIndication)
