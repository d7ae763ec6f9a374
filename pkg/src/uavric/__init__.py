"""Deterministic desk-scale reproduction of an O-RAN testbed with aerial UEs.

A slot-level gNB simulator (TDD frame, channel, PF scheduler, RLC queues)
reports KPM metrics over a small binary E2-style protocol to a near-RT RIC,
which stores them and fans them out to a monitoring xApp.
"""

__version__ = "0.1.0"
