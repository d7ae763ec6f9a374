"""E2 message types and the KPM telemetry record they carry."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

KPM_FUNCTION_ID = 2

# SubscriptionResponse reason codes
REASON_OK = 0
REASON_UNKNOWN_FUNCTION = 1
REASON_BAD_PERIOD = 2
REASON_DUPLICATE_SUB_ID = 3

# ErrorIndication codes
ERR_PROTOCOL_VIOLATION = 1
ERR_UNKNOWN_SUBSCRIPTION = 2
ERR_SEQUENCE = 3
ERR_MALFORMED = 4


@dataclass(frozen=True)
class KpmRecord:
    t_ms: int
    ue_id: int
    dl_thp_kbps: float
    rb_count: int
    sdu_latency_us: Optional[int]  # None when no SDU completed in the window
    pos_cm: tuple[int, int, int]
    cqi: int
    mcs: int


@dataclass(frozen=True)
class RanFunction:
    function_id: int
    name: str


@dataclass(frozen=True)
class SetupRequest:
    node_id: int
    functions: tuple[RanFunction, ...]


@dataclass(frozen=True)
class SetupResponse:
    accepted_function_ids: tuple[int, ...]


@dataclass(frozen=True)
class SubscriptionRequest:
    sub_id: int
    function_id: int
    report_period_ms: int


@dataclass(frozen=True)
class SubscriptionResponse:
    sub_id: int
    accepted: bool
    reason_code: int = REASON_OK


@dataclass(frozen=True)
class Indication:
    sub_id: int
    seq: int
    records: tuple[KpmRecord, ...]


@dataclass(frozen=True)
class SubscriptionDelete:
    sub_id: int


@dataclass(frozen=True)
class ErrorIndication:
    code: int
    detail: str


E2Message = Union[
    SetupRequest,
    SetupResponse,
    SubscriptionRequest,
    SubscriptionResponse,
    Indication,
    SubscriptionDelete,
    ErrorIndication,
]

# 0x08 and up are reserved for control verbs
TYPE_TAGS: dict[type, int] = {
    SetupRequest: 0x01,
    SetupResponse: 0x02,
    SubscriptionRequest: 0x03,
    SubscriptionResponse: 0x04,
    Indication: 0x05,
    SubscriptionDelete: 0x06,
    ErrorIndication: 0x07,
}
