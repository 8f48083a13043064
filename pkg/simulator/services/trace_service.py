"""
Trace log: append-only record of what happened during one run.

Records are plain tuples (kind, time_us, node, *fields) so they hash and
compare cheaply. Metrics, the detector and the oracle all read from here.

Record kinds:
    gen       (node, app_seq)
    deliver   (origin, app_seq, created_at)
    dup       (node, origin, app_seq)
    drop      (node, reason, packet_kind)
    tx        (sender, end, packet_kind, claimed_source, destination, attempt)
    cpu       (node, end)
    dio_rx    (node, claimed_source, rank)
    dio       (node, interval_us)          trickle DIO sent
    suppress  (node, interval_us)          trickle DIO suppressed
    trickle   (node, interval_us)          trickle interval start
    parent    (node, parent, rank, parent_rank, out_of_range)
    probe     (node, neighbor, verified, etx)
    dao       (node, event, parent)
    activate  (attacker,)
    capture   (attacker, claimed_source, rank)
    replay    (attacker,)
"""
import hashlib
import logging
from collections import Counter
from typing import Iterator, List, Tuple

logger = logging.getLogger(__name__)

TraceRecord = Tuple


class TraceLog:
    """Run trace plus the incremental counters kept alongside it"""

    def __init__(self):
        self.records: List[TraceRecord] = []
        self.counters: Counter = Counter()
        self.delay_total_us = 0

    def record(self, kind: str, t: int, node: int, *fields):
        self.records.append((kind, t, node) + fields)

    def count(self, name: str, amount: int = 1):
        self.counters[name] += amount

    def of_kind(self, kind: str) -> Iterator[TraceRecord]:
        return (r for r in self.records if r[0] == kind)

    def __len__(self) -> int:
        return len(self.records)

    def fingerprint(self) -> str:
        """SHA-256 over every record in order"""
        digest = hashlib.sha256()
        for record in self.records:
            digest.update(repr(record).encode())
            digest.update(b"\n")
        return digest.hexdigest()
