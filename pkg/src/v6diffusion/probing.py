"""Activity probers.

A prober answers "is this address active?" for a batch of addresses, with
verdicts aligned to the input order. Two implementations ship here: a
file-backed adapter for out-of-band scanners and a counting wrapper used to
audit probe budgets. The synthetic universe in `oracle` provides a third.
"""

from __future__ import annotations

from typing import Protocol, Sequence

from .addresses import Ipv6Address
from .errors import ProberUnavailable


class Prober(Protocol):
    def probe_batch(self, addresses: Sequence[Ipv6Address]) -> list[bool]:
        """Per-address activity verdicts, order-aligned with the input."""
        ...


class FileProber:
    """Verdicts backed by a scanner result file read ahead of time.

    The external workflow is: write a target list, run the scanner
    out-of-band, then feed its result file here. Addresses absent from the
    result set count as inactive. Optionally logs every queried address so
    the exact target list of a run can be reproduced for the scanner.
    """

    def __init__(self, active: set[int], target_log=None):
        self._active = active
        self._target_log = target_log

    @classmethod
    def from_results(cls, results, target_log=None) -> "FileProber":
        """Build from an iterable of `ScanResult`."""
        return cls({r.address.bits for r in results if r.active}, target_log)

    def probe_batch(self, addresses: Sequence[Ipv6Address]) -> list[bool]:
        if self._active is None:
            raise ProberUnavailable("no scan results loaded")
        if self._target_log is not None:
            for a in addresses:
                self._target_log.write(f"{a}\n")
        return [a.bits in self._active for a in addresses]


class CountingProber:
    """Wraps a prober and counts the addresses it is asked about."""

    def __init__(self, inner: Prober):
        self.inner = inner
        self.probes = 0
        self.calls = 0

    def probe_batch(self, addresses: Sequence[Ipv6Address]) -> list[bool]:
        self.calls += 1
        self.probes += len(addresses)
        return self.inner.probe_batch(addresses)
