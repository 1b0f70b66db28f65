"""Accounting of estimator-owned numeric buffers.

Estimator code passes every large array it allocates through :func:`track`.
While a :class:`BufferMeter` is active the bytes of live tracked arrays are
summed and the high-water mark recorded; arrays are released automatically
when garbage collected. Outside a meter, :func:`track` is a no-op.
"""

from __future__ import annotations

import contextvars
import threading
import weakref
from contextlib import contextmanager

import numpy as np

_active: contextvars.ContextVar["BufferMeter | None"] = contextvars.ContextVar(
    "specden_buffer_meter", default=None
)


class BufferMeter:
    def __init__(self):
        self._lock = threading.Lock()
        self.live_bytes = 0
        self.peak_bytes = 0
        self.n_tracked = 0

    def _add(self, nbytes: int) -> None:
        with self._lock:
            self.live_bytes += nbytes
            self.n_tracked += 1
            if self.live_bytes > self.peak_bytes:
                self.peak_bytes = self.live_bytes

    def reset_peak(self) -> None:
        """Start a new phase: the high-water mark restarts from the live total."""
        with self._lock:
            self.peak_bytes = self.live_bytes

    def _release(self, nbytes: int) -> None:
        with self._lock:
            self.live_bytes -= nbytes


def track(arr: np.ndarray) -> np.ndarray:
    """Register ``arr`` with the active meter (if any) and return it."""
    meter = _active.get()
    if meter is None or not isinstance(arr, np.ndarray):
        return arr
    base = arr if arr.base is None else arr.base
    if not isinstance(base, np.ndarray):
        base = arr
    nbytes = int(base.nbytes)
    meter._add(nbytes)
    weakref.finalize(base, meter._release, nbytes)
    return arr


@contextmanager
def metered():
    """Activate a fresh :class:`BufferMeter` for the enclosed block."""
    meter = BufferMeter()
    token = _active.set(meter)
    try:
        yield meter
    finally:
        _active.reset(token)
