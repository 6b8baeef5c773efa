"""Token-bucket limiter shared by every request a client makes."""

from __future__ import annotations

import threading
import time


class TokenBucket:
    """Blocking token bucket: at most ``burst`` requests at once, refilled at ``rate`` per second."""

    def __init__(self, rate: float = 1.0, burst: int = 3, clock=time.monotonic, sleep=time.sleep):
        if rate <= 0 or burst < 1:
            raise ValueError("rate must be positive and burst at least 1")
        self.rate = rate
        self.burst = burst
        self._clock = clock
        self._sleep = sleep
        self._tokens = float(burst)
        self._last = clock()
        self._lock = threading.Lock()

    def _refill(self) -> None:
        now = self._clock()
        self._tokens = min(self.burst, self._tokens + (now - self._last) * self.rate)
        self._last = now

    def acquire(self) -> float:
        """Take one token, sleeping as needed. Returns the grant time on the limiter clock."""
        with self._lock:
            self._refill()
            if self._tokens < 1:
                self._sleep((1 - self._tokens) / self.rate)
                self._refill()
                # clock granularity can leave us a hair short
                self._tokens = max(self._tokens, 1.0)
            self._tokens -= 1
            return self._last
