"""Download block metadata from an Ethereum JSON-RPC endpoint into ``blocks.csv``.

The output file doubles as the checkpoint: heights already present are
skipped on restart, and each batch is appended only once all of its blocks
have been fetched.
"""

from __future__ import annotations

import csv
import json
import logging
import threading
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Optional

from .ingestion import HEADERS

log = logging.getLogger(__name__)


class FetchError(RuntimeError):
    pass


class RateLimiter:
    """Spaces calls at least ``1 / rate`` seconds apart across threads."""

    def __init__(self, rate: float, clock=time.monotonic, sleep=time.sleep):
        self.interval = 0.0 if rate <= 0 else 1.0 / rate
        self._next = 0.0
        self._lock = threading.Lock()
        self._clock = clock
        self._sleep = sleep

    def wait(self):
        with self._lock:
            now = self._clock()
            at = max(now, self._next)
            self._next = at + self.interval
        if at > now:
            self._sleep(at - now)


class RpcClient:
    def __init__(
        self,
        endpoint: str,
        rate: float = 10.0,
        retries: int = 5,
        backoff: float = 0.5,
        timeout: float = 30.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.retries = retries
        self.backoff = backoff
        self.timeout = timeout
        self.sleep = sleep
        self.limiter = RateLimiter(rate, sleep=sleep)
        self._id = 0
        self._id_lock = threading.Lock()

    def call(self, method: str, params: list):
        with self._id_lock:
            self._id += 1
            req_id = self._id
        body = json.dumps({"jsonrpc": "2.0", "id": req_id, "method": method, "params": params}).encode()
        last: Optional[Exception] = None
        for attempt in range(self.retries + 1):
            if attempt:
                self.sleep(self.backoff * 2 ** (attempt - 1))
            self.limiter.wait()
            try:
                request = urllib.request.Request(self.endpoint, data=body, headers={"Content-Type": "application/json"})
                with urllib.request.urlopen(request, timeout=self.timeout) as resp:
                    doc = json.loads(resp.read())
                if "error" in doc and doc["error"]:
                    raise FetchError(f"{method}: {doc['error']}")
                return doc["result"]
            except (urllib.error.URLError, OSError, ValueError, KeyError, FetchError) as exc:
                last = exc
                log.debug("attempt %d for %s failed: %s", attempt + 1, method, exc)
        raise FetchError(f"{method} failed after {self.retries + 1} attempts: {last}")

    def block_row(self, height: int) -> list:
        block = self.call("eth_getBlockByNumber", [hex(height), False])
        if block is None:
            raise FetchError(f"block {height} not found")
        extra = block.get("extraData") or "0x"
        return [int(block["number"], 16), int(block["timestamp"], 16), block["miner"].lower(), extra[2:].lower()]


def existing_heights(path: Path) -> set[int]:
    if not path.exists():
        return set()
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        next(reader, None)
        return {int(row[0]) for row in reader if row}


def fetch_blocks(
    client: RpcClient,
    start: int,
    end: int,
    out_path,
    concurrency: int = 4,
    batch_size: int = 100,
    progress: Optional[Callable[[int, int], None]] = None,
) -> int:
    """Fetch heights ``start..end`` inclusive into ``out_path``; returns rows written."""
    if end < start:
        raise ValueError("end height is below start height")
    out = Path(out_path)
    done = existing_heights(out)
    todo = [h for h in range(start, end + 1) if h not in done]
    if not out.exists():
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(",".join(HEADERS["blocks"]) + "\n", encoding="utf-8")
    written = 0
    with ThreadPoolExecutor(max_workers=max(1, concurrency)) as pool:
        for i in range(0, len(todo), batch_size):
            batch = todo[i : i + batch_size]
            rows = sorted(pool.map(client.block_row, batch))
            with open(out, "a", newline="", encoding="utf-8") as f:
                csv.writer(f, lineterminator="\n").writerows(rows)
            written += len(rows)
            if progress:
                progress(written, len(todo))
    return written
