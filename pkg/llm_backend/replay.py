"""
录制/回放后端
缓存为 JSONL，每行一个 CacheEntry，只追加不改写
"""
import asyncio
import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Dict, Optional

from core_model.errors import ConfigError

from .base import (
    DEFAULT_MAX_PARALLEL, BackendRequest, BackendResponse, CacheEntry,
    LLMBackend, ReplayMissError, request_fingerprint,
)

logger = logging.getLogger(__name__)

MODES = ("record", "strict")


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec='seconds')


class ReplayBackend(LLMBackend):
    """
    回放后端

    record 模式：命中则返回缓存，未命中则调用上游并追加一行；
    strict 模式：只读缓存，未命中即报错，不会产生任何上游调用。
    """

    identifier = "replay"

    def __init__(self, cache_path: str, mode: str = "strict",
                 upstream: Optional[LLMBackend] = None,
                 max_parallel: int = DEFAULT_MAX_PARALLEL,
                 clock: Callable[[], str] = _utc_now):
        super().__init__(max_parallel)
        if mode not in MODES:
            raise ConfigError(f"未知回放模式: {mode}")
        if mode == "record" and upstream is None:
            raise ConfigError("record 模式需要上游后端")
        self.cache_path = Path(cache_path)
        self.mode = mode
        self.upstream = upstream
        self.clock = clock
        self.hits = 0
        self.upstream_calls = 0
        self._entries: Dict[str, CacheEntry] = {}
        self._key_locks: Dict[str, asyncio.Lock] = {}
        self._write_lock = asyncio.Lock()
        self._load()

    def _load(self):
        if not self.cache_path.exists():
            if self.mode == "strict":
                logger.warning(f"回放缓存 {self.cache_path} 不存在，所有请求都会未命中")
            return
        with open(self.cache_path, 'r', encoding='utf-8') as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    entry = CacheEntry.from_dict(json.loads(line))
                except (ValueError, KeyError, TypeError) as e:
                    logger.warning(f"回放缓存第 {line_no} 行无效，已跳过: {e}")
                    continue
                self._entries.setdefault(entry.fingerprint, entry)
        logger.info(f"💾 已加载回放缓存 {self.cache_path.name}: {len(self._entries)} 条")

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, request: BackendRequest) -> bool:
        return request_fingerprint(request) in self._entries

    async def _append(self, entry: CacheEntry):
        async with self._write_lock:
            self.cache_path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.cache_path, 'a', encoding='utf-8') as f:
                f.write(entry.to_line() + "\n")

    async def _send(self, request: BackendRequest) -> BackendResponse:
        fingerprint = request_fingerprint(request)
        entry = self._entries.get(fingerprint)
        if entry is not None:
            self.hits += 1
            return entry.response
        if self.mode == "strict":
            raise ReplayMissError(f"回放缓存未命中 {fingerprint[:12]}，提示词构造可能不确定")

        # 相同请求并发未命中时只调用一次上游
        lock = self._key_locks.setdefault(fingerprint, asyncio.Lock())
        async with lock:
            entry = self._entries.get(fingerprint)
            if entry is not None:
                self.hits += 1
                return entry.response
            response = await self.upstream.send(request)
            self.upstream_calls += 1
            entry = CacheEntry(fingerprint=fingerprint, request=request, response=response, recorded_at=self.clock())
            await self._append(entry)
            self._entries[fingerprint] = entry
            logger.debug(f"录制 {fingerprint[:12]}")
            return response

    async def close(self):
        if self.upstream is not None:
            await self.upstream.close()
