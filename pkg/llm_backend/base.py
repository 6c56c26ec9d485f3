"""
LLM 后端契约
请求/响应/缓存条目类型、请求指纹，以及所有后端共享的并发上限
"""
import asyncio
import hashlib
import json
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Mapping, Optional

from core_model.errors import ReqAuditError

logger = logging.getLogger(__name__)

DEFAULT_MAX_PARALLEL = 4


class BackendError(ReqAuditError):
    """后端调用失败"""


class TransientBackendError(BackendError):
    """可重试的临时错误（超时、连接、限流、服务端 5xx）"""


class ScriptExhaustedError(BackendError):
    """脚本后端没有可用的匹配响应，说明测试夹具有缺陷"""


class ReplayMissError(BackendError):
    """严格回放模式下缓存未命中，说明提示词构造不确定"""


@dataclass(frozen=True)
class BackendRequest:
    """一次模型调用请求，完全决定指纹"""
    model: str
    prompt: str
    temperature: float = 0.0
    max_output_tokens: int = 2048

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError(f"temperature 不能为负: {self.temperature}")
        if self.max_output_tokens <= 0:
            raise ValueError(f"max_output_tokens 必须为正: {self.max_output_tokens}")

    def canonical(self) -> str:
        """规范序列化：键排序、紧凑分隔、ASCII 转义、温度用 repr(float)"""
        return json.dumps(
            {
                'max_output_tokens': int(self.max_output_tokens),
                'model': self.model,
                'prompt': self.prompt,
                'temperature': repr(float(self.temperature)),
            },
            sort_keys=True,
            separators=(',', ':'),
            ensure_ascii=True,
        )

    def to_dict(self) -> Dict:
        return {
            'model': self.model,
            'prompt': self.prompt,
            'temperature': float(self.temperature),
            'max_output_tokens': self.max_output_tokens,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "BackendRequest":
        return cls(
            model=data['model'],
            prompt=data['prompt'],
            temperature=float(data['temperature']),
            max_output_tokens=int(data['max_output_tokens']),
        )


@dataclass(frozen=True)
class BackendResponse:
    """模型回复"""
    text: str
    finish_status: str = "stop"
    usage: Optional[Dict[str, int]] = None

    def to_dict(self) -> Dict:
        return {'text': self.text, 'finish_status': self.finish_status, 'usage': self.usage}

    @classmethod
    def from_dict(cls, data: Mapping) -> "BackendResponse":
        return cls(text=data['text'], finish_status=data.get('finish_status', 'stop'), usage=data.get('usage'))


def request_fingerprint(request: BackendRequest) -> str:
    """请求指纹：规范序列化的 SHA-256"""
    return hashlib.sha256(request.canonical().encode('ascii')).hexdigest()


@dataclass(frozen=True)
class CacheEntry:
    """回放缓存中的一行"""
    fingerprint: str
    request: BackendRequest
    response: BackendResponse
    recorded_at: str

    def __post_init__(self):
        if self.fingerprint != request_fingerprint(self.request):
            raise ValueError(f"缓存条目指纹不匹配: {self.fingerprint[:12]}")

    def to_line(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    def to_dict(self) -> Dict:
        return {
            'fingerprint': self.fingerprint,
            'request': self.request.to_dict(),
            'response': self.response.to_dict(),
            'recorded_at': self.recorded_at,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CacheEntry":
        return cls(
            fingerprint=data['fingerprint'],
            request=BackendRequest.from_dict(data['request']),
            response=BackendResponse.from_dict(data['response']),
            recorded_at=data.get('recorded_at', ''),
        )


class LLMBackend(ABC):
    """
    后端基类

    send 可并发调用，同时在途的请求数不超过 max_parallel。
    子类只需实现 _send。
    """

    identifier = "abstract"

    def __init__(self, max_parallel: int = DEFAULT_MAX_PARALLEL):
        if max_parallel < 1:
            raise ValueError(f"max_parallel 必须 ≥ 1: {max_parallel}")
        self.max_parallel = max_parallel
        self.calls = 0
        self._semaphore: Optional[asyncio.Semaphore] = None
        self._semaphore_loop = None

    def _get_semaphore(self) -> asyncio.Semaphore:
        loop = asyncio.get_running_loop()
        if self._semaphore is None or self._semaphore_loop is not loop:
            self._semaphore = asyncio.Semaphore(self.max_parallel)
            self._semaphore_loop = loop
        return self._semaphore

    async def send(self, request: BackendRequest) -> BackendResponse:
        async with self._get_semaphore():
            return await self._send(request)

    @abstractmethod
    async def _send(self, request: BackendRequest) -> BackendResponse:
        ...

    async def close(self):
        """释放资源（默认无操作）"""
