"""
在线后端
通过可插拔的聊天适配器调用模型，超时 + 一次重试
"""
import asyncio
import logging
from typing import Optional, Protocol

from tenacity import AsyncRetrying, retry_if_exception_type, stop_after_attempt, wait_fixed

from .base import (
    DEFAULT_MAX_PARALLEL, BackendError, BackendRequest, BackendResponse,
    LLMBackend, TransientBackendError,
)

logger = logging.getLogger(__name__)


class ChatAdapter(Protocol):
    """线协议适配边界：只有请求/响应契约是固定的"""

    async def complete(self, request: BackendRequest, timeout: float) -> BackendResponse:
        ...


class OpenAIChatAdapter:
    """OpenAI 兼容的 chat completions 适配器"""

    def __init__(self, api_key: str, base_url: Optional[str] = None):
        self.api_key = api_key
        self.base_url = base_url
        self._client = None

    def _get_client(self, timeout: float):
        import openai

        if self._client is None:
            self._client = openai.AsyncOpenAI(
                api_key=self.api_key,
                base_url=self.base_url,
                timeout=timeout,
                max_retries=0,
            )
        return self._client

    async def complete(self, request: BackendRequest, timeout: float) -> BackendResponse:
        import openai

        client = self._get_client(timeout)
        try:
            response = await client.chat.completions.create(
                model=request.model,
                messages=[{"role": "user", "content": request.prompt}],
                max_tokens=request.max_output_tokens,
                temperature=request.temperature,
            )
        except (openai.APITimeoutError, openai.APIConnectionError,
                openai.RateLimitError, openai.InternalServerError) as e:
            raise TransientBackendError(f"模型调用临时失败: {e}") from e
        except openai.OpenAIError as e:
            raise BackendError(f"模型调用失败: {e}") from e

        choice = response.choices[0]
        usage = None
        if response.usage is not None:
            usage = {
                'prompt_tokens': response.usage.prompt_tokens,
                'completion_tokens': response.usage.completion_tokens,
            }
        return BackendResponse(
            text=choice.message.content or "",
            finish_status=choice.finish_reason or "stop",
            usage=usage,
        )

    async def close(self):
        if self._client is not None:
            await self._client.close()
            self._client = None


class LiveBackend(LLMBackend):
    """在线后端：每次 send 一次网络调用，临时错误重试一次"""

    identifier = "live"

    def __init__(self, adapter: ChatAdapter, timeout: float = 60.0,
                 max_parallel: int = DEFAULT_MAX_PARALLEL, retry_wait: float = 1.0):
        super().__init__(max_parallel)
        self.adapter = adapter
        self.timeout = timeout
        self.retry_wait = retry_wait

    async def _attempt(self, request: BackendRequest) -> BackendResponse:
        self.calls += 1
        try:
            return await asyncio.wait_for(self.adapter.complete(request, self.timeout), timeout=self.timeout)
        except asyncio.TimeoutError as e:
            raise TransientBackendError(f"模型调用超时（{self.timeout}s）") from e

    async def _send(self, request: BackendRequest) -> BackendResponse:
        retrying = AsyncRetrying(
            stop=stop_after_attempt(2),
            wait=wait_fixed(self.retry_wait),
            retry=retry_if_exception_type(TransientBackendError),
            reraise=True,
        )
        async for attempt in retrying:
            with attempt:
                if attempt.retry_state.attempt_number > 1:
                    logger.warning(f"🔁 模型调用重试 ({request.model})")
                response = await self._attempt(request)
        return response

    async def close(self):
        closer = getattr(self.adapter, 'close', None)
        if closer is not None:
            await closer()
