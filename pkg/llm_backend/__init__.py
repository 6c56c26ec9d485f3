# LLM 后端模块
from .base import (
    BackendRequest, BackendResponse, CacheEntry, LLMBackend, request_fingerprint,
    BackendError, TransientBackendError, ScriptExhaustedError, ReplayMissError,
    DEFAULT_MAX_PARALLEL,
)
from .live import ChatAdapter, OpenAIChatAdapter, LiveBackend
from .scripted import ScriptEntry, ScriptedBackend
from .replay import ReplayBackend
from .factory import create_backend

__all__ = [
    'BackendRequest', 'BackendResponse', 'CacheEntry', 'LLMBackend', 'request_fingerprint',
    'BackendError', 'TransientBackendError', 'ScriptExhaustedError', 'ReplayMissError',
    'DEFAULT_MAX_PARALLEL',
    'ChatAdapter', 'OpenAIChatAdapter', 'LiveBackend',
    'ScriptEntry', 'ScriptedBackend', 'ReplayBackend', 'create_backend',
]
