"""
后端工厂
根据配置创建 live / scripted / replay-record / replay-strict 后端
"""
import logging
import os
from typing import Optional

from dotenv import load_dotenv

from core_model.config import PipelineConfig
from core_model.errors import ConfigError

from .base import LLMBackend
from .live import LiveBackend, OpenAIChatAdapter
from .replay import ReplayBackend
from .scripted import ScriptedBackend

logger = logging.getLogger(__name__)


def _create_live(config: PipelineConfig) -> LiveBackend:
    load_dotenv()
    api_key = os.getenv(config.llm.api_key_env)
    if not api_key:
        raise ConfigError(f"在线后端需要环境变量 {config.llm.api_key_env}")
    adapter = OpenAIChatAdapter(api_key=api_key, base_url=config.llm.base_url)
    return LiveBackend(
        adapter,
        timeout=config.llm.timeout,
        max_parallel=config.llm.max_parallel,
        retry_wait=config.llm.retry_wait,
    )


def _create_scripted(config: PipelineConfig) -> ScriptedBackend:
    fixtures = config.resolve(config.paths.fixtures)
    if fixtures is None:
        raise ConfigError("脚本后端需要 paths.fixtures")
    return ScriptedBackend.from_file(str(fixtures), max_parallel=config.llm.max_parallel)


def create_backend(config: PipelineConfig, upstream: Optional[LLMBackend] = None) -> LLMBackend:
    """
    创建后端

    Args:
        config: 流水线配置
        upstream: 录制模式的上游后端（测试注入用），默认按 llm.upstream 创建

    Returns:
        LLMBackend 实例
    """
    name = config.llm.backend
    if name == "live":
        backend = _create_live(config)
    elif name == "scripted":
        backend = _create_scripted(config)
    else:
        cache = config.resolve(config.paths.cache)
        if cache is None:
            raise ConfigError(f"{name} 后端需要缓存路径（paths.cache 或 --cache）")
        if name == "replay-record":
            if upstream is None:
                upstream = _create_live(config) if config.llm.upstream == "live" else _create_scripted(config)
            backend = ReplayBackend(str(cache), mode="record", upstream=upstream, max_parallel=config.llm.max_parallel)
        else:
            backend = ReplayBackend(str(cache), mode="strict", max_parallel=config.llm.max_parallel)
    logger.info(f"🤖 使用后端: {name}")
    return backend
