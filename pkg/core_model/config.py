"""
流水线配置
YAML 分节配置（paths / mining / audit / index / llm / system），未知键一律拒绝
"""
import logging
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, ValidationError, model_validator

from .errors import ConfigError

logger = logging.getLogger(__name__)

BackendName = Literal["live", "scripted", "replay-record", "replay-strict"]


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsConfig(_Section):
    requirements: Optional[str] = None
    code_root: Optional[str] = None
    tracemap: Optional[str] = None
    output_dir: str = "output"
    cache: Optional[str] = None
    lexicon: Optional[str] = None
    fixtures: Optional[str] = None
    templates: Optional[str] = None


class MiningConfig(_Section):
    run_count: int = Field(default=3, ge=1)
    max_runs: int = Field(default=3, ge=1)
    batch_size: int = Field(default=40, ge=1)
    max_batch_size: int = Field(default=200, ge=1)
    temperature: float = Field(default=0.0, ge=0)
    max_output_tokens: int = Field(default=4096, gt=0)
    security_relevant: bool = False

    @model_validator(mode="after")
    def _bounds(self):
        if self.run_count > self.max_runs:
            raise ValueError(f"run_count {self.run_count} 超过 max_runs {self.max_runs}")
        if self.batch_size > self.max_batch_size:
            raise ValueError(f"batch_size {self.batch_size} 超过 max_batch_size {self.max_batch_size}")
        return self


class AuditConfig(_Section):
    temperature: float = Field(default=0.0, ge=0)
    max_output_tokens: int = Field(default=2048, gt=0)
    context_budget: int = Field(default=24 * 1024, gt=0)
    prompt_budget: int = Field(default=12 * 1024, gt=0)


class IndexConfig(_Section):
    include: List[str] = Field(default_factory=lambda: ["**/*"])
    exclude: List[str] = Field(default_factory=lambda: [
        ".git/**", ".hg/**", ".svn/**", "node_modules/**", "build/**", "dist/**", "__pycache__/**",
    ])
    window_lines: int = Field(default=40, ge=2)
    trace_bonus: int = Field(default=5, ge=0)
    max_workers: int = Field(default=8, ge=1)


class LLMConfig(_Section):
    backend: BackendName = "replay-strict"
    upstream: Literal["live", "scripted"] = "live"
    model: str = "gpt-4o-mini"
    base_url: Optional[str] = None
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = Field(default=60.0, gt=0)
    retry_wait: float = Field(default=1.0, ge=0)
    max_parallel: int = Field(default=4, ge=1)


class SystemConfig(_Section):
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = "INFO"
    timestamp: Optional[str] = None


class PipelineConfig(_Section):
    """完整配置；相对路径以配置文件所在目录为基准"""
    paths: PathsConfig = Field(default_factory=PathsConfig)
    mining: MiningConfig = Field(default_factory=MiningConfig)
    audit: AuditConfig = Field(default_factory=AuditConfig)
    index: IndexConfig = Field(default_factory=IndexConfig)
    llm: LLMConfig = Field(default_factory=LLMConfig)
    system: SystemConfig = Field(default_factory=SystemConfig)

    _base_dir: Path = PrivateAttr(default_factory=Path.cwd)

    @property
    def base_dir(self) -> Path:
        return self._base_dir

    def resolve(self, value: Optional[str]) -> Optional[Path]:
        """把配置中的路径解析为绝对路径"""
        if value is None:
            return None
        path = Path(value)
        return path if path.is_absolute() else (self._base_dir / path)

    def with_overrides(self, overrides: Dict[str, Dict[str, Any]]) -> "PipelineConfig":
        """按节覆盖配置值（命令行参数使用），覆盖后重新校验"""
        data = self.model_dump()
        for section, values in overrides.items():
            for key, value in values.items():
                if value is not None:
                    data[section][key] = value
        return _validated(data, self._base_dir)


def _validated(data: Dict, base_dir: Path) -> PipelineConfig:
    try:
        config = PipelineConfig.model_validate(data)
    except ValidationError as e:
        problems = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()]
        raise ConfigError("配置无效: " + "; ".join(problems)) from e
    config._base_dir = base_dir
    return config


def load_config(path: Optional[str] = None) -> PipelineConfig:
    """
    加载配置文件

    Args:
        path: YAML 配置路径；为 None 时使用全部默认值（相对路径基于当前目录）

    Raises:
        ConfigError: 文件缺失、YAML 语法错误或存在未知键
    """
    if path is None:
        return _validated({}, Path.cwd())
    try:
        with open(path, 'r', encoding='utf-8') as f:
            data = yaml.safe_load(f)
    except FileNotFoundError as e:
        raise ConfigError(f"配置文件 {path} 不存在") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"配置文件 {path} 不是合法 YAML: {e}") from e
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"配置文件 {path} 顶层必须是映射")
    return _validated(data, Path(path).resolve().parent)
