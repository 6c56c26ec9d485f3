"""
提示词模板
模板是 templates/ 下的 Jinja2 文本文件，模板源文件的 SHA-256 记入 run_meta.template_hash
"""
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from jinja2 import Environment, FileSystemLoader, StrictUndefined, TemplateNotFound

from .errors import ConfigError

TEMPLATE_DIR = Path(__file__).resolve().parent.parent / "templates"


@dataclass(frozen=True)
class PromptTemplate:
    """已加载的模板及其源文件哈希"""
    name: str
    source_hash: str
    _template: object

    def render(self, **context) -> str:
        return self._template.render(**context)


def load_template(name: str, template_dir: Optional[Path] = None) -> PromptTemplate:
    directory = Path(template_dir) if template_dir else TEMPLATE_DIR
    env = Environment(
        loader=FileSystemLoader(str(directory)),
        undefined=StrictUndefined,
        trim_blocks=True,
        lstrip_blocks=True,
        keep_trailing_newline=True,
        autoescape=False,
    )
    try:
        template = env.get_template(name)
    except TemplateNotFound as e:
        raise ConfigError(f"提示词模板不存在: {directory / name}") from e
    digest = hashlib.sha256((directory / name).read_bytes()).hexdigest()
    return PromptTemplate(name=name, source_hash=digest, _template=template)
