"""Deterministic merging of static script templates with validated parameters.

Placeholders look like {{name}} and each template carries a strict schema; no
logic, loops, or free-form substitution. String values are embedded as quoted
literals with every quote, backslash, newline, and brace escaped, so no
parameter value can alter the statement structure of the script.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from typing import Any, Mapping, Sequence

from playground.errors import PlaygroundError

_PLACEHOLDER_RE = re.compile(r"\{\{([A-Za-z_][A-Za-z0-9_]*)\}\}")

# minimal set keeping literals single-line and brace-free; braces are escaped
# so rendered sources never contain a residual "{{"
_CHAR_ESCAPES = {
    "\\": "\\\\",
    '"': '\\"',
    "\n": "\\n",
    "\r": "\\r",
    "\t": "\\t",
    "{": "\\u007b",
    "}": "\\u007d",
}


class MissingParam(PlaygroundError):
    def __init__(self, name: str):
        super().__init__(f"missing template parameter: {name}")
        self.name = name


class ExtraParam(PlaygroundError):
    def __init__(self, name: str):
        super().__init__(f"unexpected template parameter: {name}")
        self.name = name


class KindMismatch(PlaygroundError):
    def __init__(self, name: str, expected: str):
        super().__init__(f"parameter {name!r} is not a {expected}")
        self.name = name
        self.expected = expected


class ValueKind(str, Enum):
    STRING = "string"
    NUMBER = "number"
    BOOLEAN = "boolean"
    STRING_LIST = "string_list"


@dataclass(frozen=True)
class PlaceholderSpec:
    name: str
    kind: ValueKind


@dataclass(frozen=True)
class ScriptTemplate:
    template_id: str
    body: str
    schema: tuple[PlaceholderSpec, ...]

    def __post_init__(self) -> None:
        in_body = set(_PLACEHOLDER_RE.findall(self.body))
        in_schema = {p.name for p in self.schema}
        if in_body != in_schema:
            missing = in_schema - in_body
            extra = in_body - in_schema
            raise ValueError(
                f"template {self.template_id!r} schema mismatch: "
                f"unused schema entries {sorted(missing)}, unschema'd placeholders {sorted(extra)}"
            )
        if len(in_schema) != len(self.schema):
            raise ValueError(f"template {self.template_id!r} has duplicate schema names")


@dataclass(frozen=True)
class RenderedScript:
    template_id: str
    source: str
    content_hash: str
    parameter_snapshot: Mapping[str, Any]


def _quote(value: str) -> str:
    out = []
    for ch in value:
        esc = _CHAR_ESCAPES.get(ch)
        if esc is not None:
            out.append(esc)
        elif ord(ch) < 0x20 or ord(ch) == 0x7F:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    return '"' + "".join(out) + '"'


def _format_value(name: str, kind: ValueKind, value: Any) -> str:
    if kind is ValueKind.STRING:
        if not isinstance(value, str):
            raise KindMismatch(name, "string")
        return _quote(value)
    if kind is ValueKind.NUMBER:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise KindMismatch(name, "number")
        return repr(value)
    if kind is ValueKind.BOOLEAN:
        if not isinstance(value, bool):
            raise KindMismatch(name, "boolean")
        return "True" if value else "False"
    if kind is ValueKind.STRING_LIST:
        if isinstance(value, str) or not isinstance(value, (list, tuple)):
            raise KindMismatch(name, "string_list")
        if any(not isinstance(v, str) for v in value):
            raise KindMismatch(name, "string_list")
        return "[" + ", ".join(_quote(v) for v in value) + "]"
    raise KindMismatch(name, kind.value)


def render(template: ScriptTemplate, params: Mapping[str, Any]) -> RenderedScript:
    """Merge params into the template; byte-identical output for identical input."""
    schema = {p.name: p.kind for p in template.schema}
    for name in params:
        if name not in schema:
            raise ExtraParam(name)
    formatted: dict[str, str] = {}
    for name, kind in schema.items():
        if name not in params:
            raise MissingParam(name)
        formatted[name] = _format_value(name, kind, params[name])

    source = _PLACEHOLDER_RE.sub(lambda m: formatted[m.group(1)], template.body)
    if "{{" in source:
        raise ValueError(f"template {template.template_id!r} left a residual placeholder")
    digest = hashlib.sha256(source.encode("utf-8")).hexdigest()
    return RenderedScript(
        template_id=template.template_id,
        source=source,
        content_hash=digest,
        parameter_snapshot=dict(params),
    )


_SCHEMAS: dict[str, tuple[PlaceholderSpec, ...]] = {
    "predict": (
        PlaceholderSpec("task_id", ValueKind.STRING),
        PlaceholderSpec("dataset_id", ValueKind.STRING),
        PlaceholderSpec("architecture", ValueKind.STRING),
        PlaceholderSpec("base_model_id", ValueKind.STRING),
        PlaceholderSpec("labels", ValueKind.STRING_LIST),
        PlaceholderSpec("pair_task", ValueKind.BOOLEAN),
        PlaceholderSpec("mock", ValueKind.BOOLEAN),
    ),
    "train": (
        PlaceholderSpec("task_id", ValueKind.STRING),
        PlaceholderSpec("dataset_id", ValueKind.STRING),
        PlaceholderSpec("architecture", ValueKind.STRING),
        PlaceholderSpec("base_model_id", ValueKind.STRING),
        PlaceholderSpec("labels", ValueKind.STRING_LIST),
        PlaceholderSpec("learning_rate", ValueKind.NUMBER),
        PlaceholderSpec("epochs", ValueKind.NUMBER),
        PlaceholderSpec("seed", ValueKind.NUMBER),
        PlaceholderSpec("mock", ValueKind.BOOLEAN),
    ),
    "cluster_embed": (
        PlaceholderSpec("embedding_dim", ValueKind.NUMBER),
        PlaceholderSpec("mock", ValueKind.BOOLEAN),
    ),
}

_TEMPLATE_ORDER = ("predict", "train", "cluster_embed")
_catalog_cache: list[ScriptTemplate] | None = None


def template_catalog() -> list[ScriptTemplate]:
    """The three built-in templates in stable order (predict, train, cluster_embed)."""
    global _catalog_cache
    if _catalog_cache is None:
        templates = []
        for template_id in _TEMPLATE_ORDER:
            body = (
                resources.files("playground")
                .joinpath(f"templates/{template_id}.py.tmpl")
                .read_text(encoding="utf-8")
            )
            templates.append(
                ScriptTemplate(template_id=template_id, body=body, schema=_SCHEMAS[template_id])
            )
        _catalog_cache = templates
    return list(_catalog_cache)


def get_template(template_id: str) -> ScriptTemplate:
    for template in template_catalog():
        if template.template_id == template_id:
            return template
    raise KeyError(f"unknown template {template_id!r}")


def extract_string_literals(source: str) -> list[str]:
    """Decode every module-level simple string assignment in a rendered script.

    Test hook for the injection-safety contract: rendering then extracting must
    recover parameter strings exactly.
    """
    import ast

    tree = ast.parse(source)
    values = []
    for node in ast.walk(tree):
        if isinstance(node, ast.Constant) and isinstance(node.value, str):
            values.append(node.value)
    return values


def statement_count(source: str) -> int:
    """Number of top-level statements in a script."""
    import ast

    return len(ast.parse(source).body)
