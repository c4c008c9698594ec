"""Minimal TOML reading/writing for device files, run configs, and reports.

Parsing uses the standard library (tomllib on 3.11+, tomli before). Writing
is a small canonical emitter for the restricted shapes this package uses
(scalars, flat lists, nested tables, arrays of tables), so serialized
configs round-trip byte-identically.
"""

from __future__ import annotations

from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


def loads(text: str) -> dict:
    return tomllib.loads(text)


def load(path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _format_scalar(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        text = repr(value)
        if "e" not in text and "." not in text and "inf" not in text and "nan" not in text:
            text += ".0"
        return text
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    raise TypeError(f"cannot serialize {type(value).__name__} to TOML")


def _format_value(value: Any) -> str:
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format_value(v) for v in value) + "]"
    return _format_scalar(value)


def _emit_table(lines: list[str], table: dict, prefix: str) -> None:
    scalars = {k: v for k, v in table.items()
               if not isinstance(v, dict)
               and not (isinstance(v, (list, tuple)) and v and isinstance(v[0], dict))}
    subtables = {k: v for k, v in table.items() if isinstance(v, dict)}
    arrays = {k: v for k, v in table.items()
              if isinstance(v, (list, tuple)) and v and isinstance(v[0], dict)}

    for key, value in scalars.items():
        lines.append(f"{key} = {_format_value(value)}")
    for key, sub in subtables.items():
        name = f"{prefix}{key}"
        lines.append("")
        lines.append(f"[{name}]")
        _emit_table(lines, sub, name + ".")
    for key, items in arrays.items():
        name = f"{prefix}{key}"
        for item in items:
            lines.append("")
            lines.append(f"[[{name}]]")
            _emit_table(lines, item, name + ".")


def dumps(data: dict) -> str:
    lines: list[str] = []
    _emit_table(lines, data, "")
    while lines and lines[0] == "":
        lines.pop(0)
    return "\n".join(lines) + "\n"


def dump(data: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(data))
