"""Sectioned ``key = value`` spec files with byte-offset diagnostics.

The grammar is a small INI dialect::

    # comment
    [section name]
    key = value            # bare value
    other = "quoted value"

Section names may contain spaces (``[gen 1]``).  Errors carry the byte
offset of the offending token so that the CLI can report it.
"""

from __future__ import annotations

from dataclasses import dataclass, field


class SpecError(ValueError):
    """Malformed spec file; ``offset`` is a byte offset into the source."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at byte offset {offset}")
        self.offset = offset


@dataclass
class Section:
    name: str
    offset: int
    values: dict = field(default_factory=dict)
    offsets: dict = field(default_factory=dict)

    def get(self, key: str, default=None):
        return self.values.get(key, default)

    def require(self, key: str) -> str:
        if key not in self.values:
            raise SpecError(f"section [{self.name}] needs key {key!r}", self.offset)
        return self.values[key]

    def number(self, key: str, default=None, kind=float):
        if key not in self.values:
            if default is None:
                self.require(key)
            return default
        try:
            return kind(self.values[key].replace(" ", ""))
        except ValueError:
            raise SpecError(f"{key} is not a number", self.offsets[key]) from None

    def numbers(self, key: str, kind=float) -> list:
        """Comma-separated list of numbers (complex allowed with ``kind=complex``)."""
        raw = self.require(key)
        out = []
        for part in raw.split(","):
            try:
                out.append(kind(part.strip().replace(" ", "").replace("i", "j")))
            except ValueError:
                raise SpecError(f"{key}: cannot read {part.strip()!r}",
                                self.offsets[key]) from None
        return out


def parse_spec(source: str | bytes) -> dict:
    """Parse a spec file into ``{section name: Section}``."""
    data = source.encode() if isinstance(source, str) else bytes(source)
    sections: dict = {}
    current = None
    pos = 0
    for raw in data.split(b"\n"):
        start = pos
        pos += len(raw) + 1
        try:
            line = raw.decode()
        except UnicodeDecodeError as exc:
            raise SpecError("invalid UTF-8", start + exc.start) from None
        stripped = line.strip()
        lead = start + len(line.encode()) - len(line.lstrip().encode())
        if not stripped or stripped.startswith("#"):
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]") or len(stripped) < 3:
                raise SpecError("unterminated section header", lead)
            name = " ".join(stripped[1:-1].split())
            if name in sections:
                raise SpecError(f"duplicate section [{name}]", lead)
            current = sections[name] = Section(name, lead)
            continue
        if "=" not in line:
            raise SpecError("expected 'key = value'", lead)
        if current is None:
            raise SpecError("key outside of any section", lead)
        key, value = line.split("=", 1)
        key = key.strip()
        head = line[: line.index("=") + 1]
        value_offset = start + len((head + value[: len(value) - len(value.lstrip())]).encode())
        if not key or not key.replace("_", "").replace("-", "").isalnum():
            raise SpecError(f"invalid key {key!r}", lead)
        value = value.strip()
        if value.startswith('"'):
            end = value.find('"', 1)
            if end < 0:
                raise SpecError("unterminated string", value_offset)
            rest = value[end + 1:].strip()
            if rest and not rest.startswith("#"):
                raise SpecError("trailing characters after string", value_offset)
            value = value[1:end]
        else:
            value = value.split("#", 1)[0].strip()
        if key in current.values:
            raise SpecError(f"duplicate key {key!r}", lead)
        current.values[key] = value
        current.offsets[key] = value_offset
    return sections
