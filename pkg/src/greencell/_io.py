"""Small file helpers shared by the scenario, run and checkpoint formats."""
from __future__ import annotations

import csv
import io
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib
import tomli_w


class FormatError(ValueError):
    """Malformed input file. The message names the file, line and field."""

    def __init__(self, path, line: int | None, field: str | None, msg: str):
        self.path = str(path)
        self.line = line
        self.field = field
        where = Path(self.path).name
        if line is not None:
            where += f":{line}"
        if field:
            where += f" [{field}]"
        super().__init__(f"{where}: {msg}")


def fmt(x: float) -> str:
    """Shortest text that parses back to the same float."""
    return repr(float(x))


def atomic_write_bytes(path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    atomic_write_bytes(path, buf.getvalue().encode())


def write_toml(path, data: dict) -> None:
    atomic_write_bytes(path, tomli_w.dumps(data).encode())


def read_toml(path) -> dict:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise FormatError(path, None, None, "file not found") from None
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        raise FormatError(path, line, None, f"invalid manifest: {exc}") from None


class CsvReader:
    """Iterate rows of a CSV file with an exact header, with typed accessors
    that raise :class:`FormatError` naming the offending line and field."""

    def __init__(self, path, header: Sequence[str]):
        self.path = Path(path)
        self.header = list(header)
        if not self.path.exists():
            raise FormatError(self.path, None, None, "file not found")

    def __iter__(self):
        with open(self.path, newline="") as fh:
            text = fh.read()
        if text and not text.endswith("\n"):
            n = text.count("\n") + 1
            raise FormatError(self.path, n, None, "truncated file (last line unterminated)")
        rows = csv.reader(io.StringIO(text))
        try:
            head = next(rows)
        except StopIteration:
            raise FormatError(self.path, 1, None, "empty file") from None
        if head != self.header:
            raise FormatError(self.path, 1, None, f"expected header {','.join(self.header)}")
        for row in rows:
            line = rows.line_num
            if len(row) != len(self.header):
                raise FormatError(self.path, line, None,
                                  f"expected {len(self.header)} fields, got {len(row)}")
            yield _Row(self.path, line, dict(zip(self.header, row)))


class _Row:
    __slots__ = ("path", "line", "values")

    def __init__(self, path, line, values):
        self.path, self.line, self.values = path, line, values

    def str(self, name: str) -> str:
        v = self.values[name]
        if not v:
            raise FormatError(self.path, self.line, name, "empty value")
        return v

    def float(self, name: str) -> float:
        v = self.values[name]
        try:
            x = float(v)
        except ValueError:
            raise FormatError(self.path, self.line, name, f"not a number: {v!r}") from None
        if x != x or x in (float("inf"), float("-inf")):
            raise FormatError(self.path, self.line, name, f"non-finite value {v!r}")
        return x

    def int(self, name: str) -> int:
        v = self.values[name]
        try:
            return int(v)
        except ValueError:
            raise FormatError(self.path, self.line, name, f"not an integer: {v!r}") from None

    def bool(self, name: str) -> bool:
        v = self.values[name]
        if v not in ("0", "1"):
            raise FormatError(self.path, self.line, name, f"expected 0 or 1, got {v!r}")
        return v == "1"
