"""
Versioned binary artifacts (snapshot cache, topic model, trained models).

Layout: MAGIC, one length-prefixed kind tag, a uint16 format version, then a
pickle of plain containers and numpy arrays. Payloads never hold sets, so
identical inputs give byte-identical files.
"""
import hashlib
import io
import pickle
import struct
from pathlib import Path
from typing import Any

from modules.errors import DataError

MAGIC = b"CITEPRED"
FORMAT_VERSION = 1
PICKLE_PROTOCOL = 4


def dumps_artifact(kind: str, payload: Any, version: int = FORMAT_VERSION) -> bytes:
    tag = kind.encode("ascii")
    buf = io.BytesIO()
    buf.write(MAGIC)
    buf.write(struct.pack("<B", len(tag)))
    buf.write(tag)
    buf.write(struct.pack("<H", version))
    pickle.dump(payload, buf, protocol=PICKLE_PROTOCOL)
    return buf.getvalue()


def loads_artifact(data: bytes, kind: str, version: int = FORMAT_VERSION) -> Any:
    if not data.startswith(MAGIC):
        raise DataError("not a citepred artifact (bad magic bytes)")
    offset = len(MAGIC)
    (tag_len,) = struct.unpack_from("<B", data, offset)
    offset += 1
    found_kind = data[offset:offset + tag_len].decode("ascii", errors="replace")
    offset += tag_len
    if found_kind != kind:
        raise DataError(f"artifact holds a {found_kind!r}, expected {kind!r}")
    (found_version,) = struct.unpack_from("<H", data, offset)
    offset += 2
    if found_version != version:
        raise DataError(f"{kind} artifact has format version {found_version}, this build reads {version}")
    return pickle.loads(data[offset:])


def write_artifact(path: Path, kind: str, payload: Any) -> str:
    """Write an artifact and return the sha256 of its bytes"""
    data = dumps_artifact(kind, payload)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(data)
    return hashlib.sha256(data).hexdigest()


def read_artifact(path: Path, kind: str) -> Any:
    try:
        with open(path, "rb") as f:
            data = f.read()
    except OSError as e:
        raise DataError(f"cannot read {kind} artifact {path}: {e}") from e
    return loads_artifact(data, kind)


def file_sha256(path: Path) -> str:
    with open(path, "rb") as f:
        return hashlib.sha256(f.read()).hexdigest()
