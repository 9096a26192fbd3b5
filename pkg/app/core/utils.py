import hashlib
import json
from pathlib import Path
from typing import Any

from app.core.errors import DataError
from app.core.logger import logger


def derive_seed(master: int, tag: str) -> int:
    """Derive an independent 63-bit seed from the master seed and a purpose tag.

    All randomness in the laboratory flows through this function: seed = first eight
    bytes of blake2b("{master}:{tag}"), read big-endian, top bit cleared.
    """
    digest = hashlib.blake2b(f"{master}:{tag}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big") & 0x7FFF_FFFF_FFFF_FFFF


def write_json(path: Path, payload: Any) -> Path:
    """Write JSON with sorted keys and a trailing newline so reruns are byte-identical."""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.debug(f"Wrote {path}")
    return path


def read_json(path: Path) -> Any:
    """Read a JSON document, turning I/O and syntax problems into DataError."""
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as e:
        raise DataError(f"File not found: {path}") from e
    except json.JSONDecodeError as e:
        logger.error(f"Failed to parse JSON document {path}: {e}")
        raise DataError(f"Malformed JSON in {path}", details=str(e)) from e
