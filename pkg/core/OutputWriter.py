import json
import math
import os
from datetime import datetime
from typing import Any, Iterable, List, Sequence

from filelock import FileLock, Timeout

from services.config.context import RunContext
from utils.config import APP_VERSION
from utils.logging_config import get_component_logger

logger = get_component_logger("cli")

LOCK_TIMEOUT = 10


def _clean(value: Any) -> Any:
    """JSON-safe copy: non-finite floats become strings, tuples become lists."""
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if hasattr(value, "item") and not isinstance(value, (str, bytes)):
        return _clean(value.item())
    return value


def _cell(value: Any) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


class OutputWriter:
    """Writes deterministic data files plus a separate metadata file per run."""

    def __init__(self, context: RunContext):
        self.context = context
        self.written: List[str] = []
        self.started_at = datetime.now()
        os.makedirs(context.output_dir, exist_ok=True)

    def _locked_write(self, name: str, text: str) -> str:
        path = self.context.get_output_file(name)
        try:
            with FileLock(path + ".lock", timeout=LOCK_TIMEOUT):
                with open(path, "w", encoding="utf-8", newline="") as f:
                    f.write(text)
        except Timeout:
            logger.error(f"Could not acquire lock for {path} within {LOCK_TIMEOUT}s")
            raise
        finally:
            if os.path.exists(path + ".lock"):
                try:
                    os.remove(path + ".lock")
                except OSError:
                    pass
        self.written.append(name)
        logger.debug(f"Wrote {path}")
        return path

    def write_json(self, name: str, payload: dict) -> str:
        text = json.dumps(_clean(payload), sort_keys=True, indent=2) + "\n"
        return self._locked_write(name, text)

    def write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
        lines = [",".join(header)]
        lines.extend(",".join(_cell(v) for v in row) for row in rows)
        return self._locked_write(name, "\n".join(lines) + "\n")

    def write_meta(self, exit_code: int, **extra: Any) -> str:
        """Run metadata; the only file carrying wall-clock information."""
        finished = datetime.now()
        meta = {
            "version": APP_VERSION,
            "command": self.context.command,
            "scenario": self.context.scenario.name,
            "scenario_hash": self.context.scenario_hash,
            "started_at": self.started_at.isoformat(timespec="seconds"),
            "runtime_seconds": round((finished - self.started_at).total_seconds(), 3),
            "exit_code": exit_code,
            "files": sorted(self.written),
            **extra,
        }
        return self.write_json(f"{self.context.command}.meta.json", meta)
