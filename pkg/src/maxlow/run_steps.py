from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from typing import Iterator

logger = logging.getLogger(__name__)


def _truncate_error(message: str | None) -> str | None:
    if not message:
        return None
    return message[:2000]


@contextmanager
def run_step(name: str, timings: dict[str, float] | None = None, **context) -> Iterator[None]:
    """Time one pipeline stage, log its outcome and store the elapsed seconds."""
    started = time.perf_counter()
    logger.debug("step started", extra={"stage": name, **context})
    try:
        yield
    except Exception as exc:
        elapsed = time.perf_counter() - started
        logger.warning(
            "step failed",
            extra={
                "stage": name,
                "elapsed_s": round(elapsed, 6),
                "error": _truncate_error(str(exc)),
                **context,
            },
        )
        raise
    else:
        elapsed = time.perf_counter() - started
        if timings is not None:
            timings[name] = elapsed
        logger.info(
            "step completed", extra={"stage": name, "elapsed_s": round(elapsed, 6), **context}
        )
