"""Tracing spans and counters around workflow stages."""

from contextlib import AbstractContextManager, nullcontext
from typing import Any, Dict, Optional

import structlog

from irregular_forecast.config import settings


def create_span(
    name: str, resource: Optional[str] = None, tags: Optional[Dict[str, Any]] = None
) -> AbstractContextManager[Any]:
    """Create a ddtrace span, or a no-op context when tracing is off."""
    if not settings.tracing_enabled:
        return nullcontext()

    try:
        import ddtrace
    except ImportError:
        return nullcontext()

    span = ddtrace.tracer.trace(name, service=settings.service_name, resource=resource or name)
    for key, value in (tags or {}).items():
        span.set_tag(key, value)
    return span


def increment_counter(metric_name: str, value: int = 1, tags: Optional[dict[str, Any]] = None) -> None:
    """Record a counter increment in the debug log."""
    logger = structlog.get_logger(__name__)
    logger.debug(
        "Counter increment",
        metric=metric_name,
        value=value,
        tags=tags or {},
    )
