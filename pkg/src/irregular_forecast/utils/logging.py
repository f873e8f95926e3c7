"""Structured logging configuration."""

import logging
import sys
from typing import Any, Dict, Optional, TextIO

import structlog

from irregular_forecast.config import settings

try:
    from ddtrace import tracer

    DDTRACE_AVAILABLE = True
except ImportError:
    DDTRACE_AVAILABLE = False


def add_trace_correlation(logger: Any, method_name: str, event_dict: Dict[str, Any]) -> Dict[str, Any]:
    """Add Datadog trace correlation to log entries."""
    if DDTRACE_AVAILABLE and settings.tracing_enabled:
        span = tracer.current_span()
        if span:
            event_dict["dd.trace_id"] = str(span.trace_id)
            event_dict["dd.span_id"] = str(span.span_id)
            event_dict["dd.service"] = settings.service_name
            event_dict["dd.version"] = settings.version
            event_dict["dd.env"] = settings.environment

    return event_dict


def setup_logging(level: Optional[str] = None, stream: Optional[TextIO] = None) -> None:
    """Configure structured logging with appropriate processors.

    Logs go to stderr by default; stdout is reserved for command output.
    """
    log_level = (level or ("DEBUG" if settings.debug else settings.log_level)).upper()

    logging.basicConfig(
        format="%(message)s",
        stream=stream or sys.stderr,
        level=getattr(logging, log_level, logging.INFO),
        force=True,
    )

    processors: list[Any] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        add_trace_correlation,
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
    ]

    if settings.debug or not settings.log_json:
        processors.append(structlog.dev.ConsoleRenderer())
    else:
        processors.append(structlog.processors.JSONRenderer())

    structlog.configure(
        processors=processors,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    structlog.contextvars.clear_contextvars()


def bind_run_context(command: str, run_id: str, **extra: Any) -> None:
    """Bind command-scoped context shared by every log line of a run."""
    structlog.contextvars.clear_contextvars()
    structlog.contextvars.bind_contextvars(command=command, run_id=run_id, **extra)
