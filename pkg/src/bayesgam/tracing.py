"""Langfuse integration for fit and tuning observability."""

from collections.abc import Iterator, Mapping
from contextlib import contextmanager
from typing import Any

from langfuse import Langfuse

from .config import Config


class TracingClient:
    """Sends command runs and objective evaluations to Langfuse."""

    def __init__(self, config: Config):
        self.config = config
        self.enabled = config.langfuse.enabled
        self._client: Langfuse | None = None

        if self.enabled:
            self._client = Langfuse(
                public_key=config.langfuse.public_key,
                secret_key=config.langfuse.secret_key,
                host=config.langfuse.host,
            )

    @contextmanager
    def trace(self, name: str, metadata: Mapping[str, Any] | None = None) -> Iterator[Any]:
        """One trace per command or tuning run; yields None when disabled."""
        if not self.enabled or not self._client:
            yield None
            return

        trace = self._client.trace(name=name, metadata=dict(metadata or {}))
        try:
            yield trace
        except Exception as exc:
            trace.update(status="failed", output={"error": str(exc)})
            raise
        else:
            trace.update(status="completed")

    def evaluation(
        self,
        trace_id: str | None,
        values: Mapping[str, float],
        score: float,
        status: str,
    ) -> None:
        """Record one objective evaluation as a span of the tuning trace."""
        if not self.enabled or not self._client:
            return

        self._client.span(
            trace_id=trace_id,
            name="objective",
            input=dict(values),
            output={"score": score, "status": status},
        )

    def fit_summary(self, trace_id: str | None, summary: Mapping[str, Any]) -> None:
        """Attach the fit statistics printed by ``fit`` to its trace."""
        if not self.enabled or not self._client:
            return

        self._client.span(trace_id=trace_id, name="posterior", output=dict(summary))

    def flush(self) -> None:
        if self._client:
            self._client.flush()


# Initialized by the CLI; library callers run untraced.
_tracing: TracingClient | None = None


def init_tracing(config: Config) -> TracingClient:
    global _tracing
    _tracing = TracingClient(config)
    return _tracing


def get_tracing() -> TracingClient | None:
    return _tracing
