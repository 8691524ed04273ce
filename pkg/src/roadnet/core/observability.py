from __future__ import annotations

import time
from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path

from opentelemetry import trace
from opentelemetry.exporter.otlp.proto.http.trace_exporter import OTLPSpanExporter
from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor
from prometheus_client import CollectorRegistry, Counter, Histogram, write_to_textfile

from .config import Settings

REGISTRY = CollectorRegistry()
STAGE_SECONDS = Histogram(
    "roadnet_stage_seconds",
    "Wall-clock duration of pipeline stages",
    ["stage"],
    registry=REGISTRY,
    buckets=(0.01, 0.05, 0.1, 0.5, 1.0, 5.0, 10.0, 30.0, 60.0, 120.0),
)
PROPOSER_CALLS = Counter(
    "roadnet_proposer_calls_total", "Node proposer invocations", registry=REGISTRY
)
EDGES_ADDED = Counter(
    "roadnet_completion_edges_total", "Edges added by local completion", registry=REGISTRY
)

_tracer = trace.get_tracer("roadnet")


def init_tracing(settings: Settings) -> None:
    if not settings.ENABLE_TRACING:
        return
    resource = Resource.create({"service.name": settings.APP_NAME})
    provider = TracerProvider(resource=resource)
    trace.set_tracer_provider(provider)
    if settings.OTEL_EXPORTER_OTLP_ENDPOINT:
        exporter = OTLPSpanExporter(endpoint=settings.OTEL_EXPORTER_OTLP_ENDPOINT)
        provider.add_span_processor(BatchSpanProcessor(exporter))


@contextmanager
def stage(name: str) -> Iterator[None]:
    """Trace a pipeline stage and record its duration."""
    start = time.perf_counter()
    with _tracer.start_as_current_span(name):
        try:
            yield
        finally:
            STAGE_SECONDS.labels(stage=name).observe(time.perf_counter() - start)


def export_metrics(path: Path | str | None) -> None:
    if path:
        write_to_textfile(str(path), REGISTRY)
