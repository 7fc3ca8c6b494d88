"""OpenTelemetry tracing setup for the consistency checkers"""

import logging
import time
from typing import Optional

from opentelemetry import metrics, trace
from opentelemetry.exporter.otlp.proto.grpc.metric_exporter import OTLPMetricExporter
from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import OTLPSpanExporter
from opentelemetry.sdk.metrics import MeterProvider
from opentelemetry.sdk.metrics.export import PeriodicExportingMetricReader
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor

from .checkers import ConsistencyChecker, HierarchyReport, Level
from .history import History
from .specs import Verdict

logger = logging.getLogger(__name__)


def setup_tracing(
    service_name: str = "linsmr",
    otlp_endpoint: str = "http://localhost:4317",
    enabled: bool = True,
) -> tuple[Optional[trace.Tracer], Optional[metrics.Meter]]:
    """Set up OpenTelemetry tracing and metrics.

    Args:
        service_name: Name of the service for tracing
        otlp_endpoint: OTLP collector endpoint
        enabled: Whether to enable tracing

    Returns:
        Tuple of (tracer, meter) or (None, None) if disabled
    """
    if not enabled:
        return None, None

    try:
        trace_exporter = OTLPSpanExporter(endpoint=otlp_endpoint)
        trace_provider = TracerProvider()
        trace_provider.add_span_processor(BatchSpanProcessor(trace_exporter))
        trace.set_tracer_provider(trace_provider)

        metric_exporter = OTLPMetricExporter(endpoint=otlp_endpoint)
        metric_reader = PeriodicExportingMetricReader(metric_exporter)
        meter_provider = MeterProvider(metric_readers=[metric_reader])
        metrics.set_meter_provider(meter_provider)

        return trace.get_tracer(service_name), metrics.get_meter(service_name)
    except Exception as e:
        logger.warning("Could not set up tracing: %s", e)
        return None, None


class TracedChecker:
    """Wrapper for a ConsistencyChecker with tracing support."""

    def __init__(
        self,
        checker: ConsistencyChecker,
        tracer: Optional[trace.Tracer] = None,
        meter: Optional[metrics.Meter] = None,
    ):
        self.checker = checker
        self.tracer = tracer
        self.meter = meter

        if self.meter:
            self.checks_counter = self.meter.create_counter(
                "linsmr.checks", description="Number of checker runs", unit="1"
            )
            self.rejections_counter = self.meter.create_counter(
                "linsmr.rejections", description="Number of rejected histories", unit="1"
            )
            self.check_time_histogram = self.meter.create_histogram(
                "linsmr.check_time", description="Checker wall time", unit="ms"
            )

    def _record(self, level: str, verdict: Verdict, elapsed_ms: float) -> None:
        if not self.meter:
            return
        attributes = {"linsmr.level": level}
        self.checks_counter.add(1, attributes)
        if not verdict.accepted:
            self.rejections_counter.add(1, attributes)
        self.check_time_histogram.record(elapsed_ms, attributes)

    def check(self, h: History, level: Level | str) -> Verdict:
        level = Level(level)
        if not self.tracer:
            start_time = time.perf_counter()
            verdict = self.checker.check(h, level)
            self._record(level.value, verdict, (time.perf_counter() - start_time) * 1000)
            return verdict

        with self.tracer.start_as_current_span("linsmr.check") as span:
            span.set_attribute("linsmr.level", level.value)
            span.set_attribute("linsmr.ops", len(h.operations()))
            start_time = time.perf_counter()
            try:
                verdict = self.checker.check(h, level)
            except Exception as e:
                span.record_exception(e)
                span.set_attribute("error", True)
                raise
            elapsed_ms = (time.perf_counter() - start_time) * 1000
            self._record(level.value, verdict, elapsed_ms)
            span.set_attribute("linsmr.accepted", verdict.accepted)
            span.set_attribute("linsmr.unknown", verdict.unknown)
            span.set_attribute("linsmr.nodes", verdict.nodes)
            return verdict

    def check_all(self, h: History) -> HierarchyReport:
        if not self.tracer:
            return self.checker.check_all(h)
        with self.tracer.start_as_current_span("linsmr.check_all") as span:
            span.set_attribute("linsmr.ops", len(h.operations()))
            report = self.checker.check_all(h)
            for level, verdict in report.verdicts.items():
                span.set_attribute(f"linsmr.{level}.accepted", verdict.accepted)
            span.set_attribute("linsmr.consistent", report.consistent)
            return report

    def __getattr__(self, name):
        """Delegate other methods to the checker."""
        return getattr(self.checker, name)
