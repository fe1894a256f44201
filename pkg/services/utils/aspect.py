import functools
import time
import threading
from datetime import datetime
import psutil

from utils.logging_config import get_component_logger

logger = get_component_logger("performance")


class PerformanceMetrics:
    """Class to store and manage performance metrics."""

    def __init__(self):
        self.process = psutil.Process()
        self.start_time = time.perf_counter()
        self.end_time = None
        self.start_memory = self.process.memory_info().rss / 1024 / 1024  # MB
        self.end_memory = None
        self.start_cpu = self.process.cpu_percent(interval=None)
        self.end_cpu = None
        self.thread_count = threading.active_count()
        self.exception = None

    def finalize(self):
        """Finalize metrics after execution."""
        self.end_time = time.perf_counter()
        self.end_memory = self.process.memory_info().rss / 1024 / 1024
        self.end_cpu = self.process.cpu_percent(interval=None)

    def format_mini_metrics(self, func_name: str) -> str:
        """One-line summary for the console."""
        execution_time = self.end_time - self.start_time
        memory_change = self.end_memory - self.start_memory
        status = "FAILED" if self.exception else "ok"
        return (
            f"{status:<6} {func_name:<30} "
            f"time {execution_time:>7.3f}s | "
            f"CPU {max(self.start_cpu, self.end_cpu):>5.1f}% | "
            f"RAM {memory_change:>+7.1f}MB"
        )

    def format_metrics(self, func_name: str, module_name: str) -> str:
        """Detailed block for the run log."""
        timestamp = datetime.now().strftime("%Y-%m-%d %H:%M:%S")
        output = [
            f"Performance entry {timestamp}",
            f"  Function: {module_name}.{func_name}",
            f"  Threads: {self.thread_count}",
            f"  Time: {self.end_time - self.start_time:.4f} s",
            f"  Memory: start {self.start_memory:.1f} MB, end {self.end_memory:.1f} MB",
            f"  CPU: start {self.start_cpu:.1f}%, end {self.end_cpu:.1f}%",
        ]
        if self.exception:
            output.append(f"  Exception: {self.exception}")
        return "\n".join(output)


def performance_log(func):
    """
    Decorator logging wall time, memory change and CPU usage of a call to
    the ``performance`` logger. A compact line goes out at INFO, the full
    block at DEBUG.
    """

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        metrics = PerformanceMetrics()
        try:
            return func(*args, **kwargs)
        except Exception as e:
            metrics.exception = e
            raise
        finally:
            metrics.finalize()
            logger.info(metrics.format_mini_metrics(func.__name__))
            logger.debug(metrics.format_metrics(func.__name__, func.__module__))

    return wrapper
