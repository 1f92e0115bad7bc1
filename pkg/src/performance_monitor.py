"""
Performance Monitor for Kettlewatch
Times named pipeline stages (chains, ODE, closed forms, fits) and reports them.
"""

import time
from collections import deque
from contextlib import contextmanager
from datetime import datetime
from typing import Dict, List, Optional
import statistics


class PerformanceMonitor:
    """Records wall-clock time per pipeline stage."""

    def __init__(self, max_history: int = 1000):
        """Initialize performance monitor."""
        self.max_history = max_history
        self.stage_metrics = deque(maxlen=max_history)
        self.current_stage = None
        self.current_stage_start = None

    def start_stage(self, name: str):
        """Start timing a stage."""
        self.current_stage = name
        self.current_stage_start = time.perf_counter()

    def end_stage(self, items: int = 0, success: bool = True) -> float:
        """
        End timing and record metrics.

        Args:
            items: Work units done in the stage (chain factors, ODE steps, ...)
            success: Whether the stage finished without raising

        Returns:
            float: Execution time in milliseconds
        """
        if self.current_stage_start is None:
            return 0.0

        elapsed = (time.perf_counter() - self.current_stage_start) * 1000

        self.stage_metrics.append({
            "timestamp": datetime.now().isoformat(),
            "stage": self.current_stage,
            "execution_time_ms": elapsed,
            "items": items,
            "success": success,
        })
        self.current_stage = None
        self.current_stage_start = None

        return elapsed

    @contextmanager
    def stage(self, name: str, items: int = 0):
        """Time the enclosed block as one stage."""
        self.start_stage(name)
        try:
            yield
        except BaseException:
            self.end_stage(items, success=False)
            raise
        self.end_stage(items)

    def stage_totals(self) -> Dict[str, float]:
        """Total milliseconds per stage name, successful stages only."""
        totals: Dict[str, float] = {}
        for m in self.stage_metrics:
            if m["success"]:
                totals[m["stage"]] = totals.get(m["stage"], 0.0) + m["execution_time_ms"]
        return {name: round(ms, 3) for name, ms in totals.items()}

    def get_statistics(self) -> Dict:
        """Get performance statistics."""
        if not self.stage_metrics:
            return {"message": "No stages timed yet"}

        times = [m["execution_time_ms"] for m in self.stage_metrics if m["success"]]
        if not times:
            return {"message": "No successful stages"}

        return {
            "total_stages": len(self.stage_metrics),
            "successful_stages": len(times),
            "failed_stages": len(self.stage_metrics) - len(times),
            "total_time_ms": round(sum(times), 2),
            "avg_time_ms": round(statistics.mean(times), 2),
            "median_time_ms": round(statistics.median(times), 2),
            "max_time_ms": round(max(times), 2),
            "total_items": sum(m["items"] for m in self.stage_metrics if m["success"]),
        }

    def get_slow_stages(self, threshold_ms: float = 1000.0) -> List[Dict]:
        """Get stages slower than threshold."""
        return [
            m for m in self.stage_metrics
            if m["success"] and m["execution_time_ms"] > threshold_ms
        ]

    def format_report(self, title: Optional[str] = None) -> str:
        """Format performance report."""
        stats = self.get_statistics()

        if "message" in stats:
            return stats["message"]

        lines = []
        lines.append("\n" + "=" * 80)
        lines.append(f"⚡ {title or 'TIMING REPORT'}")
        lines.append("=" * 80)

        lines.append(f"\n📊 Stages: {stats['successful_stages']} ok, {stats['failed_stages']} failed")
        lines.append(f"\n⏱️  Per stage:")
        for name, ms in self.stage_totals().items():
            lines.append(f"   {name}: {ms:.2f} ms")
        lines.append(f"\n   Total: {stats['total_time_ms']:.2f} ms")

        slow = self.get_slow_stages()
        if slow:
            lines.append(f"\n🐌 {len(slow)} stage(s) took longer than 1 s")

        lines.append("\n" + "=" * 80)

        return "\n".join(lines)
