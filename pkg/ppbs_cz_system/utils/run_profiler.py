"""
run_profiler.py
PURPOSE: Per-stage wall-clock timing of a pipeline run.
"""

import sys
import time

PROFILER_ENABLED = False  # Set True to print stage timings after each run

SLOW_MS = 10000
WARN_MS = 2000


class RunProfiler:
    def __init__(self, enabled=None):
        self.start_time = time.perf_counter()
        self.checkpoints = []
        self.enabled = PROFILER_ENABLED if enabled is None else enabled

    def _safe_print(self, text):
        try:
            print(text)
        except UnicodeEncodeError:
            print(text.encode("ascii", errors="replace").decode("ascii"))
        sys.stdout.flush()

    def checkpoint(self, name):
        """Record the end of a named stage."""
        elapsed = (time.perf_counter() - self.start_time) * 1000
        self.checkpoints.append((str(name), elapsed))
        if self.enabled:
            self._safe_print(f"[{elapsed:9.1f}ms] {name}")

    def stage_durations(self):
        """[(name, milliseconds spent since the previous checkpoint)]"""
        out = []
        previous = 0.0
        for name, elapsed in self.checkpoints:
            out.append((name, elapsed - previous))
            previous = elapsed
        return out

    def summary(self):
        if not self.enabled or not self.checkpoints:
            return

        total = self.checkpoints[-1][1]
        self._safe_print("\n" + "=" * 80)
        self._safe_print("RUN STAGE SUMMARY")
        self._safe_print("=" * 80)
        for name, delta in self.stage_durations():
            pct = (delta / total * 100) if total > 0 else 0
            if delta > SLOW_MS:
                flag = " [SLOW]"
            elif delta > WARN_MS:
                flag = " [WARN]"
            else:
                flag = ""
            self._safe_print(f"+{delta:9.1f}ms {pct:5.1f}% | {name}{flag}")
        self._safe_print("=" * 80)
        self._safe_print(f"Total: {total:.1f}ms ({total / 1000:.2f}s)")
        self._safe_print("=" * 80 + "\n")
