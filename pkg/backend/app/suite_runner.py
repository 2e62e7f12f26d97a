"""Runs the experiments of a suite concurrently.

Each experiment is CPU-bound numpy work, so it is handed to a worker thread;
a semaphore caps how many run at once (MIRANDA_LAYERS_THREADS).
"""

from __future__ import annotations

import asyncio
import time
from typing import List, Optional, Sequence

from .experiments import ExperimentOutcome, failed_outcome, run_experiment
from .models import ExperimentConfig, SuiteReport
from .settings import LayerSettings


class SuiteRunner:
    def __init__(self, *, settings: LayerSettings):
        self.settings = settings

        # Lazy-initialized to avoid event loop issues
        self._sem: Optional[asyncio.Semaphore] = None

    def _get_semaphore(self) -> asyncio.Semaphore:
        """Get or create semaphore in current event loop."""
        if self._sem is None:
            self._sem = asyncio.Semaphore(max(1, self.settings.threads))
        return self._sem

    async def _run_one(self, config: ExperimentConfig) -> ExperimentOutcome:
        async with self._get_semaphore():
            started = time.perf_counter()
            try:
                outcome = await asyncio.to_thread(run_experiment, config, self.settings.quadrature)
            except (ArithmeticError, ValueError) as e:
                # Recorded as a failed criterion; the rest of the suite keeps going.
                print(f"[suite] {config.name} error: {e}")
                outcome = failed_outcome(config, e)
            elapsed = time.perf_counter() - started
            status = "passed" if outcome.report.passed else "FAILED"
            print(f"[suite] {config.name} finished in {elapsed:.1f}s ({status})")
            return outcome

    async def run(self, configs: Sequence[ExperimentConfig]) -> List[ExperimentOutcome]:
        """Outcomes in the order of configs, whatever order they finish in."""
        return list(await asyncio.gather(*(self._run_one(c) for c in configs)))

    def run_sync(self, configs: Sequence[ExperimentConfig]) -> List[ExperimentOutcome]:
        return asyncio.run(self.run(configs))


def suite_report(outcomes: Sequence[ExperimentOutcome], seed: Optional[int] = None) -> SuiteReport:
    reports = [o.report for o in outcomes]
    return SuiteReport(seed=seed, experiments=reports, passed=all(r.passed for r in reports))
