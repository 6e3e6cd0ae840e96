# pylint: disable=missing-docstring
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ssn_bench.glm import GlmProblem
from ssn_bench.optimizers import Optimizer, StopRule
from ssn_bench.trace import RunTrace


class ScaledGradientOptimizer(Optimizer):
    """Gradient steps of a fixed size, declared through the plugins section."""

    def __init__(self, options: Dict[str, Any]) -> None:
        super().__init__(options)
        self.step = float(options.get("step", 0.01))
        if self.step <= 0.0:
            raise ValueError(f"Step must be positive, got {self.step}")
        self.stop = StopRule.from_dict(options)

    def run(
        self, problem: GlmProblem, w0: np.ndarray, seed: int, w_star: Optional[np.ndarray] = None
    ) -> Tuple[np.ndarray, RunTrace]:
        recorder = self.stop.recorder(problem, w_star)
        w = np.array(w0, dtype=np.float64)
        recorder.record(w)
        for _ in range(self.stop.max_iters):
            if recorder.should_stop():
                break
            w = w - self.step * problem.gradient(w)
            recorder.record(w)
        return w, recorder.trace


class NotAnOptimizer:
    pass
