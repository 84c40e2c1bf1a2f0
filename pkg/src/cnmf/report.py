"""Per-run fit report shared by the pipeline and the baseline fitters."""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = ["FitReport"]


@dataclass
class FitReport:
    """Metrics and provenance for one fit.

    ``loss_trace`` starts at the initial relative error for iterative
    fitters; ``sweep`` lists one entry per threshold candidate tried by the
    pipeline (``rel_mse`` is None for candidates that failed). ``score`` is
    filled by harnesses that know the ground truth.
    """

    algorithm: str
    params: dict
    rel_mse: float
    score: float | None = None
    loss_trace: list[float] = field(default_factory=list)
    stage_seconds: dict[str, float] = field(default_factory=dict)
    chosen_t: float | None = None
    locator_indices: tuple[int, ...] | None = None
    nnls_iterations: int | None = None
    seconds: float = 0.0
    sweep: list[dict] | None = None

    def to_json_dict(self) -> dict:
        """The on-disk ``report.json`` shape."""
        out = {
            "algorithm": self.algorithm,
            "params": self.params,
            "relMse": self.rel_mse,
            "lossTrace": list(self.loss_trace),
            "stageSeconds": dict(self.stage_seconds),
        }
        if self.score is not None:
            out["score"] = self.score
        if self.chosen_t is not None:
            out["chosenT"] = self.chosen_t
        return out
