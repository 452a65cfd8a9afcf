"""Learning-rate schedules: linear warmup into cosine decay.

Only the table matters here (no optimizer state): training recipes pin
the endpoints, so the schedule is written to hit them exactly rather
than approximately through floating-point cosine evaluation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass(frozen=True)
class ScheduleConfig:
    base_lr: float
    min_lr: float
    epochs: int
    warmup_epochs: int
    steps_per_epoch: int = 1

    def __post_init__(self):
        if self.epochs <= 0 or self.steps_per_epoch <= 0:
            raise ValueError("epochs and steps_per_epoch must be positive")
        if not 0 <= self.warmup_epochs <= self.epochs:
            raise ValueError("warmup must lie within the run")
        if self.min_lr > self.base_lr:
            raise ValueError("min_lr cannot exceed base_lr")
        if self.min_lr < 0:
            raise ValueError("rates must be non-negative")

    @property
    def total_steps(self) -> int:
        return self.epochs * self.steps_per_epoch

    @property
    def warmup_steps(self) -> int:
        return self.warmup_epochs * self.steps_per_epoch


class LrSchedule:
    """Callable step -> learning rate for one training run.

    Steps 0..warmup_steps ramp linearly from min_lr to base_lr (base_lr
    is reached exactly at step == warmup_steps); the remaining steps
    follow a half-cosine from base_lr down to min_lr, pinned so the final
    step is min_lr exactly. The final-step pin takes precedence if warmup
    spans the whole run.
    """

    def __init__(self, cfg: ScheduleConfig):
        self.cfg = cfg

    def __call__(self, step: int) -> float:
        cfg = self.cfg
        total = cfg.total_steps
        warmup = cfg.warmup_steps
        if not 0 <= step < total:
            raise ValueError(f"step {step} outside [0, {total})")
        if step == total - 1:
            return cfg.min_lr
        if step < warmup:
            return cfg.min_lr + (cfg.base_lr - cfg.min_lr) * (step / warmup)
        if step == warmup:
            return cfg.base_lr
        t = (step - warmup) / (total - 1 - warmup)
        return cfg.min_lr + (cfg.base_lr - cfg.min_lr) * 0.5 * (1.0 + math.cos(math.pi * t))

    def table(self) -> list[float]:
        return [self(step) for step in range(self.cfg.total_steps)]


def lr_schedule(cfg: ScheduleConfig) -> LrSchedule:
    return LrSchedule(cfg)


def pretrain_schedule(steps_per_epoch: int = 1) -> LrSchedule:
    """Self-supervised recipe: 1e-4 down to 5e-7 over 800 epochs, 40 warmup."""
    return lr_schedule(
        ScheduleConfig(
            base_lr=1e-4, min_lr=5e-7, epochs=800, warmup_epochs=40,
            steps_per_epoch=steps_per_epoch,
        )
    )


def finetune_schedule(steps_per_epoch: int = 1) -> LrSchedule:
    """Segmentation recipe: 1.25e-4 down to 2.5e-7 over 100 epochs, 20 warmup."""
    return lr_schedule(
        ScheduleConfig(
            base_lr=1.25e-4, min_lr=2.5e-7, epochs=100, warmup_epochs=20,
            steps_per_epoch=steps_per_epoch,
        )
    )
