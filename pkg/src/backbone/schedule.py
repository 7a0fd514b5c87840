"""
Diffusion noise schedule and the one-step forward / inverse maps

The forward map is z_t = alpha_t * z + beta_t * n; the denoiser inverts it
in a single step, z = (z_t - beta_t * n_hat) / alpha_t.
"""
from dataclasses import dataclass, field
from typing import Dict

import numpy as np
import torch

from ..utils.errors import ParameterError, ShapeError, SingularScheduleError
from ..utils.logger import get_logger

logger = get_logger()

IDENTITY_TOLERANCE = 1e-10


@dataclass(frozen=True)
class ScheduleConfig:
    """Schedule section of the configuration"""
    T: int = 1000
    beta_min: float = 1e-4
    beta_max: float = 0.02
    t_fixed: int = 200

    @classmethod
    def from_config(cls, config: Dict = None) -> 'ScheduleConfig':
        config = config or {}
        return cls(
            T=int(config.get('T', cls.T)),
            beta_min=float(config.get('beta_min', cls.beta_min)),
            beta_max=float(config.get('beta_max', cls.beta_max)),
            t_fixed=int(config.get('t_fixed', cls.t_fixed)),
        )


@dataclass(frozen=True)
class Schedule:
    """
    Per-step signal and noise scales

    alpha[t]**2 + beta[t]**2 == 1, alpha non-increasing in t.
    Stored in float64 so the identity holds to 1e-10.
    """
    alpha: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=np.float64)
        beta = np.asarray(self.beta, dtype=np.float64)
        if alpha.ndim != 1 or alpha.shape != beta.shape or alpha.size == 0:
            raise ShapeError(f"alpha/beta must be equal-length 1-D arrays, got {alpha.shape}, {beta.shape}")
        if np.any(alpha <= 0) or np.any(alpha > 1) or np.any(beta < 0) or np.any(beta >= 1):
            raise ParameterError("alpha must lie in (0, 1] and beta in [0, 1)")
        if np.any(np.diff(alpha) > 0):
            raise ParameterError("alpha must be non-increasing in t")
        if np.max(np.abs(alpha ** 2 + beta ** 2 - 1.0)) > IDENTITY_TOLERANCE:
            raise ParameterError("alpha_t^2 + beta_t^2 must equal 1")
        object.__setattr__(self, 'alpha', alpha)
        object.__setattr__(self, 'beta', beta)

    @property
    def T(self) -> int:
        return int(self.alpha.size)

    def check_step(self, t: int) -> int:
        if not 0 <= int(t) < self.T:
            raise ParameterError(f"Time step {t} outside [0, {self.T})")
        return int(t)

    def coefficients(self, t: int):
        """(alpha_t, beta_t) as python floats"""
        t = self.check_step(t)
        return float(self.alpha[t]), float(self.beta[t])


def make_schedule(T: int = 1000, beta_min: float = 1e-4, beta_max: float = 0.02) -> Schedule:
    """
    Linear variance schedule

    Args:
        T: Number of diffusion steps
        beta_min: First per-step variance
        beta_max: Last per-step variance

    Returns:
        Schedule with alpha_t = sqrt(prod_{s<=t}(1 - b_s)), beta_t = sqrt(1 - alpha_t^2)
    """
    if int(T) < 1:
        raise ParameterError(f"T must be >= 1, got {T}")
    if not 0.0 < beta_min <= beta_max < 1.0:
        raise ParameterError(f"Need 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]")

    variances = np.linspace(beta_min, beta_max, int(T), dtype=np.float64)
    alpha_sq = np.cumprod(1.0 - variances)
    alpha = np.sqrt(alpha_sq)
    beta = np.sqrt(1.0 - alpha_sq)
    return Schedule(alpha=alpha, beta=beta)


def schedule_from_config(cfg: ScheduleConfig) -> Schedule:
    return make_schedule(cfg.T, cfg.beta_min, cfg.beta_max)


def add_noise(z: torch.Tensor, n: torch.Tensor, t: int, sch: Schedule) -> torch.Tensor:
    """Forward diffusion to step t: alpha_t * z + beta_t * n"""
    if z.shape != n.shape:
        raise ShapeError(f"Latent {tuple(z.shape)} and noise {tuple(n.shape)} differ in shape")
    alpha_t, beta_t = sch.coefficients(t)
    return alpha_t * z + beta_t * n


def remove_noise(z_t: torch.Tensor, n_hat: torch.Tensor, t: int, sch: Schedule) -> torch.Tensor:
    """One-step inversion: (z_t - beta_t * n_hat) / alpha_t"""
    if z_t.shape != n_hat.shape:
        raise ShapeError(f"Latent {tuple(z_t.shape)} and noise estimate {tuple(n_hat.shape)} differ in shape")
    alpha_t, beta_t = sch.coefficients(t)
    if alpha_t == 0.0:
        raise SingularScheduleError(f"alpha_{t} is zero")
    return (z_t - beta_t * n_hat) / alpha_t
