"""
One-step latent denoising

    z_hat = (z_L - beta_t * n_hat) / alpha_t,   n_hat = U(z_L; t, c_y)
"""
from typing import Tuple

import torch
import torch.nn as nn

from ..attention.text_slice import AttnStack
from ..utils.errors import DomainError
from .lora import LoraConfig
from .prompt import PromptEmbedding
from .schedule import Schedule, make_schedule, remove_noise
from .unet import UNet, UNetConfig


class OneStepDenoiser(nn.Module):
    """U-Net plus schedule; collects the attention of the same pass"""

    def __init__(self, cfg: UNetConfig = UNetConfig(), schedule: Schedule = None,
                 lora: LoraConfig = LoraConfig()):
        super().__init__()
        self.unet = UNet(cfg, lora)
        self.schedule = schedule if schedule is not None else make_schedule()

    def denoise_one_step(self, z_L: torch.Tensor, t: int, c: PromptEmbedding) -> Tuple[torch.Tensor, AttnStack]:
        if not torch.isfinite(z_L).all():
            raise DomainError("Latent contains non-finite values")
        self.schedule.check_step(t)
        n_hat, stack = self.unet(z_L, t, c.embeddings)
        z_hat = remove_noise(z_L, n_hat, t, self.schedule)
        stack.tex_index = c.tex_index
        return z_hat, stack

    def forward(self, z_L: torch.Tensor, t: int, c: PromptEmbedding) -> Tuple[torch.Tensor, AttnStack]:
        return self.denoise_one_step(z_L, t, c)
