"""
Full text-aware super-resolution network

    x_L -> bicubic pre-upsample -> encoder -> one-step denoise (t fixed)
        -> keyword attention aggregation -> joint image / mask decoders
"""
from dataclasses import asdict, dataclass, field
from typing import Dict, Optional, Tuple

import torch
import torch.nn as nn

from ..attention.text_slice import AttnStack, TextAttentionAggregator
from ..backbone.denoiser import OneStepDenoiser
from ..backbone.encoder import ImageEncoder, pre_upsample
from ..backbone.lora import LoraConfig
from ..backbone.prompt import DEFAULT_PROMPT, TextEncoder, locate_keyword
from ..backbone.schedule import ScheduleConfig, schedule_from_config
from ..backbone.unet import UNetConfig
from ..decoders.joint_decoder import DecoderConfig, JointSegmentationDecoder
from ..utils.errors import ParameterError, ShapeError
from ..utils.logger import get_logger

logger = get_logger()


@dataclass(frozen=True)
class ModelConfig:
    unet: UNetConfig = field(default_factory=UNetConfig)
    lora: LoraConfig = field(default_factory=LoraConfig)
    decoder: DecoderConfig = field(default_factory=DecoderConfig)
    schedule: ScheduleConfig = field(default_factory=ScheduleConfig)
    prompt: Tuple[str, ...] = DEFAULT_PROMPT
    encoder_channels: int = 32
    scale: int = 4

    def __post_init__(self):
        locate_keyword(self.prompt)
        if self.unet.latent_channels != self.decoder.latent_channels:
            raise ParameterError(
                f"U-Net latent width {self.unet.latent_channels} != decoder input "
                f"{self.decoder.latent_channels}")
        if self.decoder.scale != self.unet.downsample:
            raise ParameterError(
                f"Decoder upsamples x{self.decoder.scale} but the encoder downsamples x{self.unet.downsample}")
        if self.scale < 1:
            raise ParameterError("scale must be >= 1")

    @classmethod
    def from_config(cls, config: Dict = None, schedule: Dict = None) -> 'ModelConfig':
        config = config or {}
        return cls(
            unet=UNetConfig.from_config(config.get('unet')),
            lora=LoraConfig.from_config(config.get('lora')),
            decoder=DecoderConfig.from_config(config.get('decoder')),
            schedule=ScheduleConfig.from_config(schedule),
            prompt=tuple(config.get('prompt', DEFAULT_PROMPT)),
            encoder_channels=int(config.get('encoder_channels', cls.encoder_channels)),
            scale=int(config.get('scale', cls.scale)),
        )

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class SROutput:
    x_hat: torch.Tensor
    s_hat: torch.Tensor
    z_hat: torch.Tensor
    a_tex: torch.Tensor
    attn: AttnStack


class TextAwareSR(nn.Module):
    """
    Args:
        cfg: Component sizes, prompt and schedule
        use_taca: Feed the keyword attention map to the mask decoder; when
            False a learned constant map is used instead
        use_jsd: Let the two decoders exchange features; when False the
            interaction scales are frozen at zero
    """

    def __init__(self, cfg: ModelConfig = ModelConfig(), use_taca: bool = True, use_jsd: bool = True):
        super().__init__()
        self.cfg = cfg
        self.use_taca = use_taca
        self.use_jsd = use_jsd
        self.t = cfg.schedule.t_fixed

        self.text_encoder = TextEncoder(embed_dim=cfg.unet.context_dim)
        self.encoder = ImageEncoder(cfg.unet.latent_channels, cfg.encoder_channels, cfg.unet.downsample)
        self.denoiser = OneStepDenoiser(cfg.unet, schedule_from_config(cfg.schedule), cfg.lora)
        self.aggregator = TextAttentionAggregator(cfg.unet.cross_attn_layers, cfg.decoder.attn_channels)
        self.decoder = JointSegmentationDecoder(cfg.decoder, cfg.lora)
        self.denoiser.schedule.check_step(self.t)

        if not use_jsd:
            self.decoder.freeze_interaction()
        if not use_taca:
            self.aggregator.W_a.requires_grad = False

    def forward(self, x_L: torch.Tensor, t: Optional[int] = None) -> SROutput:
        """x_L: B x 3 x h x w low-resolution batch in [0, 1]"""
        if x_L.dim() != 4 or x_L.shape[1] != 3:
            raise ShapeError(f"Expected B x 3 x h x w input, got {tuple(x_L.shape)}")
        t = self.t if t is None else t
        x_up = pre_upsample(x_L, self.cfg.scale)
        z_L = self.encoder(x_up)
        c = self.text_encoder.embed_prompt(self.cfg.prompt)
        z_hat, stack = self.denoiser.denoise_one_step(z_L, t, c)

        target = tuple(z_hat.shape[-2:])
        if self.use_taca:
            a_tex = self.aggregator(stack, c.tex_index, target)
        else:
            a_tex = self.aggregator.constant_input(z_hat.shape[0], target)
        x_hat, s_hat = self.decoder.decode_joint(z_hat, a_tex)
        return SROutput(x_hat=x_hat, s_hat=s_hat, z_hat=z_hat, a_tex=a_tex, attn=stack)


def trainable_parameters(model: nn.Module):
    return [p for p in model.parameters() if p.requires_grad]


def count_parameters(model: nn.Module) -> Dict[str, int]:
    total = sum(p.numel() for p in model.parameters())
    trainable = sum(p.numel() for p in trainable_parameters(model))
    return {'total': total, 'trainable': trainable}
