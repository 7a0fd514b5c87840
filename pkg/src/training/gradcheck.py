"""
Central finite-difference checks of every loss term, the one-step denoiser
and the coupled decoders

Each check builds random float64 inputs on an 8 x 8 grid, compares the
autograd gradient against central differences on every input coordinate,
and records the worst relative error over all trials.
"""
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import pandas as pd
import torch

from ..backbone.denoiser import OneStepDenoiser
from ..backbone.lora import LoraConfig, lora_modules
from ..backbone.prompt import TextEncoder
from ..backbone.unet import UNetConfig
from ..decoders.blocks import CrossDecoderInteractionBlock, cdib_forward
from ..decoders.joint_decoder import DecoderConfig, JointSegmentationDecoder
from ..losses.objective import dice_loss, focal_loss, mf_loss
from ..losses.perceptual import pyramid_gradient_distance
from ..utils.logger import get_logger

logger = get_logger()

STEP = 1e-6
RTOL = 1e-4
TRIALS = 50
SIZE = 8
DENOISE_STEP = 200

Case = Callable[[torch.Generator], Tuple[Callable[..., torch.Tensor], List[torch.Tensor]]]


@dataclass
class CheckResult:
    name: str
    trials: int
    max_rel_err: float
    passed: bool


def numeric_grad(fn: Callable[..., torch.Tensor], inputs: Sequence[torch.Tensor], index: int,
                 step: float = STEP) -> torch.Tensor:
    """Central difference of the scalar fn with respect to inputs[index]"""
    x = inputs[index].detach()
    grad = torch.zeros_like(x)
    flat, out = x.reshape(-1), grad.reshape(-1)
    for i in range(flat.numel()):
        orig = flat[i].item()
        flat[i] = orig + step
        plus = fn(*inputs).item()
        flat[i] = orig - step
        minus = fn(*inputs).item()
        flat[i] = orig
        out[i] = (plus - minus) / (2.0 * step)
    return grad


def relative_error(numeric: torch.Tensor, analytic: torch.Tensor) -> float:
    scale = max(analytic.abs().max().item(), numeric.abs().max().item(), 1e-8)
    return (numeric - analytic).abs().max().item() / scale


def check_case(name: str, case: Case, trials: int = TRIALS, seed: int = 0) -> CheckResult:
    gen = torch.Generator().manual_seed(seed)
    worst = 0.0
    for _ in range(trials):
        fn, inputs = case(gen)
        leaves = [x.detach().clone().requires_grad_(True) for x in inputs]
        analytic = torch.autograd.grad(fn(*leaves), leaves)
        with torch.no_grad():
            plain = [x.detach().clone() for x in inputs]
            for i, g in enumerate(analytic):
                worst = max(worst, relative_error(numeric_grad(fn, plain, i), g))
    return CheckResult(name, trials, worst, worst < RTOL)


def _image(gen, channels=3):
    return torch.rand(1, channels, SIZE, SIZE, generator=gen, dtype=torch.float64)


def _binary_mask(gen):
    return (torch.rand(1, 1, SIZE, SIZE, generator=gen, dtype=torch.float64) > 0.5).to(torch.float64)


def _soft_mask(gen):
    return 0.05 + 0.9 * torch.rand(1, 1, SIZE, SIZE, generator=gen, dtype=torch.float64)


def _mse_case(gen):
    x = _image(gen)
    return (lambda x_hat: torch.mean((x_hat - x) ** 2)), [_image(gen)]


def _mf_case(gen):
    x, s = _image(gen), _binary_mask(gen)
    return (lambda x_hat, s_hat: mf_loss(x_hat, x, s_hat, s, 2.0)), [_image(gen), _soft_mask(gen)]


def _focal_case(gen):
    s = _binary_mask(gen)
    return (lambda s_hat: focal_loss(s_hat, s, 2.0)), [_soft_mask(gen)]


def _dice_case(gen):
    s = _binary_mask(gen)
    return (lambda s_hat: dice_loss(s_hat, s, 1.0)), [_soft_mask(gen)]


def _perceptual_case(gen):
    x = _image(gen)
    return (lambda x_hat: pyramid_gradient_distance(x_hat, x)), [_image(gen)]


def _randomize(module: torch.nn.Module, gen) -> torch.nn.Module:
    """Non-zero residual scales and adapters so every path carries gradient"""
    with torch.no_grad():
        for block in module.modules():
            if isinstance(block, CrossDecoderInteractionBlock):
                for scale in block.residual_scales:
                    scale.copy_(torch.rand((), generator=gen, dtype=torch.float64) + 0.5)
        for lora in lora_modules(module):
            lora.adapter.up.copy_(0.1 * torch.randn(lora.adapter.up.shape, generator=gen, dtype=torch.float64))
    return module


def _cdib_case(gen):
    channels = 4
    block = _randomize(CrossDecoderInteractionBlock(channels, LoraConfig(rank=2, alpha=2.0)).double(), gen)
    w_z = torch.randn(1, channels, SIZE, SIZE, generator=gen, dtype=torch.float64)
    w_a = torch.randn(1, channels, SIZE, SIZE, generator=gen, dtype=torch.float64)

    def fn(z_in, a_in):
        z_out, a_out = cdib_forward(z_in, a_in, block)
        return torch.sum(w_z * z_out) + torch.sum(w_a * a_out)

    inputs = [torch.randn(1, channels, SIZE, SIZE, generator=gen, dtype=torch.float64) for _ in range(2)]
    return fn, inputs


def _decode_joint_case(gen):
    cfg = DecoderConfig(latent_channels=4, attn_channels=4, channels=(8, 8), upsample=(2, 2))
    decoder = _randomize(JointSegmentationDecoder(cfg, LoraConfig(rank=2, alpha=2.0)).double(), gen)
    w_x = torch.randn(1, 3, SIZE, SIZE, generator=gen, dtype=torch.float64)
    w_s = torch.randn(1, 1, SIZE, SIZE, generator=gen, dtype=torch.float64)
    latent = SIZE // cfg.scale

    def fn(z_hat, a_tex):
        x_hat, s_hat = decoder.decode_joint(z_hat, a_tex)
        return torch.sum(w_x * x_hat) + torch.sum(w_s * s_hat)

    inputs = [torch.randn(1, 4, latent, latent, generator=gen, dtype=torch.float64) for _ in range(2)]
    return fn, inputs


def _denoise_case(gen):
    cfg = UNetConfig(base_channels=8, num_resolutions=2, cross_attn_layers=2, attn_heads=1,
                     latent_channels=4, downsample=4, context_dim=8, channel_mult=(1, 2))
    with torch.random.fork_rng():
        torch.manual_seed(int(torch.randint(0, 2 ** 31 - 1, (1,), generator=gen)))
        denoiser = _randomize(OneStepDenoiser(cfg, lora=LoraConfig(rank=2, alpha=2.0)).double(), gen)
        prompt = TextEncoder(embed_dim=cfg.context_dim).double().embed_prompt()
    prompt.embeddings = prompt.embeddings.detach()

    def fn(z_L):
        z_hat, _ = denoiser.denoise_one_step(z_L, DENOISE_STEP, prompt)
        return z_hat.pow(2).sum()

    return fn, [torch.randn(1, cfg.latent_channels, SIZE, SIZE, generator=gen, dtype=torch.float64)]


CASES: List[Tuple[str, Case]] = [
    ('mse', _mse_case),
    ('mf_loss', _mf_case),
    ('focal', _focal_case),
    ('dice', _dice_case),
    ('perceptual', _perceptual_case),
    ('denoise_one_step', _denoise_case),
    ('cdib_forward', _cdib_case),
    ('decode_joint', _decode_joint_case),
]


def run_gradcheck(trials: int = TRIALS, seed: int = 0) -> Tuple[pd.DataFrame, bool]:
    """Run every check; returns (pass/fail table, all passed)"""
    results = []
    for i, (name, case) in enumerate(CASES):
        result = check_case(name, case, trials, seed + i)
        logger.info(f"gradcheck {name}: max rel err {result.max_rel_err:.2e} "
                    f"{'PASS' if result.passed else 'FAIL'}")
        results.append(result)
    table = pd.DataFrame([{
        'check': r.name,
        'trials': r.trials,
        'max_rel_err': r.max_rel_err,
        'result': 'PASS' if r.passed else 'FAIL',
    } for r in results])
    return table, all(r.passed for r in results)
