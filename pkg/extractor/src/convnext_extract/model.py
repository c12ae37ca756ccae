"""ConvNeXt assembly with the classification head stripped.

The default variant is the one whose penultimate width is 2048; smaller
variants exist for smoke tests. Weights come from a checkpoint file when
given, otherwise from a seeded random init (good enough for format and
determinism checks, useless for real features - a warning says so).
"""

import logging

import torch
from torchvision.models.convnext import CNBlockConfig, ConvNeXt

log = logging.getLogger("extract")

# variant -> (stage widths, stage depths); penultimate width is widths[-1]
VARIANTS = {
    "tiny": ((96, 192, 384, 768), (3, 3, 9, 3)),
    "small": ((96, 192, 384, 768), (3, 3, 27, 3)),
    "base": ((128, 256, 512, 1024), (3, 3, 27, 3)),
    "large": ((192, 384, 768, 1536), (3, 3, 27, 3)),
    "xlarge": ((256, 512, 1024, 2048), (3, 3, 27, 3)),
}

DEFAULT_VARIANT = "xlarge"


def feature_dim(variant: str) -> int:
    return VARIANTS[variant][0][-1]


def build_model(variant: str, weights_path=None, seed: int = 0) -> torch.nn.Module:
    """Return an eval-mode ConvNeXt whose forward yields penultimate features."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, pick from {sorted(VARIANTS)}")
    widths, depths = VARIANTS[variant]
    torch.manual_seed(seed)
    blocks = [
        CNBlockConfig(widths[i], widths[i + 1] if i + 1 < 4 else None, depths[i])
        for i in range(4)
    ]
    model = ConvNeXt(blocks, stochastic_depth_prob=0.0)

    if weights_path is not None:
        state = torch.load(weights_path, map_location="cpu", weights_only=True)
        if isinstance(state, dict) and "state_dict" in state:
            state = state["state_dict"]
        state = {k.removeprefix("module."): v for k, v in state.items()}
        model.load_state_dict(state)
    else:
        log.warning(
            "no --weights given: using seeded random init (variant=%s seed=%d); "
            "features are only meaningful with pretrained weights",
            variant,
            seed,
        )

    # keep the final LayerNorm + flatten, drop only the linear classifier
    model.classifier[2] = torch.nn.Identity()
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model
