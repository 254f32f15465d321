"""Low-resolution ResNet-18 encoder and checkpoint loading.

The stem uses a 3x3 convolution with no stride and no max-pool, the usual
adaptation for 32x32 inputs. Checkpoints are torch files holding
{"arch": "cifar-resnet18", "state_dict": ..., optional "head": {"weight",
"bias"}, optional "normalize": {"mean": [r,g,b], "std": [r,g,b]}}.
"""

from __future__ import annotations

import torch
from torch import nn

ARCH_NAME = "cifar-resnet18"
FEATURE_DIM = 512


class CheckpointError(Exception):
    pass


class BasicBlock(nn.Module):
    def __init__(self, in_planes: int, planes: int, stride: int = 1):
        super().__init__()
        self.conv1 = nn.Conv2d(in_planes, planes, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(planes)
        self.conv2 = nn.Conv2d(planes, planes, 3, stride=1, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(planes)
        self.shortcut = nn.Sequential()
        if stride != 1 or in_planes != planes:
            self.shortcut = nn.Sequential(
                nn.Conv2d(in_planes, planes, 1, stride=stride, bias=False),
                nn.BatchNorm2d(planes),
            )
        self.relu = nn.ReLU(inplace=True)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.bn2(self.conv2(out))
        return self.relu(out + self.shortcut(x))


class CifarResNet18(nn.Module):
    """ResNet-18 with a 3x3 stem and no max-pool; emits 512-wide features."""

    feature_dim = FEATURE_DIM

    def __init__(self):
        super().__init__()
        self.conv1 = nn.Conv2d(3, 64, 3, stride=1, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(64)
        self.relu = nn.ReLU(inplace=True)
        self.layer1 = self._make_layer(64, 64, stride=1)
        self.layer2 = self._make_layer(64, 128, stride=2)
        self.layer3 = self._make_layer(128, 256, stride=2)
        self.layer4 = self._make_layer(256, 512, stride=2)
        self.avgpool = nn.AdaptiveAvgPool2d(1)

    @staticmethod
    def _make_layer(in_planes: int, planes: int, stride: int) -> nn.Sequential:
        return nn.Sequential(
            BasicBlock(in_planes, planes, stride), BasicBlock(planes, planes, 1)
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        out = self.relu(self.bn1(self.conv1(x)))
        out = self.layer4(self.layer3(self.layer2(self.layer1(out))))
        return torch.flatten(self.avgpool(out), 1)


def load_checkpoint(path: str, device: str = "cpu"):
    """Build the encoder from a checkpoint; returns (model, head, normalize).

    head is an nn.Linear or None; normalize is a (mean, std) tensor pair or
    None. Shape mismatches raise CheckpointError naming expected vs found.
    """
    try:
        blob = torch.load(path, map_location="cpu", weights_only=True)
    except Exception as exc:
        raise CheckpointError(f"{path}: cannot load checkpoint: {exc}") from exc
    if not isinstance(blob, dict) or "state_dict" not in blob:
        raise CheckpointError(f"{path}: checkpoint must be a dict with a state_dict")
    arch = blob.get("arch")
    if arch != ARCH_NAME:
        raise CheckpointError(f"{path}: unsupported arch {arch!r}, expected {ARCH_NAME!r}")
    model = CifarResNet18()
    try:
        model.load_state_dict(blob["state_dict"], strict=True)
    except RuntimeError as exc:
        raise CheckpointError(f"{path}: state_dict mismatch: {exc}") from exc

    head = None
    if "head" in blob and blob["head"] is not None:
        raw = blob["head"]
        try:
            weight, bias = raw["weight"], raw["bias"]
        except (TypeError, KeyError) as exc:
            raise CheckpointError(f"{path}: head must carry 'weight' and 'bias'") from exc
        if weight.ndim != 2 or weight.shape[1] != model.feature_dim:
            raise CheckpointError(
                f"{path}: head expects input width {tuple(weight.shape)}, "
                f"encoder outputs {model.feature_dim}"
            )
        if bias.shape != (weight.shape[0],):
            raise CheckpointError(
                f"{path}: head bias shape {tuple(bias.shape)} != ({weight.shape[0]},)"
            )
        head = nn.Linear(weight.shape[1], weight.shape[0])
        with torch.no_grad():
            head.weight.copy_(weight)
            head.bias.copy_(bias)

    normalize = None
    if "normalize" in blob and blob["normalize"] is not None:
        raw = blob["normalize"]
        mean = torch.as_tensor(raw["mean"], dtype=torch.float32).view(1, 3, 1, 1)
        std = torch.as_tensor(raw["std"], dtype=torch.float32).view(1, 3, 1, 1)
        normalize = (mean, std)

    model.to(device).eval()
    if head is not None:
        head.to(device).eval()
    return model, head, normalize
