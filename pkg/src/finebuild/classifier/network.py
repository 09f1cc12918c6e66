"""Dual-head student network on a lightweight channel-shuffle backbone.

The backbone follows the split / depthwise / concat / shuffle unit design:
each unit splits channels in half, transforms one half with a pointwise -
depthwise - pointwise stack, concatenates and shuffles. Downsampling units
process both halves with stride 2 and double the width. Two linear heads
share the pooled feature: the task head over the K fine-grained classes
and the distillation head over the teacher's label space.
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F


def channel_shuffle(x: torch.Tensor, groups: int) -> torch.Tensor:
    n, c, h, w = x.shape
    return (
        x.view(n, groups, c // groups, h, w)
        .transpose(1, 2)
        .reshape(n, c, h, w)
    )


def _pw(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 1, bias=False),
        nn.BatchNorm2d(cout),
        nn.ReLU(inplace=True),
    )


def _dw(ch: int, stride: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(ch, ch, 3, stride=stride, padding=1, groups=ch, bias=False),
        nn.BatchNorm2d(ch),
    )


class ShuffleUnit(nn.Module):
    def __init__(self, channels: int, stride: int = 1):
        super().__init__()
        self.stride = stride
        half = channels // 2
        if stride == 1:
            self.branch = nn.Sequential(_pw(half, half), _dw(half, 1), _pw(half, half))
            self.shortcut = None
        else:
            self.branch = nn.Sequential(
                _pw(channels, channels), _dw(channels, 2), _pw(channels, channels)
            )
            self.shortcut = nn.Sequential(_dw(channels, 2), _pw(channels, channels))

    def forward(self, x):
        if self.stride == 1:
            a, b = x.chunk(2, dim=1)
            out = torch.cat([a, self.branch(b)], dim=1)
        else:
            out = torch.cat([self.shortcut(x), self.branch(x)], dim=1)
        return channel_shuffle(out, 2)


class DualHeadClassifier(nn.Module):
    def __init__(self, num_classes: int, teacher_classes: int,
                 width: int = 24, blocks_per_stage: int = 2):
        super().__init__()
        self.num_classes = num_classes
        self.teacher_classes = teacher_classes
        self.stem = nn.Sequential(
            nn.Conv2d(3, width, 3, padding=1, bias=False),
            nn.BatchNorm2d(width),
            nn.ReLU(inplace=True),
        )
        stages = []
        ch = width
        for _ in range(3):
            stages.append(ShuffleUnit(ch, stride=2))
            ch *= 2
            stages.extend(ShuffleUnit(ch) for _ in range(blocks_per_stage))
        self.stages = nn.Sequential(*stages)
        self.task_head = nn.Linear(ch, num_classes)
        self.distill_head = nn.Linear(ch, teacher_classes)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        h = self.stages(self.stem(x))
        return F.adaptive_avg_pool2d(h, 1).flatten(1)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        feat = self.features(x)
        return self.task_head(feat), self.distill_head(feat)


def build_classifier(num_classes: int, teacher_classes: int, width: int = 24,
                     seed: int = 0) -> DualHeadClassifier:
    """Construct the student with reproducible initial weights."""
    torch.manual_seed(seed)
    return DualHeadClassifier(num_classes, teacher_classes, width=width)
