"""Encoder-decoder with skip connections for image-to-image objectives."""

from __future__ import annotations

import torch
from torch import nn


def _block(cin: int, cout: int) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(cin, cout, 3, padding=1),
        nn.InstanceNorm2d(cout, affine=True),
        nn.LeakyReLU(0.2, inplace=True),
        nn.Conv2d(cout, cout, 3, padding=1),
        nn.InstanceNorm2d(cout, affine=True),
        nn.LeakyReLU(0.2, inplace=True),
    )


class UNet(nn.Module):
    """4-stage U-Net; the final channel is a sigmoid validity mask.

    With `residual_channels=k`, the first k input channels are added to the
    first k outputs, so a completion net starts from "copy the partial view"
    and only learns the correction — the natural prior for hole filling.
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        base: int = 16,
        residual_channels: int = 0,
    ):
        super().__init__()
        if residual_channels > min(in_channels, out_channels - 1):
            raise ValueError("residual channels exceed the value channel count")
        self.residual_channels = residual_channels
        widths = [base, base * 2, base * 4, base * 8]
        self.down = nn.ModuleList()
        prev = in_channels
        for w in widths:
            self.down.append(_block(prev, w))
            prev = w
        self.pool = nn.MaxPool2d(2)
        self.bottleneck = _block(widths[-1], widths[-1] * 2)
        self.up = nn.ModuleList()
        self.decode = nn.ModuleList()
        prev = widths[-1] * 2
        for w in reversed(widths):
            self.up.append(nn.ConvTranspose2d(prev, w, 2, stride=2))
            self.decode.append(_block(w * 2, w))
            prev = w
        self.head = nn.Conv2d(widths[0], out_channels, 1)
        # start as the identity correction: residual nets then begin from an
        # exact copy of the partial input instead of decoder noise
        nn.init.zeros_(self.head.weight)
        nn.init.zeros_(self.head.bias)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        inputs = x
        skips = []
        for stage in self.down:
            x = stage(x)
            skips.append(x)
            x = self.pool(x)
        x = self.bottleneck(x)
        for up, decode, skip in zip(self.up, self.decode, reversed(skips)):
            x = decode(torch.cat([up(x), skip], dim=1))
        out = self.head(x)
        values, mask = out[:, :-1], out[:, -1:]
        if self.residual_channels:
            k = self.residual_channels
            values = torch.cat([values[:, :k] + inputs[:, :k], values[:, k:]], dim=1)
        # value channels stay linear, the mask channel is a probability
        return torch.cat([values, torch.sigmoid(mask)], dim=1)
