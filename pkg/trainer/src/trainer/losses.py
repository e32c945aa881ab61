"""Training objectives."""

from __future__ import annotations

import torch


def masked_l1(pred: torch.Tensor, target: torch.Tensor, mask: torch.Tensor) -> torch.Tensor:
    """Mean absolute error over valid pixels only.

    `mask` broadcasts over the channel dimension; background pixels carry an
    encoding sentinel rather than data, so they must not contribute.
    """
    mask = mask.to(pred.dtype)
    diff = (pred - target).abs() * mask
    denom = mask.expand_as(pred).sum()
    if denom == 0:
        return pred.sum() * 0.0
    return diff.sum() / denom


def completion_loss(
    pred: torch.Tensor, target_values: torch.Tensor, target_mask: torch.Tensor
) -> tuple[torch.Tensor, torch.Tensor]:
    """(total loss, masked value L1) for a net predicting values + mask.

    The last predicted channel is the validity mask; it gets an unmasked L1
    term so the net learns *where* the surface is, not just its values.
    """
    values, mask_pred = pred[:, :-1], pred[:, -1:]
    value_l1 = masked_l1(values, target_values, target_mask)
    mask_l1 = (mask_pred - target_mask.to(pred.dtype)).abs().mean()
    return value_l1 + mask_l1, value_l1
