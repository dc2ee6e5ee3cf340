"""
Row-sparse Adagrad with a per-element accumulator.
"""

from dataclasses import dataclass

import torch


def adagrad_step(
    params: torch.Tensor,
    state: torch.Tensor,
    row_ids: torch.Tensor,
    grad: torch.Tensor,
    lr: float,
    eps: float = 1e-10,
) -> None:
    """
    Apply one Adagrad update in place to the given rows.

    Per element: state += g^2; params -= lr * g / (sqrt(state) + eps).
    Both changes are added with index_add_, so updates on disjoint rows commute.
    """
    if row_ids.numel() == 0:
        return
    # the update is non-linear in g, so duplicate rows are summed first
    unique_ids, inverse = torch.unique(row_ids, return_inverse=True)
    if unique_ids.numel() != row_ids.numel():
        summed = torch.zeros(unique_ids.numel(), grad.shape[1], dtype=grad.dtype)
        summed.index_add_(0, inverse, grad)
        row_ids, grad = unique_ids, summed

    grad = grad.to(params.dtype)
    state.index_add_(0, row_ids, grad * grad)
    std = state.index_select(0, row_ids).sqrt_().add_(eps)
    params.index_add_(0, row_ids, -lr * grad / std)


@dataclass
class Adagrad:
    """Validated Adagrad settings the parameter stores apply updates with."""

    lr: float = 0.1
    eps: float = 1e-10

    def __post_init__(self) -> None:
        if self.eps <= 0:
            raise ValueError(f"eps must be > 0, got {self.eps}")
        if self.lr <= 0:
            raise ValueError(f"lr must be > 0, got {self.lr}")

    def step(self, params: torch.Tensor, state: torch.Tensor, row_ids: torch.Tensor, grad: torch.Tensor) -> None:
        adagrad_step(params, state, row_ids, grad, self.lr, self.eps)
