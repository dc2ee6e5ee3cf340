"""
Score functions.

Every supported score f(s, r, d) is linear in each argument, so it is expressed through
three linear forms:
    f = dst_query(s, r) . d = src_query(r, d) . s
    df/dr = rel_grad(s, d)
ComplEx stores a vector of length d as d/2 real parts followed by d/2 imaginary parts.
"""

from enum import Enum

import torch


class ModelKind(str, Enum):
    DOT = "dot"
    DISTMULT = "distmult"
    COMPLEX = "complex"

    @classmethod
    def parse(cls, value: "str | ModelKind") -> "ModelKind":
        if isinstance(value, ModelKind):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            names = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown model kind {value!r}, expected one of {names}") from None


def check_dim(kind: ModelKind, dim: int) -> None:
    if dim < 1:
        raise ValueError(f"embedding_dim must be >= 1, got {dim}")
    if ModelKind.parse(kind) is ModelKind.COMPLEX and dim % 2:
        raise ValueError(f"ComplEx needs an even embedding_dim, got {dim}")


def _halves(x: torch.Tensor):
    h = x.shape[-1] // 2
    return x[..., :h], x[..., h:]


def dst_query(kind: ModelKind, s: torch.Tensor, r: torch.Tensor) -> torch.Tensor:
    """Vector q with f(s, r, d) = q . d."""
    if kind is ModelKind.DOT:
        return s
    if kind is ModelKind.DISTMULT:
        return s * r
    s_re, s_im = _halves(s)
    r_re, r_im = _halves(r)
    return torch.cat([s_re * r_re - s_im * r_im, s_re * r_im + s_im * r_re], dim=-1)


def src_query(kind: ModelKind, r: torch.Tensor, d: torch.Tensor) -> torch.Tensor:
    """Vector p with f(s, r, d) = p . s."""
    if kind is ModelKind.DOT:
        return d
    if kind is ModelKind.DISTMULT:
        return r * d
    r_re, r_im = _halves(r)
    d_re, d_im = _halves(d)
    return torch.cat([r_re * d_re + r_im * d_im, r_re * d_im - r_im * d_re], dim=-1)


def rel_grad(kind: ModelKind, s: torch.Tensor, d: torch.Tensor) -> torch.Tensor:
    """Gradient of f(s, r, d) with respect to r."""
    if kind is ModelKind.DOT:
        return torch.zeros_like(s)
    if kind is ModelKind.DISTMULT:
        return s * d
    s_re, s_im = _halves(s)
    d_re, d_im = _halves(d)
    return torch.cat([s_re * d_re + s_im * d_im, s_re * d_im - s_im * d_re], dim=-1)


def score(kind: "str | ModelKind", s: torch.Tensor, r: torch.Tensor, d: torch.Tensor) -> torch.Tensor:
    """
    Score one triple (1-d inputs) or a batch of triples (rows).

    Dot ignores r; DistMult is the trilinear product; ComplEx is Re(<s, r, conj(d)>).
    """
    kind = ModelKind.parse(kind)
    s, r, d = (torch.as_tensor(x) for x in (s, r, d))
    if not (s.shape == r.shape == d.shape):
        raise ValueError(
            f"dimension mismatch: s{tuple(s.shape)} r{tuple(r.shape)} d{tuple(d.shape)}"
        )
    check_dim(kind, s.shape[-1])
    return (dst_query(kind, s, r) * d).sum(dim=-1)
