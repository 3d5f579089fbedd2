"""Network blocks: causal dilated Conv1D stacks for encoder, supervisor,
generator, and discriminator.

Every stack uses kernel size 2, stride 1, and dilation rates (1, 2, 4, 8, 16),
so the receptive field is 1 + (1+2+4+8+16) = 32 time steps and strictly
causal (left padding only).
"""
from dataclasses import dataclass

import torch
from torch import nn

from ..errors import ContractError, NumericError

SEQ_LEN = 96
KERNEL_SIZE = 2
DILATIONS = (1, 2, 4, 8, 16)
RECEPTIVE_FIELD = 1 + sum(DILATIONS)   # 32 steps


def as_sequence_batch(x) -> torch.Tensor:
    """Coerce an (n, 96) array or (B, 1, 96) tensor to a float32 (B, 1, 96) batch."""
    t = torch.as_tensor(x, dtype=torch.float32)
    if t.ndim == 2:
        t = t.unsqueeze(1)
    if t.ndim != 3 or t.shape[2] != SEQ_LEN:
        raise ContractError(f"sequence batch must be (B, C, {SEQ_LEN}), got {tuple(t.shape)}")
    if not torch.isfinite(t).all():
        raise ContractError("sequence batch contains non-finite values")
    return t


@dataclass
class LatentCode:
    """Per-step latent description of a batch: Gaussian parameters, the
    reparameterized sample z, and the supervisor's next-step prediction."""

    mu: torch.Tensor       # (B, C, T)
    logvar: torch.Tensor   # (B, C, T)
    z: torch.Tensor        # (B, C, T)
    z_next: torch.Tensor   # (B, C, T); z_next[..., t] predicts z[..., t+1]


class CausalConv1d(nn.Module):
    """Conv1d with left-only padding: output at t sees inputs at <= t."""

    def __init__(self, in_channels, out_channels, dilation, kernel_size=KERNEL_SIZE):
        super().__init__()
        self.pad = dilation * (kernel_size - 1)
        self.conv = nn.Conv1d(in_channels, out_channels, kernel_size, dilation=dilation)

    def forward(self, x):
        return self.conv(nn.functional.pad(x, (self.pad, 0)))


class SequenceEncoder(nn.Module):
    """Five causal dilated layers mapping a sequence to per-step Gaussian
    latent parameters (mean and log-variance heads)."""

    def __init__(self, latent_channels=8, hidden_channels=24, in_channels=1):
        super().__init__()
        channels = [in_channels] + [hidden_channels] * len(DILATIONS)
        self.layers = nn.ModuleList(
            CausalConv1d(channels[i], channels[i + 1], dilation=d)
            for i, d in enumerate(DILATIONS)
        )
        self.mu_head = nn.Conv1d(hidden_channels, latent_channels, 1)
        self.logvar_head = nn.Conv1d(hidden_channels, latent_channels, 1)

    def forward(self, x):
        h = x
        for i, layer in enumerate(self.layers):
            h = layer(h)
            if not torch.isfinite(h).all():
                raise NumericError(f"non-finite activation after encoder layer {i}")
            h = torch.relu(h)
        mu = self.mu_head(h)
        logvar = self.logvar_head(h)
        if not (torch.isfinite(mu).all() and torch.isfinite(logvar).all()):
            raise NumericError("non-finite activation after encoder heads")
        return mu, logvar


class Supervisor(nn.Module):
    """Single causal convolution over z predicting the latent one step ahead."""

    def __init__(self, latent_channels=8):
        super().__init__()
        self.conv = CausalConv1d(latent_channels, latent_channels, dilation=1)

    def forward(self, z):
        return self.conv(z)


class SequenceGenerator(nn.Module):
    """Decoder from per-step latent codes (or noise) back to a sequence.

    Mirrors the encoder's five-layer dilated stack; sigmoid output keeps
    samples in (0, 1) normalized space.
    """

    def __init__(self, latent_channels=8, hidden_channels=24, out_channels=1):
        super().__init__()
        channels = [latent_channels] + [hidden_channels] * (len(DILATIONS) - 1) + [out_channels]
        self.layers = nn.ModuleList(
            CausalConv1d(channels[i], channels[i + 1], dilation=d)
            for i, d in enumerate(DILATIONS)
        )

    def forward(self, z):
        h = z
        for layer in self.layers[:-1]:
            h = torch.relu(layer(h))
        return torch.sigmoid(self.layers[-1](h))


class SequenceDiscriminator(nn.Module):
    """Dilated stack pooled over time to a single real-vs-fake probability."""

    def __init__(self, hidden_channels=24, in_channels=1):
        super().__init__()
        channels = [in_channels] + [hidden_channels] * len(DILATIONS)
        self.layers = nn.ModuleList(
            CausalConv1d(channels[i], channels[i + 1], dilation=d)
            for i, d in enumerate(DILATIONS)
        )
        self.head = nn.Linear(hidden_channels, 1)

    def forward(self, x):
        h = x
        for layer in self.layers:
            h = torch.relu(layer(h))
        pooled = h.mean(dim=2)
        return torch.sigmoid(self.head(pooled)).squeeze(-1)
