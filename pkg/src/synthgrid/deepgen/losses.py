"""Loss definitions for the VAE-GAN and the vanilla GAN.

Conventions: sequences are (B, C, T) tensors; discriminator outputs are
probabilities in (0, 1).  Every binary cross-entropy clamps its argument to
[1e-7, 1 - 1e-7] before taking logs, so losses stay finite.
"""
import torch

from ..errors import ContractError

LOG_CLAMP = 1e-7


def _check_probability(p: torch.Tensor) -> torch.Tensor:
    if p.numel() and (p.min() < 0 or p.max() > 1):
        raise ContractError("discriminator output outside [0, 1]; expected probabilities")
    return torch.clamp(p, LOG_CLAMP, 1.0 - LOG_CLAMP)


def bce_toward_one(p: torch.Tensor) -> torch.Tensor:
    """-mean log p: zero when the discriminator is fully convinced."""
    return -torch.log(_check_probability(p)).mean()


def bce_toward_zero(p: torch.Tensor) -> torch.Tensor:
    """-mean log(1 - p)."""
    return -torch.log1p(-_check_probability(p)).mean()


def loss_prior(mu: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """Closed-form KL divergence of N(mu, sigma^2) from N(0, 1):
    0.5 * (mu^2 + sigma^2 - 1 - log sigma^2), summed over latent channels and
    averaged over batch and time steps.  Scalar inputs are averaged directly.
    """
    if mu.shape != logvar.shape:
        raise ContractError(f"mu shape {tuple(mu.shape)} != logvar shape {tuple(logvar.shape)}")
    kl = 0.5 * (mu * mu + torch.exp(logvar) - 1.0 - logvar)
    if kl.ndim == 3:
        return kl.sum(dim=1).mean()
    return kl.mean()


def loss_reconstr(x_hat: torch.Tensor, x: torch.Tensor) -> torch.Tensor:
    """Mean squared reconstruction error; zero iff x_hat == x."""
    if x_hat.shape != x.shape:
        raise ContractError(f"shape mismatch {tuple(x_hat.shape)} vs {tuple(x.shape)}")
    diff = x_hat - x
    return (diff * diff).mean()


def loss_supervisor(z: torch.Tensor, z_next: torch.Tensor) -> torch.Tensor:
    """MSE between the next-step prediction z_next[..., t] and the realized
    latent z[..., t+1], over the 95 comparable steps."""
    if z.shape != z_next.shape:
        raise ContractError(f"shape mismatch {tuple(z.shape)} vs {tuple(z_next.shape)}")
    diff = z_next[..., :-1] - z[..., 1:]
    return (diff * diff).mean()


def loss_adversarial_generator(d_fake: torch.Tensor) -> torch.Tensor:
    """Non-saturating generator objective: push D(G(z)) toward 1."""
    return bce_toward_one(d_fake)


def encoder_loss(mu, logvar, z, z_next) -> torch.Tensor:
    """Encoder + supervisor objective: prior KL plus next-step latent MSE."""
    return loss_prior(mu, logvar) + loss_supervisor(z, z_next)


def generator_loss(mu, logvar, x_hat, x, d_fake, z, z_next) -> torch.Tensor:
    """Four-term generator objective: prior + reconstruction + adversarial +
    supervisor."""
    return (
        loss_prior(mu, logvar)
        + loss_reconstr(x_hat, x)
        + loss_adversarial_generator(d_fake)
        + loss_supervisor(z, z_next)
    )


def discriminator_loss(d_real, d_fake, d_noise) -> torch.Tensor:
    """Three-term discriminator objective: classify real as real, generated
    samples as fake, and pure Gaussian noise sequences as fake."""
    return bce_toward_one(d_real) + bce_toward_zero(d_fake) + bce_toward_zero(d_noise)
