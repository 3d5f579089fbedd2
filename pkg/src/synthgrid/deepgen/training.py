"""Training loops for the VAE-GAN (encoder, supervisor, generator,
discriminator) and the vanilla GAN baseline.

Per batch the VAE-GAN takes three alternating updates:
  1. encoder + supervisor on prior KL + next-step latent MSE,
  2. generator on the four-term objective,
  3. discriminator on real / generated / pure-noise terms.

Everything is seeded through one torch.Generator, so a fixed config and seed
reproduce loss traces bit for bit.
"""
from dataclasses import dataclass, asdict

import numpy as np
import torch
from torch import optim

from ..errors import ContractError, NumericError, ParameterError
from ..ingest import DailyProfileSet
from .nets import (
    LatentCode,
    SEQ_LEN,
    SequenceDiscriminator,
    SequenceEncoder,
    SequenceGenerator,
    Supervisor,
    as_sequence_batch,
)
from . import losses


@dataclass(frozen=True)
class TrainConfig:
    latent_channels: int = 8
    hidden_channels: int = 24
    batch_size: int = 32
    epochs: int = 500
    learning_rate: float = 2e-4
    seed: int = 0
    model_type: str = "vaegan"       # "vaegan" or "gan"
    saturating_gan: bool = False     # classic minimax generator objective (gan only)

    def __post_init__(self):
        if self.model_type not in ("vaegan", "gan"):
            raise ParameterError(f"unknown model_type {self.model_type!r}")
        if self.batch_size < 1 or self.epochs < 1:
            raise ParameterError("batch_size and epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be positive")
        if self.latent_channels < 1 or self.hidden_channels < 1:
            raise ParameterError("channel counts must be >= 1")


class VaeGanModel:
    """Trained VAE-GAN handle: four networks plus training history."""

    kind = "vaegan"

    def __init__(self, config: TrainConfig, channel: str, norm=None):
        self.config = config
        self.channel = channel
        self.norm = norm
        self.encoder = SequenceEncoder(config.latent_channels, config.hidden_channels)
        self.supervisor = Supervisor(config.latent_channels)
        self.generator = SequenceGenerator(config.latent_channels, config.hidden_channels)
        self.discriminator = SequenceDiscriminator(config.hidden_channels)
        self.history: dict = {}
        self.epoch = 0

    def components(self):
        return {
            "encoder": self.encoder,
            "supervisor": self.supervisor,
            "generator": self.generator,
            "discriminator": self.discriminator,
        }


class VanillaGanModel:
    """Trained vanilla GAN handle: generator and discriminator."""

    kind = "gan"

    def __init__(self, config: TrainConfig, channel: str, norm=None):
        self.config = config
        self.channel = channel
        self.norm = norm
        self.generator = SequenceGenerator(config.latent_channels, config.hidden_channels)
        self.discriminator = SequenceDiscriminator(config.hidden_channels)
        self.history: dict = {}
        self.epoch = 0

    def components(self):
        return {"generator": self.generator, "discriminator": self.discriminator}


def reparameterize(mu, logvar, generator=None):
    """z = mu + exp(0.5 * logvar) * eps with eps ~ N(0, 1)."""
    eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype)
    return mu + torch.exp(0.5 * logvar) * eps


def encode(model: VaeGanModel, x, generator=None) -> LatentCode:
    """Run the encoder and supervisor on a batch; deterministic given the
    noise generator's state."""
    xb = as_sequence_batch(x)
    mu, logvar = model.encoder(xb)
    z = reparameterize(mu, logvar, generator)
    z_next = model.supervisor(z)
    return LatentCode(mu=mu, logvar=logvar, z=z, z_next=z_next)


def _train_batches(n, batch_size, generator):
    perm = torch.randperm(n, generator=generator)
    for start in range(0, n, batch_size):
        yield perm[start : start + batch_size]


def _require_normalized(train: DailyProfileSet):
    if not train.normalized:
        raise ContractError("training data must be normalized to [0, 1] first")
    if train.n_days < 1:
        raise ParameterError("training set is empty")


def _abort_if_diverged(values, checkpoint_dir):
    for name, value in values.items():
        if not np.isfinite(value):
            hint = (
                f"; last good checkpoint at {checkpoint_dir}" if checkpoint_dir else ""
            )
            raise NumericError(f"training diverged: {name} is {value}{hint}")


def train_vaegan(train: DailyProfileSet, config: TrainConfig, checkpoint_dir=None) -> VaeGanModel:
    """Fit the VAE-GAN on normalized day rows.  Records per-epoch mean loss
    curves and, when checkpoint_dir is given, overwrites a checkpoint there
    after every epoch."""
    _require_normalized(train)
    torch.manual_seed(config.seed)
    model = VaeGanModel(config, channel=train.channel, norm=train.norm)
    gen = torch.Generator().manual_seed(config.seed)

    data = as_sequence_batch(train.profiles)
    n = data.shape[0]
    lr = config.learning_rate
    opt_es = optim.Adam(
        list(model.encoder.parameters()) + list(model.supervisor.parameters()), lr=lr
    )
    opt_g = optim.Adam(model.generator.parameters(), lr=lr)
    opt_d = optim.Adam(model.discriminator.parameters(), lr=lr)

    keys = (
        "loss_encoder",
        "loss_prior",
        "loss_supervisor",
        "loss_reconstruction",
        "loss_generator_adv",
        "loss_generator",
        "loss_discriminator",
    )
    model.history = {k: [] for k in keys}

    for epoch in range(config.epochs):
        sums = dict.fromkeys(keys, 0.0)
        n_batches = 0
        for idx in _train_batches(n, config.batch_size, gen):
            xb = data[idx]

            # 1. encoder + supervisor
            code = encode(model, xb, gen)
            l_prior = losses.loss_prior(code.mu, code.logvar)
            l_sup = losses.loss_supervisor(code.z, code.z_next)
            l_e = l_prior + l_sup
            opt_es.zero_grad()
            l_e.backward()
            opt_es.step()

            # 2. generator (prior and supervisor terms are constants here)
            with torch.no_grad():
                code = encode(model, xb, gen)
                l_prior_g = losses.loss_prior(code.mu, code.logvar)
                l_sup_g = losses.loss_supervisor(code.z, code.z_next)
            x_hat = model.generator(code.z)
            d_fake = model.discriminator(x_hat)
            l_rec = losses.loss_reconstr(x_hat, xb)
            l_adv = losses.loss_adversarial_generator(d_fake)
            opt_g.zero_grad()
            (l_rec + l_adv).backward()
            opt_g.step()
            l_g_total = float(l_prior_g + l_rec.detach() + l_adv.detach() + l_sup_g)

            # 3. discriminator (no gradient into the generator)
            with torch.no_grad():
                code = encode(model, xb, gen)
                x_fake = model.generator(code.z)
            noise = torch.randn(xb.shape, generator=gen)
            l_d = losses.discriminator_loss(
                model.discriminator(xb),
                model.discriminator(x_fake),
                model.discriminator(noise),
            )
            opt_d.zero_grad()
            l_d.backward()
            opt_d.step()

            batch_vals = {
                "loss_encoder": l_e.detach().item(),
                "loss_prior": l_prior.detach().item(),
                "loss_supervisor": l_sup.detach().item(),
                "loss_reconstruction": l_rec.detach().item(),
                "loss_generator_adv": l_adv.detach().item(),
                "loss_generator": l_g_total,
                "loss_discriminator": l_d.detach().item(),
            }
            _abort_if_diverged(batch_vals, checkpoint_dir)
            for k, v in batch_vals.items():
                sums[k] += v
            n_batches += 1

        for k in keys:
            model.history[k].append(sums[k] / n_batches)
        model.epoch = epoch + 1
        if checkpoint_dir is not None:
            from .checkpoint import save_checkpoint

            save_checkpoint(model, checkpoint_dir)
    return model


def train_vanilla_gan(train: DailyProfileSet, config: TrainConfig, checkpoint_dir=None) -> VanillaGanModel:
    """Fit the vanilla GAN: alternating discriminator / generator BCE updates
    with Gaussian noise input."""
    _require_normalized(train)
    torch.manual_seed(config.seed)
    model = VanillaGanModel(config, channel=train.channel, norm=train.norm)
    gen = torch.Generator().manual_seed(config.seed)

    data = as_sequence_batch(train.profiles)
    n = data.shape[0]
    opt_g = optim.Adam(model.generator.parameters(), lr=config.learning_rate)
    opt_d = optim.Adam(model.discriminator.parameters(), lr=config.learning_rate)
    model.history = {"loss_generator": [], "loss_discriminator": []}

    for epoch in range(config.epochs):
        g_sum = d_sum = 0.0
        n_batches = 0
        for idx in _train_batches(n, config.batch_size, gen):
            xb = data[idx]
            z = torch.randn((xb.shape[0], config.latent_channels, SEQ_LEN), generator=gen)

            # discriminator
            with torch.no_grad():
                x_fake = model.generator(z)
            l_d = losses.bce_toward_one(model.discriminator(xb)) + losses.bce_toward_zero(
                model.discriminator(x_fake)
            )
            opt_d.zero_grad()
            l_d.backward()
            opt_d.step()

            # generator
            d_fake = model.discriminator(model.generator(z))
            if config.saturating_gan:
                l_g = -losses.bce_toward_zero(d_fake)
            else:
                l_g = losses.loss_adversarial_generator(d_fake)
            opt_g.zero_grad()
            l_g.backward()
            opt_g.step()

            batch_vals = {
                "loss_generator": l_g.detach().item(),
                "loss_discriminator": l_d.detach().item(),
            }
            _abort_if_diverged(batch_vals, checkpoint_dir)
            g_sum += batch_vals["loss_generator"]
            d_sum += batch_vals["loss_discriminator"]
            n_batches += 1

        model.history["loss_generator"].append(g_sum / n_batches)
        model.history["loss_discriminator"].append(d_sum / n_batches)
        model.epoch = epoch + 1
        if checkpoint_dir is not None:
            from .checkpoint import save_checkpoint

            save_checkpoint(model, checkpoint_dir)
    return model


def _sample_days(model, n_days: int, seed: int) -> DailyProfileSet:
    if n_days <= 0:
        raise ParameterError(f"n_days must be positive, got {n_days}")
    gen = torch.Generator().manual_seed(seed)
    z = torch.randn((n_days, model.config.latent_channels, SEQ_LEN), generator=gen)
    with torch.no_grad():
        days = model.generator(z).squeeze(1).numpy().astype(np.float64)
    days = np.clip(days, 0.0, 1.0)
    dates = tuple(f"synthetic-{i:04d}" for i in range(n_days))
    return DailyProfileSet(
        profiles=days, channel=model.channel, dates=dates, norm=model.norm, normalized=True
    )


def generate_vaegan(model: VaeGanModel, n_days: int, seed: int) -> DailyProfileSet:
    """Decode fresh standard-normal latent sequences into synthetic days."""
    return _sample_days(model, n_days, seed)


def generate_gan(model: VanillaGanModel, n_days: int, seed: int) -> DailyProfileSet:
    """Map seeded noise through the trained generator."""
    return _sample_days(model, n_days, seed)


def config_to_dict(config: TrainConfig) -> dict:
    return asdict(config)
