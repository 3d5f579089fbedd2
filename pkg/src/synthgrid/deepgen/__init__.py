"""Deep generative models: a VAE-GAN with a next-step supervisor and a
vanilla GAN baseline, both built on causal dilated 1-D convolutions."""

from .nets import (
    DILATIONS,
    KERNEL_SIZE,
    RECEPTIVE_FIELD,
    SEQ_LEN,
    CausalConv1d,
    LatentCode,
    SequenceDiscriminator,
    SequenceEncoder,
    SequenceGenerator,
    Supervisor,
    as_sequence_batch,
)
from .losses import (
    discriminator_loss,
    encoder_loss,
    generator_loss,
    loss_adversarial_generator,
    loss_prior,
    loss_reconstr,
    loss_supervisor,
)
from .training import (
    TrainConfig,
    VaeGanModel,
    VanillaGanModel,
    encode,
    generate_gan,
    generate_vaegan,
    train_vaegan,
    train_vanilla_gan,
)
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    "DILATIONS",
    "KERNEL_SIZE",
    "RECEPTIVE_FIELD",
    "SEQ_LEN",
    "CausalConv1d",
    "LatentCode",
    "SequenceDiscriminator",
    "SequenceEncoder",
    "SequenceGenerator",
    "Supervisor",
    "as_sequence_batch",
    "discriminator_loss",
    "encoder_loss",
    "generator_loss",
    "loss_adversarial_generator",
    "loss_prior",
    "loss_reconstr",
    "loss_supervisor",
    "TrainConfig",
    "VaeGanModel",
    "VanillaGanModel",
    "encode",
    "generate_gan",
    "generate_vaegan",
    "train_vaegan",
    "train_vanilla_gan",
    "load_checkpoint",
    "save_checkpoint",
]
