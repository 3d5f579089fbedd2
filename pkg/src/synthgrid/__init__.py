"""synthgrid: synthetic smart-home time-series generation and validation.

Fits generative models (GMM, vanilla GAN, VAE-GAN with a next-step
supervisor) to residential load / PV / EV-charging daily profiles, scores
synthetic data with distribution distances (KL, MMD, Wasserstein), and
validates it by training a Q-learning home-energy-management agent offline
on synthetic days and measuring its online profit on real days.
"""

__version__ = "0.1.0"
