"""Desk-scale toolkit for minimum-width approximation with deep narrow networks.

Submodules:
    activations    scalar activation catalogue and iterated composition
    netcore        network model, padding, rank tools, serialization
    constructions  explicit cross-family approximating networks
    certifier      box sign-condition root certificates and self-intersection
    experiments    rotation targets, disk datasets, gradients, Adam training
    cli            command-line front end
"""

from . import activations, certifier, constructions, experiments, netcore

__version__ = "0.1.0"

__all__ = [
    "activations",
    "netcore",
    "constructions",
    "certifier",
    "experiments",
    "__version__",
]
