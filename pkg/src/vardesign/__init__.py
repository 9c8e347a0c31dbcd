"""Inverse design of ventilated acoustic resonators.

Physics: closed-form unit transmission loss (`acoustics`), image-domain
Helmholtz evaluation (`fdfd`), raster/parameter round trips (`raster`).
Learning: dataset pipeline (`dataset`), autodiff toolkit (`nn`), the
response-conditioned VAE (`arvae`) and the dense baseline (`apnn`).
Orchestration: `workflows` and the `vardesign` CLI (`cli`).
"""

from . import acoustics, apnn, arvae, bessel, dataset, fdfd, nn, raster, workflows
from .acoustics import FrequencyGrid, StlCurve, VarGeometry

__all__ = [
    "FrequencyGrid", "StlCurve", "VarGeometry", "acoustics", "apnn", "arvae",
    "bessel", "dataset", "fdfd", "nn", "raster", "workflows",
]

__version__ = "0.1.0"
