# backend/src/deformation.py

"""
Marker-free deformation representation.

The tactile/reference pair splits into a darker channel (contact) and a
brighter channel (gel flow around the contact); together with the
reference they form the regressor's 3-channel input.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from .core import GrayImage
from .errors import DimensionError, ParameterError

log = logging.getLogger(__name__)

DEFAULT_CONTACT_THRESHOLD = 50.0
DEFAULT_GAIN = 3.0


def _check_pair(ref: GrayImage, tactile: GrayImage) -> None:
    if ref.shape != tactile.shape:
        raise DimensionError(f"reference {ref.shape} and tactile {tactile.shape} differ in size")


@dataclass(frozen=True, eq=False)
class DeformationTriple:
    darker: GrayImage
    brighter: GrayImage
    reference: GrayImage

    def __post_init__(self):
        shapes = {self.darker.shape, self.brighter.shape, self.reference.shape}
        if len(shapes) != 1:
            raise DimensionError(f"triple channels differ in size: {sorted(shapes)}")
        if np.any((self.darker.data > 0.0) & (self.brighter.data > 0.0)):
            raise ParameterError("darker and brighter channels overlap")

    @property
    def shape(self) -> Tuple[int, int]:
        return self.reference.shape


def darker_image(ref: GrayImage, tactile: GrayImage) -> GrayImage:
    _check_pair(ref, tactile)
    return GrayImage(np.maximum(ref.data - tactile.data, 0.0))


def brighter_image(ref: GrayImage, tactile: GrayImage) -> GrayImage:
    _check_pair(ref, tactile)
    return GrayImage(np.maximum(tactile.data - ref.data, 0.0))


def compose_triple(ref: GrayImage, tactile: GrayImage) -> DeformationTriple:
    return DeformationTriple(darker_image(ref, tactile), brighter_image(ref, tactile), ref)


def visualize(triple: DeformationTriple, gain: float = DEFAULT_GAIN) -> np.ndarray:
    """(H, W, 3) RGB in [0, 1]: darker in red, brighter in green, over the gray reference."""
    if not gain > 0:
        raise ParameterError(f"gain must be positive, got {gain}")
    overlay = np.zeros(triple.shape + (3,))
    overlay[..., 0] = np.clip(gain * triple.darker.data, 0.0, 1.0)
    overlay[..., 1] = np.clip(gain * triple.brighter.data, 0.0, 1.0)
    gray = np.repeat(triple.reference.data[..., None], 3, axis=-1)
    return 0.5 * overlay + 0.5 * gray


def detect_contact(darker: GrayImage, energy_threshold: float = DEFAULT_CONTACT_THRESHOLD) -> bool:
    if not energy_threshold > 0:
        raise ParameterError(f"energy_threshold must be positive, got {energy_threshold}")
    return float(darker.data.sum()) > energy_threshold


# --- Centroids ---

def _mass_centroid(channel: GrayImage) -> Optional[Tuple[float, float]]:
    if float(channel.data.sum()) <= 0.0:
        return None
    row, col = ndimage.center_of_mass(channel.data)
    return float(col), float(row)


def contact_centroid(triple: DeformationTriple) -> Optional[Tuple[float, float]]:
    """(x, y) of the darker-channel mass, None without contact."""
    return _mass_centroid(triple.darker)


def brighter_centroid(triple: DeformationTriple) -> Optional[Tuple[float, float]]:
    return _mass_centroid(triple.brighter)
