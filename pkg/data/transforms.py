"""
Image Transforms

Rotation about the image center with bilinear interpolation, used for the
rotated-digit sweep.
"""

import numpy as np
from scipy import ndimage

from utils.errors import DataError


def rotate(image: np.ndarray, degrees: float) -> np.ndarray:
    """
    Rotate a square single-channel image counterclockwise by `degrees`.

    Every output pixel is mapped back into the source image (inverse mapping)
    and sampled bilinearly; samples falling outside the source are 0. Output
    values are clipped to [0, 1].

    Args:
        image: (H, W) or (H, W, 1) array with H == W
        degrees: Counterclockwise angle

    Returns:
        np.ndarray: Rotated image with the input's shape

    Raises:
        DataError: non-square or multi-channel input
    """
    image = np.asarray(image, dtype=np.float64)
    channel = image.ndim == 3
    if channel:
        if image.shape[2] != 1:
            raise DataError(f"rotate: expected a single channel, got shape {image.shape}")
        image = image[..., 0]
    if image.ndim != 2 or image.shape[0] != image.shape[1]:
        raise DataError(f"rotate: expected a square image, got shape {image.shape}")

    size = image.shape[0]
    center = (size - 1) / 2.0
    theta = np.deg2rad(degrees)
    rows, cols = np.meshgrid(np.arange(size, dtype=np.float64), np.arange(size, dtype=np.float64), indexing='ij')
    # output pixel in (x right, y up) coordinates, rotated back by -theta
    x = cols - center
    y = center - rows
    src_x = x * np.cos(theta) + y * np.sin(theta)
    src_y = -x * np.sin(theta) + y * np.cos(theta)
    coords = np.stack([center - src_y, center + src_x])
    rotated = ndimage.map_coordinates(image, coords, order=1, mode='constant', cval=0.0)
    rotated = np.clip(rotated, 0.0, 1.0)
    return rotated[..., None] if channel else rotated
