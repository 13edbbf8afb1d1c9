import os
from typing import Optional

import torch

from ..logger import logger
from ..util import as_tensor

PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "data")

VARIANTS = ("roeder", "chib78")


def load_galaxy(variant: str = "roeder", path: Optional[str] = None) -> torch.Tensor:
    """Loads the 82 galaxy recession velocities in units of 1000 km/s.

    Args:
        variant (str, optional): "roeder" for the original data or "chib78" for the copy with a
            transcription error in the 78th observation. Defaults to "roeder".
        path (Optional[str], optional): Read this file instead of the packaged one.

    Returns:
        torch.Tensor: Velocities, shape (82,).
    """
    if variant not in VARIANTS:
        raise ValueError(f"Unknown galaxy variant '{variant}', expected one of {VARIANTS}")

    if path is None:
        path = os.path.join(PATH, f"galaxy_{variant}.txt")

    with open(path, "r") as file:
        data = as_tensor([float(line) for line in file if line.strip()])

    if data.shape[0] != 82:
        raise ValueError(f"Galaxy data must hold 82 velocities, '{path}' has {data.shape[0]}")

    if variant == "roeder":
        mean = float(data.mean())
        precision = float(1 / data.var())

        if abs(mean - 20.8) > 0.05 or abs(precision - 0.048) > 0.002:
            raise ValueError(
                f"Galaxy data in '{path}' has mean {mean:.3f} and precision {precision:.4f}; "
                "expected 20.8 and 0.048 in units of 1000 km/s"
            )

    logger.debug(f"Loaded galaxy data variant={variant} from {path}")

    return data
