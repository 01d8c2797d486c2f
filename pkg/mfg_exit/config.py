from __future__ import annotations

import os
from dataclasses import dataclass
from enum import IntEnum

from dotenv import load_dotenv

load_dotenv()


@dataclass(frozen=True)
class Settings:
    # Logging / output
    log_level: str = "INFO"
    output_dir: str = "out"

    # Reproducibility
    seed: int = 0

    # Density threshold: eps_m = eps_m_rel * max(max m, 1)
    eps_m_rel: float = 1e-6

    # Assumption sampling
    validation_samples: int = 1000

    # Verification thresholds
    verify_tol: float = 1e-6
    gradcheck_tol: float = 1e-5
    gradcheck_fields: int = 5
    fd_step: float = 1e-6


def load_settings() -> Settings:
    return Settings(
        log_level=os.getenv("MFG_LOG_LEVEL", "INFO").upper(),
        output_dir=os.getenv("MFG_OUTPUT_DIR", "out"),
        seed=int(os.getenv("MFG_SEED", "0")),
        eps_m_rel=float(os.getenv("MFG_EPS_M_REL", "1e-6")),
        validation_samples=int(os.getenv("MFG_VALIDATION_SAMPLES", "1000")),
        verify_tol=float(os.getenv("MFG_VERIFY_TOL", "1e-6")),
        gradcheck_tol=float(os.getenv("MFG_GRADCHECK_TOL", "1e-5")),
        gradcheck_fields=int(os.getenv("MFG_GRADCHECK_FIELDS", "5")),
        fd_step=float(os.getenv("MFG_FD_STEP", "1e-6")),
    )


class ExitCode(IntEnum):
    OK = 0
    CONFIG = 1
    NOT_CONVERGED = 2
    VERIFICATION_FAILED = 3


# Boundary faces per spatial dimension, in classification order
FACES_BY_DIM: dict[int, tuple[str, ...]] = {
    1: ("left", "right"),
    2: ("left", "right", "bottom", "top"),
}

# face → (axis, side) with side 0 = lower extent, 1 = upper extent
FACE_AXES: dict[str, tuple[int, int]] = {
    "left": (0, 0),
    "right": (0, 1),
    "bottom": (1, 0),
    "top": (1, 1),
}


settings = load_settings()
