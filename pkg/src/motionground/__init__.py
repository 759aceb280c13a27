"""Motion-grounding engine: perception artifacts in, grounded prompts and
reports out.

Submodules:
    interchange  file formats and cross-validated perception bundles
    temporal     duration-adaptive segmentation and presence profiles
    geometry     depth-based 3D lifting and per-segment motion attributes
    serialize    byte-deterministic grounding text and QA prompts
    rewards      reward shaping and group-relative advantages
    evaluation   judge prompts, verdict parsing, accuracy reports
    pipeline     per-video orchestration used by the CLI
"""

from .errors import (
    BundleValidationError,
    DepthFormatError,
    EngineError,
    GeometryError,
    ManifestError,
    PromptError,
    QAFormatError,
)

__all__ = [
    "BundleValidationError",
    "DepthFormatError",
    "EngineError",
    "GeometryError",
    "ManifestError",
    "PromptError",
    "QAFormatError",
]

__version__ = "0.1.0"
