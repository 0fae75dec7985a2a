"""ZeroReg: zero-shot point-cloud registration over scene bundles."""

from ._kernels import BACKEND as kernel_backend
from .bundle import SceneBundle, read_bundle, write_bundle
from .pipeline import PipelineConfig, RegistrationReport, evaluate_suite, register_pair
from .registration import RigidTransform

__version__ = "0.1.0"

__all__ = [
    "SceneBundle",
    "read_bundle",
    "write_bundle",
    "PipelineConfig",
    "RegistrationReport",
    "register_pair",
    "evaluate_suite",
    "RigidTransform",
    "kernel_backend",
    "__version__",
]
