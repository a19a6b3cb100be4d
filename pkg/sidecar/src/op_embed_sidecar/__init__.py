"""Embedding HTTP sidecar and vector-store exporter."""

__version__ = "0.1.0"

from op_embed_sidecar.encoders import HashEncoder, SbertEncoder, build_encoder
from op_embed_sidecar.export import export_store
from op_embed_sidecar.service import SidecarConfig, create_app

__all__ = [
    "__version__",
    "HashEncoder",
    "SbertEncoder",
    "SidecarConfig",
    "build_encoder",
    "create_app",
    "export_store",
]
