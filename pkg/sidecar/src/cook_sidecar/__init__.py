"""Reference model server for the knowledge-card wire protocol."""

from .app import ModelBundle, ModelLoadError, create_app, load_models, serve
from .config import SidecarConfig, SidecarConfigError, load_config
from .retrieval import Bm25Index, CorpusDocument, CorpusError, build_index

__version__ = "0.1.0"

__all__ = [
    "ModelBundle", "ModelLoadError", "create_app", "load_models", "serve",
    "SidecarConfig", "SidecarConfigError", "load_config",
    "Bm25Index", "CorpusDocument", "CorpusError", "build_index",
    "__version__",
]
