"""Bridge from Keras to the prioritizer's manifest, NNWB, and TBIN formats."""

from .dataset_export import export_dataset
from .keras_export import UnsupportedLayerError, export_model
from .writers import ExportError, read_tbin, write_manifest, write_tbin, write_weights

__version__ = "0.1.0"

__all__ = [
    "ExportError",
    "UnsupportedLayerError",
    "export_dataset",
    "export_model",
    "read_tbin",
    "write_manifest",
    "write_tbin",
    "write_weights",
]
