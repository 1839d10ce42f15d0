"""Export bridge: run a TorchScript detector over a manifest, write detection files."""

from .export import ExportError, ExportJob, export_detections

__version__ = "0.1.0"

__all__ = ["ExportError", "ExportJob", "export_detections"]
