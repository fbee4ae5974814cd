"""Detector resolution for ddip-otfs-lab."""

from __future__ import annotations

import importlib

from ddipotfs.exceptions import ParameterError

_DETECTOR_CLASS_MAPPING = {
    "mmse": "ddipotfs.detectors.pipelines.MmseDetector",
    "mmse-bpic": "ddipotfs.detectors.pipelines.MmseBpicDetector",
    "ddip-bpic": "ddipotfs.detectors.pipelines.DdipBpicDetector",
}

DETECTOR_NAMES = tuple(_DETECTOR_CLASS_MAPPING)


def resolve_detector_class(detector: str | type) -> type:
    """Resolve a detector class from a short name or a full import path."""
    if isinstance(detector, type):
        return detector
    full_path = _DETECTOR_CLASS_MAPPING.get(detector, detector)
    try:
        module_name, class_name = full_path.rsplit(".", 1)
        module = importlib.import_module(module_name)
        return getattr(module, class_name)
    except (ValueError, ImportError, AttributeError) as exc:
        msg = f"Unknown detector: {detector} (resolved to {full_path}); known: {', '.join(DETECTOR_NAMES)}"
        raise ParameterError(msg) from exc


__all__ = ["DETECTOR_NAMES", "resolve_detector_class"]
