"""Bundled miniature corpus: five verified word problems with gold programs."""

from __future__ import annotations

from importlib.resources import files
from pathlib import Path

from .data import DatasetFile, load_dataset


def bundled_examples_path() -> Path:
    return Path(str(files("flsolve").joinpath("fixtures/examples.jsonl")))


def bundled_examples() -> DatasetFile:
    return load_dataset(bundled_examples_path())
