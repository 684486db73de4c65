"""Binary corpus format shared between the core toolkit and the trainer.

A dataset is a directory holding

* ``manifest.json``: UTF-8 header describing the payload,
* ``inputs.bin``: sample_count x 5 x N x N little-endian float32, the five
  polarimetric images per sample,
* ``targets.bin``: sample_count x 3 x N x N little-endian float32, the gate
  parameters per sample as (theta, polar, azimuth) angle maps.

Both payloads are raw row-major, sample-major arrays: byte-identical for
identical inputs on any platform, and cheap to read lazily with memmaps.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .forward import MeasurementStack
from .su2 import (
    ProcessMap,
    axis_from_spherical,
    degenerate_axis_convention,
    spherical_from_axis,
)

FORMAT_VERSION = 1
CHANNELS_IN = 5
CHANNELS_OUT = 3
DTYPE = np.dtype("<f4")

MANIFEST_NAME = "manifest.json"
INPUTS_NAME = "inputs.bin"
TARGETS_NAME = "targets.bin"

GENERATOR_KINDS = ("fourier", "plate", "mixed")


class CorruptDatasetError(RuntimeError):
    """Dataset payload does not match its manifest."""


@dataclass(frozen=True)
class DatasetManifest:
    n_pixels: int
    sample_count: int
    format_version: int = FORMAT_VERSION
    channels_in: int = CHANNELS_IN
    channels_out: int = CHANNELS_OUT
    dtype: str = "float32"
    byte_order: str = "little"
    layout: str = "row-major"
    sigma: float = 0.0
    root_seed: int = 0
    generator_kind: str = "fourier"

    def __post_init__(self) -> None:
        if self.n_pixels < 2:
            raise ValueError("n_pixels must be >= 2")
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")

    def bytes_per_input_sample(self) -> int:
        return self.channels_in * self.n_pixels**2 * DTYPE.itemsize

    def bytes_per_target_sample(self) -> int:
        return self.channels_out * self.n_pixels**2 * DTYPE.itemsize

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "DatasetManifest":
        data = json.loads(text)
        manifest = cls(**data)
        if manifest.format_version != FORMAT_VERSION:
            raise CorruptDatasetError(
                f"unknown format_version {manifest.format_version}; expected {FORMAT_VERSION}"
            )
        if manifest.channels_in != CHANNELS_IN:
            raise CorruptDatasetError(
                f"channels_in must be {CHANNELS_IN} (minimal measurement set), got {manifest.channels_in}"
            )
        if manifest.channels_out != CHANNELS_OUT:
            raise CorruptDatasetError(
                f"channels_out must be {CHANNELS_OUT}, got {manifest.channels_out}"
            )
        if manifest.dtype != "float32" or manifest.byte_order != "little":
            raise CorruptDatasetError("payload must be little-endian float32")
        if manifest.layout != "row-major":
            raise CorruptDatasetError("payload must be row-major")
        return manifest


def angles_from_process(m: ProcessMap) -> np.ndarray:
    """(3, N, N) array of (theta, polar, azimuth) parameter maps."""
    polar, azimuth = spherical_from_axis(m.axis)
    return np.stack([m.theta, polar, azimuth], axis=0)


def process_from_angles(angles: np.ndarray) -> ProcessMap:
    """Rebuild a process map from (theta, polar, azimuth) angle maps."""
    angles = np.asarray(angles, dtype=float)
    if angles.ndim != 3 or angles.shape[0] != 3:
        raise ValueError(f"expected shape (3, N, N), got {angles.shape}")
    theta = np.clip(angles[0], 0.0, np.pi)
    axis = axis_from_spherical(angles[1], angles[2])
    axis /= np.linalg.norm(axis, axis=-1, keepdims=True)
    axis = degenerate_axis_convention(theta, axis)
    return ProcessMap(theta, axis, canonicalized=False)


def write_dataset(
    samples: Iterable[tuple[MeasurementStack, ProcessMap]],
    path,
    sigma: float = 0.0,
    root_seed: int = 0,
    generator_kind: str = "fourier",
) -> DatasetManifest:
    """Serialize (stack, process) pairs; returns the manifest.

    Samples are streamed to disk in iteration order.  The manifest is
    written last so that interrupted writes never leave a readable-looking
    dataset behind.
    """
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    n_pixels = None
    count = 0
    with open(path / INPUTS_NAME, "wb") as f_in, open(path / TARGETS_NAME, "wb") as f_tg:
        for stack, pmap in samples:
            if n_pixels is None:
                n_pixels = stack.n_pixels
            if stack.n_pixels != n_pixels or pmap.n_pixels != n_pixels:
                raise ValueError(
                    f"heterogeneous sample size: expected N={n_pixels}, "
                    f"got stack N={stack.n_pixels}, process N={pmap.n_pixels}"
                )
            f_in.write(np.ascontiguousarray(stack.images, dtype=DTYPE).tobytes())
            f_tg.write(np.ascontiguousarray(angles_from_process(pmap), dtype=DTYPE).tobytes())
            count += 1
    if count == 0:
        raise ValueError("write_dataset() requires at least one sample")
    manifest = DatasetManifest(
        n_pixels=n_pixels,
        sample_count=count,
        sigma=float(sigma),
        root_seed=int(root_seed),
        generator_kind=generator_kind,
    )
    (path / MANIFEST_NAME).write_text(manifest.to_json(), encoding="utf-8")
    return manifest


class DatasetReader:
    """Random access into a serialized corpus without loading it whole."""

    def __init__(self, path, manifest: DatasetManifest):
        self.path = Path(path)
        self.manifest = manifest
        n = manifest.n_pixels
        self._inputs = np.memmap(
            self.path / INPUTS_NAME,
            dtype=DTYPE,
            mode="r",
            shape=(manifest.sample_count, manifest.channels_in, n, n),
        )
        self._targets = np.memmap(
            self.path / TARGETS_NAME,
            dtype=DTYPE,
            mode="r",
            shape=(manifest.sample_count, manifest.channels_out, n, n),
        )

    def __len__(self) -> int:
        return self.manifest.sample_count

    def inputs(self, index: int) -> np.ndarray:
        return np.asarray(self._inputs[index])

    def targets(self, index: int) -> np.ndarray:
        return np.asarray(self._targets[index])

    def stack(self, index: int) -> MeasurementStack:
        sigma = self.manifest.sigma
        return MeasurementStack(
            self.inputs(index).astype(float), noisy=sigma > 0, sigma=sigma
        )

    def process(self, index: int) -> ProcessMap:
        return process_from_angles(self.targets(index).astype(float))


def read_dataset(path) -> tuple[DatasetManifest, DatasetReader]:
    """Open a dataset directory, validating declared sizes against the files."""
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.exists():
        raise FileNotFoundError(f"no {MANIFEST_NAME} in {path}")
    manifest = DatasetManifest.from_json(manifest_path.read_text(encoding="utf-8"))
    for name, per_sample in (
        (INPUTS_NAME, manifest.bytes_per_input_sample()),
        (TARGETS_NAME, manifest.bytes_per_target_sample()),
    ):
        expected = manifest.sample_count * per_sample
        actual = (path / name).stat().st_size if (path / name).exists() else -1
        if actual != expected:
            raise CorruptDatasetError(
                f"{name}: expected {expected} bytes, found {actual}"
            )
    return manifest, DatasetReader(path, manifest)
