"""Polarimetric forward model.

A space-dependent gate is probed by preparing a polarization state ``a``,
applying the process, and projecting onto a state ``b``; the camera
records ``I_ab = |<b|U|a>|^2`` pixel by pixel.  Five preparation/projection
pairs {LL, LH, LD, HH, HD} form the minimal informationally sufficient
image set used throughout the toolkit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .su2 import ProcessMap

_SQ2 = 1.0 / np.sqrt(2.0)


class StokesState(NamedTuple):
    label: str
    amplitudes: np.ndarray  # complex 2-vector in the circular basis


STOKES: dict[str, StokesState] = {
    "L": StokesState("L", np.array([1.0, 0.0], dtype=complex)),
    "R": StokesState("R", np.array([0.0, 1.0], dtype=complex)),
    "H": StokesState("H", np.array([_SQ2, _SQ2], dtype=complex)),
    "V": StokesState("V", np.array([_SQ2, -_SQ2], dtype=complex)),
    "D": StokesState("D", np.array([_SQ2, 1j * _SQ2], dtype=complex)),
    "A": StokesState("A", np.array([_SQ2, -1j * _SQ2], dtype=complex)),
}

#: (preparation, projection) pairs of the minimal five-image set, in the
#: fixed serialization order
MEASUREMENT_PAIRS = (("L", "L"), ("L", "H"), ("L", "D"), ("H", "H"), ("H", "D"))
MEASUREMENT_LABELS = tuple(f"I_{a}{b}" for a, b in MEASUREMENT_PAIRS)


def _state_vector(state) -> np.ndarray:
    if isinstance(state, StokesState):
        return state.amplitudes
    if isinstance(state, str):
        return STOKES[state].amplitudes
    vec = np.asarray(state, dtype=complex)
    if vec.shape != (2,):
        raise ValueError("polarization states are 2-component vectors")
    return vec


def projective_intensity(U: np.ndarray, a, b):
    """``|<b|U|a>|^2`` for a gate or a stack of gates.

    ``a`` and ``b`` may be Stokes labels ('L', 'R', 'H', 'V', 'D', 'A'),
    :class:`StokesState`, or raw complex 2-vectors.  ``U`` may carry any
    leading shape; the result drops the trailing (2, 2) axes.
    """
    va = _state_vector(a)
    vb = _state_vector(b)
    U = np.asarray(U, dtype=complex)
    amp = np.einsum("i,...ij,j->...", vb.conj(), U, va)
    out = np.abs(amp) ** 2
    if out.ndim == 0:
        return float(out)
    return out


@dataclass
class MeasurementStack:
    """The five polarimetric images of one process.

    ``images`` has shape (5, N, N) ordered (I_LL, I_LH, I_LD, I_HH, I_HD).
    Noiseless stacks hold values in [0, 1]; noisy stacks are deliberately
    left unclamped and record the noise level that produced them.
    """

    images: np.ndarray
    noisy: bool = False
    sigma: float = 0.0

    def __post_init__(self) -> None:
        self.images = np.asarray(self.images, dtype=float)
        if self.images.ndim != 3 or self.images.shape[0] != 5:
            raise ValueError(f"images must have shape (5, N, N), got {self.images.shape}")
        if self.images.shape[1] != self.images.shape[2]:
            raise ValueError("measurement images must be square")
        if not self.noisy:
            if np.any(self.images < -1e-12) or np.any(self.images > 1.0 + 1e-12):
                raise ValueError("noiseless intensities must lie in [0, 1]")

    @property
    def n_pixels(self) -> int:
        return self.images.shape[1]


def measurement_stack(m: ProcessMap) -> MeasurementStack:
    """Noiseless five-image stack of a process map."""
    U = m.unitaries()
    images = np.stack(
        [projective_intensity(U, a, b) for a, b in MEASUREMENT_PAIRS], axis=0
    )
    return MeasurementStack(np.clip(images, 0.0, 1.0), noisy=False, sigma=0.0)


def add_noise(s: MeasurementStack, sigma: float = 0.02, seed: int = 0) -> MeasurementStack:
    """Perturb every pixel of every image with i.i.d. Gaussian noise.

    Values are intentionally not clamped to [0, 1]; clamping would bias the
    discrepancy statistics computed downstream.
    """
    if s.noisy:
        raise ValueError("stack is already noisy")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    noisy = s.images + rng.normal(0.0, sigma, size=s.images.shape)
    return MeasurementStack(noisy, noisy=True, sigma=float(sigma))


def polarimetric_infidelity(a: MeasurementStack, b: MeasurementStack) -> float:
    """Mean squared discrepancy between two stacks: (1 / 5N^2) sum |I_a - I_b|^2.

    Computable without ground truth; zero iff the stacks are equal.
    """
    if a.n_pixels != b.n_pixels:
        raise ValueError(
            f"measurement stacks have different sizes: {a.n_pixels} vs {b.n_pixels}"
        )
    return float(np.mean((a.images - b.images) ** 2))
