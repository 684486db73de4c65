"""Synthetic space-dependent SU(2) processes.

Three families are produced here:

* band-limited random processes, where each gate parameter is an
  independent random trigonometric series sampled on the pixel grid,
* waveplate device stacks (uniform plates, polarization gratings along x
  or y, q-plates) cascaded in optical order,
* random single- or two-plate processes whose optic-axis pattern is itself
  a random trigonometric series.

All randomness flows through ``numpy.random.SeedSequence`` so that corpora
are reproducible sample-by-sample and independent of generation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .forward import MeasurementStack, add_noise, measurement_stack
from .su2 import (
    ProcessMap,
    canonicalize_sign,
    compose,
    degenerate_axis_convention,
    process_from_quaternions,
    quaternion_from_su2,
    waveplate,
)

PLATE_KINDS = ("uniform", "g_plate_x", "g_plate_y", "q_plate")


@dataclass(frozen=True)
class FourierFieldSpec:
    """Band-limited real field on an N x N grid.

    The field is the double sum over i <= omega_x, j <= omega_y of

        c[0,i,j] cos(2 pi i x / N) cos(2 pi j y / N)
      + c[1,i,j] cos(2 pi i x / N) sin(2 pi j y / N)
      + c[2,i,j] sin(2 pi i x / N) cos(2 pi j y / N)
      + c[3,i,j] sin(2 pi i x / N) sin(2 pi j y / N)

    with all coefficients in [-1, 1].  Being an analytic expression it can
    be evaluated at arbitrary continuous coordinates, not only the grid.
    """

    omega_x: int
    omega_y: int
    coefficients: np.ndarray
    n_pixels: int

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "coefficients", np.asarray(self.coefficients, dtype=float)
        )
        if not (0 <= self.omega_x <= 5 and 0 <= self.omega_y <= 5):
            raise ValueError("maximal frequencies must lie in [0, 5]")
        want = (4, self.omega_x + 1, self.omega_y + 1)
        if self.coefficients.shape != want:
            raise ValueError(
                f"coefficients must have shape {want}, got {self.coefficients.shape}"
            )
        if np.any(np.abs(self.coefficients) > 1.0 + 1e-12):
            raise ValueError("all coefficients must lie in [-1, 1]")
        if self.n_pixels < 2:
            raise ValueError("n_pixels must be >= 2")


def sample_fourier_field(
    spec: FourierFieldSpec, x: np.ndarray | None = None, y: np.ndarray | None = None
) -> np.ndarray:
    """Evaluate the series of ``spec`` at coordinates ``(x, y)``.

    With no coordinates given, evaluates on the full pixel grid (x along
    columns, y along rows).  ``x`` and ``y`` may be arrays of any common
    shape; the result has that shape.
    """
    n = spec.n_pixels
    if x is None or y is None:
        if x is not None or y is not None:
            raise ValueError("provide both x and y, or neither")
        y, x = np.mgrid[0:n, 0:n].astype(float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ii = np.arange(spec.omega_x + 1)
    jj = np.arange(spec.omega_y + 1)
    ax = 2.0 * np.pi * np.multiply.outer(ii, x) / n  # (omega_x+1,) + x.shape
    ay = 2.0 * np.pi * np.multiply.outer(jj, y) / n
    cos_x, sin_x = np.cos(ax), np.sin(ax)
    cos_y, sin_y = np.cos(ay), np.sin(ay)
    c = spec.coefficients
    out = np.einsum("ij,i...,j...->...", c[0], cos_x, cos_y)
    out += np.einsum("ij,i...,j...->...", c[1], cos_x, sin_y)
    out += np.einsum("ij,i...,j...->...", c[2], sin_x, cos_y)
    out += np.einsum("ij,i...,j...->...", c[3], sin_x, sin_y)
    return out


def random_fourier_spec(
    rng: np.random.Generator, n_pixels: int, omega_max: int
) -> FourierFieldSpec:
    """Draw maximal frequencies and coefficients for one random field."""
    omega_x = int(rng.integers(0, omega_max + 1))
    omega_y = int(rng.integers(0, omega_max + 1))
    coeffs = rng.uniform(-1.0, 1.0, size=(4, omega_x + 1, omega_y + 1))
    return FourierFieldSpec(omega_x, omega_y, coeffs, n_pixels)


def rotate_frame(x, y, xi: float):
    """Rotate center-relative coordinates by the angle ``xi``."""
    c, s = math.cos(xi), math.sin(xi)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return c * x - s * y, s * x + c * y


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for the random-process generator."""

    n_pixels: int
    xi_max: float = math.radians(5.0)
    omega_max: int = 5
    rng_seed: int = 0
    #: testing hook: fixed field specs (theta, nx, ny, nz) used on the first
    #: attempt instead of drawing them; degenerate draws are still resampled
    fields_override: tuple[FourierFieldSpec, ...] | None = None

    def __post_init__(self) -> None:
        if self.n_pixels < 2:
            raise ValueError("n_pixels must be >= 2")
        if self.xi_max < 0:
            raise ValueError("xi_max must be >= 0")
        if not (0 <= self.omega_max <= 5):
            raise ValueError("omega_max must lie in [0, 5]")


def _rescale(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    vmin = float(values.min())
    vmax = float(values.max())
    if vmax - vmin < 1e-12:
        # constant field: map to the midpoint of the target range
        return np.full_like(values, 0.5 * (lo + hi))
    return lo + (values - vmin) * ((hi - lo) / (vmax - vmin))


def random_process(cfg: GeneratorConfig) -> ProcessMap:
    """Draw a band-limited random process.

    Four independent random fields parametrize (theta, n_x, n_y, n_z).  The
    fields are evaluated at frame-rotated coordinates (rotation angle drawn
    uniformly within +-xi_max about the grid center), min-max rescaled to
    [0, pi] for theta and [-1, 1] for the axis components, the axis is
    normalized per pixel, and the global sign convention is applied.

    A draw whose axis is degenerate everywhere (all three axis fields
    constant) is resampled with a derived seed.
    """
    n = cfg.n_pixels
    for attempt in range(64):
        ss = np.random.SeedSequence(cfg.rng_seed, spawn_key=(attempt,))
        rng = np.random.default_rng(ss)
        if attempt == 0 and cfg.fields_override is not None:
            if len(cfg.fields_override) != 4:
                raise ValueError("fields_override must hold exactly 4 specs")
            specs = cfg.fields_override
        else:
            specs = tuple(random_fourier_spec(rng, n, cfg.omega_max) for _ in range(4))
        xi = rng.uniform(-cfg.xi_max, cfg.xi_max)

        center = (n - 1) / 2.0
        rows, cols = np.mgrid[0:n, 0:n].astype(float)
        xr, yr = rotate_frame(cols - center, rows - center, xi)
        xs, ys = xr + center, yr + center

        raw = [sample_fourier_field(spec, xs, ys) for spec in specs]
        theta = _rescale(raw[0], 0.0, np.pi)
        axis = np.stack([_rescale(f, -1.0, 1.0) for f in raw[1:]], axis=-1)

        norms = np.linalg.norm(axis, axis=-1)
        if np.all(norms < 1e-12):
            continue  # degenerate axis everywhere: resample with derived seed
        safe = norms > 1e-12
        unit = np.where(
            safe[..., None], axis / np.where(safe, norms, 1.0)[..., None], [0.0, 0.0, 1.0]
        )
        unit = degenerate_axis_convention(theta, unit)
        return canonicalize_sign(ProcessMap(theta, unit))
    raise RuntimeError("random_process failed to draw a non-degenerate axis field")


@dataclass(frozen=True)
class PlateSpec:
    """One waveplate device: retardance plus an optic-axis pattern.

    kind:
      - ``uniform``: alpha(x, y) = alpha0
      - ``g_plate_x``: alpha = pi * x / lam + alpha0 (polarization grating)
      - ``g_plate_y``: alpha = pi * y / lam + alpha0
      - ``q_plate``: alpha = q * atan2(y, x) + alpha0, singular at the center
    """

    kind: str
    delta: float
    alpha0: float = 0.0
    lam: float | None = None
    q: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in PLATE_KINDS:
            raise ValueError(f"unknown plate kind {self.kind!r}; expected {PLATE_KINDS}")
        if not math.isfinite(self.delta):
            raise ValueError("delta must be finite")
        if self.kind in ("g_plate_x", "g_plate_y"):
            if self.lam is None or self.lam <= 0:
                raise ValueError("g-plates require a positive grating period lam")
        if self.kind == "q_plate" and self.q is None:
            raise ValueError("q-plates require a topological charge q")

    def alpha(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Optic-axis angle at center-origin physical coordinates."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "uniform":
            return np.broadcast_to(float(self.alpha0), np.broadcast_shapes(x.shape, y.shape)).copy()
        if self.kind == "g_plate_x":
            return np.pi * x / self.lam + self.alpha0
        if self.kind == "g_plate_y":
            return np.pi * y / self.lam + self.alpha0
        return self.q * np.arctan2(y, x) + self.alpha0


def plate_grid(n_pixels: int, window: float) -> tuple[np.ndarray, np.ndarray]:
    """Center-origin physical coordinates of the pixel grid.

    ``window`` is the full side length; pixels sit at symmetric positions,
    so for even N the grid center falls between the four innermost pixels.
    Returned as (x, y) with x varying along columns and y along rows.
    """
    coords = np.linspace(-window / 2.0, window / 2.0, n_pixels)
    y, x = np.meshgrid(coords, coords, indexing="ij")
    return x, y


def default_window(plates: Sequence[PlateSpec], n_pixels: int) -> float:
    """Default physical extent: [-2 lam, 2 lam] on the largest grating, else pixel units."""
    periods = [p.lam for p in plates if p.lam is not None]
    if periods:
        return 4.0 * max(periods)
    return float(n_pixels)


def plate_process(
    plates: Sequence[PlateSpec], n_pixels: int, window: float | None = None
) -> ProcessMap:
    """Compose a device stack pixel-by-pixel into a process map.

    ``plates`` is given in optical order (first plate hit by the light
    first).  The composed gate at each pixel is converted to axis-angle
    form and the global sign convention is applied.
    """
    if len(plates) == 0:
        raise ValueError("plate_process() requires at least one plate")
    if window is None:
        window = default_window(plates, n_pixels)
    x, y = plate_grid(n_pixels, window)
    gates = [waveplate(p.delta, p.alpha(x, y)) for p in plates]
    total = compose(gates)
    q = quaternion_from_su2(total)
    return canonicalize_sign(process_from_quaternions(q))


def single_plate_random(seed: int, n_pixels: int) -> ProcessMap:
    """Random one- or two-plate process.

    Each plate has retardance drawn uniformly from [0, 2 pi) and an
    optic-axis pattern given by a raw random trigonometric series with
    maximal frequencies in [0, 3] (no rescaling: the series value is the
    axis angle in radians).
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    n_plates = int(rng.integers(1, 3))
    rows, cols = np.mgrid[0:n_pixels, 0:n_pixels].astype(float)
    gates = []
    for _ in range(n_plates):
        delta = rng.uniform(0.0, 2.0 * np.pi)
        spec = random_fourier_spec(rng, n_pixels, omega_max=3)
        alpha = sample_fourier_field(spec, cols, rows)
        gates.append(waveplate(delta, alpha))
    total = compose(gates)
    q = quaternion_from_su2(total)
    return canonicalize_sign(process_from_quaternions(q))


def derived_seed(root_seed: int, *indices: int) -> int:
    """64-bit seed derived from a root seed and an index path."""
    ss = np.random.SeedSequence(root_seed, spawn_key=tuple(indices))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def corpus_sample(
    root_seed: int,
    index: int,
    n_pixels: int,
    sigma: float = 0.0,
    kind: str = "fourier",
    plate_fraction: float = 0.5,
) -> tuple[MeasurementStack, ProcessMap]:
    """Draw corpus sample ``index``: a process and its measurement stack.

    Seeds are derived from ``(root_seed, index)``, so samples are
    reproducible individually and independent of generation order.  For the
    mixed kind, the sample is a plate process with probability
    ``plate_fraction`` and a band-limited random process otherwise.
    """
    proc_seed = derived_seed(root_seed, index, 0)
    noise_seed = derived_seed(root_seed, index, 1)
    if kind == "mixed":
        coin = np.random.default_rng(
            np.random.SeedSequence(root_seed, spawn_key=(index, 2))
        ).random()
        kind = "plate" if coin < plate_fraction else "fourier"
    if kind == "fourier":
        pmap = random_process(GeneratorConfig(n_pixels=n_pixels, rng_seed=proc_seed))
    elif kind == "plate":
        pmap = single_plate_random(proc_seed, n_pixels)
    else:
        raise ValueError(f"unknown corpus kind {kind!r}")
    stack = measurement_stack(pmap)
    if sigma > 0:
        stack = add_noise(stack, sigma, noise_seed)
    return stack, pmap
