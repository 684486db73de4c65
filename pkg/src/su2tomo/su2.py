"""Exact SU(2) algebra on pixel grids.

Everything downstream (gate synthesis, polarimetric simulation,
reconstruction, scoring) is built on the conversions and metrics collected
here.  Matrices live in the circular polarization basis ``|L> = (1, 0)``,
``|R> = (0, 1)`` and are represented as plain complex ndarrays of shape
``(..., 2, 2)`` so that whole parameter grids can be handled at once.

A gate is a rotation by an angle ``2*theta`` about a unit axis ``n``:

    U = cos(theta) * s0 - 1j * sin(theta) * (n . sigma)

Equivalently ``U`` corresponds to the unit quaternion
``(cos(theta), sin(theta) * n)``; several routines below exploit the fact
that for SU(2) the Hilbert-Schmidt overlap ``Tr(A^dag B)`` equals twice the
real 4-vector dot product of the quaternions of ``A`` and ``B``.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)

#: below this rotation angle (or pi minus it) the axis is undefined and the
#: conventional axis (0, 0, 1) is stored instead
DEGENERATE_THETA = 1e-9

#: unitarity / determinant tolerance for a valid SU(2) matrix
SU2_TOL = 1e-12

_Z_AXIS = np.array([0.0, 0.0, 1.0])


class AxisAngle(NamedTuple):
    """Rotation angle ``theta`` in [0, pi] and unit axis ``n`` (3-vector)."""

    theta: float
    axis: np.ndarray


class SphericalAxis(NamedTuple):
    """Poincare-sphere angles of a rotation axis: polar in [0, pi], azimuth in [0, 2*pi)."""

    polar: float
    azimuth: float


def validate_su2(U: np.ndarray, tol: float = SU2_TOL) -> None:
    """Raise ValueError unless ``U`` is unitary with unit determinant.

    Accepts stacks of matrices; every element of the stack must pass.
    """
    U = np.asarray(U, dtype=complex)
    if U.shape[-2:] != (2, 2):
        raise ValueError(f"expected trailing shape (2, 2), got {U.shape}")
    gram = np.swapaxes(U.conj(), -1, -2) @ U
    err = np.max(np.abs(gram - SIGMA_0))
    if err >= tol:
        raise ValueError(f"matrix is not unitary: max |U^dag U - I| = {err:.3e}")
    det = U[..., 0, 0] * U[..., 1, 1] - U[..., 0, 1] * U[..., 1, 0]
    det_err = np.max(np.abs(det - 1.0))
    if det_err >= tol:
        raise ValueError(f"det(U) != 1: max error {det_err:.3e}")


def project_su2(U: np.ndarray) -> np.ndarray:
    """Project a nearly-unitary matrix onto SU(2).

    Polar decomposition through the SVD gives the closest unitary; the
    residual complex determinant phase is then split evenly between the two
    columns, picking the sign that stays closest to the input.
    """
    U = np.asarray(U, dtype=complex)
    v, _, wh = np.linalg.svd(U)
    W = v @ wh
    det = W[..., 0, 0] * W[..., 1, 1] - W[..., 0, 1] * W[..., 1, 0]
    phase = np.sqrt(det + 0j)
    W = W / phase[..., None, None]
    # sqrt branch leaves a global +-1 freedom; stay near the input
    overlap = np.real(np.einsum("...ij,...ij->...", U.conj(), W))
    W = np.where((overlap < 0)[..., None, None], -W, W)
    return W


def _normalized_axis(axis: np.ndarray) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis, axis=-1, keepdims=True)
    if np.any(np.abs(norm - 1.0) > 1e-9):
        raise ValueError("rotation axis must be a unit vector (|n| = 1 within 1e-9)")
    return axis / norm


def su2_from_axis_angle(theta, axis) -> np.ndarray:
    """Build gates ``cos(theta) s0 - 1j sin(theta) (n . sigma)``.

    Parameters
    ----------
    theta : float or ndarray, shape S
        Rotation half-angles in [0, pi].
    axis : ndarray, shape S + (3,)
        Unit rotation axes.

    Returns
    -------
    ndarray, shape S + (2, 2), complex
    """
    theta = np.asarray(theta, dtype=float)
    axis = np.asarray(axis, dtype=float)
    c = np.cos(theta)
    s = np.sin(theta)
    a1 = s * axis[..., 0]
    a2 = s * axis[..., 1]
    a3 = s * axis[..., 2]
    U = np.empty(theta.shape + (2, 2), dtype=complex)
    U[..., 0, 0] = c - 1j * a3
    U[..., 0, 1] = -a2 - 1j * a1
    U[..., 1, 0] = a2 - 1j * a1
    U[..., 1, 1] = c + 1j * a3
    return U


def quaternion_from_su2(U: np.ndarray) -> np.ndarray:
    """Real quaternion components ``(a0, a1, a2, a3)`` of ``a0 s0 - 1j (a . sigma)``."""
    U = np.asarray(U, dtype=complex)
    q = np.empty(U.shape[:-2] + (4,), dtype=float)
    q[..., 0] = 0.5 * np.real(U[..., 0, 0] + U[..., 1, 1])
    q[..., 1] = -0.5 * np.imag(U[..., 0, 1] + U[..., 1, 0])
    q[..., 2] = 0.5 * np.real(U[..., 1, 0] - U[..., 0, 1])
    q[..., 3] = 0.5 * np.imag(U[..., 1, 1] - U[..., 0, 0])
    return q


def axis_angle_from_quaternion(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Angle/axis arrays from quaternion components, degenerate axes set to (0, 0, 1)."""
    q = np.asarray(q, dtype=float)
    theta = np.arccos(np.clip(q[..., 0], -1.0, 1.0))
    s = np.sin(theta)
    vec = q[..., 1:]
    safe = s > DEGENERATE_THETA
    axis = np.broadcast_to(_Z_AXIS, vec.shape).copy()
    np.divide(vec, s[..., None], out=axis, where=safe[..., None])
    # guard against drift in |vec| when s is small but above threshold
    norm = np.linalg.norm(axis, axis=-1, keepdims=True)
    axis = np.where(safe[..., None], axis / np.where(norm == 0, 1.0, norm), axis)
    return theta, axis


def axis_angle_from_su2(U: np.ndarray) -> AxisAngle:
    """Invert :func:`su2_from_axis_angle`.

    ``theta = arccos(Re Tr(U) / 2)`` lies in [0, pi] so that sin(theta) >= 0
    and the axis is read off the anti-Hermitian part.  For theta in {0, pi}
    the axis is the conventional (0, 0, 1).
    """
    theta, axis = axis_angle_from_quaternion(quaternion_from_su2(U))
    if theta.ndim == 0:
        return AxisAngle(float(theta), axis)
    return AxisAngle(theta, axis)


def waveplate(delta, alpha) -> np.ndarray:
    """Retarder with birefringence ``delta`` and optic-axis angle ``alpha``.

        [[cos(d/2),            1j sin(d/2) e^{-2j a}],
         [1j sin(d/2) e^{2j a}, cos(d/2)           ]]

    This is a rotation by ``-delta/2`` about the equatorial axis
    ``(cos 2a, sin 2a, 0)``.  Broadcasts over array-valued arguments.
    """
    delta = np.asarray(delta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    delta, alpha = np.broadcast_arrays(delta, alpha)
    c = np.cos(delta / 2.0)
    s = np.sin(delta / 2.0)
    phase = np.exp(2j * alpha)
    U = np.empty(np.shape(delta) + (2, 2), dtype=complex)
    U[..., 0, 0] = c
    U[..., 0, 1] = 1j * s * np.conj(phase)
    U[..., 1, 0] = 1j * s * phase
    U[..., 1, 1] = c
    return U


def compose(plates: Sequence[np.ndarray]) -> np.ndarray:
    """Cascade gates in optical order (first element hits the light first).

    The result is the matrix product in reverse list order, re-projected
    onto SU(2) if accumulated round-off pushes the determinant off 1.
    """
    if len(plates) == 0:
        raise ValueError("compose() requires at least one plate")
    out = np.asarray(plates[0], dtype=complex)
    for U in plates[1:]:
        out = np.asarray(U, dtype=complex) @ out
    det = out[..., 0, 0] * out[..., 1, 1] - out[..., 0, 1] * out[..., 1, 0]
    if np.max(np.abs(det - 1.0)) > SU2_TOL:
        out = project_su2(out)
    return out


def spherical_from_axis(axis) -> SphericalAxis:
    """Polar/azimuthal angles of a unit axis; azimuth 0 for the poles."""
    axis = np.asarray(axis, dtype=float)
    polar = np.arccos(np.clip(axis[..., 2], -1.0, 1.0))
    azimuth = np.mod(np.arctan2(axis[..., 1], axis[..., 0]), 2.0 * np.pi)
    # atan2(0, 0) already yields 0, but enforce the convention explicitly
    on_pole = (np.abs(axis[..., 0]) == 0) & (np.abs(axis[..., 1]) == 0)
    azimuth = np.where(on_pole, 0.0, azimuth)
    if polar.ndim == 0:
        return SphericalAxis(float(polar), float(azimuth))
    return SphericalAxis(polar, azimuth)


def axis_from_spherical(polar, azimuth) -> np.ndarray:
    """Unit axis from Poincare-sphere angles; inverse of :func:`spherical_from_axis`."""
    polar = np.asarray(polar, dtype=float)
    azimuth = np.asarray(azimuth, dtype=float)
    sp = np.sin(polar)
    return np.stack(
        [sp * np.cos(azimuth), sp * np.sin(azimuth), np.cos(polar)], axis=-1
    )


def degenerate_axis_convention(theta: np.ndarray, axis: np.ndarray) -> np.ndarray:
    """Replace axes by (0, 0, 1) wherever sin(theta) is too small to define one."""
    sin_theta = np.sin(theta)
    degenerate = sin_theta < DEGENERATE_THETA
    return np.where(degenerate[..., None], _Z_AXIS, axis)


@dataclass
class ProcessMap:
    """Space-dependent SU(2) process: one axis-angle gate per pixel.

    ``theta`` has shape (N, N) with values in [0, pi]; ``axis`` has shape
    (N, N, 3) with unit rows (conventional (0, 0, 1) where sin(theta) ~ 0).
    Row index runs along y, column index along x; the "first pixel" used by
    the sign convention is (row 0, col 0).
    """

    theta: np.ndarray
    axis: np.ndarray
    canonicalized: bool = False

    def __post_init__(self) -> None:
        self.theta = np.asarray(self.theta, dtype=float)
        self.axis = np.asarray(self.axis, dtype=float)
        n = self.theta.shape[0]
        if self.theta.shape != (n, n):
            raise ValueError(f"theta must be square, got {self.theta.shape}")
        if self.axis.shape != (n, n, 3):
            raise ValueError(f"axis must have shape ({n}, {n}, 3), got {self.axis.shape}")
        if np.any(self.theta < -1e-12) or np.any(self.theta > np.pi + 1e-12):
            raise ValueError("theta out of range [0, pi]")
        norms = np.linalg.norm(self.axis, axis=-1)
        if np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("axis grid contains non-unit vectors")
        if self.canonicalized and self.axis[0, 0, 2] < 0:
            raise ValueError("canonicalized map must have first-pixel n_z >= 0")

    @property
    def n_pixels(self) -> int:
        return self.theta.shape[0]

    def pixel(self, row: int, col: int) -> AxisAngle:
        return AxisAngle(float(self.theta[row, col]), self.axis[row, col].copy())

    def unitaries(self) -> np.ndarray:
        """Per-pixel gates, shape (N, N, 2, 2)."""
        return su2_from_axis_angle(self.theta, self.axis)

    def quaternions(self) -> np.ndarray:
        """Per-pixel quaternions (cos(theta), sin(theta) n), shape (N, N, 4)."""
        s = np.sin(self.theta)
        return np.concatenate(
            [np.cos(self.theta)[..., None], s[..., None] * self.axis], axis=-1
        )

    def copy(self) -> "ProcessMap":
        return ProcessMap(self.theta.copy(), self.axis.copy(), self.canonicalized)


def process_from_quaternions(q: np.ndarray, canonicalized: bool = False) -> ProcessMap:
    """Build a :class:`ProcessMap` from an (N, N, 4) quaternion grid."""
    theta, axis = axis_angle_from_quaternion(q)
    return ProcessMap(theta, axis, canonicalized)


def global_negate(m: ProcessMap) -> ProcessMap:
    """Measurement-equivalent partner of ``m``: every gate U replaced by -U."""
    theta = np.pi - m.theta
    axis = degenerate_axis_convention(theta, -m.axis)
    return ProcessMap(theta, axis, canonicalized=False)


def canonicalize_sign(m: ProcessMap) -> ProcessMap:
    """Fix the global sign: flip every pixel if first-pixel n_z is negative.

    The flip ``theta -> pi - theta``, ``n -> -n`` maps each gate U to -U,
    which produces identical measurement outcomes.  Idempotent; triggers
    only on strictly negative n_z.
    """
    if m.axis[0, 0, 2] < 0:
        flipped = global_negate(m)
        return replace(flipped, canonicalized=True)
    out = m.copy()
    out.canonicalized = True
    return out


def _trace_overlaps(a: ProcessMap, b: ProcessMap) -> np.ndarray:
    if a.n_pixels != b.n_pixels:
        raise ValueError(
            f"process maps have different sizes: {a.n_pixels} vs {b.n_pixels}"
        )
    # Tr(U_a^dag U_b) = 2 * (q_a . q_b), exactly real for SU(2)
    return np.einsum("xyk,xyk->xy", a.quaternions(), b.quaternions())


def map_fidelity(a: ProcessMap, b: ProcessMap) -> float:
    """|sum over pixels of Tr(U_a^dag U_b)| / (2 N^2); sign-structure sensitive."""
    overlaps = _trace_overlaps(a, b)
    n = a.n_pixels
    return float(np.abs(np.sum(overlaps)) / n**2)


def pixel_fidelity(a: ProcessMap, b: ProcessMap) -> float:
    """Mean per-pixel |Tr(U_a^dag U_b)| / 2; blind to relative pixel signs."""
    overlaps = _trace_overlaps(a, b)
    n = a.n_pixels
    return float(np.sum(np.abs(overlaps)) / n**2)
