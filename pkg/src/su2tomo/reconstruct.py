"""Recover a process map from its five polarimetric images.

Per pixel, the five intensities determine the local gate up to the overall
sign (U and -U are indistinguishable), so reconstruction proceeds in two
stages: a per-pixel fit of (theta, polar, azimuth), followed by a spatial
pass that picks one sign per pixel by continuity.

The per-pixel fit is a coarse grid search over the three angles followed
by damped Gauss-Newton refinement of the least-squares cost against the
closed-form intensity model.  A per-pixel genetic algorithm minimizing the
same cost is provided as a deliberately local baseline: it shares the
per-pixel sign convention but performs no continuity pass, which is what
separates map fidelity from pixel fidelity in its output.
"""

from __future__ import annotations

import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .forward import MeasurementStack
from .su2 import (
    AxisAngle,
    ProcessMap,
    axis_angle_from_quaternion,
    canonicalize_sign,
    process_from_quaternions,
)

#: below this sin(theta) the rotation axis is treated as unidentifiable
AXIS_RESOLVED_MIN_SIN = 1e-4

#: quaternion components smaller than this are ties for the sign convention
_TIE_TOL = 1e-7


@dataclass(frozen=True)
class MLEConfig:
    """Settings for the grid-plus-refinement per-pixel fit."""

    n_starts: int = 3
    max_iters: int = 200
    tolerance: float = 1e-12
    grid_shape: tuple[int, int, int] = (24, 24, 48)

    def __post_init__(self) -> None:
        if self.n_starts < 1:
            raise ValueError("n_starts must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be > 0")
        if any(g < 2 for g in self.grid_shape):
            raise ValueError("grid_shape entries must be >= 2")


@dataclass(frozen=True)
class GAConfig:
    """Settings for the per-pixel genetic baseline."""

    population_size: int = 64
    generations: int = 100
    tournament_size: int = 3
    crossover_rate: float = 0.9
    mutation_std: float = 0.3
    elitism_count: int = 2
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ValueError("population_size must be >= 2")
        if not (0 <= self.elitism_count < self.population_size):
            raise ValueError("elitism_count must be < population_size")
        if not (0.0 <= self.crossover_rate <= 1.0):
            raise ValueError("crossover_rate must lie in [0, 1]")
        if self.tournament_size < 1:
            raise ValueError("tournament_size must be >= 1")


# ---------------------------------------------------------------------------
# closed-form intensity model in quaternion components
#
# With q = (a0, a1, a2, a3) = (cos th, sin th * n), the five intensities are
# quadratics in q:
#   I_LL = a0^2 + a3^2
#   I_LH = [(a0 + a2)^2 + (a1 + a3)^2] / 2
#   I_LD = [(a0 - a1)^2 + (a2 + a3)^2] / 2
#   I_HH = a0^2 + a1^2
#   I_HD = [(a0 - a1 - a2 + a3)^2 + (a0 + a1 + a2 + a3)^2] / 4
# ---------------------------------------------------------------------------


def intensities_from_quaternion(q: np.ndarray) -> np.ndarray:
    """Predicted five-image intensities for quaternions of shape (..., 4)."""
    a0, a1, a2, a3 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out = np.empty(q.shape[:-1] + (5,), dtype=float)
    out[..., 0] = a0**2 + a3**2
    out[..., 1] = 0.5 * ((a0 + a2) ** 2 + (a1 + a3) ** 2)
    out[..., 2] = 0.5 * ((a0 - a1) ** 2 + (a2 + a3) ** 2)
    out[..., 3] = a0**2 + a1**2
    u = a0 - a1 - a2 + a3
    v = a0 + a1 + a2 + a3
    out[..., 4] = 0.25 * (u**2 + v**2)
    return out


def _intensity_jacobian_wrt_quaternion(q: np.ndarray) -> np.ndarray:
    """d(intensities)/d(quaternion), shape (..., 5, 4)."""
    a0, a1, a2, a3 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    J = np.zeros(q.shape[:-1] + (5, 4), dtype=float)
    J[..., 0, 0] = 2 * a0
    J[..., 0, 3] = 2 * a3
    J[..., 1, 0] = a0 + a2
    J[..., 1, 1] = a1 + a3
    J[..., 1, 2] = a0 + a2
    J[..., 1, 3] = a1 + a3
    J[..., 2, 0] = a0 - a1
    J[..., 2, 1] = -(a0 - a1)
    J[..., 2, 2] = a2 + a3
    J[..., 2, 3] = a2 + a3
    J[..., 3, 0] = 2 * a0
    J[..., 3, 1] = 2 * a1
    u = a0 - a1 - a2 + a3
    v = a0 + a1 + a2 + a3
    J[..., 4, 0] = 0.5 * (u + v)
    J[..., 4, 1] = 0.5 * (v - u)
    J[..., 4, 2] = 0.5 * (v - u)
    J[..., 4, 3] = 0.5 * (u + v)
    return J


def _quaternion_from_angles(params: np.ndarray) -> np.ndarray:
    th, po, az = params[..., 0], params[..., 1], params[..., 2]
    st = np.sin(th)
    sp = np.sin(po)
    return np.stack(
        [np.cos(th), st * sp * np.cos(az), st * sp * np.sin(az), st * np.cos(po)],
        axis=-1,
    )


def _quaternion_jacobian_wrt_angles(params: np.ndarray) -> np.ndarray:
    """d(quaternion)/d(theta, polar, azimuth), shape (..., 4, 3)."""
    th, po, az = params[..., 0], params[..., 1], params[..., 2]
    ct, st = np.cos(th), np.sin(th)
    cp, sp = np.cos(po), np.sin(po)
    ca, sa = np.cos(az), np.sin(az)
    J = np.zeros(params.shape[:-1] + (4, 3), dtype=float)
    J[..., 0, 0] = -st
    J[..., 1, 0] = ct * sp * ca
    J[..., 2, 0] = ct * sp * sa
    J[..., 3, 0] = ct * cp
    J[..., 1, 1] = st * cp * ca
    J[..., 2, 1] = st * cp * sa
    J[..., 3, 1] = -st * sp
    J[..., 1, 2] = -st * sp * sa
    J[..., 2, 2] = st * sp * ca
    return J


def _costs(params: np.ndarray, obs: np.ndarray) -> np.ndarray:
    pred = intensities_from_quaternion(_quaternion_from_angles(params))
    return np.sum((pred - obs) ** 2, axis=-1)


def pixel_cost(candidate: AxisAngle, obs) -> float:
    """Sum of squared differences between observed and predicted intensities."""
    obs = np.asarray(obs, dtype=float)
    if obs.shape != (5,):
        raise ValueError("a pixel observation holds exactly five intensities")
    theta = np.asarray(candidate.theta, dtype=float)
    axis = np.asarray(candidate.axis, dtype=float)
    s = np.sin(theta)
    q = np.concatenate([[np.cos(theta)], s * axis])
    pred = intensities_from_quaternion(q)
    return float(np.sum((pred - obs) ** 2))


@lru_cache(maxsize=8)
def _search_grid(grid_shape: tuple[int, int, int]):
    nt, npo, naz = grid_shape
    thetas = np.linspace(0.0, np.pi, nt)
    polars = np.linspace(0.0, np.pi, npo)
    azims = np.linspace(0.0, 2.0 * np.pi, naz, endpoint=False)
    tt, pp, aa = np.meshgrid(thetas, polars, azims, indexing="ij")
    params = np.stack([tt.ravel(), pp.ravel(), aa.ravel()], axis=-1)
    intens = intensities_from_quaternion(_quaternion_from_angles(params))
    half_sq = 0.5 * np.sum(intens**2, axis=-1)
    return params, intens, half_sq


def canonical_quaternion(q: np.ndarray) -> np.ndarray:
    """Pick the sign-equivalence representative with n_z >= 0.

    When n_z vanishes, prefer n_x > 0, then n_y > 0; a fully degenerate
    vector part falls back to cos(theta) >= 0.  The tie thresholds act on
    the quaternion vector part (sin(theta) * n).
    """
    a0, a1, a2, a3 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    sign = np.where(
        np.abs(a3) > _TIE_TOL,
        np.sign(a3),
        np.where(
            np.abs(a1) > _TIE_TOL,
            np.sign(a1),
            np.where(np.abs(a2) > _TIE_TOL, np.sign(a2), np.sign(a0)),
        ),
    )
    sign = np.where(sign == 0.0, 1.0, sign)
    return q * sign[..., None]


def _refine(params: np.ndarray, obs: np.ndarray, max_iters: int, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Damped Gauss-Newton (Levenberg-Marquardt) on batched 3-parameter fits.

    ``params`` has shape (..., 3) and ``obs`` broadcasts to (..., 5).  The
    three angles are left unconstrained: the model is smooth and periodic
    in all of them, and the result is reduced to canonical ranges later.
    """
    params = params.copy()
    cost = _costs(params, obs)
    lam = np.full(cost.shape, 1e-3)
    eye = np.eye(3)
    for _ in range(max_iters):
        q = _quaternion_from_angles(params)
        pred = intensities_from_quaternion(q)
        resid = pred - obs
        J = _intensity_jacobian_wrt_quaternion(q) @ _quaternion_jacobian_wrt_angles(params)
        g = np.einsum("...pk,...p->...k", J, resid)
        H = np.einsum("...pk,...pl->...kl", J, J)
        damped = H + lam[..., None, None] * (
            np.einsum("...kk->...k", H)[..., :, None] * eye + 1e-12 * eye
        )
        try:
            step = -np.linalg.solve(damped, g[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = -np.linalg.solve(damped + 1e-9 * eye, g[..., None])[..., 0]
        trial = params + step
        trial_cost = _costs(trial, obs)
        improved = trial_cost < cost
        params = np.where(improved[..., None], trial, params)
        gain = np.where(improved, cost - trial_cost, 0.0)
        cost = np.where(improved, trial_cost, cost)
        lam = np.where(improved, lam / 3.0, lam * 4.0)
        np.clip(lam, 1e-12, 1e12, out=lam)
        if np.max(gain) < tol and np.all(lam > 1e3):
            break
    return params, cost


def _angles_from_quaternion(q: np.ndarray) -> np.ndarray:
    """(theta, polar, azimuth) parameters of quaternions of shape (..., 4)."""
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    qn = q / np.where(norm == 0, 1.0, norm)
    theta = np.arccos(np.clip(qn[..., 0], -1.0, 1.0))
    s = np.sin(theta)
    safe = s > 1e-12
    d = np.where(safe, s, 1.0)
    nz = np.clip(qn[..., 3] / d, -1.0, 1.0)
    polar = np.where(safe, np.arccos(nz), 0.0)
    azim = np.where(safe, np.arctan2(qn[..., 2], qn[..., 1]), 0.0)
    return np.stack([theta, polar, azim], axis=-1)


def _algebraic_candidates(obs: np.ndarray) -> np.ndarray:
    """Closed-form quaternion candidates for a batch of observations.

    The intensities are quadratics in q, so with P = I_LL, Q = I_HH,
    alpha = 1/2 - I_LD, beta = I_HD - 1/2, gamma = I_LH - 1/2 one has

        a0^2 + a3^2 = P,  a0^2 + a1^2 = Q,
        a0 a1 - a2 a3 = alpha,  a0 a3 + a1 a2 = beta,  a0 a2 + a1 a3 = gamma.

    Writing (a0, a3) = sqrt(P) (cos f, sin f) and eliminating (a1, a2)
    through (a1 + i a2) = (alpha + i gamma) / (a0 + i a3) reduces the
    system to R cos(2f - d) = K, giving four explicit candidates (two
    roots, each with its measurement-equivalent negation).  On noiseless
    data one of them is the exact solution; they are used as extra
    refinement starts next to the coarse grid.  Returns (M, 4, 3) angle
    parameters.
    """
    eps = 1e-9
    P = np.clip(obs[:, 0], 0.0, None)
    Q = np.clip(obs[:, 3], 0.0, None)
    alpha = 0.5 - obs[:, 2]
    beta = obs[:, 4] - 0.5
    gamma = obs[:, 1] - 0.5

    A = 0.5 * (P**2 + alpha**2 - gamma**2)
    B = alpha * gamma
    K = P * Q - gamma**2 - A
    R = np.hypot(A, B)
    delta = np.arctan2(B, A)
    acos = np.arccos(np.clip(K / np.where(R < eps, 1.0, R), -1.0, 1.0))
    # f undetermined when R ~ 0; spread arbitrary phases and let LM sort it out
    acos = np.where(R < eps, 0.5 * np.pi, acos)

    phis = np.stack(
        [
            0.5 * (delta + acos),
            0.5 * (delta + acos) + 0.5 * np.pi,
            0.5 * (delta - acos),
            0.5 * (delta - acos) + 0.5 * np.pi,
        ],
        axis=-1,
    )  # (M, 4)
    sqrtP = np.sqrt(P)[:, None]
    a0 = sqrtP * np.cos(phis)
    a3 = sqrtP * np.sin(phis)
    Psafe = np.where(P < eps, 1.0, P)[:, None]
    a1 = (alpha[:, None] * a0 + gamma[:, None] * a3) / Psafe
    a2 = (gamma[:, None] * a0 - alpha[:, None] * a3) / Psafe

    # P ~ 0: the gate is an equatorial pi rotation, q = (0, a1, a2, 0)
    sqrtQ = np.sqrt(Q)
    eq_a1 = np.where(Q < eps, 0.0, sqrtQ)
    eq_a2 = np.where(Q < eps, 1.0, beta / np.where(Q < eps, 1.0, sqrtQ))
    flat = (P < eps)[:, None]
    a0 = np.where(flat, 0.0, a0)
    a3 = np.where(flat, 0.0, a3)
    sgn = np.array([1.0, -1.0, 1.0, -1.0])
    a1 = np.where(flat, sgn * eq_a1[:, None], a1)
    a2 = np.where(flat, sgn * eq_a2[:, None], a2)

    q = np.stack([a0, a1, a2, a3], axis=-1)  # (M, 4, 4)
    norm = np.linalg.norm(q, axis=-1, keepdims=True)
    q = q / np.where(norm < eps, 1.0, norm)
    return _angles_from_quaternion(q)


def _invert_batch(obs: np.ndarray, cfg: MLEConfig) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Fit a batch of pixel observations.

    Returns (theta, axis, cost, axis_resolved) with shapes (M,), (M, 3),
    (M,), (M,).  Outputs are the canonical n_z >= 0 representatives.
    """
    grid_params, grid_intens, grid_half_sq = _search_grid(cfg.grid_shape)
    m = obs.shape[0]
    # proxy for the squared distance: |g|^2/2 - <obs, g>, minimized over grid
    proxy = grid_half_sq[None, :] - obs @ grid_intens.T
    k = min(cfg.n_starts, proxy.shape[1])
    if k == 1:
        starts = np.argmin(proxy, axis=1)[:, None]
    else:
        starts = np.argpartition(proxy, k - 1, axis=1)[:, :k]
    params0 = np.concatenate([grid_params[starts], _algebraic_candidates(obs)], axis=1)
    params, cost = _refine(params0, obs[:, None, :], cfg.max_iters, cfg.tolerance)
    best = np.argmin(cost, axis=1)
    rows = np.arange(m)
    best_params = params[rows, best]
    best_cost = cost[rows, best]
    q = canonical_quaternion(_quaternion_from_angles(best_params))
    # renormalize: the angle parametrization is exactly unit-norm up to rounding
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    theta, axis = axis_angle_from_quaternion(q)
    axis_resolved = np.sin(theta) >= AXIS_RESOLVED_MIN_SIN
    return theta, axis, best_cost, axis_resolved


def invert_pixel(obs, cfg: MLEConfig | None = None) -> AxisAngle:
    """Fit one pixel observation; returns the n_z >= 0 representative."""
    cfg = cfg or MLEConfig()
    obs = np.asarray(obs, dtype=float).reshape(-1)
    if obs.shape != (5,):
        raise ValueError("a pixel observation holds exactly five intensities")
    if not np.all(np.isfinite(obs)):
        raise ValueError("pixel observation contains non-finite values")
    theta, axis, _, _ = _invert_batch(obs[None, :], cfg)
    return AxisAngle(float(theta[0]), axis[0])


def stitch_signs(raw: ProcessMap, axis_resolved: np.ndarray | None = None) -> ProcessMap:
    """Resolve the per-pixel sign ambiguity by spatial continuity.

    Starting from the first pixel, signs are grown outward: each pixel is
    aligned against the signed overlap sum Re Tr(U_nb^dag U_px) over its
    already-assigned 4-neighbors and flipped when that sum is negative.
    The growth front is quality-guided (largest |overlap sum| first, with
    row-major tie-breaking) so ambiguous pixels are decided last, and a
    deterministic local-majority relaxation then removes isolated
    inconsistencies.  Pixels whose axis is unidentifiable (sin(theta)
    below ``AXIS_RESOLVED_MIN_SIN``) inherit the axis of the nearest
    resolved pixel.  The output is sign-canonicalized.
    """
    n = raw.n_pixels
    q = raw.quaternions()
    overlap = _neighbor_overlaps(q)
    signs = np.zeros((n, n), dtype=np.int8)
    signs[0, 0] = 1
    # quality-guided growth: heap of (-|score|, row, col, score_snapshot)
    heap: list[tuple[float, int, int]] = []

    def push_neighbors(r: int, c: int) -> None:
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < n and 0 <= cc < n and signs[rr, cc] == 0:
                score = _assigned_score(rr, cc)
                heapq.heappush(heap, (-abs(score), rr, cc))

    def _assigned_score(r: int, c: int) -> float:
        s = 0.0
        if r > 0 and signs[r - 1, c] != 0:
            s += signs[r - 1, c] * overlap[0][r - 1, c]
        if r < n - 1 and signs[r + 1, c] != 0:
            s += signs[r + 1, c] * overlap[0][r, c]
        if c > 0 and signs[r, c - 1] != 0:
            s += signs[r, c - 1] * overlap[1][r, c - 1]
        if c < n - 1 and signs[r, c + 1] != 0:
            s += signs[r, c + 1] * overlap[1][r, c]
        return s

    push_neighbors(0, 0)
    assigned = 1
    while heap:
        _, r, c = heapq.heappop(heap)
        if signs[r, c] != 0:
            continue
        score = _assigned_score(r, c)
        signs[r, c] = -1 if score < 0 else 1
        assigned += 1
        push_neighbors(r, c)
    if assigned != n * n:  # pragma: no cover - flood fill always reaches all pixels
        raise RuntimeError("sign stitching failed to visit every pixel")

    _relax_signs(signs, overlap)

    q = q * signs[..., None]
    out = process_from_quaternions(q)
    if axis_resolved is not None:
        out = _inherit_degenerate_axes(out, axis_resolved)
    return canonicalize_sign(out)


def _neighbor_overlaps(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Quaternion overlaps with the next pixel down (axis 0) and right (axis 1)."""
    down = np.einsum("xyk,xyk->xy", q[:-1, :], q[1:, :])
    right = np.einsum("xyk,xyk->xy", q[:, :-1], q[:, 1:])
    return down, right


def _relax_signs(signs: np.ndarray, overlap: tuple[np.ndarray, np.ndarray], max_sweeps: int = 64) -> None:
    """Flip pixels that disagree with their signed neighborhood until stable."""
    n = signs.shape[0]
    down, right = overlap
    for _ in range(max_sweeps):
        changed = False
        for r in range(n):
            for c in range(n):
                s = 0.0
                if r > 0:
                    s += signs[r - 1, c] * down[r - 1, c]
                if r < n - 1:
                    s += signs[r + 1, c] * down[r, c]
                if c > 0:
                    s += signs[r, c - 1] * right[r, c - 1]
                if c < n - 1:
                    s += signs[r, c + 1] * right[r, c]
                if s < 0 and signs[r, c] > 0 or s > 0 and signs[r, c] < 0:
                    signs[r, c] = -signs[r, c]
                    changed = True
        if not changed:
            break


def _inherit_degenerate_axes(m: ProcessMap, axis_resolved: np.ndarray) -> ProcessMap:
    """Copy the axis of the nearest resolved pixel onto unidentifiable ones."""
    if np.all(axis_resolved):
        return m
    if not np.any(axis_resolved):
        return m  # nothing to inherit from; keep conventional axes
    from collections import deque

    n = m.n_pixels
    axis = m.axis.copy()
    resolved = axis_resolved.copy()
    queue = deque(zip(*np.nonzero(resolved)))
    while queue:
        r, c = queue.popleft()
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < n and 0 <= cc < n and not resolved[rr, cc]:
                axis[rr, cc] = axis[r, c]
                resolved[rr, cc] = True
                queue.append((rr, cc))
    return ProcessMap(m.theta.copy(), axis, canonicalized=False)


def _validate_stack_finite(stack: MeasurementStack) -> None:
    bad = ~np.isfinite(stack.images)
    if np.any(bad):
        p, r, c = (int(v[0]) for v in np.nonzero(bad))
        raise ValueError(
            f"non-finite intensity in image {p} at pixel (row={r}, col={c})"
        )


def reconstruct_map_mle(
    stack: MeasurementStack,
    cfg: MLEConfig | None = None,
    threads: int | None = None,
) -> ProcessMap:
    """Per-pixel grid + refinement fit followed by continuity stitching.

    ``threads`` bounds the worker pool over pixel chunks; results are
    bit-identical for any thread count because every chunk writes its own
    output slice.
    """
    cfg = cfg or MLEConfig()
    _validate_stack_finite(stack)
    n = stack.n_pixels
    obs = stack.images.reshape(5, n * n).T.copy()

    theta = np.empty(n * n)
    axis = np.empty((n * n, 3))
    resolved = np.empty(n * n, dtype=bool)

    chunk = 1024
    ranges = [(lo, min(lo + chunk, n * n)) for lo in range(0, n * n, chunk)]

    def work(bounds: tuple[int, int]) -> None:
        lo, hi = bounds
        try:
            t, a, _, res = _invert_batch(obs[lo:hi], cfg)
        except Exception as exc:
            r, c = divmod(lo, n)
            raise RuntimeError(f"pixel inversion failed near (row={r}, col={c}): {exc}") from exc
        theta[lo:hi] = t
        axis[lo:hi] = a
        resolved[lo:hi] = res

    threads = max(1, threads or 1)
    if threads == 1 or len(ranges) == 1:
        for bounds in ranges:
            work(bounds)
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, ranges))

    raw = ProcessMap(theta.reshape(n, n), axis.reshape(n, n, 3))
    return stitch_signs(raw, resolved.reshape(n, n))


def reconstruct_map_ga(
    stack: MeasurementStack,
    cfg: GAConfig | None = None,
    stitch: bool = False,
) -> ProcessMap:
    """Per-pixel genetic baseline: tournament selection, blend crossover,
    annealed Gaussian mutation, elitism.

    Each pixel evolves independently; no spatial information is shared, so
    without ``stitch`` the output keeps the per-pixel n_z >= 0 convention
    and exhibits the map-vs-pixel fidelity gap wherever the true n_z
    changes sign across the image.
    """
    cfg = cfg or GAConfig()
    _validate_stack_finite(stack)
    n = stack.n_pixels
    m = n * n
    obs = stack.images.reshape(5, m).T[:, None, :]  # (M, 1, 5)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.rng_seed))
    pop_n = cfg.population_size

    pop = np.empty((m, pop_n, 3))
    pop[..., 0] = rng.uniform(0.0, np.pi, size=(m, pop_n))
    pop[..., 1] = rng.uniform(0.0, np.pi, size=(m, pop_n))
    pop[..., 2] = rng.uniform(0.0, 2.0 * np.pi, size=(m, pop_n))
    costs = _costs(pop, obs)

    n_children = pop_n - cfg.elitism_count
    for gen in range(cfg.generations):
        # annealed mutation scale: decays to 2% of the initial value
        frac = gen / max(cfg.generations - 1, 1)
        std = cfg.mutation_std * (0.02**frac)

        order = np.argsort(costs, axis=1)
        elite = np.take_along_axis(pop, order[:, : cfg.elitism_count, None], axis=1)
        elite_costs = np.take_along_axis(costs, order[:, : cfg.elitism_count], axis=1)

        def select() -> np.ndarray:
            cand = rng.integers(0, pop_n, size=(m, n_children, cfg.tournament_size))
            cand_costs = np.take_along_axis(
                np.broadcast_to(costs[:, None, :], (m, n_children, pop_n)), cand, axis=2
            )
            winner = np.argmin(cand_costs, axis=2)
            idx = np.take_along_axis(cand, winner[..., None], axis=2)[..., 0]
            return np.take_along_axis(pop, idx[..., None], axis=1)

        p1 = select()
        p2 = select()
        blend = rng.uniform(-0.25, 1.25, size=p1.shape)
        children = np.where(
            (rng.random(size=(m, n_children, 1)) < cfg.crossover_rate),
            blend * p1 + (1.0 - blend) * p2,
            p1,
        )
        children = children + rng.normal(0.0, std, size=children.shape)
        # theta is pi-periodic in the cost (U and -U coincide); keep it tidy
        children[..., 0] = np.mod(children[..., 0], np.pi)
        child_costs = _costs(children, obs)

        pop = np.concatenate([elite, children], axis=1)
        costs = np.concatenate([elite_costs, child_costs], axis=1)

    best = np.argmin(costs, axis=1)
    best_params = pop[np.arange(m), best]
    q = canonical_quaternion(_quaternion_from_angles(best_params))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    theta, axis = axis_angle_from_quaternion(q)
    raw = ProcessMap(theta.reshape(n, n), axis.reshape(n, n, 3))
    if stitch:
        return stitch_signs(raw, np.sin(raw.theta) >= AXIS_RESOLVED_MIN_SIN)
    return canonicalize_sign(raw)
