"""Biorthogonal eigen-decomposition, discriminants and eigenvalue tracking.

Right eigenvectors are the columns of ``right`` (unit norm, largest component
real and positive); left eigenvectors are the columns of ``left`` with
``left^H right = I``. Two-band matrices use the closed form
lambda = h0 +- sqrt(4 h_+ h_- + h_z^2); larger matrices go through LAPACK.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .algebra import Permutation
from .errors import Defective, DegenerateOnPath, RefinementExhausted

DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class EigenFrame:
    values: np.ndarray
    right: np.ndarray
    left: np.ndarray
    residual: float

    @property
    def n(self):
        return len(self.values)


@dataclass
class Spectrum:
    """Batched eigen-data: arrays over a leading sample shape."""

    values: np.ndarray  # (..., N)
    right: np.ndarray  # (..., N, N)
    left: np.ndarray  # (..., N, N)
    residual: np.ndarray  # (...)
    bad: np.ndarray  # (...) bool: degenerate or defective

    def frame(self, idx) -> EigenFrame:
        return EigenFrame(self.values[idx], self.right[idx], self.left[idx], float(self.residual[idx]))


def _gauge_fix(R):
    """Normalise columns and rotate each so its largest entry is real positive."""
    norms = np.linalg.norm(R, axis=-2, keepdims=True)
    norms = np.where(norms == 0, 1.0, norms)
    R = R / norms
    idx = np.argmax(np.abs(R) - 1e-12 * np.arange(R.shape[-2])[:, None], axis=-2)
    lead = np.take_along_axis(R, idx[..., None, :], axis=-2)
    phase = np.where(np.abs(lead) > 0, lead / np.where(lead == 0, 1, np.abs(lead)), 1.0)
    return R / phase


def _closed_form_2x2(H, tol):
    h0 = 0.5 * (H[..., 0, 0] + H[..., 1, 1])
    a = 0.5 * (H[..., 0, 0] - H[..., 1, 1])
    b = H[..., 0, 1]
    c = H[..., 1, 0]
    s = np.sqrt(b * c + a * a)
    lam = np.stack([h0 + s, h0 - s], axis=-1)
    # canonical order: lexicographic in (Re, Im)
    swap = (lam[..., 0].real > lam[..., 1].real) | (
        (lam[..., 0].real == lam[..., 1].real) & (lam[..., 0].imag > lam[..., 1].imag))
    lam = np.where(swap[..., None], lam[..., ::-1], lam)
    sj = lam - h0[..., None]

    v1 = np.stack([np.broadcast_to(b[..., None], sj.shape), sj - a[..., None]], axis=-2)
    v2 = np.stack([sj + a[..., None], np.broadcast_to(c[..., None], sj.shape)], axis=-2)
    use2 = np.linalg.norm(v2, axis=-2) > np.linalg.norm(v1, axis=-2)
    R = np.where(use2[..., None, :], v2, v1)
    R = _gauge_fix(R)

    det = R[..., 0, 0] * R[..., 1, 1] - R[..., 0, 1] * R[..., 1, 0]
    safe = np.where(np.abs(det) == 0, 1.0, det)
    inv = np.empty_like(R)
    inv[..., 0, 0] = R[..., 1, 1]
    inv[..., 0, 1] = -R[..., 0, 1]
    inv[..., 1, 0] = -R[..., 1, 0]
    inv[..., 1, 1] = R[..., 0, 0]
    inv = inv / safe[..., None, None]
    L = np.conj(np.swapaxes(inv, -1, -2))

    ov = np.abs(np.sum(np.conj(R[..., :, 0]) * R[..., :, 1], axis=-1))
    ov = np.minimum(ov, 1.0)
    with np.errstate(divide="ignore"):
        cond = np.sqrt((1.0 + ov) / np.maximum(1.0 - ov, 0.0))
    return lam, R, L, cond


def _general(H, tol):
    lam, R = np.linalg.eig(H)
    order = np.lexsort((lam.imag, lam.real), axis=-1)
    lam = np.take_along_axis(lam, order, axis=-1)
    R = np.take_along_axis(R, order[..., None, :], axis=-1)
    R = _gauge_fix(R)
    cond = np.linalg.cond(R)
    cond = np.where(np.isfinite(cond), cond, np.inf)
    ok = cond < 1.0 / tol
    Rs = np.where(ok[..., None, None], R, np.eye(H.shape[-1]))
    L = np.conj(np.swapaxes(np.linalg.inv(Rs), -1, -2))
    return lam, R, L, cond


def spectrum(H, tol=DEFAULT_TOL) -> Spectrum:
    """Batched decomposition of matrices ``H`` of shape (..., N, N).

    Samples at a degeneracy are flagged in ``bad`` rather than raising:
    pairwise eigenvalue gap at most ``tol * max(1, max|H_ij|)`` or
    eigenvector condition number above ``1/tol``.
    """
    H = np.asarray(H, dtype=complex)
    n = H.shape[-1]
    if n == 2:
        lam, R, L, cond = _closed_form_2x2(H, tol)
    else:
        lam, R, L, cond = _general(H, tol)
    scale = np.maximum(np.max(np.abs(H), axis=(-1, -2)), 1.0)
    if n > 1:
        gaps = np.abs(lam[..., :, None] - lam[..., None, :]) + np.where(np.eye(n, dtype=bool), np.inf, 0.0)
        gap = gaps.min(axis=(-1, -2))
    else:
        gap = np.full(lam.shape[:-1], np.inf)
    bad = (gap <= tol * scale) | ~(cond < 1.0 / tol) | ~np.all(np.isfinite(L), axis=(-1, -2))
    HR = H @ R - R * lam[..., None, :]
    LH = np.conj(np.swapaxes(L, -1, -2)) @ H - lam[..., :, None] * np.conj(np.swapaxes(L, -1, -2))
    with np.errstate(invalid="ignore"):
        residual = np.maximum(np.max(np.abs(HR), axis=(-1, -2)), np.max(np.abs(LH), axis=(-1, -2)))
    return Spectrum(lam, R, L, residual, bad)


def decompose(H, tol=DEFAULT_TOL) -> EigenFrame:
    """Eigenvalues (canonical (Re, Im) order) with a biorthonormal frame.

    Raises :class:`Defective` when ``H`` is within ``tol`` of a degeneracy.
    """
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("decompose expects a single square matrix")
    if not np.all(np.isfinite(H)):
        raise ValueError("matrix has non-finite entries")
    sp = spectrum(H, tol)
    if sp.bad:
        raise Defective("matrix is at (or numerically indistinguishable from) a degeneracy")
    return sp.frame(())


def discriminant(H):
    """prod_{i<j} (lambda_i - lambda_j)^2; for 2x2 this is tr^2 - 4 det."""
    H = np.asarray(H, dtype=complex)
    n = H.shape[-1]
    if n == 1:
        return np.ones(H.shape[:-2], dtype=complex)[()]
    if n == 2:
        tr = H[..., 0, 0] + H[..., 1, 1]
        det = H[..., 0, 0] * H[..., 1, 1] - H[..., 0, 1] * H[..., 1, 0]
        return (tr * tr - 4.0 * det)[()]
    lam = np.linalg.eigvals(H)
    out = np.ones(H.shape[:-2], dtype=complex)
    for i in range(n):
        for j in range(i + 1, n):
            d = lam[..., i] - lam[..., j]
            out = out * d * d
    return out[()]


# ---------------------------------------------------------------------------
# tracking


@dataclass
class BandPath:
    """Eigen-data along a path with strands followed by continuity.

    ``values[t, j]`` is strand j at sample t; ``order[t, j]`` the canonical
    index of strand j at sample t. ``steps[t]`` maps canonical indices at t
    to canonical indices at t+1.
    """

    params: np.ndarray
    momenta: np.ndarray
    values: np.ndarray
    right: np.ndarray
    left: np.ndarray
    order: np.ndarray
    steps: np.ndarray
    refined: np.ndarray
    residual: np.ndarray = field(repr=False, default=None)

    @property
    def samples(self):
        return [(float(p), EigenFrame(v, r, l, float(res)))
                for p, v, r, l, res in zip(self.params, self.values, self.right, self.left, self.residual)]

    @property
    def composite(self) -> Permutation:
        """Final-to-initial assignment: slot i at the last sample holds the
        strand that started in canonical slot ``composite(i)``."""
        final = self.order[-1]
        inv = np.empty_like(final)
        inv[final] = np.arange(len(final))
        return Permutation.from_zero_based(self.order[0][inv])


_PERM_CACHE = {}


def _all_perms(n):
    if n not in _PERM_CACHE:
        _PERM_CACHE[n] = np.array(list(itertools.permutations(range(n))), dtype=int)
    return _PERM_CACHE[n]


def match_steps(a, b):
    """Minimum-total-distance matching from rows of ``a`` to rows of ``b``.

    a, b: (S, N) eigenvalue sets. Returns (S, N) integer array p with
    a[s, j] matched to b[s, p[s, j]].
    """
    S, n = a.shape
    if n <= 5:
        perms = _all_perms(n)
        cost = np.abs(a[:, None, :] - b[:, perms]).sum(axis=-1)
        return perms[np.argmin(cost, axis=1)]
    out = np.empty((S, n), dtype=int)
    for s in range(S):
        rows, cols = linear_sum_assignment(np.abs(a[s][:, None] - b[s][None, :]))
        out[s, rows] = cols
    return out


def _continuity_ok(a, b, p, gap_ratio):
    """Per step: every strand moves less than gap_ratio times its distance
    to the nearest other eigenvalue at the earlier sample."""
    n = a.shape[-1]
    moved = np.abs(np.take_along_axis(b, p, axis=-1) - a)
    if n == 1:
        return np.ones(len(a), dtype=bool)
    sep = np.abs(a[:, :, None] - a[:, None, :]) + np.where(np.eye(n, dtype=bool), np.inf, 0.0)
    sep = sep.min(axis=-1)
    return np.all(moved < gap_ratio * sep, axis=-1)


def _linear_curve(points, params):
    def curve(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.stack([np.interp(t, params, points[:, i]) for i in range(points.shape[1])], axis=-1)
    return curve


def track(model, path, gap_ratio=0.5, *, curve=None, params=None, tol=DEFAULT_TOL,
          max_depth=20, reference=None, closed=False) -> BandPath:
    """Follow eigenvalues continuously along ``path``.

    ``path`` is an array of momenta (M, dim), M >= 2. Steps whose matching is
    ambiguous are bisected (at ``curve((t0 + t1)/2)`` when a curve is given,
    otherwise at the midpoint momentum) up to ``max_depth`` levels.
    ``reference`` optionally fixes the strand labels at the first sample by
    matching to a given eigenvalue set. With ``closed`` the last momentum is
    taken to be the first one again (k_M = k_0), and its eigen-data is copied
    from the first sample so the loop closes exactly.
    """
    pts = np.asarray(path, dtype=float)
    if pts.ndim != 2 or len(pts) < 2:
        raise ValueError("track needs a path of at least two momenta")
    params = np.linspace(0.0, 1.0, len(pts)) if params is None else np.asarray(params, dtype=float)
    curve = curve or _linear_curve(pts, params)

    sp = spectrum(model(pts), tol)
    if closed:
        for name in ("values", "right", "left", "residual", "bad"):
            getattr(sp, name)[-1] = getattr(sp, name)[0]
    if sp.bad.any():
        i = int(np.flatnonzero(sp.bad)[0])
        raise DegenerateOnPath(f"bands degenerate at sample {i}, k = {pts[i].tolist()}", i, pts[i])

    p = match_steps(sp.values[:-1], sp.values[1:])
    ok = _continuity_ok(sp.values[:-1], sp.values[1:], p, gap_ratio)
    if not ok.all():
        pts, params, sp, refined = _insert_refinements(
            model, curve, pts, params, sp, ok, gap_ratio, tol, max_depth)
        p = match_steps(sp.values[:-1], sp.values[1:])
    else:
        refined = np.zeros(len(pts) - 1, dtype=bool)

    n = sp.values.shape[-1]
    order = np.empty((len(pts), n), dtype=int)
    if reference is None:
        order[0] = np.arange(n)
    else:
        order[0] = match_steps(np.asarray(reference)[None, :], sp.values[:1])[0]
    for t in range(len(pts) - 1):
        order[t + 1] = p[t][order[t]]

    take = order
    values = np.take_along_axis(sp.values, take, axis=-1)
    right = np.take_along_axis(sp.right, take[:, None, :], axis=-1)
    left = np.take_along_axis(sp.left, take[:, None, :], axis=-1)
    return BandPath(params, pts, values, right, left, order, p, refined, sp.residual)


def _insert_refinements(model, curve, pts, params, sp, ok, gap_ratio, tol, max_depth):
    refined = []
    extra = []  # (t, k, spectrum-at-k) for bisection samples

    def evaluate(t):
        k = curve(np.array([t]))[0]
        s = spectrum(model(k[None, :]), tol)
        if s.bad[0]:
            raise DegenerateOnPath(f"bands degenerate at refined point k = {k.tolist()}", None, k)
        return k, s

    def step_ok(v0, v1):
        pp = match_steps(v0[None], v1[None])
        return _continuity_ok(v0[None], v1[None], pp, gap_ratio)[0]

    def bisect(t0, v0, t1, v1, depth):
        if step_ok(v0, v1):
            return []
        if depth >= max_depth:
            raise RefinementExhausted(
                f"eigenvalue matching still ambiguous after {max_depth} bisections near t = {t0:.6g}")
        tm = 0.5 * (t0 + t1)
        k, s = evaluate(tm)
        vm = s.values[0]
        left = bisect(t0, v0, tm, vm, depth + 1)
        right = bisect(tm, vm, t1, v1, depth + 1)
        return left + [(tm, k, s)] + right

    rows = [("orig", 0)]
    for t in range(len(pts) - 1):
        if ok[t]:
            refined.append(False)
        else:
            inserted = bisect(params[t], sp.values[t], params[t + 1], sp.values[t + 1], 0)
            for item in inserted:
                extra.append(item)
                rows.append(("extra", len(extra) - 1))
                refined.append(True)
            refined.append(True)
        rows.append(("orig", t + 1))

    def gather(name):
        arr = getattr(sp, name)
        out = []
        for kind, i in rows:
            out.append(arr[i] if kind == "orig" else getattr(extra[i][2], name)[0])
        return np.array(out)

    new_pts = np.array([pts[i] if kind == "orig" else extra[i][1] for kind, i in rows])
    new_par = np.array([params[i] if kind == "orig" else extra[i][0] for kind, i in rows])
    merged = Spectrum(gather("values"), gather("right"), gather("left"), gather("residual"), gather("bad"))
    return new_pts, new_par, merged, np.array(refined, dtype=bool)
