"""Band degeneracies in 3D momentum space.

Nodes are zeros of the discriminant. A coarse grid scan seeds a
Gauss-Newton refinement of the two real residuals (Re Disc, Im Disc).
Refined nodes are told apart by probing: a small circle around an
exceptional line exchanges the eigenvalues, while a Weyl point leaves every
circle unbraided and carries a Berry monopole charge on a sphere around it.

Sphere orientation: theta is measured from the +k_z pole, phi increases
counterclockwise about +k_z, and band labels are the canonical (Re, Im)
order at the north pole. With that, the Hermitian Weyl Hamiltonian
k . sigma has charges (+1, -1) for (lower, upper) band.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .braids import braid_along_loop
from .errors import (DegenerateOnPath, NoConvergence, NumericalError, ProbeDegenerate,
                     ProjectionDegenerate, RoundingResidue, SeamInconsistent)
from .models import TWO_PI, Loop, circle_loop
from .spectra import DEFAULT_TOL, discriminant, track
from .wilson import _map, wilson_loop, wrap_phase

log = logging.getLogger(__name__)

SEED_THRESHOLD = 1e-2
DEDUPE_DIST = 1e-4
RESIDUE_TOL = 0.05


@dataclass(frozen=True)
class Region:
    """Axis-aligned box ``lo <= k <= hi``, optionally cut down to a ball of
    ``ball_radius`` around the origin and with a tube of ``tube_radius``
    around the k_z axis removed. ``lo == hi`` pins that coordinate."""

    lo: tuple
    hi: tuple
    ball_radius: Optional[float] = None
    tube_radius: Optional[float] = None

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise ValueError("region bounds of different dimension")
        if any(h < l for l, h in zip(self.lo, self.hi)):
            raise ValueError("region upper bound below lower bound")

    @classmethod
    def brillouin_zone(cls, dim=3):
        return cls((-np.pi,) * dim, (np.pi,) * dim)

    @property
    def dim(self):
        return len(self.lo)

    def free_axes(self):
        return [i for i in range(self.dim) if self.hi[i] > self.lo[i]]

    def contains(self, k, periodic=None, slack=1e-9):
        k = np.asarray(k, dtype=float)
        ok = np.ones(k.shape[:-1], dtype=bool)
        periodic = periodic or (False,) * self.dim
        for i in range(self.dim):
            lo, hi = self.lo[i], self.hi[i]
            x = k[..., i]
            if periodic[i] and hi - lo >= TWO_PI - slack:
                continue
            if periodic[i]:
                x = lo + np.mod(x - lo + slack, TWO_PI) - slack
            ok &= (x >= lo - slack) & (x <= hi + slack)
        if self.ball_radius is not None:
            ok &= np.linalg.norm(k, axis=-1) <= self.ball_radius + slack
        if self.tube_radius is not None:
            ok &= np.hypot(k[..., 0], k[..., 1]) > self.tube_radius
        return ok


@dataclass(frozen=True)
class NodeReport:
    position: np.ndarray
    residual: float
    kind: Optional[str] = None
    chirality: Optional[int] = None
    probe_radius: Optional[float] = None
    flagged: bool = False
    charges: Optional[tuple] = field(default=None, repr=False)

    def to_json(self):
        out = {
            "position": [float(x) for x in self.position],
            "kind": self.kind,
            "chirality": self.chirality,
            "residual": float(self.residual),
        }
        if self.probe_radius is not None:
            out["probe_radius"] = float(self.probe_radius)
        return out


def canonical_position(k, periodic):
    """Periodic components folded into (-pi, pi]."""
    k = np.array(k, dtype=float)
    for i, p in enumerate(periodic):
        if p:
            x = np.pi - np.mod(np.pi - k[..., i], TWO_PI)
            k[..., i] = np.where(x < -np.pi + 1e-9, x + TWO_PI, x)
    return k


def _periodic_distance(a, b, periodic):
    d = np.abs(np.asarray(a) - np.asarray(b))
    for i, p in enumerate(periodic):
        if p:
            d[..., i] = np.minimum(d[..., i] % TWO_PI, TWO_PI - d[..., i] % TWO_PI)
    return np.linalg.norm(d, axis=-1)


def _abs_disc(model, k):
    return np.abs(discriminant(model(k)))


def _coarse_axes(region, periodic, coarse):
    axes, wraps = [], []
    for i in range(region.dim):
        lo, hi = region.lo[i], region.hi[i]
        if hi == lo:
            axes.append(np.array([lo]))
            wraps.append(False)
        elif periodic[i] and abs((hi - lo) - TWO_PI) < 1e-9:
            axes.append(lo + (hi - lo) * np.arange(coarse) / coarse)
            wraps.append(True)
        else:
            axes.append(np.linspace(lo, hi, coarse))
            wraps.append(False)
    return axes, wraps


def _strict_minima(vals, wraps):
    """Mask of grid points strictly below all of their neighbours."""
    shape = vals.shape
    active = [i for i, n in enumerate(shape) if n > 1]
    mask = np.ones(shape, dtype=bool)
    for off in np.ndindex(*(3,) * len(active)):
        off = [o - 1 for o in off]
        if not any(off):
            continue
        nb = vals
        for ax, o in zip(active, off):
            if o == 0:
                continue
            if wraps[ax]:
                nb = np.roll(nb, -o, axis=ax)
            else:
                pad = np.full_like(np.take(nb, [0], axis=ax), np.inf)
                if o > 0:
                    nb = np.concatenate([np.delete(nb, 0, axis=ax), pad], axis=ax)
                else:
                    nb = np.concatenate([pad, np.delete(nb, -1, axis=ax)], axis=ax)
        mask &= vals < nb
    return mask


def refine_node(model, seed, free, *, tol=1e-10, fd_step=1e-6, max_iter=200, step_tol=1e-14,
                max_step=0.25):
    """Gauss-Newton on (Re Disc, Im Disc) over the coordinates in ``free``.

    The Jacobian uses central differences with step ``fd_step``; each update
    is the minimum-norm least-squares step, with singular directions below
    1e-3 of the largest dropped and the step length capped at ``max_step``.
    Returns (k, |Disc(k)|).
    """
    x = np.array(seed, dtype=float)
    free = list(free)
    nf = len(free)
    offsets = np.zeros((1 + 2 * nf, len(x)))
    for a, i in enumerate(free):
        offsets[1 + 2 * a, i] = fd_step
        offsets[2 + 2 * a, i] = -fd_step
    for _ in range(max_iter):
        d = discriminant(model(x + offsets))
        r = np.array([d[0].real, d[0].imag])
        jac = (d[1::2] - d[2::2]) / (2 * fd_step)
        J = np.stack([jac.real, jac.imag])
        if not np.all(np.isfinite(J)) or not np.all(np.isfinite(r)):
            break
        dx = np.linalg.lstsq(J, -r, rcond=1e-3)[0]
        norm = np.linalg.norm(dx)
        if norm > max_step:
            dx *= max_step / norm
        x[free] += dx
        if np.linalg.norm(dx) < step_tol:
            break
    return x, float(_abs_disc(model, x))


def find_nodes(model, region: Region = None, coarse=32, tol=1e-10, *,
               seed_threshold=SEED_THRESHOLD, fd_step=1e-6, max_iter=200,
               failures=None, threads=1) -> list:
    """Discriminant zeros inside ``region``, deduplicated and sorted.

    Seeds are strict local minima of |Disc| on the coarse grid with value
    below ``seed_threshold``. Seeds that do not reach ``|Disc| < tol`` are
    logged and, when ``failures`` is a list, appended to it as
    :class:`NoConvergence` instances.
    """
    if coarse < 8:
        raise ValueError("coarse must be at least 8")
    region = region or Region.brillouin_zone(model.dim)
    if region.dim != model.dim:
        raise ValueError(f"region has dimension {region.dim}, model {model.dim}")
    periodic = tuple(model.periodic)
    axes, wraps = _coarse_axes(region, periodic, coarse)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    vals = _abs_disc(model, grid)
    seeds_mask = _strict_minima(vals, wraps) & (vals < seed_threshold) & region.contains(grid, periodic)
    seeds = grid[seeds_mask]
    free = region.free_axes()

    def run(seed):
        return refine_node(model, seed, free, tol=tol, fd_step=fd_step, max_iter=max_iter)

    found = []
    for seed, (k, res) in zip(seeds, _map(run, list(seeds), threads)):
        if not (res < tol) or not np.all(np.isfinite(k)):
            err = NoConvergence(f"seed {seed.tolist()} stalled at |Disc| = {res:.3g}")
            log.warning("%s", err)
            if failures is not None:
                failures.append(err)
            continue
        k = canonical_position(k, periodic)
        if not region.contains(k, periodic):
            continue
        found.append((k, res))

    nodes = []
    for k, res in sorted(found, key=lambda kr: kr[1]):
        if all(_periodic_distance(k, n.position, periodic) >= DEDUPE_DIST for n in nodes):
            nodes.append(NodeReport(position=k, residual=res))
    nodes.sort(key=lambda n: tuple(np.round(n.position, 9)))
    return nodes


# ---------------------------------------------------------------------------
# Chern numbers on spheres


@dataclass(frozen=True)
class SphereFlux:
    """Per-band Berry flux through a sphere, in units of 2 pi."""

    raw: np.ndarray  # (N,) unrounded
    phases: np.ndarray  # (n_theta - 2, N) latitude Berry phases
    thetas: np.ndarray

    @property
    def charges(self):
        return tuple(int(round(x)) for x in self.raw)

    @property
    def residue(self):
        return float(np.max(np.abs(self.raw - np.round(self.raw))))


def _sphere_point(center, radius, theta, phi):
    c = np.asarray(center, dtype=float)
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    d = np.stack([np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1)
    return c + radius * d


def latitude_loop(center, radius, theta):
    c = np.asarray(center, dtype=float)
    return Loop(lambda t: _sphere_point(c, radius, theta, TWO_PI * np.asarray(t, float)), 3)


def sphere_flux(model, center, radius, n_theta=201, n_phi=201, *, gap_ratio=0.5,
                tol=DEFAULT_TOL, threads=1) -> SphereFlux:
    """Berry phase of every latitude loop, unwrapped from the north pole."""
    if n_theta < 3 or n_phi < 8:
        raise ValueError("sphere needs n_theta >= 3 and n_phi >= 8")
    th = np.linspace(0.0, np.pi, n_theta)

    def meridian(phi):
        pts = _sphere_point(center, radius, th, phi)
        curve = lambda t: _sphere_point(center, radius, np.atleast_1d(t), phi)  # noqa: E731
        return track(model, pts, gap_ratio, curve=curve, params=th, tol=tol)

    m0, m1 = meridian(0.0), meridian(np.pi)
    if not np.array_equal(m0.order[-1], m1.order[-1]):
        raise SeamInconsistent(
            "band labels carried from the north pole along two meridians disagree at the south pole")

    def one(i):
        return wilson_loop(model, latitude_loop(center, radius, th[i]), n_phi,
                           gap_ratio=gap_ratio, tol=tol, reference=m0.values[i]).phases

    gam = np.array(_map(one, range(1, n_theta - 1), threads))
    seq = np.vstack([np.zeros((1, gam.shape[1])), gam])
    steps = wrap_phase(np.diff(seq, axis=0))
    if np.any(np.abs(steps) >= np.pi / 2):
        raise RoundingResidue("Berry phase jumps by more than pi/2 between latitudes; raise n_theta")
    raw = steps.sum(axis=0) / TWO_PI
    return SphereFlux(raw, gam, th[1:-1])


def chern_sphere(model, center, radius, n_theta=201, n_phi=201, *, residue_tol=RESIDUE_TOL, **kw):
    """Integer Chern number per band (canonical order at the north pole)."""
    flux = sphere_flux(model, center, radius, n_theta, n_phi, **kw)
    if flux.residue >= residue_tol:
        raise RoundingResidue(
            f"Berry flux {flux.raw.tolist()} is {flux.residue:.3g} from an integer; raise n_theta/n_phi")
    return flux.charges


PROBE_NORMALS = ("z", "x", "y")


def classify_node(model, position, probe_radius=0.3, *, resolution=401, n_theta=201, n_phi=201,
                  tol=DEFAULT_TOL, threads=1) -> NodeReport:
    """Weyl point or exceptional crossing, decided by three probe circles.

    A circle whose eigenvalues come back permuted is pierced by a line of
    exceptional points. If no circle braids, the node is a Weyl point and its
    chirality is the Chern number of band 0 on the probe sphere.
    """
    position = np.asarray(position, dtype=float)
    residual = float(_abs_disc(model, position))
    degenerate = []
    for normal in PROBE_NORMALS:
        try:
            inv = braid_along_loop(model, circle_loop(position, probe_radius, normal), resolution, tol=tol)
        except (DegenerateOnPath, ProjectionDegenerate) as exc:
            degenerate.append((normal, exc))
            continue
        if not inv.permutation.is_identity():
            return NodeReport(position, residual, "ExceptionalCrossing", None, probe_radius)
    if degenerate:
        normal, exc = degenerate[0]
        raise ProbeDegenerate(f"probe circle normal to k_{normal} is not gapped ({exc}); shrink the radius")
    try:
        charges = chern_sphere(model, position, probe_radius, n_theta, n_phi, tol=tol, threads=threads)
    except (DegenerateOnPath, SeamInconsistent) as exc:
        raise ProbeDegenerate(f"probe sphere is not gapped ({exc}); shrink the radius") from exc
    chi = charges[0]
    return NodeReport(position, residual, "WeylPoint", chi, probe_radius, abs(chi) > 1, charges)


def classify_all(model, nodes, probe_radius=0.3, **kw):
    out = []
    for n in nodes:
        try:
            c = classify_node(model, n.position, probe_radius, **kw)
        except NumericalError as exc:
            log.warning("node at %s not classified: %s", n.position.tolist(), exc)
            c = n
        out.append(replace(c, residual=n.residual))
    return out
