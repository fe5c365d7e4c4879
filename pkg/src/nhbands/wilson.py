"""Biorthogonal Wilson loops and their eigenphase flow.

For a closed loop sampled at k_0, ..., k_M = k_0 the phase of band a is

    phi_a = arg prod_j <L_a(k_{j+1}) | R_a(k_j)>

with bands labelled by continuity along the loop. Rescaling R_a(k) by c(k)
rescales L_a(k) by 1/conj(c(k)), so every factor picks up c(k_j)/c(k_{j+1})
and the closed product is gauge invariant.

The flow over a cylinder slices it into theta-circles at fixed k_z. Strand
labels are carried from slice to slice by tracking the eigenvalues at the
loop basepoint along k_z, which is what lets the two phase strands cross.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import numpy as np

from .algebra import Permutation
from .errors import NonTransversal, NumericalError, WindingAlongLoop
from .models import TWO_PI, Loop, circle_loop
from .spectra import DEFAULT_TOL, track

TANGENCY_TOL = 1e-9


def wrap_phase(x):
    """Map angles into (-pi, pi]."""
    y = np.angle(np.exp(1j * np.asarray(x, dtype=float)))
    return np.where(y <= -np.pi, np.pi, y)


@dataclass(frozen=True)
class LoopPhases:
    phases: np.ndarray  # (N,) in (-pi, pi]
    moduli: np.ndarray  # (N,)
    values: np.ndarray  # (N,) eigenvalues at the basepoint, in band order

    def pairs(self):
        return [(float(p), float(m)) for p, m in zip(self.phases, self.moduli)]


def band_products(right, left):
    """prod_j <L_a(k_{j+1}) | R_a(k_j)> per band a for frames along a closed
    path whose last sample repeats the first; shape (..., M+1, N, N) in, (..., N) out."""
    ov = np.sum(np.conj(left[..., 1:, :, :]) * right[..., :-1, :, :], axis=-2)
    # product in log space keeps the moduli well scaled for long loops
    return np.exp(np.sum(np.log(ov), axis=-2))


def wilson_loop(model, loop: Loop, resolution=401, *, gap_ratio=0.5, tol=DEFAULT_TOL,
                reference=None) -> LoopPhases:
    """Per-band Berry phases and moduli of the biorthogonal Wilson loop.

    ``reference`` fixes band labels at the basepoint by matching to a given
    eigenvalue set; otherwise the canonical (Re, Im) order is used.
    """
    t, pts = loop.sample(resolution)
    bp = track(model, pts, gap_ratio, curve=loop, params=t, tol=tol, reference=reference,
               closed=True)
    perm = bp.composite
    if not perm.is_identity():
        raise WindingAlongLoop(
            f"eigenvalues are permuted by {perm} along the loop; this direction cannot host a Wilson loop")
    w = band_products(bp.right, bp.left)
    return LoopPhases(wrap_phase(np.angle(w)), np.abs(w), bp.values[0])


# ---------------------------------------------------------------------------
# flows


@dataclass(frozen=True)
class CylinderSpec:
    """theta-circles (k_x, k_y) = center + radius (cos theta, sin theta) at
    fixed k_z, with k_z running over [kz0, kz0 + 2 pi)."""

    center: tuple = (0.0, 0.0)
    radius: float = 1.0
    loop_samples: int = 401
    flow_samples: int = 401
    theta0: float = 0.0
    kz0: float = -np.pi

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("cylinder radius must be positive")
        if self.loop_samples < 32 or self.flow_samples < 32:
            raise ValueError("loop_samples and flow_samples must be at least 32")

    def slice_params(self):
        return self.kz0 + TWO_PI * np.arange(self.flow_samples) / self.flow_samples

    def loop(self, kz):
        cx, cy = self.center
        return circle_loop((cx, cy, kz), self.radius, "z", self.theta0)

    def basepoint(self, kz):
        cx, cy = self.center
        kz = np.asarray(kz, dtype=float)
        return np.stack(np.broadcast_arrays(cx + self.radius * np.cos(self.theta0),
                                            cy + self.radius * np.sin(self.theta0), kz), axis=-1)


@dataclass(frozen=True)
class TorusSpec:
    """Torus slicing for periodic models: loops run along the integer
    direction ``loop_vector`` (one full period), slices are displaced along
    ``flow_vector``. A diagonal slicing is e.g. loop_vector=(1, 1, 0)."""

    loop_vector: tuple = (1, 0, 0)
    flow_vector: tuple = (0, 0, 1)
    origin: tuple = (0.0, 0.0, 0.0)
    loop_samples: int = 401
    flow_samples: int = 401

    def __post_init__(self):
        if self.loop_samples < 32 or self.flow_samples < 32:
            raise ValueError("loop_samples and flow_samples must be at least 32")
        u, v = np.asarray(self.loop_vector, float), np.asarray(self.flow_vector, float)
        if np.linalg.norm(np.cross(u, v)) == 0:
            raise ValueError("loop and flow directions must be independent")

    def slice_params(self):
        return TWO_PI * np.arange(self.flow_samples) / self.flow_samples

    def loop(self, s):
        base = np.asarray(self.origin, float) + s * np.asarray(self.flow_vector, float)
        u = np.asarray(self.loop_vector, float)
        return Loop(lambda t: base + TWO_PI * np.asarray(t, float)[..., None] * u, 3)

    def basepoint(self, s):
        s = np.asarray(s, dtype=float)
        return np.asarray(self.origin, float) + s[..., None] * np.asarray(self.flow_vector, float)


@dataclass(frozen=True)
class WilsonFlow:
    slice_params: np.ndarray  # (F,)
    phases: np.ndarray  # (F, N) in (-pi, pi], strand-labelled
    moduli: np.ndarray  # (F, N)
    unwrapped: np.ndarray  # (F + 1, N); the last row closes the period
    permutation: Permutation  # strand relabelling over one flow period
    phase_sum_residual: float

    @property
    def modulus_drift(self):
        return float(np.max(np.abs(self.moduli - 1.0)))

    def to_csv(self, stream=None):
        out = stream or io.StringIO()
        n = self.phases.shape[1]
        w = csv.writer(out, lineterminator="\n")
        w.writerow(["kz"] + [f"phi{i + 1}" for i in range(n)] + [f"mod{i + 1}" for i in range(n)])
        for s, ph, mo in zip(self.slice_params, self.phases, self.moduli):
            w.writerow([f"{v:.12g}" for v in (s, *ph, *mo)])
        return out.getvalue() if stream is None else None


@dataclass(frozen=True)
class CrossingReport:
    n_zero: int
    n_pi: int
    nu: int
    modulus_drift: float
    phase_sum_residual: float = 0.0

    def to_json(self):
        return {"n_zero": self.n_zero, "n_pi": self.n_pi, "nu": self.nu,
                "modulus_drift": self.modulus_drift, "phase_sum_residual": self.phase_sum_residual}


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            return list(ex.map(fn, items))
    return [fn(x) for x in items]


def wilson_flow(model, spec, *, gap_ratio=0.5, tol=DEFAULT_TOL, threads=1) -> WilsonFlow:
    """Wilson-loop phases for every slice of ``spec`` (CylinderSpec or TorusSpec)."""
    s = spec.slice_params()
    F = len(s)
    period = TWO_PI
    # track basepoint eigenvalues across one full period, closing sample included
    s_closed = np.append(s, s[0] + period)
    base_pts = spec.basepoint(s_closed)
    base_curve = lambda t: spec.basepoint(np.atleast_1d(t))  # noqa: E731
    base = track(model, base_pts, gap_ratio, curve=base_curve, params=s_closed, tol=tol,
                 closed=True)
    flow_perm = base.composite

    def one(i):
        try:
            return wilson_loop(model, spec.loop(s[i]), spec.loop_samples, gap_ratio=gap_ratio,
                               tol=tol, reference=base.values[i])
        except NumericalError as exc:
            raise type(exc)(f"slice {i} (flow parameter {s[i]:.6g}): {exc}") from exc

    results = _map(one, range(F), threads)
    phases = np.array([r.phases for r in results])
    moduli = np.array([r.moduli for r in results])

    # strand a ends the period in the slot that strand perm(a) started in
    final = base.order[-1]
    start_of = np.empty_like(final)
    start_of[final] = np.arange(len(final))
    closing = phases[0][start_of]
    seq = np.vstack([phases, closing[None, :]])
    steps = wrap_phase(np.diff(seq, axis=0))
    if np.any(np.abs(steps) >= np.pi / 2):
        j = int(np.argwhere(np.abs(steps) >= np.pi / 2)[0][0])
        raise NonTransversal(
            f"phase strand jumps by more than pi/2 between slices {j} and {j + 1}; increase flow_samples")
    unwrapped = seq[0] + np.vstack([np.zeros((1, seq.shape[1])), np.cumsum(steps, axis=0)])
    resid = float(np.max(np.abs(wrap_phase(phases.sum(axis=1))))) if phases.shape[1] == 2 else 0.0
    return WilsonFlow(s, phases, moduli, unwrapped, flow_perm, resid)


def _passages(x):
    """Signed count of passages of x through multiples of 2 pi; |.| summed."""
    k = np.floor(x / TWO_PI)
    return int(np.sum(np.abs(np.diff(k))))


def count_crossings(flow: WilsonFlow, *, strand=0, sum_tol=1e-3) -> CrossingReport:
    """Passages of one unwrapped strand through 0 and through pi (mod 2 pi)."""
    if flow.phases.shape[1] != 2:
        raise ValueError("crossing counting is defined for two-band flows")
    if flow.phase_sum_residual > sum_tol:
        raise NonTransversal(
            f"phase-sum constraint violated ({flow.phase_sum_residual:.3g} > {sum_tol:g}); refine loop_samples")
    s = flow.unwrapped[:, strand]
    for target in (0.0, np.pi):
        d = wrap_phase(s[:-1] - target)
        for j in np.flatnonzero(np.abs(d) < TANGENCY_TOL):
            # a sample on the target is fine if the strand passes through it
            before, after = d[j - 1], d[(j + 1) % len(d)]
            if before * after >= 0:
                raise NonTransversal(
                    f"strand touches {'pi' if target else '0'} without crossing at slice {j}; "
                    "shift or refine the flow samples")
    n0 = _passages(s)
    npi = _passages(s - np.pi)
    return CrossingReport(n0, npi, npi % 2, flow.modulus_drift, flow.phase_sum_residual)


def write_flow_csv(flow: WilsonFlow, path):
    with open(path, "w", newline="") as fh:
        flow.to_csv(fh)


def berry_phase_curve(model, loop: Loop, resolution=401, **kw) -> np.ndarray:
    """Convenience: per-band Berry phases in (-pi, pi]."""
    return wilson_loop(model, loop, resolution, **kw).phases


__all__ = [
    "CylinderSpec", "TorusSpec", "WilsonFlow", "CrossingReport", "LoopPhases",
    "wilson_loop", "wilson_flow", "count_crossings", "write_flow_csv", "wrap_phase",
    "band_products", "berry_phase_curve",
]
