"""Bloch Hamiltonians: the two lattice variants, the k.p exceptional-line
model, grid-sampled models read from disk, and closed momentum loops.

Every model is a callable mapping momenta of shape ``(..., dim)`` to
matrices of shape ``(..., N, N)``. Models are immutable and carry no state
beyond their parameters, so they can be shared between worker threads.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import GridFormatError, OffGridError

TWO_PI = 2.0 * np.pi

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
# sigma_+- = sigma_x +- i sigma_y (no factor 1/2)
SIGMA_PLUS = SIGMA_X + 1j * SIGMA_Y
SIGMA_MINUS = SIGMA_X - 1j * SIGMA_Y

LATTICE_OFFSETS = {"main": np.pi / 3, "supp": np.pi / 4}


def k_plus(k):
    """k_x + i k_y for momenta of shape (..., >=2)."""
    k = np.asarray(k, dtype=float)
    return k[..., 0] + 1j * k[..., 1]


def k_minus(k):
    k = np.asarray(k, dtype=float)
    return k[..., 0] - 1j * k[..., 1]


def pauli(hx, hy, hz, h0=0.0):
    """Assemble h0 + hx sx + hy sy + hz sz elementwise over broadcast arrays."""
    hx, hy, hz, h0 = np.broadcast_arrays(
        np.asarray(hx, complex), np.asarray(hy, complex),
        np.asarray(hz, complex), np.asarray(h0, complex))
    out = np.empty(hx.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = h0 + hz
    out[..., 0, 1] = hx - 1j * hy
    out[..., 1, 0] = hx + 1j * hy
    out[..., 1, 1] = h0 - hz
    return out


def _as_momenta(k, dim):
    k = np.asarray(k, dtype=float)
    if k.shape[-1] != dim:
        raise ValueError(f"expected momenta with last axis {dim}, got shape {k.shape}")
    return k


def eval_lattice(k, m, variant="main"):
    """Two-band lattice model with eigenvalue winding along k_z.

    ``variant`` selects the phase offset c: ``"main"`` uses pi/3, ``"supp"``
    uses pi/4. The displayed form has half angles k_z/2 multiplied by
    exp(i k_z/2); here the product is expanded into whole angles so that the
    result is manifestly 2 pi periodic in every component::

        exp(ix) cos(x - c)              = (exp(i(2x - c)) + exp(ic)) / 2
        exp(ix) (sin 2x cos x - 2m sin x) = sin(2x)(1 + exp(2ix))/2 + i m (exp(2ix) - 1)

    with x = k_z / 2.
    """
    c = LATTICE_OFFSETS[variant]
    k = _as_momenta(k, 3)
    kx, ky, kz = k[..., 0], k[..., 1], k[..., 2]
    ez = np.exp(1j * kz)
    fx = 0.5 * (ez * np.exp(-1j * c) + np.exp(1j * c))
    fy = 0.5 * (ez * np.exp(1j * c) + np.exp(-1j * c))
    fz = 0.5 * np.sin(kz) * (1.0 + ez) + 1j * m * (ez - 1.0)
    return pauli(fx * np.sin(kx), fy * np.sin(ky), fz)


def eval_lattice_half_angle(k, m, variant="main"):
    """Literal half-angle form of :func:`eval_lattice` (kept as a cross-check)."""
    c = LATTICE_OFFSETS[variant]
    k = _as_momenta(k, 3)
    kx, ky, kz = k[..., 0], k[..., 1], k[..., 2]
    pref = np.exp(0.5j * kz)
    hx = np.cos(kz / 2 - c) * np.sin(kx)
    hy = np.cos(kz / 2 + c) * np.sin(ky)
    hz = np.sin(kz) * np.cos(kz / 2) - 2 * m * np.sin(kz / 2)
    return pref[..., None, None] * pauli(hx, hy, hz)


def eval_kp(k, alpha, include_perturbation=True):
    """k.p model with an exceptional line through the origin.

    Base part: (sigma_+ + k_+ sigma_-)/2 + k_z sigma_z. The perturbation adds
    (k_- + e^{-i alpha})(k_+ + e^{-i alpha}) sigma_+
    + (k_+ + e^{i alpha})(k_- + e^{i alpha}) k_+ sigma_-.
    """
    k = _as_momenta(k, 3)
    kp, km, kz = k_plus(k), k_minus(k), k[..., 2]
    hp = 0.5 * np.ones_like(kp)
    hm = 0.5 * kp
    if include_perturbation:
        e = np.exp(-1j * alpha)
        ec = np.exp(1j * alpha)
        hp = hp + (km + e) * (kp + e)
        hm = hm + (kp + ec) * (km + ec) * kp
    out = np.zeros(kp.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = kz
    out[..., 1, 1] = -kz
    out[..., 0, 1] = 2.0 * hp
    out[..., 1, 0] = 2.0 * hm
    return out


def kp_weyl_positions(alpha):
    """In-plane Weyl points of the perturbed k.p model.

    They sit on the circle |k_+| = 1/sqrt(2) at polar angles +-phi with
    cos(phi) = -sqrt(2) cos(alpha), and exist only for alpha in the open
    window (pi/4, 3pi/4). Outside the window, including its end points,
    an empty list is returned.
    """
    a = float(np.mod(alpha, TWO_PI))
    if not (np.pi / 4 < a < 3 * np.pi / 4):
        return []
    cphi = np.clip(-np.sqrt(2.0) * np.cos(a), -1.0, 1.0)
    phi = np.arccos(cphi)
    r = 1.0 / np.sqrt(2.0)
    return [np.array([r * np.cos(phi), s * r * np.sin(phi), 0.0]) for s in (1.0, -1.0)]


class BlochModel:
    """Common surface of all models: ``kind``, ``bands``, ``dim``,
    ``periodic`` (per axis) and ``params``; calling evaluates H(k)."""

    kind: str
    bands: int
    dim: int
    periodic: tuple

    @property
    def params(self) -> dict:
        return {}

    def __call__(self, k) -> np.ndarray:  # pragma: no cover - abstract
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind, "bands": self.bands, "dim": self.dim, **self.params}


@dataclass(frozen=True)
class LatticeModel(BlochModel):
    m: float
    variant: str = "main"
    bands: int = field(default=2, init=False)
    dim: int = field(default=3, init=False)
    periodic: tuple = field(default=(True, True, True), init=False)

    def __post_init__(self):
        if self.variant not in LATTICE_OFFSETS:
            raise ValueError(f"unknown lattice variant {self.variant!r}")

    @property
    def kind(self):
        return "LatticeMain" if self.variant == "main" else "LatticeSupp"

    @property
    def params(self):
        return {"m": self.m}

    def __call__(self, k):
        return eval_lattice(k, self.m, self.variant)


@dataclass(frozen=True)
class KpModel(BlochModel):
    alpha: float = np.pi / 2
    include_perturbation: bool = True
    bands: int = field(default=2, init=False)
    dim: int = field(default=3, init=False)
    periodic: tuple = field(default=(False, False, False), init=False)

    @property
    def kind(self):
        return "KpExceptional" if self.include_perturbation else "KpBase"

    @property
    def params(self):
        return {"alpha": self.alpha, "include_perturbation": self.include_perturbation}

    def __call__(self, k):
        return eval_kp(k, self.alpha, self.include_perturbation)


@dataclass(frozen=True)
class FunctionModel(BlochModel):
    """Wraps a user function ``f(k) -> (..., N, N)``; used for ad hoc
    families such as H(t) = cos t sz + sin t sx."""

    func: Callable
    bands: int
    dim: int
    periodic: tuple = None
    kind: str = field(default="Custom", init=False)

    def __post_init__(self):
        if self.periodic is None:
            object.__setattr__(self, "periodic", (False,) * self.dim)

    def __call__(self, k):
        k = _as_momenta(k, self.dim)
        return np.asarray(self.func(k), dtype=complex)


# ---------------------------------------------------------------------------
# grid-sampled models

GRID_MAGIC = b"NHGRID1"
_HEADER_RE = re.compile(rb"^NHGRID1(?: +[A-Z]+=[^ ]*)+ *$")


@dataclass(frozen=True, eq=False)
class GridModel(BlochModel):
    """H(k) stored at the nodes of a regular grid; no interpolation.

    Node j on a periodic axis sits at ``lo + (hi - lo) j / n`` (``hi``
    excluded); on an open axis at ``lo + (hi - lo) j / (n - 1)``. Default
    ranges are [0, 2 pi) for periodic and [-1, 1] for open axes.
    """

    data: np.ndarray  # shape axes + (N, N)
    periodic: tuple
    ranges: tuple
    kind: str = field(default="Grid", init=False)

    def __post_init__(self):
        if not np.all(np.isfinite(self.data)):
            raise ValueError("grid data contains non-finite entries")

    @property
    def axes(self):
        return tuple(self.data.shape[:-2])

    @property
    def dim(self):
        return len(self.axes)

    @property
    def bands(self):
        return self.data.shape[-1]

    @property
    def params(self):
        return {"axes": list(self.axes)}

    def node_coordinates(self, axis):
        n = self.axes[axis]
        lo, hi = self.ranges[axis]
        if self.periodic[axis]:
            return lo + (hi - lo) * np.arange(n) / n
        return lo + (hi - lo) * np.arange(n) / max(n - 1, 1)

    def node_index(self, k, atol=1e-9):
        """Integer node indices for momenta ``k``; raises OffGridError."""
        k = _as_momenta(k, self.dim)
        idx = []
        for a, n in enumerate(self.axes):
            lo, hi = self.ranges[a]
            if self.periodic[a]:
                x = (k[..., a] - lo) / (hi - lo) * n
            else:
                x = (k[..., a] - lo) / (hi - lo) * max(n - 1, 1)
            j = np.rint(x)
            if np.any(np.abs(x - j) > atol):
                bad = np.asarray(k)[np.abs(x - j) > atol].reshape(-1, self.dim)[0]
                raise OffGridError(
                    f"momentum {bad.tolist()} does not lie on a grid node along axis {a}; "
                    "grid models are evaluated only at stored nodes")
            j = j.astype(int)
            if self.periodic[a]:
                j = np.mod(j, n)
            elif np.any((j < 0) | (j >= n)):
                raise OffGridError(f"momentum outside the grid range along axis {a}")
            idx.append(j)
        return tuple(idx)

    def __call__(self, k):
        return self.data[self.node_index(k)]


def grid_nodes(axes, periodic, ranges=None):
    """Momenta of all nodes in row-major order, shape axes + (dim,)."""
    ranges = ranges or default_ranges(periodic)
    coords = []
    for n, p, (lo, hi) in zip(axes, periodic, ranges):
        coords.append(lo + (hi - lo) * np.arange(n) / (n if p else max(n - 1, 1)))
    mesh = np.meshgrid(*coords, indexing="ij")
    return np.stack(mesh, axis=-1)


def default_ranges(periodic):
    return tuple((0.0, TWO_PI) if p else (-1.0, 1.0) for p in periodic)


def sample_grid_model(model, axes, periodic=None, ranges=None):
    periodic = tuple(model.periodic if periodic is None else periodic)
    ranges = tuple(ranges or default_ranges(periodic))
    data = np.asarray(model(grid_nodes(axes, periodic, ranges)), dtype=complex)
    return GridModel(data=data, periodic=periodic, ranges=ranges)


def _fmt_float(x):
    return repr(float(x))


def dump_grid_model(grid: GridModel) -> bytes:
    header = (f"NHGRID1 N={grid.bands} D={grid.dim} "
              f"AXES={','.join(str(n) for n in grid.axes)} "
              f"PERIODIC={','.join('1' if p else '0' for p in grid.periodic)}")
    if tuple(grid.ranges) != default_ranges(grid.periodic):
        header += " RANGES=" + ",".join(f"{_fmt_float(lo)}:{_fmt_float(hi)}" for lo, hi in grid.ranges)
    body = np.ascontiguousarray(grid.data, dtype="<c16").tobytes()
    return header.encode("ascii") + b"\n" + body


def write_grid_model(grid: GridModel, path):
    with open(path, "wb") as fh:
        fh.write(dump_grid_model(grid))


def load_grid_model(source) -> GridModel:
    """Parse a grid file from bytes, a path-like or a binary stream."""
    if isinstance(source, (bytes, bytearray, memoryview)):
        raw = bytes(source)
    elif hasattr(source, "read"):
        raw = source.read()
    else:
        with open(source, "rb") as fh:
            raw = fh.read()

    nl = raw.find(b"\n")
    if nl < 0 or not raw.startswith(GRID_MAGIC):
        raise GridFormatError("missing NHGRID1 header line", 0)
    line = raw[:nl].rstrip(b"\r")
    if not _HEADER_RE.match(line):
        raise GridFormatError("malformed header", 0)
    fields = {}
    pos = len(GRID_MAGIC)
    for tok in line[len(GRID_MAGIC):].split(b" "):
        if tok:
            key, _, val = tok.partition(b"=")
            fields[key.decode()] = (val.decode(), line.find(tok, pos))
            pos = line.find(tok, pos) + len(tok)
    for key in ("N", "D", "AXES", "PERIODIC"):
        if key not in fields:
            raise GridFormatError(f"header lacks {key}=", len(line))
    try:
        bands = int(fields["N"][0])
        dim = int(fields["D"][0])
    except ValueError:
        raise GridFormatError("N and D must be integers", fields["N"][1]) from None
    try:
        axes = tuple(int(x) for x in fields["AXES"][0].split(","))
    except ValueError:
        raise GridFormatError("AXES must be comma-separated integers", fields["AXES"][1]) from None
    flags = fields["PERIODIC"][0].split(",")
    if any(f not in ("0", "1") for f in flags):
        raise GridFormatError("PERIODIC entries must be 0 or 1", fields["PERIODIC"][1])
    periodic = tuple(f == "1" for f in flags)
    if bands < 1 or dim < 1 or any(n < 1 for n in axes):
        raise GridFormatError("N, D and node counts must be positive", 0)
    if len(axes) != dim or len(periodic) != dim:
        raise GridFormatError(f"D={dim} disagrees with AXES/PERIODIC lengths", fields["AXES"][1])
    if "RANGES" in fields:
        try:
            ranges = tuple(tuple(float(v) for v in r.split(":")) for r in fields["RANGES"][0].split(","))
            if len(ranges) != dim or any(len(r) != 2 or not r[1] > r[0] for r in ranges):
                raise ValueError
        except ValueError:
            raise GridFormatError("RANGES must be lo:hi pairs, one per axis", fields["RANGES"][1]) from None
    else:
        ranges = default_ranges(periodic)

    start = nl + 1
    expected = int(np.prod(axes)) * bands * bands * 16
    got = len(raw) - start
    if got != expected:
        raise GridFormatError(
            f"dimension mismatch: header implies {expected} data bytes, found {got}",
            start + min(got, expected))
    data = np.frombuffer(raw, dtype="<c16", offset=start).astype(complex)
    bad = ~np.isfinite(data)
    if bad.any():
        first = int(np.flatnonzero(bad)[0])
        raise GridFormatError("non-finite matrix entry", start + 16 * first)
    data = data.reshape(axes + (bands, bands))
    return GridModel(data=data, periodic=periodic, ranges=tuple(ranges))


def read_grid_file(path):
    with open(path, "rb") as fh:
        return load_grid_model(fh)


# ---------------------------------------------------------------------------
# closed paths


@dataclass(frozen=True)
class Loop:
    """A closed path t in [0, 1] -> k(t), with k(0) == k(1) (mod the lattice
    for periodic directions). ``func`` must be vectorised over t."""

    func: Callable[[np.ndarray], np.ndarray]
    dim: int

    def __call__(self, t):
        return np.asarray(self.func(np.asarray(t, dtype=float)), dtype=float)

    def sample(self, resolution):
        """``resolution + 1`` points; the last repeats the first."""
        t = np.linspace(0.0, 1.0, int(resolution) + 1)
        return t, self(t)

    def reversed(self):
        f = self.func
        return Loop(lambda t: f(1.0 - np.asarray(t)), self.dim)


def axis_loop(axis, at, start=0.0, dim=3):
    """Straight loop along ``axis`` over one reciprocal period, other
    components fixed to ``at`` (given in axis order, skipping ``axis``)."""
    axis = "xyz".index(axis) if isinstance(axis, str) else int(axis)
    fixed = list(at)
    if len(fixed) != dim - 1:
        raise ValueError(f"need {dim - 1} fixed coordinates, got {len(fixed)}")

    def f(t):
        t = np.asarray(t, dtype=float)
        out = np.empty(t.shape + (dim,))
        others = [i for i in range(dim) if i != axis]
        for i, v in zip(others, fixed):
            out[..., i] = v
        out[..., axis] = start + TWO_PI * t
        return out

    return Loop(f, dim)


def circle_loop(center, radius, normal="z", theta0=0.0):
    """Circle of ``radius`` around ``center`` in the plane perpendicular to
    ``normal``; counterclockwise seen from the tip of ``normal``."""
    center = np.asarray(center, dtype=float)
    n = "xyz".index(normal) if isinstance(normal, str) else int(normal)
    a, b = [(1, 2), (2, 0), (0, 1)][n]

    def f(t):
        th = theta0 + TWO_PI * np.asarray(t, dtype=float)
        out = np.broadcast_to(center, th.shape + (3,)).copy()
        out[..., a] += radius * np.cos(th)
        out[..., b] += radius * np.sin(th)
        return out

    return Loop(f, 3)


def polyline_loop(points: Sequence):
    """Piecewise-linear loop through ``points`` (closed back to the first)."""
    pts = np.asarray(points, dtype=float)
    if not np.allclose(pts[0], pts[-1]):
        pts = np.vstack([pts, pts[:1]])
    s = np.linspace(0.0, 1.0, len(pts))

    def f(t):
        t = np.asarray(t, dtype=float)
        return np.stack([np.interp(t, s, pts[:, i]) for i in range(pts.shape[1])], axis=-1)

    return Loop(f, pts.shape[1])


def _param(opts, key, default, number):
    return default if key not in opts else number(opts[key])


def parse_model(text, number=float):
    """Model from a CLI string such as ``lattice-main:m=2``, ``lattice-supp:m=0.25``,
    ``kp:alpha=1.57``, ``kp-base`` or ``grid:path/to/file.bin``. ``number``
    converts parameter values."""
    name, _, rest = text.partition(":")
    name = name.strip().lower()
    if name == "grid":
        if not rest:
            raise ValueError("grid model needs a file path, e.g. grid:file.bin")
        return read_grid_file(rest)
    opts = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"bad model option {item!r}; expected key=value")
        opts[key.strip().lower()] = val.strip()
    if name in ("lattice-main", "lattice-supp", "main", "supp"):
        variant = "supp" if name.endswith("supp") else "main"
        return LatticeModel(m=number(opts.get("m", "2")), variant=variant)
    if name in ("kp", "kp-exceptional"):
        pert = opts.get("perturbation", "1") not in ("0", "false", "off")
        return KpModel(alpha=_param(opts, "alpha", np.pi / 2, number), include_perturbation=pert)
    if name == "kp-base":
        return KpModel(alpha=_param(opts, "alpha", np.pi / 2, number), include_perturbation=False)
    raise ValueError(f"unknown model {text!r}")

