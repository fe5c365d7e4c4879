"""Eigenvalue braids along closed momentum loops.

Strands are followed with :func:`spectra.track`. A signed Artin generator is
emitted whenever two strands that are adjacent in Re-order swap their Re
order. With "right" the strand of larger Re before the swap, the sign is
sign(Im lambda_right - Im lambda_left) at the crossing, so a counterclockwise
exchange is +1 and, for two bands, the exponent sum equals the half-twist
count Delta arg(lambda_1 - lambda_2) / pi.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .algebra import Permutation, reduced_perm_matrix
from .errors import ProjectionDegenerate
from .models import Loop
from .spectra import DEFAULT_TOL, track

COINCIDENCE_TOL = 1e-9
MAX_DOUBLINGS = 6


@dataclass(frozen=True)
class BraidWord:
    """Signed Artin generators: ``+i`` is sigma_i, ``-i`` its inverse."""

    generators: tuple
    strands: int

    def __post_init__(self):
        gens = tuple(int(g) for g in self.generators)
        if self.strands < 1:
            raise ValueError("a braid needs at least one strand")
        for g in gens:
            if g == 0 or abs(g) >= self.strands:
                raise ValueError(f"generator {g} invalid on {self.strands} strands")
        object.__setattr__(self, "generators", gens)

    @property
    def exponent_sum(self):
        return sum(1 if g > 0 else -1 for g in self.generators)

    def __mul__(self, other: "BraidWord") -> "BraidWord":
        if self.strands != other.strands:
            raise ValueError("braids on different numbers of strands")
        return BraidWord(self.generators + other.generators, self.strands)

    def inverse(self):
        return BraidWord(tuple(-g for g in reversed(self.generators)), self.strands)

    def __len__(self):
        return len(self.generators)

    def to_json(self):
        return list(self.generators)

    @classmethod
    def from_json(cls, seq, strands):
        return cls(tuple(seq), strands)


@dataclass(frozen=True)
class BraidInvariant:
    word: BraidWord
    permutation: Permutation
    half_twists: Optional[int]
    exponent_sum: int
    resolution: int = 0

    def to_json(self):
        return {
            "word": self.word.to_json(),
            "strands": self.word.strands,
            "permutation": list(self.permutation.images),
            "half_twists": self.half_twists,
            "exponent_sum": self.exponent_sum,
        }


def braid_to_perm(word: BraidWord) -> Permutation:
    """s_{i1} s_{i2} ... s_{ik}: position i at the end holds the strand that
    started at position perm(i)."""
    imgs = list(range(1, word.strands + 1))
    for g in word.generators:
        i = abs(g)
        # right-multiplying by s_i swaps the images of i and i+1
        imgs[i - 1], imgs[i] = imgs[i], imgs[i - 1]
    return Permutation(tuple(imgs))


def action_on_chern(word: BraidWord, n=None):
    """Induced action on Z^{N-1} in the basis {e_i - e_{i+1}}."""
    n = word.strands if n is None else n
    if n != word.strands:
        raise ValueError(f"word has {word.strands} strands, expected {n}")
    return reduced_perm_matrix(braid_to_perm(word))


class _Retry(Exception):
    pass


def _crossing_events(values):
    """Re-order swaps between consecutive samples.

    Strands are ordered lexicographically by (Re, Im), so an exact Re tie at
    a sample is broken by Im. Returns (time, right, left, im_diff) tuples,
    with time a fractional sample index and ``right`` the strand of larger
    Re before the swap.
    """
    T, n = values.shape
    events = []
    re, im = values.real, values.imag
    for i in range(n):
        for j in range(i + 1, n):
            d = re[:, i] - re[:, j]
            s = np.where(d != 0, np.sign(d), np.sign(im[:, i] - im[:, j]))
            if np.any(s == 0):
                raise _Retry()
            ties = np.flatnonzero(d[1:-1] == 0) + 1
            if np.any(s[ties - 1] == s[ties + 1]):
                raise _Retry()  # touches without crossing
            for a in np.flatnonzero(s[:-1] != s[1:]):
                b = a + 1
                frac = 0.0 if d[a] == 0 else (1.0 if d[b] == 0 else d[a] / (d[a] - d[b]))
                im_i = im[a, i] + frac * (im[b, i] - im[a, i])
                im_j = im[a, j] + frac * (im[b, j] - im[a, j])
                right, left = (i, j) if s[a] > 0 else (j, i)
                diff = (im_i - im_j) if right == i else (im_j - im_i)
                scale = max(1.0, float(np.abs(values[a]).max()))
                if abs(diff) <= COINCIDENCE_TOL * scale:
                    raise _Retry()
                events.append((a + frac, right, left, diff))
    events.sort(key=lambda e: e[0])
    return events


def _word_from_values(values):
    n = values.shape[1]
    events = _crossing_events(values)
    # position p holds strand pos[p], Re-ascending
    pos = list(np.lexsort((values[0].imag, values[0].real)))
    gens = []
    for _, right, left, diff in events:
        pl, pr = pos.index(left), pos.index(right)
        if pr != pl + 1:
            raise _Retry()
        gens.append((pl + 1) * (1 if diff > 0 else -1))
        pos[pl], pos[pr] = pos[pr], pos[pl]
    return BraidWord(tuple(gens), n), pos


def _half_twists(values):
    d = values[:, 0] - values[:, 1]
    ang = np.angle(d)
    step = np.angle(np.exp(1j * np.diff(ang)))
    if np.any(np.abs(step) >= np.pi / 2):
        raise _Retry()
    total = step.sum() / np.pi
    k = int(round(total))
    if abs(total - k) > 1e-3:
        raise _Retry()
    return k


def braid_along_loop(model, loop: Loop, resolution=401, *, gap_ratio=0.5, tol=DEFAULT_TOL,
                     max_doublings=MAX_DOUBLINGS) -> BraidInvariant:
    """Braid word, permutation and (two bands) half-twist count along ``loop``.

    Ambiguous projections (exact Re ties without a sign change, coincident
    crossings, non-adjacent swaps) trigger resampling at twice the
    resolution, up to ``max_doublings`` times.
    """
    res = int(resolution)
    for _ in range(max_doublings + 1):
        t, pts = loop.sample(res)
        bp = track(model, pts, gap_ratio, curve=loop, params=t, tol=tol, closed=True)
        try:
            word, pos = _word_from_values(bp.values)
            ht = _half_twists(bp.values) if bp.values.shape[1] == 2 else None
        except _Retry:
            res *= 2
            continue
        perm = bp.composite
        if braid_to_perm(word) != perm or (ht is not None and ht != word.exponent_sum):
            res *= 2
            continue
        return BraidInvariant(word, perm, ht, word.exponent_sum, res)
    raise ProjectionDegenerate(
        f"braid word not resolvable after {max_doublings} doublings (resolution {res // 2}); "
        "eigenvalues coincide in projection")


def det_winding(model, loop: Loop, resolution=401, max_doublings=MAX_DOUBLINGS):
    """Change of the continuously unwrapped arg det H along ``loop``, in radians."""
    res = int(resolution)
    for _ in range(max_doublings + 1):
        _, pts = loop.sample(res)
        det = np.linalg.det(model(pts))
        if np.any(det == 0):
            raise ProjectionDegenerate("det H vanishes on the loop")
        step = np.angle(det[1:] / det[:-1])
        if np.all(np.abs(step) < np.pi / 2):
            return float(step.sum())
        res *= 2
    raise ProjectionDegenerate("arg det H changes too fast to unwrap")
