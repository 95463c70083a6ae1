"""Flexibility service provider offers: shift sets, grids, sampling.

An offer describes the admissible (dP, dQ) shifts of one load or
distributed generator around its base operating point. The ``Smax`` shape
rule caps the shifted output by the apparent-power circle, ``PQmax`` by
the independent P/Q rectangle. A discrete offer admits exactly two
setpoints: stay, or full output reduction.

Shifts never flip an element's role: a load stays a (non-negative)
consumer, a generator stays a (non-negative) injector. Optional per-offer
range overrides can restrict either axis further.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .network import Network

_TOL = 1e-9

SHAPES = ("Smax", "PQmax")
DISTRIBUTIONS = ("Uniform", "Kumaraswamy", "Hard")

# Hard distribution: probability mass placed on envelope vertices.
HARD_VERTEX_PROB = 0.8
KUMARASWAMY_A = 0.5
KUMARASWAMY_B = 0.5


@dataclass(frozen=True)
class FspOffer:
    kind: str  # "load" | "sgen"
    index: int  # element index within the network
    p_mw: float  # base active power (consumption for loads, injection for DGs)
    q_mvar: float
    s_max_mva: float
    shape: str = "Smax"
    discrete: bool = False
    p_shift_range: tuple[float, float] | None = None
    q_shift_range: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in ("load", "sgen"):
            raise ConfigError(f"offer kind must be 'load' or 'sgen', got {self.kind!r}")
        if self.shape not in SHAPES:
            raise ConfigError(f"flex_shape must be one of {SHAPES}, got {self.shape!r}")
        base_s = math.hypot(self.p_mw, self.q_mvar)
        if self.s_max_mva + _TOL < base_s:
            raise ConfigError(
                f"{self.kind}[{self.index}]: s_max_mva={self.s_max_mva} below base "
                f"apparent power {base_s:.4f}"
            )


def admissible(offer: FspOffer, dp: float, dq: float) -> bool:
    """Membership of one (dP, dQ) shift in the offer's continuous region."""
    if offer.discrete:
        return (abs(dp) <= _TOL and abs(dq) <= _TOL) or (
            abs(dp + offer.p_mw) <= _TOL and abs(dq + offer.q_mvar) <= _TOL
        )
    p_new = offer.p_mw + dp
    q_new = offer.q_mvar + dq
    s = offer.s_max_mva
    if p_new < -_TOL or p_new > s + _TOL:
        return False
    if offer.shape == "Smax":
        if p_new * p_new + q_new * q_new > s * s + 1e-7:
            return False
    else:
        if abs(p_new) > s + _TOL or abs(q_new) > s + _TOL:
            return False
    if offer.p_shift_range is not None:
        lo, hi = offer.p_shift_range
        if dp < lo - _TOL or dp > hi + _TOL:
            return False
    if offer.q_shift_range is not None:
        lo, hi = offer.q_shift_range
        if dq < lo - _TOL or dq > hi + _TOL:
            return False
    return True


def shift_ranges(offer: FspOffer) -> tuple[float, float, float, float]:
    """Continuous envelope extremes (dP_lo, dP_hi, dQ_lo, dQ_hi)."""
    if offer.discrete:
        return (min(0.0, -offer.p_mw), max(0.0, -offer.p_mw),
                min(0.0, -offer.q_mvar), max(0.0, -offer.q_mvar))
    s = offer.s_max_mva
    p_lo, p_hi = -offer.p_mw, s - offer.p_mw
    q_lo, q_hi = -s - offer.q_mvar, s - offer.q_mvar
    if offer.p_shift_range is not None:
        p_lo = max(p_lo, offer.p_shift_range[0])
        p_hi = min(p_hi, offer.p_shift_range[1])
    if offer.q_shift_range is not None:
        q_lo = max(q_lo, offer.q_shift_range[0])
        q_hi = min(q_hi, offer.q_shift_range[1])
    return p_lo, p_hi, q_lo, q_hi


@dataclass(frozen=True)
class ShiftGrid:
    p_axis: np.ndarray  # ordered dP values
    q_axis: np.ndarray  # ordered dQ values
    mask: np.ndarray  # bool, shape (len(p_axis), len(q_axis))

    def points(self) -> list[tuple[float, float]]:
        """Admissible lattice points, P-major order."""
        out = []
        for i, dp in enumerate(self.p_axis):
            for j, dq in enumerate(self.q_axis):
                if self.mask[i, j]:
                    out.append((float(dp), float(dq)))
        return out

    @property
    def count(self) -> int:
        return int(self.mask.sum())


def _lattice(lo: float, hi: float, step: float) -> np.ndarray:
    ks = np.arange(math.floor(lo / step) - 1, math.ceil(hi / step) + 2)
    vals = ks * step
    return vals[(vals >= lo - _TOL) & (vals <= hi + _TOL)]


def build_shift_grid(offer: FspOffer, dp: float, dq: float) -> ShiftGrid:
    """Discretize the offer onto the dp/dq lattice (axes always include 0)."""
    if dp <= 0 or dq <= 0:
        raise ConfigError("dp and dq must be positive")
    if offer.discrete:
        p_axis = np.array(sorted({0.0, -offer.p_mw}))
        q_axis = np.array(sorted({0.0, -offer.q_mvar}))
        mask = np.zeros((len(p_axis), len(q_axis)), dtype=bool)
        for val_p, val_q in ((0.0, 0.0), (-offer.p_mw, -offer.q_mvar)):
            i = int(np.argmin(np.abs(p_axis - val_p)))
            j = int(np.argmin(np.abs(q_axis - val_q)))
            mask[i, j] = True
        return ShiftGrid(p_axis, q_axis, mask)

    p_lo, p_hi, q_lo, q_hi = shift_ranges(offer)
    p_axis = _lattice(p_lo, p_hi, dp)
    q_axis = _lattice(q_lo, q_hi, dq)
    if len(p_axis) == 0:
        p_axis = np.array([0.0])
    if len(q_axis) == 0:
        q_axis = np.array([0.0])
    mask = np.zeros((len(p_axis), len(q_axis)), dtype=bool)
    for i, vp in enumerate(p_axis):
        for j, vq in enumerate(q_axis):
            mask[i, j] = admissible(offer, float(vp), float(vq))
    if not mask.any():
        raise ConfigError(
            f"{offer.kind}[{offer.index}]: empty shift grid at dp={dp}, dq={dq}"
        )
    keep_p = mask.any(axis=1)
    keep_q = mask.any(axis=0)
    return ShiftGrid(p_axis[keep_p], q_axis[keep_q], mask[np.ix_(keep_p, keep_q)])


def classify_small(offers: list[FspOffer], dp: float, dq: float
                   ) -> tuple[list[FspOffer], list[FspOffer]]:
    """Partition into (regular, sub-resolution) offers.

    An offer is sub-resolution when its full dP range is below dp or its
    full dQ range is below dq: the main lattice cannot represent it.
    """
    regular, small = [], []
    for offer in offers:
        p_lo, p_hi, q_lo, q_hi = shift_ranges(offer)
        if (p_hi - p_lo) < dp - _TOL or (q_hi - q_lo) < dq - _TOL:
            small.append(offer)
        else:
            regular.append(offer)
    return regular, small


def vertices(offer: FspOffer, resolution: int = 81) -> np.ndarray:
    """Extreme points of the admissible region along 8 compass directions.

    Used by the 'Hard' distribution as the margin-seeking draw targets.
    """
    if offer.discrete:
        return np.array([[0.0, 0.0], [-offer.p_mw, -offer.q_mvar]])
    p_lo, p_hi, q_lo, q_hi = shift_ranges(offer)
    ps = np.linspace(p_lo, p_hi, resolution)
    qs = np.linspace(q_lo, q_hi, resolution)
    pts = [(float(vp), float(vq)) for vp in ps for vq in qs
           if admissible(offer, float(vp), float(vq))]
    if not pts:
        return np.array([[0.0, 0.0]])
    arr = np.array(pts)
    dirs = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)]
    verts = []
    for dx, dy in dirs:
        k = int(np.argmax(arr[:, 0] * dx + arr[:, 1] * dy))
        verts.append(tuple(arr[k]))
    uniq = sorted(set(verts))
    return np.array(uniq)


def _draw_unit(rng: np.random.Generator, dist: str, size: int) -> np.ndarray:
    x = rng.random(size)
    if dist == "Kumaraswamy":
        # inverse CDF of Kumaraswamy(a, b) pushes mass toward both extremes
        return (1.0 - (1.0 - x) ** (1.0 / KUMARASWAMY_B)) ** (1.0 / KUMARASWAMY_A)
    return x


def sample_shifts(offers: list[FspOffer], n: int, dist: str, seed: int) -> np.ndarray:
    """Draw n joint shift vectors; returns array of shape (n, len(offers), 2)."""
    if dist not in DISTRIBUTIONS:
        raise ConfigError(f"distribution must be one of {DISTRIBUTIONS}, got {dist!r}")
    if n < 1:
        raise ConfigError("number of samples must be >= 1")
    rng = np.random.default_rng(seed)
    out = np.zeros((n, len(offers), 2))
    for k, offer in enumerate(offers):
        if offer.discrete:
            pick = rng.random(n) < 0.5
            out[pick, k, 0] = -offer.p_mw
            out[pick, k, 1] = -offer.q_mvar
            continue
        p_lo, p_hi, q_lo, q_hi = shift_ranges(offer)
        if p_hi - p_lo < _TOL and q_hi - q_lo < _TOL:
            continue  # degenerate support: the zero shift
        verts = vertices(offer) if dist == "Hard" else None
        col = np.zeros((n, 2))
        need = np.arange(n)
        while len(need):
            m = len(need)
            dp = p_lo + _draw_unit(rng, dist, m) * (p_hi - p_lo)
            dq = q_lo + _draw_unit(rng, dist, m) * (q_hi - q_lo)
            ok = np.array([admissible(offer, float(a), float(b)) for a, b in zip(dp, dq)])
            col[need[ok], 0] = dp[ok]
            col[need[ok], 1] = dq[ok]
            need = need[~ok]
        if dist == "Hard":
            on_vertex = rng.random(n) < HARD_VERTEX_PROB
            choice = rng.integers(0, len(verts), size=n)
            col[on_vertex] = verts[choice[on_vertex]]
        out[:, k, :] = col
    return out


def offers_from_network(net: Network, fsp_load_indices: list[int],
                        fsp_dg_indices: list[int], flex_shape: str = "Smax",
                        non_linear_fsps: list[int] | None = None) -> list[FspOffer]:
    """Build offers for the referenced network elements.

    ``non_linear_fsps`` names DG indices (within ``fsp_dg_indices``) that
    offer only two discrete setpoints.
    """
    non_linear = set(non_linear_fsps or [])
    unknown_nl = non_linear - set(fsp_dg_indices)
    if unknown_nl:
        raise ConfigError(f"non_linear_fsps {sorted(unknown_nl)} not in fsp_dg_indices")
    out: list[FspOffer] = []
    for kind, indices, items in (
        ("load", fsp_load_indices, net.loads),
        ("sgen", fsp_dg_indices, net.sgens),
    ):
        for idx in indices:
            if not 0 <= idx < len(items):
                raise ConfigError(f"fsp {kind} index {idx} does not exist in the network")
            item = items[idx]
            p = item.p_mw * item.scaling
            q = item.q_mvar * item.scaling
            s = item.sn_mva if item.sn_mva > 0 else math.hypot(p, q)
            out.append(FspOffer(
                kind=kind, index=idx, p_mw=p, q_mvar=q, s_max_mva=s,
                shape=flex_shape, discrete=(kind == "sgen" and idx in non_linear),
            ))
    return out
