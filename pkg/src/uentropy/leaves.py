"""Strong-unstable leaves, Markov plaques, and center-stable holonomy.

Plaques are parametrized by the factor unstable coordinate (the circle
coordinate for skew products, the xi-eigencoordinate for toral factors); the
parameter interval is the cell's unstable extent.  Skew-product plaques carry
an exact evaluator built from the anchor's backward base itinerary; toral
plaques are straight segments; T^3 systems use grown leaf segments instead
(no Markov partition exists there).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConeCheckFailed,
    InsufficientResolution,
    UnsupportedDimension,
)
from .factor import SemiConjugacy, backward_base_itinerary
from .systems import SystemModel, as_points, unstable_direction
from .toral import MarkovStructure


@dataclass
class UnstablePlaque:
    """Piece of a strong-unstable leaf over one Markov cell.

    ``eval(t)`` returns leaf points for parameters t in [t0, t1] (the factor
    unstable coordinate relative to the cell anchor); ``param_of`` inverts it.
    """

    cell_id: int
    anchor: np.ndarray
    t0: float
    t1: float
    anchor_t: float
    parameter_kind: str
    _eval: callable
    _param_of: callable
    meta: dict = field(default_factory=dict)

    def eval(self, t):
        return self._eval(np.asarray(t, dtype=float))

    def param_of(self, points):
        return self._param_of(points)

    def sample(self, n):
        """Midpoint grid of n parameters (stays inside the half-open cell)."""
        t = self.t0 + (np.arange(n) + 0.5) / n * (self.t1 - self.t0)
        return t, self.eval(t)

    @property
    def length(self):
        return self.t1 - self.t0


@dataclass
class CenterStablePlaque:
    """Preimage of a factor stable plaque: stored by its defining data."""

    cell_id: int
    anchor: np.ndarray
    factor_point: np.ndarray
    pi: SemiConjugacy


# ---------------------------------------------------------------------------
# plaque construction
# ---------------------------------------------------------------------------

def _base_lift(model):
    base = model.fiber.base_map
    if hasattr(base, "lift"):
        return base.lift
    k = model.base_degree
    return lambda th: k * np.asarray(th, dtype=float)


def plaque_of(model: SystemModel, ms: MarkovStructure, pi: SemiConjugacy, x,
              depth=40):
    """The unstable plaque through ``x`` over its Markov cell."""
    x = as_points(x, model.state_dim)[0]
    if model.domain == "solid_torus":
        return _skew_plaque(model, ms, pi, x, depth)
    if model.domain == "torus2":
        return _toral_plaque(model, ms, pi, x)
    raise UnsupportedDimension(
        "no Markov plaques on T^3; use grow_unstable_leaf segments")


def _skew_plaque(model, ms, pi, x, depth):
    conj = pi.circle
    lift = _base_lift(model)
    thetas = backward_base_itinerary(model, x[None, :], depth)[:, 0]
    digits = np.floor(lift(thetas)).astype(np.int64)
    digits = np.clip(digits, 0, model.base_degree - 1)
    base_inverse = model.fiber.params["base_inverse"]
    fiber_map = model.fiber.fiber_map

    s_anchor = float(pi.factor_point(x[None, :])[0])
    ids, su, _ = ms.locate(np.array([s_anchor]))
    cell = int(ids[0])
    anchor_t = float(su[0])
    k = ms.k

    def eval_fn(t):
        t = np.atleast_1d(t)
        s = cell / k + t
        th = conj.inverse(s)
        # walk the anchor's branch chain downward, then run the fiber forward
        chain = [th]
        for j in range(depth):
            prev = np.array([base_inverse(v, int(digits[j])) for v in chain[-1]])
            chain.append(prev)
        y = np.zeros((len(th), 2))
        for j in range(depth, 0, -1):
            y = fiber_map(chain[j], y)
        out = np.empty((len(th), 3))
        out[:, 0] = np.mod(th, 1.0)
        out[:, 1:] = y
        return out

    def param_of(points):
        p = as_points(points, 3)
        s = pi.factor_point(p)
        return np.mod(s - cell / k, 1.0)

    return UnstablePlaque(
        cell_id=cell, anchor=x, t0=0.0, t1=ms.u_extent(cell), anchor_t=anchor_t,
        parameter_kind="base-coordinate",
        _eval=eval_fn, _param_of=param_of,
        meta={"depth": depth, "digits": digits},
    )


def _toral_plaque(model, ms, pi, x):
    fx = pi.factor_point(x[None, :])
    ids, su, ss = ms.locate(fx)
    cell = int(ids[0])
    ss0 = float(ss[0])

    def eval_fn(t):
        t = np.atleast_1d(t)
        return np.stack([ms.embed(cell, float(v), ss0) for v in t], axis=0)

    def param_of(points):
        ids2, su2, _ = ms.locate(pi.factor_point(as_points(points, 2)))
        return su2

    return UnstablePlaque(
        cell_id=cell, anchor=x, t0=0.0, t1=ms.u_extent(cell), anchor_t=float(su[0]),
        parameter_kind="A-unstable-coordinate",
        _eval=eval_fn, _param_of=param_of,
        meta={"ss": ss0},
    )


def segment_plaque(model: SystemModel, pi: SemiConjugacy, x, radius,
                   resolution=512, depth=14):
    """Leaf segment through x parametrized by the factor unstable coordinate.

    Used where no Markov partition exists (T^3); the evaluator interpolates a
    grown polyline.
    """
    leaf = grow_unstable_leaf(model, x, radius, resolution, pi=pi, depth=depth)
    t = leaf["t"]
    pts = leaf["points"]
    # unwrap the polyline once so interpolation never crosses a seam
    d = np.diff(pts, axis=0)
    if model.domain.startswith("torus"):
        d = (d + 0.5) % 1.0 - 0.5
    else:
        d[:, 0] = (d[:, 0] + 0.5) % 1.0 - 0.5
    unwrapped = np.concatenate([pts[:1], pts[:1] + np.cumsum(d, axis=0)], axis=0)

    def eval_fn(tt):
        tt = np.atleast_1d(tt)
        out = np.empty((len(tt), model.state_dim))
        for dim in range(model.state_dim):
            out[:, dim] = np.interp(tt, t, unwrapped[:, dim])
        if model.domain.startswith("torus"):
            return np.mod(out, 1.0)
        out[:, 0] = np.mod(out[:, 0], 1.0)
        return out

    def param_of(points):
        p = as_points(points, model.state_dim)
        d = p[:, None, :] - pts[None, :, :]
        d = (d + 0.5) % 1.0 - 0.5
        idx = np.argmin(np.linalg.norm(d, axis=2), axis=1)
        return t[idx]

    return UnstablePlaque(
        cell_id=-1, anchor=as_points(x, model.state_dim)[0],
        t0=float(t[0]), t1=float(t[-1]), anchor_t=0.0,
        parameter_kind="A-unstable-coordinate",
        _eval=eval_fn, _param_of=param_of,
        meta={"leaf": leaf},
    )


# ---------------------------------------------------------------------------
# leaf growth
# ---------------------------------------------------------------------------

def grow_unstable_leaf(model: SystemModel, x, radius, resolution,
                       pi: SemiConjugacy = None, depth=None, cone_check=True):
    """Grow the local strong-unstable leaf through x to the given radius.

    Iterates a short tangent segment at a backward iterate of x; the iterate
    count n satisfies (initial length) * (min expansion)^n >= radius.  Sample
    tangents are checked against the unstable cone at every step.

    Returns dict with 'points' (ordered samples), 't' (factor unstable
    coordinate, 0 at the anchor), and 'anchor_index'.
    """
    if resolution < 3:
        raise InsufficientResolution("need at least 3 samples along the leaf")
    x = as_points(x, model.state_dim)
    # minimum expansion estimate from the model Jacobian on samples
    probe = model.jac(x)
    vu = model.uu_hint(x)
    vu = vu / np.linalg.norm(vu, axis=1, keepdims=True)
    min_exp = float(np.linalg.norm(np.einsum("nij,nj->ni", probe, vu), axis=1)[0])
    min_exp = max(1.2, 0.8 * min_exp)

    delta0 = min(1e-3, 0.05 * radius)
    n = int(np.ceil(np.log(1.4 * radius / delta0) / np.log(min_exp)))
    if depth is not None:
        n = min(n, depth)
        delta0 = 1.4 * radius / min_exp ** n

    past = x.copy()
    chain = [past]
    for _ in range(n):
        past = model.f_inv(past)
        chain.append(past)
    # a rough unstable direction suffices: forward iteration aligns the segment
    v = model.uu_hint(chain[-1])
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    # seed segment
    t0 = np.linspace(-delta0, delta0, resolution)
    pts = chain[-1][0][None, :] + t0[:, None] * v[0][None, :]
    ap = model.cone_aperture
    for step in range(n):
        pts = model.f(pts)
        if cone_check and step >= 2:
            d = np.diff(pts, axis=0)
            if model.domain != "solid_torus":
                d = (d + 0.5) % 1.0 - 0.5
            else:
                d[:, 0] = (d[:, 0] + 0.5) % 1.0 - 0.5
            mid = pts[:-1]
            u0 = model.uu_hint(mid)
            u0 = u0 / np.linalg.norm(u0, axis=1, keepdims=True)
            fr = model.cs_frame(mid)
            basis = np.concatenate([u0[:, :, None], fr], axis=2)
            coef = np.linalg.solve(basis, d[..., None])[..., 0]
            slope = np.linalg.norm(coef[:, 1:], axis=1) / np.maximum(np.abs(coef[:, 0]), 1e-300)
            bad = slope >= ap
            if np.any(bad):
                raise ConeCheckFailed(
                    f"tangent left the unstable cone at iterate {step + 1}",
                    point=mid[int(np.argmax(bad))].tolist())
    # factor unstable coordinate, accumulated along the polyline
    t = _factor_u_coordinate(model, pi, pts)
    # anchor: closest sample to x
    dd = pts - x[0]
    if model.domain == "solid_torus":
        dd[:, 0] = (dd[:, 0] + 0.5) % 1.0 - 0.5
    else:
        dd = (dd + 0.5) % 1.0 - 0.5
    ai = int(np.argmin(np.linalg.norm(dd, axis=1)))
    t = t - t[ai]
    keep = np.abs(t) <= radius
    if np.sum(keep) >= 3:
        pts, t = pts[keep], t[keep]
        ai = int(np.argmin(np.abs(t)))
    return {"points": pts, "t": t, "anchor_index": ai, "iterations": n}


def _factor_u_coordinate(model, pi, pts):
    """Cumulative factor unstable coordinate along an ordered leaf polyline."""
    if model.domain == "solid_torus":
        s = pi.factor_point(pts) if pi is not None else np.mod(pts[:, 0], 1.0)
        ds = np.diff(s)
        ds = (ds + 0.5) % 1.0 - 0.5
        return np.concatenate([[0.0], np.cumsum(ds)])
    if model.domain == "torus2":
        fp = pi.factor_point(pts) if pi is not None else pts
        # xi functional increments, wrapped to the nearest lattice representative
        from .toral import _G, _PHI, _SQRT5  # module constants
        d = np.diff(fp, axis=0)
        d = (d + 0.5) % 1.0 - 0.5
        dxi = d[:, 0] + _G * d[:, 1]
        return np.concatenate([[0.0], np.cumsum(dxi)])
    # torus3: unstable dual coordinate of the factor displacement
    auto = model.base_auto
    un = auto.unstable_matrix()
    st = auto.stable_matrix()
    B = np.concatenate([un, st], axis=1)
    dual_u = np.linalg.inv(B)[0]
    fp = pi.factor_point(pts) if pi is not None else pts
    d = np.diff(fp, axis=0)
    d = (d + 0.5) % 1.0 - 0.5
    return np.concatenate([[0.0], np.cumsum(d @ dual_u)])


# ---------------------------------------------------------------------------
# holonomy
# ---------------------------------------------------------------------------

def cs_holonomy(plaque_x: UnstablePlaque, plaque_y: UnstablePlaque, z):
    """Center-stable holonomy: the point of plaque_y in the same cs-plaque as z.

    Both plaques must lie over the same cell; matching happens through the
    factor's local product structure, i.e. at equal unstable coordinate.
    """
    if plaque_x.cell_id != plaque_y.cell_id:
        raise ValueError("holonomy needs plaques over the same cell")
    t = plaque_x.param_of(z)
    return plaque_y.eval(t)


def holonomy_map(plaque_x: UnstablePlaque, plaque_y: UnstablePlaque):
    """Vectorized holonomy as a function on plaque_x points."""
    def h(points):
        return plaque_y.eval(plaque_x.param_of(points))
    return h
