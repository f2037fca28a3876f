"""Semiconjugacies onto the linear factor and circle conjugacies.

Three constructions:

* ``circle_conjugacy`` -- monotone h with h(beta(t)) = k h(t) mod 1 for an
  expanding degree-k circle map, via the k-ary branch-digit expansion.  Also
  evaluates the maximal-entropy measure of beta through nu(I) = Leb(h(I)).
* ``skew_semiconjugacy`` -- for solid-torus skew products: the base factors
  through the circle conjugacy and the fiber point over a given backward base
  itinerary is recovered by running the reference solenoid forward.
* ``franks_semiconjugacy`` -- for perturbations of a hyperbolic automorphism
  of T^3: pi = id + u where u solves A u - u o f = displacement by geometric
  series along the expanding/contracting spectral parts.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NoConvergence, NotExpanding, NotOnAttractor
from .systems import SystemModel, as_points


# ---------------------------------------------------------------------------
# circle conjugacy
# ---------------------------------------------------------------------------

class CircleConjugacy:
    """Coordinate change h with h o beta = (x k) o h, computed digit by digit."""

    def __init__(self, beta_map, k, depth=40):
        self.beta = beta_map
        self.k = int(k)
        self.depth = int(depth)
        self.identity = beta_map is None

    def __call__(self, theta):
        th = np.mod(np.asarray(theta, dtype=float), 1.0)
        if self.identity:
            return th
        h = np.zeros_like(th)
        x = th.copy()
        for j in range(self.depth):
            y = self.beta.lift(x)
            d = np.clip(np.floor(y), 0, self.k - 1)
            h += d / float(self.k) ** (j + 1)
            x = y - d
        return h

    def inverse(self, s):
        """Monotone inverse by bisection on the lift."""
        s = np.mod(np.asarray(s, dtype=float), 1.0)
        if self.identity:
            return s
        lo = np.zeros_like(s)
        hi = np.ones_like(s)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = self(mid) < s
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def mme_mass(self, a, b):
        """Maximal-entropy measure of the positively-oriented arc [a, b]."""
        ha = float(self(np.array([a]))[0])
        hb = float(self(np.array([b]))[0])
        return (hb - ha) % 1.0

    def residual(self, samples=2048):
        t = (np.arange(samples) + 0.5) / samples
        if self.identity:
            return 0.0
        lhs = self(np.mod(self.beta(t), 1.0))
        rhs = np.mod(self.k * self(t), 1.0)
        d = np.abs(lhs - rhs)
        return float(np.max(np.minimum(d, 1.0 - d)))


def circle_conjugacy(beta_map, depth=40):
    """Conjugacy of an expanding circle map to multiplication by its degree.

    ``beta_map`` must expose ``k``, ``lift`` and ``derivative`` (see
    ``ExpandingCircleMap``); ``None`` or the exact x k map gives the identity.
    """
    if beta_map is None:
        raise ValueError("need a circle map or an integer degree")
    if isinstance(beta_map, (int, np.integer)):
        return CircleConjugacy(None, int(beta_map))
    dmin = float(np.min(beta_map.derivative(np.arange(8192) / 8192.0)))
    if dmin <= 1.0:
        raise NotExpanding(f"min derivative {dmin:.4f} <= 1")
    return CircleConjugacy(beta_map, beta_map.k, depth=depth)


# ---------------------------------------------------------------------------
# semiconjugacy container
# ---------------------------------------------------------------------------

@dataclass
class SemiConjugacy:
    """Factor map with measured residual.

    ``factor_point`` sends states to factor coordinates (circle coordinate for
    skew products, torus points otherwise); ``full_factor_point`` includes the
    fiber for embedding factors.  ``tolerance`` records the measured sup
    residual of the defining equation on a sample.
    """

    kind: str
    depth: int
    tolerance: float
    _factor_point: callable
    _full_factor: callable = None
    circle: CircleConjugacy = None
    extras: dict = field(default_factory=dict)

    def factor_point(self, points):
        return self._factor_point(points)

    def full_factor_point(self, points):
        if self._full_factor is None:
            return self.factor_point(points)
        return self._full_factor(points)

    def export_arrays(self, grid=24):
        """Sampled displacement data for serialization (binary + sidecar)."""
        raise NotImplementedError


# ---------------------------------------------------------------------------
# skew products
# ---------------------------------------------------------------------------

def backward_base_itinerary(model: SystemModel, points, depth, first_step_slack=1e-6):
    """Backward base orbit (theta_-1, ..., theta_-depth).

    Branch choice per step: the preimage with the smallest fiber norm.  If the
    query point itself has no preimage branch near the disk the point is not
    in the image of the trapping region and ``NotOnAttractor`` is raised; in
    deeper steps the fiber is clipped back into the disk instead -- the
    reconstruction only feels digit j at order a^j, so once the genuine
    history of a numerically-near-attractor point is exhausted the clipped
    continuation is harmless.
    """
    p = as_points(points, model.state_dim)
    k = model.base_degree
    base_inverse = model.fiber.params["base_inverse"]
    fiber_inverse = model.fiber.params["fiber_inverse"]
    thetas = np.empty((depth, len(p)))
    cur = p.copy()
    for j in range(depth):
        nxt = np.empty_like(cur)
        for i, q in enumerate(cur):
            best = None
            for mbr in range(k):
                th = base_inverse(q[0], mbr)
                x = fiber_inverse(th, q[1:][None, :])[0]
                r = float(np.linalg.norm(x))
                if best is None or r < best[0]:
                    best = (r, th, x)
            r, th, x = best
            if j == 0 and r > 1.0 + first_step_slack:
                raise NotOnAttractor(
                    f"point {q} is not in the image of the trapping region "
                    f"(best fiber norm {r:.4f})")
            if r > 1.0:
                x = x / r * 0.999
            nxt[i, 0] = th
            nxt[i, 1:] = x
        thetas[j] = nxt[:, 0]
        cur = nxt
    return thetas


def skew_semiconjugacy(model: SystemModel, reference=None, depth=40):
    """Semiconjugacy from a solid-torus skew product onto a reference solenoid.

    The reference defaults to the plain solenoid with the same degree and
    contraction; its fiber point over the matched backward base itinerary is
    recovered by forward iteration, with fiber error <= a^depth * diam(D).
    """
    from .systems import make_solenoid  # local import to avoid cycles

    if model.domain != "solid_torus":
        raise ValueError("skew semiconjugacy needs a solid-torus skew product")
    k = model.base_degree
    if reference is None:
        if model.name == "solenoid":
            reference = model
        else:
            reference = make_solenoid(k, model.params.get("a", 0.5))
    if reference.base_degree != k:
        raise ValueError("model and reference must share the base degree")

    beta = model.fiber.base_map
    conj = CircleConjugacy(None, k) if model.name != "modified_solenoid" \
        else circle_conjugacy(beta, depth=depth)

    ref_fiber = reference.fiber.fiber_map

    def fiber_from_itinerary(thetas):
        """Reference fiber point over a backward base itinerary (deep first)."""
        y = np.zeros((thetas.shape[1], 2))
        for j in range(thetas.shape[0] - 1, -1, -1):
            y = ref_fiber(conj(thetas[j]), y)
        return y

    def full_factor(points, thetas=None):
        p = as_points(points, 3)
        if thetas is None:
            thetas = backward_base_itinerary(model, p, depth)
        out = np.empty_like(p)
        out[:, 0] = conj(p[:, 0])
        out[:, 1:] = fiber_from_itinerary(thetas)
        return out

    def factor_point(points):
        p = as_points(points, 3)
        return conj(p[:, 0])

    a_ref = reference.params["a"]
    fiber_err = a_ref ** depth * 2.0
    pi = SemiConjugacy(
        kind="identity" if model is reference and depth <= 0 else "skew_itinerary",
        depth=depth,
        tolerance=fiber_err + conj.residual() if not conj.identity else fiber_err,
        _factor_point=factor_point,
        _full_factor=full_factor,
        circle=conj,
        extras={"reference": reference, "model": model,
                "fiber_error_bound": fiber_err,
                "fiber_from_itinerary": fiber_from_itinerary},
    )

    def export_arrays(grid=24):
        rng = np.random.default_rng(0)
        th = rng.random(grid * grid)
        pts = np.stack([th, np.zeros_like(th), np.zeros_like(th)], axis=1)
        pts = model.iterate(pts, depth)
        disp = pi.full_factor_point(pts) - pts
        return {"points": pts, "displacement": disp,
                "sidecar": {"kind": pi.kind, "depth": depth,
                            "tolerance": pi.tolerance, "grid": grid}}

    pi.export_arrays = export_arrays
    return pi


def skew_residual(pi: SemiConjugacy, model: SystemModel, reference: SystemModel,
                  n=200, seed=0):
    """Measured sup |pi(f(x)) - g0(pi(x))| along tracked orbits.

    The backward base itineraries of x and f(x) are taken from one tracked
    orbit, so the comparison is well defined even where overlapping inverse
    branches make pointwise itineraries ambiguous.
    """
    rng = np.random.default_rng(seed)
    depth = pi.depth
    th = rng.random(n)
    pts = np.stack([th, 0.5 * rng.random(n) - 0.25, 0.5 * rng.random(n) - 0.25], axis=1)
    orbit = [pts]
    for _ in range(depth + 1):
        orbit.append(model.f(orbit[-1]))
    x, fx = orbit[-2], orbit[-1]
    thetas_x = np.stack([orbit[-2 - j][:, 0] for j in range(1, depth + 1)], axis=0)
    thetas_fx = np.stack([orbit[-1 - j][:, 0] for j in range(1, depth + 1)], axis=0)
    lhs = pi._full_factor(fx, thetas=thetas_fx)
    rhs = reference.f(pi._full_factor(x, thetas=thetas_x))
    d = np.abs(lhs - rhs)
    d[:, 0] = np.minimum(d[:, 0], 1.0 - d[:, 0])
    return float(np.max(np.linalg.norm(d, axis=1)))


# ---------------------------------------------------------------------------
# Franks series on T^3
# ---------------------------------------------------------------------------

def franks_semiconjugacy(model: SystemModel, auto=None, tol=1e-6):
    """pi = id + u with pi o f = A o pi, by spectral geometric series.

    The displacement p = f - A is summed along the expanding part with weights
    A^-(j+1) over the forward orbit and along the contracting part with
    weights A^(j-1) over the backward orbit.  Truncation depth is chosen from
    the rate r = max(kappa_2, 1/kappa_3) so the tail bound is below tol/2;
    ``NoConvergence`` is raised if the measured residual misses tol.
    """
    if auto is None:
        auto = model.base_auto
    m = auto.matrix.astype(float)
    kappa = np.abs(auto.eigenvalues)
    r = max(float(kappa[1]), 1.0 / float(kappa[0]))
    if r >= 1.0:
        raise NoConvergence(f"series rate {r:.4f} >= 1")
    amp = float(model.params.get("amplitude", 0.0))

    # spectral data: powers are applied in eigen-coordinates (a scalar on the
    # expanding line, a contracting 2x2 block on the stable plane) to avoid
    # the catastrophic cancellation of full-matrix powers of A^-1
    un = auto.unstable_matrix()          # 3x1
    st = auto.stable_matrix()            # 3x2
    B = np.concatenate([un, st], axis=1)
    Binv = np.linalg.inv(B)
    dual_u = Binv[:1, :]                 # 1x3
    dual_s = Binv[1:, :]                 # 2x3
    lam_u = float((dual_u @ m @ un)[0, 0])
    m_s = dual_s @ m @ st                # 2x2, spectral radius kappa_2

    sup_p = max(amp, 1e-300)
    depth = int(np.ceil(np.log(tol * (1.0 - r) / (2.0 * sup_p)) / np.log(r))) if amp > 0 else 1
    depth = max(depth, 1)

    def displacement(points):
        d = model.f(points) - points @ m.T
        return (d + 0.5) % 1.0 - 0.5

    def u_field(points):
        p = as_points(points, 3)
        # expanding part: forward orbit, inverse eigenvalue powers
        cu = np.zeros((len(p), 1))
        cur = p.copy()
        w = 1.0 / lam_u
        for _ in range(depth):
            cu += w * (displacement(cur) @ dual_u.T)
            cur = model.f(cur)
            w /= lam_u
        # contracting part: backward orbit, forward block powers
        cs = np.zeros((len(p), 2))
        cur = p.copy()
        wb = np.eye(2)
        for _ in range(depth):
            cur = model.f_inv(cur)
            cs -= (displacement(cur) @ dual_s.T) @ wb.T
            wb = m_s @ wb
        return cu @ un.T + cs @ st.T

    def factor_point(points):
        p = as_points(points, 3)
        return np.mod(p + u_field(p), 1.0)

    pi = SemiConjugacy(
        kind="identity" if amp == 0.0 else "franks_series",
        depth=depth,
        tolerance=tol,
        _factor_point=factor_point,
        _full_factor=factor_point,
        extras={"rate": r, "model": model, "auto": auto,
                "u_field": u_field, "dual_u": dual_u, "dual_s": dual_s},
    )

    res = franks_residual(pi, model, auto, n=400)
    pi.tolerance = res
    if res > tol:
        raise NoConvergence(
            f"measured residual {res:.3e} exceeds tol {tol:.1e} at depth {depth}")

    def export_arrays(grid=16):
        ax = (np.arange(grid) + 0.5) / grid
        X, Y, Z = np.meshgrid(ax, ax, ax, indexing="ij")
        pts = np.stack([X.ravel(), Y.ravel(), Z.ravel()], axis=1)
        disp = pi.extras["u_field"](pts)
        return {"points": pts, "displacement": disp,
                "sidecar": {"kind": pi.kind, "depth": pi.depth,
                            "tolerance": pi.tolerance, "grid": grid}}

    pi.export_arrays = export_arrays
    return pi


def franks_residual(pi: SemiConjugacy, model: SystemModel, auto, n=1000, seed=1):
    """Measured sup |pi(f(x)) - A pi(x)| over random samples."""
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 3))
    lhs = pi.factor_point(model.f(pts))
    rhs = np.mod(pi.factor_point(pts) @ auto.matrix.astype(float).T, 1.0)
    d = np.abs(lhs - rhs)
    d = np.minimum(d, 1.0 - d)
    return float(np.max(np.linalg.norm(d, axis=1)))
