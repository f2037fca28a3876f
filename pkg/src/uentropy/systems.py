"""Concrete map families: solenoid embeddings, modified solenoids with a
fast-fiber window, perturbed hyperbolic automorphisms of T^3, and linear toral
systems.

All systems share one calling convention: states are float arrays of shape
(N, state_dim); maps, Jacobians and projections are vectorized over the first
axis.  Angular coordinates live in [0, 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConeCheckFailed,
    DomainEscape,
    MismatchedEndpoints,
    NotExpanding,
    NotHyperbolic,
    NotOnAttractor,
)
from .toral import ToralAutomorphism, hyperbolic_split

TWO_PI = 2.0 * np.pi


def as_points(x, dim):
    p = np.asarray(x, dtype=float)
    if p.ndim == 1:
        p = p[None, :]
    if p.shape[1] != dim:
        raise ValueError(f"expected points of dimension {dim}, got {p.shape}")
    return p


class TrigPolynomial:
    """R^m-valued trigonometric polynomial of one angular variable.

    ``coeffs`` maps harmonic n >= 1 to a pair (cos_vec, sin_vec) of length-m
    coefficient vectors: b(t) = sum_n cos_vec*cos(2 pi n t) + sin_vec*sin(2 pi n t).
    """

    def __init__(self, coeffs, m=2):
        self.m = m
        self.coeffs = {int(n): (np.asarray(c, dtype=float), np.asarray(s, dtype=float))
                       for n, (c, s) in coeffs.items()}

    def value(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (self.m,))
        for n, (c, s) in self.coeffs.items():
            ang = TWO_PI * n * t
            out += np.cos(ang)[..., None] * c + np.sin(ang)[..., None] * s
        return out

    def derivative(self, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape + (self.m,))
        for n, (c, s) in self.coeffs.items():
            ang = TWO_PI * n * t
            out += TWO_PI * n * (-np.sin(ang)[..., None] * c + np.cos(ang)[..., None] * s)
        return out

    def sup_norm(self, samples=4096):
        t = np.arange(samples) / samples
        return float(np.max(np.linalg.norm(self.value(t), axis=-1)))


@dataclass
class FiberFamily:
    """Skew-product data: expanding base circle map and disk fiber maps."""

    base_degree: int
    base_map: callable            # theta -> k*theta mod 1 (or the nonlinear beta)
    base_derivative: callable     # theta -> beta'(theta)
    fiber_map: callable           # (theta, x(N,2)) -> (N,2)
    fiber_jac: callable           # (theta, x(N,2)) -> (N,2,2)
    params: dict
    boundary_margin: float = 0.0
    sup_fiber_derivative: float = 0.0
    warnings: list = field(default_factory=list)


@dataclass
class SystemModel:
    """A concrete map with derivative, splitting dimensions and base data."""

    name: str
    state_dim: int
    cs_dim: int
    uu_dim: int
    domain: str                   # 'solid_torus' | 'torus2' | 'torus3'
    params: dict
    cone_aperture: float
    is_embedding: bool
    _f: callable
    _jac: callable
    _f_inv: callable
    _base_proj: callable
    _cs_frame: callable           # (N,d) -> (N,d,cs_dim), exactly invariant
    _uu_hint: callable            # (N,d) -> (N,d) approximate unstable direction
    fiber: FiberFamily | None = None
    base_auto: ToralAutomorphism | None = None
    base_degree: int | None = None

    def f(self, points):
        return self._f(as_points(points, self.state_dim))

    def jac(self, points):
        return self._jac(as_points(points, self.state_dim))

    def f_inv(self, points):
        return self._f_inv(as_points(points, self.state_dim))

    def base_projection(self, points):
        return self._base_proj(as_points(points, self.state_dim))

    def cs_frame(self, points):
        return self._cs_frame(as_points(points, self.state_dim))

    def uu_hint(self, points):
        return self._uu_hint(as_points(points, self.state_dim))

    def iterate(self, points, n):
        p = as_points(points, self.state_dim)
        for _ in range(n):
            p = self._f(p)
        return p

    def orbit(self, point, n):
        """Forward orbit array of shape (n+1, state_dim)."""
        p = as_points(point, self.state_dim)
        out = np.empty((n + 1, self.state_dim))
        out[0] = p[0]
        for i in range(n):
            p = self._f(p)
            out[i + 1] = p[0]
        return out

    def state_distance(self, a, b):
        """Distance respecting angular coordinates."""
        a = as_points(a, self.state_dim)
        b = as_points(b, self.state_dim)
        d = a - b
        if self.domain == "solid_torus":
            d[:, 0] = (d[:, 0] + 0.5) % 1.0 - 0.5
        else:
            d = (d + 0.5) % 1.0 - 0.5
        return np.linalg.norm(d, axis=1)


# ---------------------------------------------------------------------------
# solenoid families
# ---------------------------------------------------------------------------

def _disk_boundary_margin(fiber_map, n_theta=64, n_bdry=256):
    th = np.arange(n_theta) / n_theta
    ang = TWO_PI * np.arange(n_bdry) / n_bdry
    bdry = np.stack([np.cos(ang), np.sin(ang)], axis=1)
    worst = np.inf
    for t in th:
        img = fiber_map(np.full(n_bdry, t), bdry)
        worst = min(worst, 1.0 - np.max(np.linalg.norm(img, axis=1)))
    return float(worst)


def _skew_model(name, fam, params, cone_aperture, inverse_branch_tol=1e-9):
    """Assemble a SystemModel from a FiberFamily over an expanding circle base."""
    k = fam.base_degree

    def f(p):
        th = p[:, 0]
        out = np.empty_like(p)
        out[:, 0] = fam.base_map(th)
        out[:, 1:] = fam.fiber_map(th, p[:, 1:])
        return out

    def jac(p):
        th = p[:, 0]
        n = len(p)
        J = np.zeros((n, 3, 3))
        J[:, 0, 0] = fam.base_derivative(th)
        J[:, 1:, 1:] = fam.fiber_jac(th, p[:, 1:])
        dth = fam.params["theta_derivative"](th, p[:, 1:])
        J[:, 1:, 0] = dth
        return J

    base_inverse = fam.params["base_inverse"]  # (theta_image, branch) -> theta
    fiber_inverse = fam.params["fiber_inverse"]  # (theta, x_image) -> x

    def f_inv(p):
        out = np.empty_like(p)
        for i, q in enumerate(p):
            best = None
            for m in range(k):
                th = base_inverse(q[0], m)
                x = fiber_inverse(th, q[1:][None, :])[0]
                r = float(np.linalg.norm(x))
                if r <= 1.0 + inverse_branch_tol and (best is None or r < best[0]):
                    best = (r, th, x)
            if best is None:
                raise NotOnAttractor(
                    f"point {q} has no preimage branch inside the fiber disk")
            out[i, 0] = best[1]
            out[i, 1:] = best[2]
        return out

    def base_proj(p):
        return np.mod(p[:, 0], 1.0)

    cs = np.zeros((3, 2))
    cs[1, 0] = 1.0
    cs[2, 1] = 1.0

    def cs_frame(p):
        return np.broadcast_to(cs, (len(p), 3, 2))

    uu = np.array([1.0, 0.0, 0.0])

    def uu_hint(p):
        return np.broadcast_to(uu, (len(p), 3))

    return SystemModel(
        name=name, state_dim=3, cs_dim=2, uu_dim=1, domain="solid_torus",
        params=params, cone_aperture=cone_aperture, is_embedding=True,
        _f=f, _jac=jac, _f_inv=f_inv, _base_proj=base_proj,
        _cs_frame=cs_frame, _uu_hint=uu_hint,
        fiber=fam, base_degree=k,
    )


def make_solenoid(k=3, a=0.5, b=None):
    """Solid-torus embedding (theta, x) -> (k theta mod 1, a x + b(theta)).

    ``b`` is a TrigPolynomial (default 0.3*(cos, sin) on the first harmonic).
    Raises DomainEscape when some fiber image reaches the disk boundary.
    """
    k = int(k)
    if k < 3:
        raise ValueError("solenoid degree must be >= 3")
    if not (1.0 / k < a < 1.0):
        raise ValueError("contraction must lie in (1/k, 1)")
    if b is None:
        b = TrigPolynomial({1: ((0.3, 0.0), (0.0, 0.3))})

    def fiber_map(th, x):
        return a * x + b.value(th)

    def fiber_jac(th, x):
        J = np.zeros((len(x), 2, 2))
        J[:, 0, 0] = a
        J[:, 1, 1] = a
        return J

    margin = _disk_boundary_margin(fiber_map)
    if margin <= 0.0:
        raise DomainEscape(
            f"fiber image reaches the disk boundary (margin {margin:.4f}); "
            f"need a + |b|_inf < 1")

    fam = FiberFamily(
        base_degree=k,
        base_map=lambda th: np.mod(k * th, 1.0),
        base_derivative=lambda th: np.full_like(np.asarray(th, dtype=float), float(k)),
        fiber_map=fiber_map,
        fiber_jac=fiber_jac,
        params={
            "theta_derivative": lambda th, x: b.derivative(th),
            "base_inverse": lambda thi, m: (np.mod(thi, 1.0) + m) / k,
            "fiber_inverse": lambda th, xi: (xi - b.value(th)) / a,
        },
        boundary_margin=margin,
        sup_fiber_derivative=a,
    )
    params = {"system": "solenoid", "k": k, "a": a,
              "b_coeffs": {n: (list(c), list(s)) for n, (c, s) in b.coeffs.items()},
              "b_sup": b.sup_norm()}
    aperture = max(0.1, 2.0 * b.derivative(np.arange(512) / 512.0).max() / (k - a))
    model = _skew_model("solenoid", fam, params, aperture)
    model.params["partial_volume_expanding"] = bool(k * a > 1.0)
    return model


def _two_fixed_fiber(lam, c):
    """Odd cubic x2 -> x2*(1 + lam*(c^2 - x2^2)): repeller at 0, sinks at +-c."""
    def psi(x2):
        return x2 * (1.0 + lam * (c * c - x2 * x2))

    def dpsi(x2):
        return 1.0 + lam * (c * c - 3.0 * x2 * x2)

    return psi, dpsi


def make_two_solenoid(k=3, a=0.5, lam=0.3, c=0.5, b1=None, swap=False):
    """Solenoid with two attracting sub-solenoids in the fiber.

    The second fiber coordinate follows an odd cubic with attracting fixed
    points at +-c and a repeller at 0; ``swap=True`` composes with the flip
    x2 -> -x2, making the two sub-attractors a period-2 pair.
    """
    k = int(k)
    if b1 is None:
        b1 = TrigPolynomial({1: ((0.2,), (0.0,))}, m=1)
    psi, dpsi = _two_fixed_fiber(lam, c)
    sgn = -1.0 if swap else 1.0
    if not (0.0 < lam < 1.0 / (3.0 - c * c)):
        raise ValueError("cubic strength too large: fiber map not monotone")

    def fiber_map(th, x):
        out = np.empty_like(x)
        out[:, 0] = a * x[:, 0] + b1.value(th)[..., 0]
        out[:, 1] = sgn * psi(x[:, 1])
        return out

    def fiber_jac(th, x):
        J = np.zeros((len(x), 2, 2))
        J[:, 0, 0] = a
        J[:, 1, 1] = sgn * dpsi(x[:, 1])
        return J

    margin = _disk_boundary_margin(fiber_map)
    if margin <= 0.0:
        raise DomainEscape(f"two-solenoid fiber escapes the disk (margin {margin:.4f})")

    def fiber_inverse(th, xi):
        out = np.empty_like(xi)
        out[:, 0] = (xi[:, 0] - b1.value(th)[..., 0]) / a
        # invert the monotone cubic by bisection
        target = sgn * xi[:, 1]
        lo = np.full(len(xi), -1.2)
        hi = np.full(len(xi), 1.2)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            below = psi(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        out[:, 1] = 0.5 * (lo + hi)
        return out

    fam = FiberFamily(
        base_degree=k,
        base_map=lambda th: np.mod(k * th, 1.0),
        base_derivative=lambda th: np.full_like(np.asarray(th, dtype=float), float(k)),
        fiber_map=fiber_map,
        fiber_jac=fiber_jac,
        params={
            "theta_derivative": lambda th, x: np.stack(
                [b1.derivative(th)[..., 0], np.zeros_like(np.asarray(th, dtype=float))], axis=-1),
            "base_inverse": lambda thi, m: (np.mod(thi, 1.0) + m) / k,
            "fiber_inverse": fiber_inverse,
        },
        boundary_margin=margin,
        sup_fiber_derivative=float(max(a, abs(dpsi(0.0)))),
    )
    name = "swap_solenoid" if swap else "two_solenoid"
    params = {"system": name, "k": k, "a": a, "lam": lam, "c": c, "swap": bool(swap),
              "b1_coeffs": {n: (list(cc), list(ss)) for n, (cc, ss) in b1.coeffs.items()}}
    aperture = max(0.1, 2.0 * np.abs(b1.derivative(np.arange(512) / 512.0)).max() / (k - a))
    return _skew_model(name, fam, params, aperture)


# -- modified solenoid -------------------------------------------------------

class ExpandingCircleMap:
    """Piecewise-smooth C^1 degree-k circle map with a fast window at 0.

    The derivative profile equals ``peak`` on [-eps0, eps0], tapers by cos^2 to
    a constant on [eps0, eps1] (mirrored), and is constant elsewhere; the
    constant is solved so the total degree is k.  beta(0) = 0 and, by symmetry
    of the profile, beta(1/2) = 1/2: both are fixed points.
    """

    def __init__(self, k=3, peak=4.5, eps0=0.03, eps1=0.07):
        self.k = int(k)
        self.peak = float(peak)
        self.eps0 = float(eps0)
        self.eps1 = float(eps1)
        w = eps1 - eps0
        self.w = w
        self.m = (k - peak * (2 * eps0 + w)) / (1 - 2 * eps1 + w)
        if self.m <= 1.0:
            raise NotExpanding(
                f"flat derivative {self.m:.4f} <= 1; window too wide or peak too high")

    def derivative(self, theta):
        t = np.mod(np.asarray(theta, dtype=float) + 0.5, 1.0) - 0.5
        at = np.abs(t)
        out = np.full_like(at, self.m)
        out = np.where(at <= self.eps0, self.peak, out)
        sel = (at > self.eps0) & (at < self.eps1)
        taper = self.m + (self.peak - self.m) * np.cos(
            np.pi * (at - self.eps0) / (2 * self.w)) ** 2
        return np.where(sel, taper, out)

    def _int_from_zero(self, t):
        """Integral of the profile on [0, t] for t in [0, 1/2]."""
        t = np.asarray(t, dtype=float)
        B, m, w, e0, e1 = self.peak, self.m, self.w, self.eps0, self.eps1

        def taper_int(u):
            return m * u + (B - m) * (u / 2 + (w / (2 * np.pi)) * np.sin(np.pi * u / w))

        r = np.where(t <= e0, B * t, 0.0)
        mid = B * e0 + taper_int(np.clip(t - e0, 0.0, w))
        r = np.where((t > e0) & (t <= e1), mid, r)
        r = np.where(t > e1, B * e0 + taper_int(w) + m * (t - e1), r)
        return r

    def lift(self, theta):
        th = np.asarray(theta, dtype=float)
        t = np.mod(th, 1.0)
        lo = t <= 0.5
        val = np.where(lo, self._int_from_zero(np.where(lo, t, 0.5)),
                       self.k - self._int_from_zero(np.where(lo, 0.5, 1.0 - t)))
        return val + self.k * np.floor(th)

    def __call__(self, theta):
        return np.mod(self.lift(theta), 1.0)

    def branch_inverse(self, theta_image, m):
        """theta with lift(theta) = theta_image + m, m in 0..k-1; by bisection."""
        target = np.mod(np.asarray(theta_image, dtype=float), 1.0) + m
        lo = np.zeros_like(target)
        hi = np.ones_like(target)
        for _ in range(52):
            mid = 0.5 * (lo + hi)
            below = self.lift(mid) < target
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


def _rotation(alpha):
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array([[ca, -sa], [sa, ca]])


def make_modified_solenoid(k=3, a=0.5, alpha=0.7, eps=0.024, beta=None,
                           ku=4.0, ks=0.2, r_sat=0.9, b=None,
                           path_plateau=0.8):
    """Solenoid-type embedding with a saddle fiber family on a base window.

    Outside the window [-eps, eps] the fiber map is the rotation-contraction
    a*R_alpha (+ b(theta)); inside, it interpolates to a map with a linear
    saddle of rates (ku, ks) at the origin, realized with a bounded saturating
    expansion so the disk still maps into its interior.  The base map expands
    faster than the fiber everywhere (pointwise domination).
    """
    if beta is None:
        beta = ExpandingCircleMap(k=k)
    k = beta.k
    if float(np.min(beta.derivative(np.arange(4096) / 4096.0))) <= 1.0:
        raise NotExpanding("base map must be uniformly expanding")
    if eps >= beta.eps0:
        raise ValueError("fiber window must sit inside the fast-derivative window")
    if b is None:
        b = TrigPolynomial({1: ((0.0, 0.0), (0.1, 0.05))})
    # b must vanish at both base fixed points 0 and 1/2
    bv = b.value(np.array([0.0, 0.5]))
    if np.max(np.abs(bv)) > 1e-12:
        raise ValueError("fiber offset b must vanish at the base fixed points 0 and 1/2")

    rot = a * _rotation(alpha)

    def phi(x):
        return x @ rot.T

    def psi0(x):
        out = np.empty_like(x)
        out[:, 0] = r_sat * np.tanh(ku * x[:, 0] / r_sat)
        out[:, 1] = ks * x[:, 1]
        return out

    def dpsi0(x):
        J = np.zeros((len(x), 2, 2))
        J[:, 0, 0] = ku / np.cosh(ku * x[:, 0] / r_sat) ** 2
        J[:, 1, 1] = ks
        return J

    def bump(t):
        s = np.asarray(t, dtype=float) / path_plateau
        out = np.where(np.abs(s) < 1.0, np.cos(np.pi * s / 2.0) ** 2, 0.0)
        return out

    def dbump(t):
        s = np.asarray(t, dtype=float) / path_plateau
        return np.where(np.abs(s) < 1.0,
                        -np.pi * np.sin(np.pi * s) / (2.0 * path_plateau), 0.0)

    def psi_path(t, x):
        c = bump(t)
        return (1.0 - c)[..., None] * phi(x) + c[..., None] * psi0(x)

    # endpoint and continuity checks
    xs = np.random.default_rng(0).random((64, 2)) * 2 - 1
    xs = xs[np.linalg.norm(xs, axis=1) <= 1.0]
    end_err = max(np.max(np.abs(psi_path(np.full(len(xs), 1.0), xs) - phi(xs))),
                  np.max(np.abs(psi_path(np.full(len(xs), -1.0), xs) - phi(xs))))
    if end_err > 1e-12:
        raise MismatchedEndpoints(f"path endpoints differ from the base map by {end_err:.2e}")

    def wrapped(th):
        return np.mod(np.asarray(th, dtype=float) + 0.5, 1.0) - 0.5

    def fiber_map(th, x):
        t = wrapped(th)
        inside = np.abs(t) <= eps
        out = phi(x) + b.value(th)
        if np.any(inside):
            out[inside] = psi_path(t[inside] / eps, x[inside]) + b.value(th)[inside]
        return out

    def fiber_jac(th, x):
        t = wrapped(th)
        J = np.zeros((len(x), 2, 2))
        J[:] = rot
        inside = np.abs(t) <= eps
        if np.any(inside):
            c = bump(t[inside] / eps)
            J[inside] = (1.0 - c)[:, None, None] * rot + c[:, None, None] * dpsi0(x[inside])
        return J

    def theta_derivative(th, x):
        t = wrapped(th)
        d = b.derivative(th)
        inside = np.abs(t) <= eps
        if np.any(inside):
            dc = dbump(t[inside] / eps) / eps
            d[inside] = d[inside] + dc[:, None] * (psi0(x[inside]) - phi(x[inside]))
        return d

    margin = _disk_boundary_margin(fiber_map)
    if margin <= 0.0:
        raise DomainEscape(f"modified solenoid fiber escapes the disk (margin {margin:.4f})")

    # K = max sampled fiber derivative norm over the path
    tgrid = np.linspace(-1, 1, 81)
    xg = np.linspace(-1, 1, 41)
    X, Y = np.meshgrid(xg, xg)
    pts = np.stack([X.ravel(), Y.ravel()], axis=1)
    pts = pts[np.linalg.norm(pts, axis=1) <= 1.0]
    K = 0.0
    for t in tgrid:
        c = float(bump(t))
        J = (1.0 - c) * rot[None] + c * dpsi0(pts)
        K = max(K, float(np.max(np.linalg.norm(J, ord=2, axis=(1, 2)))))
    warnings = []
    window_min = float(np.min(beta.derivative(np.linspace(-eps, eps, 201))))
    if window_min <= K:
        warnings.append(
            f"base derivative {window_min:.3f} on the window does not dominate K={K:.3f}; "
            "certificate inputs invalid")

    def fiber_inverse(th, xi):
        target = xi
        x = (target - b.value(th)) @ np.linalg.inv(rot).T
        th_arr = np.broadcast_to(np.asarray(th, dtype=float), (len(xi),))
        for _ in range(80):
            r = fiber_map(th_arr, x) - target
            if np.max(np.abs(r)) < 1e-13:
                break
            J = fiber_jac(th_arr, x)
            x = x - np.linalg.solve(J, r[..., None])[..., 0]
            x = np.clip(x, -1.0, 1.0)
        return x

    fam = FiberFamily(
        base_degree=k,
        base_map=beta,
        base_derivative=beta.derivative,
        fiber_map=fiber_map,
        fiber_jac=fiber_jac,
        params={
            "theta_derivative": theta_derivative,
            "base_inverse": lambda thi, m: float(beta.branch_inverse(np.array([thi]), m)[0]),
            "fiber_inverse": fiber_inverse,
        },
        boundary_margin=margin,
        sup_fiber_derivative=K,
        warnings=warnings,
    )
    # invariant cone aperture: fixed point of the worst-case slope recursion
    # w -> (q w + sup|d_theta h|) / beta' in each regime
    th_grid = np.linspace(-eps, eps, 121)
    sup_dth_in = 0.0
    for t in th_grid:
        sup_dth_in = max(sup_dth_in, float(np.max(np.linalg.norm(
            theta_derivative(np.full(len(pts), t), pts), axis=1))))
    sup_dth_out = float(np.max(np.linalg.norm(
        b.derivative(np.linspace(0, 1, 512)), axis=1)))
    gap_in = window_min - K
    w_in = sup_dth_in / gap_in if gap_in > 0 else np.inf
    w_out = sup_dth_out / (beta.m - a)
    aperture = 1.3 * max(w_in, w_out, 1.0)

    params = {"system": "modified_solenoid", "k": k, "a": a, "alpha": alpha,
              "eps": eps, "beta_peak": beta.peak, "beta_eps0": beta.eps0,
              "beta_eps1": beta.eps1, "beta_flat": beta.m,
              "ku": ku, "ks": ks, "r_sat": r_sat, "K": K,
              "fixed_base_points": [0.0, 0.5],
              "verify_steps": 12}
    model = _skew_model("modified_solenoid", fam, params, aperture)
    return model


# ---------------------------------------------------------------------------
# torus systems
# ---------------------------------------------------------------------------

def make_toral_system(auto: ToralAutomorphism):
    """Linear automorphism as a SystemModel (identity factor)."""
    d = auto.dim
    m = auto.matrix.astype(float)
    minv = np.round(np.linalg.inv(m)) if abs(np.linalg.det(m)) == 1 else np.linalg.inv(m)

    un = auto.unstable_matrix()
    st = auto.stable_matrix()

    def f(p):
        return np.mod(p @ m.T, 1.0)

    def jac(p):
        return np.broadcast_to(m, (len(p), d, d))

    def f_inv(p):
        return np.mod(p @ minv.T, 1.0)

    def ident(p):
        return p

    def cs_frame(p):
        return np.broadcast_to(st, (len(p), d, st.shape[1]))

    def uu_hint(p):
        return np.broadcast_to(un[:, 0], (len(p), d))

    return SystemModel(
        name="toral", state_dim=d, cs_dim=auto.stable_dim, uu_dim=auto.unstable_dim,
        domain=f"torus{d}", params={"system": "toral", "matrix": auto.matrix.tolist()},
        cone_aperture=0.2, is_embedding=False,
        _f=f, _jac=jac, _f_inv=f_inv, _base_proj=ident,
        _cs_frame=cs_frame, _uu_hint=uu_hint,
        base_auto=auto,
    )


def make_derived_anosov(a3, amplitude=0.0, wave=(1, 0, 0), direction=None,
                        cone_samples=4096, seed=7):
    """Perturbation of a hyperbolic T^3 automorphism along its contracting plane.

    f(x) = A x + amplitude * sin(2 pi <wave, x>) * v  (mod 1), with v in the
    contracting plane of A, so E^cs stays exactly invariant.  Cone-field
    invariance for the expanding direction is verified on samples; failures
    raise ConeCheckFailed with a witness.
    """
    if isinstance(a3, ToralAutomorphism):
        auto = a3
    else:
        auto = hyperbolic_split(a3)
    if auto.dim != 3 or auto.unstable_dim != 1:
        raise NotHyperbolic("need a 3x3 matrix with one expanding direction")
    m = auto.matrix.astype(float)
    st = auto.stable_matrix()            # 3x2
    un = auto.unstable_matrix()[:, 0]    # 3
    if direction is None:
        v = st[:, 0]
    else:
        v = np.asarray(direction, dtype=float)
        # project onto the contracting plane so the plane stays invariant
        coef, *_ = np.linalg.lstsq(st, v, rcond=None)
        v = st @ coef
        if np.linalg.norm(v) < 1e-12:
            raise ValueError("perturbation direction has no contracting component")
    v = v / np.linalg.norm(v)
    w = np.asarray(wave, dtype=float)
    amp = float(amplitude)

    def f(p):
        ph = np.sin(TWO_PI * (p @ w))
        return np.mod(p @ m.T + amp * ph[:, None] * v[None, :], 1.0)

    def jac(p):
        ph = TWO_PI * amp * np.cos(TWO_PI * (p @ w))
        return m[None, :, :] + ph[:, None, None] * (v[:, None] @ w[None, :])[None, :, :]

    minv = np.round(np.linalg.inv(m))

    def f_inv(p):
        # Newton on the lift, seeded with the linear inverse
        z = np.mod(p @ minv.T, 1.0)
        for _ in range(60):
            r = f(z) - p
            r = (r + 0.5) % 1.0 - 0.5
            if np.max(np.abs(r)) < 1e-13:
                break
            J = jac(z)
            z = np.mod(z - np.linalg.solve(J, r[..., None])[..., 0], 1.0)
        return z

    def ident(p):
        return p

    def cs_frame(p):
        return np.broadcast_to(st, (len(p), 3, 2))

    def uu_hint(p):
        return np.broadcast_to(un, (len(p), 3))

    kappa = np.abs(auto.eigenvalues)
    params = {"system": "derived_anosov", "matrix": auto.matrix.tolist(),
              "amplitude": amp, "wave": list(map(int, wave)),
              "kappa3": float(kappa[0]), "kappa2": float(kappa[1]),
              "kappa1": float(kappa[2]),
              "log_kappa2": float(np.log(kappa[1])),
              "verify_steps": 10}
    model = SystemModel(
        name="derived_anosov", state_dim=3, cs_dim=2, uu_dim=1, domain="torus3",
        params=params, cone_aperture=0.35, is_embedding=False,
        _f=f, _jac=jac, _f_inv=f_inv, _base_proj=ident,
        _cs_frame=cs_frame, _uu_hint=uu_hint,
        base_auto=auto,
    )
    report = verify_partial_hyperbolicity(model, samples=cone_samples, seed=seed)
    if not report["status_ok"]:
        raise ConeCheckFailed(
            f"cone field not invariant at amplitude {amp}",
            point=report["witness_point"], vector=report["witness_vector"])
    return model


# ---------------------------------------------------------------------------
# verification
# ---------------------------------------------------------------------------

def _sample_states(model, n, rng, burn_in=30):
    """Sampled states plus the tail of their forward-orbit history.

    Returns (points, history) where history[j] is the j-th pre-image of the
    points along their own construction orbit (history[0] = points).
    """
    if model.domain == "solid_torus":
        th = rng.random(n)
        r = np.sqrt(rng.random(n))
        ang = TWO_PI * rng.random(n)
        p = np.stack([th, 0.9 * r * np.cos(ang), 0.9 * r * np.sin(ang)], axis=1)
    else:
        p = rng.random((n, model.state_dim))
    history = [p]
    for _ in range(burn_in):
        history.append(model.f(history[-1]))
    history.reverse()
    return history[0], history


def unstable_direction(model, points, depth=30, history=None):
    """Unit unstable direction at points, by pushing a cone vector forward
    along an orbit segment ending at each point.

    ``history`` (as produced by orbit construction: history[j] = j-th
    pre-image) avoids backward iteration; without it the model inverse is
    used, which for embeddings requires the points to lie in f^depth(M).
    """
    p = as_points(points, model.state_dim)
    if history is not None:
        depth = min(depth, len(history) - 1)
        past = history[depth]
    else:
        past = p.copy()
        for _ in range(depth):
            past = model.f_inv(past)
    v = model.uu_hint(past)
    v = v / np.linalg.norm(v, axis=1, keepdims=True)
    for j in range(depth):
        J = model.jac(past)
        v = np.einsum("nij,nj->ni", J, v)
        v = v / np.linalg.norm(v, axis=1, keepdims=True)
        past = history[depth - 1 - j] if history is not None else model.f(past)
    return v


def cs_subspace(model, points, depth=40, tol=1e-8):
    """Orthonormal frames of E^cs at points, by inverse-cocycle iteration.

    Pulls a frame back from the forward orbit; domination makes E^cs
    attracting for the inverse cocycle.  Models with exactly invariant frames
    short-circuit to them.
    """
    p = as_points(points, model.state_dim)
    frame = model.cs_frame(p)
    if frame is not None:
        return frame
    n, d, cd = len(p), model.state_dim, model.cs_dim
    orbit = [p]
    for _ in range(depth):
        orbit.append(model.f(orbit[-1]))
    F = np.broadcast_to(np.eye(d)[:, :cd], (n, d, cd)).copy()
    prev = None
    for j in range(depth, 0, -1):
        J = model.jac(orbit[j - 1])
        F = np.linalg.solve(J, F)
        F, _ = np.linalg.qr(F)
        if j == 1:
            prev = F
    return prev if prev is not None else F


def _cocycle_products(model, pts, steps):
    """N-step Jacobian products J(f^{N-1}x)...J(x), shape (n, d, d)."""
    J = model.jac(pts)
    cur = pts
    for _ in range(steps - 1):
        cur = model.f(cur)
        J = np.einsum("nij,njk->nik", model.jac(cur), J)
    return J


def verify_partial_hyperbolicity(model, samples=4096, seed=0, depth=25, steps=None):
    """Cone report over ``steps``-fold Jacobian products.

    Reports the min expansion on sampled unstable-cone vectors, the max of
    the contraction function omega, the max domination ratio
    |Df^N|cs| * |(Df^N|uu)^-1| (all as per-iterate geometric means), and
    strict cone invariance Df^N(cone) within the given aperture.  Systems
    whose one-step Euclidean contrast is weak set a 'verify_steps' default.
    """
    rng = np.random.default_rng(seed)
    if steps is None:
        steps = int(model.params.get("verify_steps", 1))
    pts, history = _sample_states(model, samples, rng, burn_in=depth + 5)
    J = _cocycle_products(model, pts, steps)
    ap = model.cone_aperture

    u0 = model.uu_hint(pts)
    u0 = u0 / np.linalg.norm(u0, axis=1, keepdims=True)
    frames = model.cs_frame(pts)
    # random cone vectors v = u + ap * t * w, |t| <= 1
    t = rng.uniform(-1.0, 1.0, size=(len(pts), 1))
    wcoef = rng.normal(size=(len(pts), frames.shape[2]))
    wcoef /= np.linalg.norm(wcoef, axis=1, keepdims=True)
    w = np.einsum("ndc,nc->nd", frames, wcoef)
    v = u0 + ap * t * w
    v /= np.linalg.norm(v, axis=1, keepdims=True)

    Jv = np.einsum("nij,nj->ni", J, v)
    expansion_cone = np.linalg.norm(Jv, axis=1) ** (1.0 / steps)

    # cone invariance: split the image vector against the splitting there
    imgs = model.iterate(pts, steps)
    uf = model.uu_hint(imgs)
    uf = uf / np.linalg.norm(uf, axis=1, keepdims=True)
    ff = model.cs_frame(imgs)
    basis = np.concatenate([uf[:, :, None], ff], axis=2)
    coef = np.linalg.solve(basis, Jv[..., None])[..., 0]
    ucomp = np.abs(coef[:, 0])
    ccomp = np.linalg.norm(coef[:, 1:], axis=1)
    slope = ccomp / np.maximum(ucomp, 1e-300)
    invariant = slope < ap * 0.999

    # exact unstable direction for expansion / omega / domination
    nsub = min(len(pts), 512)
    sub = pts[:nsub]
    vu = unstable_direction(model, sub, depth=depth,
                            history=[h[:nsub] for h in history])
    Ju = J[:nsub]
    exp_u = np.linalg.norm(np.einsum("nij,nj->ni", Ju, vu), axis=1)
    fr = model.cs_frame(sub)
    Jcs = np.einsum("nij,njc->nic", Ju, fr)
    cs_norm = np.linalg.norm(Jcs, ord=2, axis=(1, 2))
    omega = np.maximum(1.0 / exp_u, cs_norm / exp_u) ** (1.0 / steps)
    ratio = (cs_norm / exp_u) ** (1.0 / steps)

    ok = bool(np.all(invariant)) and bool(np.max(omega) < 1.0)
    wit = None if ok else int(np.argmin(invariant))
    return {
        "status_ok": ok,
        "steps": int(steps),
        "min_cone_expansion": float(np.min(expansion_cone)),
        "min_unstable_expansion": float(np.min(exp_u) ** (1.0 / steps)),
        "max_omega": float(np.max(omega)),
        "max_domination_ratio": float(np.max(ratio)),
        "max_cone_slope": float(np.max(slope)),
        "cone_aperture": ap,
        "samples": int(samples),
        "witness_point": None if wit is None else pts[wit].tolist(),
        "witness_vector": None if wit is None else v[wit].tolist(),
    }


def partial_volume_expansion(model, samples=2048, seed=3):
    """Min Jacobian of Df restricted to planes E^uu + (one cs direction)."""
    rng = np.random.default_rng(seed)
    pts, history = _sample_states(model, samples, rng)
    vu = unstable_direction(model, pts, depth=25, history=history)
    frames = model.cs_frame(pts)
    J = model.jac(pts)
    worst = np.inf
    for c in range(frames.shape[2]):
        w = frames[:, :, c]
        B = np.stack([vu, w], axis=2)           # n x d x 2
        JB = np.einsum("nij,njk->nik", J, B)
        g0 = np.einsum("nik,nil->nkl", B, B)
        g1 = np.einsum("nik,nil->nkl", JB, JB)
        det = np.sqrt(np.maximum(np.linalg.det(g1) / np.linalg.det(g0), 0.0))
        worst = min(worst, float(np.min(det)))
    return worst
