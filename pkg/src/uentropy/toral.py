"""Hyperbolic toral automorphisms, their splittings, and Markov partitions.

Supported partition bases:

* the circle with a degree-k covering map (k arcs, full-branch transitions);
* T^2 automorphisms integrally conjugate to a power of [[1,1],[1,0]]
  (this covers the trace-3 class, e.g. [[2,1],[1,1]], and the Fibonacci
  matrix itself).

For the torus case the cells are boxes in eigencoordinates

    xi(x, y) = x + g*y,   eta(x, y) = -x + phi*y        (g = 1/phi)

pulled back through the integral conjugacy.  The two base boxes

    B1 = [0, phi) x [0, 1),    B2 = [0, 1) x [-g, 0)

tile the plane under the lattice generated by w1 = (1,-1), w2 = (g, phi)
(the xi/eta-images of the canonical basis), and their stable/unstable sides
lie on the invariant axes through the origin.  All box data is kept as exact
elements of Q(sqrt5); floating shadows drive the hot paths.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
import json

import numpy as np

from .errors import (
    ConstructionFailed,
    NotHyperbolic,
    NotUnimodular,
    UnsupportedDimension,
    UnsupportedMatrix,
)
from .quadratic import Quad, golden

_SQRT5 = 5.0 ** 0.5
_PHI = (1.0 + _SQRT5) / 2.0
_G = (_SQRT5 - 1.0) / 2.0


# ---------------------------------------------------------------------------
# hyperbolic splitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ToralAutomorphism:
    """Integer hyperbolic matrix with its invariant splitting data.

    ``unstable_basis``/``stable_basis`` are lists of real vectors spanning the
    expanding/contracting invariant subspaces; a complex-conjugate eigenvalue
    pair contributes the real and imaginary parts of one eigenvector.
    ``unstable_rates`` holds the per-direction expansion moduli, so
    ``base_entropy == sum(log(unstable_rates))``.
    """

    matrix: np.ndarray
    det_sign: int
    unstable_basis: list
    stable_basis: list
    unstable_rates: list
    base_entropy: float
    eigenvalues: np.ndarray

    @property
    def dim(self):
        return self.matrix.shape[0]

    @property
    def unstable_dim(self):
        return len(self.unstable_basis)

    @property
    def stable_dim(self):
        return len(self.stable_basis)

    def unstable_matrix(self):
        return np.array(self.unstable_basis).T

    def stable_matrix(self):
        return np.array(self.stable_basis).T


def _real_blocks(values, vectors, selector):
    """Real basis vectors and moduli for the selected eigenvalues."""
    basis, rates = [], []
    used = set()
    n = len(values)
    for i in range(n):
        if i in used or not selector(values[i]):
            continue
        lam, v = values[i], vectors[:, i]
        if abs(lam.imag) < 1e-12:
            vr = np.real(v)
            vr = vr / np.linalg.norm(vr)
            j = int(np.argmax(np.abs(vr)))
            if vr[j] < 0:
                vr = -vr
            basis.append(vr)
            rates.append(abs(lam))
            used.add(i)
        else:
            # find the conjugate partner
            partner = None
            for j2 in range(n):
                if j2 != i and j2 not in used and abs(values[j2] - np.conj(lam)) < 1e-9:
                    partner = j2
                    break
            j = int(np.argmax(np.abs(v)))
            v = v * np.exp(-1j * np.angle(v[j]))
            re, im = np.real(v), np.imag(v)
            re = re / np.linalg.norm(re)
            im = im / np.linalg.norm(im)
            basis.extend([re, im])
            rates.extend([abs(lam), abs(lam)])
            used.add(i)
            if partner is not None:
                used.add(partner)
    return basis, rates


def hyperbolic_split(matrix) -> ToralAutomorphism:
    """Split an integer unimodular matrix into expanding/contracting data.

    Raises ``NotUnimodular`` if ``|det| != 1`` and ``NotHyperbolic`` if any
    eigenvalue modulus is within 1e-9 of 1.
    """
    m = np.asarray(matrix)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if not np.allclose(m, np.round(m)):
        raise ValueError("matrix must have integer entries")
    m = np.round(m).astype(np.int64)
    det = int(round(np.linalg.det(m.astype(float))))
    if abs(det) != 1:
        raise NotUnimodular(f"|det| = {abs(det)} != 1")
    values, vectors = np.linalg.eig(m.astype(float))
    if np.any(np.abs(np.abs(values) - 1.0) < 1e-9):
        raise NotHyperbolic("eigenvalue modulus within 1e-9 of the unit circle")

    ub, urates = _real_blocks(values, vectors, lambda lam: abs(lam) > 1.0)
    sb, _ = _real_blocks(values, vectors, lambda lam: abs(lam) < 1.0)
    auto = ToralAutomorphism(
        matrix=m,
        det_sign=det,
        unstable_basis=ub,
        stable_basis=sb,
        unstable_rates=urates,
        base_entropy=float(np.sum(np.log(urates))),
        eigenvalues=values[np.argsort(-np.abs(values))],
    )
    _check_invariance(auto)
    return auto


def _check_invariance(auto, tol=1e-12):
    m = auto.matrix.astype(float)
    for basis in (auto.unstable_basis, auto.stable_basis):
        if not basis:
            continue
        span = np.array(basis).T
        proj = span @ np.linalg.lstsq(span, np.eye(span.shape[0]), rcond=None)[0]
        for v in basis:
            av = m @ v
            res = np.linalg.norm(av - proj @ av)
            if res > tol * max(1.0, np.linalg.norm(av)):
                raise ConstructionFailed(f"splitting invariance residual {res:.2e}")


# ---------------------------------------------------------------------------
# Markov structure
# ---------------------------------------------------------------------------

@dataclass
class BoxCell:
    """Cell of the torus partition: a box in (xi, eta) coordinates."""

    xi0: Quad
    eta0: Quad
    len_u: Quad
    len_s: Quad
    # float shadows
    fxi0: float = field(init=False)
    feta0: float = field(init=False)
    flen_u: float = field(init=False)
    flen_s: float = field(init=False)

    def __post_init__(self):
        self.fxi0 = float(self.xi0)
        self.feta0 = float(self.eta0)
        self.flen_u = float(self.len_u)
        self.flen_s = float(self.len_s)


class MarkovStructure:
    """Markov cells, plaque accessors and transition data for the factor.

    Two kinds: ``circle`` (degree-k covering of S^1, cells are arcs) and
    ``torus2`` (box cells in eigencoordinates).  Points on cell boundaries get
    a deterministic assignment through half-open boxes/arcs.
    """

    def __init__(self, kind, **data):
        self.kind = kind
        self.__dict__.update(data)

    # -- generic interface ----------------------------------------------------

    @property
    def n_cells(self):
        if self.kind == "circle":
            return self.k
        return len(self.cells)

    def pf_value(self):
        if self.kind == "circle":
            return float(self.k)
        vals = np.linalg.eigvals(self.transition.astype(float))
        return float(np.max(np.real(vals)))

    def pf_entropy(self):
        return float(np.log(self.pf_value()))

    # -- circle ----------------------------------------------------------------

    def _circle_cell_of(self, theta):
        t = np.mod(np.asarray(theta, dtype=float), 1.0)
        return np.minimum((t * self.k).astype(np.int64), self.k - 1)

    # -- torus2 ----------------------------------------------------------------

    def functionals(self, points):
        """(xi, eta) coordinates of torus points, shape (N, 2) -> (N,), (N,)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        q = p @ self.pinv_t  # conjugacy applied first
        xi = q[:, 0] + _G * q[:, 1]
        eta = -q[:, 0] + _PHI * q[:, 1]
        return xi, eta

    def _locate_arrays(self, xi, eta):
        """Vector locate: cell id, lattice shift, and in-cell (su, ss)."""
        q0 = (xi + eta) / _SQRT5
        p0 = xi - q0 * _G
        n = xi.shape[0]
        ids = np.full(n, -1, dtype=np.int64)
        su = np.zeros(n)
        ss = np.zeros(n)
        snap = 1e-12
        for dp in (-1, 0, 1, -2, 2):
            for dq in (-1, 0, 1, -2, 2):
                undone = ids < 0
                if not np.any(undone):
                    return ids, su, ss
                pp = np.round(p0[undone]) + dp
                qq = np.round(q0[undone]) + dq
                lx = xi[undone] - pp - qq * _G
                ly = eta[undone] + pp - qq * _PHI
                for ci, c in enumerate(self.cells):
                    u = lx - c.fxi0
                    s = ly - c.feta0
                    u = np.where((u > -snap) & (u < 0), 0.0, u)
                    s = np.where((s > -snap) & (s < 0), 0.0, s)
                    hit = (u >= 0) & (u < c.flen_u) & (s >= 0) & (s < c.flen_s)
                    if np.any(hit):
                        idx = np.flatnonzero(undone)[hit]
                        fresh = ids[idx] < 0
                        idx = idx[fresh]
                        ids[idx] = ci
                        su[idx] = u[hit][fresh]
                        ss[idx] = s[hit][fresh]
        return ids, su, ss

    def cell_of(self, points):
        """Cell index for each point; -1 if unassigned (should not happen)."""
        if self.kind == "circle":
            return self._circle_cell_of(points)
        xi, eta = self.functionals(points)
        ids, _, _ = self._locate_arrays(xi, eta)
        return ids

    def locate(self, points):
        """(cell ids, su, ss) with su/ss the in-cell unstable/stable offsets."""
        if self.kind == "circle":
            t = np.mod(np.asarray(points, dtype=float), 1.0)
            ids = self._circle_cell_of(t)
            return ids, t - ids / self.k, np.zeros_like(t)
        xi, eta = self.functionals(points)
        return self._locate_arrays(xi, eta)

    def embed(self, cell_id, su, ss):
        """Torus point of in-cell coordinates (inverse of ``locate``)."""
        c = self.cells[cell_id]
        xi = c.fxi0 + su
        eta = c.feta0 + ss
        xy = xi * self.u_xy + eta * self.s_xy
        return np.mod(xy, 1.0)

    def u_extent(self, cell_id):
        if self.kind == "circle":
            return 1.0 / self.k
        return self.cells[cell_id].flen_u

    def unstable_plaque_segment(self, point):
        """(cell id, start point, u-direction vector, length) through ``point``."""
        if self.kind == "circle":
            t = float(np.mod(point, 1.0))
            i = int(self._circle_cell_of(t))
            return i, i / self.k, np.array([1.0]), 1.0 / self.k
        ids, su, ss = self.locate(np.atleast_2d(point))
        i = int(ids[0])
        if i < 0:
            raise ConstructionFailed("point could not be located in any cell")
        c = self.cells[i]
        start = self.embed(i, 0.0, float(ss[0]))
        return i, start, self.u_xy, c.flen_u

    def stable_plaque_segment(self, point):
        if self.kind == "circle":
            t = float(np.mod(point, 1.0))
            i = int(self._circle_cell_of(t))
            return i, t, np.array([0.0]), 0.0
        ids, su, ss = self.locate(np.atleast_2d(point))
        i = int(ids[0])
        c = self.cells[i]
        start = self.embed(i, float(su[0]), 0.0)
        return i, start, self.s_xy, c.flen_s

    def bracket(self, a, b):
        """Local product [a, b]: intersection of W^u_i(a) with W^s_i(b).

        Both points must lie in the same cell.
        """
        if self.kind == "circle":
            return float(np.mod(b, 1.0))
        ia, sua, ssa = self.locate(np.atleast_2d(a))
        ib, sub, ssb = self.locate(np.atleast_2d(b))
        if ia[0] != ib[0]:
            raise ValueError("bracket arguments in different cells")
        return self.embed(int(ia[0]), float(sub[0]), float(ssa[0]))

    # -- boundary -------------------------------------------------------------

    def stable_boundary_segments(self):
        """List of (start, end) torus points of the stable boundary."""
        if self.kind == "circle":
            return [(np.array([i / self.k]), np.array([i / self.k])) for i in range(self.k)]
        segs = []
        for c in self.cells:
            for ux in (0.0, c.flen_u):
                p0 = (c.fxi0 + ux) * self.u_xy + c.feta0 * self.s_xy
                p1 = (c.fxi0 + ux) * self.u_xy + (c.feta0 + c.flen_s) * self.s_xy
                segs.append((p0, p1))
        return segs

    def unstable_boundary_segments(self):
        if self.kind == "circle":
            return []
        segs = []
        for c in self.cells:
            for sy in (0.0, c.flen_s):
                p0 = c.fxi0 * self.u_xy + (c.feta0 + sy) * self.s_xy
                p1 = (c.fxi0 + c.flen_u) * self.u_xy + (c.feta0 + sy) * self.s_xy
                segs.append((p0, p1))
        return segs

    # -- branch decomposition ---------------------------------------------------

    def branch_of(self, cell_ids, su):
        """Branch index and image-local coordinate under the factor map.

        For a point at unstable offset ``su`` in cell ``i``, the image plaque
        decomposition gives the branch (crossing) index, the target cell, and
        the unstable offset within the target plaque.
        """
        cell_ids = np.asarray(cell_ids)
        su = np.asarray(su, dtype=float)
        if self.kind == "circle":
            # plaque [i/k,(i+1)/k) maps onto the whole circle; pieces are the k arcs
            pos = np.mod(su * self.k, 1.0)
            branch = np.minimum((pos * self.k).astype(np.int64), self.k - 1)
            return branch, branch, pos - branch / self.k
        branch = np.zeros(len(su), dtype=np.int64)
        target = np.zeros(len(su), dtype=np.int64)
        out_su = np.zeros(len(su))
        lam_abs = abs(self.lam)
        for i in range(self.n_cells):
            sel = cell_ids == i
            if not np.any(sel):
                continue
            offs = self.crossing_offsets[i]
            tgts = self.crossings[i]
            if self.lam > 0:
                pos = su[sel] * lam_abs
            else:
                pos = (self.cells[i].flen_u - su[sel]) * lam_abs
            b = np.searchsorted(offs, pos, side="right") - 1
            b = np.clip(b, 0, len(tgts) - 1)
            branch[sel] = b
            target[sel] = np.asarray(tgts)[b]
            out_su[sel] = pos - np.asarray(offs)[b]
        return branch, target, out_su

    def branch_weights(self, cell_id):
        """Reference-measure branch masses for a plaque of ``cell_id``."""
        if self.kind == "circle":
            return np.full(self.k, 1.0 / self.k)
        tgts = self.crossings[cell_id]
        li = self.cells[cell_id].flen_u
        return np.array([self.cells[j].flen_u for j in tgts]) / (self.lam * li)

    def cell_areas(self):
        if self.kind == "circle":
            return np.full(self.k, 1.0 / self.k)
        return np.array([c.flen_u * c.flen_s for c in self.cells]) / _SQRT5

    def lebesgue_cylinder_masses(self, depth):
        """Masses of depth-``depth`` cell-itinerary cylinders under Lebesgue."""
        if self.kind == "circle":
            n = self.k ** depth
            return {tuple(_digits(i, self.k, depth)): 1.0 / n for i in range(n)}
        probs = {}
        areas = self.cell_areas()
        words = [((i,), areas[i]) for i in range(self.n_cells)]
        for _ in range(depth - 1):
            nxt = []
            for word, mass in words:
                i = word[-1]
                li = self.cells[i].flen_u
                for j in self.crossings[i]:
                    pj = self.cells[j].flen_u / (self.lam * li)
                    nxt.append((word + (j,), mass * pj))
            words = nxt
        for word, mass in words:
            probs[word] = probs.get(word, 0.0) + mass
        return probs

    # -- export ----------------------------------------------------------------

    def export_json(self):
        """Partition geometry, transition matrix and PF data as a JSON string."""
        out = {"kind": self.kind, "n_cells": self.n_cells,
               "pf_value": self.pf_value(), "pf_entropy": self.pf_entropy()}
        if self.kind == "circle":
            out["cells"] = [{"arc": [i / self.k, (i + 1) / self.k]} for i in range(self.k)]
            out["transition"] = [[1] * self.k for _ in range(self.k)]
        else:
            cells = []
            for c in self.cells:
                corners_eig = [
                    (c.fxi0, c.feta0),
                    (c.fxi0 + c.flen_u, c.feta0),
                    (c.fxi0 + c.flen_u, c.feta0 + c.flen_s),
                    (c.fxi0, c.feta0 + c.flen_s),
                ]
                corners_torus = [
                    list(np.mod(x * self.u_xy + y * self.s_xy, 1.0)) for x, y in corners_eig
                ]
                cells.append({
                    "eigen_corners": [list(v) for v in corners_eig],
                    "torus_corners": corners_torus,
                    "exact": {
                        "xi0": [str(c.xi0.a), str(c.xi0.b)],
                        "eta0": [str(c.eta0.a), str(c.eta0.b)],
                        "len_u": [str(c.len_u.a), str(c.len_u.b)],
                        "len_s": [str(c.len_s.a), str(c.len_s.b)],
                    },
                })
            out["cells"] = cells
            out["transition"] = self.transition.tolist()
            out["crossings"] = [list(map(int, cr)) for cr in self.crossings]
        return json.dumps(out, indent=2, sort_keys=True)


def _digits(n, k, depth):
    d = []
    for _ in range(depth):
        d.append(n % k)
        n //= k
    return d[::-1]


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------

def _fib_power(n):
    f = np.array([[1, 1], [1, 0]], dtype=np.int64)
    out = np.eye(2, dtype=np.int64)
    for _ in range(n):
        out = out @ f
    return out


def _nullspace_integer(M):
    """Exact rational nullspace basis of an integer matrix, denominators cleared."""
    rows = [[Fraction(int(v)) for v in row] for row in M]
    ncols = len(rows[0])
    pivots = []
    r = 0
    for c in range(ncols):
        piv = None
        for i in range(r, len(rows)):
            if rows[i][c] != 0:
                piv = i
                break
        if piv is None:
            continue
        rows[r], rows[piv] = rows[piv], rows[r]
        pv = rows[r][c]
        rows[r] = [v / pv for v in rows[r]]
        for i in range(len(rows)):
            if i != r and rows[i][c] != 0:
                f = rows[i][c]
                rows[i] = [a - f * b for a, b in zip(rows[i], rows[r])]
        pivots.append(c)
        r += 1
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        v = [Fraction(0)] * ncols
        v[fc] = Fraction(1)
        for ri, pc in enumerate(pivots):
            v[pc] = -rows[ri][fc]
        den = 1
        for x in v:
            den = den * x.denominator // np.gcd(den, x.denominator)
        basis.append(np.array([int(x * den) for x in v], dtype=np.int64))
    return basis


def _find_conjugacy(m):
    """Find (P, n, sign) with m = sign * P F^n P^{-1}, P integer, |det P| = 1."""
    tr = int(np.trace(m))
    det = int(round(np.linalg.det(m.astype(float))))
    for n in range(1, 24):
        fn = _fib_power(n)
        for sgn in (1, -1):
            c = sgn * fn
            if int(np.trace(c)) != tr or int(round(np.linalg.det(c.astype(float)))) != det:
                continue
            # solve m P = P c for integer P: kron system (I (x) m - c^T (x) I) vec(P) = 0
            k = np.kron(np.eye(2, dtype=np.int64), m) - np.kron(c.T, np.eye(2, dtype=np.int64))
            basis = _nullspace_integer(k)
            if not basis:
                continue
            for a in range(-12, 13):
                for b in range(-12, 13):
                    if a == 0 and b == 0:
                        continue
                    v = a * basis[0] + (b * basis[1] if len(basis) > 1 else 0)
                    p = np.array(v, dtype=np.int64).reshape(2, 2)
                    if abs(int(round(np.linalg.det(p.astype(float))))) == 1:
                        return p, n, sgn
    return None


def _base_boxes():
    g, phi, _ = golden()
    one = Quad(1)
    b1 = BoxCell(Quad(0), Quad(0), phi, one)
    b2 = BoxCell(Quad(0), -g, one, g)
    return [b1, b2]


def _locate_exact(cells, xi, eta):
    """Exact locate in Q(sqrt5): (cell index, p, q, su, ss) or None."""
    g, phi, _ = golden()
    fq = float(xi) + float(eta)
    q0 = int(round(fq / _SQRT5))
    p0 = int(round(float(xi) - q0 * _G))
    for dp in range(-2, 3):
        for dq in range(-2, 3):
            p, q = p0 + dp, q0 + dq
            lx = xi - p - g * q
            ly = eta + p - phi * q
            for ci, c in enumerate(cells):
                su = lx - c.xi0
                ss = ly - c.eta0
                if Quad(0) <= su < c.len_u and Quad(0) <= ss < c.len_s:
                    return ci, p, q, su, ss
    return None


def _exact_crossings(cells, lam_exact, mu_exact):
    """Per-cell ordered crossing targets under (xi,eta) -> (lam xi, mu eta).

    Requires images of plaques to decompose into full plaques; raises
    ``ConstructionFailed`` otherwise.
    """
    g, phi, _ = golden()
    half = Quad(Fraction(1, 2))
    crossings = []
    for c in cells:
        # image of the plaque at mid-stable height; walk in increasing xi
        eta_img = mu_exact * (c.eta0 + half * c.len_s)
        lo = lam_exact * c.xi0
        hi = lam_exact * (c.xi0 + c.len_u)
        if hi < lo:
            lo, hi = hi, lo
        xi_start = lo
        xi_len = hi - lo
        t = Quad(0)
        targets = []
        guard = 0
        while t < xi_len:
            loc = _locate_exact(cells, xi_start + t, eta_img)
            if loc is None:
                raise ConstructionFailed("image point not located in any cell")
            ci, _, _, su, _ = loc
            if su != Quad(0):
                raise ConstructionFailed("plaque image does not start at a plaque boundary")
            targets.append(ci)
            t = t + cells[ci].len_u
            guard += 1
            if guard > 4096:
                raise ConstructionFailed("crossing walk did not terminate")
        if t != xi_len:
            raise ConstructionFailed("plaque image does not end at a plaque boundary")
        crossings.append(targets)
    return crossings


def _intersect_boxes(cells_a, cells_b):
    """All nonempty intersections of boxes modulo the lattice, as boxes."""
    g, phi, _ = golden()
    w1 = (Quad(1), Quad(-1))
    w2 = (g, phi)
    out = []
    for ca in cells_a:
        for cb in cells_b:
            for p in range(-4, 5):
                for q in range(-4, 5):
                    bx0 = cb.xi0 + p * w1[0] + q * w2[0]
                    by0 = cb.eta0 + p * w1[1] + q * w2[1]
                    x0 = bx0 if bx0 > ca.xi0 else ca.xi0
                    y0 = by0 if by0 > ca.eta0 else ca.eta0
                    xa1 = ca.xi0 + ca.len_u
                    xb1 = bx0 + cb.len_u
                    x1 = xa1 if xa1 < xb1 else xb1
                    ya1 = ca.eta0 + ca.len_s
                    yb1 = by0 + cb.len_s
                    y1 = ya1 if ya1 < yb1 else yb1
                    if x0 < x1 and y0 < y1:
                        out.append(BoxCell(x0, y0, x1 - x0, y1 - y0))
    return out


def _map_boxes(cells, lam_exact, mu_exact):
    """Images of box cells under the diagonal action (lam xi, mu eta)."""
    out = []
    for c in cells:
        x0 = lam_exact * c.xi0
        x1 = lam_exact * (c.xi0 + c.len_u)
        y0 = mu_exact * c.eta0
        y1 = mu_exact * (c.eta0 + c.len_s)
        if x1 < x0:
            x0, x1 = x1, x0
        if y1 < y0:
            y0, y1 = y1, y0
        out.append(BoxCell(x0, y0, x1 - x0, y1 - y0))
    return out


def build_markov_structure(base, refine=0):
    """Markov structure for a circle degree or a supported T^2 automorphism.

    ``base`` is either an integer k >= 2 (degree-k circle covering) or a
    ``ToralAutomorphism`` of dimension 2.  ``refine`` joins the partition with
    that many backward images, shrinking the unstable diameter of the cells.
    """
    if isinstance(base, (int, np.integer)):
        k = int(base)
        if k < 2:
            raise ValueError("circle degree must be >= 2")
        return MarkovStructure("circle", k=k)
    auto = base
    if auto.dim != 2:
        raise UnsupportedDimension(
            "no Markov partition is constructed for d >= 3; "
            "T^3 systems use box-cover itinerary cylinders instead")
    conj = _find_conjugacy(auto.matrix)
    if conj is None:
        raise UnsupportedMatrix(
            "matrix is not integrally conjugate to +-[[1,1],[1,0]]^n with n <= 23")
    p, n, sgn = conj
    g, phi, _ = golden()
    lam_exact = Quad(1)
    mu_exact = Quad(1)
    for _ in range(n):
        lam_exact = lam_exact * phi
        mu_exact = mu_exact * (-g)
    if sgn < 0:
        lam_exact, mu_exact = -lam_exact, -mu_exact

    cells = _base_boxes()
    if lam_exact.sign() < 0 or mu_exact.sign() < 0:
        # base boxes are Markov for the square; join with one forward and one
        # backward image to absorb the orientation flips
        fwd = _map_boxes(cells, lam_exact, mu_exact)
        lam_inv = Quad(1) / lam_exact
        mu_inv = Quad(1) / mu_exact
        bwd = _map_boxes(cells, lam_inv, mu_inv)
        cells = _intersect_boxes(_intersect_boxes(cells, fwd), bwd)
    for _ in range(int(refine)):
        lam_inv = Quad(1) / lam_exact
        mu_inv = Quad(1) / mu_exact
        cells = _intersect_boxes(cells, _map_boxes(cells, lam_inv, mu_inv))

    crossings = _exact_crossings(cells, lam_exact, mu_exact)
    ncell = len(cells)
    transition = np.zeros((ncell, ncell), dtype=np.int64)
    offsets = []
    for i, targets in enumerate(crossings):
        offs = [0.0]
        for j in targets:
            transition[i, j] += 1
            offs.append(offs[-1] + cells[j].flen_u)
        offsets.append(np.array(offs[:-1]))

    # |det P| = 1 so the matrix inverse is integer; round to make it exact
    pinv = np.round(np.linalg.inv(p.astype(float)))
    if not np.allclose(p.astype(float) @ pinv, np.eye(2)):
        raise ConstructionFailed("conjugator inverse is not integral")
    u_xy = p.astype(float) @ (np.array([_PHI, 1.0]) / _SQRT5)
    s_xy = p.astype(float) @ (np.array([-_G, 1.0]) / _SQRT5)

    ms = MarkovStructure(
        "torus2",
        auto=auto,
        cells=cells,
        conjugator=p,
        pinv_t=pinv.T,
        u_xy=u_xy,
        s_xy=s_xy,
        lam=float(lam_exact),
        mu=float(mu_exact),
        crossings=crossings,
        crossing_offsets=offsets,
        transition=transition,
    )
    _verify_structure(ms)
    return ms


def _verify_structure(ms, tol=1e-9):
    """Construction-time checks: PF value, tiling, Markov sampling."""
    lam_mod = abs(ms.lam)
    if abs(ms.pf_value() - lam_mod) > tol * lam_mod:
        raise ConstructionFailed(
            f"PF eigenvalue {ms.pf_value():.12f} != expansion {lam_mod:.12f}")
    # tiling: random points must locate uniquely
    rng = np.random.default_rng(12345)
    pts = rng.random((512, 2))
    ids = ms.cell_of(pts)
    if np.any(ids < 0):
        raise ConstructionFailed("tiling check failed: unlocated points")
    # PF eigenvector of u-lengths
    lens = np.array([c.flen_u for c in ms.cells])
    resid = np.abs(ms.transition.astype(float) @ lens - lam_mod * lens)
    if np.max(resid) > 1e-9:
        raise ConstructionFailed("u-length PF identity failed")


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------

def _point_segment_distance_torus(points, seg_start, seg_end):
    """Min torus distance from points (N,2) to one segment, over lattice shifts."""
    a = np.asarray(seg_start, dtype=float)
    b = np.asarray(seg_end, dtype=float)
    d = b - a
    dd = float(d @ d)
    best = np.full(len(points), np.inf)
    for sx in (-1, 0, 1):
        for sy in (-1, 0, 1):
            rel = points - (a + np.array([sx, sy]))
            if dd == 0.0:
                dist = np.linalg.norm(rel, axis=1)
            else:
                t = np.clip(rel @ d / dd, 0.0, 1.0)
                dist = np.linalg.norm(rel - t[:, None] * d, axis=1)
            best = np.minimum(best, dist)
    return best


def boundary_null_check(ms, auto=None, n_lines=20, deltas=(1e-2, 1e-3, 1e-4), seed=0):
    """Estimate how much unstable-segment length lies near the stable boundary.

    For each delta, samples points on random unstable segments and measures the
    fraction within delta of the stable boundary; fits fraction ~ slope*delta +
    intercept.  A near-zero intercept certifies a null boundary at scale 0.
    """
    rng = np.random.default_rng(seed)
    deltas = np.asarray(sorted(deltas, reverse=True), dtype=float)
    fractions = np.zeros(len(deltas))
    if ms.kind == "circle":
        n_pts = 20000
        theta = rng.random(n_pts)
        bpts = np.arange(ms.k) / ms.k
        dist = np.min(np.abs(((theta[:, None] - bpts[None, :]) + 0.5) % 1.0 - 0.5), axis=1)
        for di, d in enumerate(deltas):
            fractions[di] = np.mean(dist < d)
    else:
        segs = ms.stable_boundary_segments()
        per_line = 400
        pts = []
        for _ in range(n_lines):
            anchor = rng.random(2)
            i, start, udir, ulen = ms.unstable_plaque_segment(anchor)
            t = rng.random(per_line) * ulen
            pts.append(np.mod(start[None, :] + t[:, None] * udir[None, :], 1.0))
        pts = np.concatenate(pts, axis=0)
        dist = np.full(len(pts), np.inf)
        for s0, s1 in segs:
            dist = np.minimum(dist, _point_segment_distance_torus(pts, s0, s1))
        for di, d in enumerate(deltas):
            fractions[di] = np.mean(dist < d)
    # least squares fit fraction = slope*delta + intercept
    A = np.stack([deltas, np.ones_like(deltas)], axis=1)
    coef, *_ = np.linalg.lstsq(A, fractions, rcond=None)
    return {
        "deltas": deltas.tolist(),
        "fractions": fractions.tolist(),
        "slope": float(coef[0]),
        "intercept": float(coef[1]),
    }
