"""Radial meshes and fields sampled on them."""

from dataclasses import dataclass, field, replace
import math

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError


@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing radii starting at 0, for radial functions on R^n.

    Graded grids use the map ``r(xi) = r_max * sinh(stretch * xi) / sinh(stretch)``
    on a uniform ``xi`` mesh of ``cells`` intervals: spacing is nearly
    uniform near the origin and grows geometrically (ratio
    ``exp(stretch / cells)``) further out.  Because the map is smooth,
    doubling ``cells`` at fixed ``stretch`` halves every spacing, which is
    what the convergence-order tests rely on.
    """

    nodes: np.ndarray
    dimension: int = 6
    stretch: float = 0.0
    cells: int = 0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise DomainError("a grid needs at least two nodes")
        if nodes[0] != 0.0:
            raise DomainError("first node must be r = 0")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("nodes must be strictly increasing")
        if self.dimension < 3 or int(self.dimension) != self.dimension:
            raise DomainError("dimension must be an integer >= 3")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)

    @classmethod
    def uniform(cls, r_max, cells, dimension=6):
        return cls(np.linspace(0.0, r_max, cells + 1), dimension, 0.0, cells)

    @classmethod
    def graded(cls, r_max, h0, cells, dimension=6):
        """Graded grid with first spacing close to ``h0``.

        Solves ``stretch / sinh(stretch) = h0 * cells / r_max`` for the
        stretch; falls back to a uniform grid when ``h0 * cells >= r_max``.
        """
        target = h0 * cells / r_max
        if target >= 1.0:
            return cls.uniform(r_max, cells, dimension)
        kappa = brentq(lambda k: k / math.sinh(k) - target, 1e-8, 700.0)
        return cls.from_stretch(r_max, kappa, cells, dimension)

    @classmethod
    def from_stretch(cls, r_max, stretch, cells, dimension=6):
        xi = np.linspace(0.0, 1.0, cells + 1)
        if stretch == 0.0:
            nodes = r_max * xi
        else:
            nodes = r_max * np.sinh(stretch * xi) / math.sinh(stretch)
        nodes[-1] = r_max
        return cls(nodes, dimension, float(stretch), int(cells))

    def refined(self, factor=2):
        """Same map with ``factor`` times as many cells."""
        if self.cells == 0:
            raise DomainError("only mapped grids can be refined")
        return RadialGrid.from_stretch(self.r_max, self.stretch, self.cells * factor, self.dimension)

    @property
    def r_max(self):
        return float(self.nodes[-1])

    @property
    def size(self):
        return self.nodes.size

    @property
    def h_min(self):
        return float(np.min(np.diff(self.nodes)))

    @property
    def growth_ratio(self):
        """Ratio of consecutive spacings far from the origin."""
        return math.exp(self.stretch / self.cells) if self.cells else 1.0

    def __eq__(self, other):
        return (isinstance(other, RadialGrid) and self.dimension == other.dimension
                and np.array_equal(self.nodes, other.nodes))

    __hash__ = None


@dataclass
class RadialProfile:
    """A scalar radial field sampled on a :class:`RadialGrid` at one time."""

    grid: RadialGrid
    values: np.ndarray
    time: float = 0.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != self.grid.nodes.shape:
            raise DomainError("one value per grid node is required")
        if not np.all(np.isfinite(self.values)):
            raise DomainError("profile values must be finite")

    @property
    def r(self):
        return self.grid.nodes

    def at_origin(self):
        return float(self.values[0])

    def with_values(self, values):
        return replace(self, values=np.asarray(values, dtype=float))

    def interpolant(self):
        """Cubic spline with zero slope at the origin, zero outside ``r_max``."""
        from scipy.interpolate import CubicSpline

        spline = CubicSpline(self.r, self.values, bc_type=((1, 0.0), "not-a-knot"))
        r_max = self.grid.r_max

        def f(s):
            s = np.asarray(s, dtype=float)
            return np.where(s <= r_max, spline(np.minimum(s, r_max)), 0.0)

        return f

    def to_csv(self, path, value_name="value"):
        write_columns(path, ["r", value_name], [self.r, self.values])

    @classmethod
    def from_csv(cls, path, dimension=6, time=0.0):
        header, cols = read_columns(path)
        if len(header) != 2 or header[0] != "r":
            raise DomainError(f"{path}: expected header 'r,<name>', got {','.join(header)}")
        return cls(RadialGrid(cols[0], dimension), cols[1], time)


def fmt(x):
    """17-significant-digit decimal, round-trip exact for doubles."""
    return format(float(x), ".17g")


def write_columns(path, header, columns):
    columns = [np.asarray(c) for c in columns]
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in zip(*columns):
            fh.write(",".join(v if isinstance(v, str) else fmt(v) for v in row) + "\n")


def read_columns(path):
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines:
        raise DomainError(f"{path}: empty file")
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    if any(len(r) != len(header) for r in rows):
        raise DomainError(f"{path}: ragged rows")
    cols = [np.array([float(r[j]) for r in rows]) for j in range(len(header))]
    return header, cols


def fd_weights(x0, xs, order):
    """Finite-difference weights at ``x0`` for the ``order``-th derivative (Fornberg)."""
    xs = np.asarray(xs, dtype=float)
    n = xs.size
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, xs[0] - x0
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, xs[i] - x0
        for j in range(i):
            c3 = xs[i] - xs[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def radial_laplacian(values, nodes, dimension=6):
    """Central-difference ``u'' + (n-1)/r u'`` on a (possibly graded) mesh.

    Interior nodes use the three-point non-uniform stencils; the origin uses
    the even-extension limit ``n u''(0) = 2n (u_1 - u_0) / h_1^2``; the last
    node uses a one-sided four-point stencil.  Second order on smoothly
    mapped meshes.
    """
    u = np.asarray(values, dtype=float)
    r = np.asarray(nodes, dtype=float)
    out = np.empty_like(u)
    hm = r[1:-1] - r[:-2]
    hp = r[2:] - r[1:-1]
    d2 = 2.0 * ((u[2:] - u[1:-1]) / hp - (u[1:-1] - u[:-2]) / hm) / (hp + hm)
    d1 = (hm * hm * u[2:] - hp * hp * u[:-2] + (hp * hp - hm * hm) * u[1:-1]) / (hp * hm * (hp + hm))
    out[1:-1] = d2 + (dimension - 1) / r[1:-1] * d1
    out[0] = 2.0 * dimension * (u[1] - u[0]) / (r[1] - r[0]) ** 2
    tail = slice(-4, None) if u.size >= 4 else slice(None)
    xs = r[tail]
    out[-1] = (fd_weights(r[-1], xs, 2) @ u[tail]
               + (dimension - 1) / r[-1] * (fd_weights(r[-1], xs, 1) @ u[tail]))
    return out
