"""Model definitions: Clifford families, periodic coefficient/potential fields,
antidot mass profiles, and the periodic computation box.

Conventions used throughout the package:
  * positions live in R^d, distances use the sup norm |x| = max_j |x_j|;
  * unit-cell coordinates are u = x - round_half_down(x) in [-1/2, 1/2)^d;
  * field evaluators are vectorized maps from (..., d) cell coordinates to
    (..., n, n) Hermitian matrices.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import InvalidInputError, UnsupportedConfigError

HERM_TOL = 1e-12

PAULI_1 = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_2 = np.array([[0, 1j], [-1j, 0]], dtype=complex)
PAULI_3 = np.array([[1, 0], [0, -1]], dtype=complex)


def _dirac_alphas():
    alphas = []
    for s in (PAULI_1, PAULI_2, PAULI_3):
        a = np.zeros((4, 4), dtype=complex)
        a[:2, 2:] = s
        a[2:, :2] = s
        alphas.append(a)
    beta = np.diag([1.0, 1.0, -1.0, -1.0]).astype(complex)
    return alphas, beta


def is_hermitian(a, tol=HERM_TOL):
    return np.linalg.norm(a - a.conj().T, 2) <= tol * max(1.0, np.linalg.norm(a, 2))


@dataclass(frozen=True)
class CliffordSet:
    """A family of d Hermitian n x n matrices defining the first-order symbol.

    ``mass_matrix`` is the canonical gap-opening channel (anticommutes with
    every sigma); it is required by mass presets and the Wilson regulator.
    """

    dim: int
    comp: int
    sigmas: tuple
    mass_matrix: Optional[np.ndarray] = None
    name: str = "custom"

    def __post_init__(self):
        if self.dim < 1 or self.comp < 1:
            raise InvalidInputError("dim and comp must be positive")
        if len(self.sigmas) != self.dim:
            raise InvalidInputError(
                f"expected {self.dim} sigma matrices, got {len(self.sigmas)}"
            )
        for j, s in enumerate(self.sigmas):
            s = np.asarray(s)
            if s.shape != (self.comp, self.comp):
                raise InvalidInputError(f"sigma[{j}] has shape {s.shape}")
            if not is_hermitian(s):
                raise InvalidInputError(f"sigma[{j}] is not Hermitian")
        if self.mass_matrix is not None:
            m = np.asarray(self.mass_matrix)
            if m.shape != (self.comp, self.comp) or not is_hermitian(m):
                raise InvalidInputError("mass_matrix must be Hermitian n x n")

    def symbol(self, p):
        """sigma . p for p of shape (..., d); returns (..., n, n)."""
        p = np.asarray(p, dtype=float)
        out = np.zeros(p.shape[:-1] + (self.comp, self.comp), dtype=complex)
        for j in range(self.dim):
            out += p[..., j, None, None] * self.sigmas[j]
        return out


def clifford_preset(name):
    if name == "pauli2":
        return CliffordSet(2, 2, (PAULI_1, PAULI_2), mass_matrix=PAULI_3, name=name)
    if name == "dirac3":
        alphas, beta = _dirac_alphas()
        return CliffordSet(3, 4, tuple(alphas), mass_matrix=beta, name=name)
    if name == "degenerate2":
        # deliberately non-elliptic: sigma.p vanishes along p = (1, -1)
        return CliffordSet(2, 2, (PAULI_1, PAULI_1), mass_matrix=PAULI_3, name=name)
    raise InvalidInputError(f"unknown clifford preset {name!r}")


def validate_elliptic_symbol(clifford: CliffordSet, n_samples: int = 1000):
    """Estimate the ellipticity constant C = min_{|p|=1} s_min(sigma . p).

    Scans ``n_samples`` quasi-uniform unit vectors plus the d coordinate
    directions.  Returns ``{"elliptic": bool, "C_est": float}``.
    """
    if n_samples < 100:
        raise InvalidInputError("n_samples must be >= 100")
    if not clifford.sigmas:
        raise InvalidInputError("empty sigma family")
    d = clifford.dim
    rng = np.random.Generator(np.random.Philox(key=0x5EED_E111))
    pts = rng.normal(size=(n_samples, d))
    norms = np.linalg.norm(pts, axis=1)
    norms[norms == 0] = 1.0
    pts /= norms[:, None]
    pts = np.concatenate([pts, np.eye(d)], axis=0)
    mats = clifford.symbol(pts)
    smin = np.linalg.svd(mats, compute_uv=False)[:, -1]
    c_est = float(smin.min())
    # polish the best direction: a symbol with a null direction between sample
    # points would otherwise be misclassified as elliptic
    c_est = min(c_est, _polish_symbol_min(clifford, pts[int(np.argmin(smin))]))
    return {"elliptic": c_est > 1e-10, "C_est": c_est}


def _polish_symbol_min(clifford, p0):
    from scipy.optimize import minimize

    def f(p):
        nrm = np.linalg.norm(p)
        if nrm == 0:
            return 1e300
        return np.linalg.svd(clifford.symbol(p / nrm), compute_uv=False)[-1]

    res = minimize(f, p0, method="Nelder-Mead",
                   options={"xatol": 1e-14, "fatol": 1e-16, "maxiter": 2000})
    return float(min(f(p0), res.fun))


@dataclass(frozen=True)
class CoefficientField:
    """Periodic Hermitian multiplication operator S with S_- I <= S <= S_+ I."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    S_minus: float
    S_plus: float
    name: str = "custom"

    def __post_init__(self):
        if not (0 < self.S_minus <= self.S_plus):
            raise InvalidInputError("need 0 < S_minus <= S_plus")

    @property
    def is_identity(self):
        return self.name == "identity"

    def sample(self, cell_coords):
        return self.evaluator(cell_coords)

    def check_bounds(self, cell_coords, tol=1e-10):
        vals = self.sample(cell_coords)
        ev = np.linalg.eigvalsh(vals)
        return bool(ev.min() >= self.S_minus - tol and ev.max() <= self.S_plus + tol)


def tabulated_coefficient(values, name="tabulated"):
    """Coefficient field sampled on a unit-cell grid (shape (N_c,)*d + (n,n));
    bounds are taken from the tabulated eigenvalue range."""
    values = np.asarray(values, dtype=complex)
    ev = np.linalg.eigvalsh(values.reshape(-1, *values.shape[-2:]))
    if ev.min() <= 0:
        raise InvalidInputError("tabulated coefficient field must be positive")
    pot = tabulated_potential(values)
    return CoefficientField(pot.evaluator, float(ev.min()), float(ev.max()),
                            name=name)


def coefficient_preset(name, comp=2):
    eye = np.eye(comp, dtype=complex)
    if name == "identity":
        return CoefficientField(
            lambda u: np.broadcast_to(eye, u.shape[:-1] + (comp, comp)).copy(),
            1.0, 1.0, name=name)
    if name.startswith("cosine:"):
        # S(u) = (1 + a prod_j cos(2 pi u_j)) I, bounds 1 -+ a
        a = float(name.split(":", 1)[1])
        if not 0 < a < 1:
            raise InvalidInputError("cosine coefficient amplitude must be in (0,1)")

        def ev(u, a=a, eye=eye):
            s = 1.0 + a * np.prod(np.cos(2 * np.pi * u), axis=-1)
            return s[..., None, None] * eye

        return CoefficientField(ev, 1.0 - a, 1.0 + a, name=name)
    raise InvalidInputError(f"unknown coefficient preset {name!r}")


@dataclass(frozen=True)
class PeriodicPotential:
    """Z^d-periodic bounded Hermitian potential V0."""

    evaluator: Callable[[np.ndarray], np.ndarray]
    sup_norm_bound: float
    name: str = "custom"

    def sample(self, cell_coords):
        return self.evaluator(cell_coords)


def potential_preset(name, clifford: CliffordSet):
    n = clifford.comp
    zero = np.zeros((n, n), dtype=complex)
    if name == "zero":
        return PeriodicPotential(
            lambda u: np.broadcast_to(zero, u.shape[:-1] + (n, n)).copy(),
            0.0, name=name)
    if name.startswith("mass:"):
        mu = float(name.split(":", 1)[1])
        if clifford.mass_matrix is None:
            raise UnsupportedConfigError("mass preset needs a clifford mass_matrix")
        m = mu * clifford.mass_matrix

        def ev(u, m=m, n=n):
            return np.broadcast_to(m, u.shape[:-1] + (n, n)).copy()

        return PeriodicPotential(ev, abs(mu), name=name)
    raise InvalidInputError(f"unknown potential preset {name!r}")


def tabulated_potential(values, sup_norm_bound=None, name="tabulated"):
    """Potential sampled on a unit-cell grid of shape (N_c,)*d + (n, n).

    Lookup is nearest-node in cell coordinates; the tabulation grid must match
    the model grid resolution (checked at build time by shape).
    """
    values = np.asarray(values, dtype=complex)
    d = values.ndim - 2
    nc = values.shape[0]

    def ev(u, values=values, d=d, nc=nc):
        idx = np.round((u + 0.5) * nc - 0.5).astype(int) % nc
        flat = values.reshape((nc,) * d + values.shape[-2:])
        return flat[tuple(idx[..., j] for j in range(d))]

    if sup_norm_bound is None:
        sup_norm_bound = float(np.linalg.norm(values, 2, axis=(-2, -1)).max())
    return PeriodicPotential(ev, sup_norm_bound, name=name)


def chi_profile(kind, support):
    """Scalar bump on [-support, support]^d (cell units, support <= 1/2)."""
    if not 0 < support <= 0.5:
        raise InvalidInputError("profile support half-width must be in (0, 1/2]")
    if kind == "box":
        def prof(y, s=support):
            return np.all(np.abs(y) <= s, axis=-1).astype(float)
    elif kind == "cos2":
        def prof(y, s=support):
            inside = np.all(np.abs(y) <= s, axis=-1)
            vals = np.prod(np.cos(np.pi * np.clip(y / (2 * s), -0.5, 0.5)) ** 2, axis=-1)
            return np.where(inside, vals, 0.0)
    else:
        raise InvalidInputError(f"unknown profile kind {kind!r}")
    prof.kind = kind
    prof.support = support
    return prof


@dataclass(frozen=True)
class GalMassSpec:
    """Periodic antidot mass term: beta * chi(u / alpha) * mass_matrix."""

    alpha: float
    beta: float
    chi: Callable[[np.ndarray], np.ndarray]
    mass_matrix: Optional[np.ndarray] = None

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise InvalidInputError("alpha must be in (0, 1]")
        if self.beta < 0:
            raise InvalidInputError("beta must be nonnegative")

    def sample(self, cell_coords, default_mass):
        m = self.mass_matrix if self.mass_matrix is not None else default_mass
        if m is None:
            raise UnsupportedConfigError("antidot mass term needs a mass matrix")
        vals = self.beta * self.chi(cell_coords / self.alpha)
        return vals[..., None, None] * m


BACKENDS = ("fourier_symbol", "wilson_sparse")


@dataclass(frozen=True)
class GridBox:
    """Discretization of a periodic box of ``side + buffer`` unit cells.

    ``side`` is the disorder box Lambda_L; ``buffer`` cells of padding keep the
    periodic wrap away from the truncated potential.  Spacing h = 1/points_per_cell
    exactly (kept as the rational pair ``h_rational``).
    """

    center: tuple
    side: int
    points_per_cell: int
    buffer: int = 8
    backend: str = "fourier_symbol"
    wilson_r: float = 1.0

    def __post_init__(self):
        if self.side <= 0 or self.side % 2:
            raise InvalidInputError("side must be a positive even integer")
        if self.buffer < 0 or self.buffer % 2:
            raise InvalidInputError("buffer must be a nonnegative even integer")
        if self.points_per_cell < 1:
            raise InvalidInputError("points_per_cell must be positive")
        if self.backend not in BACKENDS:
            raise UnsupportedConfigError(f"unknown backend {self.backend!r}")
        if len(self.center) < 1 or len(self.center) > 3:
            raise UnsupportedConfigError("only d in {1,2,3} is supported")

    @property
    def dim(self):
        return len(self.center)

    @property
    def cells(self):
        return self.side + self.buffer

    @property
    def nodes_per_axis(self):
        return self.points_per_cell * self.cells

    @property
    def h(self):
        return 1.0 / self.points_per_cell

    @property
    def h_rational(self):
        return (1, self.points_per_cell)

    @property
    def n_nodes(self):
        return self.nodes_per_axis ** self.dim

    def total_dim(self, comp):
        return comp * self.n_nodes

    def axis_coords(self):
        """Physical coordinates of nodes along each axis (list of d arrays)."""
        N = self.nodes_per_axis
        return [self.center[j] - self.cells / 2 + self.h * np.arange(N)
                for j in range(self.dim)]

    def coord_mesh(self):
        """(N, ..., N, d) array of node positions."""
        axes = self.axis_coords()
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)

    def cell_coords(self, mesh=None):
        """Unit-cell coordinates u = x - floor(x + 1/2) in [-1/2, 1/2)."""
        if mesh is None:
            mesh = self.coord_mesh()
        return mesh - np.floor(mesh + 0.5)

    def momenta(self):
        """Discrete momenta 2*pi*fftfreq per axis (list of d arrays)."""
        N = self.nodes_per_axis
        return [2 * np.pi * np.fft.fftfreq(N, d=self.h) for _ in range(self.dim)]

    def sup_distance(self, x):
        """(N, ..., N) sup-norm distance of every node to the point x."""
        mesh = self.coord_mesh()
        return np.max(np.abs(mesh - np.asarray(x, dtype=float)), axis=-1)

    def box_mask(self, x, side):
        """Indicator of the open box Lambda_side(x) on the node mesh."""
        return self.sup_distance(x) < side / 2

    def belt_mask(self, x, L):
        """Indicator of the boundary belt: sup-distance in [(L-3)/2, (L-1)/2]."""
        dist = self.sup_distance(x)
        return (dist >= (L - 3) / 2) & (dist <= (L - 1) / 2)

    def cube_index_mesh(self):
        """Integer cube label per node: the side-1 cube centered at x in Z^d."""
        mesh = self.coord_mesh()
        return np.floor(mesh + 0.5).astype(int)

    def lattice_sites(self):
        """Integer sites inside the open disorder box Lambda_side(center)."""
        rngs = []
        for j in range(self.dim):
            lo = int(np.floor(self.center[j] - self.side / 2)) + 1
            hi = int(np.ceil(self.center[j] + self.side / 2)) - 1
            rngs.append(np.arange(lo, hi + 1))
        mesh = np.meshgrid(*rngs, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)


@dataclass(frozen=True)
class ModelSpec:
    """Full deterministic model: H0 = S D0 S + V0 (+ antidot mass term)."""

    clifford: CliffordSet
    S: CoefficientField
    V0: PeriodicPotential
    grid: GridBox
    gal: Optional[GalMassSpec] = None

    def __post_init__(self):
        if self.grid.dim != self.clifford.dim:
            raise InvalidInputError("grid dimension does not match clifford dim")

    @property
    def comp(self):
        return self.clifford.comp


def free_dirac_spec(mu=1.0, side=16, points_per_cell=8, buffer=0,
                    backend="fourier_symbol", dim=2, wilson_r=1.0):
    """Constant-mass Dirac model; gap (-mu, mu) in the continuum."""
    name = "pauli2" if dim == 2 else "dirac3"
    cl = clifford_preset(name)
    grid = GridBox(center=(0,) * dim, side=side, points_per_cell=points_per_cell,
                   buffer=buffer, backend=backend, wilson_r=wilson_r)
    return ModelSpec(
        clifford=cl,
        S=coefficient_preset("identity", cl.comp),
        V0=potential_preset(f"mass:{mu}", cl),
        grid=grid,
    )


def gal_spec(alpha, beta, profile="cos2", support=0.5, side=6, points_per_cell=16,
             buffer=0, backend="fourier_symbol", wilson_r=1.0):
    """Two-dimensional antidot-lattice model with a periodic mass profile."""
    cl = clifford_preset("pauli2")
    grid = GridBox(center=(0, 0), side=side, points_per_cell=points_per_cell,
                   buffer=buffer, backend=backend, wilson_r=wilson_r)
    gal = GalMassSpec(alpha=alpha, beta=beta, chi=chi_profile(profile, support))
    return ModelSpec(
        clifford=cl,
        S=coefficient_preset("identity", cl.comp),
        V0=potential_preset("zero", cl),
        grid=grid,
        gal=gal,
    )
