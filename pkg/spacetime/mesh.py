"""Structured meshes and conforming Lagrange spaces.

Meshes are uniform intervals in 1D and the unit square split into
``2 n^2`` triangles in 2D. Spaces are P1 or P2 with homogeneous Dirichlet
dofs eliminated: every operator exposed by :class:`FeSpace` acts on the
vector of *free* dofs only.

All integrals go through one spatial quadrature per space. The quadrature
is stored as sparse evaluation operators (values and gradient components of
every free basis function at every quadrature point) so mass, stiffness,
weighted mass and load vectors are all ``V.T @ diag(w) @ V`` products.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

from .exceptions import MeshError, QuadratureError, SpaceError

logger = logging.getLogger(__name__)

BOUNDARY_TOL = 1e-12
SUPPORTED_DEGREES = (1, 2)

# local edges of a triangle, in the order of the P2 edge dofs
TRIANGLE_EDGES = ((0, 1), (1, 2), (2, 0))


@dataclass(frozen=True, eq=False)
class Mesh:
    dimension: int
    vertices: np.ndarray
    elements: np.ndarray
    boundary_vertex_flags: np.ndarray
    mesh_size_h: float
    kind: str
    bounds: Tuple[Tuple[float, float], ...]
    cells_per_side: int

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    def element_volumes(self) -> np.ndarray:
        if self.dimension == 1:
            x = self.vertices[self.elements, 0]
            return x[:, 1] - x[:, 0]
        p = self.vertices[self.elements]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def element_diameters(self) -> np.ndarray:
        if self.dimension == 1:
            return np.abs(self.element_volumes())
        p = self.vertices[self.elements]
        lengths = [np.linalg.norm(p[:, j] - p[:, i], axis=1) for i, j in TRIANGLE_EDGES]
        return np.max(np.stack(lengths), axis=0)

    def facet_counts(self) -> Dict[Tuple[int, ...], int]:
        """Number of elements touching each facet (vertices in 1D, edges in 2D)."""
        counts: Dict[Tuple[int, ...], int] = {}
        if self.dimension == 1:
            facets = [(int(v),) for v in self.elements.ravel()]
        else:
            facets = [
                tuple(sorted((int(tri[i]), int(tri[j]))))
                for tri in self.elements
                for i, j in TRIANGLE_EDGES
            ]
        for facet in facets:
            counts[facet] = counts.get(facet, 0) + 1
        return counts

    def boundary_facets(self) -> List[Tuple[int, ...]]:
        return [facet for facet, count in self.facet_counts().items() if count == 1]

    def refine(self) -> 'Mesh':
        return refine_mesh(self)

    def to_json(self) -> dict:
        return mesh_to_json(self)


def _validate_cell_count(n: int, name: str) -> None:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 1:
        raise MeshError(f'{name} must be a positive integer', **{name: n})


def build_interval_mesh(a: float, b: float, n_cells: int) -> Mesh:
    _validate_cell_count(n_cells, 'n_cells')
    if not a < b:
        raise MeshError('interval endpoints must satisfy a < b', a=a, b=b)
    # i / n is exact under halving, so refinement keeps coarse vertices bit-identical
    x = a + (b - a) * (np.arange(n_cells + 1) / n_cells)
    x[-1] = b
    elements = np.column_stack([np.arange(n_cells), np.arange(1, n_cells + 1)])
    flags = np.zeros(n_cells + 1, dtype=bool)
    flags[[0, -1]] = True
    mesh = Mesh(
        dimension=1,
        vertices=x[:, None],
        elements=elements,
        boundary_vertex_flags=flags,
        mesh_size_h=0.0,
        kind='interval',
        bounds=((float(a), float(b)),),
        cells_per_side=int(n_cells),
    )
    return _with_mesh_size(mesh)


def build_square_mesh(n_per_side: int) -> Mesh:
    _validate_cell_count(n_per_side, 'n_per_side')
    n = int(n_per_side)
    frac = np.arange(n + 1) / n
    X, Y = np.meshgrid(frac, frac)
    vertices = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(n), np.arange(n))
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    elements = np.empty((2 * n * n, 3), dtype=int)
    elements[0::2] = np.column_stack([v00, v10, v11])
    elements[1::2] = np.column_stack([v00, v11, v01])

    x, y = vertices[:, 0], vertices[:, 1]
    flags = (x == 0.0) | (x == 1.0) | (y == 0.0) | (y == 1.0)
    mesh = Mesh(
        dimension=2,
        vertices=vertices,
        elements=elements,
        boundary_vertex_flags=flags,
        mesh_size_h=0.0,
        kind='square',
        bounds=((0.0, 1.0), (0.0, 1.0)),
        cells_per_side=n,
    )
    return _with_mesh_size(mesh)


def _with_mesh_size(mesh: Mesh) -> Mesh:
    volumes = mesh.element_volumes()
    if np.any(volumes <= 0):
        raise MeshError('mesh has non-positive element volumes', count=int(np.sum(volumes <= 0)))
    h = float(np.max(mesh.element_diameters()))
    object.__setattr__(mesh, 'mesh_size_h', h)
    for array in (mesh.vertices, mesh.elements, mesh.boundary_vertex_flags):
        array.setflags(write=False)
    return mesh


def refine_mesh(mesh: Mesh) -> Mesh:
    """Uniform refinement; every coarse vertex reappears with identical coordinates."""
    if mesh.kind == 'interval':
        (a, b), = mesh.bounds
        return build_interval_mesh(a, b, 2 * mesh.cells_per_side)
    return build_square_mesh(2 * mesh.cells_per_side)


def mesh_to_json(mesh: Mesh) -> dict:
    return {
        'dimension': mesh.dimension,
        'kind': mesh.kind,
        'mesh_size_h': mesh.mesh_size_h,
        'vertices': mesh.vertices.tolist(),
        'elements': mesh.elements.tolist(),
        'boundary_vertex_flags': mesh.boundary_vertex_flags.tolist(),
    }


# --------------------------------------------------------------------------
# reference quadrature and shape functions
# --------------------------------------------------------------------------

def gauss_interval(degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre rule on [0, 1] exact for polynomials of ``degree``."""
    q = max(1, math.ceil((degree + 1) / 2))
    x, w = np.polynomial.legendre.leggauss(q)
    return (0.5 * (x + 1.0))[:, None], 0.5 * w


def gauss_triangle(degree: int) -> Tuple[np.ndarray, np.ndarray]:
    """Collapsed (Duffy) Gauss-Legendre rule on the reference triangle.

    The collapse ``(u, v) -> (u, v (1 - u))`` adds one to the degree in ``u``,
    hence ``ceil((degree + 2) / 2)`` points per direction.
    """
    q = max(1, math.ceil((degree + 2) / 2))
    x, w = np.polynomial.legendre.leggauss(q)
    a = 0.5 * (x + 1.0)
    wa = 0.5 * w
    U, V = np.meshgrid(a, a, indexing='ij')
    WU, WV = np.meshgrid(wa, wa, indexing='ij')
    points = np.column_stack([U.ravel(), (V * (1.0 - U)).ravel()])
    weights = (WU * WV * (1.0 - U)).ravel()
    return points, weights


def interval_shape_functions(degree: int, xi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Values ``(nq, nloc)`` and gradients ``(nq, nloc, 1)``; P2 local order is (0, 1, mid)."""
    if degree == 1:
        values = np.column_stack([1.0 - xi, xi])
        grads = np.column_stack([-np.ones_like(xi), np.ones_like(xi)])
    else:
        values = np.column_stack([(1.0 - xi) * (1.0 - 2.0 * xi), xi * (2.0 * xi - 1.0), 4.0 * xi * (1.0 - xi)])
        grads = np.column_stack([4.0 * xi - 3.0, 4.0 * xi - 1.0, 4.0 - 8.0 * xi])
    return values, grads[:, :, None]


def triangle_shape_functions(degree: int, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Values ``(nq, nloc)`` and gradients ``(nq, nloc, 2)``; P2 edge dofs follow TRIANGLE_EDGES."""
    xi, eta = points[:, 0], points[:, 1]
    lam = np.column_stack([1.0 - xi - eta, xi, eta])
    dlam = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    nq = len(points)
    if degree == 1:
        grads = np.broadcast_to(dlam, (nq, 3, 2)).copy()
        return lam, grads
    values = np.empty((nq, 6))
    grads = np.empty((nq, 6, 2))
    for i in range(3):
        values[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        grads[:, i, :] = (4.0 * lam[:, i] - 1.0)[:, None] * dlam[i]
    for e, (i, j) in enumerate(TRIANGLE_EDGES):
        values[:, 3 + e] = 4.0 * lam[:, i] * lam[:, j]
        grads[:, 3 + e, :] = 4.0 * (lam[:, j][:, None] * dlam[i] + lam[:, i][:, None] * dlam[j])
    return values, grads


# --------------------------------------------------------------------------
# finite element space
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SpatialQuadrature:
    """All quadrature points of a space with its evaluation operators.

    ``values_full``/``gradients_full`` act on every dof, ``values``/``gradients``
    on the free (non-Dirichlet) dofs only.
    """

    degree: int
    points: np.ndarray
    weights: np.ndarray
    values_full: sp.csr_matrix
    gradients_full: Tuple[sp.csr_matrix, ...]
    values: sp.csr_matrix
    gradients: Tuple[sp.csr_matrix, ...]


@dataclass(frozen=True, eq=False)
class FeSpace:
    mesh: Mesh
    degree_l: int
    dof_coordinates: np.ndarray
    dof_count: int
    dirichlet_dofs: np.ndarray
    element_dof_map: np.ndarray
    free_dofs: np.ndarray
    quadrature: SpatialQuadrature

    @property
    def n_free(self) -> int:
        return len(self.free_dofs)

    @property
    def dimension(self) -> int:
        return self.mesh.dimension

    @property
    def points(self) -> np.ndarray:
        return self.quadrature.points

    @property
    def weights(self) -> np.ndarray:
        return self.quadrature.weights

    @cached_property
    def mass(self) -> sp.csr_matrix:
        return self.weighted_mass(np.ones(len(self.weights)))

    @cached_property
    def stiffness(self) -> sp.csr_matrix:
        W = sp.diags(self.weights)
        A = sum(G.T @ W @ G for G in self.quadrature.gradients)
        return sp.csr_matrix(A)

    def weighted_mass(self, coefficient: np.ndarray) -> sp.csr_matrix:
        """Matrix of ``(c phi_j, phi_i)`` for ``c`` given at the quadrature points."""
        V = self.quadrature.values
        return sp.csr_matrix(V.T @ sp.diags(self.weights * coefficient) @ V)

    def load(self, values: np.ndarray) -> np.ndarray:
        """``(g, phi_i)`` for ``g`` sampled at the quadrature points (one column per field)."""
        w = self.weights if values.ndim == 1 else self.weights[:, None]
        return self.quadrature.values.T @ (w * values)

    def gradient_load(self, gradients: np.ndarray) -> np.ndarray:
        """``(grad g, grad phi_i)`` for ``grad g`` of shape ``(npts, d)``."""
        return sum(
            G.T @ (self.weights * gradients[:, d])
            for d, G in enumerate(self.quadrature.gradients)
        )

    def evaluate(self, coefficients: np.ndarray) -> np.ndarray:
        return self.quadrature.values @ coefficients

    def evaluate_gradient(self, coefficients: np.ndarray) -> List[np.ndarray]:
        return [G @ coefficients for G in self.quadrature.gradients]

    def sample(self, g: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        values = np.asarray(g(self.points), dtype=float)
        if not np.all(np.isfinite(values)):
            raise QuadratureError('integrand is not finite at the quadrature points')
        return values

    def interpolate(self, g: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
        """Nodal interpolant of ``g`` restricted to the free dofs."""
        return np.asarray(g(self.dof_coordinates), dtype=float)[self.free_dofs]

    def extend(self, coefficients: np.ndarray) -> np.ndarray:
        """Full dof vector with zeros on the Dirichlet dofs."""
        full = np.zeros(self.dof_count)
        full[self.free_dofs] = coefficients
        return full


def _on_boundary(points: np.ndarray, bounds: Tuple[Tuple[float, float], ...]) -> np.ndarray:
    flags = np.zeros(len(points), dtype=bool)
    for d, (lo, hi) in enumerate(bounds):
        flags |= np.abs(points[:, d] - lo) < BOUNDARY_TOL
        flags |= np.abs(points[:, d] - hi) < BOUNDARY_TOL
    return flags


def _dof_layout(mesh: Mesh, degree_l: int) -> Tuple[np.ndarray, np.ndarray]:
    nv = mesh.n_vertices
    if degree_l == 1:
        return mesh.vertices.copy(), mesh.elements.copy()
    if mesh.dimension == 1:
        mids = nv + np.arange(mesh.n_elements)
        coords = np.vstack([mesh.vertices, mesh.vertices[mesh.elements].mean(axis=1)])
        return coords, np.column_stack([mesh.elements, mids])
    # edge orientation canonicalised by sorted vertex indices
    pairs = np.sort(mesh.elements[:, list(TRIANGLE_EDGES)], axis=2)
    edges, inverse = np.unique(pairs.reshape(-1, 2), axis=0, return_inverse=True)
    edge_ids = inverse.reshape(mesh.n_elements, 3)
    coords = np.vstack([mesh.vertices, mesh.vertices[edges].mean(axis=1)])
    return coords, np.hstack([mesh.elements, nv + edge_ids])


def _spatial_quadrature(mesh: Mesh, degree_l: int, element_dofs: np.ndarray, dof_count: int,
                        free_dofs: np.ndarray, degree: int) -> SpatialQuadrature:
    ne = mesh.n_elements
    if mesh.dimension == 1:
        ref_points, ref_weights = gauss_interval(degree)
        shape_values, shape_grads = interval_shape_functions(degree_l, ref_points[:, 0])
        x0 = mesh.vertices[mesh.elements[:, 0], 0]
        jac = mesh.vertices[mesh.elements[:, 1], 0] - x0
        points = (x0[:, None] + jac[:, None] * ref_points[None, :, 0])[:, :, None]
        det = jac
        grads = shape_grads[None, :, :, :] / jac[:, None, None, None]
    else:
        ref_points, ref_weights = gauss_triangle(degree)
        shape_values, shape_grads = triangle_shape_functions(degree_l, ref_points)
        p = mesh.vertices[mesh.elements]
        B = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)
        det = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
        points = p[:, 0][:, None, :] + np.einsum('edk,qk->eqd', B, ref_points)
        inv_t = np.linalg.inv(B).transpose(0, 2, 1)
        grads = np.einsum('edk,qlk->eqld', inv_t, shape_grads)

    nq, nloc = shape_values.shape
    rows = np.broadcast_to(np.arange(ne * nq).reshape(ne, nq, 1), (ne, nq, nloc)).ravel()
    cols = np.broadcast_to(element_dofs[:, None, :], (ne, nq, nloc)).ravel()
    shape = (ne * nq, dof_count)

    def operator(data: np.ndarray) -> sp.csr_matrix:
        return sp.coo_matrix((np.ascontiguousarray(data).ravel(), (rows, cols)), shape=shape).tocsr()

    values_full = operator(np.broadcast_to(shape_values[None], (ne, nq, nloc)))
    gradients_full = tuple(operator(grads[..., d]) for d in range(mesh.dimension))

    def restrict(op: sp.csr_matrix) -> sp.csr_matrix:
        return op.tocsc()[:, free_dofs].tocsr()

    return SpatialQuadrature(
        degree=degree,
        points=points.reshape(ne * nq, mesh.dimension),
        weights=(ref_weights[None, :] * np.abs(det)[:, None]).ravel(),
        values_full=values_full,
        gradients_full=gradients_full,
        values=restrict(values_full),
        gradients=tuple(restrict(g) for g in gradients_full),
    )


def build_space(mesh: Mesh, degree_l: int, quad_degree: Optional[int] = None) -> FeSpace:
    """Conforming P``degree_l`` space on ``mesh``.

    The default spatial quadrature is exact to degree ``4 l`` so that
    ``(u^3, phi)`` and ``(u^2 - 1)^2`` are integrated exactly for discrete ``u``.
    """
    if degree_l not in SUPPORTED_DEGREES:
        raise SpaceError('unsupported polynomial degree', degree_l=degree_l, supported=list(SUPPORTED_DEGREES))
    degree = 4 * degree_l if quad_degree is None else int(quad_degree)
    if degree < 4 * degree_l:
        raise QuadratureError(
            'spatial quadrature would under-integrate the cubic nonlinearity',
            requested=degree, minimum=4 * degree_l,
        )

    coords, element_dofs = _dof_layout(mesh, degree_l)
    dof_count = len(coords)
    dirichlet = np.flatnonzero(_on_boundary(coords, mesh.bounds))
    free = np.setdiff1d(np.arange(dof_count), dirichlet)
    quadrature = _spatial_quadrature(mesh, degree_l, element_dofs, dof_count, free, degree)
    logger.debug('built P%d space: %d dofs, %d free, %d quadrature points',
                 degree_l, dof_count, len(free), len(quadrature.weights))
    for array in (coords, element_dofs, dirichlet, free):
        array.setflags(write=False)
    return FeSpace(
        mesh=mesh,
        degree_l=degree_l,
        dof_coordinates=coords,
        dof_count=dof_count,
        dirichlet_dofs=dirichlet,
        element_dof_map=element_dofs,
        free_dofs=free,
        quadrature=quadrature,
    )
