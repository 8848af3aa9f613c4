"""Lagrange P1-P3 finite elements on triangles and tetrahedra.

Reference elements use equispaced Lagrange nodes with basis
coefficients computed by exact rational inversion of the monomial
Vandermonde matrix, so the Kronecker property holds to machine
precision.  Quadrature is by conical-product Gauss-Jacobi rules, exact
to any requested total degree with positive weights.

Surface matrices are assembled per triangle in a local orthonormal
frame of the triangle plane, where the tangential gradient is the plain
2D gradient; this works unchanged for flat meshes, for curved embedded
surfaces and for the trace of a volume space on its boundary faces.
"""

import math
from fractions import Fraction
from functools import lru_cache
from itertools import product

import numpy as np
import scipy.sparse

from .errors import InvalidMeshError, UnsupportedDegreeError
from .linalg import SparseSymMatrix
from .mesh import SurfaceMesh, VolumeMesh

_MAX_QUAD_DEGREE = 30
_CHUNK = 2048

_SIMPLEX_EDGES = {
    2: [(0, 1), (0, 2), (1, 2)],
    3: [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
}
_TET_LOCAL_FACES = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]


class QuadratureRule:
    """Positive-weight rule on the reference simplex.

    Attributes
    ----------
    simplex_dim : int
        2 (triangle) or 3 (tet).
    points : (nq, simplex_dim + 1) array
        Barycentric coordinates.
    weights : (nq,) array
        Reference-measure weights; they sum to 1/2 resp. 1/6.
    exactness_degree : int
    """

    def __init__(self, simplex_dim, points, weights, exactness_degree):
        self.simplex_dim = simplex_dim
        self.points = points
        self.weights = weights
        self.exactness_degree = exactness_degree

    @property
    def ref_coords(self):
        """Reference simplex coordinates (barycentric minus the first)."""
        return self.points[:, 1:]

    def __len__(self):
        return len(self.weights)


def _gauss_01(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


def _jacobi_01(n, alpha):
    # nodes/weights for the weight (1-t)^alpha on [0, 1]
    from scipy.special import roots_jacobi

    x, w = roots_jacobi(n, alpha, 0.0)
    return (x + 1.0) / 2.0, w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def _conical_rule(simplex_dim, n):
    if simplex_dim == 2:
        xg, wg = _gauss_01(n)
        yj, wj = _jacobi_01(n, 1.0)
        pts, wts = [], []
        for (xi, wx), (eta, wy) in product(zip(xg, wg), zip(yj, wj)):
            x, y = xi * (1.0 - eta), eta
            pts.append((1.0 - x - y, x, y))
            wts.append(wx * wy)
    elif simplex_dim == 3:
        xg, wg = _gauss_01(n)
        yj, wy1 = _jacobi_01(n, 1.0)
        zj, wy2 = _jacobi_01(n, 2.0)
        pts, wts = [], []
        for (xi, wx), (eta, we), (zeta, wz) in product(
            zip(xg, wg), zip(yj, wy1), zip(zj, wy2)
        ):
            x = xi * (1.0 - eta) * (1.0 - zeta)
            y = eta * (1.0 - zeta)
            z = zeta
            pts.append((1.0 - x - y - z, x, y, z))
            wts.append(wx * we * wz)
    else:
        raise ValueError("simplex_dim must be 2 or 3")
    return QuadratureRule(
        simplex_dim, np.array(pts), np.array(wts), exactness_degree=2 * n - 1
    )


def quadrature_rule(simplex_dim, min_degree):
    """Smallest conical-product rule exact for ``min_degree``."""
    if simplex_dim not in (2, 3):
        raise ValueError("simplex_dim must be 2 or 3")
    if min_degree > _MAX_QUAD_DEGREE:
        raise UnsupportedDegreeError(
            f"quadrature degree {min_degree} beyond supported {_MAX_QUAD_DEGREE}"
        )
    n = max(1, (int(min_degree) + 2) // 2)
    return _conical_rule(simplex_dim, n)


def _monomial_exponents(dim, degree):
    if dim == 2:
        exps = [(i, j) for i in range(degree + 1) for j in range(degree + 1 - i)]
    else:
        exps = [
            (i, j, k)
            for i in range(degree + 1)
            for j in range(degree + 1 - i)
            for k in range(degree + 1 - i - j)
        ]
    return sorted(exps, key=lambda e: (sum(e), e))


def _invert_exact(rows):
    """Gauss-Jordan inverse of a square Fraction matrix."""
    n = len(rows)
    aug = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(rows)]
    for col in range(n):
        piv = next(r for r in range(col, n) if aug[r][col] != 0)
        aug[col], aug[piv] = aug[piv], aug[col]
        inv_p = Fraction(1, 1) / aug[col][col]
        aug[col] = [v * inv_p for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                f = aug[r][col]
                aug[r] = [a - f * b for a, b in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


class ReferenceElement:
    """Equispaced Lagrange element of degree 1, 2 or 3 on a simplex.

    Nodes are grouped vertices / edges / faces / interior;
    ``node_coords`` holds barycentric coordinates in that order.
    """

    def __init__(self, simplex_dim, degree):
        if simplex_dim not in (2, 3):
            raise ValueError("simplex_dim must be 2 or 3")
        if degree not in (1, 2, 3):
            raise UnsupportedDegreeError(f"unsupported polynomial degree {degree}")
        self.simplex_dim = simplex_dim
        self.degree = degree
        nv = simplex_dim + 1

        nodes = []  # barycentric, as Fractions
        for v in range(nv):
            lam = [Fraction(0)] * nv
            lam[v] = Fraction(1)
            nodes.append(lam)
        self.vertex_node_ids = list(range(nv))

        self.edges = _SIMPLEX_EDGES[simplex_dim]
        self.edge_node_ids = []
        for a, b in self.edges:
            ids = []
            for i in range(1, degree):
                lam = [Fraction(0)] * nv
                lam[a] = Fraction(degree - i, degree)
                lam[b] = Fraction(i, degree)
                ids.append(len(nodes))
                nodes.append(lam)
            self.edge_node_ids.append(ids)

        self.faces = _TET_LOCAL_FACES if simplex_dim == 3 else []
        self.face_node_ids = []
        if simplex_dim == 3 and degree == 3:
            for face in self.faces:
                lam = [Fraction(0)] * nv
                for v in face:
                    lam[v] = Fraction(1, 3)
                self.face_node_ids.append(len(nodes))
                nodes.append(lam)
        self.interior_node_ids = []
        if simplex_dim == 2 and degree == 3:
            self.interior_node_ids.append(len(nodes))
            nodes.append([Fraction(1, 3)] * 3)

        self.num_nodes = len(nodes)
        assert self.num_nodes == math.comb(degree + simplex_dim, simplex_dim)
        self.node_coords = np.array([[float(x) for x in lam] for lam in nodes])

        self.exponents = _monomial_exponents(simplex_dim, degree)
        vander = [
            [
                math.prod(lam[1 + d] ** e[d] for d in range(simplex_dim))
                for e in self.exponents
            ]
            for lam in nodes
        ]
        inv = _invert_exact([[Fraction(v) for v in row] for row in vander])
        # coeffs[m, i]: weight of monomial m in basis function i
        self.coeffs = np.array([[float(inv[m][i]) for i in range(self.num_nodes)]
                                for m in range(self.num_nodes)])

    def tabulate(self, ref_points):
        """Values and reference-coordinate gradients at (nq, dim) points."""
        pts = np.atleast_2d(np.asarray(ref_points, float))
        nq = len(pts)
        dim = self.simplex_dim
        mono = np.ones((nq, len(self.exponents)))
        dmono = np.zeros((nq, len(self.exponents), dim))
        for m, e in enumerate(self.exponents):
            for d in range(dim):
                mono[:, m] *= pts[:, d] ** e[d]
            for d in range(dim):
                if e[d] == 0:
                    continue
                dm = np.full(nq, float(e[d]))
                for dd in range(dim):
                    p = e[dd] - 1 if dd == d else e[dd]
                    dm *= pts[:, dd] ** p
                dmono[:, m, d] = dm
        phi = mono @ self.coeffs
        dphi = np.einsum("qmd,mi->qid", dmono, self.coeffs)
        return phi, dphi

    def tabulate_barycentric(self, bary_points):
        return self.tabulate(np.atleast_2d(bary_points)[:, 1:])


@lru_cache(maxsize=None)
def reference_element(simplex_dim, degree):
    return ReferenceElement(simplex_dim, degree)


class FESpace:
    """Global Lagrange space over a volume or surface mesh.

    Degrees of freedom are numbered referenced vertices first, then
    (degree-1) per unique edge in lexicographic key order, then one per
    unique tet face (P3 volume) or per triangle (P3 surface).  Shared
    edge dofs are stored oriented from the lower to the higher global
    vertex index, so adjacent elements agree.
    """

    def __init__(self, mesh, degree):
        if degree not in (1, 2, 3):
            raise UnsupportedDegreeError(f"unsupported polynomial degree {degree}")
        self.mesh = mesh
        self.degree = degree
        self.is_volume = isinstance(mesh, VolumeMesh)
        if not self.is_volume and not isinstance(mesh, SurfaceMesh):
            raise ValueError("mesh must be a VolumeMesh or SurfaceMesh")
        self.ref = reference_element(3 if self.is_volume else 2, degree)
        cells = mesh.tets if self.is_volume else mesh.triangles

        referenced = np.unique(cells)
        self.vertex_dof = np.full(mesh.num_vertices, -1, dtype=np.int64)
        self.vertex_dof[referenced] = np.arange(len(referenced))
        ndof = len(referenced)

        self.edge_dof_start = {}
        if degree >= 2:
            for key in map(tuple, mesh.cell_edges()):
                self.edge_dof_start[key] = ndof
                ndof += degree - 1

        self.face_dof = {}
        if self.is_volume and degree == 3:
            faces = np.sort(cells[:, np.array(_TET_LOCAL_FACES)].reshape(-1, 3), axis=1)
            for key in map(tuple, np.unique(faces, axis=0)):
                self.face_dof[key] = ndof
                ndof += 1
        interior_base = ndof
        if not self.is_volume and degree == 3:
            ndof += mesh.num_cells
        self.ndof = ndof

        self.element_dofs = self._build_element_dofs(cells, interior_base)
        self.dof_coords = self._build_dof_coords(cells)
        self._geom = None
        self._boundary_dofs = None

    def _local_to_global(self, cell, interior_dof=None):
        ref = self.ref
        dofs = np.empty(ref.num_nodes, dtype=np.int64)
        for lv in ref.vertex_node_ids:
            dofs[lv] = self.vertex_dof[cell[lv]]
        if self.degree >= 2:
            for (la, lb), ids in zip(ref.edges, ref.edge_node_ids):
                ga, gb = cell[la], cell[lb]
                key = (ga, gb) if ga < gb else (gb, ga)
                start = self.edge_dof_start[key]
                block = range(start, start + self.degree - 1)
                if ga > gb:
                    block = reversed(block)
                for node, d in zip(ids, block):
                    dofs[node] = d
        for face, node in zip(ref.faces, ref.face_node_ids):
            key = tuple(sorted(cell[list(face)]))
            dofs[node] = self.face_dof[key]
        for node in ref.interior_node_ids:
            dofs[node] = interior_dof
        return dofs

    def _build_element_dofs(self, cells, interior_base):
        table = np.empty((len(cells), self.ref.num_nodes), dtype=np.int64)
        for e, cell in enumerate(cells):
            table[e] = self._local_to_global(cell, interior_dof=interior_base + e)
        return table

    def _build_dof_coords(self, cells):
        coords = np.zeros((self.ndof, 3))
        lam = self.ref.node_coords  # (nloc, dim+1)
        for e, cell in enumerate(cells):
            coords[self.element_dofs[e]] = lam @ self.mesh.vertices[cells[e]]
        return coords

    # -- geometry ----------------------------------------------------------

    def geometry(self):
        """Per-element affine map data, cached.

        Volume: ``origin`` (E,3), ``jac`` (E,3,3), ``inv_jac``, ``det``.
        Surface adds ``frame`` (E,3,2), the orthonormal tangent basis;
        ``jac``/``inv_jac`` are then the 2x2 in-plane maps.
        """
        if self._geom is not None:
            return self._geom
        cells = self.mesh.tets if self.is_volume else self.mesh.triangles
        self._geom = _cell_geometry(self.mesh.vertices, cells, self.is_volume)
        return self._geom

    def physical_points(self, ref_coords, sel=slice(None)):
        """Map reference points into every (selected) element: (E, nq, 3)."""
        return _map_points(self, self.geometry(), np.atleast_2d(ref_coords), sel)

    def boundary_element_dofs(self):
        """Trace dof table over boundary faces of a volume mesh."""
        if not self.is_volume:
            raise ValueError("trace dofs only exist for volume spaces")
        if self._boundary_dofs is not None:
            return self._boundary_dofs
        tri_ref = reference_element(2, self.degree)
        faces = self.mesh.boundary_faces
        table = np.empty((len(faces), tri_ref.num_nodes), dtype=np.int64)
        for e, (a, b, c) in enumerate(faces):
            dofs = np.empty(tri_ref.num_nodes, dtype=np.int64)
            tri = (int(a), int(b), int(c))
            for lv in tri_ref.vertex_node_ids:
                dofs[lv] = self.vertex_dof[tri[lv]]
            if self.degree >= 2:
                for (la, lb), ids in zip(tri_ref.edges, tri_ref.edge_node_ids):
                    ga, gb = tri[la], tri[lb]
                    key = (ga, gb) if ga < gb else (gb, ga)
                    start = self.edge_dof_start[key]
                    block = range(start, start + self.degree - 1)
                    if ga > gb:
                        block = reversed(block)
                    for node, d in zip(ids, block):
                        dofs[node] = d
            for node in tri_ref.interior_node_ids:
                dofs[node] = self.face_dof[tuple(sorted(tri))]
            table[e] = dofs
        self._boundary_dofs = table
        return table


def build_fespace(mesh, degree):
    """Lagrange space of the requested degree over a mesh."""
    return FESpace(mesh, degree)


class FEFunction:
    """Coefficient vector over a finite element space."""

    def __init__(self, space, coefficients):
        coefficients = np.asarray(coefficients, float)
        if coefficients.shape != (space.ndof,):
            raise ValueError(
                f"coefficient vector has length {coefficients.shape}, "
                f"space has {space.ndof} dofs"
            )
        self.space = space
        self.coefficients = coefficients


def _cell_geometry(vertices, cells, is_volume):
    p = vertices[cells]
    origin = p[:, 0]
    if is_volume:
        jac = np.stack([p[:, i] - origin for i in (1, 2, 3)], axis=2)
        det = np.linalg.det(jac)
        if np.any(det <= 0.0):
            raise InvalidMeshError("degenerate tet in assembly")
        return {
            "origin": origin,
            "jac": jac,
            "inv_jac": np.linalg.inv(jac),
            "det": det,
        }
    e1 = p[:, 1] - origin
    e2 = p[:, 2] - origin
    nrm = np.cross(e1, e2)
    nrm_len = np.linalg.norm(nrm, axis=1)
    if np.any(nrm_len <= 0.0):
        raise InvalidMeshError("zero-area triangle in assembly")
    t1 = e1 / np.linalg.norm(e1, axis=1)[:, None]
    t2 = np.cross(nrm / nrm_len[:, None], t1)
    frame = np.stack([t1, t2], axis=2)  # (E, 3, 2)
    jac = np.empty((len(cells), 2, 2))
    jac[:, 0, 0] = np.einsum("ij,ij->i", e1, t1)
    jac[:, 1, 0] = 0.0
    jac[:, 0, 1] = np.einsum("ij,ij->i", e2, t1)
    jac[:, 1, 1] = np.einsum("ij,ij->i", e2, t2)
    det = jac[:, 0, 0] * jac[:, 1, 1]
    return {
        "origin": origin,
        "jac": jac,
        "inv_jac": np.linalg.inv(jac),
        "det": det,
        "frame": frame,
        "normal": nrm / nrm_len[:, None],
    }


def _scatter(local, dofs, ndof):
    e, nloc, _ = local.shape
    rows = np.repeat(dofs, nloc, axis=1).ravel()
    cols = np.tile(dofs, (1, nloc)).ravel()
    mat = scipy.sparse.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(ndof, ndof)
    ).tocsr()
    return mat


def _assemble_operator(ref, geom, dofs, ndof, kind, min_degree):
    rule = quadrature_rule(ref.simplex_dim, min_degree)
    phi, dphi = ref.tabulate(rule.ref_coords)
    w = rule.weights
    total = scipy.sparse.csr_matrix((ndof, ndof))
    if kind == "mass":
        mref = np.einsum("qi,qj,q->ij", phi, phi, w)
    n = len(dofs)
    for lo in range(0, n, _CHUNK):
        sel = slice(lo, min(lo + _CHUNK, n))
        det = geom["det"][sel]
        if kind == "mass":
            local = mref[None, :, :] * det[:, None, None]
        else:
            gphys = np.einsum("qid,edk->eqik", dphi, geom["inv_jac"][sel])
            local = np.einsum("eqik,eqjk,q->eij", gphys, gphys, w)
            local *= det[:, None, None]
        total = total + _scatter(local, dofs[sel], ndof)
    return SparseSymMatrix.from_scipy(total, symmetrize=True)


def assemble_volume_stiffness(space):
    """Stiffness matrix of the 3D gradient product over a volume mesh."""
    if not space.is_volume:
        raise ValueError("volume stiffness needs a space on a VolumeMesh")
    return _assemble_operator(
        space.ref, space.geometry(), space.element_dofs, space.ndof,
        "stiffness", max(0, 2 * (space.degree - 1)),
    )


def assemble_volume_mass(space):
    """Mass matrix over a volume mesh; entries sum to the mesh volume."""
    if not space.is_volume:
        raise ValueError("volume mass needs a space on a VolumeMesh")
    return _assemble_operator(
        space.ref, space.geometry(), space.element_dofs, space.ndof,
        "mass", 2 * space.degree,
    )


def _surface_parts(space):
    """(ref element, geometry, dof table) of the surface to integrate over."""
    if space.is_volume:
        tri_ref = reference_element(2, space.degree)
        geom = _cell_geometry(
            space.mesh.vertices, space.mesh.boundary_faces, is_volume=False
        )
        return tri_ref, geom, space.boundary_element_dofs()
    return space.ref, space.geometry(), space.element_dofs


def assemble_surface_stiffness(space):
    """Tangential-gradient stiffness over a surface or a volume boundary.

    For a volume space the result is N x N in volume dof numbering with
    structurally empty rows for dofs not supported on the boundary.
    """
    ref, geom, dofs = _surface_parts(space)
    return _assemble_operator(
        ref, geom, dofs, space.ndof, "stiffness", max(0, 2 * (space.degree - 1))
    )


def assemble_surface_mass(space):
    """Surface mass matrix; entries sum to the surface area."""
    ref, geom, dofs = _surface_parts(space)
    return _assemble_operator(ref, geom, dofs, space.ndof, "mass", 2 * space.degree)


def interpolate(space, f):
    """Nodal interpolant: coefficient i is f at dof coordinate i."""
    vals = f.value(space.dof_coords) if hasattr(f, "value") else f(space.dof_coords)
    return FEFunction(space, np.asarray(vals, float))


def assemble_load(space, f, mass=None):
    """Load vector M F with F the nodal interpolant of f."""
    if mass is None:
        mass = assemble_volume_mass(space) if space.is_volume else assemble_surface_mass(space)
    return mass @ interpolate(space, f).coefficients


def load_by_quadrature(space, f, min_degree=8):
    """Direct quadrature of the source term; internal cross-check path."""
    rule = quadrature_rule(space.ref.simplex_dim, min_degree)
    phi, _ = space.ref.tabulate(rule.ref_coords)
    geom = space.geometry()
    cells = space.mesh.tets if space.is_volume else space.mesh.triangles
    out = np.zeros(space.ndof)
    n = len(cells)
    for lo in range(0, n, _CHUNK):
        sel = slice(lo, min(lo + _CHUNK, n))
        pts = _map_points(space, geom, rule.ref_coords, sel)
        fvals = _field_values(f, pts.reshape(-1, 3)).reshape(pts.shape[:2])
        local = np.einsum("eq,qi,q,e->ei", fvals, phi, rule.weights, geom["det"][sel])
        np.add.at(out, space.element_dofs[sel], local)
    return out


def _field_values(f, points):
    return f.value(points) if hasattr(f, "value") else f(points)


def _map_points(space, geom, ref_coords, sel=slice(None)):
    if space.is_volume:
        disp = np.einsum("eij,qj->eqi", geom["jac"][sel], ref_coords)
    else:
        plane = np.einsum("eik,ekj->eij", geom["frame"][sel], geom["jac"][sel])
        disp = np.einsum("eij,qj->eqi", plane, ref_coords)
    return geom["origin"][sel][:, None, :] + disp


def evaluate(fefun, element, barycentric):
    """Value and ambient gradient of an FE function at one point.

    The gradient is a 3-vector; for surface spaces it lies in the
    triangle plane.
    """
    space = fefun.space
    lam = np.asarray(barycentric, float)
    if lam.shape != (space.ref.simplex_dim + 1,) or np.any(lam < -1e-12):
        raise ValueError("barycentric point must be nonnegative of length dim+1")
    if abs(lam.sum() - 1.0) > 1e-10:
        raise ValueError("barycentric coordinates must sum to 1")
    ncells = space.mesh.num_cells
    if not 0 <= element < ncells:
        raise ValueError(f"element index {element} out of range")
    phi, dphi = space.ref.tabulate(lam[None, 1:])
    coeffs = fefun.coefficients[space.element_dofs[element]]
    geom = space.geometry()
    value = float(phi[0] @ coeffs)
    gref = dphi[0].T @ coeffs
    if space.is_volume:
        grad = geom["inv_jac"][element].T @ gref
    else:
        grad = geom["frame"][element] @ (geom["inv_jac"][element].T @ gref)
    return value, grad


def evaluate_on_cells(fefun, ref_coords, sel=slice(None), gradients=True):
    """Batch values (E, nq) and ambient gradients (E, nq, 3) of u_h."""
    space = fefun.space
    phi, dphi = space.ref.tabulate(ref_coords)
    geom = space.geometry()
    loc = fefun.coefficients[space.element_dofs[sel]]
    values = np.einsum("ei,qi->eq", loc, phi)
    if not gradients:
        return values, None
    gref = np.einsum("ei,qid->eqd", loc, dphi)
    if space.is_volume:
        grads = np.einsum("eqd,edk->eqk", gref, geom["inv_jac"][sel])
    else:
        g2 = np.einsum("eqd,edk->eqk", gref, geom["inv_jac"][sel])
        grads = np.einsum("eik,eqk->eqi", geom["frame"][sel], g2)
    return values, grads
