"""Simplicial meshes embedded in 3-space.

Provides structured generators (unit square, unit cube, icosphere, unit
ball), boundary extraction, Gmsh MSH 2.2 ASCII import/export and basic
mesh interrogation.  Volume meshes are tetrahedral, surface meshes are
triangular; both store vertices as (V, 3) float arrays.  Meshes are
immutable after construction and validate their structural invariants
eagerly.
"""

import io
import math

import numpy as np

from .errors import InvalidMeshError, MalformedFileError, UnsupportedFormatError

_GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0

# Faces of the tet (a,b,c,d), ordered so normals point out of a
# positively oriented tet.
_TET_FACES = np.array([[1, 2, 3], [0, 3, 2], [0, 1, 3], [0, 2, 1]])
_TET_EDGES = np.array([[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]])
_TRI_EDGES = np.array([[0, 1], [1, 2], [2, 0]])


def _freeze(a, dtype):
    out = np.ascontiguousarray(np.asarray(a, dtype=dtype))
    out.setflags(write=False)
    return out


def tet_volumes(vertices, tets):
    """Signed volumes of tetrahedra, positive for consistent orientation."""
    p = vertices[tets]
    e = p[:, 1:] - p[:, :1]
    return np.linalg.det(e) / 6.0


def triangle_areas(vertices, triangles):
    p = vertices[triangles]
    n = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    return 0.5 * np.linalg.norm(n, axis=1)


def _edge_use_counts(triangles):
    edges = triangles[:, _TRI_EDGES].reshape(-1, 2)
    edges = np.sort(edges, axis=1)
    _, counts = np.unique(edges, axis=0, return_counts=True)
    return counts


class VolumeMesh:
    """Tetrahedral mesh with an oriented boundary triangulation.

    Parameters
    ----------
    vertices : (V, 3) array
        Vertex coordinates.
    tets : (T, 4) int array
        Vertex indices per tetrahedron, positively oriented.

    Attributes
    ----------
    boundary_faces : (B, 3) int array
        Triangles incident to exactly one tet, wound so the normal
        points out of the owning tet.
    boundary_face_tets : (B,) int array
        Index of the owning tet per boundary face.
    """

    def __init__(self, vertices, tets):
        self.vertices = _freeze(vertices, float)
        self.tets = _freeze(tets, np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise InvalidMeshError("vertices must be an (V, 3) array")
        if self.tets.ndim != 2 or self.tets.shape[1] != 4:
            raise InvalidMeshError("tets must be a (T, 4) array")
        if self.tets.size and (
            self.tets.min() < 0 or self.tets.max() >= len(self.vertices)
        ):
            raise InvalidMeshError("tet vertex index out of range")
        vols = tet_volumes(self.vertices, self.tets)
        if np.any(vols <= 0.0):
            bad = int(np.argmin(vols))
            raise InvalidMeshError(
                f"tet {bad} has non-positive volume {vols[bad]:.3e}"
            )
        faces, owners = self._boundary()
        self.boundary_faces = _freeze(faces, np.int64)
        self.boundary_face_tets = _freeze(owners, np.int64)
        counts = _edge_use_counts(self.boundary_faces)
        if self.boundary_faces.size and not np.all(counts == 2):
            raise InvalidMeshError("boundary surface is not closed")

    def _boundary(self):
        faces = self.tets[:, _TET_FACES].reshape(-1, 3)
        keys = np.sort(faces, axis=1)
        _, inverse, counts = np.unique(
            keys, axis=0, return_inverse=True, return_counts=True
        )
        per_face = counts[inverse]
        if np.any(per_face > 2):
            raise InvalidMeshError("non-manifold face shared by more than 2 tets")
        sel = np.flatnonzero(per_face == 1)
        return faces[sel], sel // 4

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_cells(self):
        return len(self.tets)

    def cell_edges(self):
        """Unique vertex-index pairs (sorted) over all tet edges."""
        edges = self.tets[:, _TET_EDGES].reshape(-1, 2)
        return np.unique(np.sort(edges, axis=1), axis=0)

    def volume(self):
        return float(tet_volumes(self.vertices, self.tets).sum())


class SurfaceMesh:
    """Triangulated surface embedded in 3-space.

    ``is_closed`` is computed from edge incidence: every edge shared by
    exactly two triangles.  Closed meshes must have sphere topology
    (V - E + F = 2 over referenced vertices).  Vertices not referenced
    by any triangle are allowed so global numberings can be preserved,
    e.g. by :func:`extract_boundary`.
    """

    def __init__(self, vertices, triangles):
        self.vertices = _freeze(vertices, float)
        self.triangles = _freeze(triangles, np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise InvalidMeshError("vertices must be an (V, 3) array")
        if self.triangles.ndim != 2 or self.triangles.shape[1] != 3:
            raise InvalidMeshError("triangles must be a (T, 3) array")
        if self.triangles.size and (
            self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices)
        ):
            raise InvalidMeshError("triangle vertex index out of range")
        areas = triangle_areas(self.vertices, self.triangles)
        if np.any(areas <= 0.0):
            bad = int(np.argmin(areas))
            raise InvalidMeshError(f"triangle {bad} has zero area")
        edges = self.triangles[:, _TRI_EDGES].reshape(-1, 2)
        edge_keys, counts = np.unique(
            np.sort(edges, axis=1), axis=0, return_counts=True
        )
        if np.any(counts > 2):
            raise InvalidMeshError("edge shared by more than 2 triangles")
        self.is_closed = bool(self.triangles.size) and bool(np.all(counts == 2))
        if self.is_closed:
            v_used = np.unique(self.triangles).size
            euler = v_used - len(edge_keys) + len(self.triangles)
            if euler != 2:
                raise InvalidMeshError(
                    f"closed surface has Euler characteristic {euler}, expected 2"
                )

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_cells(self):
        return len(self.triangles)

    def cell_edges(self):
        edges = self.triangles[:, _TRI_EDGES].reshape(-1, 2)
        return np.unique(np.sort(edges, axis=1), axis=0)

    def area(self):
        return float(triangle_areas(self.vertices, self.triangles).sum())


def _orient_tets(vertices, tets):
    """Swap two vertices of every negatively oriented tet."""
    tets = np.array(tets, dtype=np.int64)
    vols = tet_volumes(np.asarray(vertices, float), tets)
    flip = vols < 0.0
    tets[flip] = tets[flip][:, [1, 0, 2, 3]]
    return tets


def generate_unit_square_mesh(n):
    """Structured triangulation of (0,1)^2 embedded at z = 0.

    Each of the n*n cells is split along its (i,j)->(i+1,j+1) diagonal,
    giving 2 n^2 right triangles on (n+1)^2 vertices.
    """
    if n < 1:
        raise ValueError("n must be a positive integer")
    xs = np.linspace(0.0, 1.0, n + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    vertices = np.column_stack([gx.ravel(), gy.ravel(), np.zeros((n + 1) ** 2)])

    def vid(i, j):
        return i * (n + 1) + j

    triangles = []
    for i in range(n):
        for j in range(n):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            triangles.append((v00, v10, v11))
            triangles.append((v00, v11, v01))
    return SurfaceMesh(vertices, triangles)


# Kuhn split: the six tets of a cube, one per vertex permutation, all
# sharing the main diagonal.  Identical in every subcube => conforming.
_KUHN_PERMS = [
    (0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0),
]


def generate_unit_cube_mesh(n):
    """Kuhn/Freudenthal tetrahedralization of (0,1)^3, 6 n^3 tets."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    xs = np.linspace(0.0, 1.0, n + 1)
    gx, gy, gz = np.meshgrid(xs, xs, xs, indexing="ij")
    vertices = np.column_stack([gx.ravel(), gy.ravel(), gz.ravel()])

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    tets = []
    for i in range(n):
        for j in range(n):
            for k in range(n):
                for perm in _KUHN_PERMS:
                    corner = np.array([i, j, k])
                    path = [corner.copy()]
                    for axis in perm:
                        corner = corner.copy()
                        corner[axis] += 1
                        path.append(corner)
                    tets.append([vid(*p) for p in path])
    return VolumeMesh(vertices, _orient_tets(vertices, tets))


def _icosahedron():
    g = _GOLDEN
    raw = [
        (-1, g, 0), (1, g, 0), (-1, -g, 0), (1, -g, 0),
        (0, -1, g), (0, 1, g), (0, -1, -g), (0, 1, -g),
        (g, 0, -1), (g, 0, 1), (-g, 0, -1), (-g, 0, 1),
    ]
    vertices = np.array(raw, dtype=float)
    vertices /= np.linalg.norm(vertices, axis=1)[:, None]
    triangles = np.array(
        [
            (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
            (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
            (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
            (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
        ]
    )
    # outward winding: flip triangles whose normal points inward
    p = vertices[triangles]
    normals = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    inward = np.einsum("ij,ij->i", normals, p.mean(axis=1)) < 0
    triangles[inward] = triangles[inward][:, [0, 2, 1]]
    return vertices, triangles


def generate_sphere_mesh(level):
    """Icosphere: icosahedron subdivided ``level`` times, vertices on |x|=1."""
    if level < 0:
        raise ValueError("level must be a nonnegative integer")
    vertices, triangles = _icosahedron()
    verts = [tuple(v) for v in vertices]
    for _ in range(level):
        midpoint = {}

        def mid(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in midpoint:
                m = np.asarray(verts[a]) + np.asarray(verts[b])
                m /= np.linalg.norm(m)
                midpoint[key] = len(verts)
                verts.append(tuple(m))
            return midpoint[key]

        next_tris = []
        for a, b, c in triangles:
            ab, bc, ca = mid(a, b), mid(b, c), mid(c, a)
            next_tris.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
        triangles = np.array(next_tris)
    vertices = np.array(verts, dtype=float)
    vertices /= np.linalg.norm(vertices, axis=1)[:, None]
    return SurfaceMesh(vertices, triangles)


def generate_ball_mesh(level):
    """Tetrahedralization of the unit ball with all boundary vertices on |x|=1.

    The icosphere at ``level`` is replicated on 2**level concentric
    layers with uniform radii j/m, joined to a center vertex by tets on
    the innermost layer and by prisms (split into 3 tets by a global
    lowest-vertex-index diagonal rule) between successive layers.  The
    layer count matches the surface resolution so the mesh stays
    quasi-uniform.  By convexity the mesh domain is a subset of the
    ball.
    """
    if level < 0:
        raise ValueError("level must be a nonnegative integer")
    sphere = generate_sphere_mesh(level)
    ns = sphere.num_vertices
    m = 2**level

    # layer j (radius j/m) occupies ids (m-j)*ns .. (m-j+1)*ns - 1, so the
    # outermost layer reuses the sphere's own vertex numbering
    def vid(v, j):
        return (m - j) * ns + v

    vertices = np.concatenate(
        [sphere.vertices * (j / m) for j in range(m, 0, -1)]
        + [np.zeros((1, 3))],
        axis=0,
    )
    center = m * ns

    tets = []
    for a, b, c in sphere.triangles:
        tets.append((center, vid(a, 1), vid(b, 1), vid(c, 1)))
    for j in range(1, m):
        for tri in sphere.triangles:
            s1, s2, s3 = sorted(int(v) for v in tri)
            a1, a2, a3 = vid(s1, j), vid(s2, j), vid(s3, j)
            b1, b2, b3 = vid(s1, j + 1), vid(s2, j + 1), vid(s3, j + 1)
            tets.append((a1, a2, a3, b3))
            tets.append((a1, a2, b3, b2))
            tets.append((a1, b1, b2, b3))
    return VolumeMesh(vertices, _orient_tets(vertices, tets))


def extract_boundary(mesh):
    """Boundary triangulation of a volume mesh, outward-oriented.

    Vertex indices (and the vertex array) are shared with the volume
    mesh so volume degrees of freedom restrict to surface ones.
    """
    if not isinstance(mesh, VolumeMesh):
        raise ValueError("extract_boundary expects a VolumeMesh")
    return SurfaceMesh(mesh.vertices, mesh.boundary_faces)


def mesh_size(mesh):
    """Longest edge over all elements."""
    if mesh.num_cells == 0:
        raise ValueError("mesh has no elements")
    cells = mesh.tets if isinstance(mesh, VolumeMesh) else mesh.triangles
    table = _TET_EDGES if isinstance(mesh, VolumeMesh) else _TRI_EDGES
    edges = cells[:, table].reshape(-1, 2)
    d = mesh.vertices[edges[:, 0]] - mesh.vertices[edges[:, 1]]
    return float(np.sqrt((d * d).sum(axis=1).max()))


# ---------------------------------------------------------------------------
# Gmsh MSH 2.2 ASCII
# ---------------------------------------------------------------------------

_MSH_NODES_PER_TYPE = {2: 3, 4: 4}


def parse_gmsh_msh(data):
    """Read a Gmsh MSH 2.2 ASCII mesh.

    Accepts bytes, text, or a readable stream.  Element types 2
    (triangle) and 4 (tet) are consumed; all other types and all
    physical/geometric tags are ignored.  Returns a VolumeMesh whenever
    tets are present (triangles are dropped and the boundary is
    re-extracted), otherwise a SurfaceMesh.
    """
    if hasattr(data, "read"):
        data = data.read()
    if isinstance(data, bytes):
        data = data.decode("ascii")
    lines = data.splitlines()
    pos = 0

    def next_line():
        nonlocal pos
        while pos < len(lines):
            pos += 1
            stripped = lines[pos - 1].strip()
            if stripped:
                return stripped
        raise MalformedFileError("unexpected end of file", line=len(lines))

    line = next_line()
    if line != "$MeshFormat":
        raise MalformedFileError("expected $MeshFormat", line=pos)
    fmt = next_line().split()
    if len(fmt) != 3:
        raise MalformedFileError("malformed $MeshFormat line", line=pos)
    if fmt[0] != "2.2" or fmt[1] != "0":
        raise UnsupportedFormatError(
            f"unsupported MSH format '{' '.join(fmt)}', need ASCII 2.2"
        )
    if next_line() != "$EndMeshFormat":
        raise MalformedFileError("expected $EndMeshFormat", line=pos)

    if next_line() != "$Nodes":
        raise MalformedFileError("expected $Nodes", line=pos)
    try:
        n_nodes = int(next_line())
    except ValueError:
        raise MalformedFileError("bad node count", line=pos) from None
    coords = np.empty((n_nodes, 3))
    node_index = {}
    for i in range(n_nodes):
        parts = next_line().split()
        if parts and parts[0].startswith("$"):
            raise MalformedFileError("node count does not match $Nodes body", line=pos)
        if len(parts) != 4:
            raise MalformedFileError("node line must be 'id x y z'", line=pos)
        try:
            nid = int(parts[0])
            coords[i] = [float(parts[1]), float(parts[2]), float(parts[3])]
        except ValueError:
            raise MalformedFileError("unparsable node line", line=pos) from None
        node_index[nid] = i
    if next_line() != "$EndNodes":
        raise MalformedFileError("expected $EndNodes", line=pos)

    if next_line() != "$Elements":
        raise MalformedFileError("expected $Elements", line=pos)
    try:
        n_elems = int(next_line())
    except ValueError:
        raise MalformedFileError("bad element count", line=pos) from None
    tets, triangles = [], []
    for _ in range(n_elems):
        parts = next_line().split()
        if parts and parts[0].startswith("$"):
            raise MalformedFileError(
                "element count does not match $Elements body", line=pos
            )
        try:
            etype = int(parts[1])
            ntags = int(parts[2])
            node_ids = [int(p) for p in parts[3 + ntags :]]
        except (IndexError, ValueError):
            raise MalformedFileError("unparsable element line", line=pos) from None
        if etype not in _MSH_NODES_PER_TYPE:
            continue
        if len(node_ids) != _MSH_NODES_PER_TYPE[etype]:
            raise MalformedFileError(
                f"element of type {etype} needs "
                f"{_MSH_NODES_PER_TYPE[etype]} nodes, got {len(node_ids)}",
                line=pos,
            )
        try:
            conn = [node_index[nid] for nid in node_ids]
        except KeyError as exc:
            raise MalformedFileError(
                f"element references unknown node id {exc.args[0]}", line=pos
            ) from None
        (tets if etype == 4 else triangles).append(conn)
    if next_line() != "$EndElements":
        raise MalformedFileError("expected $EndElements", line=pos)

    if tets:
        return VolumeMesh(coords, _orient_tets(coords, tets))
    if triangles:
        return SurfaceMesh(coords, triangles)
    raise MalformedFileError("file contains no triangles and no tets", line=pos)


def read_msh(path):
    with open(path, "rb") as fh:
        return parse_gmsh_msh(fh)


def write_msh(mesh, path):
    """Write a mesh as Gmsh MSH 2.2 ASCII (types 4 or 2 only)."""
    out = io.StringIO()
    out.write("$MeshFormat\n2.2 0 8\n$EndMeshFormat\n")
    out.write(f"$Nodes\n{mesh.num_vertices}\n")
    for i, (x, y, z) in enumerate(mesh.vertices, start=1):
        out.write(f"{i} {x!r} {y!r} {z!r}\n")
    out.write("$EndNodes\n")
    cells = mesh.tets if isinstance(mesh, VolumeMesh) else mesh.triangles
    etype = 4 if isinstance(mesh, VolumeMesh) else 2
    out.write(f"$Elements\n{len(cells)}\n")
    for i, cell in enumerate(cells, start=1):
        nodes = " ".join(str(v + 1) for v in cell)
        out.write(f"{i} {etype} 2 0 0 {nodes}\n")
    out.write("$EndElements\n")
    with open(path, "w", encoding="ascii") as fh:
        fh.write(out.getvalue())
