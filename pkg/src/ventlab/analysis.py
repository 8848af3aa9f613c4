"""Exact solutions, lifts, eigenspace projections, error norms and the
registered convergence studies.

Studies are looked up by id in :data:`STUDIES`; each runs a
solve/measure pipeline over a refinement sequence and returns a
:class:`ConvergenceReport` with per-level errors and fitted orders.
"""

import math
from dataclasses import dataclass, field as dataclass_field

import numpy as np
import scipy.linalg

from .errors import DegenerateBasisError, StudyError
from .fem import (
    FEFunction,
    assemble_surface_mass,
    assemble_surface_stiffness,
    assemble_volume_mass,
    assemble_volume_stiffness,
    build_fespace,
    evaluate_on_cells,
    interpolate,
    quadrature_rule,
)
from .linalg import cg_solve, ic_factorize, lanczos_shift_invert
from .mesh import (
    generate_ball_mesh,
    generate_sphere_mesh,
    generate_unit_cube_mesh,
    generate_unit_square_mesh,
    mesh_size,
)

_NORM_DEGREE = 8
_CLUSTER_RTOL = 1e-3
_ZERO_CLUSTER_RTOL = 1e-6
_CHUNK = 2048


class AnalyticField:
    """Scalar field on R^3 with an analytic gradient.

    ``value`` maps (m, 3) points to (m,) values, ``gradient`` to (m, 3)
    ambient gradients.
    """

    def __init__(self, value, gradient):
        self._value = value
        self._gradient = gradient

    def value(self, points):
        return np.asarray(self._value(np.atleast_2d(np.asarray(points, float))))

    def gradient(self, points):
        return np.asarray(self._gradient(np.atleast_2d(np.asarray(points, float))))

    @staticmethod
    def from_polynomial(terms):
        """Trivariate polynomial given as {(i, j, k): coefficient}."""
        terms = {tuple(e): float(c) for e, c in terms.items()}

        def value(p):
            out = np.zeros(len(p))
            for (i, j, k), c in terms.items():
                out += c * p[:, 0] ** i * p[:, 1] ** j * p[:, 2] ** k
            return out

        def gradient(p):
            out = np.zeros_like(p)
            for (i, j, k), c in terms.items():
                if i:
                    out[:, 0] += c * i * p[:, 0] ** (i - 1) * p[:, 1] ** j * p[:, 2] ** k
                if j:
                    out[:, 1] += c * j * p[:, 0] ** i * p[:, 1] ** (j - 1) * p[:, 2] ** k
                if k:
                    out[:, 2] += c * k * p[:, 0] ** i * p[:, 1] ** j * p[:, 2] ** (k - 1)
            return out

        return AnalyticField(value, gradient)

    @staticmethod
    def combination(coefficients, fields):
        coefficients = np.asarray(coefficients, float)

        def value(p):
            out = np.zeros(len(p))
            for c, f in zip(coefficients, fields):
                out += c * f.value(p)
            return out

        def gradient(p):
            out = np.zeros_like(p)
            for c, f in zip(coefficients, fields):
                out += c * f.gradient(p)
            return out

        return AnalyticField(value, gradient)


def finite_difference_gradient_error(field, points, step=1e-5):
    """Max relative mismatch between the analytic and central-difference
    gradient; the consistency invariant of every AnalyticField."""
    points = np.atleast_2d(np.asarray(points, float))
    fd = np.empty_like(points)
    for d in range(3):
        dp = np.zeros(3)
        dp[d] = step
        fd[:, d] = (field.value(points + dp) - field.value(points - dp)) / (2 * step)
    g = field.gradient(points)
    scale = np.maximum(np.linalg.norm(g, axis=1), 1.0)
    return float((np.linalg.norm(fd - g, axis=1) / scale).max())


def sphere_lift(field):
    """Compose a field on the unit sphere with the radial projection
    p(x) = x/|x|, with the chain-rule gradient."""

    def project(p):
        r = np.linalg.norm(p, axis=1)
        if np.any(r == 0.0):
            raise ValueError("radial lift is undefined at the origin")
        return p / r[:, None], r

    def value(p):
        q, _ = project(p)
        return field.value(q)

    def gradient(p):
        q, r = project(p)
        g = field.gradient(q)
        radial = np.einsum("ij,ij->i", g, q)
        return (g - radial[:, None] * q) / r[:, None]

    return AnalyticField(value, gradient)


def cosine_solution(dim):
    """Product-of-cosines Neumann eigenfunction on the unit square/cube."""
    if dim not in (2, 3):
        raise ValueError("dim must be 2 or 3")

    def value(p):
        out = np.cos(np.pi * p[:, 0]) * np.cos(np.pi * p[:, 1])
        if dim == 3:
            out = out * np.cos(np.pi * p[:, 2])
        return out

    def gradient(p):
        c = [np.cos(np.pi * p[:, d]) for d in range(3)]
        s = [np.sin(np.pi * p[:, d]) for d in range(3)]
        if dim == 2:
            c[2] = np.ones(len(p))
            s[2] = np.zeros(len(p))
        out = np.empty_like(p)
        out[:, 0] = -np.pi * s[0] * c[1] * c[2]
        out[:, 1] = -np.pi * c[0] * s[1] * c[2]
        out[:, 2] = -np.pi * c[0] * c[1] * s[2] if dim == 3 else 0.0
        return out

    return AnalyticField(value, gradient)


def cosine_eigenbasis(dim):
    """Span of cos(pi x_d): the first nonzero Neumann Laplace eigenspace."""
    members = []
    for d in range(dim):

        def value(p, d=d):
            return np.cos(np.pi * p[:, d])

        def gradient(p, d=d):
            out = np.zeros_like(p)
            out[:, d] = -np.pi * np.sin(np.pi * p[:, d])
            return out

        members.append(AnalyticField(value, gradient))
    return EigenspaceBasis(members)


def exponential_solution():
    """u = exp(x), the Laplace-Beltrami manufactured solution (pre-lift)."""
    return AnalyticField(
        lambda p: np.exp(p[:, 0]),
        lambda p: np.stack([np.exp(p[:, 0]), np.zeros(len(p)), np.zeros(len(p))], axis=1),
    )


def exponential_rhs():
    """f = x (2 + x) exp(x) matching -Lap_B u + u = f for u = exp(x)."""
    return AnalyticField(
        lambda p: p[:, 0] * (2.0 + p[:, 0]) * np.exp(p[:, 0]),
        lambda p: np.stack(
            [
                (p[:, 0] ** 2 + 4.0 * p[:, 0] + 2.0) * np.exp(p[:, 0]),
                np.zeros(len(p)),
                np.zeros(len(p)),
            ],
            axis=1,
        ),
    )


class EigenspaceBasis:
    """Analytic fields spanning an exact eigenspace (or its lift)."""

    def __init__(self, members):
        self.members = list(members)

    @property
    def dimension(self):
        return len(self.members)


# real solid harmonics of degree n, as monomial dictionaries
_SOLID_HARMONICS = {
    0: [{(0, 0, 0): 1}],
    1: [{(1, 0, 0): 1}, {(0, 1, 0): 1}, {(0, 0, 1): 1}],
    2: [
        {(1, 1, 0): 1},
        {(0, 1, 1): 1},
        {(1, 0, 1): 1},
        {(2, 0, 0): 1, (0, 2, 0): -1},
        {(0, 0, 2): 2, (2, 0, 0): -1, (0, 2, 0): -1},
    ],
    3: [
        {(3, 0, 0): 1, (1, 2, 0): -3},
        {(2, 1, 0): 3, (0, 3, 0): -1},
        {(1, 1, 1): 1},
        {(2, 0, 1): 1, (0, 2, 1): -1},
        {(1, 0, 2): 4, (3, 0, 0): -1, (1, 2, 0): -1},
        {(0, 1, 2): 4, (2, 1, 0): -1, (0, 3, 0): -1},
        {(0, 0, 3): 2, (2, 0, 1): -3, (0, 2, 1): -3},
    ],
    4: [
        {(4, 0, 0): 1, (2, 2, 0): -6, (0, 4, 0): 1},
        {(3, 1, 0): 1, (1, 3, 0): -1},
        {(3, 0, 1): 1, (1, 2, 1): -3},
        {(2, 1, 1): 3, (0, 3, 1): -1},
        {(2, 0, 2): 6, (0, 2, 2): -6, (4, 0, 0): -1, (0, 4, 0): 1},
        {(1, 1, 2): 6, (3, 1, 0): -1, (1, 3, 0): -1},
        {(1, 0, 3): 4, (3, 0, 1): -3, (1, 2, 1): -3},
        {(0, 1, 3): 4, (2, 1, 1): -3, (0, 3, 1): -3},
        {(0, 0, 4): 8, (2, 0, 2): -24, (0, 2, 2): -24, (4, 0, 0): 3, (2, 2, 0): 6, (0, 4, 0): 3},
    ],
}


def harmonic_basis(n):
    """Real solid harmonics of degree n (2n+1 of them), restricted to
    the computational domain by plain evaluation."""
    if n not in _SOLID_HARMONICS:
        raise ValueError(f"harmonic basis implemented for n in 0..4, got {n}")
    return EigenspaceBasis(
        [AnalyticField.from_polynomial(t) for t in _SOLID_HARMONICS[n]]
    )


def lifted_sphere_eigenbasis():
    """Coordinate functions lifted to x/|x| scaling: the first nonzero
    Laplace-Beltrami eigenspace on the unit sphere."""
    coords = harmonic_basis(1).members
    return EigenspaceBasis([sphere_lift(c) for c in coords])


# ---------------------------------------------------------------------------
# quadrature-based norms and projections
# ---------------------------------------------------------------------------


def _field_on_cells(space, target, ref_coords, sel, points, gradients=True):
    """Values/gradients of an FEFunction or AnalyticField on mapped points."""
    if isinstance(target, FEFunction):
        return evaluate_on_cells(target, ref_coords, sel=sel, gradients=gradients)
    shape = points.shape[:2]
    vals = target.value(points.reshape(-1, 3)).reshape(shape)
    grads = None
    if gradients:
        grads = target.gradient(points.reshape(-1, 3)).reshape(shape + (3,))
    return vals, grads


def _tangential(geom, sel, grads):
    normal = geom["normal"][sel]
    radial = np.einsum("eqi,ei->eq", grads, normal)
    return grads - radial[:, :, None] * normal[:, None, :]


def difference_norms(uh, exact=None, min_degree=_NORM_DEGREE):
    """Squared L2/H1-seminorm integrals of u_h, exact and their difference.

    Surface gradients (of both fields) are projected onto the triangle
    planes, so H1 quantities are tangential on surface meshes.
    """
    space = uh.space
    rule = quadrature_rule(space.ref.simplex_dim, min_degree)
    geom = space.geometry()
    acc = {k: 0.0 for k in (
        "err_l2", "err_h1", "uh_l2", "uh_h1", "exact_l2", "exact_h1")}
    ncells = space.mesh.num_cells
    for lo in range(0, ncells, _CHUNK):
        sel = slice(lo, min(lo + _CHUNK, ncells))
        wdet = rule.weights[None, :] * geom["det"][sel, None]
        pts = space.physical_points(rule.ref_coords, sel=sel)
        vh, gh = evaluate_on_cells(uh, rule.ref_coords, sel=sel)
        acc["uh_l2"] += float((wdet * vh**2).sum())
        acc["uh_h1"] += float((wdet * (gh**2).sum(axis=2)).sum())
        if exact is None:
            continue
        ve, ge = _field_on_cells(space, exact, rule.ref_coords, sel, pts)
        if not space.is_volume:
            ge = _tangential(geom, sel, ge)
        acc["exact_l2"] += float((wdet * ve**2).sum())
        acc["exact_h1"] += float((wdet * (ge**2).sum(axis=2)).sum())
        acc["err_l2"] += float((wdet * (vh - ve) ** 2).sum())
        acc["err_h1"] += float((wdet * ((gh - ge) ** 2).sum(axis=2)).sum())
    return acc


def l2_error(uh, exact, relative=False, min_degree=_NORM_DEGREE):
    """Quadrature L2 norm of (u_h - exact), optionally relative."""
    acc = difference_norms(uh, exact, min_degree)
    err = math.sqrt(max(acc["err_l2"], 0.0))
    if relative:
        return err / math.sqrt(acc["exact_l2"])
    return err


def h1_error(uh, exact, seminorm=True, relative=False, min_degree=_NORM_DEGREE):
    """H1 seminorm (default) or full H1 norm of (u_h - exact)."""
    acc = difference_norms(uh, exact, min_degree)
    err2 = acc["err_h1"] + (0.0 if seminorm else acc["err_l2"])
    if not relative:
        return math.sqrt(max(err2, 0.0))
    den2 = acc["exact_h1"] + (0.0 if seminorm else acc["exact_l2"])
    return math.sqrt(max(err2, 0.0) / den2)


class ProjectedField(AnalyticField):
    """L2-orthogonal projection of a function onto an eigenspace basis."""

    def __init__(self, basis, coefficients):
        self.basis = basis
        self.coefficients = np.asarray(coefficients, float)
        combo = AnalyticField.combination(self.coefficients, basis.members)
        super().__init__(combo._value, combo._gradient)


def project_onto_eigenspace(target, basis, space, min_degree=_NORM_DEGREE):
    """L2(mesh)-orthogonal projection of ``target`` onto ``basis``.

    ``target`` may be an FEFunction on ``space`` or any AnalyticField.
    Assembles the basis Gram matrix and moment vector by quadrature over
    the mesh of ``space`` and solves the normal equations.
    """
    rule = quadrature_rule(space.ref.simplex_dim, min_degree)
    geom = space.geometry()
    nb = basis.dimension
    gram = np.zeros((nb, nb))
    moments = np.zeros(nb)
    ncells = space.mesh.num_cells
    for lo in range(0, ncells, _CHUNK):
        sel = slice(lo, min(lo + _CHUNK, ncells))
        wdet = rule.weights[None, :] * geom["det"][sel, None]
        pts = space.physical_points(rule.ref_coords, sel=sel)
        flat = pts.reshape(-1, 3)
        bvals = np.stack([m.value(flat) for m in basis.members])
        bvals = bvals.reshape(nb, *pts.shape[:2])
        tvals, _ = _field_on_cells(space, target, rule.ref_coords, sel, pts,
                                   gradients=False)
        gram += np.einsum("aeq,beq,eq->ab", bvals, bvals, wdet)
        moments += np.einsum("aeq,eq,eq->a", bvals, tvals, wdet)
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > 1e12:
        raise DegenerateBasisError(
            f"eigenspace Gram matrix is numerically singular (cond={cond:.3e})"
        )
    coeffs = scipy.linalg.solve(gram, moments, assume_a="pos")
    return ProjectedField(basis, coeffs)


def convergence_order(hs, errors):
    """Least-squares slope of log(error) against log(h)."""
    hs = np.asarray(hs, float)
    errors = np.asarray(errors, float)
    if len(hs) < 2 or len(hs) != len(errors):
        raise ValueError("need at least two (h, error) samples")
    if np.any(np.diff(hs) >= 0.0):
        raise ValueError("mesh sizes must be strictly decreasing")
    if np.any(errors <= 0.0):
        raise ValueError("errors must be positive to fit an order")
    slope = np.polyfit(np.log(hs), np.log(errors), 1)[0]
    return float(slope)


def pairwise_orders(hs, errors):
    out = []
    for i in range(len(hs) - 1):
        out.append(
            math.log(errors[i] / errors[i + 1]) / math.log(hs[i] / hs[i + 1])
        )
    return out


# ---------------------------------------------------------------------------
# eigenvalue cluster bookkeeping
# ---------------------------------------------------------------------------


def cluster_eigenvalues(values):
    """Group sorted eigenvalues: a near-zero cluster, then clusters of
    values within a relative gap of 1e-3."""
    values = sorted(values)
    if not values:
        return []
    scale = max(abs(values[0]), abs(values[-1]))
    zero_tol = _ZERO_CLUSTER_RTOL * max(scale, 1e-300)
    clusters = []
    zero = [v for v in values if abs(v) <= zero_tol]
    if zero:
        clusters.append(zero)
    current = None
    for v in values:
        if abs(v) <= zero_tol:
            continue
        if current is not None and v - current[-1] <= _CLUSTER_RTOL * abs(v):
            current.append(v)
        else:
            current = [v]
            clusters.append(current)
    return clusters


def select_target_eigenvalue(pairs, n):
    """Pick the approximation of the n-th nonzero eigenvalue.

    Drops the near-zero cluster, then takes the cluster holding ordinal
    position n^2 + 1 (clusters of multiplicity 2m+1 for m < n precede
    it) and returns the pair of that cluster's smallest member.
    """
    values = [p.eigenvalue for p in pairs]
    clusters = cluster_eigenvalues(values)
    if not clusters:
        raise StudyError("eigensolver returned no eigenvalues")
    scale = max(abs(v) for v in values)
    zero_tol = _ZERO_CLUSTER_RTOL * max(scale, 1e-300)
    nonzero_clusters = [c for c in clusters if abs(c[0]) > zero_tol]
    position = n * n + 1
    count = 0
    for cluster in nonzero_clusters:
        if count < position <= count + len(cluster):
            target = cluster[0]
            pair = min(
                (p for p in pairs if p.eigenvalue in cluster),
                key=lambda p: p.eigenvalue,
            )
            assert pair.eigenvalue == target
            return pair, cluster
        count += len(cluster)
    raise StudyError(
        f"not enough eigenvalues to reach cluster position {position}; "
        f"got {len(values)} values in {len(clusters)} clusters"
    )


# ---------------------------------------------------------------------------
# studies
# ---------------------------------------------------------------------------


@dataclass
class LevelRecord:
    level: int
    h: float
    ndof: int
    e_h1: float
    e_l2: float
    e_lambda: float | None = None
    lambda_h: float | None = None
    max_algebraic_residual: float | None = None
    max_functional_residual: float | None = None
    max_cg_residual: float | None = None


@dataclass
class ConvergenceReport:
    study: str
    degree: int
    eigen_index: int | None
    rows: list = dataclass_field(default_factory=list)

    _COLUMNS = ("e_h1", "e_l2", "e_lambda")

    def errors(self, column):
        return [getattr(r, column) for r in self.rows]

    def has_column(self, column):
        vals = self.errors(column)
        return all(v is not None for v in vals)

    def fitted_orders(self):
        """Least-squares order per error column; None when the column is
        absent or an error hit the floor (nonpositive)."""
        out = {}
        hs = [r.h for r in self.rows]
        for col in self._COLUMNS:
            if not self.rows or not self.has_column(col):
                out[col] = None
                continue
            try:
                out[col] = convergence_order(hs, self.errors(col))
            except ValueError:
                out[col] = None
        return out

    def pairwise(self, column):
        return pairwise_orders([r.h for r in self.rows], self.errors(column))


def _solve_spd(system, rhs, stats):
    precond = ic_factorize(system)
    info = {}
    x = cg_solve(system, rhs, tol=1e-11, precond=precond, info=info)
    stats["max_cg_residual"] = max(stats.get("max_cg_residual") or 0.0,
                                   info["residual"])
    return x


def _source_level(mesh, degree, exact, rhs_field):
    space = build_fespace(mesh, degree)
    if space.is_volume:
        stiff, mass = assemble_volume_stiffness(space), assemble_volume_mass(space)
    else:
        stiff, mass = assemble_surface_stiffness(space), assemble_surface_mass(space)
    system = stiff + mass
    rhs = mass @ interpolate(space, rhs_field).coefficients
    stats = {}
    coeffs = _solve_spd(system, rhs, stats)
    uh = FEFunction(space, coeffs)
    return space, uh, stats


def _flat_source_level(level, degree, seed, n, dim):
    mesh = (generate_unit_square_mesh if dim == 2 else generate_unit_cube_mesh)(level)
    exact = cosine_solution(dim)
    factor = dim * np.pi**2 + 1.0
    rhs_field = AnalyticField(
        lambda p: factor * exact.value(p),
        lambda p: factor * exact.gradient(p),
    )
    space, uh, stats = _source_level(mesh, degree, exact, rhs_field)
    return LevelRecord(
        level=level,
        h=mesh_size(mesh),
        ndof=space.ndof,
        e_h1=h1_error(uh, exact, seminorm=True, relative=True),
        e_l2=l2_error(uh, exact, relative=True),
        **stats,
    )


def _lb_source_level(level, degree, seed, n):
    mesh = generate_sphere_mesh(level)
    space = build_fespace(mesh, degree)
    exact = sphere_lift(exponential_solution())
    rhs_field = sphere_lift(exponential_rhs())
    stiff, mass = assemble_surface_stiffness(space), assemble_surface_mass(space)
    system = stiff + mass
    rhs = mass @ interpolate(space, rhs_field).coefficients
    stats = {}
    coeffs = _solve_spd(system, rhs, stats)
    uh = FEFunction(space, coeffs)
    return LevelRecord(
        level=level,
        h=mesh_size(mesh),
        ndof=space.ndof,
        e_h1=h1_error(uh, exact, seminorm=False, relative=False),
        e_l2=l2_error(uh, exact, relative=False),
        **stats,
    )


def _run_eigensolver(A, B, nev, seed, mass=None):
    pairs, info = lanczos_shift_invert(
        A, B, nev=nev, sigma=-1.0, tol=1e-10, seed=seed, mass=mass,
        return_info=True,
    )
    stats = {
        "max_algebraic_residual": max(p.algebraic_residual for p in pairs),
        "max_functional_residual": max(p.functional_residual for p in pairs),
        "max_cg_residual": info["cg"]["max_residual"],
    }
    return pairs, stats


def _flat_eig_level(level, degree, seed, n, dim):
    mesh = (generate_unit_square_mesh if dim == 2 else generate_unit_cube_mesh)(level)
    space = build_fespace(mesh, degree)
    if space.is_volume:
        stiff, mass = assemble_volume_stiffness(space), assemble_volume_mass(space)
    else:
        stiff, mass = assemble_surface_stiffness(space), assemble_surface_mass(space)
    pairs, stats = _run_eigensolver(A=stiff, B=mass, nev=dim + 4, seed=seed)
    pair, _ = select_target_eigenvalue(pairs, 1)
    target = np.pi**2
    uh = FEFunction(space, pair.vector)
    proj = project_onto_eigenspace(uh, cosine_eigenbasis(dim), space)
    return LevelRecord(
        level=level,
        h=mesh_size(mesh),
        ndof=space.ndof,
        e_h1=h1_error(uh, proj, seminorm=False, relative=False),
        e_l2=l2_error(uh, proj, relative=False),
        e_lambda=abs(pair.eigenvalue - target) / target,
        lambda_h=pair.eigenvalue,
        **stats,
    )


def _lb_eig_level(level, degree, seed, n):
    mesh = generate_sphere_mesh(level)
    space = build_fespace(mesh, degree)
    stiff, mass = assemble_surface_stiffness(space), assemble_surface_mass(space)
    pairs, stats = _run_eigensolver(A=stiff, B=mass, nev=7, seed=seed)
    pair, _ = select_target_eigenvalue(pairs, 1)
    target = 2.0
    uh = FEFunction(space, pair.vector)
    proj = project_onto_eigenspace(uh, lifted_sphere_eigenbasis(), space)
    den = math.sqrt(float(pair.vector @ (mass @ pair.vector)))
    return LevelRecord(
        level=level,
        h=mesh_size(mesh),
        ndof=space.ndof,
        e_h1=h1_error(uh, proj, seminorm=False, relative=False) / den,
        e_l2=l2_error(uh, proj, relative=False) / den,
        e_lambda=abs(pair.eigenvalue - target) / target,
        lambda_h=pair.eigenvalue,
        **stats,
    )


def _ventcel_level(level, degree, seed, n):
    mesh = generate_ball_mesh(level)
    space = build_fespace(mesh, degree)
    volume_stiff = assemble_volume_stiffness(space)
    surface_stiff = assemble_surface_stiffness(space)
    surface_mass = assemble_surface_mass(space)
    volume_mass = assemble_volume_mass(space)
    A = volume_stiff + surface_stiff
    nev = (n + 1) ** 2 + 3
    pairs, stats = _run_eigensolver(A=A, B=surface_mass, nev=nev, seed=seed,
                                    mass=volume_mass)
    pair, _ = select_target_eigenvalue(pairs, n)
    target = float(n * n + 2 * n)
    uh = FEFunction(space, pair.vector)
    proj = project_onto_eigenspace(uh, harmonic_basis(n), space)
    return LevelRecord(
        level=level,
        h=mesh_size(mesh),
        ndof=space.ndof,
        e_h1=h1_error(uh, proj, seminorm=True, relative=False),
        e_l2=l2_error(uh, proj, relative=False),
        e_lambda=abs(pair.eigenvalue - target) / target,
        lambda_h=pair.eigenvalue,
        **stats,
    )


@dataclass(frozen=True)
class StudyDef:
    runner: object
    default_levels: tuple
    has_eigenvalue: bool
    kwargs: dict = dataclass_field(default_factory=dict)


STUDIES = {
    "flat2d_source": StudyDef(_flat_source_level, (8, 16, 32, 64), False, {"dim": 2}),
    "flat3d_source": StudyDef(_flat_source_level, (4, 8, 16), False, {"dim": 3}),
    "flat2d_eig": StudyDef(_flat_eig_level, (8, 16, 32), True, {"dim": 2}),
    "flat3d_eig": StudyDef(_flat_eig_level, (2, 4, 8), True, {"dim": 3}),
    "lb_sphere_source": StudyDef(_lb_source_level, (1, 2, 3, 4), False),
    "lb_sphere_eig": StudyDef(_lb_eig_level, (1, 2, 3, 4), True),
    "ventcel_ball": StudyDef(_ventcel_level, (1, 2, 3), True),
}


def run_study(study, degree, levels=None, seed=0, n=1, on_level=None):
    """Run a registered study over a refinement sequence.

    ``on_level`` is called with each LevelRecord as it completes.  A
    level failure raises StudyError carrying the partial report.
    """
    if study not in STUDIES:
        raise ValueError(f"unknown study '{study}'; known: {sorted(STUDIES)}")
    sdef = STUDIES[study]
    if levels is None:
        levels = sdef.default_levels
    levels = list(levels)
    if not levels:
        raise ValueError("level list must not be empty")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be strictly increasing")
    report = ConvergenceReport(
        study=study, degree=degree, eigen_index=n if sdef.has_eigenvalue else None
    )
    for level in levels:
        try:
            row = sdef.runner(level, degree, seed, n, **sdef.kwargs)
        except Exception as exc:
            raise StudyError(
                f"study {study} (degree {degree}) failed at level {level}: {exc}",
                report=report,
            ) from exc
        report.rows.append(row)
        if on_level is not None:
            on_level(row)
    return report
