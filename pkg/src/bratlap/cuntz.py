"""Cuntz-Krieger path operators, the affine eigenvalue recursion, the
companion-matrix lattice embedding, and the Pisot strip bound.

The partial isometries insert or delete an edge directly below the root; on
eigenvalues they act as affine maps u_e(x) = Lambda_s * x + beta_e.  The table
of beta constants is re-derived against the laplacian sign convention and
self-calibrated on oracle data before it is accepted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import mpmath
import numpy as np

from . import _linalg
from .diagram import EMPTY_PATH, BratteliDiagram, Path, enumerate_paths
from .laplacian import (
    SpectralRecord,
    _add,
    _invert,
    _mul,
    _neg,
    full_spectrum,
    g_value,
)
from .measure import DEFAULT_APPROX_BITS, WeightSystem, mu
from .scalar import (
    ApproxBackend,
    ApproxReal,
    ExactnessError,
    QuadraticBackend,
    QuadraticNumber,
    to_float,
)


class CuntzError(ValueError):
    pass


def path_shift_down(diagram: BratteliDiagram, edge_index: int,
                    path: Path) -> Path | None:
    """Insert an edge just below the root: (eps, e1, ...) -> (eps', e, e1, ...)
    when e composes with e1, keeping the symmetry slot; None when it does not."""
    if path.generation < 2:
        raise CuntzError("shift down needs a path of generation >= 2")
    e = diagram.edges[edge_index]
    first = diagram.edges[path.edges[0]]
    if e.target != first.source:
        return None
    slot = diagram.root_edges[path.root].slot
    return Path(diagram.root_edge_index(e.source, slot), (edge_index,) + path.edges)


def path_shift_up(diagram: BratteliDiagram, edge_index: int,
                  path: Path) -> Path | None:
    """Delete the first non-root edge when it equals e, re-rooting at the next
    edge's source; None otherwise."""
    if path.generation < 3:
        raise CuntzError("shift up needs a path of generation >= 3")
    if path.edges[0] != edge_index:
        return None
    nxt = diagram.edges[path.edges[1]]
    slot = diagram.root_edges[path.root].slot
    return Path(diagram.root_edge_index(nxt.source, slot), path.edges[1:])


@dataclass
class CKReport:
    ok: bool
    depth: int
    paths_checked: int
    failures: list[str]

    def lines(self) -> list[str]:
        head = f"cuntz-krieger relations to depth {self.depth}: " \
               f"{'PASS' if self.ok else 'FAIL'} ({self.paths_checked} paths)"
        return [head] + [f"  {f}" for f in self.failures]


def ck_relations_check(diagram: BratteliDiagram, depth: int,
                       adjacency=None) -> CKReport:
    """Verify the partial-isometry relations on all paths up to the given depth:
    the domain of each U_e must be the disjoint union of the ranges of the U_f
    it composes with, and up/down shifts must invert each other.

    A corrupted adjacency matrix can be injected to exercise the failure path."""
    if depth < 3:
        raise CuntzError("relation check needs depth >= 3")
    if adjacency is None:
        adjacency = tuple(
            tuple(1 if e.target == f.source else 0 for f in diagram.edges)
            for e in diagram.edges)
    failures: list[str] = []
    checked = 0
    for gen in range(2, depth + 1):
        table = enumerate_paths(diagram, gen)
        for gamma in table.paths:
            checked += 1
            first = gamma.edges[0]
            for ei in range(len(diagram.edges)):
                down = path_shift_down(diagram, ei, gamma)
                in_domain = down is not None
                claimed = adjacency[ei][first] == 1
                if in_domain != claimed:
                    failures.append(
                        f"U_{ei}*U_{ei} disagrees with the adjacency row on path "
                        f"{diagram.format_path(gamma)}")
                if down is not None:
                    back = path_shift_up(diagram, ei, down)
                    if back != gamma:
                        failures.append(
                            f"shift_up(shift_down) != id on {diagram.format_path(gamma)}")
            if gen >= 3:
                up = path_shift_up(diagram, first, gamma)
                if up is None or path_shift_down(diagram, first, up) != gamma:
                    failures.append(
                        f"shift_down(shift_up) != id on {diagram.format_path(gamma)}")
            if len(failures) > 20:
                return CKReport(False, depth, checked, failures)
    return CKReport(not failures, depth, checked, failures)


@dataclass(frozen=True)
class AffineMapTable:
    """Per-edge affine maps u_e(x) = Lambda_s x + beta_e on the spectrum."""

    ws: WeightSystem
    s: Fraction
    lam: object
    lam_float: float
    betas: tuple
    betas_float: tuple[float, ...]
    calibration_checks: int

    @property
    def diagram(self) -> BratteliDiagram:
        return self.ws.diagram

    def apply(self, edge_index: int, value):
        return _add(_mul(self.lam, value), self.betas[edge_index])

    def apply_float(self, edge_index: int, value: float) -> float:
        return self.lam_float * value + self.betas_float[edge_index]


def _lambda_scalar(ws: WeightSystem, s: Fraction):
    """Lambda_s = theta^((d+2-s)/d), exact whenever the power stays in the field."""
    d = ws.dimension
    expo = Fraction(d + 2 - s)
    if expo.denominator == 1 and ws.perron.inflation_exact:
        return ws.perron.inflation_power(expo.numerator)
    if ws.backend.is_exact:
        try:
            return ws.backend.pow_fraction(ws.perron.theta, expo / d)
        except ExactnessError:
            pass
    bits = ws.backend.precision if isinstance(ws.backend, ApproxBackend) \
        else DEFAULT_APPROX_BITS
    with mpmath.workprec(bits):
        tf = ApproxReal.make(ws.perron.theta, bits)
        ev = mpmath.mpf((expo / d).numerator) / (expo / d).denominator
        return ApproxReal(mpmath.power(tf.value, ev), bits)


def affine_table(ws: WeightSystem, s, validate: bool = True) -> AffineMapTable:
    """Build the recursion constants.

    beta_e couples the root-level correction terms for inserting e below the
    root; increments across single-extension prefixes vanish and are skipped.
    With validate=True the table is only returned after u_e(lambda_gamma) =
    lambda_(U_e gamma) has been confirmed on all applicable paths through
    generation 3 (hard failure otherwise)."""
    s = Fraction(s)
    diagram = ws.diagram
    lam = _lambda_scalar(ws, s)
    zero = ws.backend.zero

    root_split = len(diagram.root_edges) >= 2
    inv_g_root = _invert(g_value(ws, EMPTY_PATH, s)) if root_split else None
    one = ws.backend.one

    betas = []
    for edge_index, e in enumerate(diagram.edges):
        eps = Path(diagram.root_edge_index(e.target))
        eps_prime = Path(diagram.root_edge_index(e.source))
        beta = zero
        if root_split:
            term1 = _neg(_mul(lam, _mul(mu(ws, eps) - one, inv_g_root)))
            term2 = _mul(mu(ws, eps_prime) - one, inv_g_root)
            beta = _add(term1, term2)
        if len(diagram.out_edges[e.source]) >= 2:
            extended = eps_prime.child(edge_index)
            inc = mu(ws, extended) - mu(ws, eps_prime)
            beta = _add(beta, _mul(inc, _invert(g_value(ws, eps_prime, s))))
        betas.append(beta)

    table = AffineMapTable(ws, s, lam, to_float(lam), tuple(betas),
                           tuple(to_float(b) for b in betas), 0)
    if validate:
        checks = _self_calibrate(table)
        table = AffineMapTable(ws, s, lam, to_float(lam), tuple(betas),
                               tuple(to_float(b) for b in betas), checks)
    return table


def _self_calibrate(table: AffineMapTable) -> int:
    """Require u_e(lambda_gamma) = lambda_(U_e gamma) on oracle data at depth 3."""
    ws = table.ws
    diagram = table.diagram
    exact = ws.backend.is_exact and not isinstance(table.lam, ApproxReal) and \
        not any(isinstance(b, ApproxReal) for b in table.betas)
    by_path = {rec.path: rec
               for rec in full_spectrum(ws, 4, table.s) if rec.label == "path"}
    checks = 0
    for gen in (2, 3):
        for gamma in enumerate_paths(diagram, gen).paths:
            rec = by_path.get(gamma)
            if rec is None:
                continue
            for ei in range(len(diagram.edges)):
                shifted = path_shift_down(diagram, ei, gamma)
                if shifted is None:
                    continue
                direct = by_path[shifted]
                via_map = table.apply(ei, rec.value)
                if exact:
                    agree = ws.backend.compare(direct.value, via_map) == 0
                else:
                    scale = max(1.0, abs(direct.value_float))
                    agree = abs(direct.value_float - to_float(via_map)) <= 1e-9 * scale
                if not agree:
                    raise CuntzError(
                        f"affine-table self-calibration failed on edge {ei} over "
                        f"{diagram.format_path(gamma)}: direct {direct.value_float!r} "
                        f"vs map {to_float(via_map)!r}")
                checks += 1
    if checks == 0:
        raise CuntzError("self-calibration found no applicable oracle paths")
    return checks


def _prepend(diagram: BratteliDiagram, edge_index: int, path: Path) -> Path | None:
    """Like path_shift_down but also accepts generation-1 paths (seed step)."""
    e = diagram.edges[edge_index]
    first_vertex = diagram.root_edges[path.root].vertex
    if e.target != first_vertex:
        return None
    slot = diagram.root_edges[path.root].slot
    return Path(diagram.root_edge_index(e.source, slot), (edge_index,) + path.edges)


def seed_records(ws: WeightSystem, s) -> list[SpectralRecord]:
    """Zero, root, and generation-1 records: the finite data the recursion grows from."""
    return full_spectrum(ws, 1, s)


def recursive_spectrum(table: AffineMapTable, seeds: list[SpectralRecord],
                       depth: int, embedding: "CompanionData | None" = None,
                       cap: int = 10_000_000) -> list[SpectralRecord]:
    """Spectrum through the given generation grown by the affine maps alone:
    each record of generation n+1 is u_e applied to a generation-n record.

    With an embedding, lattice coordinates are accumulated alongside the
    recursion via coords(u_e x) = C coords(x) + coords(beta_e)."""
    diagram = table.diagram
    ws = table.ws
    out = list(seeds)
    if embedding is not None:
        out = [_with_coords(rec, embedding) for rec in out]
    if depth <= 1:
        return out

    beta_coords = None
    if embedding is not None:
        beta_coords = [lattice_coords(embedding, b) for b in table.betas]
        cmat = [[Fraction(v) for v in row] for row in embedding.matrix]

    level = [rec for rec in out if rec.label == "path" and rec.generation == 1]
    produced = len(out)
    for gen in range(2, depth + 1):
        nxt: list[SpectralRecord] = []
        for rec in level:
            for ei in range(len(diagram.edges)):
                shifted = _prepend(diagram, ei, rec.path)
                if shifted is None:
                    continue
                val = table.apply(ei, rec.value)
                coords = None
                if embedding is not None:
                    coords = tuple(
                        sum(cmat[i][j] * rec.coords[j] for j in range(len(cmat)))
                        + beta_coords[ei][i]
                        for i in range(len(cmat)))
                nxt.append(SpectralRecord("path", shifted, gen, val,
                                          to_float(val), rec.multiplicity, coords))
        nxt.sort(key=lambda r: (r.path.root, r.path.edges))
        produced += len(nxt)
        if produced > cap:
            raise CuntzError(f"recursion exceeded the {cap}-record cap")
        out.extend(nxt)
        level = nxt
    return out


def _with_coords(rec: SpectralRecord, embedding: "CompanionData") -> SpectralRecord:
    coords = lattice_coords(embedding, rec.value)
    return SpectralRecord(rec.label, rec.path, rec.generation, rec.value,
                          rec.value_float, rec.multiplicity, coords)


@dataclass(frozen=True)
class CompanionData:
    """Multiplication by theta^(2/d) on the quotient ring Q[x]/(Q), where Q
    substitutes x^(d/2) (d even) or x^d (d odd, matrix squared) into the exact
    annihilating polynomial of theta.  Basis: powers of x = theta^(1/d')."""

    poly: tuple[int, ...]            # annihilating polynomial of theta, ascending
    degree: int                      # lattice dimension
    matrix: tuple[tuple[int, ...], ...]
    dimension: int
    basis_value: object | None       # exact scalar for x, when the field holds it
    basis_float: float
    pisot: bool
    hyperbolic: bool
    stable_norm: float
    eigenvalues: tuple[complex, ...]
    unstable_basis: np.ndarray       # orthonormal columns spanning V_u
    p_inv_norm: float
    action_verified: str             # "exact" | "numeric"

    def distance_to_unstable(self, coords) -> float:
        c = np.array([float(x) for x in coords])
        proj = self.unstable_basis @ (self.unstable_basis.T @ c)
        return float(np.linalg.norm(c - proj))


def _theta_min_poly(matrix) -> tuple[list[int], float]:
    coeffs = _linalg.char_poly([list(r) for r in matrix])
    theta_float = float(max(abs(v) for v in np.linalg.eigvals(np.array(matrix, float))))
    int_roots, residual = _linalg.deflate_integer_roots(coeffs)
    for r in int_roots:
        if abs(r - theta_float) < 1e-9 * max(1.0, theta_float):
            return [-r, 1], theta_float
    if len(residual) - 1 == 2:
        return residual, theta_float
    from .measure import _quadratic_factor_near
    factor = _quadratic_factor_near(residual, theta_float)
    if factor is not None:
        p, q = factor
        return [q, p, 1], theta_float
    # fall back to the full deflated annihilating factor
    return residual, theta_float


def _companion(poly: list[int]) -> list[list[int]]:
    m = len(poly) - 1
    c = [[0] * m for _ in range(m)]
    for i in range(1, m):
        c[i][i - 1] = 1
    for i in range(m):
        c[i][m - 1] = -poly[i]
    return c


def companion_embedding(matrix, dimension: int,
                        field_backend: QuadraticBackend | None = None) -> CompanionData:
    """Lattice model of multiplication by theta^(2/d), with Pisot and
    hyperbolicity flags read off the companion spectrum."""
    if dimension < 1:
        raise CuntzError("dimension must be >= 1")
    poly, theta_float = _theta_min_poly(matrix)
    d_prime = dimension // 2 if dimension % 2 == 0 else dimension
    subst = [0] * ((len(poly) - 1) * d_prime + 1)
    for k, c in enumerate(poly):
        subst[k * d_prime] = c
    comp = _companion(subst)
    cmat = comp if dimension % 2 == 0 else _linalg.mat_mul(comp, comp)
    degree = len(cmat)

    basis_float = theta_float ** (1.0 / d_prime)
    basis_value = None
    if field_backend is not None:
        try:
            from .measure import _exact_theta
            theta_exact = _exact_theta(tuple(tuple(r) for r in matrix), field_backend)
            basis_value = field_backend.pow_fraction(theta_exact, Fraction(1, d_prime))
        except Exception:
            basis_value = None

    eigs = np.linalg.eigvals(np.array(cmat, float))
    mods = np.abs(eigs)
    unstable_mask = mods > 1.0
    hyperbolic = bool(np.all(np.abs(mods - 1.0) > 1e-9))
    pisot = bool(hyperbolic and unstable_mask.sum() == 1)
    stable_mods = mods[~unstable_mask]
    stable_norm = float(stable_mods.max()) if stable_mods.size else 0.0

    w, p = np.linalg.eig(np.array(cmat, float))
    p = p / np.linalg.norm(p, axis=0)
    p_inv_norm = float(np.linalg.norm(np.linalg.inv(p), 2))
    cols = []
    for k in range(degree):
        if abs(w[k]) > 1.0:
            v = p[:, k]
            cols.append(np.real(v))
            if abs(np.imag(w[k])) > 1e-12:
                cols.append(np.imag(v))
    if not cols:
        raise CuntzError("companion matrix has no unstable direction")
    q, _ = np.linalg.qr(np.column_stack(cols))
    unstable = q[:, : np.linalg.matrix_rank(np.column_stack(cols))]

    data = CompanionData(tuple(poly), degree, tuple(tuple(r) for r in cmat),
                         dimension, basis_value, basis_float, pisot, hyperbolic,
                         stable_norm, tuple(eigs.tolist()), unstable,
                         p_inv_norm, "pending")
    mode = _verify_action(data, field_backend)
    return CompanionData(tuple(poly), degree, tuple(tuple(r) for r in cmat),
                         dimension, basis_value, basis_float, pisot, hyperbolic,
                         stable_norm, tuple(eigs.tolist()), unstable,
                         p_inv_norm, mode)


def _verify_action(data: CompanionData, field_backend) -> str:
    """Check that C really multiplies by theta^(2/d) on the basis elements."""
    # d even: C is one multiplication by x = theta^(2/d); d odd: by x^2
    t_float = data.basis_float ** 2 if data.dimension % 2 else data.basis_float
    if data.basis_value is not None and data.degree <= 2 and field_backend is not None:
        t_exact = data.basis_value ** 2 if data.dimension % 2 else data.basis_value
        x = data.basis_value
        for i in range(data.degree):
            elem = x ** i
            target = lattice_coords(data, t_exact * elem)
            col = [Fraction(data.matrix[r][i]) for r in range(data.degree)]
            if tuple(col) != tuple(target):
                raise CuntzError("companion action disagrees with field multiplication")
        return "exact"
    # numeric check: evaluate both sides at x = basis_float
    powers = [data.basis_float ** i for i in range(data.degree)]
    for i in range(data.degree):
        lhs = sum(data.matrix[r][i] * powers[r] for r in range(data.degree))
        rhs = t_float * powers[i]
        if abs(lhs - rhs) > 1e-6 * max(1.0, abs(rhs)):
            raise CuntzError("companion action fails the numeric multiplication check")
    return "numeric"


def lattice_coords(embedding: CompanionData, value) -> tuple[Fraction, ...]:
    """Expand an exact scalar in the power basis of the quotient ring."""
    m = embedding.degree
    if isinstance(value, (int, Fraction)):
        return (Fraction(value),) + (Fraction(0),) * (m - 1)
    if isinstance(value, QuadraticNumber):
        if value.b == 0:
            return (value.a,) + (Fraction(0),) * (m - 1)
        t = embedding.basis_value
        if t is None or not isinstance(t, QuadraticNumber) or m < 2:
            raise CuntzError("no exact basis generator available for these coordinates")
        if t.b == 0:
            raise CuntzError("basis generator is rational; cannot expand a surd")
        c1 = value.b / t.b
        c0 = value.a - c1 * t.a
        return (c0, c1) + (Fraction(0),) * (m - 2)
    raise CuntzError(
        "value is not exactly representable; accumulate coordinates through the recursion")


def reconstruct_from_coords(embedding: CompanionData, coords) -> float:
    return float(sum(float(c) * embedding.basis_float ** i for i, c in enumerate(coords)))


@dataclass
class StripReport:
    depth: int
    pisot: bool
    stable_norm: float
    m_constant: float
    bound: float
    max_distance: float
    per_generation: list[tuple[int, float]]
    distances: list[tuple[str, float]]

    def lines(self) -> list[str]:
        out = [f"strip analysis depth {self.depth}: max distance "
               f"{self.max_distance:.6g} vs bound {self.bound:.6g} "
               f"({'within' if self.max_distance <= self.bound else 'EXCEEDS'})",
               f"  pisot={self.pisot} stable-norm={self.stable_norm:.6g} "
               f"m={self.m_constant:.6g}"]
        out.extend(f"  generation {g}: max distance {v:.6g}"
                   for g, v in self.per_generation)
        return out


def strip_check(embedding: CompanionData, records: list[SpectralRecord],
                table: AffineMapTable, seeds: list[SpectralRecord]) -> StripReport:
    """Distances of eigenvalue lattice points to the unstable line, against the
    bound m/(1 - |C_s|) with m = |P^-1|^2 max(|beta|, |lambda_seed|)."""
    if not embedding.hyperbolic:
        raise CuntzError("companion matrix is non-hyperbolic; strip bound unavailable")
    if embedding.stable_norm >= 1.0:
        raise CuntzError("stable block norm >= 1; strip bound unavailable")

    beta_vecs = [lattice_coords(embedding, b) for b in table.betas]
    seed_vecs = [rec.coords if rec.coords is not None
                 else lattice_coords(embedding, rec.value)
                 for rec in seeds if rec.label != "zero"]
    norms = [math.sqrt(sum(float(c) ** 2 for c in vec))
             for vec in beta_vecs + seed_vecs]
    m_const = embedding.p_inv_norm ** 2 * max(norms)
    bound = m_const / (1.0 - embedding.stable_norm)

    per_gen: dict[int, float] = {}
    distances: list[tuple[str, float]] = []
    max_dist = 0.0
    diagram = table.diagram
    for rec in records:
        coords = rec.coords
        if coords is None:
            coords = lattice_coords(embedding, rec.value)
        dist = embedding.distance_to_unstable(coords)
        label = rec.label if rec.path is None else diagram.format_path(rec.path)
        distances.append((label, dist))
        per_gen[rec.generation] = max(per_gen.get(rec.generation, 0.0), dist)
        max_dist = max(max_dist, dist)
    depth = max(per_gen) if per_gen else 0
    return StripReport(depth, embedding.pisot, embedding.stable_norm, m_const,
                       bound, max_dist, sorted(per_gen.items()), distances)
