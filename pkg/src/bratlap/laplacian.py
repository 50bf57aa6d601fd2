"""Closed-form spectrum of the Laplace-Beltrami operators Delta_s, and a dense
matrix oracle on the generation-n cylinder basis.

Eigenvalues are stored with the sign the defining formula produces (negative);
asymptotics elsewhere use magnitudes.  Prefixes with a single extension are
skipped: their measure increment vanishes identically, so they contribute
nothing and the splitting weight G never has to be evaluated there.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _linalg
from .diagram import (
    DEFAULT_PATH_CAP,
    EMPTY_PATH,
    BratteliDiagram,
    Path,
    PathTable,
    enumerate_paths,
    extensions,
    predicted_path_count,
)
from .measure import WeightSystem, diam_power, mu
from .scalar import ApproxReal, to_float

DEFAULT_DENSE_CAP = 4096


class LaplacianError(ValueError):
    pass


def child_path(diagram: BratteliDiagram, path: Path, ext_index: int) -> Path:
    """Extend a path by one of its extension indices (a root edge when empty)."""
    if path.root is None:
        return Path(ext_index)
    return path.child(ext_index)


def _mul(x, y):
    if isinstance(x, ApproxReal) and not isinstance(y, ApproxReal):
        y = ApproxReal.make(y, x.precision)
    elif isinstance(y, ApproxReal) and not isinstance(x, ApproxReal):
        x = ApproxReal.make(x, y.precision)
    return x * y


def g_value(ws: WeightSystem, path: Path, s):
    """Splitting weight G_s = (1/2) diam^(2-s) * sum over ordered pairs of
    distinct extensions of the product of the two extended measures."""
    s = Fraction(s)
    ext = extensions(ws.diagram, path)
    if len(ext) < 2:
        raise LaplacianError("no splitting at this path")
    measures = [mu(ws, child_path(ws.diagram, path, e)) for e in ext]
    total = measures[0]
    for m in measures[1:]:
        total = total + m
    sumsq = measures[0] * measures[0]
    for m in measures[1:]:
        sumsq = sumsq + m * m
    pair_sum = total * total - sumsq
    dpow = diam_power(ws, path, 2 - s)
    half = ws.backend.one / 2 if not isinstance(dpow, ApproxReal) else \
        ApproxReal.make(Fraction(1, 2), dpow.precision)
    return _mul(_mul(half, dpow), pair_sum)


@dataclass(frozen=True)
class SpectralRecord:
    label: str                  # "zero" | "root" | "path"
    path: Path | None
    generation: int
    value: object               # backend scalar
    value_float: float
    multiplicity: int
    coords: tuple | None = None


@dataclass(frozen=True)
class EigenVectorSpec:
    """One eigenvector: coeff_pos on the cylinder base.e, coeff_neg on base.e'."""

    base: Path
    edge_pos: int
    edge_neg: int
    coeff_pos: object
    coeff_neg: object


def eigenvalue(ws: WeightSystem, path: Path, s) -> SpectralRecord:
    """Direct evaluation of the eigenvalue attached to a finite path: the sum of
    measure increments over prefixes divided by their G values, minus the final
    mu/G term."""
    diagram = ws.diagram
    n_ext = len(extensions(diagram, path))
    if n_ext < 2:
        raise LaplacianError("path has fewer than two extensions; no eigenvalue")
    acc = ws.backend.zero
    for k in range(path.generation):
        pref = path.prefix(k)
        if len(extensions(diagram, pref)) < 2:
            continue
        inc = mu(ws, path.prefix(k + 1)) - mu(ws, pref)
        term = _mul(inc, _invert(g_value(ws, pref, s)))
        acc = _add(acc, term)
    final = _mul(mu(ws, path), _invert(g_value(ws, path, s)))
    val = _add(acc, _neg(final))
    return SpectralRecord("path" if path.generation else "root",
                          path if path.generation else None,
                          path.generation, val, to_float(val), n_ext - 1)


def _invert(x):
    if isinstance(x, ApproxReal):
        return ApproxReal.make(1, x.precision) / x
    return 1 / x


def _neg(x):
    return -x


def _add(x, y):
    if isinstance(x, ApproxReal) and not isinstance(y, ApproxReal):
        y = ApproxReal.make(y, x.precision)
    elif isinstance(y, ApproxReal) and not isinstance(x, ApproxReal):
        x = ApproxReal.make(x, y.precision)
    return x + y


def zero_record(ws: WeightSystem) -> SpectralRecord:
    return SpectralRecord("zero", None, 0, ws.backend.zero, 0.0, 1)


def root_record(ws: WeightSystem, s) -> SpectralRecord | None:
    """The eigenvalue -1/G(root) carried by the root splitting; None when the
    root has a single outgoing edge (empty eigenspace)."""
    n0 = len(ws.diagram.root_edges)
    if n0 < 2:
        return None
    val = _neg(_invert(g_value(ws, EMPTY_PATH, s)))
    return SpectralRecord("root", None, 0, val, to_float(val), n0 - 1)


def eigenbasis(ws: WeightSystem, path: Path) -> list[EigenVectorSpec]:
    """n-1 spanning eigenvectors anchored at the first extension."""
    diagram = ws.diagram
    ext = extensions(diagram, path)
    if len(ext) < 2:
        return []
    anchor = ext[0]
    mu_anchor = mu(ws, child_path(diagram, path, anchor))
    specs = []
    for other in ext[1:]:
        mu_other = mu(ws, child_path(diagram, path, other))
        specs.append(EigenVectorSpec(path, anchor, other,
                                     _invert(mu_anchor), _neg(_invert(mu_other))))
    return specs


class _StationaryCache:
    """mu and 1/G only depend on (range letter, generation) on a stationary
    diagram; memoizing them collapses most of the DFS arithmetic."""

    def __init__(self, ws: WeightSystem, s):
        self.ws = ws
        self.s = s
        self._mu: dict[tuple[int, int], object] = {}
        self._inv_g: dict[tuple[int, int], object] = {}

    def mu_at(self, path: Path):
        if path.root is None:
            return self.ws.backend.one
        key = (self.ws.diagram.path_range(path), path.generation)
        val = self._mu.get(key)
        if val is None:
            val = mu(self.ws, path)
            self._mu[key] = val
        return val

    def inv_g_at(self, path: Path):
        key = (-1, 0) if path.root is None else \
            (self.ws.diagram.path_range(path), path.generation)
        val = self._inv_g.get(key)
        if val is None:
            val = _invert(g_value(self.ws, path, self.s))
            self._inv_g[key] = val
        return val


def full_spectrum(ws: WeightSystem, depth: int, s,
                  cap: int = DEFAULT_PATH_CAP) -> list[SpectralRecord]:
    """Records for the zero eigenvalue, the root splitting, and every path of
    generation <= depth with at least two extensions.  Total multiplicity is
    the path count one generation below the cutoff."""
    if depth < 0:
        raise LaplacianError("depth must be >= 0")
    diagram = ws.diagram
    total = sum(predicted_path_count(diagram, k) for k in range(1, depth + 1))
    if total > cap:
        raise LaplacianError(f"spectrum would visit {total} paths (cap {cap})")

    records = [zero_record(ws)]
    root = root_record(ws, s)
    if root is not None:
        records.append(root)
    if depth == 0:
        return records

    cache = _StationaryCache(ws, Fraction(s))
    root_has_split = len(diagram.root_edges) >= 2
    inv_g_root = cache.inv_g_at(EMPTY_PATH) if root_has_split else None
    mu_root = ws.backend.one

    def visit(path: Path, partial, depth_left: int) -> None:
        ext = extensions(diagram, path)
        n_ext = len(ext)
        m_here = cache.mu_at(path)
        if n_ext >= 2:
            inv_g = cache.inv_g_at(path)
            val = _add(partial, _neg(_mul(m_here, inv_g)))
            records.append(SpectralRecord("path", path, path.generation,
                                          val, to_float(val), n_ext - 1))
        if depth_left == 0:
            return
        for e in ext:
            child = child_path(diagram, path, e)
            if n_ext >= 2:
                inc = cache.mu_at(child) - m_here
                child_partial = _add(partial, _mul(inc, inv_g))
            else:
                child_partial = partial
            visit(child, child_partial, depth_left - 1)

    for ri in range(len(diagram.root_edges)):
        first = Path(ri)
        if root_has_split:
            partial = _mul(cache.mu_at(first) - mu_root, inv_g_root)
        else:
            partial = ws.backend.zero
        visit(first, partial, depth - 1)
    return records


def spectrum_multiset(records: list[SpectralRecord]) -> list[float]:
    out: list[float] = []
    for rec in records:
        out.extend([rec.value_float] * rec.multiplicity)
    out.sort()
    return out


@dataclass
class DenseOperator:
    """Matrix of Delta_s restricted to the generation-n cylinder functions,
    rows and columns in path-table order."""

    generation: int
    s: Fraction
    table: PathTable
    matrix: object              # numpy array (float mode) or nested tuples of scalars
    mu_values: tuple
    exact: bool

    def as_float(self) -> np.ndarray:
        if isinstance(self.matrix, np.ndarray):
            return self.matrix
        n = len(self.table)
        out = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                out[i, j] = to_float(self.matrix[i][j])
        return out

    def mu_float(self) -> np.ndarray:
        return np.array([to_float(m) for m in self.mu_values])

    def symmetrized(self) -> np.ndarray:
        """D^(1/2) M D^(-1/2): symmetric with the same spectrum."""
        m = self.as_float()
        root = np.sqrt(self.mu_float())
        return m * np.outer(root, 1.0 / root)


def _dense_exactness(ws: WeightSystem, s: Fraction) -> bool:
    if not ws.backend.is_exact:
        return False
    if ws.mode == "measure_root":
        return (Fraction(2 - s, ws.dimension)).denominator == 1
    return (2 - s).denominator == 1 and ws.perron.inflation_exact


def dense_restriction(ws: WeightSystem, n: int, s,
                      cap: int = DEFAULT_DENSE_CAP) -> DenseOperator:
    """Assemble Delta_s on the Pi_n basis.

    Off-diagonal entries are mu[column]/G(meet); the diagonal accumulates the
    negative increment sum along each path.  Exact scalars are kept whenever
    diam^(2-s) stays in the field, otherwise the matrix is float."""
    s = Fraction(s)
    if n < 1:
        raise LaplacianError("generation must be >= 1")
    size = predicted_path_count(ws.diagram, n)
    if size > cap:
        raise LaplacianError(f"dense restriction needs {size} paths (cap {cap})")
    table = enumerate_paths(ws.diagram, n, cap=cap)
    diagram = ws.diagram
    exact = _dense_exactness(ws, s)

    mu_full = tuple(mu(ws, p) for p in table.paths)
    # subtree sizes: number of generation-n paths below a generation-k vertex
    a = [list(row) for row in diagram.matrix]
    sizes = {n: [1] * diagram.n_letters}
    for k in range(n - 1, 0, -1):
        sizes[k] = _linalg.mat_vec(a, sizes[k + 1])

    if exact:
        matrix = [[ws.backend.zero] * size for _ in range(size)]
        mu_col = mu_full
    else:
        matrix = np.zeros((size, size))
        mu_col = np.array([to_float(m) for m in mu_full])

    def fill_block(rows: tuple[int, int], cols: tuple[int, int], g_here):
        if exact:
            inv_g = _invert(g_here)
            for j in range(cols[0], cols[1]):
                v = _mul(mu_col[j], inv_g)
                for i in range(rows[0], rows[1]):
                    matrix[i][j] = v
        else:
            gf = to_float(g_here)
            matrix[rows[0]:rows[1], cols[0]:cols[1]] = \
                (mu_col[cols[0]:cols[1]] / gf)[None, :]

    def walk(path: Path, lo: int, partial) -> None:
        depth = path.generation
        if depth == n:
            if exact:
                matrix[lo][lo] = partial
            else:
                matrix[lo, lo] = to_float(partial)
            return
        ext = extensions(diagram, path)
        children = [child_path(diagram, path, e) for e in ext]
        widths = [sizes[depth + 1][diagram.path_range(c)] for c in children]
        bounds = [lo]
        for w in widths:
            bounds.append(bounds[-1] + w)
        if len(ext) >= 2:
            g_here = g_value(ws, path, s)
            m_here = mu(ws, path)
            for i in range(len(children)):
                for j in range(len(children)):
                    if i != j:
                        fill_block((bounds[i], bounds[i + 1]),
                                   (bounds[j], bounds[j + 1]), g_here)
            for i, child in enumerate(children):
                inc = mu(ws, child) - m_here
                walk(child, bounds[i], _add(partial, _mul(inc, _invert(g_here))))
        else:
            walk(children[0], lo, partial)

    walk(EMPTY_PATH, 0, ws.backend.zero)
    if exact:
        matrix = tuple(tuple(row) for row in matrix)
    return DenseOperator(n, s, table, matrix, mu_full, exact)


def expand_eigenvector(ws: WeightSystem, table: PathTable,
                       spec: EigenVectorSpec) -> list:
    """Coordinates of an eigenvector spec over the generation-n cylinder basis."""
    diagram = ws.diagram
    pos = child_path(diagram, spec.base, spec.edge_pos)
    neg = child_path(diagram, spec.base, spec.edge_neg)
    zero = ws.backend.zero
    out = []
    for p in table.paths:
        if p.prefix(pos.generation) == pos:
            out.append(spec.coeff_pos)
        elif p.prefix(neg.generation) == neg:
            out.append(spec.coeff_neg)
        else:
            out.append(zero)
    return out


@dataclass
class VerifyReport:
    ok: bool
    generation: int
    s: Fraction
    dense_size: int
    total_multiplicity: int
    counting_ok: bool
    max_abs_deviation: float
    tolerance: float
    exact_checked: bool
    exact_ok: bool | None
    mismatches: list[str]
    notes: list[str]

    def lines(self) -> list[str]:
        yn = "PASS" if self.ok else "FAIL"
        out = [f"verify generation={self.generation} s={self.s}: {yn}",
               f"  dense size {self.dense_size}, closed-form multiplicity "
               f"{self.total_multiplicity} (+1 kernel), counting "
               f"{'ok' if self.counting_ok else 'MISMATCH'}",
               f"  max |dense - closed-form| = {self.max_abs_deviation:.3e}"
               f" (tolerance {self.tolerance:.1e})"]
        if self.exact_checked:
            out.append(f"  exact eigen-relations: {'ok' if self.exact_ok else 'FAIL'}")
        out.extend(f"  mismatch: {m}" for m in self.mismatches)
        if self.notes:
            out.append("NOTES")
            out.extend(f"  {line}" for line in self.notes)
        return out


def verify_spectrum(ws: WeightSystem, n: int, s, tol: float = 1e-8,
                    dense_cap: int = DEFAULT_DENSE_CAP,
                    notes: list[str] | None = None) -> VerifyReport:
    """Cross-check: eigenvalues of the dense restriction at generation n must
    equal {0} plus the closed-form records through generation n-1, as multisets.

    On exact backends the eigenvector relations M v = lambda v are also checked
    with zero tolerance."""
    s = Fraction(s)
    if n < 1:
        raise LaplacianError("generation must be >= 1")
    records = full_spectrum(ws, n - 1, s)
    expected = spectrum_multiset(records)
    op = dense_restriction(ws, n, s, cap=dense_cap)
    size = len(op.table)

    counting_ok = len(expected) == size
    mismatches = []
    if not counting_ok:
        mismatches.append(f"multiplicity {len(expected)} != |Pi_n| = {size}")

    eigs = np.sort(np.linalg.eigvalsh(op.symmetrized()))
    max_dev = float("inf")
    if counting_ok:
        max_dev = float(np.max(np.abs(eigs - np.array(expected))))
        if max_dev > tol:
            k = int(np.argmax(np.abs(eigs - np.array(expected))))
            mismatches.append(
                f"eigenvalue #{k}: dense {eigs[k]:.12g} vs closed-form {expected[k]:.12g}")

    exact_checked = op.exact
    exact_ok: bool | None = None
    if op.exact:
        exact_ok = _verify_exact_relations(ws, op, records)
        if not exact_ok:
            mismatches.append("exact eigen-relation check failed")

    ok = counting_ok and max_dev <= tol and (exact_ok is not False)
    return VerifyReport(ok, n, s, size, len(expected), counting_ok, max_dev, tol,
                        exact_checked, exact_ok, mismatches, list(notes or ()))


def _verify_exact_relations(ws: WeightSystem, op: DenseOperator,
                            records: list[SpectralRecord]) -> bool:
    size = len(op.table)
    zero = ws.backend.zero

    for i in range(size):
        acc = zero
        for j in range(size):
            acc = acc + op.matrix[i][j]
        if not _is_zero(acc):
            return False

    for rec in records:
        if rec.label == "zero":
            continue
        base = EMPTY_PATH if rec.label == "root" else rec.path
        bgen = base.generation
        for spec in eigenbasis(ws, base):
            vec = expand_eigenvector(ws, op.table, spec)
            support = [j for j in range(size) if not _is_zero(vec[j])]
            # rows outside the base subtree see the support through one common
            # meet, so they vanish exactly as soon as sum(mu_j v_j) does
            weighted = zero
            for j in support:
                weighted = weighted + op.mu_values[j] * vec[j]
            if not _is_zero(weighted):
                return False
            for i in range(size):
                if op.table.paths[i].prefix(bgen) != base:
                    continue
                acc = zero
                for j in support:
                    acc = acc + op.matrix[i][j] * vec[j]
                if not _is_zero(acc - rec.value * vec[i]):
                    return False
    return True


def _is_zero(x) -> bool:
    if isinstance(x, Fraction):
        return x == 0
    return x.is_zero()
