"""Weyl counting, heat-trace scaling, bounded-norm checks, and 1D factor
complexity.

Heavy sums never enumerate paths one by one: per-generation eigenvalue arrays
come from the affine recursion vectorized over numpy, and the heat trace is
contracted through per-vertex transfer vectors in log space, which makes any
truncation depth affordable.  The two-sided asymptotic constants are fitted
and reported, not asserted a priori.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cuntz import AffineMapTable
from .diagram import SubstitutionRule
from .laplacian import SpectralRecord


class AsymptoticsError(ValueError):
    pass


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residual: float
    window: tuple[float, float]


def ols_loglog(xs, ys) -> FitResult:
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    if lx.size < 2:
        return FitResult(float("nan"), float(ly[0]) if ly.size else float("nan"),
                         0.0, (float(np.min(xs)), float(np.max(xs))))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((ly - (slope * lx + intercept)) ** 2)))
    return FitResult(float(slope), float(intercept), resid,
                     (float(np.min(xs)), float(np.max(xs))))


@dataclass
class GenerationSpectrum:
    """Per-generation |eigenvalue| arrays with multiplicity weights; the
    generation-0 row holds the kernel and the root splitting."""

    generations: list[int]
    magnitudes: list[np.ndarray]
    weights: list[np.ndarray]

    def flatten(self) -> tuple[np.ndarray, np.ndarray]:
        return np.concatenate(self.magnitudes), np.concatenate(self.weights)

    def total_multiplicity(self) -> int:
        return int(sum(int(w.sum()) for w in self.weights))

    def generation_min(self) -> dict[int, float]:
        out = {}
        for g, vals in zip(self.generations, self.magnitudes):
            if g >= 1 and vals.size:
                out[g] = float(vals.min())
        return out

    def generation_max(self) -> dict[int, float]:
        out = {}
        for g, vals in zip(self.generations, self.magnitudes):
            if g >= 1 and vals.size:
                out[g] = float(vals.max())
        return out

    def generation_weight(self, g: int) -> int:
        i = self.generations.index(g)
        return int(self.weights[i].sum())


def magnitude_table(table: AffineMapTable, seeds: list[SpectralRecord],
                    depth: int) -> GenerationSpectrum:
    """Evolve the affine recursion with numpy arrays keyed by (first vertex,
    final vertex); symmetry slots enter only as a multiplicity factor."""
    diagram = table.diagram
    g = diagram.symmetry_order
    r = diagram.n_letters
    out_deg = [len(diagram.out_edges[v]) for v in range(r)]

    gen0_vals, gen0_wts = [0.0], [1]
    for rec in seeds:
        if rec.label == "root":
            gen0_vals.append(abs(rec.value_float))
            gen0_wts.append(rec.multiplicity)
    generations = [0]
    magnitudes = [np.array(gen0_vals)]
    weights = [np.array(gen0_wts, dtype=np.int64)]

    seed_vals: dict[int, float] = {}
    for rec in seeds:
        if rec.label == "path" and rec.generation == 1:
            seed_vals[diagram.path_range(rec.path)] = rec.value_float

    state: dict[tuple[int, int], np.ndarray] = {
        z: np.array([v]) for z, v in seed_vals.items()}
    state = {(z, z): arr for z, arr in state.items()}

    def emit(gen: int, st: dict[tuple[int, int], np.ndarray]) -> None:
        vals, wts = [], []
        for (v1, z), arr in sorted(st.items()):
            if arr.size:
                vals.append(np.abs(arr))
                wts.append(np.full(arr.size, g * (out_deg[z] - 1), dtype=np.int64))
        generations.append(gen)
        magnitudes.append(np.concatenate(vals) if vals else np.array([]))
        weights.append(np.concatenate(wts) if wts else np.array([], dtype=np.int64))

    emit(1, state)
    lam = table.lam_float
    for gen in range(2, depth + 1):
        nxt: dict[tuple[int, int], list[np.ndarray]] = {}
        for (v1, z), arr in state.items():
            for ei in diagram.in_edges[v1]:
                e = diagram.edges[ei]
                nxt.setdefault((e.source, z), []).append(
                    lam * arr + table.betas_float[ei])
        state = {key: np.concatenate(parts) for key, parts in nxt.items()}
        emit(gen, state)
    return GenerationSpectrum(generations, magnitudes, weights)


@dataclass
class WeylResult:
    samples: list[tuple[float, int]]
    fit: FitResult
    cap: float
    total_multiplicity: int


def coverage_cap(spec: GenerationSpectrum, lam: float) -> float:
    """Largest threshold whose count is complete: any eigenvalue beyond the
    enumerated depth has magnitude at least c_min * Lambda^(depth+1), with
    c_min the fitted lower envelope constant."""
    mins = spec.generation_min()
    depth = max(mins)
    c_min = min(v / lam ** n for n, v in mins.items())
    return c_min * lam ** (depth + 1)


def weyl_count(spec: GenerationSpectrum, lam: float,
               grid=None, points: int = 48) -> WeylResult:
    """Step counting function N(t) = #{|eigenvalue| <= t} with multiplicity,
    sampled on a log grid below the coverage cap, plus a log-log OLS fit."""
    values, mults = spec.flatten()
    order = np.argsort(values)
    values = values[order]
    cum = np.cumsum(mults[order])
    cap = coverage_cap(spec, lam)
    if grid is None:
        # the power law starts once whole generations contribute; below the
        # first generation's smallest magnitude the count is the flat root atom
        gen_mins = spec.generation_min()
        lo = gen_mins[min(gen_mins)] * 1.0000001
        hi = cap * 0.9999999
        if hi <= lo:
            raise AsymptoticsError("enumerated depth too shallow for any threshold")
        grid = np.geomspace(lo, hi, points)
    else:
        grid = np.asarray(grid, dtype=float)
        if grid.max() > cap:
            raise AsymptoticsError(
                f"grid exceeds the covered window; max usable threshold is {cap:.6g}")
    idx = np.searchsorted(values, grid, side="right")
    counts = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0)
    samples = [(float(t), int(c)) for t, c in zip(grid, counts)]
    fit = ols_loglog([t for t, c in samples if c > 0],
                     [c for _, c in samples if c > 0])
    return WeylResult(samples, fit, cap, spec.total_multiplicity())


@dataclass
class WeylMarginRow:
    magnitude: float
    count: int
    lower: float
    upper: float

    @property
    def lower_ok(self) -> bool:
        return self.count >= self.lower - 1e-9

    @property
    def upper_ok(self) -> bool:
        return self.count <= self.upper + 1e-9


def weyl_margins(spec: GenerationSpectrum, bounds: dict) -> list[WeylMarginRow]:
    """Evaluate reference counting bounds of the form coef*sqrt(a*t + b) at
    each distinct eigenvalue magnitude.  Margins are reported, not asserted:
    the bounds may be marginal at small magnitudes."""
    values, mults = spec.flatten()
    order = np.argsort(values)
    values, mults = values[order], mults[order]
    cum = np.cumsum(mults)
    cap = max(values)
    lc, la, lb = bounds["lower"]
    uc, ua, ub = bounds["upper"]
    rows = []
    distinct = np.unique(values[values > 0])
    for t in distinct:
        if t > cap:
            break
        n = int(cum[np.searchsorted(values, t, side="right") - 1])
        rows.append(WeylMarginRow(float(t), n,
                                  lc * math.sqrt(la * t + lb),
                                  uc * math.sqrt(ua * t + ub)))
    return rows


@dataclass
class HeatResult:
    samples: list[tuple[float, float, float]]   # (t, trace, certified tail)
    fit: FitResult
    depth: int
    envelope_cmin: float
    envelope_ccount: float


def _log_transfer_contribution(table: AffineMapTable, seed_vals: dict[int, float],
                               out_deg: list[int], t: float, m: int,
                               log_w: np.ndarray) -> tuple[float, np.ndarray]:
    """One recursion layer in log space; returns (generation m+1 contribution,
    updated per-vertex log partition vector)."""
    diagram = table.diagram
    r = diagram.n_letters
    lam = table.lam_float
    scale = lam ** (m - 1)
    new = np.full(r, -np.inf)
    for ei, e in enumerate(diagram.edges):
        cand = t * scale * table.betas_float[ei] + log_w[e.source]
        new[e.target] = np.logaddexp(new[e.target], cand)
    contrib = 0.0
    for z, lam_z in seed_vals.items():
        if out_deg[z] < 2 or new[z] == -np.inf:
            continue
        expo = t * (lam ** m) * lam_z + new[z]
        if expo > -745.0:
            contrib += diagram.symmetry_order * (out_deg[z] - 1) * math.exp(expo)
    return contrib, new


def heat_trace(table: AffineMapTable, seeds: list[SpectralRecord], t_grid,
               depth: int | None = None, tail_target: float = 1e-9,
               envelope_depth: int = 12) -> HeatResult:
    """Truncated trace of exp(t * Delta) over the enumerated spectrum, with a
    certified geometric tail bound below tail_target at every requested t.

    The tail certificate extrapolates the measured per-generation envelopes
    with ratio Lambda and a 2x safety factor on both constants."""
    t_grid = sorted(float(t) for t in t_grid)
    if not t_grid or t_grid[0] <= 0:
        raise AsymptoticsError("t grid must be positive")
    diagram = table.diagram
    lam = table.lam_float
    theta = table.ws.perron.theta_float
    if lam <= 1.0:
        raise AsymptoticsError("heat trace needs Lambda > 1 (s < d+2)")

    env = magnitude_table(table, seeds, envelope_depth)
    mins = env.generation_min()
    c_min = min(v / lam ** n for n, v in mins.items()) / 2.0
    c_cnt = 2.0 * max(env.generation_weight(n) / theta ** n
                      for n in range(1, envelope_depth + 1))

    def tail_bound(t: float, d: int) -> float:
        total = 0.0
        for n in range(d + 1, d + 600):
            expo = math.log(c_cnt) + n * math.log(theta) - t * c_min * lam ** n
            if expo < -745.0:
                if n > d + 1:
                    break
                continue
            term = math.exp(expo)
            total += term
            if term < 1e-3 * total and n > d + 3:
                break
        return total

    t_min = t_grid[0]
    if depth is None:
        depth = envelope_depth
        while tail_bound(t_min, depth) > tail_target and depth < 400:
            depth += 2
    if tail_bound(t_min, depth) > tail_target:
        feasible = t_min
        while tail_bound(feasible, depth) > tail_target:
            feasible *= 2.0
            if feasible > 1e12:
                raise AsymptoticsError("tail cannot be certified at any sensible t")
        raise AsymptoticsError(
            f"certified tail exceeds {tail_target:g} at t={t_min:g}; "
            f"smallest feasible t at this depth is {feasible:g}")

    out_deg = [len(diagram.out_edges[v]) for v in range(diagram.n_letters)]
    seed_vals = {diagram.path_range(rec.path): rec.value_float
                 for rec in seeds if rec.label == "path" and rec.generation == 1}
    root = next((rec for rec in seeds if rec.label == "root"), None)

    samples = []
    for t in t_grid:
        total = 1.0
        if root is not None:
            total += root.multiplicity * math.exp(t * root.value_float)
        for z, v in seed_vals.items():
            if out_deg[z] >= 2:
                total += diagram.symmetry_order * (out_deg[z] - 1) * math.exp(t * v)
        log_w = np.zeros(diagram.n_letters)   # slots enter through symmetry_order
        for m in range(1, depth):
            contrib, log_w = _log_transfer_contribution(
                table, seed_vals, out_deg, t, m, log_w)
            total += contrib
        samples.append((t, total, tail_bound(t, depth)))

    fit = ols_loglog([t for t, tr, _ in samples], [tr for _, tr, _ in samples])
    return HeatResult(samples, fit, depth, c_min, c_cnt)


@dataclass
class NormBoundReport:
    s: float
    lam: float
    c_constant: float
    bound: float
    sup_by_generation: list[tuple[int, float]]
    sup_total: float
    increment_ratios: list[float]

    @property
    def within_bound(self) -> bool:
        return self.sup_total <= self.bound + 1e-12


def norm_bound_check(table: AffineMapTable, seeds: list[SpectralRecord],
                     depth: int = 15) -> NormBoundReport:
    """Bounded regime s > d+2: the running sup of |eigenvalue| must stay below
    c/(1-Lambda) and its increments must shrink geometrically like Lambda."""
    ws = table.ws
    s = float(table.s)
    if s <= ws.dimension + 2:
        raise AsymptoticsError("bounded-norm check requires s > d + 2")
    lam = table.lam_float
    if lam >= 1.0:
        raise AsymptoticsError("Lambda_s must be < 1 in the bounded regime")

    spec = magnitude_table(table, seeds, depth)
    maxes = spec.generation_max()
    seed_mags = [abs(rec.value_float) for rec in seeds if rec.label != "zero"]
    c = max(max(seed_mags), max(abs(b) for b in table.betas_float))
    bound = c / (1.0 - lam)

    sup_by_gen = []
    running = 0.0
    for n in sorted(maxes):
        running = max(running, maxes[n])
        sup_by_gen.append((n, running))
    increments = [sup_by_gen[i + 1][1] - sup_by_gen[i][1]
                  for i in range(len(sup_by_gen) - 1)]
    ratios = [increments[i + 1] / increments[i]
              for i in range(len(increments) - 1) if increments[i] > 1e-15]
    return NormBoundReport(s, lam, c, bound, sup_by_gen, running, ratios)


class _SuffixAutomaton:
    """Standard online suffix automaton; counts distinct factors per length."""

    def __init__(self):
        self.transitions: list[dict[str, int]] = [{}]
        self.link = [-1]
        self.length = [0]
        self.last = 0

    def extend(self, ch: str) -> None:
        cur = len(self.length)
        self.length.append(self.length[self.last] + 1)
        self.link.append(-1)
        self.transitions.append({})
        p = self.last
        while p != -1 and ch not in self.transitions[p]:
            self.transitions[p][ch] = cur
            p = self.link[p]
        if p == -1:
            self.link[cur] = 0
        else:
            q = self.transitions[p][ch]
            if self.length[p] + 1 == self.length[q]:
                self.link[cur] = q
            else:
                clone = len(self.length)
                self.length.append(self.length[p] + 1)
                self.transitions.append(dict(self.transitions[q]))
                self.link.append(self.link[q])
                while p != -1 and self.transitions[p].get(ch) == q:
                    self.transitions[p][ch] = clone
                    p = self.link[p]
                self.link[q] = clone
                self.link[cur] = clone
        self.last = cur

    def factor_counts(self, n_max: int) -> list[int]:
        diff = [0] * (n_max + 2)
        for v in range(1, len(self.length)):
            lo = self.length[self.link[v]] + 1
            hi = min(self.length[v], n_max)
            if lo <= hi:
                diff[lo] += 1
                diff[hi + 1] -= 1
        counts = []
        acc = 0
        for n in range(1, n_max + 1):
            acc += diff[n]
            counts.append(acc)
        return counts


def _fixed_point_seed(rule: SubstitutionRule) -> tuple[str, int]:
    """A letter whose image under some power of the rule starts with itself."""
    first = {l: rule.image(l)[0] for l in rule.letters}
    for l in rule.letters:
        if first[l] == l:
            return l, 1
    seen: dict[str, int] = {}
    l = rule.letters[0]
    k = 0
    while l not in seen:
        seen[l] = k
        l = first[l]
        k += 1
    return l, k - seen[l]


@dataclass(frozen=True)
class ComplexityTable:
    n_max: int
    counts: tuple[int, ...]
    word_length: int
    rounds: int

    def p(self, n: int) -> int:
        return self.counts[n - 1]

    def nu(self, n: int) -> float:
        if n < 2:
            raise AsymptoticsError("nu(n) needs n >= 2")
        return math.log(self.p(n)) / math.log(n)


def factor_complexity(rule: SubstitutionRule, n_max: int,
                      max_length: int = 2_000_000) -> ComplexityTable:
    """Exact factor counts of the substitution fixed point, by growing a prefix
    until the counts for every n <= n_max agree on two successive rounds."""
    if rule.dimension != 1:
        raise AsymptoticsError("factor complexity is implemented for d = 1 only")
    seed, power = _fixed_point_seed(rule)
    images = {l: rule.image(l) for l in rule.letters}

    def substitute(word: list[str]) -> list[str]:
        out: list[str] = []
        for ch in word:
            out.extend(images[ch])
        return out

    word = [seed]
    for _ in range(power):
        word = substitute(word)
    if word[0] != seed:
        raise AsymptoticsError("substitution rule admits no fixed-point seed")

    prev_counts = None
    rounds = 0
    while True:
        rounds += 1
        for _ in range(power):
            word = substitute(word)
        if len(word) > max_length:
            raise AsymptoticsError(f"fixed-point prefix exceeded {max_length} letters")
        if len(word) < 4 * n_max:
            continue
        sa = _SuffixAutomaton()
        for ch in word:
            sa.extend(ch)
        counts = sa.factor_counts(n_max)
        if prev_counts is not None and counts == prev_counts:
            return ComplexityTable(n_max, tuple(counts), len(word), rounds)
        prev_counts = counts
