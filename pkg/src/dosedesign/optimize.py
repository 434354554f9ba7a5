"""Numerical maximisation of the D and compound criteria over designs.

The design space is handled as one probability vector on the disjoint union
of the group dose ranges: a mass nu_ij at dose d_ij of group i encodes
lambda_i = sum_j nu_ij and within-group weight nu_ij / lambda_i.  Both
criteria are concave in that vector, so first-order ascent with
equivalence-theorem point additions converges to the global optimum.

Each restart alternates monotone phases until the criterion stalls and no
dose beats the sensitivity bound:

* weight phase: multiplicative updates nu <- nu * psi / bound (whose fixed
  points satisfy the equivalence equality clause), damped whenever a full
  step would decrease the criterion, plus pairwise mass transfers between
  the extreme-sensitivity support points to sharpen the tail;
* support moves: each interior support point slides to the nearby
  sensitivity peak when that improves the criterion;
* point addition: per group, the dose maximising the sensitivity (grid scan
  plus golden refinement) joins the support, with the closed-form step size
  for D and a line-searched step for the compound criterion;
* collapse: near-duplicate doses merge and dead mass is dropped, never
  losing more criterion than the per-step tolerance.

All arithmetic runs on unit-rescaled dose axes; results map back by
multiplying doses with dmax, which makes solutions equivariant under dose
rescaling by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .closed_form import (
    ClosedFormDomainError,
    min_supported_optimal,
    shared_location_optimal,
)
from .designs import (
    CompoundCriterion,
    Design,
    GroupDesign,
    log_det_information,
)
from .models import ModelSpec, Sharing, gradient_profile, rescale_to_unit
from .search import golden_max, refined_argmax
from .verify import OptimalityCertificate, VerifySettings, certify_compound, certify_d

DROP_TOL = 1e-6  # masses below this are removed when tidying supports
COALESCE_BACKOFF = 1e-12  # merging near-duplicate doses may lose at most this
DROP_BACKOFF = 1e-9  # dropping dead mass may lose at most this
EXCESS_STOP = 5e-7  # relative sensitivity excess at which exchange may stop
ADD_MIN = 2.5e-7  # minimum relative excess that justifies adding a dose
SUPPORT_TOL = 2e-7  # target relative spread of support sensitivities at the end
FINAL_SWEEPS = 20000  # weight-sweep budget for the final polish
CONVERGED_BAND = 1e-4  # certificate band marking a run converged


class RankDeficiencyError(RuntimeError):
    """Support gradients are linearly dependent; weights cannot be optimized."""


class OptimizationFailure(RuntimeError):
    """Every restart produced a singular information matrix."""


@dataclass(frozen=True)
class OptimizerSettings:
    """Knobs for `maximize` and `weight_optimize`; defaults suit all bundled cases."""

    restarts: int = 20
    grid_density: int = 201
    exchange_iters: int = 200
    weight_iters: int = 500
    collapse_tol: float = 1e-4  # relative to dmax
    convergence_tol: float = 1e-9  # absolute criterion improvement
    seed: int = 0

    def __post_init__(self):
        if self.restarts < 1:
            raise ValueError("restarts must be at least 1")
        for name in ("grid_density", "exchange_iters", "weight_iters"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.collapse_tol <= 0 or self.convergence_tol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class WeightResult:
    """Optimized weights for a fixed support, with the criterion trace."""

    design: Design
    trace: tuple[float, ...]


@dataclass(frozen=True)
class OptimizationResult:
    """Best design over all restarts plus its certificate and ascent trace.

    `criterion` is log det M for a locally-D run and the compound criterion
    value for a compound run, re-evaluated on the returned design.  `case`
    and `order` carry closed-form metadata when a closed form produced the
    design; `converged` records whether the certificate maximum stayed
    within the 1e-4 band of the bound.
    """

    design: Design
    criterion: float
    certificate: OptimalityCertificate
    trace: tuple[float, ...]
    converged: bool
    case: str | None = None
    order: tuple[int, ...] | None = None
    singular_restarts: int = 0


class _State:
    """Supports, joint mass vector and derived matrices for one candidate."""

    __slots__ = ("supports", "nu", "h", "infos", "logdets", "value", "sizes")

    def __init__(self, supports, nu, h, infos, logdets, value):
        self.supports = supports
        self.nu = nu
        self.h = h
        self.infos = infos
        self.logdets = logdets
        self.value = value
        self.sizes = [s.size for s in supports]

    def offset(self, group: int) -> int:
        return sum(self.sizes[:group])


class _Problem:
    """Shared optimisation context on unit dose axes, for one or many specs."""

    def __init__(self, specs, prior, unit_refs, kind, settings):
        self.kind = kind  # "d" or "compound"
        self.specs = specs
        self.prior = np.asarray(prior, dtype=float)
        self.active = self.prior > 0.0
        self.unit_refs = np.asarray(unit_refs, dtype=float)
        self.ms = np.array([s.m for s in specs], dtype=float)
        self.n_groups = specs[0].n_groups
        self.settings = settings
        self.grid = np.linspace(0.0, 1.0, settings.grid_density)
        self.h_grid = [
            [gradient_profile(s, i, self.grid) for i in range(self.n_groups)]
            for s in specs
        ]

    # -- state construction -------------------------------------------------

    def _columns(self, group, dose):
        """Per-spec gradient columns for one dose of one group."""
        return [
            gradient_profile(s, group, np.array([float(dose)]))[:, 0]
            for s in self.specs
        ]

    def make_state(self, supports, nu, h=None):
        """Build a state; returns None when an active information matrix is singular."""
        nu = np.asarray(nu, dtype=float)
        if h is None:
            h = [
                np.hstack(
                    [gradient_profile(s, i, supports[i]) for i in range(self.n_groups)]
                )
                for s in self.specs
            ]
        infos, logdets = [], []
        for s, hs in enumerate(h):
            m = (hs * nu) @ hs.T
            sign, ld = np.linalg.slogdet(m)
            if sign <= 0:
                if self.active[s]:
                    return None
                ld = -math.inf
            infos.append(m)
            logdets.append(ld)
        value = self._value(logdets)
        return _State(supports, nu, h, infos, logdets, value)

    def _value(self, logdets) -> float:
        if self.kind == "d":
            return float(logdets[0])
        total = 0.0
        for s in range(len(self.specs)):
            if self.active[s]:
                total += self.prior[s] * math.exp(
                    (logdets[s] - self.unit_refs[s]) / self.ms[s]
                )
        return total

    def _coeffs(self, st):
        """Per-spec sensitivity weights c_s and the equivalence bound."""
        if self.kind == "d":
            return np.array([1.0]), float(self.ms[0])
        coeffs = np.zeros(len(self.specs))
        bound = 0.0
        for s in range(len(self.specs)):
            if self.active[s]:
                eff = math.exp((st.logdets[s] - self.unit_refs[s]) / self.ms[s])
                coeffs[s] = self.prior[s] * eff / self.ms[s]
                bound += self.prior[s] * eff
        return coeffs, bound

    # -- sensitivities --------------------------------------------------------

    def support_sens(self, st):
        c, bound = self._coeffs(st)
        psi = np.zeros(st.nu.size)
        for cs, hs, info in zip(c, st.h, st.infos):
            if cs > 0.0:
                psi += cs * np.einsum("jk,jk->k", hs, np.linalg.solve(info, hs))
        return psi, bound

    def grid_sens(self, st, group):
        c, _ = self._coeffs(st)
        psi = np.zeros(self.grid.size)
        for cs, spec_h, info in zip(c, self.h_grid, st.infos):
            if cs > 0.0:
                hg = spec_h[group]
                psi += cs * np.einsum("jk,jk->k", hg, np.linalg.solve(info, hg))
        return psi

    def sens_at(self, st, group, doses):
        c, _ = self._coeffs(st)
        psi = np.zeros(doses.size)
        for cs, spec, info in zip(c, self.specs, st.infos):
            if cs > 0.0:
                hg = gradient_profile(spec, group, doses)
                psi += cs * np.einsum("jk,jk->k", hg, np.linalg.solve(info, hg))
        return psi

    def point_sens(self, st, group, dose):
        return float(self.sens_at(st, group, np.array([float(dose)]))[0])

    # -- weight phase -----------------------------------------------------------

    def weight_phase(self, st, sweeps, tol, spread_target=None):
        transfer_every = 1 if self.kind == "d" else 25
        stalls = 0
        for sweep in range(sweeps):
            psi, bound = self.support_sens(st)
            if spread_target is not None:
                live = st.nu > DROP_TOL
                if np.all(np.abs(psi[live] - bound) <= bound * spread_target):
                    break
            new = self._multiplicative_step(st, psi, bound)
            if sweep % transfer_every == 0:
                new = self._vertex_transfer(new)
            gain = new.value - st.value
            st = new
            if gain <= 0.0:
                stalls += 1
                if stalls >= 3:
                    break
            else:
                stalls = 0
            if spread_target is None and gain < tol:
                break
        return st

    def _multiplicative_step(self, st, psi, bound):
        ratio = np.maximum(psi / bound, 0.0)
        beta = 1.0
        while beta >= 1.0 / 64.0:
            nu = st.nu * ratio**beta
            total = nu.sum()
            if total > 0:
                cand = self.make_state(st.supports, nu / total, h=st.h)
                if cand is not None and cand.value >= st.value - 1e-15:
                    return cand
            beta /= 2.0
        return st

    def _vertex_transfer(self, st):
        """Move mass from the lowest- to the highest-sensitivity support point."""
        live = np.flatnonzero(st.nu > 0.0)
        if live.size < 2:
            return st
        psi, _ = self.support_sens(st)
        a = live[int(np.argmax(psi[live]))]
        b = live[int(np.argmin(psi[live]))]
        if a == b or psi[a] <= psi[b]:
            return st
        if self.kind == "d":
            hs, info = st.h[0], st.infos[0]
            ka, kb = psi[a], psi[b]
            kab = float(hs[:, a] @ np.linalg.solve(info, hs[:, b]))
            denom = ka * kb - kab**2
            if denom <= 0.0:
                return st
            t = min((ka - kb) / (2.0 * denom), float(st.nu[b]))
        else:

            def neggain(tt):
                nu = st.nu.copy()
                nu[a] += tt
                nu[b] -= tt
                cand = self.make_state(st.supports, nu, h=st.h)
                return -math.inf if cand is None else cand.value

            t, _, _ = golden_max(neggain, 0.0, float(st.nu[b]), xtol=1e-12, max_iter=40)
        if t <= 0.0:
            return st
        nu = st.nu.copy()
        nu[a] += t
        nu[b] -= t
        cand = self.make_state(st.supports, nu, h=st.h)
        if cand is not None and cand.value >= st.value:
            return cand
        return st

    # -- support changes ----------------------------------------------------------

    def scan_best(self, st, group):
        """Best dose for `group`: grid scan with golden refinement of the top peaks."""
        values = self.grid_sens(st, group)
        return refined_argmax(
            lambda x: self.point_sens(st, group, x), self.grid, values, xtol=1e-9
        )[:2]

    def bracket_best(self, st, group, lo, hi, xtol):
        """Best dose for `group` restricted to the open interval (lo, hi)."""
        inner = self.grid[(self.grid > lo) & (self.grid < hi)]
        if inner.size < 2:
            d, v, _ = golden_max(
                lambda x: self.point_sens(st, group, x), lo, hi, xtol=xtol
            )
            return d, v
        xs = np.concatenate([[lo], inner, [hi]])
        return refined_argmax(
            lambda x: self.point_sens(st, group, x),
            xs,
            self.sens_at(st, group, xs),
            xtol=xtol,
            top=2,
        )[:2]

    def add_points(self, st):
        """One sensitivity-guided addition or relocation per group.

        When the refined peak falls within the collapse tolerance of an
        existing support point, that point is slid onto the peak instead of
        inserting a near-duplicate that a later collapse would merge back.
        Returns the state and the pre-add relative sensitivity excess.
        """
        max_excess = -math.inf
        for i in range(self.n_groups):
            _, bound = self.support_sens(st)
            d, v = self.scan_best(st, i)
            max_excess = max(max_excess, v / bound - 1.0)
            if v <= bound * (1.0 + ADD_MIN):
                continue
            gaps = np.abs(st.supports[i] - d)
            j = int(np.argmin(gaps))
            if gaps[j] < 1e-15:
                continue
            if gaps[j] < self.settings.collapse_tol:
                moved = self._relocate(st, i, j, d)
                if moved is not None:
                    st = moved
                    continue
            st = self._insert(st, i, d, v, bound)
        return st, max_excess

    def _relocated(self, st, group, j, dose):
        """State with support point j of `group` moved to `dose`, or None."""
        lo = st.supports[group][j - 1] if j > 0 else -math.inf
        hi = st.supports[group][j + 1] if j + 1 < st.sizes[group] else math.inf
        if not lo < dose < hi:
            return None
        supports = [s.copy() for s in st.supports]
        supports[group][j] = dose
        at = st.offset(group) + j
        h_new = []
        for hs, col in zip(st.h, self._columns(group, dose)):
            hh = hs.copy()
            hh[:, at] = col
            h_new.append(hh)
        return self.make_state(supports, st.nu, h=h_new)

    def _relocate(self, st, group, j, dose):
        """Improve the criterion by moving point j of `group` toward `dose`.

        Jumping all the way to a sensitivity peak can overshoot (the peak
        shifts as the atom moves), so a rejected jump falls back to a line
        search of the criterion along the segment.  Returns None when no
        improving move exists.
        """
        jump = self._relocated(st, group, j, dose)
        if jump is not None and jump.value > st.value:
            return jump
        d = float(st.supports[group][j])
        lo, hi = min(d, dose), max(d, dose)
        if hi - lo < 1e-14:
            return None

        def value_at(x):
            cand = self._relocated(st, group, j, x)
            return -math.inf if cand is None else cand.value

        x, v, _ = golden_max(value_at, lo, hi, xtol=1e-12, max_iter=60)
        if v > st.value:
            cand = self._relocated(st, group, j, x)
            if cand is not None and cand.value > st.value:
                return cand
        return None

    def _insert(self, st, group, dose, sens, bound):
        supports = [s.copy() for s in st.supports]
        pos = int(np.searchsorted(supports[group], dose))
        supports[group] = np.insert(supports[group], pos, dose)
        at = st.offset(group) + pos
        cols = self._columns(group, dose)
        h_new = [
            np.insert(hs, at, col, axis=1) for hs, col in zip(st.h, cols)
        ]

        def with_alpha(a):
            nu = np.insert(st.nu * (1.0 - a), at, a)
            return self.make_state(supports, nu, h=h_new)

        if self.kind == "d":
            m = float(self.ms[0])
            alpha = (sens - m) / (m * (sens - 1.0)) if sens > 1.0 else 1e-4
            alphas = [min(max(alpha, 1e-9), 0.5), 1e-4]
        else:
            a_star, _, _ = golden_max(
                lambda a: (lambda c: -math.inf if c is None else c.value)(
                    with_alpha(a)
                ),
                0.0,
                0.5,
                xtol=1e-10,
                max_iter=60,
            )
            alphas = [a_star, 1e-4]
        for a in alphas:
            cand = with_alpha(a)
            if cand is not None and cand.value >= st.value:
                return cand
        return st

    def collapse(self, st):
        """Coalesce near-duplicate doses and drop dead mass, guarding the criterion."""
        tol = self.settings.collapse_tol  # unit axes, so already relative
        progress = True
        while progress:
            progress = False
            for i in range(self.n_groups):
                pairs = np.flatnonzero(np.diff(st.supports[i]) < tol)
                for j in pairs:
                    merged = self._coalesce(st, i, int(j))
                    if merged is not None:
                        st = merged
                        progress = True
                        break
                if progress:
                    break
        return self._drop_dead(st)

    def _coalesce(self, st, group, j):
        """Replace support points j, j+1 of `group` with one atom, or None.

        Candidate locations: the sensitivity peak between the outer
        neighbours (a non-straddling pair merges there without criterion
        loss), then either original dose (exact for boundary atoms), then
        the mass-weighted mean.
        """
        d = st.supports[group]
        at = st.offset(group) + j
        w0, w1 = float(st.nu[at]), float(st.nu[at + 1])
        total = w0 + w1
        lo = float(d[j - 1]) if j > 0 else 0.0
        hi = float(d[j + 2]) if j + 2 < d.size else 1.0
        candidates = [float(d[j]), float(d[j + 1])]
        if total > 0.0:
            peak, _ = self.bracket_best(st, group, lo, hi, xtol=1e-10)
            mean = (d[j] * w0 + d[j + 1] * w1) / total
            candidates = [peak] + candidates + [mean]
        for dose in candidates:
            supports = [s.copy() for s in st.supports]
            supports[group] = np.delete(supports[group], j + 1)
            supports[group][j] = dose
            if not np.all(np.diff(supports[group]) > 0.0):
                continue
            nu = np.delete(st.nu, at + 1)
            nu[at] = total
            cols = self._columns(group, dose)
            h_new = []
            for hs, col in zip(st.h, cols):
                hh = np.delete(hs, at + 1, axis=1)
                hh[:, at] = col
                h_new.append(hh)
            cand = self.make_state(supports, nu, h=h_new)
            if cand is not None and cand.value >= st.value - COALESCE_BACKOFF:
                return cand
        return None

    def _drop_dead(self, st):
        """Remove support points whose mass fell below the drop threshold."""
        keep = st.nu >= DROP_TOL
        if np.all(keep):
            return st
        offset = 0
        for i in range(self.n_groups):
            k = st.sizes[i]
            if not np.any(keep[offset : offset + k]):  # never empty a group
                keep[offset + int(np.argmax(st.nu[offset : offset + k]))] = True
            offset += k
        supports, nus = [], []
        offset = 0
        for i in range(self.n_groups):
            k = st.sizes[i]
            kk = keep[offset : offset + k]
            supports.append(st.supports[i][kk])
            nus.append(st.nu[offset : offset + k][kk])
            offset += k
        nu = np.concatenate(nus)
        cand = self.make_state(supports, nu / nu.sum())
        if cand is not None and cand.value >= st.value - DROP_BACKOFF:
            return cand
        return st

    def consolidate_placebo(self, st):
        """Move every group's placebo mass into the lowest-variance group.

        At dose zero the group-specific gradient coordinates vanish, so
        placebo observations from different groups carry collinear
        information; pooling them where the variance is smallest never
        lowers any active candidate's information matrix.  Skipped when the
        candidates disagree about which group that is.
        """
        targets = {
            int(np.argmin(self.specs[s].sigma2))
            for s in range(len(self.specs))
            if self.active[s]
        }
        if len(targets) != 1:
            return st
        t = targets.pop()
        supports, nus = [], []
        moved = 0.0
        offset = 0
        changed = False
        for i in range(self.n_groups):
            k = st.sizes[i]
            d = st.supports[i].copy()
            w = st.nu[offset : offset + k].copy()
            offset += k
            if np.any((d > 0.0) & (d < 1e-9)):  # collapse artifacts near zero
                d[d < 1e-9] = 0.0
                changed = True
            if i != t:
                z = d == 0.0
                if np.any(z) and not np.all(z):
                    moved += float(w[z].sum())
                    d, w = d[~z], w[~z]
                    changed = True
            supports.append(d)
            nus.append(w)
        if moved > 0.0:
            if supports[t].size and supports[t][0] == 0.0:
                nus[t][0] += moved
            else:
                supports[t] = np.insert(supports[t], 0, 0.0)
                nus[t] = np.insert(nus[t], 0, moved)
        elif not changed:
            return st
        cand = self.make_state(supports, np.concatenate(nus))
        if cand is not None and cand.value >= st.value - COALESCE_BACKOFF:
            return cand
        return st

    def move_points(self, st, xtol=1e-8):
        """Slide interior support points to nearby sensitivity peaks."""
        for i in range(self.n_groups):
            for j in range(st.sizes[i]):
                d = float(st.supports[i][j])
                if d <= 0.0 or d >= 1.0 or st.nu[st.offset(i) + j] <= 0.0:
                    continue
                lo = float(st.supports[i][j - 1]) if j > 0 else 0.0
                hi = float(st.supports[i][j + 1]) if j + 1 < st.sizes[i] else 1.0
                new_d, _ = self.bracket_best(st, i, lo, hi, xtol)
                if abs(new_d - d) < 1e-15:
                    continue
                moved = self._relocate(st, i, j, new_d)
                if moved is not None:
                    st = moved
        return st

    # -- drivers ----------------------------------------------------------------

    def run(self, st):
        """Exchange loop from an initial state; returns (state, trace).

        Stops once the criterion stalls for two consecutive rounds (or the
        sensitivity excess is already certification-small); the remaining
        gap is closed by `finalize` on the winning restart only.
        """
        s = self.settings
        st = self.weight_phase(st, s.weight_iters, s.convergence_tol)
        trace = [st.value]
        stalled = 0
        for _ in range(s.exchange_iters):
            prev = st.value
            st, excess = self.add_points(st)
            st = self.weight_phase(st, s.weight_iters, s.convergence_tol)
            st = self.collapse(st)
            st = self.move_points(st)
            trace.append(st.value)
            stalled = stalled + 1 if st.value - prev < s.convergence_tol else 0
            if stalled >= 2 or (excess <= EXCESS_STOP and stalled >= 1):
                break
        return st, trace

    def finalize(self, st):
        """Tidy the winning state and polish weights to certification depth.

        Rounds end with the weight polish so the exit state always has
        support sensitivities equalized; the exit test re-measures the
        sensitivity excess on the finished round.
        """
        for _ in range(40):
            st, _ = self.add_points(st)
            st = self.collapse(st)
            st = self.consolidate_placebo(st)
            st = self.move_points(st, xtol=1e-10)
            st = self.weight_phase(st, FINAL_SWEEPS, 0.0, spread_target=SUPPORT_TOL)
            _, bound = self.support_sens(st)
            excess = max(
                self.scan_best(st, i)[1] / bound - 1.0 for i in range(self.n_groups)
            )
            if excess <= EXCESS_STOP and bool(np.all(st.nu >= DROP_TOL)):
                break
        return st

    def initial_state(self, rng):
        cap = 3 if self.kind == "d" else 4
        min_total = int(self.ms.max())
        interior = self.grid[1:-1]
        supports = []
        for _ in range(self.n_groups):
            k = int(rng.integers(2, cap + 1))
            pts = rng.choice(interior, size=k - 2, replace=False) if k > 2 else []
            supports.append(np.unique(np.concatenate([[0.0, 1.0], pts])))
        while sum(s.size for s in supports) < min_total:
            i = int(rng.integers(self.n_groups))
            extra = float(rng.choice(interior))
            if np.min(np.abs(supports[i] - extra)) > 1e-12:
                supports[i] = np.sort(np.append(supports[i], extra))
        total = sum(s.size for s in supports)
        return self.make_state(supports, np.full(total, 1.0 / total))

    def state_from_design(self, design: Design, factors):
        supports, nus = [], []
        for i, g in enumerate(design.groups):
            d = np.asarray(g.doses, dtype=float) / factors[i]
            order = np.argsort(d)
            supports.append(d[order])
            nus.append(design.allocation[i] * np.asarray(g.weights)[order])
        nu = np.concatenate(nus)
        total = nu.sum()
        return self.make_state(supports, nu / total if total > 0 else nu)

    def to_design(self, st, factors) -> Design:
        groups, alloc = [], []
        offset = 0
        for i in range(self.n_groups):
            k = st.sizes[i]
            mass = st.nu[offset : offset + k]
            offset += k
            lam = float(mass.sum())
            weights = mass / lam if lam > 0 else np.full(k, 1.0 / k)
            groups.append(
                GroupDesign(
                    tuple(st.supports[i] * factors[i]),
                    tuple(float(w) for w in weights),
                )
            )
            alloc.append(lam)
        return Design(tuple(groups), tuple(alloc))


def _problem_for(objective, settings):
    """Build the unit-space problem plus the dose maps for either objective."""
    if isinstance(objective, ModelSpec):
        scaling = rescale_to_unit(objective)
        return (
            _Problem([scaling.spec], [1.0], [0.0], "d", settings),
            scaling.dose_factors,
        )
    if isinstance(objective, CompoundCriterion):
        scalings = [rescale_to_unit(s) for s in objective.specs]
        offset = 2.0 * sum(math.log(dm) for dm in objective.specs[0].dmax)
        unit_refs = [r + offset for r in objective.reference_logdets]
        return (
            _Problem(
                [sc.spec for sc in scalings],
                objective.prior,
                unit_refs,
                "compound",
                settings,
            ),
            scalings[0].dose_factors,
        )
    raise TypeError("objective must be a ModelSpec or a CompoundCriterion")


def _evaluate(objective, design) -> float:
    if isinstance(objective, ModelSpec):
        return log_det_information(objective, design)
    return objective.value(design)


def _certify(objective, design, verify_settings) -> OptimalityCertificate:
    if isinstance(objective, ModelSpec):
        return certify_d(objective, design, verify_settings)
    return certify_compound(objective, design, verify_settings)


def weight_optimize(
    objective,
    design: Design,
    settings: OptimizerSettings = OptimizerSettings(),
) -> WeightResult:
    """Optimize group weights and allocations for a fixed support.

    The support doses of `design` are kept; masses are re-optimized on the
    joint simplex.  Raises RankDeficiencyError when the support gradients
    cannot yield a non-singular information matrix.
    """
    problem, factors = _problem_for(objective, settings)
    st = problem.state_from_design(design, factors)
    if st is None:
        # zero masses may hide a viable support; retry from uniform
        total = sum(len(g.doses) for g in design.groups)
        supports = [
            np.sort(np.asarray(g.doses, dtype=float)) / factors[i]
            for i, g in enumerate(design.groups)
        ]
        st = problem.make_state(supports, np.full(total, 1.0 / total))
    if st is None:
        raise RankDeficiencyError(
            "support gradient vectors are linearly dependent; the information "
            "matrix is singular for every weighting of this support"
        )
    trace = [st.value]
    st = problem.weight_phase(st, settings.weight_iters, settings.convergence_tol)
    trace.append(st.value)
    st = problem.weight_phase(st, FINAL_SWEEPS, 0.0, spread_target=SUPPORT_TOL)
    trace.append(st.value)
    return WeightResult(design=problem.to_design(st, factors), trace=tuple(trace))


def maximize(
    objective,
    settings: OptimizerSettings = OptimizerSettings(),
    initial_designs: tuple[Design, ...] = (),
    verify_settings: VerifySettings = VerifySettings(),
) -> OptimizationResult:
    """Best design over `restarts` random initializations plus any seeds.

    `objective` is a ModelSpec (locally-D) or a CompoundCriterion.  Restarts
    are deterministic functions of `settings.seed`; the returned result
    dominates every restart, with ties resolved toward the earliest start.
    """
    problem, factors = _problem_for(objective, settings)
    children = np.random.SeedSequence(settings.seed).spawn(settings.restarts)
    best = None
    best_trace = None
    singular = 0
    starts = [problem.state_from_design(d, factors) for d in initial_designs]
    starts += [problem.initial_state(np.random.default_rng(c)) for c in children]
    for st in starts:
        if st is None:
            singular += 1
            continue
        final, trace = problem.run(st)
        if best is None or final.value > best.value:
            best, best_trace = final, trace
    if best is None:
        raise OptimizationFailure(
            f"all {len(starts)} restarts were singular; the design space cannot "
            f"support the {int(problem.ms.max())}-parameter model "
            "(check dose ranges and support sizes)"
        )
    best = problem.finalize(best)
    design = problem.to_design(best, factors)
    certificate = _certify(objective, design, verify_settings)
    bound = certificate.bound
    converged = all(
        g.max_kappa <= bound * (1.0 + CONVERGED_BAND) for g in certificate.per_group
    )
    return OptimizationResult(
        design=design,
        criterion=_evaluate(objective, design),
        certificate=certificate,
        trace=tuple(best_trace),
        converged=converged,
        singular_restarts=singular,
    )


def solve_locally_d(
    spec: ModelSpec,
    settings: OptimizerSettings = OptimizerSettings(),
    verify_settings: VerifySettings = VerifySettings(),
) -> OptimizationResult:
    """Locally D-optimal design: closed form when certified, optimizer otherwise.

    Location sharing uses the composed single-model optimum; location_scale
    with two groups uses the minimally supported case split.  Each closed
    form is accepted only with a passing equivalence certificate; on failure
    (the minimally supported design need not be optimal among all designs)
    the numerical optimizer runs, seeded with the closed form.
    """
    seeds: tuple[Design, ...] = ()
    if spec.sharing is Sharing.LOCATION:
        design = shared_location_optimal(spec)
        certificate = certify_d(spec, design, verify_settings)
        if certificate.passed:
            criterion = log_det_information(spec, design)
            return OptimizationResult(
                design=design,
                criterion=criterion,
                certificate=certificate,
                trace=(criterion,),
                converged=True,
                case="shared_location",
                order=tuple(range(spec.n_groups)),
            )
        seeds = (design,)
    elif spec.sharing is Sharing.LOCATION_SCALE and spec.n_groups == 2:
        try:
            result = min_supported_optimal(spec)
        except ClosedFormDomainError:
            result = None
        if result is not None:
            certificate = certify_d(spec, result.design, verify_settings)
            if certificate.passed:
                criterion = log_det_information(spec, result.design)
                return OptimizationResult(
                    design=result.design,
                    criterion=criterion,
                    certificate=certificate,
                    trace=(criterion,),
                    converged=True,
                    case=result.case,
                    order=result.order,
                )
            seeds = (result.design,)
    return maximize(
        spec, settings, initial_designs=seeds, verify_settings=verify_settings
    )


def build_compound(
    specs,
    prior=None,
    settings: OptimizerSettings = OptimizerSettings(),
    verify_settings: VerifySettings = VerifySettings(),
) -> CompoundCriterion:
    """Assemble a CompoundCriterion, solving each candidate's locally-D reference."""
    specs = tuple(specs)
    refs = tuple(
        solve_locally_d(s, settings, verify_settings).criterion for s in specs
    )
    prior = tuple(prior) if prior is not None else (1.0 / len(specs),) * len(specs)
    return CompoundCriterion(specs=specs, reference_logdets=refs, prior=prior)
