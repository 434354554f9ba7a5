"""Approximate designs for multi-group studies and their information matrices.

A design consists of one probability measure per group (finitely supported,
doses in [0, dmax_i]) together with allocation weights lambda summing to 1
that split the total sample across groups.  Its information matrix is

    M(xi) = sum_i lambda_i * sum_j w_ij * h_i(d_ij) h_i(d_ij)^T

with h_i the scaled gradient columns from `models.gradient_profile`.  The
D-criterion is log det M; group efficiencies compare per-group information
blocks against group-wise optimal references.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .models import ModelSpec, gradient_profile

WEIGHT_TOL = 1e-9
SUM_TOL = 1e-12
MERGE_TOL = 1e-9
SINGULAR_EIG_RATIO = 1e-12


@dataclass(frozen=True)
class GroupDesign:
    """Finitely supported probability measure on one group's dose range.

    Support points are stored sorted; points closer than MERGE_TOL times the
    largest dose are merged (weights added, dose set to the weighted mean), so
    coincident points collapse exactly and the support is strictly increasing.
    """

    doses: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        doses = [float(d) for d in self.doses]
        weights = [float(w) for w in self.weights]
        if len(doses) != len(weights) or not doses:
            raise ValueError("doses and weights must be equal-length and non-empty")
        if any(w < -WEIGHT_TOL for w in weights):
            raise ValueError("weights must be non-negative")
        if abs(sum(weights) - 1.0) > SUM_TOL:
            raise ValueError(f"weights must sum to 1, got {sum(weights):.15f}")
        order = sorted(range(len(doses)), key=doses.__getitem__)
        tol = MERGE_TOL * max(abs(d) for d in doses)
        merged: list[tuple[float, float]] = []
        for k in order:
            if merged and doses[k] - merged[-1][0] <= tol:
                d0, w0 = merged[-1]
                w = w0 + weights[k]
                merged[-1] = ((d0 * w0 + doses[k] * weights[k]) / w if w > 0 else d0, w)
            else:
                merged.append((doses[k], weights[k]))
        object.__setattr__(self, "doses", tuple(d for d, _ in merged))
        object.__setattr__(self, "weights", tuple(w for _, w in merged))

    @classmethod
    def uniform(cls, doses) -> "GroupDesign":
        doses = tuple(float(d) for d in doses)
        return cls(doses, (1.0 / len(doses),) * len(doses))

    def weight_at_zero(self) -> float:
        return sum(w for d, w in zip(self.doses, self.weights) if d == 0.0)


@dataclass(frozen=True)
class Design:
    """Per-group measures plus allocation weights across groups."""

    groups: tuple[GroupDesign, ...]
    allocation: tuple[float, ...]

    def __post_init__(self):
        groups = tuple(self.groups)
        alloc = tuple(float(a) for a in self.allocation)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "allocation", alloc)
        if len(groups) != len(alloc):
            raise ValueError("one allocation weight per group required")
        if any(a < -WEIGHT_TOL for a in alloc):
            raise ValueError("allocation weights must be non-negative")
        if abs(sum(alloc) - 1.0) > SUM_TOL:
            raise ValueError(f"allocation must sum to 1, got {sum(alloc):.15f}")

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    def scale_doses(self, factors) -> "Design":
        """Multiply each group's doses by its factor; weights unchanged."""
        groups = tuple(
            GroupDesign(tuple(d * f for d in g.doses), g.weights)
            for g, f in zip(self.groups, factors)
        )
        return Design(groups, self.allocation)

    def round_doses(self, decimals: int) -> "Design":
        groups = tuple(
            GroupDesign(tuple(round(d, decimals) for d in g.doses), g.weights)
            for g in self.groups
        )
        return Design(groups, self.allocation)


def group_information(spec: ModelSpec, design: Design, group: int) -> np.ndarray:
    """Information contribution of one group, before allocation weighting.

    Returns sum_j w_j h(d_j) h(d_j)^T as an (m, m) matrix supported on the
    shared block and group `group`'s own block.
    """
    g = design.groups[group]
    h = gradient_profile(spec, group, g.doses)
    w = np.asarray(g.weights)
    return (h * w) @ h.T


def information_matrix(spec: ModelSpec, design: Design) -> np.ndarray:
    """Full information matrix M(xi) = sum_i lambda_i * M_i(xi_i)."""
    if design.n_groups != spec.n_groups:
        raise ValueError(
            f"design has {design.n_groups} groups, spec has {spec.n_groups}"
        )
    m = np.zeros((spec.m, spec.m))
    for i, lam in enumerate(design.allocation):
        if lam > 0.0:
            m += lam * group_information(spec, design, i)
    return m


def logdet_psd(matrix) -> float:
    """log det of a symmetric PSD matrix; -inf when numerically singular.

    Singularity means the smallest-to-largest eigenvalue ratio drops below
    1e-12, which separates the rank-deficient constructions from merely
    ill-conditioned optima.
    """
    eigs = np.linalg.eigvalsh(np.asarray(matrix, dtype=float))
    if eigs[-1] <= 0.0 or eigs[0] <= SINGULAR_EIG_RATIO * eigs[-1]:
        return -math.inf
    return float(np.sum(np.log(eigs)))


def log_det_information(spec: ModelSpec, design: Design) -> float:
    """log det M(xi); -inf when numerically singular."""
    return logdet_psd(information_matrix(spec, design))


def d_efficiency(
    spec: ModelSpec, design: Design, reference_logdet: float
) -> float:
    """(det M(xi) / det M(xi*))**(1/m) against a reference log-determinant."""
    ld = log_det_information(spec, design)
    if ld == -math.inf:
        return 0.0
    return math.exp((ld - reference_logdet) / spec.m)


@dataclass(frozen=True)
class CompoundCriterion:
    """Weighted-average D-efficiency across candidate model specs.

    g(xi) = sum_s prior_s * (det M_s(xi) / det M_s(xi*_s))**(1/m_s), where
    xi*_s is the locally D-optimal design for spec s and priors sum to 1.
    All specs must agree on group count and dose ranges so that one design
    is admissible for every candidate.
    """

    specs: tuple[ModelSpec, ...]
    reference_logdets: tuple[float, ...]
    prior: tuple[float, ...] = field(default=())

    def __post_init__(self):
        specs = tuple(self.specs)
        refs = tuple(float(r) for r in self.reference_logdets)
        prior = tuple(float(p) for p in self.prior) or (
            (1.0 / len(specs),) * len(specs)
        )
        object.__setattr__(self, "specs", specs)
        object.__setattr__(self, "reference_logdets", refs)
        object.__setattr__(self, "prior", prior)
        if not specs or len(refs) != len(specs) or len(prior) != len(specs):
            raise ValueError("specs, reference_logdets and prior must align")
        if any(p < 0 for p in prior) or abs(sum(prior) - 1.0) > 1e-9:
            raise ValueError("prior must be a probability vector")
        base = specs[0]
        for s in specs[1:]:
            if s.n_groups != base.n_groups or s.dmax != base.dmax:
                raise ValueError("all specs must share group count and dose ranges")

    def efficiencies(self, design: Design) -> np.ndarray:
        return np.array(
            [
                d_efficiency(s, design, r)
                for s, r in zip(self.specs, self.reference_logdets)
            ]
        )

    def value(self, design: Design) -> float:
        return float(self.prior @ self.efficiencies(design))


def apportion(design: Design, n_total: int) -> list[list[tuple[float, int]]]:
    """Exact-design sample sizes for n_total subjects via largest remainders.

    Group sizes n_i = rounding of lambda_i * n_total; within each group the
    per-dose counts round w_ij * n_i.  Both stages use the Hamilton (largest
    remainder) rule with deterministic ties (remainders equal, lower index
    first), then correct so that every retained point gets >= 1 subject by
    moving subjects from wherever the surplus is largest.  Points with zero
    mass (zero weight, or any dose of a zero-allocation group) are dropped.
    A ValueError explains the smallest feasible n when n_total is too small.
    """
    retained = [
        [j for j, w in enumerate(g.weights) if a * w > 0.0]
        for g, a in zip(design.groups, design.allocation)
    ]
    sizes = [len(r) for r in retained]
    needed = sum(sizes)
    if n_total < needed:
        raise ValueError(
            f"n_total={n_total} cannot give every support point a subject; "
            f"need at least {needed}"
        )
    group_counts = _largest_remainder(
        [a * n_total for a in design.allocation], n_total
    )
    # zero-allocation groups keep no subjects
    for i, size in enumerate(sizes):
        if size == 0 and group_counts[i] > 0:
            j = min(k for k in range(len(sizes)) if sizes[k] > 0)
            group_counts[j] += group_counts[i]
            group_counts[i] = 0
    _correct_minimums(group_counts, sizes)
    out: list[list[tuple[float, int]]] = []
    for g, keep, n_g in zip(design.groups, retained, group_counts):
        counts = _largest_remainder([g.weights[j] * n_g for j in keep], n_g)
        _correct_minimums(counts, [1] * len(keep))
        out.append([(g.doses[j], c) for j, c in zip(keep, counts)])
    return out


def _correct_minimums(counts: list[int], minimums: list[int]) -> None:
    """Move units from the largest surplus onto entries below their minimum."""
    while True:
        low = [i for i, (c, k) in enumerate(zip(counts, minimums)) if c < k]
        if not low:
            return
        i = low[0]
        donor = max(
            range(len(counts)),
            key=lambda k: (counts[k] - minimums[k], -k),
        )
        counts[donor] -= 1
        counts[i] += 1


def _largest_remainder(quotas: list[float], total: int) -> list[int]:
    floors = [math.floor(q) for q in quotas]
    left = total - sum(floors)
    # ties by remainder break toward the lower index: stable sort on -rem
    order = sorted(range(len(quotas)), key=lambda i: -(quotas[i] - floors[i]))
    for i in order[:left]:
        floors[i] += 1
    return floors


def shift_placebo(spec: ModelSpec, design: Design) -> Design:
    """Move all placebo mass onto the lowest-variance group.

    For models whose shape satisfies f0(0) = 0 and df0/dc (0) = 0 (true for
    every family here), observations at dose 0 carry information about the
    intercept only, and that information is cheapest in the group with the
    smallest residual variance.  The returned design keeps every group's
    non-zero doses and weights proportionally rescaled, adds the removed
    placebo mass to the target group's allocation, and never has less
    information than the input (Loewner order).
    """
    target = int(np.argmin(spec.sigma2))  # ties resolve to the lowest index
    lam = list(design.allocation)
    moved = 0.0
    new_groups: list[GroupDesign] = []
    for i, g in enumerate(design.groups):
        w0 = g.weight_at_zero()
        if i == target or w0 == 0.0:
            new_groups.append(g)
            continue
        if w0 >= 1.0 - WEIGHT_TOL:
            raise ValueError(
                f"group {i} places all weight at dose 0; placebo shift would "
                "leave it without a design"
            )
        moved += lam[i] * w0
        lam[i] = lam[i] * (1.0 - w0)
        kept = [(d, w) for d, w in zip(g.doses, g.weights) if d != 0.0]
        scale = 1.0 / (1.0 - w0)
        new_groups.append(
            GroupDesign(
                tuple(d for d, _ in kept), tuple(w * scale for _, w in kept)
            )
        )
    if moved == 0.0:
        return design
    old_target = design.groups[target]
    lam_target = lam[target] + moved
    w0_new = (design.allocation[target] * old_target.weight_at_zero() + moved) / (
        lam_target
    )
    kept = [(d, w) for d, w in zip(old_target.doses, old_target.weights) if d != 0.0]
    rest_scale = design.allocation[target] / lam_target
    doses = (0.0,) + tuple(d for d, _ in kept)
    weights = (w0_new,) + tuple(w * rest_scale for _, w in kept)
    lam[target] = lam_target
    new_groups[target] = GroupDesign(doses, weights)
    return Design(tuple(new_groups), tuple(lam))
