"""Equivalence-theorem certification of candidate optimal designs.

A design maximises det M over all designs exactly when its sensitivity
function

    kappa_i(d) = h_i(d)^T M(xi)^{-1} h_i(d)

stays below m = p + qM on every group's dose range, with equality at every
support dose.  The compound criterion (prior-weighted average D-efficiency)
obeys the analogous first-order bound with sensitivity

    psi_i(d) = sum_s prior_s * Eff_s(xi) * kappa_{s,i}(d) / m_s

and bound equal to the criterion value itself; both follow because the
criteria are concave in the per-point information masses.

Certification scans an equispaced dose grid per group, refines the top grid
peaks by golden-section search in their bracketing cells, and passes when
every group's maximum stays below bound*(1+tol) and every positive-weight
support dose has sensitivity within bound*tol of the bound.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .designs import CompoundCriterion, Design, information_matrix
from .models import ModelSpec, gradient_profile
from .search import refined_argmax


@dataclass(frozen=True)
class VerifySettings:
    """Grid density, pass tolerance and refinement depth for certification."""

    grid_density: int = 2001
    tol: float = 1e-6
    refine: bool = True
    refine_rtol: float = 1e-10  # golden-section dose tolerance, relative to dmax

    def __post_init__(self):
        if self.grid_density < 2:
            raise ValueError("grid_density must be at least 2")
        if self.tol < 0:
            raise ValueError("tol must be non-negative")


@dataclass(frozen=True)
class GroupScan:
    """Per-group certification summary."""

    max_kappa: float
    argmax_dose: float
    support_kappas: tuple[float, ...]


@dataclass(frozen=True)
class OptimalityCertificate:
    """Scan results for all groups against the equivalence bound.

    Passing requires both clauses: no dose anywhere exceeds
    bound*(1+tol), and the sensitivity at every support dose carrying
    weight agrees with the bound to within bound*tol.
    """

    passed: bool
    bound: float
    tol: float
    grid_density: int
    refine_iters: int
    kind: str  # "d" or "compound"
    per_group: tuple[GroupScan, ...]

    def to_dict(self) -> dict:
        return {
            "pass": self.passed,
            "m": self.bound,
            "tol": self.tol,
            "grid_density": self.grid_density,
            "refine_iters": self.refine_iters,
            "kind": self.kind,
            "per_group": [
                {
                    "group": i,
                    "max_kappa": g.max_kappa,
                    "argmax_dose": g.argmax_dose,
                    "support_kappas": list(g.support_kappas),
                }
                for i, g in enumerate(self.per_group)
            ],
        }


def sensitivity_profile(
    spec: ModelSpec, design: Design, group: int, doses, info=None
) -> np.ndarray:
    """kappa_i(d) = h_i(d)^T M^{-1} h_i(d) for an array of doses.

    The quadratic form is evaluated through a linear solve; a singular
    information matrix raises numpy.linalg.LinAlgError.
    """
    m = information_matrix(spec, design) if info is None else info
    h = gradient_profile(spec, group, np.atleast_1d(doses))
    return np.einsum("jk,jk->k", h, np.linalg.solve(m, h))


def weighted_support_sensitivity(spec: ModelSpec, design: Design) -> float:
    """sum_i lambda_i sum_j w_ij kappa_i(d_ij); equals m for any non-singular design."""
    m = information_matrix(spec, design)
    total = 0.0
    for i, (g, lam) in enumerate(zip(design.groups, design.allocation)):
        kappas = sensitivity_profile(spec, design, i, g.doses, info=m)
        total += lam * float(np.dot(g.weights, kappas))
    return total


def compound_sensitivity_profile(
    criterion: CompoundCriterion, design: Design, group: int, doses
) -> np.ndarray:
    """psi_i(d) = sum_s prior_s Eff_s kappa_{s,i}(d)/m_s for an array of doses."""
    effs = criterion.efficiencies(design)
    out = np.zeros(np.atleast_1d(np.asarray(doses, dtype=float)).shape)
    for s, spec in enumerate(criterion.specs):
        coeff = criterion.prior[s] * effs[s] / spec.m
        if coeff > 0.0:
            out += coeff * sensitivity_profile(spec, design, group, doses)
    return out


def _scan_groups(
    profile, design: Design, dmaxes, bound: float, kind: str, settings: VerifySettings
) -> OptimalityCertificate:
    scans = []
    refine_iters = 0
    for i, dm in enumerate(dmaxes):
        grid = np.linspace(0.0, dm, settings.grid_density)
        values = profile(i, grid)
        if settings.refine:
            best_d, best_v, iters = refined_argmax(
                lambda x: float(profile(i, np.array([x]))[0]),
                grid,
                values,
                xtol=settings.refine_rtol * dm,
            )
            refine_iters += iters
        else:
            j = int(np.argmax(values))
            best_d, best_v = float(grid[j]), float(values[j])
        support = tuple(float(v) for v in profile(i, design.groups[i].doses))
        if max(support) > best_v:
            best_v = max(support)
            best_d = float(design.groups[i].doses[int(np.argmax(support))])
        scans.append(
            GroupScan(max_kappa=best_v, argmax_dose=best_d, support_kappas=support)
        )
    below_bound = all(s.max_kappa <= bound * (1.0 + settings.tol) for s in scans)
    support_equal = all(
        abs(k - bound) <= bound * settings.tol
        for scan, group, lam in zip(scans, design.groups, design.allocation)
        if lam > 0.0
        for k, w in zip(scan.support_kappas, group.weights)
        if w > 0.0
    )
    return OptimalityCertificate(
        passed=below_bound and support_equal,
        bound=bound,
        tol=settings.tol,
        grid_density=settings.grid_density,
        refine_iters=refine_iters,
        kind=kind,
        per_group=tuple(scans),
    )


def certify_d(
    spec: ModelSpec, design: Design, settings: VerifySettings = VerifySettings()
) -> OptimalityCertificate:
    """Certify local D-optimality of `design` against the bound m.

    Raises numpy.linalg.LinAlgError when the information matrix is singular,
    since no certificate exists for a degenerate design.
    """
    info = information_matrix(spec, design)

    def profile(group, doses):
        return sensitivity_profile(spec, design, group, doses, info=info)

    return _scan_groups(profile, design, spec.dmax, float(spec.m), "d", settings)


def certify_compound(
    criterion: CompoundCriterion,
    design: Design,
    settings: VerifySettings = VerifySettings(),
) -> OptimalityCertificate:
    """Certify compound optimality of `design` against the bound g(design)."""
    effs = criterion.efficiencies(design)
    bound = float(criterion.prior @ effs)
    infos = [information_matrix(s, design) for s in criterion.specs]

    def profile(group, doses):
        out = np.zeros(np.atleast_1d(np.asarray(doses, dtype=float)).shape)
        for s, spec in enumerate(criterion.specs):
            coeff = criterion.prior[s] * effs[s] / spec.m
            if coeff > 0.0:
                out += coeff * sensitivity_profile(
                    spec, design, group, doses, info=infos[s]
                )
        return out

    dmaxes = criterion.specs[0].dmax
    return _scan_groups(profile, design, dmaxes, bound, "compound", settings)
