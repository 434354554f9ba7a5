"""Closed-form locally D-optimal designs for shared-parameter studies.

Two explicit constructions are implemented:

* `shared_location_optimal`: studies whose groups share only the intercept.
  The optimum composes the known single-model optima: the lowest-variance
  group keeps the placebo dose {0, x*, dmax} with equal weights, every other
  group uses {x*, dmax}, and the allocation is proportional to the per-group
  support sizes.
* `min_supported_optimal`: two groups sharing intercept and effect scale.
  The optimum within the class of designs with exactly four support points
  splits into three cases on the variance ratio r = sigma2_1/sigma2_2 (after
  relabelling groups so the scaled dose-scale parameters increase): placebo
  in the low-variance group (r <= 1), placebo in the high-variance group
  with a 2+2 split (r up to a family threshold), or placebo plus three
  points in the second group (r above the threshold).

`emax_global_check` decides, for the Emax family, whether the minimally
supported optimum is D-optimal among all designs; the case-b condition is
necessary and sufficient, the other two are sufficient only.

All case thresholds are evaluated on unit-rescaled dose axes, where they are
dimensionless.  Sigmoid Emax models reduce to Emax via the substitution
u = d**gamma, which multiplies the information determinant by a constant
and therefore preserves optimal designs exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .designs import Design, GroupDesign
from .models import Family, ModelSpec, Sharing, power_transform


class ClosedFormDomainError(ValueError):
    """Parameters outside the region where a closed form is available."""


def unit_interior_point(family: Family, theta_bar: float) -> float:
    """Interior optimal support point on [0, 1] for one group.

    `theta_bar` is the dose-scale parameter divided by dmax.  The point is
    the non-trivial support dose of the single-model D-optimal design.
    """
    t = float(theta_bar)
    if t <= 0:
        raise ClosedFormDomainError("scaled dose-scale parameter must be positive")
    family = Family(family)
    if family is Family.EMAX:
        return t / (1.0 + 2.0 * t)
    if family is Family.EXPONENTIAL:
        return 1.0 - t + 1.0 / math.expm1(1.0 / t)
    if family is Family.LINLOG:
        return (1.0 + t) * t * math.log1p(1.0 / t) - t
    raise ClosedFormDomainError(
        "no direct interior-point formula for sigmoid_emax; substitute u = d**gamma"
    )


def interior_support_dose(spec: ModelSpec, group: int) -> float:
    """The interior support dose x* of group `group`, in original dose units."""
    dm = spec.dmax[group]
    tb = spec.dose_scale(group) / dm
    if spec.family is Family.SIGMOID_EMAX:
        g = spec.gamma
        x_power = unit_interior_point(Family.EMAX, tb**g)
        return dm * x_power ** (1.0 / g)
    return dm * unit_interior_point(spec.family, tb)


def shared_location_optimal(spec: ModelSpec) -> Design:
    """Locally D-optimal design when only the intercept is shared.

    The group with the smallest residual variance (lowest index on ties)
    receives the three-point design {0, x*, dmax} and allocation 3/m; every
    other group receives {x*, dmax} and allocation 2/m, with m = 1 + 2M.
    Valid for all four families; the certificate of optimality is the
    sensitivity bound kappa <= m everywhere.
    """
    if spec.sharing is not Sharing.LOCATION:
        raise ClosedFormDomainError(
            "shared_location_optimal requires location sharing"
        )
    lead = int(np.argmin(spec.sigma2))
    m = spec.m
    groups = []
    alloc = []
    for i in range(spec.n_groups):
        x = interior_support_dose(spec, i)
        if i == lead:
            groups.append(GroupDesign.uniform((0.0, x, spec.dmax[i])))
            alloc.append(3.0 / m)
        else:
            groups.append(GroupDesign.uniform((x, spec.dmax[i])))
            alloc.append(2.0 / m)
    return Design(tuple(groups), tuple(alloc))


def _log_g_exp(theta_bar: float, x: float) -> float:
    # g(t, x) = (1 + (x-1) e^{x/t} - x e^{(x-1)/t})^2 with the e^{x/t} factor
    # pulled out so the expression stays finite for small t.
    inner = (x - 1.0) + math.exp(-x / theta_bar) - x * math.exp(-1.0 / theta_bar)
    return 2.0 * (x / theta_bar + math.log(abs(inner)))


def _g_log(theta_bar: float, x: float) -> float:
    t = theta_bar
    l1 = math.log1p(1.0 / t)
    lx = math.log1p(x / t)
    bracket = x / ((x + t) * lx) - 1.0 / ((1.0 + t) * l1)
    return (1.0 + t) ** 2 * (l1 * lx) ** 2 * bracket**2


def variance_ratio_threshold(
    family: Family, theta_bar_1: float, theta_bar_2: float
) -> float:
    """Case-b/case-c boundary for the variance ratio, on unit dose axes.

    Requires 0 < theta_bar_1 < theta_bar_2 < 1.  The minimally supported
    optimum has the 2+2 structure for 1 < r <= threshold and the 1+3
    structure above it.
    """
    family = Family(family)
    t1, t2 = float(theta_bar_1), float(theta_bar_2)
    if not 0.0 < t1 < t2 < 1.0:
        raise ClosedFormDomainError(
            f"need 0 < theta_bar_1 < theta_bar_2 < 1, got ({t1:.6g}, {t2:.6g})"
        )
    if family is Family.EMAX:
        return ((1.0 + t2) / (1.0 + t1)) ** 6
    if family is Family.EXPONENTIAL:
        x1 = unit_interior_point(family, t1)
        x2 = unit_interior_point(family, t2)
        return math.exp(_log_g_exp(t1, x1) - _log_g_exp(t2, x2))
    if family is Family.LINLOG:
        x1 = unit_interior_point(family, t1)
        x2 = unit_interior_point(family, t2)
        return _g_log(t1, x1) / _g_log(t2, x2)
    raise ClosedFormDomainError(
        "sigmoid_emax thresholds come from the Emax family after u = d**gamma"
    )


@dataclass(frozen=True)
class MinSupportedResult:
    """A minimally supported optimum plus the case split that produced it.

    `order` maps case labels to input groups: order[0] is the input index of
    the group with the smaller scaled dose-scale parameter (the theorem's
    first group); `r` and `threshold` are reported in that orientation.  The
    design itself is indexed like the input spec.
    """

    design: Design
    case: str
    r: float
    threshold: float
    order: tuple[int, int]


def min_supported_optimal(spec: ModelSpec) -> MinSupportedResult:
    """D-optimal design with exactly four support points, two groups.

    Requires location_scale sharing, two groups, and scaled dose-scale
    parameters strictly between 0 and 1 and distinct across groups.  Case a
    applies for r <= 1, case b up to the family threshold, case c above it;
    boundary values of r resolve to the lower case.  Within its class the
    design is exactly optimal; `emax_global_check` addresses optimality
    among all designs for the Emax family.
    """
    if spec.sharing is not Sharing.LOCATION_SCALE or spec.n_groups != 2:
        raise ClosedFormDomainError(
            "min_supported_optimal requires location_scale sharing and 2 groups"
        )
    if spec.family is Family.SIGMOID_EMAX:
        power = power_transform(spec)
        inner = min_supported_optimal(power.spec)
        groups = tuple(
            GroupDesign(tuple(power.from_power(np.array(g.doses))), g.weights)
            for g in inner.design.groups
        )
        return MinSupportedResult(
            design=Design(groups, inner.design.allocation),
            case=inner.case,
            r=inner.r,
            threshold=inner.threshold,
            order=inner.order,
        )
    tb = spec.scaled_dose_scales()
    if tb[0] == tb[1]:
        raise ClosedFormDomainError(
            "groups have identical scaled dose-scale parameters; the four-point "
            "case split is undefined"
        )
    lo, hi = (0, 1) if tb[0] < tb[1] else (1, 0)
    if not 0.0 < tb[lo] < tb[hi] < 1.0:
        raise ClosedFormDomainError(
            f"scaled dose-scale parameters must lie in (0, 1), got {tb}"
        )
    r = spec.sigma2[lo] / spec.sigma2[hi]
    threshold = variance_ratio_threshold(spec.family, tb[lo], tb[hi])
    x_lo = interior_support_dose(spec, lo)
    x_hi = interior_support_dose(spec, hi)
    if spec.family is Family.EMAX:
        y_star = spec.dose_scale(hi)
        z_star = spec.dose_scale(lo)
    else:
        y_star = spec.dmax[hi]
        z_star = spec.dmax[lo]
    if r <= 1.0:
        case = "a"
        xi_lo = GroupDesign.uniform((0.0, x_lo, spec.dmax[lo]))
        xi_hi = GroupDesign.uniform((y_star,))
        mu_lo = 0.75
    elif r <= threshold:
        case = "b"
        xi_lo = GroupDesign.uniform((x_lo, spec.dmax[lo]))
        xi_hi = GroupDesign.uniform((0.0, y_star))
        mu_lo = 0.5
    else:
        case = "c"
        xi_lo = GroupDesign.uniform((z_star,))
        xi_hi = GroupDesign.uniform((0.0, x_hi, spec.dmax[hi]))
        mu_lo = 0.25
    groups: list[GroupDesign] = [None, None]  # type: ignore[list-item]
    alloc = [0.0, 0.0]
    groups[lo], groups[hi] = xi_lo, xi_hi
    alloc[lo], alloc[hi] = mu_lo, 1.0 - mu_lo
    return MinSupportedResult(
        design=Design(tuple(groups), tuple(alloc)),
        case=case,
        r=r,
        threshold=threshold,
        order=(lo, hi),
    )


@dataclass(frozen=True)
class EmaxGlobalCheck:
    """Outcome of the Emax all-designs optimality conditions.

    `case` is the minimally supported structure being certified, `slack` is
    (parameter - bound) for the relevant inequality, and `sharp` marks the
    case-b condition, which is necessary and sufficient; for cases a and c a
    negative slack leaves optimality undecided rather than refuted.
    """

    case: str
    holds: bool
    slack: float
    rhs: float
    sharp: bool


def emax_global_check(
    theta_bar_1: float, theta_bar_2: float, r: float
) -> EmaxGlobalCheck:
    """Check whether the minimally supported Emax optimum is globally optimal.

    Arguments are the scaled dose-scale parameters (increasing, both in
    (0, 1)) and the variance ratio r = sigma2_1/sigma2_2 in that labelling.
    """
    t1, t2 = float(theta_bar_1), float(theta_bar_2)
    if not 0.0 < t1 < t2 < 1.0:
        raise ClosedFormDomainError(
            f"need 0 < theta_bar_1 < theta_bar_2 < 1, got ({t1:.6g}, {t2:.6g})"
        )
    r = float(r)
    if r <= 0.0:
        raise ClosedFormDomainError("variance ratio must be positive")
    if r <= 1.0:
        case = "a"
        rhs = (r * 6.0 * t1 * (t1 + 1.0) * (2.0 * t1 + 1.0) ** 2 - (1.0 - r)) / (
            6.0 + 2.0 * r * t1 * (1.0 + 2.0 * t1)
        )
        lhs, sharp = t2, False
    elif r <= variance_ratio_threshold(Family.EMAX, t1, t2):
        case = "b"
        rhs = (
            t1**2 * (1.0 + 2.0 * t1) ** 2
            + r * (1.0 + t1) ** 2 * (1.0 + 4.0 * t1 + 20.0 * t1**2)
            - 1.0
        ) / (6.0 + 2.0 * t1 * (1.0 + 2.0 * t1))
        lhs, sharp = t2, True
    else:
        case = "c"
        inv = 1.0 / r
        rhs = (inv * 6.0 * t2 * (t2 + 1.0) * (2.0 * t2 + 1.0) ** 2 - (1.0 - inv)) / (
            6.0 + 2.0 * inv * t2 * (1.0 + 2.0 * t2)
        )
        lhs, sharp = t1, False
    slack = lhs - rhs
    return EmaxGlobalCheck(case=case, holds=slack >= 0.0, slack=slack, rhs=rhs, sharp=sharp)


def emax_global_check_for(spec: ModelSpec) -> EmaxGlobalCheck:
    """Spec-level wrapper: relabel groups by scaled dose-scale and check.

    Accepts Emax and sigmoid Emax specs with location_scale sharing and two
    groups; sigmoid specs are first reduced by the power substitution.
    """
    if spec.sharing is not Sharing.LOCATION_SCALE or spec.n_groups != 2:
        raise ClosedFormDomainError(
            "emax_global_check_for requires location_scale and 2 groups"
        )
    if spec.family is Family.SIGMOID_EMAX:
        return emax_global_check_for(power_transform(spec).spec)
    if spec.family is not Family.EMAX:
        raise ClosedFormDomainError(
            f"all-designs conditions are available for emax only, not "
            f"{spec.family.value}"
        )
    tb = spec.scaled_dose_scales()
    lo, hi = (0, 1) if tb[0] < tb[1] else (1, 0)
    if tb[lo] == tb[hi]:
        raise ClosedFormDomainError("groups have identical scaled dose-scale parameters")
    return emax_global_check(tb[lo], tb[hi], spec.sigma2[lo] / spec.sigma2[hi])


@dataclass(frozen=True)
class SupportBound:
    """Support structure sufficient for a Loewner-dominating design.

    `counts[i]` bounds the number of points needed in group i, `required[i]`
    lists doses that can always be taken into the support, and `lead_group`
    is the smallest-variance group that carries the placebo (None for the
    exponential family, whose dominating structure has no placebo
    obligation).
    """

    counts: tuple[int, ...]
    total: int
    required: tuple[tuple[float, ...], ...]
    lead_group: int | None


def support_bound(spec: ModelSpec) -> SupportBound:
    """Per-group support counts that dominate any design in the Loewner order.

    Emax and linear-in-log studies admit a dominating design on 2M+1 points:
    three in the smallest-variance group (0 and dmax among them) and two in
    every other group (dmax among them).  Exponential studies need 3M
    points, three per group, each containing dmax.  Sigmoid Emax inherits
    the Emax structure through the substitution u = d**gamma, which maps the
    model onto Emax with the boundary points fixed.
    """
    if spec.family is Family.EXPONENTIAL:
        return SupportBound(
            counts=(3,) * spec.n_groups,
            total=3 * spec.n_groups,
            required=tuple((d,) for d in spec.dmax),
            lead_group=None,
        )
    lead = int(np.argmin(spec.sigma2))
    return SupportBound(
        counts=tuple(3 if i == lead else 2 for i in range(spec.n_groups)),
        total=2 * spec.n_groups + 1,
        required=tuple(
            (0.0, spec.dmax[i]) if i == lead else (spec.dmax[i],)
            for i in range(spec.n_groups)
        ),
        lead_group=lead,
    )
