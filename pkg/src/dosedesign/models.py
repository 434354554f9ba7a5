"""Dose-response mean models whose parameters are partly shared across groups.

A study observes M treatment groups.  Group i has its own dose range
[0, dmax_i] and residual variance sigma2_i, but all groups follow the same
parametric family and share part of the parameter vector:

* ``location`` sharing: common intercept theta1, plus a per-group pair
  (effect scale, dose-scale parameter), so q = 2 group parameters.
* ``location_scale`` sharing: common intercept and effect scale, plus one
  per-group dose-scale parameter, so q = 1.

The full parameter vector stacks the shared block first and then the group
blocks in group order; its length is m = p + q*M.  Gradients returned here
are the mean-function derivatives with respect to that full vector, scaled
by 1/sigma_i and zero outside the shared and own-group blocks.

The "dose-scale parameter" is the ED50 for the Emax families and the rate
denominator for the exponential and linear-in-log families; it carries dose
units, which is what makes unit rescaling (`rescale_to_unit`) a pure
reparameterisation.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

# exp(d / scale) overflows float64 near d/scale ~ 709; reject before that.
EXP_ARG_LIMIT = 700.0

# Relative slack when checking doses against [0, dmax]: admits round-trip
# rounding noise without clamping genuinely out-of-range input.
DOSE_RANGE_RTOL = 1e-12


class Family(str, enum.Enum):
    EMAX = "emax"
    SIGMOID_EMAX = "sigmoid_emax"
    LINLOG = "linlog"
    EXPONENTIAL = "exponential"


class Sharing(str, enum.Enum):
    LOCATION = "location"
    LOCATION_SCALE = "location_scale"


class DoseRangeError(ValueError):
    """Dose outside the group's design space [0, dmax]."""


def _as_float_tuple(values) -> tuple[float, ...]:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(values, dtype=float)))


@dataclass(frozen=True)
class ModelSpec:
    """One dose-response family, sharing pattern, and parameter values.

    Parameters
    ----------
    family : Family or str
        One of emax, sigmoid_emax, linlog, exponential.
    sharing : Sharing or str
        location (common intercept) or location_scale (common intercept
        and effect scale).
    theta_shared : sequence of float
        Shared block; length 1 for location, 2 for location_scale.
    theta_group : sequence of sequences of float
        One block per group.  location: (effect scale, dose-scale param);
        location_scale: (dose-scale param,).
    sigma2 : sequence of float
        Residual variances, one per group, strictly positive.
    dmax : sequence of float
        Upper dose limits, one per group, strictly positive.
    gamma : float, optional
        Hill coefficient; required (and > 0) iff family is sigmoid_emax.
    """

    family: Family
    sharing: Sharing
    theta_shared: tuple[float, ...]
    theta_group: tuple[tuple[float, ...], ...]
    sigma2: tuple[float, ...]
    dmax: tuple[float, ...]
    gamma: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        object.__setattr__(self, "sharing", Sharing(self.sharing))
        object.__setattr__(self, "theta_shared", _as_float_tuple(self.theta_shared))
        object.__setattr__(
            self, "theta_group", tuple(_as_float_tuple(g) for g in self.theta_group)
        )
        object.__setattr__(self, "sigma2", _as_float_tuple(self.sigma2))
        object.__setattr__(self, "dmax", _as_float_tuple(self.dmax))
        if self.gamma is not None:
            object.__setattr__(self, "gamma", float(self.gamma))
        self._validate()

    def _validate(self) -> None:
        if len(self.theta_shared) != self.p:
            raise ValueError(
                f"theta_shared: expected {self.p} values for {self.sharing.value} "
                f"sharing, got {len(self.theta_shared)}"
            )
        if self.n_groups < 1:
            raise ValueError("theta_group: at least one group required")
        for i, block in enumerate(self.theta_group):
            if len(block) != self.q:
                raise ValueError(
                    f"theta_group[{i}]: expected {self.q} values, got {len(block)}"
                )
        if len(self.sigma2) != self.n_groups or len(self.dmax) != self.n_groups:
            raise ValueError(
                "sigma2/dmax: lengths must match the number of groups "
                f"({self.n_groups})"
            )
        if any(s <= 0 for s in self.sigma2):
            raise ValueError("sigma2: all variances must be strictly positive")
        if any(d <= 0 for d in self.dmax):
            raise ValueError("dmax: all dose limits must be strictly positive")
        for i in range(self.n_groups):
            if self.dose_scale(i) <= 0:
                raise ValueError(
                    f"theta_group[{i}]: dose-scale parameter must be strictly positive"
                )
        # a zero effect scale collapses the dose-scale gradient column
        if self.sharing is Sharing.LOCATION:
            if any(blk[0] == 0.0 for blk in self.theta_group):
                raise ValueError("theta_group: effect scales must be non-zero")
        elif self.theta_shared[1] == 0.0:
            raise ValueError("theta_shared: effect scale must be non-zero")
        if self.family is Family.SIGMOID_EMAX:
            if self.gamma is None or self.gamma <= 0:
                raise ValueError("gamma: sigmoid_emax requires gamma > 0")
        elif self.gamma is not None:
            raise ValueError(f"gamma: not a parameter of the {self.family.value} family")
        if self.family is Family.EXPONENTIAL:
            for i in range(self.n_groups):
                if self.dmax[i] / self.dose_scale(i) > EXP_ARG_LIMIT:
                    raise ValueError(
                        f"theta_group[{i}]: dmax/scale = "
                        f"{self.dmax[i] / self.dose_scale(i):.3g} exceeds the "
                        f"exponential overflow limit {EXP_ARG_LIMIT}"
                    )

    @property
    def n_groups(self) -> int:
        return len(self.theta_group)

    @property
    def p(self) -> int:
        return 1 if self.sharing is Sharing.LOCATION else 2

    @property
    def q(self) -> int:
        return 2 if self.sharing is Sharing.LOCATION else 1

    @property
    def m(self) -> int:
        return self.p + self.q * self.n_groups

    @property
    def variance_ratio(self) -> float:
        """sigma2_1 / sigma2_2, defined for two-group specs."""
        if self.n_groups != 2:
            raise ValueError("variance_ratio is defined for exactly 2 groups")
        return self.sigma2[0] / self.sigma2[1]

    def block_start(self, group: int) -> int:
        """Index of the first component of group `group`'s parameter block."""
        return self.p + self.q * group

    def dose_scale(self, group: int) -> float:
        """The dose-unit parameter of group `group` (ED50 for Emax families)."""
        block = self.theta_group[group]
        return block[1] if self.sharing is Sharing.LOCATION else block[0]

    def scaled_dose_scales(self) -> tuple[float, ...]:
        """Dose-scale parameters divided by their group's dmax."""
        return tuple(self.dose_scale(i) / self.dmax[i] for i in range(self.n_groups))


def _check_group(spec: ModelSpec, group: int) -> None:
    if not 0 <= group < spec.n_groups:
        raise IndexError(f"group index {group} out of range for {spec.n_groups} groups")


def _check_doses(spec: ModelSpec, group: int, doses) -> np.ndarray:
    d = np.asarray(doses, dtype=float)
    hi = spec.dmax[group]
    slack = DOSE_RANGE_RTOL * max(1.0, hi)
    if np.any(d < -slack) or np.any(d > hi + slack):
        bad = d[(d < -slack) | (d > hi + slack)]
        raise DoseRangeError(
            f"dose {bad.flat[0]:.6g} outside [0, {hi:.6g}] for group {group}"
        )
    return d


def _shape_terms(spec: ModelSpec, group: int, d: np.ndarray):
    """Raw shape f0(d, c) and its derivative in the dose-scale parameter c."""
    c = spec.dose_scale(group)
    fam = spec.family
    if fam is Family.EMAX:
        f0 = d / (c + d)
        dc = -d / (c + d) ** 2
    elif fam is Family.SIGMOID_EMAX:
        g = spec.gamma
        dg = d**g
        cg = c**g
        denom = cg + dg
        f0 = dg / denom
        dc = -g * c ** (g - 1.0) * dg / denom**2
    elif fam is Family.LINLOG:
        f0 = np.log1p(d / c)
        dc = -d / (c * (c + d))
    else:  # EXPONENTIAL
        f0 = np.expm1(d / c)
        dc = -(d / c**2) * np.exp(d / c)
    return f0, dc


def eval_mean(spec: ModelSpec, group: int, dose: float) -> float:
    """Mean response f(d) for one group at one dose.

    Raises
    ------
    IndexError
        If the group index is out of range.
    DoseRangeError
        If the dose lies outside [0, dmax] for that group (no clamping).
    """
    _check_group(spec, group)
    d = _check_doses(spec, group, dose)
    f0, _ = _shape_terms(spec, group, d)
    if spec.sharing is Sharing.LOCATION:
        out = spec.theta_shared[0] + spec.theta_group[group][0] * f0
    else:
        out = spec.theta_shared[0] + spec.theta_shared[1] * f0
    return float(out)


def gradient_profile(spec: ModelSpec, group: int, doses) -> np.ndarray:
    """Information-gradient columns for several doses at once.

    Returns the (m, k) array whose j-th column is the derivative of the mean
    response at dose j with respect to the full stacked parameter vector,
    scaled by 1/sigma_i; entries outside the shared block and group i's block
    are exactly zero.
    """
    _check_group(spec, group)
    d = _check_doses(spec, group, np.atleast_1d(doses))
    f0, dc = _shape_terms(spec, group, d)
    inv_sigma = 1.0 / np.sqrt(spec.sigma2[group])
    out = np.zeros((spec.m, d.size))
    start = spec.block_start(group)
    out[0] = inv_sigma
    if spec.sharing is Sharing.LOCATION:
        scale = spec.theta_group[group][0]
        out[start] = inv_sigma * f0
        out[start + 1] = inv_sigma * scale * dc
    else:
        scale = spec.theta_shared[1]
        out[1] = inv_sigma * f0
        out[start] = inv_sigma * scale * dc
    return out


def gradient(spec: ModelSpec, group: int, dose: float) -> np.ndarray:
    """Single-dose convenience wrapper around `gradient_profile`."""
    return gradient_profile(spec, group, [dose])[:, 0]


@dataclass(frozen=True)
class UnitRescaling:
    """A spec mapped onto unit design spaces plus the dose maps linking them.

    `spec` has every dmax equal to 1 and dose-scale parameters divided by the
    original dmax; `to_unit`/`from_unit` convert doses group-wise.
    """

    spec: ModelSpec
    dose_factors: tuple[float, ...]

    def to_unit(self, group: int, doses):
        return np.asarray(doses, dtype=float) / self.dose_factors[group]

    def from_unit(self, group: int, doses):
        return np.asarray(doses, dtype=float) * self.dose_factors[group]


def rescale_to_unit(spec: ModelSpec) -> UnitRescaling:
    """Reparameterise so every group's design space becomes [0, 1].

    Doses map by t -> t/dmax_i and each group's dose-scale parameter is
    divided by its dmax; all other parameters are untouched.  Optimal designs
    for the rescaled spec map back onto optimal designs for the original via
    multiplication by dmax, with unchanged weights.
    """
    if spec.sharing is Sharing.LOCATION:
        blocks = tuple(
            (blk[0], blk[1] / dm) for blk, dm in zip(spec.theta_group, spec.dmax)
        )
    else:
        blocks = tuple((blk[0] / dm,) for blk, dm in zip(spec.theta_group, spec.dmax))
    unit_spec = replace(
        spec, theta_group=blocks, dmax=(1.0,) * spec.n_groups
    )
    return UnitRescaling(spec=unit_spec, dose_factors=spec.dmax)


@dataclass(frozen=True)
class PowerRescaling:
    """Sigmoid-to-Emax substitution u = d**gamma on the dose axis.

    The substituted spec is an Emax model on [0, dmax**gamma] with dose-scale
    parameters raised to gamma.  The map is a strictly monotone dose
    reparameterisation, so D-optimal support points transfer exactly (weights
    and group allocations unchanged).
    """

    spec: ModelSpec
    gamma: float

    def to_power(self, doses):
        return np.asarray(doses, dtype=float) ** self.gamma

    def from_power(self, doses):
        return np.asarray(doses, dtype=float) ** (1.0 / self.gamma)


def power_transform(spec: ModelSpec) -> PowerRescaling:
    """Reduce a sigmoid_emax spec to the Emax family via u = d**gamma."""
    if spec.family is not Family.SIGMOID_EMAX:
        raise ValueError("power_transform applies to the sigmoid_emax family only")
    g = spec.gamma
    if spec.sharing is Sharing.LOCATION:
        blocks = tuple((blk[0], blk[1] ** g) for blk in spec.theta_group)
    else:
        blocks = tuple((blk[0] ** g,) for blk in spec.theta_group)
    emax_spec = replace(
        spec,
        family=Family.EMAX,
        gamma=None,
        theta_group=blocks,
        dmax=tuple(dm**g for dm in spec.dmax),
    )
    return PowerRescaling(spec=emax_spec, gamma=g)
