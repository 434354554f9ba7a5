"""Shared constructors: bundled case-study specs and random instances."""

from __future__ import annotations

import numpy as np

from dosedesign import Design, Family, GroupDesign, ModelSpec, log_det_information

DMAX = (1000.0, 400.0)

# two groups (monthly/weekly administration), equal variance, shared intercept
# and, for ids 1-6, shared effect scale; ids by the bundled fixture files
_TABLE2 = {
    1: dict(family="emax", sharing="location_scale",
            theta_shared=(5.48, 0.90), theta_group=((13.82,), (10.46,))),
    2: dict(family="emax", sharing="location_scale",
            theta_shared=(5.47, 0.93), theta_group=((2.93,), (2.39,))),
    3: dict(family="emax", sharing="location_scale",
            theta_shared=(5.47, 0.93), theta_group=((2.93,), (40.40,))),
    4: dict(family="emax", sharing="location_scale",
            theta_shared=(5.47, 0.93), theta_group=((53.49,), (2.39,))),
    5: dict(family="emax", sharing="location_scale",
            theta_shared=(5.47, 0.93), theta_group=((53.49,), (40.40,))),
    6: dict(family="sigmoid_emax", gamma=3.0, sharing="location_scale",
            theta_shared=(5.48, 0.90), theta_group=((13.82,), (10.46,))),
    7: dict(family="emax", sharing="location",
            theta_shared=(5.48,), theta_group=((0.85, 13.82), (0.95, 10.46))),
    8: dict(family="sigmoid_emax", gamma=3.0, sharing="location",
            theta_shared=(5.48,), theta_group=((0.65, 2.93), (0.75, 2.39))),
    9: dict(family="sigmoid_emax", gamma=3.0, sharing="location",
            theta_shared=(5.48,), theta_group=((0.95, 53.49), (1.05, 40.40))),
    10: dict(family="linlog", sharing="location",
             theta_shared=(5.44,), theta_group=((0.13, 0.32), (0.14, 0.41))),
}


def table2_spec(model_id: int) -> ModelSpec:
    return ModelSpec(sigma2=(1.0, 1.0), dmax=DMAX, **_TABLE2[model_id])


def table2_specs(ids=range(1, 11)) -> tuple[ModelSpec, ...]:
    return tuple(table2_spec(i) for i in ids)


def _normalized(weights) -> tuple[float, ...]:
    w = np.asarray(weights, dtype=float)
    return tuple(w / w.sum())


def printed_c5() -> Design:
    """The five-candidate compound design as printed (two-decimal doses)."""
    return Design(
        (
            GroupDesign((0.0, 3.02, 43.67, 1000.0), _normalized((0.26, 0.24, 0.25, 0.25))),
            GroupDesign((2.53, 37.51), _normalized((0.48, 0.52))),
        ),
        _normalized((0.67, 0.33)),
    )


def printed_c10() -> Design:
    """The ten-candidate compound design as printed.

    The monthly weights sum to 0.99 in print; they are renormalized here.
    """
    return Design(
        (
            GroupDesign((0.0, 2.90, 12.98, 41.91, 1000.0),
                        _normalized((0.27, 0.13, 0.22, 0.13, 0.24))),
            GroupDesign((3.01, 13.16, 49.46, 400.0),
                        _normalized((0.33, 0.21, 0.31, 0.15))),
        ),
        _normalized((0.58, 0.42)),
    )


def random_spec(rng: np.random.Generator, family=None, sharing=None,
                n_groups=None, equal_sigma=False) -> ModelSpec:
    """A well-conditioned random spec; scaled dose-scales kept in (0.03, 0.95)."""
    family = Family(family) if family is not None else rng.choice(
        [f.value for f in Family])
    sharing = sharing if sharing is not None else rng.choice(
        ["location", "location_scale"])
    n_groups = int(n_groups) if n_groups is not None else int(rng.integers(2, 4))
    dmax = tuple(float(rng.choice([1.0, 10.0, 400.0, 1000.0])) for _ in range(n_groups))
    sigma2 = ((1.0,) * n_groups if equal_sigma
              else tuple(float(rng.uniform(0.5, 2.0)) for _ in range(n_groups)))
    scales = tuple(float(rng.uniform(0.03, 0.95)) * d for d in dmax)
    effects = tuple(float(rng.uniform(0.5, 2.0)) for _ in range(n_groups))
    gamma = float(rng.uniform(0.5, 4.0)) if Family(family) is Family.SIGMOID_EMAX else None
    if str(sharing) == "location":
        theta_shared = (float(rng.uniform(1.0, 10.0)),)
        theta_group = tuple((e, c) for e, c in zip(effects, scales))
    else:
        theta_shared = (float(rng.uniform(1.0, 10.0)), effects[0])
        theta_group = tuple((c,) for c in scales)
    return ModelSpec(family=family, sharing=sharing, theta_shared=theta_shared,
                     theta_group=theta_group, sigma2=sigma2, dmax=dmax, gamma=gamma)


def random_design(rng: np.random.Generator, spec: ModelSpec, max_points=4,
                  placebo=None, nonsingular=False) -> Design:
    """Random design for `spec`; resamples until nonsingular when asked."""
    for _ in range(500):
        groups = []
        for i in range(spec.n_groups):
            k = int(rng.integers(2, max_points + 1))
            doses = rng.uniform(0.0, spec.dmax[i], size=k)
            if placebo is True or (placebo is None and rng.random() < 0.5):
                doses[0] = 0.0
            doses = np.sort(doses)
            if np.min(np.diff(doses)) < 1e-3 * spec.dmax[i]:
                break
            groups.append(GroupDesign(tuple(doses), tuple(rng.dirichlet(np.ones(k)))))
        else:
            design = Design(tuple(groups), tuple(rng.dirichlet(np.ones(spec.n_groups))))
            if not nonsingular or np.isfinite(log_det_information(spec, design)):
                return design
    raise RuntimeError("no valid random design found")
