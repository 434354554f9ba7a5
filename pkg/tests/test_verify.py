"""Equivalence-theorem certification and sensitivity scans."""

import numpy as np
import pytest

from dosedesign import (
    Design,
    GroupDesign,
    ModelSpec,
    OptimizerSettings,
    VerifySettings,
    build_compound,
    certify_compound,
    certify_d,
    compound_sensitivity_profile,
    emax_global_check,
    maximize,
    min_supported_optimal,
    sensitivity_profile,
    solve_locally_d,
    variance_ratio_threshold,
    weighted_support_sensitivity,
)
from helpers import random_design, random_spec, table2_spec


def unit_emax(t1, t2, r=1.0):
    return ModelSpec(
        family="emax",
        sharing="location_scale",
        theta_shared=(1.0, 1.0),
        theta_group=((t1,), (t2,)),
        sigma2=(r, 1.0),
        dmax=(1.0, 1.0),
    )


class TestSensitivity:
    def test_support_kappa_equals_m_at_optimum(self):
        spec = unit_emax(0.2, 0.5)
        design = min_supported_optimal(spec).design
        for i, g in enumerate(design.groups):
            kappas = sensitivity_profile(spec, design, i, g.doses)
            np.testing.assert_allclose(kappas, spec.m, rtol=1e-8)

    def test_violated_condition_shows_excess(self):
        # sufficient condition fails at (0.2, 0.25): dense scan finds kappa > 4
        spec = unit_emax(0.2, 0.25)
        assert not emax_global_check(0.2, 0.25, 1.0).holds
        design = min_supported_optimal(spec).design
        doses = np.linspace(0.0, 1.0, 10001)
        kappas = sensitivity_profile(spec, design, 1, doses)
        assert float(np.max(kappas)) > 4.0

    def test_trace_identity_any_nonsingular_design(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            spec = random_spec(rng)
            design = random_design(rng, spec, nonsingular=True)
            assert weighted_support_sensitivity(spec, design) == pytest.approx(
                spec.m, abs=1e-10
            )

    def test_singular_design_raises(self):
        spec = unit_emax(0.2, 0.5)
        design = Design(
            (GroupDesign((0.0,), (1.0,)), GroupDesign((0.5,), (1.0,))),
            (1.0, 0.0),
        )
        with pytest.raises(np.linalg.LinAlgError):
            sensitivity_profile(spec, design, 0, [0.5])


class TestCertifyD:
    def test_closed_form_model1_passes(self):
        spec = table2_spec(1)
        res = solve_locally_d(spec)
        cert = certify_d(spec, res.design)
        assert cert.passed
        assert cert.bound == spec.m
        assert cert.kind == "d"

    def test_perturbed_support_fails_with_argmax_near_original(self):
        spec = table2_spec(1)
        design = solve_locally_d(spec).design
        g1 = design.groups[0]
        x_star = g1.doses[1]
        doses = (g1.doses[0], x_star + 0.05 * 1000.0, g1.doses[2])
        perturbed = Design(
            (GroupDesign(doses, g1.weights), design.groups[1]),
            design.allocation,
        )
        cert = certify_d(spec, perturbed)
        assert not cert.passed
        scan = cert.per_group[0]
        assert scan.max_kappa > spec.m * (1.0 + 1e-6)
        assert abs(scan.argmax_dose - x_star) < 5.0

    def test_grid_doubling_stability(self):
        # resolution adequacy: doubling the grid barely moves the reported max
        cases = [
            (table2_spec(1), solve_locally_d(table2_spec(1)).design),
            (unit_emax(0.2, 0.5), min_supported_optimal(unit_emax(0.2, 0.5)).design),
        ]
        for spec, design in cases:
            c1 = certify_d(spec, design, VerifySettings(grid_density=2001))
            c2 = certify_d(spec, design, VerifySettings(grid_density=4001))
            m1 = max(g.max_kappa for g in c1.per_group)
            m2 = max(g.max_kappa for g in c2.per_group)
            assert abs(m1 - m2) < 1e-6 * spec.m

    def test_to_dict_schema(self):
        spec = unit_emax(0.2, 0.5)
        cert = certify_d(spec, min_supported_optimal(spec).design)
        d = cert.to_dict()
        assert set(d) == {
            "pass",
            "m",
            "tol",
            "grid_density",
            "refine_iters",
            "kind",
            "per_group",
        }
        assert d["pass"] is True and d["m"] == 4.0
        assert [g["group"] for g in d["per_group"]] == [0, 1]
        assert set(d["per_group"][0]) == {
            "group",
            "max_kappa",
            "argmax_dose",
            "support_kappas",
        }

    def test_biconditional_middle_band(self):
        # in the 1 < r <= threshold band the global condition is exact:
        # it holds precisely when the scan certifies the 2+2 design
        rng = np.random.default_rng(99)
        for _ in range(25):
            t1 = float(rng.uniform(0.05, 0.85))
            t2 = float(rng.uniform(t1 + 0.05, 0.95))
            threshold = variance_ratio_threshold("emax", t1, t2)
            r = 1.0 + float(rng.uniform(0.0, 1.0)) * (threshold - 1.0)
            spec = unit_emax(t1, t2, r=r)
            chk = emax_global_check(t1, t2, r)
            assert chk.case == "b" and chk.sharp
            cert = certify_d(spec, min_supported_optimal(spec).design)
            assert chk.holds == cert.passed


class TestCertifyCompound:
    def small_compound(self):
        specs = (unit_emax(0.1, 0.3), unit_emax(0.3, 0.7))
        settings = OptimizerSettings(restarts=4, seed=0)
        return build_compound(specs, settings=settings)

    def test_optimum_passes(self):
        crit = self.small_compound()
        out = maximize(crit, settings=OptimizerSettings(restarts=4, seed=0))
        cert = out.certificate
        assert cert.kind == "compound"
        assert cert.passed
        assert cert.bound == pytest.approx(out.criterion, abs=1e-9)

    def test_profile_stays_below_bound(self):
        crit = self.small_compound()
        out = maximize(crit, settings=OptimizerSettings(restarts=4, seed=0))
        bound = crit.value(out.design)
        for i in range(2):
            doses = np.linspace(0.0, 1.0, 2001)
            psi = compound_sensitivity_profile(crit, out.design, i, doses)
            assert float(np.max(psi)) <= bound * (1.0 + 1e-6)

    def test_off_optimum_fails(self):
        crit = self.small_compound()
        skewed = Design(
            (
                GroupDesign((0.0, 0.9, 1.0), (0.6, 0.2, 0.2)),
                GroupDesign((0.8,), (1.0,)),
            ),
            (0.9, 0.1),
        )
        assert not certify_compound(crit, skewed).passed


class TestVerifySettings:
    def test_validation(self):
        with pytest.raises(ValueError):
            VerifySettings(grid_density=1)
        with pytest.raises(ValueError):
            VerifySettings(tol=-1e-9)
