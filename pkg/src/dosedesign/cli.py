"""Batch front end: study specs in, designs, certificates and tables out.

Subcommands
-----------
design
    Compute the optimal design for the study spec (closed form when one
    certifies, numerical optimizer otherwise) and write ``design.csv``,
    ``design.txt``, ``certificate.json`` and ``summary.json``.
certify
    Re-check a design file against the equivalence bound; write
    ``certificate.json`` and a dense sensitivity curve ``kappa_curve.csv``.
efficiency
    Efficiency table: one row per supplied design file, one column per
    candidate model plus the weighted average.
optimality-region
    Sweep the scaled-ED50 square for given variance ratios and record which
    minimally-supported case applies and whether its optimality condition
    holds.
apportion
    Round an approximate design into integer subject counts.

Exit codes: 0 success, 1 spec or input validation failure (the message
names the offending field), 2 numerical failure (every restart singular),
3 certificate failure when --require-certificate is set.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .closed_form import emax_global_check
from .designs import CompoundCriterion, Design, GroupDesign, apportion, log_det_information
from .models import Family, ModelSpec, Sharing
from .optimize import (
    OptimizationFailure,
    OptimizationResult,
    OptimizerSettings,
    build_compound,
    maximize,
    solve_locally_d,
)
from .verify import VerifySettings, certify_compound, certify_d, compound_sensitivity_profile, sensitivity_profile

FAMILIES = tuple(f.value for f in Family)
SHARINGS = tuple(s.value for s in Sharing)
PRIOR_TOL = 1e-9
WEIGHT_TOL = 1e-6


class ValidationError(Exception):
    """Bad study spec or design file; `field` names what is wrong."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


def fmt(x) -> str:
    return f"{float(x):.12g}"


def _warn(message: str) -> None:
    print(f"warning: {message}", file=sys.stderr)


@dataclasses.dataclass(frozen=True)
class StudySpec:
    """Parsed and validated study specification."""

    group_names: tuple[str, ...]
    candidates: tuple[ModelSpec, ...]
    candidate_ids: tuple[str, ...]
    prior: tuple[float, ...]
    criterion: str
    settings: OptimizerSettings
    n_total: int | None


def _require(condition: bool, field: str, message: str) -> None:
    if not condition:
        raise ValidationError(field, message)


def _number(doc: dict, field: str, key: str, positive: bool = True) -> float:
    _require(key in doc, f"{field}.{key}", "missing")
    value = doc[key]
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             f"{field}.{key}", "must be a number")
    if positive:
        _require(value > 0, f"{field}.{key}", "must be positive")
    return float(value)


def _float_list(value, field: str) -> tuple[float, ...]:
    _require(isinstance(value, list) and value, field, "must be a non-empty array")
    for v in value:
        _require(isinstance(v, (int, float)) and not isinstance(v, bool),
                 field, "must contain numbers only")
    return tuple(float(v) for v in value)


def _parse_candidate(doc, index: int, dmax, sigma2) -> tuple[str, ModelSpec, float]:
    field = f"candidates[{index}]"
    _require(isinstance(doc, dict), field, "must be an object")
    _require("id" in doc and isinstance(doc["id"], str) and doc["id"],
             f"{field}.id", "must be a non-empty string")
    family = doc.get("family")
    _require(family in FAMILIES, f"{field}.family",
             f"must be one of {', '.join(FAMILIES)}")
    sharing = doc.get("sharing")
    _require(sharing in SHARINGS, f"{field}.sharing",
             f"must be one of {', '.join(SHARINGS)}")
    gamma = None
    if family == Family.SIGMOID_EMAX.value:
        gamma = _number(doc, field, "gamma")
    else:
        _require("gamma" not in doc, f"{field}.gamma",
                 "only valid for sigmoid_emax")
    theta_shared = _float_list(doc.get("theta_shared"), f"{field}.theta_shared")
    tg = doc.get("theta_group")
    _require(isinstance(tg, list), f"{field}.theta_group", "must be an array of arrays")
    _require(len(tg) == len(dmax), f"{field}.theta_group",
             f"expected {len(dmax)} groups, got {len(tg)}")
    theta_group = tuple(
        _float_list(block, f"{field}.theta_group[{i}]") for i, block in enumerate(tg)
    )
    prior = 1.0
    if "prior" in doc:
        value = doc["prior"]
        _require(isinstance(value, (int, float)) and not isinstance(value, bool)
                 and value >= 0, f"{field}.prior", "must be a non-negative number")
        prior = float(value)
    try:
        spec = ModelSpec(family=family, sharing=sharing, theta_shared=theta_shared,
                         theta_group=theta_group, sigma2=sigma2, dmax=dmax, gamma=gamma)
    except ValueError as exc:
        raise ValidationError(field, str(exc)) from exc
    return doc["id"], spec, prior


def load_study_spec(path, overrides: dict | None = None) -> StudySpec:
    """Read, validate and normalize a study spec JSON file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError("spec", f"cannot read {path}: {exc.strerror or exc}")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError("spec", f"invalid JSON: {exc}")
    _require(isinstance(doc, dict), "spec", "must be a JSON object")

    groups = doc.get("groups")
    _require(isinstance(groups, list) and groups, "groups", "must be non-empty")
    names, dmax, sigma2 = [], [], []
    for i, g in enumerate(groups):
        _require(isinstance(g, dict), f"groups[{i}]", "must be an object")
        name = g.get("name")
        _require(isinstance(name, str) and name, f"groups[{i}].name",
                 "must be a non-empty string")
        names.append(name)
        dmax.append(_number(g, f"groups[{i}]", "dmax"))
        sigma2.append(_number(g, f"groups[{i}]", "sigma2"))
    _require(len(set(names)) == len(names), "groups", "names must be unique")

    cands = doc.get("candidates")
    _require(isinstance(cands, list), "candidates", "must be an array")
    _require(len(cands) > 0, "candidates", "must be non-empty")
    ids, specs, priors = [], [], []
    for i, c in enumerate(cands):
        cid, spec, prior = _parse_candidate(c, i, tuple(dmax), tuple(sigma2))
        ids.append(cid)
        specs.append(spec)
        priors.append(prior)
    _require(len(set(ids)) == len(ids), "candidates", "ids must be unique")

    criterion = doc.get("criterion")
    _require(criterion in ("locally_D", "compound"), "criterion",
             "must be 'locally_D' or 'compound'")
    if criterion == "locally_D":
        _require(len(specs) == 1, "criterion",
                 f"locally_D requires exactly one candidate, got {len(specs)}")

    total = sum(priors)
    _require(total > 0, "candidates", "priors must not all be zero")
    if abs(total - 1.0) > PRIOR_TOL:
        _warn(f"priors sum to {total:.6g}; renormalizing")
    priors = [p / total for p in priors]

    knobs = dict(doc.get("optimizer") or {})
    valid = {f.name for f in dataclasses.fields(OptimizerSettings)}
    for key in knobs:
        _require(key in valid, f"optimizer.{key}", "unknown setting")
    knobs.update(overrides or {})
    try:
        settings = OptimizerSettings(**knobs)
    except (TypeError, ValueError) as exc:
        raise ValidationError("optimizer", str(exc))

    n_total = doc.get("n_total")
    if n_total is not None:
        _require(isinstance(n_total, int) and not isinstance(n_total, bool)
                 and n_total > 0, "n_total", "must be a positive integer")

    return StudySpec(group_names=tuple(names), candidates=tuple(specs),
                     candidate_ids=tuple(ids), prior=tuple(priors),
                     criterion=criterion, settings=settings, n_total=n_total)


def write_design_csv(path, study: StudySpec, design: Design) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "dose", "group_weight", "lambda"])
        for name, group, lam in zip(study.group_names, design.groups, design.allocation):
            for dose, weight in zip(group.doses, group.weights):
                writer.writerow([name, fmt(dose), fmt(weight), fmt(lam)])


def read_design_csv(path, study: StudySpec) -> Design:
    """Rebuild a Design from a design.csv; weights renormalized with a warning."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError("design", f"cannot read {path}: {exc.strerror or exc}")
    rows = list(csv.DictReader(text.splitlines()))
    _require(bool(rows), "design", "no data rows")
    for col in ("group", "dose", "group_weight", "lambda"):
        _require(col in rows[0], "design", f"missing column '{col}'")
    doses = {name: [] for name in study.group_names}
    weights = {name: [] for name in study.group_names}
    lambdas = {}
    for row in rows:
        name = row["group"]
        _require(name in doses, "design", f"unknown group '{name}'")
        try:
            doses[name].append(float(row["dose"]))
            weights[name].append(float(row["group_weight"]))
            lam = float(row["lambda"])
        except ValueError:
            raise ValidationError("design", f"non-numeric entry in row {row}")
        if name in lambdas and abs(lambdas[name] - lam) > 1e-12:
            raise ValidationError("design", f"inconsistent lambda for group '{name}'")
        lambdas[name] = lam
    groups = []
    for name in study.group_names:
        _require(bool(doses[name]), "design", f"group '{name}' has no rows")
        w = np.array(weights[name])
        total = w.sum()
        _require(total > 0, "design", f"group '{name}' weights must not all be zero")
        if abs(total - 1.0) > WEIGHT_TOL:
            _warn(f"group '{name}' weights sum to {total:.6g}; renormalizing")
        groups.append(GroupDesign(tuple(doses[name]), tuple(w / total)))
    lam = np.array([lambdas[name] for name in study.group_names])
    total = lam.sum()
    _require(total > 0, "design", "lambdas must not all be zero")
    if abs(total - 1.0) > WEIGHT_TOL:
        _warn(f"lambdas sum to {total:.6g}; renormalizing")
    return Design(tuple(groups), tuple(lam / total))


def write_design_text(path, study: StudySpec, design: Design, value: float) -> None:
    lines = [f"criterion: {study.criterion}", f"value: {fmt(value)}", ""]
    for name, group, lam in zip(study.group_names, design.groups, design.allocation):
        lines.append(f"group {name} (lambda = {fmt(lam)})")
        lines.append(f"  {'dose':>16}  {'weight':>16}")
        for dose, weight in zip(group.doses, group.weights):
            lines.append(f"  {fmt(dose):>16}  {fmt(weight):>16}")
        lines.append("")
    Path(path).write_text("\n".join(lines), encoding="utf-8")


def write_kappa_csv(path, study: StudySpec, objective, design: Design, bound: float,
                    grid_density: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "dose", "kappa", "m"])
        for i, name in enumerate(study.group_names):
            doses = np.linspace(0.0, study.candidates[0].dmax[i], grid_density)
            if isinstance(objective, CompoundCriterion):
                kappas = compound_sensitivity_profile(objective, design, i, doses)
            else:
                kappas = sensitivity_profile(objective, design, i, doses)
            for dose, kappa in zip(doses, kappas):
                writer.writerow([name, fmt(dose), fmt(kappa), fmt(bound)])


def _objective(study: StudySpec, verify: VerifySettings):
    """The ModelSpec (locally_D) or CompoundCriterion (compound) to maximize."""
    if study.criterion == "locally_D":
        return study.candidates[0]
    return build_compound(study.candidates, study.prior, study.settings, verify)


def _certify(objective, design: Design, verify: VerifySettings):
    if isinstance(objective, CompoundCriterion):
        return certify_compound(objective, design, verify)
    return certify_d(objective, design, verify)


def _evaluate(objective, design: Design) -> float:
    if isinstance(objective, CompoundCriterion):
        return objective.value(design)
    return log_det_information(objective, design)


def _certificate_line(cert) -> str:
    status = "PASS" if cert.passed else "FAIL"
    excess = max(g.max_kappa for g in cert.per_group) - cert.bound
    return (f"certificate: {status} (bound {fmt(cert.bound)}, "
            f"max excess {excess:.3e}, tol {cert.tol:g})")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _verify_settings(args) -> VerifySettings:
    return VerifySettings(grid_density=args.grid or 2001, tol=args.tol)


def cmd_design(args) -> int:
    study = load_study_spec(args.spec, _setting_overrides(args))
    verify = _verify_settings(args)
    objective = _objective(study, verify)
    result = _solve(objective, study, verify)
    out = _out_dir(args)
    value = result.criterion
    write_design_csv(out / "design.csv", study, result.design)
    write_design_text(out / "design.txt", study, result.design, value)
    summary = {
        "criterion": study.criterion,
        "value": value,
        "converged": result.converged,
        "case": result.case,
        "singular_restarts": result.singular_restarts,
        "certificate": result.certificate.to_dict(),
    }
    if isinstance(objective, CompoundCriterion):
        effs = objective.efficiencies(result.design)
        summary["efficiencies"] = {
            cid: float(e) for cid, e in zip(study.candidate_ids, effs)
        }
    (out / "certificate.json").write_text(
        json.dumps(result.certificate.to_dict(), indent=2) + "\n", encoding="utf-8")
    (out / "summary.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    label = "logdet" if study.criterion == "locally_D" else "g_c"
    print(f"{label} = {fmt(value)}")
    print(_certificate_line(result.certificate))
    if args.require_certificate and not result.certificate.passed:
        return 3
    return 0


def _solve(objective, study: StudySpec, verify: VerifySettings) -> OptimizationResult:
    if isinstance(objective, CompoundCriterion):
        return maximize(objective, study.settings, verify_settings=verify)
    return solve_locally_d(objective, study.settings, verify)


def cmd_certify(args) -> int:
    study = load_study_spec(args.spec, _setting_overrides(args))
    verify = _verify_settings(args)
    objective = _objective(study, verify)
    design = read_design_csv(args.design, study)
    cert = _certify(objective, design, verify)
    value = _evaluate(objective, design)
    out = _out_dir(args)
    payload = cert.to_dict()
    payload["criterion_value"] = value
    (out / "certificate.json").write_text(
        json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    write_kappa_csv(out / "kappa_curve.csv", study, objective, design,
                    cert.bound, verify.grid_density)
    label = "logdet" if study.criterion == "locally_D" else "g_c"
    print(f"{label} = {fmt(value)}")
    print(_certificate_line(cert))
    if args.require_certificate and not cert.passed:
        return 3
    return 0


def cmd_efficiency(args) -> int:
    study = load_study_spec(args.spec, _setting_overrides(args))
    verify = _verify_settings(args)
    criterion = build_compound(study.candidates, study.prior, study.settings, verify)
    out = _out_dir(args)
    with open(out / "efficiency.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["design", *study.candidate_ids, "g_c"])
        for path in args.design:
            design = read_design_csv(path, study)
            effs = criterion.efficiencies(design)
            writer.writerow([Path(path).name, *(fmt(e) for e in effs),
                             fmt(criterion.value(design))])
    print(f"wrote {out / 'efficiency.csv'} ({len(args.design)} designs, "
          f"{len(study.candidate_ids)} candidates)")
    return 0


def cmd_region(args) -> int:
    if args.ratio:
        ratios = list(args.ratio)
    elif args.spec:
        study = load_study_spec(args.spec)
        spec = study.candidates[0]
        _require(spec.n_groups == 2, "groups", "optimality-region needs 2 groups")
        ratios = [spec.sigma2[0] / spec.sigma2[1]]
    else:
        raise ValidationError("ratio", "give --ratio (repeatable) or --spec")
    for r in ratios:
        _require(r > 0, "ratio", "must be positive")
    density = args.grid or 101
    mesh = np.arange(1, density) / density  # open interval, uniform
    out = _out_dir(args)
    for r in ratios:
        path = out / f"optimality_region_r{fmt(r)}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["theta_bar_1", "theta_bar_2", "r", "case",
                             "holds", "slack", "rhs"])
            for t1 in mesh:
                for t2 in mesh[mesh > t1]:
                    chk = emax_global_check(t1, t2, r)
                    writer.writerow([fmt(t1), fmt(t2), fmt(r), chk.case,
                                     str(chk.holds).lower(), fmt(chk.slack),
                                     fmt(chk.rhs)])
        print(f"wrote {path}")
    return 0


def cmd_apportion(args) -> int:
    study = load_study_spec(args.spec, _setting_overrides(args))
    n_total = args.n_total or study.n_total
    _require(n_total is not None, "n_total",
             "required (set in the spec or pass --n-total)")
    verify = _verify_settings(args)
    if args.design:
        design = read_design_csv(args.design, study)
    else:
        objective = _objective(study, verify)
        design = _solve(objective, study, verify).design
    try:
        counts = apportion(design, n_total)
    except ValueError as exc:
        raise ValidationError("n_total", str(exc))
    out = _out_dir(args)
    with open(out / "exact_design.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["group", "dose", "n"])
        for name, rows in zip(study.group_names, counts):
            for dose, n in rows:
                writer.writerow([name, fmt(dose), n])
    for name, rows in zip(study.group_names, counts):
        total = sum(n for _, n in rows)
        print(f"{name}: n = {total} at " +
              ", ".join(f"{fmt(d)} (x{n})" for d, n in rows))
    return 0


def _setting_overrides(args) -> dict:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["seed"] = args.seed
    if getattr(args, "restarts", None) is not None:
        overrides["restarts"] = args.restarts
    return overrides


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dosedesign",
        description="Optimal designs for dose-response groups with shared parameters.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, spec_required=True):
        p.add_argument("--spec", required=spec_required, help="study spec JSON file")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--seed", type=int, default=None, help="optimizer RNG seed")
        p.add_argument("--restarts", type=int, default=None, help="optimizer restarts")
        p.add_argument("--grid", type=int, default=None,
                       help="grid density (certification scan / region mesh)")
        p.add_argument("--tol", type=float, default=1e-6,
                       help="certificate tolerance (default: 1e-6)")
        p.add_argument("--require-certificate", action="store_true",
                       help="exit 3 if the certificate fails")

    p = sub.add_parser("design", help="compute the optimal design")
    common(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("certify", help="certify a design file")
    common(p)
    p.add_argument("--design", required=True, help="design.csv to check")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("efficiency", help="efficiency table for design files")
    common(p)
    p.add_argument("--design", action="append", required=True,
                   help="design.csv (repeatable; one row each)")
    p.set_defaults(func=cmd_efficiency)

    p = sub.add_parser("optimality-region",
                       help="sweep scaled-ED50 pairs for the minimally supported cases")
    common(p, spec_required=False)
    p.add_argument("--ratio", action="append", type=float, default=None,
                   help="variance ratio r (repeatable)")
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("apportion", help="integer subject counts for n_total")
    common(p)
    p.add_argument("--design", default=None,
                   help="design.csv to round (default: compute the optimum)")
    p.add_argument("--n-total", type=int, default=None, dest="n_total",
                   help="total sample size (overrides the spec)")
    p.set_defaults(func=cmd_apportion)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OptimizationFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
