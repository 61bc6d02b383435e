"""Command line front end: ``coolwalk simulate | verify | dist``.

Exit codes: 0 success, 2 invalid spec, 3 budget exceeded, 4 failed verdict.
"""
from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import io
import json
import math
import sys
from importlib import resources
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__, limitlaw, stats
from .budget import BudgetExceeded, SimBudget
from .cooling import CoolingError, CoolingOverflow, Polynomial, check_conditions, critical_K, map_from_dict
from .env import DomainError, EnvironmentLaw
from .rwcre import (LinearSpeed, MissingConstant, NPowInvS, centering_from_dict, poly_beta, scaled_view, scaling_from_dict, simulate_rwcre)
from .rwre import estimate_constants
from .streams import stream

EXIT_OK, EXIT_INVALID, EXIT_BUDGET, EXIT_FAILED = 0, 2, 3, 4


class SpecError(ValueError):
    pass


# -- plumbing ----------------------------------------------------------------

def canonical(obj: Any) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def spec_hash(spec: dict[str, Any]) -> str:
    return hashlib.sha256(canonical(spec).encode()).hexdigest()


def header_lines(spec: dict[str, Any], seed: int | None) -> str:
    return (f"# coolwalk {__version__}\n# spec_sha256 {spec_hash(spec)}\n"
            f"# seed {'' if seed is None else seed}\n")


def write_csv(path: Path | None, spec: dict[str, Any], seed: int | None, body: str) -> None:
    text = header_lines(spec, seed) + body
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _clean(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path: Path, spec: dict[str, Any], seed: int | None, payload: dict[str, Any]) -> None:
    doc = dict(_clean(payload))
    doc["_meta"] = {"version": __version__, "spec_sha256": spec_hash(spec), "seed": seed}
    path.write_text(json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def load_spec(args: argparse.Namespace) -> dict[str, Any]:
    if args.preset:
        try:
            text = resources.files("coolwalk").joinpath("presets", f"{args.preset}.json").read_text()
        except FileNotFoundError:
            raise SpecError(f"preset: unknown preset {args.preset!r}") from None
    elif args.spec:
        try:
            text = Path(args.spec).read_text(encoding="utf-8")
        except OSError as exc:
            raise SpecError(f"spec: cannot read {args.spec}: {exc.strerror}") from None
    else:
        raise SpecError("spec: one of --spec or --preset is required")
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"spec: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(spec, dict):
        raise SpecError("spec: top level must be an object")
    return spec


def experiments_of(spec: dict[str, Any]) -> list[tuple[str, dict[str, Any]]]:
    if "experiments" in spec:
        exps = spec["experiments"]
        if not isinstance(exps, list) or not exps:
            raise SpecError("experiments: expected a non-empty list")
        return [(str(e.get("name", f"exp{i}")), e) for i, e in enumerate(exps)]
    return [(str(spec.get("name", "experiment")), spec)]


def _budget(exp: dict[str, Any], seed: int | None, threads: int | None, where: str) -> SimBudget:
    try:
        d = dict(exp["budget"])
    except KeyError:
        raise SpecError(f"{where}.budget: missing field") from None
    if seed is not None:
        d["master_seed"] = seed
    if threads is not None:
        d["parallelism"] = threads
    try:
        return SimBudget.from_dict(d)
    except (KeyError, ValueError, TypeError) as exc:
        raise SpecError(f"{where}.budget: {exc}") from None


def _env(exp: dict[str, Any], where: str) -> EnvironmentLaw:
    if "env" not in exp:
        raise SpecError(f"{where}.env: missing field")
    try:
        return EnvironmentLaw.from_dict(exp["env"])
    except DomainError as exc:
        raise SpecError(f"{where}.env: {exc}") from None


def _cooling(exp: dict[str, Any], where: str):
    if "cooling" not in exp:
        raise SpecError(f"{where}.cooling: missing field")
    try:
        return map_from_dict(exp["cooling"], f"{where}.cooling")
    except CoolingError as exc:
        raise SpecError(str(exc)) from None


def _summary(samples: np.ndarray) -> dict[str, Any]:
    x = samples.astype(float)
    qs = [0.01, 0.05, 0.25, 0.5, 0.75, 0.95, 0.99]
    return {
        "replicas": int(x.size), "mean": float(x.mean()),
        "variance": float(x.var(ddof=1)) if x.size > 1 else 0.0,
        "quantiles": {str(q): float(v) for q, v in zip(qs, np.quantile(x, qs))},
    }


def histogram_csv(x: np.ndarray, bins: int = 60) -> str:
    counts, edges = np.histogram(x, bins=bins)
    dens = counts / (x.size * np.diff(edges))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_lo", "bin_hi", "count", "density"])
    for lo, hi, c, d in zip(edges[:-1], edges[1:], counts, dens):
        w.writerow([repr(float(lo)), repr(float(hi)), int(c), repr(float(d))])
    return buf.getvalue()


def overlay_csv(x: np.ndarray, law: limitlaw.LimitLaw, points: int = 201) -> str:
    """Empirical and target CDF on a grid between the 0.5% and 99.5% sample quantiles."""
    lo, hi = np.quantile(x, [0.005, 0.995])
    grid = np.linspace(lo, hi, points)
    emp = stats.EmpiricalDistribution(x).cdf(grid)
    target = limitlaw.cdf(law, grid)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "empirical_cdf", "law_cdf"])
    for g, e, f in zip(grid, emp, target):
        w.writerow([repr(float(g)), repr(float(e)), repr(float(f))])
    return buf.getvalue()


# -- experiment pipeline -----------------------------------------------------

def _constants(law: EnvironmentLaw, exp: dict[str, Any], budget: SimBudget, where: str):
    plan = exp.get("analysis", {}).get("estimate_constants")
    if not plan:
        return None
    try:
        cb = SimBudget(replicas=int(plan["replicas"]), master_seed=budget.master_seed,
                       parallelism=budget.parallelism, n_grid=tuple(plan["n_grid"]))
    except (KeyError, ValueError, TypeError) as exc:
        raise SpecError(f"{where}.analysis.estimate_constants: {exc}") from None
    cb.check()
    return estimate_constants(law, cb)


def _scaling(d: dict[str, Any] | None, law: EnvironmentLaw, cmap, consts, where: str):
    if d and d.get("kind") == "poly_beta" and "B" not in d:
        if not isinstance(cmap, Polynomial):
            raise SpecError(f"{where}.analysis.scaling: poly_beta needs a polynomial cooling map")
        try:
            return poly_beta(law, cmap.A, cmap.a_exp, None if consts is None else consts.tc_hat)
        except MissingConstant as exc:
            raise SpecError(f"{where}.analysis.scaling: {exc}") from None
    if d and d.get("kind") == "n_pow_inv_s" and "s" not in d:
        return NPowInvS(law.s)
    try:
        return scaling_from_dict(d)
    except (KeyError, ValueError) as exc:
        raise SpecError(f"{where}.analysis.scaling: {exc}") from None


def _centering(d: dict[str, Any] | None, law: EnvironmentLaw, where: str):
    if d and d.get("kind") == "linear_speed" and "v" not in d:
        return LinearSpeed(law.speed)
    try:
        return centering_from_dict(d)
    except (KeyError, ValueError) as exc:
        raise SpecError(f"{where}.analysis.centering: {exc}") from None


def resolve_target(d: dict[str, Any], law: EnvironmentLaw, consts, where: str) -> limitlaw.LimitLaw:
    """Target laws may refer to estimated constants via the ``matched_*`` kinds."""
    kind = d.get("kind")
    if kind in ("matched_stable", "critical_tempered"):
        if consts is None:
            raise SpecError(f"{where}: target {kind!r} needs analysis.estimate_constants")
        s, v = law.s, law.speed
        if kind == "matched_stable":
            return limitlaw.Stable(s, consts.b_hat)
        A = float(d.get("A", 1.0))
        return limitlaw.TemperedStable(limitlaw.LambdaDescriptor(
            consts.tc_hat * v * s, s, limitlaw.LinearRamp(v * critical_K(A, s))))
    try:
        return limitlaw.law_from_dict(d, where)
    except DomainError as exc:
        raise SpecError(str(exc)) from None


def run_conditions(cond: dict[str, Any], where: str) -> dict[str, Any]:
    cmap = _cooling(cond, where)
    try:
        s = float(cond["s"])
        grid = [int(n) for n in cond["n_grid"]]
    except KeyError as exc:
        raise SpecError(f"{where}.{exc.args[0]}: missing field") from None
    rep = check_conditions(cmap, grid, s, m_values=tuple(cond.get("m_values", (2, 16))))
    out: dict[str, Any] = {"report": rep.to_dict(), "verdict": rep.verdict, "g_class": rep.g_class}
    ok = True
    if "expect_verdict" in cond:
        ok &= rep.verdict == cond["expect_verdict"]
    if "expect_g" in cond:
        ok &= rep.g_class == cond["expect_g"]
    out["passed"] = bool(ok)
    return out


def run_experiment(name: str, exp: dict[str, Any], seed: int | None, threads: int | None,
                   outdir: Path, spec: dict[str, Any], verify: bool) -> list[dict[str, Any]]:
    where = f"experiments.{name}" if "experiments" in spec else "spec"
    results: list[dict[str, Any]] = []
    if "conditions" in exp and "budget" not in exp:
        conds = exp["conditions"] if isinstance(exp["conditions"], list) else [exp["conditions"]]
        for i, c in enumerate(conds):
            res = run_conditions(c, f"{where}.conditions[{i}]")
            res["test"] = f"{name}/conditions[{i}]"
            results.append(res)
        write_json(outdir / f"{name}_conditions.json", spec, seed, {"results": results})
        return results

    law = _env(exp, where)
    cmap = _cooling(exp, where)
    budget = _budget(exp, seed, threads, where)
    budget.check()
    consts = _constants(law, exp, budget, where)
    analysis = exp.get("analysis", {})
    centering = _centering(analysis.get("centering"), law, where)
    scaling = _scaling(analysis.get("scaling"), law, cmap, consts, where)
    try:
        ens = simulate_rwcre(law, cmap, budget, centering, scaling)
    except CoolingError as exc:
        raise SpecError(f"{where}.cooling: {exc}") from None

    prefix = "" if "experiments" not in spec else f"{name}_"
    write_csv(outdir / f"{prefix}samples.csv", spec, budget.master_seed, ens.to_csv())
    write_json(outdir / f"{prefix}summary.json", spec, budget.master_seed,
               {"name": name, "n": budget.n, "pieces": ens.meta["pieces"], **_summary(ens.samples)})
    if consts is not None:
        write_json(outdir / f"{prefix}constants.json", spec, budget.master_seed, consts.to_dict())
    view = scaled_view(ens)
    write_csv(outdir / f"{prefix}histogram.csv", spec, budget.master_seed, histogram_csv(view))
    if not verify:
        return results

    for i, t in enumerate(analysis.get("tests", [])):
        tw = f"{where}.analysis.tests[{i}]"
        kind = t.get("kind")
        if kind == "ks":
            target = resolve_target(t.get("target", {"kind": "gaussian"}), law, consts, f"{tw}.target")
            rep = stats.ks_against_law(view, target, threshold=float(t["threshold"]))
            write_csv(outdir / f"{prefix}ks{i}_overlay.csv", spec, budget.master_seed, overlay_csv(view, target))
            results.append({**rep.to_dict(), "test": f"{name}/ks"})
        elif kind == "sd_exponent":
            ns = [int(n) for n in t["n_grid"]]
            sds = []
            for j, n in enumerate(ns):
                b = SimBudget(budget.replicas, n, budget.master_seed, budget.parallelism)
                b.check()
                sds.append(float(np.std(simulate_rwcre(law, cmap, b, key=(11, j)).samples, ddof=1)))
            fit = stats.power_fit(ns, sds)
            ok = abs(fit["slope"] - float(t["target"])) <= float(t["tol"])
            results.append({"test": f"{name}/sd_exponent", "statistic": abs(fit["slope"] - float(t["target"])),
                            "threshold": float(t["tol"]), "passed": bool(ok), "metadata": {"fit": fit, "sd": sds}})
        elif kind == "conditions":
            res = run_conditions({**t, "cooling": exp["cooling"]}, tw)
            res["test"] = f"{name}/conditions"
            results.append(res)
        else:
            raise SpecError(f"{tw}.kind: unknown test kind {kind!r}")
    return results


# -- commands ----------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace, verify: bool = False) -> int:
    spec = load_spec(args)
    original = copy.deepcopy(spec)
    outdir = Path(args.out or spec.get("output", "."))
    outdir.mkdir(parents=True, exist_ok=True)
    results = []
    for name, exp in experiments_of(spec):
        if not verify and "conditions" in exp and "budget" not in exp:
            continue
        results += run_experiment(name, exp, args.seed, args.threads, outdir, spec, verify)
    assert spec == original
    if not verify:
        return EXIT_OK
    passed = all(bool(r.get("passed")) for r in results)
    write_json(outdir / "verify_report.json", spec, args.seed,
               {"passed": passed, "results": results})
    for r in results:
        print(f"{'PASS' if r.get('passed') else 'FAIL'}  {r['test']}  statistic={r.get('statistic', r.get('verdict'))}",
              file=sys.stderr)
    return EXIT_OK if passed else EXIT_FAILED


def cmd_verify(args: argparse.Namespace) -> int:
    return cmd_simulate(args, verify=True)


def _grid(text: str) -> np.ndarray:
    try:
        lo, hi, num = text.split(":")
        return np.linspace(float(lo), float(hi), int(num))
    except ValueError:
        raise SpecError(f"grid: expected LO:HI:COUNT, got {text!r}") from None


def cmd_dist(args: argparse.Namespace) -> int:
    spec = load_spec(args)
    law_doc = spec.get("law", spec)
    try:
        law = limitlaw.law_from_dict(law_doc)
    except DomainError as exc:
        raise SpecError(str(exc)) from None
    out = Path(args.out) if args.out else None
    if out is not None and out.suffix != ".csv":
        out.mkdir(parents=True, exist_ok=True)
        out = out / f"{args.what}.csv"
    if args.what == "cdf":
        body = limitlaw.cdf_csv(law, _grid(args.grid or "-5:5:101"))
        seed = None
    elif args.what == "cf":
        body = limitlaw.cf_csv(law, _grid(args.grid or "-5:5:101"))
        seed = None
    else:
        seed = 0 if args.seed is None else args.seed
        x = limitlaw.sample(law, stream(seed, 3), int(args.count))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i", "x"])
        for i, v in enumerate(x.tolist()):
            w.writerow([i, repr(v)])
        body = buf.getvalue()
    write_csv(out, spec, seed, body)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coolwalk", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"coolwalk {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp: argparse.ArgumentParser) -> None:
        sp.add_argument("--spec", help="experiment or law JSON file")
        sp.add_argument("--preset", help="bundled preset name")
        sp.add_argument("--seed", type=lambda x: int(x, 0), help="master seed (overrides the spec)")
        sp.add_argument("--threads", type=int, help="worker threads")
        sp.add_argument("--out", help="output directory (dist: file or directory)")

    common(sub.add_parser("simulate", help="simulate and write samples.csv and summary.json"))
    common(sub.add_parser("verify", help="simulate, run the analysis plan, write verify_report.json"))
    d = sub.add_parser("dist", help="tabulate or sample a limit law")
    common(d)
    d.add_argument("--what", choices=("cdf", "cf", "sample"), default="cdf")
    d.add_argument("--grid", help="LO:HI:COUNT for cdf and cf tables")
    d.add_argument("--count", type=int, default=1000, help="number of draws for sample")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"simulate": cmd_simulate, "verify": cmd_verify, "dist": cmd_dist}[args.command]
    try:
        return handler(args)
    except (SpecError, DomainError, CoolingError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (BudgetExceeded, CoolingOverflow) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
