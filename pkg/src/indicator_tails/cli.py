"""Command-line front end.

Exit codes: 0 success, 1 a domination or invariant violation was found,
2 usage error (malformed flags or an unmet precondition).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from . import bounds as bd
from .bounds import IndicatorSumSpec, LogBound, TailQuery
from .chernoff import (
    binomial_mgf,
    distribution_mgf,
    generic_chernoff,
    poisson_mgf,
    variance_aware_chernoff,
)
from .dependent import (
    DependentModel,
    count_violations,
    find_heavy_tail_witness,
    iter_coupling_batches,
    load_seed_manifest,
)
from .errors import SearchExhaustedError, TailBoundError
from .exact import (
    binomial_distribution,
    cumulants,
    log_fraction,
    poisson_binomial_distribution,
    poisson_tail,
    to_fraction,
)
from .feller import feller_upper_bound, in_feller_window
from .pgf import bernoulli_decomposition, is_real_rooted, pgf_of

LOG_SLACK = 1e-12
EXTRA_IDS = ("1.1", "3.6-chernoff", "3.7-chernoff", "1.20", "1.23")


class UsageError(Exception):
    pass


def _num(x: float):
    """JSON-safe float; infinities become the strings ``"-inf"``/``"inf"``."""
    if math.isinf(x):
        return "-inf" if x < 0 else "inf"
    return float(f"{x:.17g}")


def _emit(obj, out=None):
    out = out or sys.stdout
    out.write(json.dumps(obj, indent=2) + "\n")


# argument handling ---------------------------------------------------------


def _parse_ps(text: str) -> list:
    try:
        return [to_fraction(x.strip()) for x in text.split(",") if x.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad --ps list {text!r}: {exc}") from None


def _parse_a_grid(text):
    """``"3"``, ``"1,2.5,4"``, ``"1..18"`` or ``"0..2:0.5"`` -> list of Fractions."""
    if text is None:
        return None
    text = text.strip()
    try:
        if ".." in text:
            span, _, step = text.partition(":")
            lo, hi = (to_fraction(x) for x in span.split(".."))
            step = to_fraction(step) if step else Fraction(1)
            if step <= 0:
                raise UsageError("grid step must be positive")
            out, x = [], lo
            while x <= hi:
                out.append(x)
                x += step
            return out
        return [to_fraction(x) for x in text.split(",") if x.strip()]
    except (ValueError, ZeroDivisionError) as exc:
        raise UsageError(f"bad --a value {text!r}: {exc}") from None


def _require(args, *names):
    missing = [n for n in names if getattr(args, n, None) is None]
    if missing:
        flags = ", ".join("--" + ("lambda" if n == "lam" else n) for n in missing)
        raise UsageError(f"missing required flag(s): {flags}")


class Subject:
    """What a command talks about: a spec, and its exact law when known."""

    def __init__(self, spec, dist=None, model=None, poisson=None, ps=None):
        self.spec = spec
        self.dist = dist
        self.model = model
        self.poisson = poisson
        self.ps = ps

    def describe(self):
        if self.model is not None:
            out = self.model.describe()
            out.update({"lambda": str(self.spec.lam), "sigma2": str(self.spec.sigma2)})
            return out
        return self.spec.describe()


def _subject(args) -> Subject:
    dist_kind = getattr(args, "dist", None)
    model_kind = getattr(args, "model", None)
    if model_kind in ("binomial", "heterogeneous") and dist_kind is None:
        dist_kind, model_kind = model_kind, None
    if (dist_kind is None) == (model_kind is None):
        raise UsageError("give exactly one of --dist or --model")
    if dist_kind == "binomial":
        _require(args, "n", "p")
        spec = IndicatorSumSpec.homogeneous(args.n, to_fraction(args.p))
        return Subject(spec, dist=binomial_distribution(spec.n, spec.p), ps=[spec.p] * spec.n)
    if dist_kind == "heterogeneous":
        _require(args, "ps")
        ps = _parse_ps(args.ps)
        spec = IndicatorSumSpec.heterogeneous(ps)
        return Subject(spec, dist=poisson_binomial_distribution(spec.ps), ps=list(spec.ps))
    if dist_kind == "moments":
        _require(args, "lam", "sigma2")
        return Subject(IndicatorSumSpec.moments(to_fraction(args.lam), to_fraction(args.sigma2), args.n))
    if dist_kind == "poisson":
        _require(args, "lam")
        spec = IndicatorSumSpec.poisson(to_fraction(args.lam))
        return Subject(spec, poisson=float(spec.lam))
    if model_kind == "hypergeometric":
        _require(args, "N", "m", "n")
        model = DependentModel.hypergeometric(args.N, args.m, args.n)
    elif model_kind == "occupancy":
        _require(args, "n", "m")
        model = DependentModel.occupancy(args.n, args.m)
    elif model_kind == "conditioned-binomial":
        _require(args, "n", "p", "k")
        model = DependentModel.conditioned_binomial(args.n, to_fraction(args.p), args.k)
    elif model_kind == "barbour":
        model = DependentModel.barbour()
    else:
        raise UsageError(f"unknown model {model_kind!r}")
    dist = model.distribution()
    spec = IndicatorSumSpec.moments(dist.mean(), dist.variance(), model.n_indicators)
    return Subject(spec, dist=dist, model=model)


def _variance_aware_allowed(subject: Subject, args) -> bool:
    if subject.model is None:
        return True
    if not getattr(args, "exact_moments", False):
        return False
    if subject.model.variant not in ("hypergeometric", "occupancy"):
        raise UsageError("--exact-moments applies only to hypergeometric and occupancy models")
    return True


# bound evaluation ------------------------------------------------------------


def evaluate(subject: Subject, q: TailQuery, bound_id: str) -> LogBound:
    spec = subject.spec
    if bound_id in bd.CATALOG:
        return bd.catalog_bound(spec, q, bound_id)
    if bound_id == "1.1":
        if subject.dist is not None:
            mgf = distribution_mgf(subject.dist)
        elif subject.poisson is not None:
            mgf = poisson_mgf(subject.poisson)
        elif spec.n is not None:
            mgf = binomial_mgf(spec.n, spec.mean_p)
        else:
            raise bd.UnsupportedSpecError("generic Chernoff needs an MGF: give n or an explicit law")
        return generic_chernoff(mgf, spec.lam, q)
    if bound_id in ("3.6-chernoff", "3.7-chernoff"):
        route = "3.6" if bound_id.startswith("3.6") else "3.7"
        if spec.kind == "poisson" or not 0 < spec.sigma2 < spec.lam:
            raise bd.PreconditionError(f"{bound_id} needs 0 < sigma2 < lambda")
        return variance_aware_chernoff(spec.lam, spec.sigma2, q, n=spec.n, route=route)
    if bound_id in ("1.20", "1.23"):
        sigma = math.sqrt(float(spec.sigma2))
        kappa3 = None
        if bound_id == "1.23":
            if subject.ps is None:
                raise bd.UnsupportedSpecError("1.23 needs kappa3: give --ps or a binomial spec")
            kappa3 = cumulants(subject.ps).kappa3
        return feller_upper_bound(float(q.a), sigma, kappa3, side=q.side)
    raise UsageError(f"unknown bound id {bound_id!r}")


def _candidate_ids(subject: Subject, side: str, a, variance_aware: bool) -> list:
    spec = subject.spec
    ids = bd.applicable_bounds(spec, side, variance_aware=variance_aware)
    if a == 0 and "1.15" in ids:
        ids.remove("1.15")
    if subject.dist is not None or subject.poisson is not None or spec.n is not None:
        ids.append("1.1")
    if variance_aware and spec.kind != "poisson" and 0 < spec.sigma2 < spec.lam:
        ids.append("3.6-chernoff")
        if spec.n is not None:
            ids.append("3.7-chernoff")
    if variance_aware and spec.sigma2 > 0 and in_feller_window(float(a), math.sqrt(float(spec.sigma2))):
        ids.append("1.20")
        if subject.ps is not None:
            ids.append("1.23")
    return ids


def _exact_tail(subject: Subject, q: TailQuery, a):
    if subject.dist is not None:
        tail = subject.dist.deviation_tail(q.side, a)
        if subject.dist.exact:
            return tail, log_fraction(tail)
        return None, (math.log(tail) if tail > 0 else -math.inf)
    if subject.poisson is not None:
        lam = subject.poisson
        if q.side == "upper":
            tail = poisson_tail(lam, math.ceil(lam + float(a) - 1e-12))
        else:
            cut = lam - float(a)
            tail = 0.0 if cut < 0 else 1.0 - poisson_tail(lam, math.floor(cut + 1e-12) + 1)
        return None, (math.log(tail) if tail > 0 else -math.inf)
    return None, None


def _default_grid(subject: Subject, side: str) -> list:
    lam = subject.spec.lam
    if subject.dist is not None:
        support = range(subject.dist.support_min, subject.dist.support_max + 1)
    elif subject.spec.n is not None:
        support = range(0, subject.spec.n + 1)
    else:
        support = range(0, math.ceil(float(lam) * 3 + 10))
    if side == "upper":
        return [k - lam for k in support if k >= lam]
    return sorted(lam - k for k in support if k <= lam)


def _compare_row(subject: Subject, side: str, a, variance_aware: bool) -> dict:
    q = TailQuery(side, a)
    exact, exact_log = _exact_tail(subject, q, a)
    values, validity, errors = {}, {}, {}
    for bound_id in _candidate_ids(subject, side, a, variance_aware):
        try:
            lb = evaluate(subject, q, bound_id)
        except TailBoundError as exc:
            errors[bound_id] = str(exc)
            continue
        values[bound_id] = lb.log_value
        validity[bound_id] = lb.in_validity_domain
    violations = []
    if exact_log is not None:
        violations = [b for b, v in values.items() if exact_log > v + LOG_SLACK]
    finite = {b: v for b, v in values.items() if validity[b]}
    tightest = min(finite, key=lambda b: (finite[b], b)) if finite else None
    row = {
        "spec": subject.describe(),
        "a": str(a),
        "side": side,
        "exact_tail": str(exact) if exact is not None else None,
        "exact_log_tail": _num(exact_log) if exact_log is not None else None,
        "bounds": {b: _num(v) for b, v in values.items()},
        "validity": validity,
        "tightest_bound_id": tightest,
        "violations": violations,
    }
    if errors:
        row["skipped"] = errors
    return row


# commands ------------------------------------------------------------------------


def cmd_bound(args) -> int:
    subject = _subject(args)
    if args.a is None or args.bound is None:
        raise UsageError("bound needs --a and --bound")
    a = to_fraction(args.a)
    q = TailQuery(args.side, a)
    lb = evaluate(subject, q, args.bound)
    value = lb.value
    if args.clamp:
        value = min(1.0, value)
    _emit({
        "bound_id": lb.bound_id,
        "side": args.side,
        "a": str(a),
        "log_value": _num(lb.log_value),
        "value": _num(value),
        "clamped": bool(args.clamp),
        "in_validity_domain": lb.in_validity_domain,
        "spec": subject.describe(),
    })
    return 0


def cmd_compare(args) -> int:
    subject = _subject(args)
    variance_aware = _variance_aware_allowed(subject, args)
    sides = ("upper", "lower") if args.side == "both" else (args.side,)
    grid = _parse_a_grid(args.a)
    tasks = []
    for side in sides:
        for a in (grid if grid is not None else _default_grid(subject, side)):
            if a < 0:
                raise UsageError("deviations must be nonnegative")
            tasks.append((side, a))
    if args.workers > 1:
        with ThreadPoolExecutor(args.workers) as pool:
            rows = list(pool.map(lambda t: _compare_row(subject, t[0], t[1], variance_aware), tasks))
    else:
        rows = [_compare_row(subject, side, a, variance_aware) for side, a in tasks]
    n_viol = sum(len(r["violations"]) for r in rows)
    if args.csv:
        sys.stdout.write(_rows_to_csv(rows))
    else:
        _emit({"rows": rows, "violation_count": n_viol})
    return 1 if n_viol else 0


def _rows_to_csv(rows) -> str:
    ids = []
    for r in rows:
        for b in r["bounds"]:
            if b not in ids:
                ids.append(b)
    order = list(bd.CATALOG) + list(EXTRA_IDS)
    ids.sort(key=order.index)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["spec", "side", "a", "exact_tail", "exact_log_tail", *ids,
                     "tightest_bound_id", "violations"])
    for r in rows:
        spec = json.dumps(r["spec"], separators=(",", ":"))
        writer.writerow([spec, r["side"], r["a"], r["exact_tail"], r["exact_log_tail"],
                         *[r["bounds"].get(b, "") for b in ids],
                         r["tightest_bound_id"], ";".join(r["violations"])])
    return buf.getvalue()


def cmd_oracle(args) -> int:
    subject = _subject(args)
    out = {"spec": subject.describe()}
    dist = subject.dist
    if dist is not None:
        out["exact"] = dist.exact
        out["pmf"] = {str(k): str(v) for k, v in dist.items()}
        out["mean"] = str(dist.mean())
        out["variance"] = str(dist.variance())
    if args.a is not None:
        a = to_fraction(args.a)
        exact, log_tail = _exact_tail(subject, TailQuery(args.side, a), a)
        if log_tail is None:
            raise UsageError("a moments-only spec has no exact law")
        out["side"] = args.side
        out["a"] = str(a)
        out["tail"] = str(exact) if exact is not None else _num(math.exp(log_tail))
        out["log_tail"] = _num(log_tail)
    elif dist is None:
        raise UsageError("oracle needs --a for specs without an explicit law")
    _emit(out)
    return 0


def cmd_decompose(args) -> int:
    subject = _subject(args)
    if subject.dist is None or not subject.dist.exact:
        raise UsageError("decompose needs an exact distribution (model, binomial or heterogeneous)")
    poly = pgf_of(subject.dist)
    cert = is_real_rooted(poly)
    out = {"spec": subject.describe(), "pgf": poly.to_string(), "real_rooted": cert.real_rooted,
           "certificate": cert.as_dict()}
    status = 0
    if cert.real_rooted:
        dec = bernoulli_decomposition(poly)
        info = dec.as_dict()
        mean_gap = abs(float(sum(dec.probabilities)) - float(dec.mean))
        var_gap = abs(float(sum(p * (1 - p) for p in dec.probabilities)) - float(dec.variance))
        info["moment_reconciliation"] = {
            "mean_gap": mean_gap, "variance_gap": var_gap,
            "ok": mean_gap < 1e-12 and var_gap < 1e-12 and dec.residual < 1e-20,
        }
        out["decomposition"] = info
        if not info["moment_reconciliation"]["ok"]:
            status = 1
    _emit(out)
    return status


def _wilson(successes: int, trials: int, z: float = 1.959963984540054):
    if trials == 0:
        return 0.0, 1.0
    phat = successes / trials
    denom = 1 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


def _simulate_entry(model: DependentModel, j: int, seed: int, trials: int, chunk: int) -> dict:
    dist = model.distribution()
    n = model.n_indicators
    sums = [0] * (n + 1)
    violations = 0
    for before, after in iter_coupling_batches(model, j, seed, trials, chunk=chunk):
        violations += count_violations(before, after, j)
        x = before.sum(axis=1)
        for value, freq in zip(*np.unique(x, return_counts=True)):
            sums[int(value)] += int(freq)
    total = sum(k * c for k, c in enumerate(sums))
    mean = total / trials
    second = sum(k * k * c for k, c in enumerate(sums)) / trials
    sd = math.sqrt(max(0.0, second - mean * mean))
    se = sd / math.sqrt(trials)
    lam = dist.mean()
    tails = []
    running = trials
    for k in range(n + 1):
        if k > 0:
            running -= sums[k - 1]
        lo, hi = _wilson(running, trials)
        exact = dist.tail("upper", k)
        tails.append({"threshold": k, "empirical": running / trials, "ci95": [lo, hi],
                      "exact": float(exact), "exact_fraction": str(exact)})
    return {
        **model.describe(), "j": j, "seed": seed, "trials": trials,
        "violations": violations,
        "empirical_mean": mean, "standard_error": se,
        "exact_mean": str(lam), "exact_mean_float": float(lam),
        "z_score": (mean - float(lam)) / se if se > 0 else 0.0,
        "upper_tails": tails,
    }


def cmd_simulate(args) -> int:
    if args.model == "conditioned-binomial" and args.alpha is not None:
        _require(args, "c", "A")
        try:
            witness = find_heavy_tail_witness(args.alpha, args.c, args.A)
        except SearchExhaustedError as exc:
            _emit({"status": "not found", "error": str(exc), "schedule": exc.log})
            return 1
        out = witness.as_dict()
        out["tail_exceeds_target"] = witness.tail > Fraction(witness.target)
        _emit(out)
        return 0
    if args.manifest:
        entries = load_seed_manifest(args.manifest)
    else:
        if args.model not in ("hypergeometric", "occupancy"):
            raise UsageError("simulate needs --model hypergeometric|occupancy, a --manifest, "
                             "or conditioned-binomial with --alpha --c --A")
        subject = _subject(args)
        _require(args, "seed")
        entries = [(subject.model, args.j, args.seed, args.trials)]
    results = [_simulate_entry(m, j, seed, trials, args.chunk) for m, j, seed, trials in entries]
    total = sum(r["violations"] for r in results)
    _emit({"results": results, "violation_count": total})
    return 1 if total else 0


# parser ----------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, sides=("upper", "lower")):
    p.add_argument("--dist", choices=["binomial", "heterogeneous", "moments", "poisson"])
    p.add_argument("--model", choices=["hypergeometric", "occupancy", "conditioned-binomial",
                                       "barbour", "binomial", "heterogeneous"])
    p.add_argument("--ps", help="comma-separated success probabilities")
    p.add_argument("--n", type=int)
    p.add_argument("--p")
    p.add_argument("--lambda", dest="lam")
    p.add_argument("--sigma2")
    p.add_argument("--N", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--side", choices=list(sides), default="upper")
    p.add_argument("--json", action="store_true", help="JSON output (the default)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="indicator-tails",
                                     description="Tail bounds for sums of indicator variables.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bound", help="evaluate one bound")
    _common(p)
    p.add_argument("--a")
    p.add_argument("--bound", help="catalog id, e.g. 1.2, 1.4a, 1.13, 3.8, 1.1, 3.6-chernoff, 1.20")
    p.add_argument("--clamp", action="store_true", help="clamp the reported value to at most 1")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("compare", help="all applicable bounds against the exact tail")
    _common(p, sides=("upper", "lower", "both"))
    p.add_argument("--a", help="deviation grid: 3 | 1,2,4 | 1..18 | 0..5:0.5")
    p.add_argument("--csv", action="store_true")
    p.add_argument("--exact-moments", action="store_true",
                   help="also apply the variance-aware bounds to urn models, using their exact moments")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("oracle", help="exact distribution and tails")
    _common(p)
    p.add_argument("--a")
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("decompose", help="real-rootedness and Bernoulli decomposition of a PGF")
    _common(p)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("simulate", help="sample the explicit couplings")
    _common(p)
    p.add_argument("--j", type=int, default=0, help="conditioned index (0-based)")
    p.add_argument("--seed", type=int)
    p.add_argument("--trials", type=int, default=100_000)
    p.add_argument("--chunk", type=int, default=100_000)
    p.add_argument("--manifest", help="JSON list of {model, j, seed, trials}")
    p.add_argument("--alpha", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--A", type=float)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, TailBoundError) as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"{parser.prog} {args.command}: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
