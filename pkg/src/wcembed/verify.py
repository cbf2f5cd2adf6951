"""Seed-grid runners for the closed-form verification checks.

Shared between the `verify-theory` CLI subcommand and the acceptance tests.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import EmpiricalDistribution
from .theory import (
    CoverageError,
    direct_minimize,
    factor_scores,
    optimal_score,
    pmi_check,
    reconstruct_data_distribution,
    total_variation,
    unigram_product_noise,
)

CHECK_NAMES = ("theorem1", "pmi", "reconstruction")


@dataclass
class CheckResult:
    name: str
    passed: bool
    residual: float
    detail: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        extra = f"  ({self.detail})" if self.detail else ""
        return f"{status}  {self.name}  residual={self.residual:.3e}{extra}"


def random_instance(
    size: int, n_plus: int, k: int, rng: np.random.Generator
) -> tuple[EmpiricalDistribution, EmpiricalDistribution]:
    """Random sparse data counts plus covering noise counts on a size x size grid."""
    weights = rng.random((size, size)) ** 2
    mask = rng.random((size, size)) < 0.7
    if not mask.any():
        mask[rng.integers(size), rng.integers(size)] = True
    weights *= mask
    p = weights / weights.sum()
    plus_counts = rng.multinomial(n_plus, p.ravel()).reshape(size, size)
    q = rng.random((size, size)) + 0.2
    q /= q.sum()
    # +1 per cell guarantees full noise support, hence coverage
    minus_counts = rng.multinomial(k * n_plus, q.ravel()).reshape(size, size) + 1
    return (
        EmpiricalDistribution.from_matrix(plus_counts),
        EmpiricalDistribution.from_matrix(minus_counts),
    )


def check_theorem1(
    sizes=(4, 8, 16), seeds=range(5), n_plus_range=(1_000, 100_000), ks=(1, 5)
) -> list[CheckResult]:
    """Closed form vs numeric minimization, plus the trivial P=Q instance."""
    results = []
    for i, (size, seed) in enumerate((s, sd) for s in sizes for sd in seeds):
        rng = np.random.default_rng((size, seed))
        n_plus = int(rng.integers(*n_plus_range))
        k = int(rng.choice(ks))
        dplus, dminus = random_instance(size, n_plus, k, rng)
        opt = optimal_score(dplus, dminus)
        num = direct_minimize(dplus, dminus)
        nx, ny = opt.values.shape
        supp_p = dplus.matrix(nx, ny) > 0
        residual = float(np.abs(opt.values[supp_p] - num.values[supp_p]).max())
        results.append(
            CheckResult(
                f"theorem1[size={size},seed={seed}]",
                residual < 1e-3,
                residual,
                f"n+={n_plus}, k={k}",
            )
        )
    # trivial case: identical data and noise tallies, N+ = N-
    counts = np.array([[5.0, 3.0], [2.0, 10.0]])
    dist = EmpiricalDistribution.from_matrix(counts)
    opt = optimal_score(dist, EmpiricalDistribution.from_matrix(counts))
    residual = float(np.abs(opt.values).max())
    results.append(CheckResult("theorem1[trivial P=Q]", residual < 1e-6, residual))
    return results


def check_pmi(seeds=range(5), size: int = 6, k: int = 5) -> list[CheckResult]:
    results = []
    # independent joint: shifted PMI is identically -log k
    rng = np.random.default_rng(1)
    px = rng.random(size) + 0.2
    py = rng.random(size) + 0.2
    joint = np.outer(px / px.sum(), py / py.sum()) * 10_000
    dplus = EmpiricalDistribution.from_matrix(joint)
    opt = optimal_score(dplus, unigram_product_noise(dplus, k))
    residual = float(np.abs(opt.values + np.log(k)).max())
    results.append(CheckResult(f"pmi[independent,k={k}]", residual < 1e-10, residual))

    for seed in seeds:
        rng = np.random.default_rng((17, seed))
        counts = rng.random((size, size)) * 50 + 1.0
        dplus = EmpiricalDistribution.from_matrix(counts)
        report = pmi_check(dplus, k, rng)
        results.append(
            CheckResult(
                f"pmi[dependent,seed={seed}]",
                report.passed,
                max(report.closed_form_residual, report.training_residual),
                f"iters={report.iterations}",
            )
        )
    return results


def check_reconstruction(
    seeds=range(20), size: int = 4, k: int = 5, ns=(1_000, 10_000, 100_000)
) -> list[CheckResult]:
    """Monte-Carlo convergence of the rebuilt data distribution."""
    rng0 = np.random.default_rng(7)
    p = rng0.random((size, size)) + 0.1
    p /= p.sum()
    q = np.full((size, size), 1.0 / size**2)

    tv = np.zeros((len(seeds), len(ns)))
    mass_at_largest = []
    for si, seed in enumerate(seeds):
        rng = np.random.default_rng((29, seed))
        for ni, n in enumerate(ns):
            plus = rng.multinomial(n, p.ravel()).reshape(size, size)
            minus = rng.multinomial(k * n, q.ravel()).reshape(size, size)
            if ((plus > 0) & (minus == 0)).any():
                tv[si, ni] = np.nan
                continue
            opt = optimal_score(
                EmpiricalDistribution.from_matrix(plus),
                EmpiricalDistribution.from_matrix(minus),
            )
            F, G = factor_scores(opt.values)
            p_hat = reconstruct_data_distribution(F @ G.T, k, q)
            tv[si, ni] = total_variation(p_hat, p)
            if n == max(ns):
                mass_at_largest.append(float(p_hat.sum()))

    medians = np.nanmedian(tv, axis=0)
    monotone = bool(np.all(np.diff(medians) < 0))
    results = [
        CheckResult(
            "reconstruction[median TV decreasing]",
            monotone,
            float(medians[-1]),
            "medians=" + ",".join(f"{m:.4f}" for m in medians),
        )
    ]
    worst_mass = max(abs(m - 1.0) for m in mass_at_largest)
    results.append(
        CheckResult(
            f"reconstruction[mass at n={max(ns)}]",
            worst_mass < 0.02,
            worst_mass,
        )
    )
    return results


def check_coverage_rejection() -> CheckResult:
    """Both solvers must reject the same uncovered instance, naming the cell."""
    plus = np.array([[3.0, 1.0], [0.0, 2.0]])
    minus = np.array([[2.0, 0.0], [1.0, 3.0]])  # misses cell (0, 1)
    dplus = EmpiricalDistribution.from_matrix(plus)
    dminus = EmpiricalDistribution.from_matrix(minus)
    cells = []
    for fn in (optimal_score, direct_minimize):
        try:
            fn(dplus, dminus)
            return CheckResult("coverage[rejection]", False, 1.0, "no error raised")
        except CoverageError as exc:
            cells.append(exc.cell)
    ok = cells[0] == cells[1] == (0, 1)
    return CheckResult("coverage[rejection]", ok, 0.0 if ok else 1.0, f"cells={cells}")


def run_checks(
    checks=CHECK_NAMES, sizes=(4, 8, 16), seeds: int = 5
) -> list[CheckResult]:
    results: list[CheckResult] = []
    seed_range = range(seeds)
    if "theorem1" in checks:
        results.extend(check_theorem1(sizes=sizes, seeds=seed_range))
        results.append(check_coverage_rejection())
    if "pmi" in checks:
        results.extend(check_pmi(seeds=seed_range))
    if "reconstruction" in checks:
        results.extend(check_reconstruction())
    return results
