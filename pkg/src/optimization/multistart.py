"""
البدء المتعدد وأخذ العينات من القطوع الناقصة
Seeded multi-start orchestration around solve_local and ellipsoid sampling
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from enum import Enum
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar

import numpy as np
from loguru import logger
from scipy.linalg import solve_triangular

from config.settings import settings
from src.core.errors import InvalidParameter
from src.core.numkernel import chol_lower
from src.optimization.nlp import NlpProblem, NlpResult, NlpStatus, Sense, solve_local

T = TypeVar("T")

RELATIVE_IMPROVEMENT = 1e-10
FEASIBILITY_TOL = 1e-6


class Where(Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"


def restart_rng(master_seed: int, index: int, *stream: int) -> np.random.Generator:
    """
    مولد عشوائي لكل إعادة تشغيل

    Philox counter-based generator keyed by (master seed, stream..., index),
    so a restart draws the same numbers whichever thread runs it.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(master_seed), *map(int, stream), int(index)])))


def sample_ellipsoid(S, rho: float, center, where: Where, rng: np.random.Generator) -> np.ndarray:
    """
    عينة من القطع الناقص {(x−c)ᵀS(x−c) ≤ ρ}

    A Gaussian direction on the unit sphere is scaled by √ρ (and by U^{1/n}
    for interior samples) and mapped through L⁻ᵀ, where LLᵀ = S.
    """
    if not rho > 0:
        raise InvalidParameter(f"ellipsoid level must be positive, got {rho}")
    L = chol_lower(S)
    n = L.shape[0]
    direction = rng.standard_normal(n)
    norm = np.linalg.norm(direction)
    while norm == 0.0:
        direction = rng.standard_normal(n)
        norm = np.linalg.norm(direction)
    direction /= norm
    radius = np.sqrt(rho)
    if Where(where) == Where.INTERIOR:
        radius *= rng.uniform() ** (1.0 / n)
    return np.asarray(center, dtype=float) + solve_triangular(L.T, radius * direction, lower=False)


def improves(problem: NlpProblem, incumbent: Optional[NlpResult], candidate: NlpResult, feasibility_tol: float = FEASIBILITY_TOL) -> bool:
    """
    هل يحسن المرشح الحل الحالي؟

    Candidates must be feasible within ``feasibility_tol``; the objective must
    improve by more than 1e-10 relative to the incumbent.
    """
    if candidate.violation > feasibility_tol or not np.isfinite(candidate.value):
        return False
    if incumbent is None or incumbent.violation > feasibility_tol:
        return True
    sign = 1.0 if problem.sense == Sense.MAXIMIZE else -1.0
    gain = sign * (candidate.value - incumbent.value)
    return gain > RELATIVE_IMPROVEMENT * max(1.0, abs(incumbent.value))


def run_indexed(task: Callable[[int], T], indices: Sequence[int], threads: int = 1) -> List[T]:
    """تنفيذ المهام المفهرسة وإرجاع النتائج بترتيب الفهارس"""
    if threads <= 1 or len(indices) <= 1:
        return [task(i) for i in indices]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(task, indices))


def multistart(
    problem: NlpProblem,
    sampler: Callable[[np.random.Generator], np.ndarray],
    stall: int,
    seed: int = 0,
    stream: Iterable[int] = (),
    improvement: Optional[Callable[[Optional[NlpResult], NlpResult], bool]] = None,
    tol: Optional[float] = None,
    threads: Optional[int] = None,
    max_starts: Optional[int] = None,
) -> NlpResult:
    """
    بدء متعدد مع ميزانية توقف

    Draws starts from ``sampler`` with per-restart generators, runs
    solve_local on each and keeps the incumbent. Returns once ``stall``
    consecutive solves fail the improvement predicate. Restarts are
    launched in batches of ``threads`` and judged in index order, so the
    result does not depend on the thread count.
    """
    if stall < 1:
        raise InvalidParameter(f"stall budget must be at least 1, got {stall}")
    threads = settings.DEFAULT_THREADS if threads is None else max(1, int(threads))
    max_starts = settings.MULTISTART_MAX_STARTS if max_starts is None else max_starts
    stream = tuple(stream)
    improvement = improvement or (lambda incumbent, candidate: improves(problem, incumbent, candidate))

    def one_start(index: int) -> NlpResult:
        rng = restart_rng(seed, index, *stream)
        return solve_local(problem, sampler(rng), tol=tol)

    incumbent: Optional[NlpResult] = None
    fallback: Optional[NlpResult] = None
    stalls = 0
    solves = 0
    index = 0
    while stalls < stall and index < max_starts:
        batch = list(range(index, min(index + threads, max_starts)))
        for result in run_indexed(one_start, batch, threads):
            if stalls >= stall:
                break
            solves += 1
            if improvement(incumbent, result):
                incumbent = result
                stalls = 0
            else:
                stalls += 1
            if fallback is None or result.violation < fallback.violation:
                fallback = result
        index = batch[-1] + 1

    if index >= max_starts and stalls < stall:
        logger.warning(f"{problem.name}: multistart hit the cap of {max_starts} starts")

    if incumbent is None:
        logger.warning(f"{problem.name}: no feasible start among {solves} solves")
        return replace(fallback, status=NlpStatus.INFEASIBLE, solves=solves)
    logger.debug(f"{problem.name}: multistart best {incumbent.value:.6g} after {solves} solves")
    return replace(incumbent, solves=solves)
