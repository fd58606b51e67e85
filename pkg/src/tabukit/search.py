"""Tabu-guided pattern search on integer-stepped grids.

The move engine is a cumulative coordinate exploration (a minus/plus probe
per dimension, improvements folded in as the sweep proceeds) followed by an
optional pattern extrapolation, as in classical direct search.  On top of
that sit three memory layers:

* a FIFO tabu list of recently visited grid cells, so the search can march
  through a local minimum by taking the best allowable move even when it
  worsens the incumbent (a tabu cell is allowable only when it beats the
  best value found so far);
* a short leaderboard of the best points seen, whose per-dimension
  consensus seeds intensification restarts;
* uniform random restarts for diversification.

Exploration steps shrink by a fixed number of grid cells once progress has
stalled long enough; the run stops when the evaluation budget is spent or
the steps are already at one cell and progress has stalled again.

All positions are handled as grid index tuples internally, which makes
move arithmetic and tabu membership exact; see `SearchSpace`.
"""

from __future__ import annotations

import bisect
import json
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from ._fmt import format_float, write_csv
from .space import SearchSpace


class EvaluationError(RuntimeError):
    """An objective evaluation failed or returned NaN; aborts the run."""


class _BudgetExhausted(Exception):
    pass


class TabuList:
    """FIFO memory of the most recent `tenure` visited grid cells.

    Keys are grid index tuples, so membership is exact cell equality; snap
    real-valued points with `SearchSpace.nearest_index` before testing.
    Re-inserting a resident cell still evicts the oldest entry.
    """

    def __init__(self, tenure: int):
        if tenure < 0:
            raise ValueError("tenure must be non-negative")
        self.tenure = tenure
        self._fifo: deque = deque()
        self._counts: dict = {}

    def add(self, cell) -> None:
        cell = tuple(cell)
        if self.tenure == 0:
            return
        self._fifo.append(cell)
        self._counts[cell] = self._counts.get(cell, 0) + 1
        while len(self._fifo) > self.tenure:
            old = self._fifo.popleft()
            n = self._counts[old] - 1
            if n:
                self._counts[old] = n
            else:
                del self._counts[old]

    def __contains__(self, cell) -> bool:
        return tuple(cell) in self._counts

    def __len__(self) -> int:
        return len(self._fifo)

    def __iter__(self):
        return iter(self._fifo)


class BestList:
    """Leaderboard of the `capacity` best distinct cells evaluated so far.

    Entries are (value, cell) pairs kept sorted by value (stable for ties).
    Once full, a candidate is admitted only by strictly beating the worst
    retained value; a cell is never retained twice.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = capacity
        self._entries: list[tuple[float, tuple]] = []
        self._cells: set = set()

    def consider(self, cell, value: float) -> bool:
        cell = tuple(cell)
        if cell in self._cells:
            return False
        if len(self._entries) >= self.capacity and value >= self._entries[-1][0]:
            return False
        pos = bisect.bisect_right([v for v, _ in self._entries], value)
        self._entries.insert(pos, (value, cell))
        self._cells.add(cell)
        if len(self._entries) > self.capacity:
            _, dropped = self._entries.pop()
            self._cells.discard(dropped)
        return True

    @property
    def entries(self) -> list[tuple[float, tuple]]:
        return list(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class SearchConfig:
    """Tuning knobs for `search`.

    `initial_steps` takes real step sizes (scalar or per dimension) that
    must be positive grid multiples; None means 10% of each dimension's
    index span.  `initial_point` fixes the start instead of drawing it from
    the seeded generator.  With `use_tabu` False the engine degrades to a
    plain pattern search: improving moves only, no memory, steps shrink as
    soon as a sweep fails, and the stall thresholds are ignored.
    """

    tenure: int = 7
    best_capacity: int = 5
    pattern_factor: float = 1.0
    reduce_multiple: int = 1
    intensify_after: int = 10
    diversify_after: int = 15
    reduce_after: int = 25
    budget: int = 10_000
    seed: int = 0
    initial_steps: object = None
    initial_point: object = None
    use_tabu: bool = True

    def validate(self, space: SearchSpace) -> None:
        if self.budget < 1:
            raise ValueError("budget must be at least 1")
        if self.best_capacity < 1:
            raise ValueError("best_capacity must be at least 1")
        if self.reduce_multiple < 1:
            raise ValueError("reduce_multiple must be at least 1")
        if not (math.isfinite(self.pattern_factor) and self.pattern_factor >= 0):
            raise ValueError("pattern_factor must be finite and non-negative")
        if self.use_tabu:
            if self.tenure < 1:
                raise ValueError("tenure must be at least 1")
            if not 0 < self.intensify_after < self.diversify_after < self.reduce_after:
                raise ValueError(
                    "stall thresholds must satisfy "
                    "0 < intensify_after < diversify_after < reduce_after"
                )
        if self.initial_steps is not None:
            space.multiples_of_step(self.initial_steps)
        if self.initial_point is not None:
            space.to_index(self.initial_point)


@dataclass(frozen=True)
class MoveRecord:
    """One accepted base change, as replayed by the memory-invariant tests.

    `kind` is "initial", "explore", "pattern", "intensify", "diversify"
    or "reduce"; explore and pattern are neighborhood moves subject to
    the tabu rule, the others are (re)starts.  `best_before` is the best
    value known before the move's tabu test ran (the aspiration
    reference).
    """

    kind: str
    cell: tuple
    value: float
    eval_count: int
    best_before: float


@dataclass
class SearchResult:
    best: np.ndarray
    best_value: float
    best_feasible: bool
    n_evaluations: int
    history: list = field(repr=False)
    termination: str = "budget"
    moves: list = field(default_factory=list, repr=False)
    best_list: list = field(default_factory=list, repr=False)

    def write_convergence_csv(self, path) -> None:
        """Improvement trace: eval_index,best_obfn (last row = final state)."""
        rows = [(i, format_float(v)) for i, v in self.history]
        write_csv(path, ["eval_index", "best_obfn"], rows)

    def summary(self) -> dict:
        return {
            "best": [float(x) for x in self.best],
            "best_obfn": self.best_value,
            "best_feasible": self.best_feasible,
            "n_evaluations": self.n_evaluations,
            "termination": self.termination,
        }

    def write_summary_json(self, path) -> None:
        doc = self.summary()
        doc["best"] = [json.loads(format_float(x)) for x in doc["best"]]
        doc["best_obfn"] = json.loads(format_float(doc["best_obfn"]))
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")


def _round_half_away(x: float) -> int:
    return int(math.copysign(math.floor(abs(x) + 0.5), x))


def _normalize_result(out):
    if isinstance(out, tuple):
        value, feasible = out
        return float(value), bool(feasible)
    return float(out), True


class _Evaluator:
    """Counts evaluations, enforces the budget, tracks best and history."""

    def __init__(self, objective, space, budget, best_list):
        self.objective = objective
        self.space = space
        self.budget = budget
        self.best_list = best_list
        self.count = 0
        self.best_value = math.inf
        self.best_cell = None
        self.best_feasible = False
        self.history: list[tuple[int, float]] = []

    def __call__(self, cell) -> float:
        if self.count >= self.budget:
            raise _BudgetExhausted
        values = self.space.from_index(cell)
        self.count += 1
        try:
            out = self.objective(values)
        except Exception as exc:
            raise EvaluationError(
                f"objective evaluation {self.count} at {values.tolist()} failed: {exc}"
            ) from exc
        value, feasible = _normalize_result(out)
        if math.isnan(value):
            raise EvaluationError(
                f"objective evaluation {self.count} at {values.tolist()} returned NaN"
            )
        if value < self.best_value:
            self.best_value = value
            self.best_cell = tuple(cell)
            self.best_feasible = feasible
            self.history.append((self.count, value))
        self.best_list.consider(cell, value)
        return value


def _explore_cells(evaluate, get_best, space, base, base_value, mults, tabu, aggressive):
    """One cumulative coordinate sweep from `base`.

    Probes trial - step then trial + step in every dimension (clamped to
    the box; probes that clamp onto the trial point are skipped), folding
    each strictly improving allowable probe into the trial as the sweep
    proceeds.  A probe is allowable when it is not tabu or when it beats
    the best value known before the probe (aspiration).  Returns the moved
    trial; if nothing improved, the best allowable probe seen (even though
    it worsens) when `aggressive`, else None.  Ties break toward the
    earlier dimension and the negative direction.
    """
    trial = list(base)
    trial_value = base_value
    moved = False
    fallback = None
    fallback_value = math.inf
    for d in range(space.dim):
        best_cand = None
        best_cand_value = math.inf
        for direction in (-1, 1):
            k = trial[d] + direction * mults[d]
            k = min(max(k, 0), space.n_values[d] - 1)
            if k == trial[d]:
                continue
            cand = list(trial)
            cand[d] = k
            cand = tuple(cand)
            best_before = get_best()
            value = evaluate(cand)
            if tabu is not None and cand in tabu and not value < best_before:
                continue
            if value < fallback_value:
                fallback, fallback_value = cand, value
            if value < best_cand_value:
                best_cand, best_cand_value = cand, value
        if best_cand is not None and best_cand_value < trial_value:
            trial[d] = best_cand[d]
            trial_value = best_cand_value
            moved = True
    if moved:
        return tuple(trial), trial_value
    if aggressive and fallback is not None:
        return fallback, fallback_value
    return None


def _pattern_cell(base, exploration, factor, space):
    cell = []
    for d in range(space.dim):
        delta = exploration[d] - base[d]
        cell.append(exploration[d] + _round_half_away(factor * delta))
    return space.clamp_index(cell)


def explore(objective, space, base, steps=None, tabu=None, best_value=math.inf,
            aggressive=True):
    """Standalone exploration sweep; see `_explore_cells` for the rules.

    `steps` are real step sizes (default: the minimum steps).  Returns
    (point, value) or None.  The sweep evaluates the objective directly and
    does not count against any budget.
    """
    base_cell = space.to_index(base)
    mults = (
        space.multiples_of_step(steps) if steps is not None else (1,) * space.dim
    )
    base_val = _normalize_result(objective(space.from_index(base_cell)))[0]

    def evaluate(cell):
        return _normalize_result(objective(space.from_index(cell)))[0]

    out = _explore_cells(
        evaluate, lambda: best_value, space, base_cell, base_val, mults, tabu,
        aggressive,
    )
    if out is None:
        return None
    cell, value = out
    return space.from_index(cell), value


def pattern_move(base, exploration, factor, space) -> np.ndarray:
    """Extrapolate past the exploration point: e + factor*(e - b), on-grid.

    Each coordinate is rounded to the grid and clamped to the box.
    """
    cell = _pattern_cell(space.to_index(base), space.to_index(exploration),
                         factor, space)
    return space.from_index(cell)


def reduce_steps(steps, space, multiple: int = 1) -> np.ndarray:
    """Shrink each step by `multiple` grid cells, never below one cell."""
    mults = space.multiples_of_step(steps)
    new = [max(1, m - multiple) for m in mults]
    return np.array([n * space.step[d] for d, n in enumerate(new)])


def intensify(best_list: BestList, space: SearchSpace) -> np.ndarray:
    """Consensus of the best-list entries, per dimension.

    Where every entry agrees within one grid cell the best entry's
    coordinate is kept; elsewhere the arithmetic mean, rounded to the grid.
    """
    entries = best_list.entries
    if not entries:
        raise ValueError("best list is empty")
    return space.from_index(_intensify_cell(entries, space))


def _intensify_cell(entries, space):
    best_cell = entries[0][1]
    out = []
    for d in range(space.dim):
        ks = [cell[d] for _, cell in entries]
        if max(ks) - min(ks) <= 1:
            out.append(best_cell[d])
        else:
            out.append(_round_half_away(sum(ks) / len(ks)))
    return space.clamp_index(out)


def diversify(space: SearchSpace, rng: np.random.Generator) -> np.ndarray:
    """Uniformly random grid point."""
    return space.from_index(space.random_index(rng))


def search(objective, space: SearchSpace, config: SearchConfig | None = None) -> SearchResult:
    """Minimize `objective` over the grid.

    The objective receives a real-valued vector and returns either a float
    or a (value, feasible) pair; NaN and exceptions abort the run with an
    `EvaluationError`.  All randomness (start draw, diversification) comes
    from a generator seeded with `config.seed`, so equal configurations
    reproduce the run exactly.
    """
    cfg = config if config is not None else SearchConfig()
    cfg.validate(space)
    rng = np.random.default_rng(cfg.seed)
    best_list = BestList(cfg.best_capacity)
    ev = _Evaluator(objective, space, cfg.budget, best_list)
    tabu = TabuList(cfg.tenure) if cfg.use_tabu else None
    moves: list[MoveRecord] = []

    if cfg.initial_point is not None:
        start = space.to_index(cfg.initial_point)
    else:
        start = space.random_index(rng)
    if cfg.initial_steps is not None:
        mults = space.multiples_of_step(cfg.initial_steps)
    else:
        mults = space.default_initial_multiples()

    termination = "budget"
    try:
        value = ev(start)
        moves.append(MoveRecord("initial", start, value, ev.count, math.inf))
        if tabu is not None:
            tabu.add(start)
            termination = _run_tabu(ev, space, cfg, tabu, best_list, rng,
                                    start, value, mults, moves)
        else:
            termination = _run_plain(ev, space, cfg, start, value, mults, moves)
    except _BudgetExhausted:
        termination = "budget"

    history = list(ev.history)
    if not history or history[-1][0] != ev.count:
        history.append((ev.count, ev.best_value))
    return SearchResult(
        best=space.from_index(ev.best_cell),
        best_value=ev.best_value,
        best_feasible=ev.best_feasible,
        n_evaluations=ev.count,
        history=history,
        termination=termination,
        moves=moves,
        best_list=best_list.entries,
    )


def _run_tabu(ev, space, cfg, tabu, best_list, rng, base, base_value, mults, moves):
    stall = 0
    while True:
        best_before = ev.best_value
        out = _explore_cells(
            ev, lambda: ev.best_value, space, base, base_value, mults, tabu,
            aggressive=True,
        )
        if out is not None:
            cand, cand_value = out
            kind = "explore"
            move_ref = best_before
            if cand_value < base_value and cfg.pattern_factor > 0:
                pat = _pattern_cell(base, cand, cfg.pattern_factor, space)
                if pat != cand and pat != base:
                    pat_ref = ev.best_value
                    pat_value = ev(pat)
                    if pat_value < cand_value and (
                        pat not in tabu or pat_value < pat_ref
                    ):
                        cand, cand_value = pat, pat_value
                        kind, move_ref = "pattern", pat_ref
            base, base_value = cand, cand_value
            tabu.add(base)
            moves.append(MoveRecord(kind, base, base_value, ev.count, move_ref))
        stall = 0 if ev.best_value < best_before else stall + 1

        if stall >= cfg.reduce_after:
            if all(m == 1 for m in mults):
                return "converged"
            mults = tuple(max(1, m - cfg.reduce_multiple) for m in mults)
            # classical pattern-search restart: finer steps resume from the
            # incumbent, not from wherever the walk wandered
            base, base_value = ev.best_cell, ev.best_value
            tabu.add(base)
            moves.append(MoveRecord("reduce", base, base_value, ev.count,
                                    ev.best_value))
            stall = 0
        elif stall == cfg.diversify_after:
            ref = ev.best_value
            base = space.random_index(rng)
            base_value = ev(base)
            tabu.add(base)
            moves.append(MoveRecord("diversify", base, base_value, ev.count, ref))
            if ev.best_value < ref:
                stall = 0
        elif stall == cfg.intensify_after:
            ref = ev.best_value
            base = _intensify_cell(best_list.entries, space)
            base_value = ev(base)
            tabu.add(base)
            moves.append(MoveRecord("intensify", base, base_value, ev.count, ref))
            if ev.best_value < ref:
                stall = 0


def _run_plain(ev, space, cfg, base, base_value, mults, moves):
    # Classical pattern search: no memory, improving moves only, shrink the
    # steps whenever a sweep comes back empty.
    while True:
        best_before = ev.best_value
        out = _explore_cells(
            ev, lambda: ev.best_value, space, base, base_value, mults, None,
            aggressive=False,
        )
        if out is None:
            if all(m == 1 for m in mults):
                return "converged"
            mults = tuple(max(1, m - cfg.reduce_multiple) for m in mults)
            continue
        cand, cand_value = out
        kind = "explore"
        if cfg.pattern_factor > 0:
            pat = _pattern_cell(base, cand, cfg.pattern_factor, space)
            if pat != cand and pat != base:
                pat_value = ev(pat)
                if pat_value < cand_value:
                    cand, cand_value, kind = pat, pat_value, "pattern"
        base, base_value = cand, cand_value
        moves.append(MoveRecord(kind, base, base_value, ev.count, best_before))
