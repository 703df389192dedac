"""Grid runner: optimizer x problem x seed x learning rate.

Each cell writes one CSV::

    # key=value metadata lines
    step,loss,grad_norm,wall_clock_ns
    0,<loss>,<grad norm>,<ns since cell start>
    ...

Seeds. For problem index ``p`` (position in the ``kind`` x
``condition_number`` grid) and seed index ``s`` the cell seed is the first 8
bytes (little endian) of ``blake2b(f"{master_seed}:{p}:{s}", digest_size=8)``.
It drives both the problem instance and the factor initialization, so every
optimizer and learning rate at the same ``(p, s)`` starts from the same point.

"Relative loss" throughout is ``loss / loss_at_step_0``.
"""
import csv
import hashlib
import io
import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .. import __version__, _backend
from ..errors import ConfigError, ContractError, NonFiniteGradientError
from ..optimizers import init_factors, make_optimizer
from ..problems import loss_and_gradient, make_problem

log = logging.getLogger(__name__)

HEADER = ("step", "loss", "grad_norm", "wall_clock_ns")
DIVERGENCE_LOSS = 1e12


def cell_seed(master_seed, problem_index, seed_index):
    digest = hashlib.blake2b(
        f"{master_seed}:{problem_index}:{seed_index}".encode("ascii"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class Cell:
    optimizer: str
    learning_rate: float
    kind: str
    condition_number: float
    problem_index: int
    seed_index: int
    seed: int

    @property
    def problem_label(self):
        return f"{self.kind}-k{self.condition_number:g}"

    @property
    def filename(self):
        return (
            f"{self.optimizer}__{self.problem_label}__lr{self.learning_rate:.6g}"
            f"__seed{self.seed_index}.csv"
        )


@dataclass
class CellResult:
    cell: Cell
    path: str
    rows: int
    initial_loss: float
    final_loss: float
    steps_to_threshold: Optional[int]
    diverged_at: Optional[int]
    reason: str = ""

    @property
    def diverged(self):
        return self.diverged_at is not None

    @property
    def final_relative_loss(self):
        if self.diverged:
            return np.inf
        if self.initial_loss == 0:
            return 0.0
        return self.final_loss / self.initial_loss


def enumerate_cells(cfg):
    problems = [(k, c) for k in cfg.kinds for c in cfg.condition_numbers]
    cells = []
    for name in cfg.names:
        for p_idx, (kind, kappa) in enumerate(problems):
            for s_idx in range(cfg.seeds):
                seed = cell_seed(cfg.master_seed, p_idx, s_idx)
                for lr in cfg.learning_rates:
                    cells.append(Cell(name, lr, kind, kappa, p_idx, s_idx, seed))
    names = [c.filename for c in cells]
    if len(set(names)) != len(names):
        raise ConfigError("learning rates or condition numbers collide after formatting to 6 digits")
    return cells


def _problem_for(cfg, cell):
    return make_problem(
        cell.kind, cfg.m, cfg.n, cfg.planted_rank, cell.condition_number, cell.seed
    )


def run_cell(cfg, cell, problem, out_dir):
    """Run one cell to completion and write its CSV; never raises on divergence."""
    fp = init_factors(cfg.m, cfg.n, cfg.rank, cell.seed)
    opt = make_optimizer(cell.optimizer, cfg.optimizer_config(cell.learning_rate), cfg.m, cfg.n, cfg.rank)
    rows = []
    loss0 = None
    reached = None
    diverged_at = None
    reason = ""
    start = time.perf_counter_ns()
    with np.errstate(over="ignore", invalid="ignore"):
        for step in range(cfg.steps + 1):
            loss, G = loss_and_gradient(problem, fp)
            grad_norm = float(np.linalg.norm(G))
            if not (np.isfinite(loss) and np.isfinite(grad_norm)) or loss > DIVERGENCE_LOSS:
                diverged_at, reason = step, f"loss {loss!r} exceeds divergence bound"
                break
            rows.append((step, loss, grad_norm, time.perf_counter_ns() - start))
            if loss0 is None:
                loss0 = loss
            if reached is None and loss <= cfg.threshold * loss0:
                reached = step
                if cfg.stop_at_threshold:
                    break
            if step == cfg.steps:
                break
            try:
                fp = opt.step(fp, G)
            except (NonFiniteGradientError, FloatingPointError, np.linalg.LinAlgError, ContractError) as exc:
                diverged_at, reason = step + 1, f"{type(exc).__name__}: {exc}"
                break

    meta = {
        "optimizer": cell.optimizer,
        "learning_rate": repr(cell.learning_rate),
        **{f"problem.{k}": (repr(v) if isinstance(v, float) else v) for k, v in problem.params().items()},
        "problem_index": cell.problem_index,
        "seed_index": cell.seed_index,
        "seed": cell.seed,
        "version": __version__,
        "backend": _backend.backend_name(),
        **cfg.echo(),
        "status": "diverged" if diverged_at is not None else "ok",
        "diverged_at_step": "" if diverged_at is None else diverged_at,
        "divergence_reason": reason.replace("\n", " "),
        "steps_to_threshold": "" if reached is None else reached,
    }
    path = os.path.join(out_dir, cell.filename)
    write_csv(path, meta, rows)
    if diverged_at is not None:
        log.info("%s diverged at step %d (%s)", cell.filename, diverged_at, reason)
    return CellResult(
        cell=cell,
        path=path,
        rows=len(rows),
        initial_loss=loss0 if loss0 is not None else np.nan,
        final_loss=rows[-1][1] if rows else np.nan,
        steps_to_threshold=reached,
        diverged_at=diverged_at,
        reason=reason,
    )


def write_csv(path, meta, rows):
    buf = io.StringIO()
    for key, value in meta.items():
        buf.write(f"# {key}={value}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for step, loss, grad_norm, ns in rows:
        writer.writerow((step, repr(float(loss)), repr(float(grad_norm)), ns))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path):
    """Return ``(meta, rows)``; rows are tuples of strings in header order."""
    meta, body = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                meta[key] = value
            else:
                body.append(line)
    reader = csv.reader(body)
    header = tuple(next(reader))
    if header != HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    return meta, [tuple(row) for row in reader]


def deterministic_body(path):
    """CSV body (header and rows) with the wall-clock column removed."""
    _, rows = read_csv(path)
    return "\n".join(",".join(row[:3]) for row in [HEADER, *rows])


def run_grid(cfg, out_dir, threads=1):
    os.makedirs(out_dir, exist_ok=True)
    cells = enumerate_cells(cfg)
    problems = {}
    for cell in cells:
        key = (cell.problem_index, cell.seed_index)
        if key not in problems:
            problems[key] = _problem_for(cfg, cell)

    def work(cell):
        return run_cell(cfg, cell, problems[(cell.problem_index, cell.seed_index)], out_dir)

    if threads <= 1:
        return [work(c) for c in cells]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, cells))


@dataclass(frozen=True)
class SummaryRow:
    optimizer: str
    problem: str
    best_learning_rate: float
    median_steps_to_threshold: float
    median_final_relative_loss: float
    best_final_loss: float
    cells: int
    diverged_cells: int


def summarize(results):
    """Best learning rate per (optimizer, problem).

    A learning rate is scored by the median steps-to-threshold over seeds
    (unreached or diverged counts as infinity), ties broken by the median
    final relative loss.
    """
    groups = {}
    for res in results:
        key = (res.cell.optimizer, res.cell.problem_label)
        groups.setdefault(key, {}).setdefault(res.cell.learning_rate, []).append(res)

    summary = []
    for (name, label), by_lr in groups.items():
        scored = []
        for lr, runs in by_lr.items():
            steps = [np.inf if r.steps_to_threshold is None or r.diverged else r.steps_to_threshold for r in runs]
            finals = [r.final_relative_loss for r in runs]
            scored.append((float(np.median(steps)), float(np.median(finals)), lr))
        best_steps, best_final, best_lr = min(scored)
        all_runs = [r for runs in by_lr.values() for r in runs]
        finite = [r.final_loss for r in all_runs if not r.diverged]
        summary.append(
            SummaryRow(
                optimizer=name,
                problem=label,
                best_learning_rate=best_lr,
                median_steps_to_threshold=best_steps,
                median_final_relative_loss=best_final,
                best_final_loss=min(finite) if finite else np.inf,
                cells=len(all_runs),
                diverged_cells=sum(r.diverged for r in all_runs),
            )
        )
    return summary


SUMMARY_FIELDS = (
    "optimizer",
    "problem",
    "best_learning_rate",
    "median_steps_to_threshold",
    "median_final_relative_loss",
    "best_final_loss",
    "cells",
    "diverged_cells",
)


def _fmt(value):
    if isinstance(value, float):
        return "inf" if np.isinf(value) else f"{value:.6g}"
    return str(value)


def write_summary(path, summary):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SUMMARY_FIELDS)
        for row in summary:
            writer.writerow([_fmt(getattr(row, f)) for f in SUMMARY_FIELDS])


def format_table(summary):
    table = [SUMMARY_FIELDS] + [tuple(_fmt(getattr(r, f)) for f in SUMMARY_FIELDS) for r in summary]
    widths = [max(len(row[i]) for row in table) for i in range(len(SUMMARY_FIELDS))]
    return "\n".join("  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip() for row in table)


def cmd_run(cfg, out_dir, threads=1, stream=None):
    results = run_grid(cfg, out_dir, threads)
    summary = summarize(results)
    write_summary(os.path.join(out_dir, "summary.csv"), summary)
    if stream is not None:
        print(format_table(summary), file=stream)
        diverged = sum(r.diverged for r in results)
        print(f"{len(results)} cells written to {out_dir} ({diverged} diverged)", file=stream)
    return 0
