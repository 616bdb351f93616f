"""Single runs and (kernel, p) sweeps with persisted, hash-addressed records."""

from __future__ import annotations

import csv
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from .config import RunConfig, SweepPlan, config_hash, parse_run_config
from .grid import norms, save_field
from .kernels import InvalidWindowError, KernelQuadratureError, estimate_expansion, fujita_exponent
from .solver import Blowup, PureGrowth, mass_ode_residual, outcome_to_dict, run

log = logging.getLogger(__name__)


def code_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunRecord:
    config_hash: str
    kernel: dict
    p: float
    predicted_pF: float | None
    outcome: dict
    diagnostics: dict
    started: str
    finished: str
    code_version: str
    config: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=_jsonable)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls(**json.loads(text))


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"not JSON serializable: {type(x).__name__}")


def _finite_or_none(x):
    return None if x is None or not math.isfinite(x) else float(x)


def predicted_fujita(cfg: RunConfig) -> tuple[float | None, float | None]:
    """(p_F from the kernel's tail exponent, p_F from the fitted expansion)."""
    beta = cfg.kernel.theoretical_beta
    exact = beta / cfg.grid.dim if math.isfinite(beta) else None
    try:
        fitted = fujita_exponent(estimate_expansion(cfg.kernel), cfg.grid.dim)
    except (InvalidWindowError, KernelQuadratureError) as exc:
        log.warning("could not estimate the Fourier expansion of %s: %s", cfg.kernel.label, exc)
        fitted = None
    return exact, fitted


def execute(cfg: RunConfig) -> tuple[RunRecord, object]:
    """Run one simulation and summarise it; returns (record, RunResult)."""
    started = _now()
    result = run(cfg.u0, cfg.kernel, cfg.reaction, cfg.solver)
    hist = result.history
    diag = {
        "steps": len(hist.t) - 1,
        "t_end": hist.t[-1],
        "max_linf": max(hist.linf),
        "final_linf": hist.linf[-1],
        "final_l1": hist.l1[-1],
        "initial_l1": norms(cfg.u0).L1,
    }
    exact_pF, fitted_pF = predicted_fujita(cfg)
    diag["fitted_pF"] = fitted_pF
    if isinstance(cfg.reaction, PureGrowth):
        diag["mass_ode_residual"] = mass_ode_residual(hist)
    if isinstance(result.outcome, Blowup):
        diag["blowup_time_heuristic"] = True
    diag.update({k: _finite_or_none(v) if isinstance(v, float) else v
                 for k, v in result.notes.items()})
    outcome = {k: _finite_or_none(v) if isinstance(v, float) else v
               for k, v in outcome_to_dict(result.outcome).items()}
    record = RunRecord(
        config_hash=cfg.hash,
        kernel=cfg.kernel.to_config(),
        p=cfg.reaction.p,
        predicted_pF=exact_pF if exact_pF is not None else fitted_pF,
        outcome=outcome,
        diagnostics=diag,
        started=started,
        finished=_now(),
        code_version=code_version(),
        config=cfg.raw,
    )
    return record, result


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def simulate(cfg: RunConfig, out_dir: str | Path) -> RunRecord:
    """Run ``cfg`` and persist record, diagnostics CSV and snapshots under out_dir/<hash>."""
    record, result = execute(cfg)
    run_dir = Path(out_dir) / cfg.hash[:16]
    run_dir.mkdir(parents=True, exist_ok=True)
    if cfg.outputs.get("diagnostics_csv", True):
        result.history.to_csv(run_dir / "diagnostics.csv")
    if cfg.outputs.get("snapshots", True):
        snap_dir = run_dir / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for i, (t, fld) in enumerate(result.snapshots):
            save_field(snap_dir / f"snap_{i:05d}.fkpf", fld, t)
    if cfg.outputs.get("svg", False):
        hist = result.history
        write_line_svg(run_dir / "linf.svg", np.asarray(hist.t), np.log10(np.asarray(hist.linf)),
                       "t", "log10 Linf")
    _atomic_write(run_dir / "record.json", record.to_json())
    return record


# ---------------------------------------------------------------------------
# sweeps


def _run_cell(raw: dict, base_dir: str | None) -> dict:
    try:
        cfg = parse_run_config(raw, base_dir)
        record, _ = execute(cfg)
        return json.loads(record.to_json())
    except Exception as exc:  # a failed cell must not stop the sweep
        return {
            "config_hash": config_hash(raw),
            "kernel": raw["kernel"],
            "p": raw["reaction"]["p"],
            "predicted_pF": None,
            "outcome": {"kind": "error", "reason": f"{type(exc).__name__}: {exc}"},
            "diagnostics": {},
            "started": _now(),
            "finished": _now(),
            "code_version": code_version(),
            "config": raw,
        }


@dataclass
class Bracket:
    kernel: str
    predicted_pF: float | None
    largest_blowup_p: float | None
    smallest_decay_p: float | None

    @property
    def contains_pF(self) -> bool | None:
        if self.predicted_pF is None or self.largest_blowup_p is None or self.smallest_decay_p is None:
            return None
        return self.largest_blowup_p <= self.predicted_pF <= self.smallest_decay_p


@dataclass
class SweepResult:
    labels: list[str]
    ps: list[float]
    records: list[list[dict]]  # [kernel][p]
    brackets: list[Bracket]
    resumed: int


def _label(kcfg: dict) -> str:
    parts = [f"{k}={v}" for k, v in sorted(kcfg.items()) if k not in ("family", "dim", "radii", "values")]
    return kcfg["family"] + (f"({', '.join(parts)})" if parts else "")


def sweep(plan: SweepPlan, out_dir: str | Path | None = None, jobs: int | None = None) -> SweepResult:
    """Run all cells, skipping those with a stored record; write matrix, long and bracket CSVs."""
    out = Path(out_dir if out_dir is not None else plan.out_dir)
    rec_dir = out / "records"
    rec_dir.mkdir(parents=True, exist_ok=True)
    jobs = plan.jobs if jobs is None else jobs
    cells = plan.cell_configs()
    results: dict[tuple[int, int], dict] = {}
    pending = []
    for i, j, raw in cells:
        path = rec_dir / f"{config_hash(raw)}.json"
        if path.exists():
            try:
                results[(i, j)] = json.loads(path.read_text())
                continue
            except json.JSONDecodeError:
                log.warning("discarding unreadable record %s", path)
        pending.append((i, j, raw))
    resumed = len(cells) - len(pending)

    def store(i, j, rec):
        results[(i, j)] = rec
        _atomic_write(rec_dir / f"{rec['config_hash']}.json",
                      json.dumps(rec, indent=2, sort_keys=True))
        log.info("cell (%d, %d) p=%g -> %s", i, j, rec["p"], rec["outcome"]["kind"])

    if jobs <= 1 or len(pending) <= 1:
        for i, j, raw in pending:
            store(i, j, _run_cell(raw, plan.base_dir))
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = {pool.submit(_run_cell, raw, plan.base_dir): (i, j) for i, j, raw in pending}
            for fut in as_completed(futs):
                store(*futs[fut], fut.result())

    labels = [_label(k) for k in plan.kernels]
    grid_records = [[results[(i, j)] for j in range(len(plan.ps))] for i in range(len(plan.kernels))]
    brackets = []
    for label, row in zip(labels, grid_records):
        blow = [r["p"] for r in row if r["outcome"]["kind"] == "blowup"]
        decay = [r["p"] for r in row if r["outcome"]["kind"] == "global_decay"]
        pf = next((r["predicted_pF"] for r in row if r.get("predicted_pF") is not None), None)
        brackets.append(Bracket(label, pf, max(blow) if blow else None, min(decay) if decay else None))
    res = SweepResult(labels, list(plan.ps), grid_records, brackets, resumed)
    write_sweep_tables(res, out)
    return res


OUTCOME_CODE = {"blowup": 1, "global_decay": -1, "converge_to_one": 2, "inconclusive": 0, "error": 0}


def write_sweep_tables(res: SweepResult, out: Path) -> None:
    with open(out / "matrix.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kernel"] + [f"p={p:g}" for p in res.ps])
        for label, row in zip(res.labels, res.records):
            w.writerow([label] + [r["outcome"]["kind"] for r in row])
    with open(out / "long.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "series"])
        for label, row in zip(res.labels, res.records):
            for r in row:
                w.writerow([repr(float(r["p"])), OUTCOME_CODE[r["outcome"]["kind"]], label])
    with open(out / "bracket.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kernel", "predicted_pF", "largest_blowup_p", "smallest_decay_p", "contains_pF"])
        for b in res.brackets:
            w.writerow([b.kernel, b.predicted_pF, b.largest_blowup_p, b.smallest_decay_p, b.contains_pF])


# ---------------------------------------------------------------------------
# minimal vector graphics


def write_line_svg(path: str | Path, x: np.ndarray, y: np.ndarray, xlabel: str, ylabel: str,
                   width: int = 480, height: int = 320) -> None:
    """Single polyline with axis labels; enough for a quick look, not for print."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    pad = 40
    if x.size < 2:
        pts = ""
    else:
        xs = pad + (x - x.min()) / max(np.ptp(x), 1e-300) * (width - 2 * pad)
        ys = height - pad - (y - y.min()) / max(np.ptp(y), 1e-300) * (height - 2 * pad)
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(xs, ys))
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">\n'
        f'<rect width="100%" height="100%" fill="white"/>\n'
        f'<polyline fill="none" stroke="black" stroke-width="1.5" points="{pts}"/>\n'
        f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle" font-size="12">{xlabel}</text>\n'
        f'<text x="12" y="{height / 2}" font-size="12" transform="rotate(-90 12 {height / 2})">'
        f"{ylabel}</text>\n</svg>\n"
    )
    Path(path).write_text(svg)
