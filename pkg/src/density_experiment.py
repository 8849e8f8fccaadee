"""
Density experiment harness
Samples seeded random matrices, perturbs each to an irreducible operator at several
relative epsilons, re-verifies every trace and records one CSV row per (trial, epsilon).
"""

import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from commutant import commutant_basis
from ensembles import ENSEMBLES, sample_matrix
from errors import InvalidConfig, ToolkitError
from linalg_core import DEFAULT_TOL, operator_norm
from matrix_io import read_json
from perturbation import ROBUST_MARGIN, perturb_to_irreducible, verify_trace

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["trial", "epsilon", "distance", "commutant_dim", "verdict", "millis"]
FAILED = "CertificateFailed"


@dataclass
class ExperimentConfig:
    """dim x dim samples, `trials` of them, each perturbed at every relative epsilon"""
    dim: int
    trials: int
    epsilons: List[float]
    seed: int = 0
    ensemble: str = "block_diagonal_conjugated"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.dim, int) or self.dim < 1:
            raise InvalidConfig(f"dim must be an integer >= 1, got {self.dim!r}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise InvalidConfig(f"trials must be an integer >= 1, got {self.trials!r}")
        if not self.epsilons:
            raise InvalidConfig("epsilons must be a nonempty list")
        if any(not (isinstance(e, (int, float)) and e > 0) for e in self.epsilons):
            raise InvalidConfig(f"epsilons must all be positive numbers, got {self.epsilons}")
        if self.ensemble not in ENSEMBLES:
            raise InvalidConfig(f"Unknown ensemble {self.ensemble!r}; expected one of {ENSEMBLES}")

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ExperimentConfig":
        missing = [k for k in ("dim", "trials", "epsilons") if k not in data]
        if missing:
            raise InvalidConfig(f"Experiment config is missing {missing}")
        unknown = set(data) - {"dim", "trials", "epsilons", "seed", "ensemble"}
        if unknown:
            raise InvalidConfig(f"Unknown experiment config keys: {sorted(unknown)}")
        return cls(
            dim=data["dim"],
            trials=data["trials"],
            epsilons=list(data["epsilons"]) if isinstance(data["epsilons"], list) else [],
            seed=data.get("seed", 0),
            ensemble=data.get("ensemble", "block_diagonal_conjugated"),
        )

    @classmethod
    def from_json(cls, path: Union[str, Path]) -> "ExperimentConfig":
        try:
            data = read_json(path)
        except (OSError, ValueError) as e:
            raise InvalidConfig(f"Cannot read experiment config {path}: {e}") from e
        if not isinstance(data, dict):
            raise InvalidConfig(f"Experiment config {path} must be a JSON object")
        return cls.from_dict(data)


@dataclass
class TrialRecord:
    trial: int
    epsilon: float                 # relative to ||T||
    distance: float                # measured ||T - T3||, absolute
    commutant_dim: int
    verdict: str
    millis: float
    epsilon_abs: float = 0.0
    initially_irreducible: bool = False
    error: Optional[str] = field(default=None, repr=False)

    @property
    def succeeded(self) -> bool:
        return self.verdict == "Irreducible" and self.distance < self.epsilon_abs


@dataclass
class ExperimentSummary:
    total: int
    successes: int
    success_fraction: float
    initially_irreducible_fraction: float
    max_distance_ratio: float
    failures: Dict[str, int]

    def line(self) -> str:
        return (f"{self.successes}/{self.total} certified irreducible "
                f"(success fraction {self.success_fraction:.4f}); "
                f"already irreducible before perturbation: {self.initially_irreducible_fraction:.4f}; "
                f"max ||T-T3||/eps: {self.max_distance_ratio:.4f}")


def _run_trial(cfg: ExperimentConfig, trial: int, tol: float, robust_margin: float) -> List[TrialRecord]:
    seed = cfg.seed + trial
    t = sample_matrix(cfg.ensemble, cfg.dim, seed)
    scale = operator_norm(t)
    initial = commutant_basis(t, tol)
    robust = initial.is_irreducible and initial.singular_value_margin > robust_margin

    records = []
    for eps in cfg.epsilons:
        eps_abs = eps * scale if scale > 0 else eps
        start = time.perf_counter()
        try:
            trace = perturb_to_irreducible(t, eps_abs, rng_seed=seed, tol=tol, robust_margin=robust_margin)
            report = verify_trace(trace)
            verdict = report.certificate.verdict.value if report.passed else FAILED
            record = TrialRecord(
                trial=trial, epsilon=eps, distance=report.measured.t_t3,
                commutant_dim=report.certificate.dimension, verdict=verdict,
                millis=0.0, epsilon_abs=eps_abs, initially_irreducible=robust,
            )
        except ToolkitError as e:
            logger.error(f"Trial {trial} (seed {seed}, eps {eps}) failed: {e}")
            record = TrialRecord(
                trial=trial, epsilon=eps, distance=float("nan"), commutant_dim=-1,
                verdict=FAILED, millis=0.0, epsilon_abs=eps_abs,
                initially_irreducible=robust, error=f"{type(e).__name__}: {e}",
            )
        record.millis = (time.perf_counter() - start) * 1000.0
        records.append(record)
    return records


def run_density_experiment(
    cfg: ExperimentConfig,
    tol: float = DEFAULT_TOL,
    robust_margin: float = ROBUST_MARGIN,
    workers: int = 1,
    progress: bool = False,
) -> List[TrialRecord]:
    """
    Run every (trial, epsilon) pair; per-trial seeds are cfg.seed + trial

    Failures become rows with verdict CertificateFailed. Rows come back sorted by
    (trial, epsilon) whatever order the workers finish in.
    """
    logger.info(f"Density experiment: {cfg.trials} x {cfg.ensemble}({cfg.dim}), eps={cfg.epsilons}, "
                f"seed={cfg.seed}, workers={workers}")
    jobs = (delayed(_run_trial)(cfg, trial, tol, robust_margin) for trial in range(cfg.trials))
    results = Parallel(n_jobs=workers, return_as="generator")(jobs)
    records = []
    for chunk in tqdm(results, total=cfg.trials, desc="trials", disable=not progress):
        records.extend(chunk)
    records.sort(key=lambda r: (r.trial, r.epsilon))

    failed = [r for r in records if r.verdict == FAILED]
    if failed:
        logger.warning(f"{len(failed)} of {len(records)} rows failed certification")
    return records


def summarize(records: List[TrialRecord]) -> ExperimentSummary:
    total = len(records)
    successes = sum(r.succeeded for r in records)
    initial = {r.trial: r.initially_irreducible for r in records}
    ratios = [r.distance / r.epsilon_abs for r in records if r.succeeded and r.epsilon_abs > 0]
    failures: Dict[str, int] = {}
    for r in records:
        if not r.succeeded:
            failures[r.verdict] = failures.get(r.verdict, 0) + 1
    return ExperimentSummary(
        total=total,
        successes=successes,
        success_fraction=successes / total if total else 0.0,
        initially_irreducible_fraction=sum(initial.values()) / len(initial) if initial else 0.0,
        max_distance_ratio=max(ratios) if ratios else 0.0,
        failures=failures,
    )


def records_frame(records: List[TrialRecord]) -> pd.DataFrame:
    return pd.DataFrame([asdict(r) for r in records], columns=CSV_COLUMNS)


def write_csv(records: List[TrialRecord], path: Union[str, Path]) -> None:
    """CSV with the fixed header; floats at 17 significant digits"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records_frame(records).to_csv(path, index=False, float_format="%.17g", na_rep="nan")
    logger.info(f"Wrote {len(records)} rows to {path}")
