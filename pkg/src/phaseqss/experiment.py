"""Finite-key analysis of measured detection tallies.

The published per-phase detection counts for the 20, 30 and 35 dB runs ship
with the package (see :func:`load_fixture`).  Only single-detector clicks
were reported for them, so their ``both`` column is zero.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from decimal import ROUND_HALF_UP, Decimal
from importlib import resources
from pathlib import Path
from typing import TextIO

from phaseqss.channel import basis_class_probabilities
from phaseqss.montecarlo import tally_to_stats
from phaseqss.security import (
    KeyResult,
    ObservedStats,
    PhaseErrorChain,
    SecurityEpsilons,
    finite_key_length,
    phase_error_upper_bound,
)
from phaseqss.tally import TallyTable, parse_counts_csv


class AnalysisError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n_total: float = 1e10
    mu: float = 8.6e-4
    p_x: float = 0.8
    epsilons: SecurityEpsilons = field(default_factory=SecurityEpsilons)
    f_e: float = 1.16
    loss_db: float | None = None


@dataclass(frozen=True)
class PublishedRun:
    loss_db: int
    n_total: float
    mu: float
    ebx_percent: str
    eby_percent: str
    n_x: int
    n_y: int
    rate: float


PUBLISHED_RUNS = {
    20: PublishedRun(20, 1e10, 5.8e-3, "0.16", "0.09", 2776599, 315364, 7.51e-5),
    30: PublishedRun(30, 1e10, 1.6e-3, "0.19", "0.09", 239619, 27474, 4.67e-6),
    35: PublishedRun(35, 1e10, 8.6e-4, "0.30", "0.30", 73954, 8346, 8.53e-7),
}


@dataclass(frozen=True)
class ExperimentReport:
    n_x: int
    n_y: int
    m_x: int
    m_y: int
    ebx_observed: float
    eby_observed: float
    q_mu: float
    chain: PhaseErrorChain
    key: KeyResult

    @property
    def stats(self) -> ObservedStats:
        return ObservedStats(self.n_x, self.n_y, self.m_x, self.m_y)

    def as_rows(self) -> list[tuple[str, object]]:
        rows: list[tuple[str, object]] = [
            ("n_x", self.n_x),
            ("n_y", self.n_y),
            ("m_x", self.m_x),
            ("m_y", self.m_y),
            ("ebx_observed", self.ebx_observed),
            ("eby_observed", self.eby_observed),
            ("q_mu", self.q_mu),
        ]
        rows += list(asdict(self.chain).items())
        rows += [
            ("leak_ec_fraction", self.key.leak_ec_fraction),
            ("key_length_bits", self.key.key_length_bits),
            ("rate_per_pulse", self.key.rate_per_pulse),
        ]
        return rows


def percent(rate: float, places: int = 2) -> str:
    """Rate as a percentage string rounded half-up, e.g. 0.0015905 -> '0.16'."""
    quantum = Decimal(1).scaleb(-places)
    return str((Decimal(repr(rate)) * 100).quantize(quantum, rounding=ROUND_HALF_UP))


def observed_gain(n_x: int, n_total: float, p_x: float) -> float:
    """Per-round gain of the key class estimated from its detection count."""
    return n_x / (n_total * basis_class_probabilities(p_x)[0])


def analyze(tally: TallyTable, cfg: ExperimentConfig, seed: int = 0) -> ExperimentReport:
    """Sift a tally and run the finite-key chain on it.

    The gain entering the coin imbalance is estimated from the key-class
    detections, and ``cfg.mu`` (the larger of the two players' intensities)
    enters the state overlap.
    """
    stats = tally_to_stats(tally, seed=seed)
    if stats.n_x == 0 or stats.n_y == 0:
        raise AnalysisError(
            f"no kept detections to analyze (n_x={stats.n_x}, n_y={stats.n_y})"
        )
    q_mu = observed_gain(stats.n_x, cfg.n_total, cfg.p_x)
    chain = phase_error_upper_bound(stats, cfg.mu, q_mu, cfg.epsilons)
    key = finite_key_length(
        stats.n_x, chain.ep_bar, stats.ebx, cfg.f_e, cfg.epsilons, n_total=cfg.n_total
    )
    return ExperimentReport(
        n_x=stats.n_x,
        n_y=stats.n_y,
        m_x=stats.m_x,
        m_y=stats.m_y,
        ebx_observed=stats.ebx,
        eby_observed=stats.eby,
        q_mu=q_mu,
        chain=chain,
        key=key,
    )


def compare_with_published(report: ExperimentReport, loss_db: int, rate_factor: float = 5.0) -> list[tuple[str, bool, str]]:
    """Check a report against the published row; returns ``(check, ok, detail)`` triples."""
    row = PUBLISHED_RUNS[int(loss_db)]
    ebx, eby = percent(report.ebx_observed), percent(report.eby_observed)
    rate = report.key.rate_per_pulse
    ratio = rate / row.rate if row.rate else math.inf
    return [
        ("n_x", report.n_x == row.n_x, f"{report.n_x} vs {row.n_x}"),
        ("n_y", report.n_y == row.n_y, f"{report.n_y} vs {row.n_y}"),
        ("E_b^X %", ebx == row.ebx_percent, f"{ebx} vs {row.ebx_percent}"),
        ("E_b^Y %", eby == row.eby_percent, f"{eby} vs {row.eby_percent}"),
        ("R", 1 / rate_factor <= ratio <= rate_factor, f"{rate:.3e} vs {row.rate:.3e} (x{ratio:.3f})"),
    ]


def fixture_path(loss_db: int) -> Path:
    ref = resources.files("phaseqss") / "data" / f"counts_{int(loss_db)}db.csv"
    return Path(str(ref))


def load_fixture(loss_db: int) -> TallyTable:
    with open(fixture_path(loss_db), encoding="utf-8") as fh:
        return parse_counts_csv(fh)


def published_config(loss_db: int) -> ExperimentConfig:
    row = PUBLISHED_RUNS[int(loss_db)]
    return ExperimentConfig(n_total=row.n_total, mu=row.mu, p_x=0.8, loss_db=row.loss_db)


def read_key_values(stream: TextIO) -> dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(stream, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("_", "-")] = value
    return out


_CONFIG_KEYS = {"n", "mu", "px", "fe", "loss-db", "eps-c", "eps-pa", "eps", "eps-a"}


def experiment_config_from_mapping(values: dict[str, str]) -> ExperimentConfig:
    unknown = set(values) - _CONFIG_KEYS
    if unknown:
        raise ValueError(f"unknown experiment config keys: {sorted(unknown)}")
    eps = SecurityEpsilons(
        eps_c=float(values.get("eps-c", 1e-10)),
        eps_pa=float(values.get("eps-pa", 1e-10)),
        eps=float(values.get("eps", 1e-10)),
        eps_a=float(values.get("eps-a", 1e-10)),
    )
    loss = values.get("loss-db")
    return ExperimentConfig(
        n_total=float(values.get("n", 1e10)),
        mu=float(values.get("mu", 8.6e-4)),
        p_x=float(values.get("px", 0.8)),
        epsilons=eps,
        f_e=float(values.get("fe", 1.16)),
        loss_db=float(loss) if loss is not None else None,
    )
