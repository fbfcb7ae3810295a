"""Experiment configuration and machine-readable reports.

Configs are strict JSON: unknown fields are rejected, the seed is mandatory
(no wall-clock seeding — every reported number must be replayable), and the
config hash identifies a configuration across report merges.  Report values
are bit-for-bit deterministic for a fixed (config, seed); the recorded
runtime is explicitly outside that contract.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field

__all__ = [
    "ExperimentConfig",
    "CheckResult",
    "Report",
    "STATUSES",
]

STATUSES = ("pass", "fail", "flagged")


@dataclass(frozen=True)
class ExperimentConfig:
    """Inputs of a verification or simulation run.

    ``driver`` and ``integrand`` are optional JSON payloads (the serialized
    forms used by the driver and modular modules); checks that build their own
    batteries ignore them.  Budgets: ``n_mc`` Monte Carlo replicas for law
    estimates, ``mc_samples`` replicas per mesh for partition estimators,
    ``gamma_search`` random candidates in the contraction-supremum search,
    ``l_search`` evaluations in the drift-supremum search.
    """

    seed: int
    d_g: int = 8
    d_h: int = 8
    n_mc: int = 10000
    mc_samples: int = 2000
    gamma_search: int = 24
    l_search: int = 60
    driver: dict | None = None
    integrand: dict | None = None
    n_paths: int = 1000
    mesh_exponent: int = 6
    span: tuple = (0.0, 1.0)
    out_dir: str | None = None

    def __post_init__(self):
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise ValueError("seed must be an integer (wall-clock seeding is not allowed)")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")
        for name in ("n_mc", "mc_samples", "gamma_search", "l_search", "n_paths"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.d_g <= 0 or self.d_h <= 0:
            raise ValueError("dimensions must be positive")
        span = tuple(float(x) for x in self.span)
        if len(span) != 2 or not span[0] < span[1]:
            raise ValueError("span must be an increasing pair")
        object.__setattr__(self, "span", span)

    @classmethod
    def from_payload(cls, obj: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown config fields: {sorted(extra)}")
        if "seed" not in obj:
            raise ValueError("config requires an explicit seed")
        return cls(**obj)

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_payload(json.load(fh))

    def to_payload(self) -> dict:
        d = asdict(self)
        d["span"] = list(self.span)
        return d

    def with_seed(self, seed: int) -> "ExperimentConfig":
        d = self.to_payload()
        d["seed"] = seed
        return ExperimentConfig.from_payload(d)

    def config_hash(self) -> str:
        """Stable digest of everything that affects reported values (the
        output directory is plumbing and excluded)."""
        d = self.to_payload()
        d.pop("out_dir")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class CheckResult:
    """One verification outcome: measured values against their tolerances.

    ``anchor`` names the statement being verified in plain words.  ``margin``
    is the worst-case slack of the passed comparisons (nonnegative whenever
    the status is ``pass``); ``flagged`` marks statistically unreliable runs
    that should not fail a battery.
    """

    name: str
    anchor: str
    status: str
    margin: float
    values: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    stderrs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.status not in STATUSES:
            raise ValueError(f"status must be one of {STATUSES}")
        if not self.anchor:
            raise ValueError("every check carries a statement anchor")
        if self.status == "pass" and not self.margin >= 0.0:
            raise ValueError("a passing check needs a nonnegative margin")

    def to_payload(self) -> dict:
        return {
            "name": self.name,
            "anchor": self.anchor,
            "status": self.status,
            "margin": self.margin,
            "values": dict(self.values),
            "tolerances": dict(self.tolerances),
            "stderrs": dict(self.stderrs),
        }

    @classmethod
    def from_payload(cls, obj: dict) -> "CheckResult":
        extra = set(obj) - {"name", "anchor", "status", "margin", "values", "tolerances", "stderrs"}
        if extra:
            raise ValueError(f"unknown check fields: {sorted(extra)}")
        return cls(
            name=obj["name"],
            anchor=obj["anchor"],
            status=obj["status"],
            margin=float(obj["margin"]),
            values=dict(obj.get("values", {})),
            tolerances=dict(obj.get("tolerances", {})),
            stderrs=dict(obj.get("stderrs", {})),
        )


@dataclass(frozen=True)
class Report:
    """A batch of check results under one configuration."""

    results: tuple
    seed: int
    config_hash: str
    runtime_s: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "results", tuple(self.results))

    @property
    def n_failures(self) -> int:
        return sum(1 for r in self.results if r.status == "fail")

    @property
    def n_flagged(self) -> int:
        return sum(1 for r in self.results if r.status == "flagged")

    def to_payload(self) -> dict:
        return {
            "results": [r.to_payload() for r in self.results],
            "seed": self.seed,
            "config_hash": self.config_hash,
            "runtime_s": self.runtime_s,
        }

    @classmethod
    def from_payload(cls, obj: dict) -> "Report":
        extra = set(obj) - {"results", "seed", "config_hash", "runtime_s"}
        if extra:
            raise ValueError(f"unknown report fields: {sorted(extra)}")
        return cls(
            results=tuple(CheckResult.from_payload(r) for r in obj["results"]),
            seed=int(obj["seed"]),
            config_hash=obj["config_hash"],
            runtime_s=float(obj.get("runtime_s", 0.0)),
        )

    def save(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_payload(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "Report":
        with open(path) as fh:
            return cls.from_payload(json.load(fh))


def merge_reports(entries: list[tuple[Report, float]]) -> list[dict]:
    """Flatten reports into one summary row per (check, config hash).

    ``entries`` pairs each report with a timestamp (file modification time);
    duplicate (check, config) rows keep the latest timestamp.  Rows come back
    in stable order: by check name, then config hash.
    """
    rows: dict[tuple[str, str], dict] = {}
    for report, stamp in entries:
        for r in report.results:
            key = (r.name, report.config_hash)
            if key in rows and rows[key]["_stamp"] >= stamp:
                continue
            rows[key] = {
                "check": r.name,
                "config_hash": report.config_hash,
                "status": r.status,
                "margin": r.margin,
                "anchor": r.anchor,
                "seed": report.seed,
                "_stamp": stamp,
            }
    out = [rows[k] for k in sorted(rows)]
    for row in out:
        row.pop("_stamp")
    return out
