"""Model parameter document consumed by the synthesis module."""

from __future__ import annotations

from dataclasses import dataclass, field

from .distributions import frozen
from .errors import InvalidArgumentError
from .inter import DELAY_INDEX_FIT, POWER_DELAY_FIT, DoubleExponentialFit, OccurrenceModel


@dataclass(frozen=True)
class ModelParameters:
    """Cluster-level model: every distribution is ``(family, params)`` in the
    convention of :mod:`agchan.distributions`."""

    cluster_count_db: tuple = (5.19, 1.46)
    cluster_count_silhouette: tuple = (6.61, 2.07)
    survival_length: tuple = (7.11, 1.47)
    occurrence: OccurrenceModel = field(default_factory=OccurrenceModel)
    rays_per_cluster_db: float = 9.44
    rays_per_cluster_silhouette: float = 7.41
    ray_unit_area: tuple = (25.75, 1.46)
    cluster_kf: tuple = (-8.68, 5.09)
    cluster_rms_ds: tuple = (1.87, 0.88)
    intra_decay: tuple = (0.55, 1.21)
    delay_offset: tuple = (0.0, 9.243)
    delay_index_fit: DoubleExponentialFit = DELAY_INDEX_FIT
    power_delay_fit: DoubleExponentialFit = POWER_DELAY_FIT

    FAMILIES = {
        "cluster_count_db": "normal",
        "cluster_count_silhouette": "normal",
        "survival_length": "weibull",
        "ray_unit_area": "weibull",
        "cluster_kf": "normal",
        "cluster_rms_ds": "lognormal",
        "intra_decay": "weibull",
        "delay_offset": "laplace",
    }

    def __post_init__(self):
        for name, fam in self.FAMILIES.items():
            p = tuple(float(v) for v in getattr(self, name))
            if len(p) != 2:
                raise InvalidArgumentError(f"{name} needs two parameters")
            if fam in ("weibull",) and (p[0] <= 0 or p[1] <= 0):
                raise InvalidArgumentError(f"{name}: Weibull scale and shape must be > 0")
            if fam in ("lognormal", "laplace") and p[1] <= 0:
                raise InvalidArgumentError(f"{name}: scale must be > 0")
            if fam == "normal" and p[1] < 0:
                raise InvalidArgumentError(f"{name}: sigma must be >= 0")
            object.__setattr__(self, name, p)
        for name in ("rays_per_cluster_db", "rays_per_cluster_silhouette"):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be > 0")

    def dist(self, name: str):
        return frozen(self.FAMILIES[name], getattr(self, name))

    def cluster_count(self, criterion: str = "db") -> tuple:
        if criterion not in ("db", "silhouette"):
            raise InvalidArgumentError(f"unknown criterion {criterion!r}")
        return self.cluster_count_db if criterion == "db" else self.cluster_count_silhouette

    def rays_per_cluster(self, criterion: str = "db") -> float:
        if criterion not in ("db", "silhouette"):
            raise InvalidArgumentError(f"unknown criterion {criterion!r}")
        return self.rays_per_cluster_db if criterion == "db" else self.rays_per_cluster_silhouette

    def table(self) -> list:
        """Rows of (name, family, params)."""
        rows = [(n, f, list(getattr(self, n))) for n, f in self.FAMILIES.items()]
        rows.append(("rays_per_cluster_db", "mean", [self.rays_per_cluster_db]))
        rows.append(("rays_per_cluster_silhouette", "mean", [self.rays_per_cluster_silhouette]))
        return rows

    def to_dict(self) -> dict:
        d = {n: {"family": f, "params": list(getattr(self, n))} for n, f in self.FAMILIES.items()}
        d["rays_per_cluster_db"] = self.rays_per_cluster_db
        d["rays_per_cluster_silhouette"] = self.rays_per_cluster_silhouette
        d["occurrence"] = self.occurrence.to_dict()
        d["delay_index_fit"] = self.delay_index_fit.to_dict()
        d["power_delay_fit"] = self.power_delay_fit.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelParameters":
        kw = {}
        for n, fam in cls.FAMILIES.items():
            entry = d[n]
            if entry["family"] != fam:
                raise InvalidArgumentError(f"{n}: expected family {fam!r}, got {entry['family']!r}")
            kw[n] = tuple(float(v) for v in entry["params"])
        kw["rays_per_cluster_db"] = float(d["rays_per_cluster_db"])
        kw["rays_per_cluster_silhouette"] = float(d["rays_per_cluster_silhouette"])
        kw["occurrence"] = OccurrenceModel.from_dict(d["occurrence"])
        kw["delay_index_fit"] = DoubleExponentialFit.from_dict(d["delay_index_fit"])
        kw["power_delay_fit"] = DoubleExponentialFit.from_dict(d["power_delay_fit"])
        return cls(**kw)


DEFAULT_PARAMETERS = ModelParameters()
