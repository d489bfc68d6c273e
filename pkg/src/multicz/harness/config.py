"""Campaign configuration: JSON documents mapped onto ``CampaignConfig``."""
from __future__ import annotations

import copy
import json
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

__all__ = ["ConfigError", "CampaignConfig", "CHECK_IDS", "default_config", "load_config"]


class ConfigError(ValueError):
    pass


CHECK_IDS = (
    "strong",
    "weak",
    "commutator",
    "maximal:frak-strong",
    "maximal:loc-strong",
    "maximal:loc-weak",
    "maximal:scalar-loc",
    "fs-local",
    "fs-local-weak",
    "pointwise:P-critical",
    "pointwise:P-sharp",
    "pointwise:P-critical-comm",
    "pointwise:P-sharp-comm",
)

FAMILY_KINDS = ("gaussian-packet", "trig-band", "bump-train")


def _default_weights():
    return [
        {"eps0": 0.1, "x0": 1.0, "a": 0.3, "b": 0.0},
        {"eps0": 0.1, "x0": -1.0, "a": -0.3, "b": 0.0},
    ]


@dataclass
class CampaignConfig:
    """Every free parameter of a campaign.

    ``maximal`` holds ``kappa, N, Kmax`` (the critical maximal function),
    ``alpha`` (radius cap of the local maximal functions), ``beta`` (the
    Fefferman-Stein cap), ``delta`` (pointwise exponent, ``< 1/m``), ``s_sharp``
    (inner exponent of the sharp-commutator bound, in ``(delta, 1/m)``) and
    ``p_inner`` (the ``p > 1`` of the commutator bounds).
    """

    grid: dict = field(default_factory=lambda: {"n": 1, "L": 8.0, "G": 128})
    m: int = 2
    exponents: list = field(default_factory=lambda: [2.0, 2.0])
    weak_exponents: list = field(default_factory=lambda: [1.0, 1.0])
    s: float = 1.0
    weights: list = field(default_factory=_default_weights)
    weak_weights: list | None = None
    operator: dict = field(default_factory=lambda: {"kind": "kernel", "name": "model", "scale": 1.0})
    symbols: list = field(default_factory=lambda: [{"kind": "linear", "slope": 1.0}, {"kind": "log", "eps": 0.1}])
    maximal: dict = field(default_factory=lambda: {
        "kappa": 1.0, "N": None, "Kmax": None, "alpha": 4.0, "beta": 1.0,
        "delta": 0.25, "s_sharp": 0.4, "p_inner": 2.0,
    })
    family: dict = field(default_factory=lambda: {"kind": "gaussian-packet", "count": 20})
    seed: int = 0
    checks: list = field(default_factory=list)
    tolerances: dict = field(default_factory=lambda: {"refine_low": 0.5, "refine_high": 2.0, "zero": 1e-12, "refine": 2})
    output: str | None = None

    # ------------------------------------------------------------ helpers
    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "CampaignConfig":
        base = cls()
        known = set(base.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        out = copy.deepcopy(base)
        for k, v in d.items():
            cur = getattr(out, k)
            if isinstance(cur, dict) and isinstance(v, dict):
                merged = dict(cur)
                merged.update(v)
                setattr(out, k, merged)
            else:
                setattr(out, k, copy.deepcopy(v))
        out.validate()
        return out

    def check_list(self) -> list[dict]:
        """Normalized checks (``{"id": ..., **overrides}``) with duplicates dropped."""
        seen, out = set(), []
        for c in self.checks:
            item = {"id": c} if isinstance(c, str) else dict(c)
            cid = item.get("id")
            if cid not in CHECK_IDS:
                raise ConfigError(f"unknown check id {cid!r}")
            key = json.dumps(item, sort_keys=True)
            if key in seen:
                warnings.warn(f"duplicate check {cid!r} dropped", stacklevel=2)
                continue
            seen.add(key)
            out.append(item)
        return out

    def validate(self) -> None:
        g = self.grid
        try:
            n, L, G = int(g["n"]), float(g["L"]), int(g["G"])
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"grid needs n, L, G: {e}") from None
        if n not in (1, 2) or L <= 0 or G < 16 or G & (G - 1):
            raise ConfigError("grid must have n in {1,2}, L > 0 and G a power of two >= 16")
        if self.m not in (1, 2):
            raise ConfigError("m must be 1 or 2")
        for name in ("exponents", "weak_exponents"):
            ps = getattr(self, name)
            if len(ps) != self.m or any(float(p) < 1 for p in ps):
                raise ConfigError(f"{name} must list {self.m} values >= 1")
        if any(float(p) == 1.0 for p in self.exponents):
            raise ConfigError("strong exponents must all exceed 1")
        if not any(float(p) == 1.0 for p in self.weak_exponents):
            raise ConfigError("weak exponents need at least one entry equal to 1")
        if len(self.weights) != self.m:
            raise ConfigError(f"need {self.m} weight recipes")
        if self.weak_weights is not None and len(self.weak_weights) != self.m:
            raise ConfigError(f"need {self.m} weak weight recipes")
        if len(self.symbols) != self.m:
            raise ConfigError(f"need {self.m} symbol recipes")
        mx = self.maximal
        delta = float(mx["delta"])
        if not 0 < delta < 1.0 / self.m:
            raise ConfigError("delta must satisfy 0 < delta < 1/m")
        if not delta < float(mx["s_sharp"]) < 1.0 / self.m:
            raise ConfigError("s_sharp must satisfy delta < s_sharp < 1/m")
        if not float(mx["p_inner"]) > 1:
            raise ConfigError("p_inner must exceed 1")
        if float(mx["kappa"]) < 1 or float(mx["alpha"]) <= 0 or float(mx["beta"]) <= 0:
            raise ConfigError("need kappa >= 1, alpha > 0, beta > 0")
        if not float(self.s) > 0:
            raise ConfigError("s must be positive")
        if self.operator.get("kind") not in ("kernel", "symbol"):
            raise ConfigError("operator.kind must be 'kernel' or 'symbol'")
        fam = self.family
        if fam.get("kind") not in FAMILY_KINDS or int(fam.get("count", 0)) < 1:
            raise ConfigError(f"family.kind must be one of {FAMILY_KINDS} with count >= 1")
        if int(self.seed) < 0 or int(self.seed) >= 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if int(self.tolerances.get("refine", 2)) < 2:
            raise ConfigError("refinement factor must be >= 2")
        self.check_list()


def default_config(**overrides) -> CampaignConfig:
    return CampaignConfig.from_dict(overrides)


def load_config(path) -> CampaignConfig:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return CampaignConfig.from_dict(data)
