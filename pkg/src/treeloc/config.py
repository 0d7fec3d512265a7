"""Configuration dataclasses and the ``key=value`` config file reader."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Dict, Iterator, Tuple


class ConfigError(ValueError):
    pass


def _is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


@dataclass(frozen=True)
class CoarseConfig:
    """Binning for the tree distribution (TDH) and pairwise distance (PDH) histograms."""

    r_min: float = 0.0
    r_max: float = 20.0
    n_r: int = 10
    w_r: float = 2.0
    d_min: float = 0.05
    d_max: float = 1.0
    n_d: int = 4
    w_d: float = 0.05
    l_min: float = 0.0
    l_max: float = 30.0
    n_bins_pdh: int = 40

    def __post_init__(self):
        if self.n_r * self.n_d != 40:
            raise ConfigError("n_r * n_d must equal 40")
        if self.n_bins_pdh != 40:
            raise ConfigError("n_bins_pdh must equal 40")
        for lo, hi in ((self.r_min, self.r_max), (self.d_min, self.d_max), (self.l_min, self.l_max)):
            if not hi > lo:
                raise ConfigError(f"invalid range [{lo}, {hi}]")
        if self.w_r < 0 or self.w_d < 0:
            raise ConfigError("bin overlaps must be non-negative")

    def scaled(self, factor: float) -> "CoarseConfig":
        """Spatial ranges scaled for wider crops (e.g. 2x for 60 m crops)."""
        return replace(
            self,
            r_min=self.r_min * factor,
            r_max=self.r_max * factor,
            w_r=self.w_r * factor,
            l_min=self.l_min * factor,
            l_max=self.l_max * factor,
        )


@dataclass(frozen=True)
class HashConfig:
    delta_l: float = 0.2
    rho: int = 1000003
    U: int = 2**32 - 5
    m_neighbors: int = 8
    min_side: float = 0.1
    min_area: float = 1e-4

    def __post_init__(self):
        if not self.delta_l > 0:
            raise ConfigError("delta_l must be positive")
        if not _is_prime(int(self.rho)):
            raise ConfigError("rho must be prime")
        if self.U <= 1:
            raise ConfigError("U must exceed 1")
        if self.m_neighbors < 2:
            raise ConfigError("m_neighbors must be >= 2")


@dataclass(frozen=True)
class MatchConfig:
    tau_dbh: float = 0.1
    tau_yaw: float = math.radians(5.0)
    yaw_bins: int = 72
    use_dbh_filter: bool = True
    use_yaw_voting: bool = True

    def __post_init__(self):
        if not (self.tau_dbh > 0 and self.tau_yaw > 0):
            raise ConfigError("match thresholds must be positive")
        if self.yaw_bins < 8:
            raise ConfigError("yaw_bins must be >= 8")


@dataclass(frozen=True)
class PoseConfig:
    tau_d: float = 0.5
    tau_dbh: float = 0.1
    huber_delta: float = 0.3
    irls_iters: int = 10
    ransac_iters: int = 100
    ransac_inlier_angle: float = math.radians(3.0)
    ransac_inlier_height: float = 0.3
    sigma_t: float = 10.0
    use_penalty: bool = True
    seed: int = 0

    def __post_init__(self):
        for name in ("tau_d", "tau_dbh", "huber_delta", "ransac_inlier_angle",
                     "ransac_inlier_height", "sigma_t"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.irls_iters < 1 or self.ransac_iters < 1:
            raise ConfigError("iteration counts must be positive")


@dataclass(frozen=True)
class PipelineConfig:
    coarse: CoarseConfig = field(default_factory=CoarseConfig)
    hash: HashConfig = field(default_factory=HashConfig)
    match: MatchConfig = field(default_factory=MatchConfig)
    pose: PoseConfig = field(default_factory=PoseConfig)
    k_coarse: int = 100
    k_fine: int = 10

    def __post_init__(self):
        if self.k_coarse < 1 or self.k_fine < 1:
            raise ConfigError("candidate counts must be >= 1")

    def items(self) -> Iterator[Tuple[str, object]]:
        """Flattened ``section.key`` items in a fixed order."""
        for section in ("coarse", "hash", "match", "pose"):
            sub = getattr(self, section)
            for f in fields(sub):
                yield f"{section}.{f.name}", getattr(sub, f.name)
        yield "k_coarse", self.k_coarse
        yield "k_fine", self.k_fine

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, pose=replace(self.pose, seed=int(seed)))


def format_value(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _coerce(template, text: str):
    if isinstance(template, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"not a boolean: {text!r}")
    if isinstance(template, int):
        return int(text)
    return float(text)


def config_from_items(items: Dict[str, str], base: PipelineConfig | None = None) -> PipelineConfig:
    """Build a config by overriding ``base`` with flattened string items."""
    base = base or PipelineConfig()
    sections = {s: {} for s in ("coarse", "hash", "match", "pose")}
    top = {}
    known = dict(base.items())
    for key, text in items.items():
        if key not in known:
            raise ConfigError(f"unknown config key: {key}")
        try:
            value = _coerce(known[key], text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key}: {text!r}") from exc
        if "." in key:
            section, name = key.split(".", 1)
            sections[section][name] = value
        else:
            top[key] = value
    return replace(
        base,
        coarse=replace(base.coarse, **sections["coarse"]),
        hash=replace(base.hash, **sections["hash"]),
        match=replace(base.match, **sections["match"]),
        pose=replace(base.pose, **sections["pose"]),
        **top,
    )


def read_key_values(text: str) -> Dict[str, str]:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out: Dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        out[key] = value
    return out
