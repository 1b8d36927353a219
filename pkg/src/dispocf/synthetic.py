"""Seeded synthetic rating populations for desk-scale experiments.

Each population has its own rating level, noise spread, left skew and its own
item taste (a per-population item effect).  Ratings are drawn as

    level + user offset + item effect[population] + noise

where the noise is a normal truncated so the rating stays inside [0.5, 5.0];
with probability ``negative_skew`` the noise is forced below zero.  The value
is then snapped to the half-star grid.

Config files are INI::

    [synthetic]
    n_items = 400
    seed = 7

    [population.optimistic]
    n_users = 200
    items_min = 30
    items_max = 60
    mean = 4.0
    spread = 0.6
    negative_skew = 0.0
    ; optional: item_effect_sd = 0.8, user_offset_sd = 0.25
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import stats

from .ratings import Dataset, DatasetError

__all__ = ["PopulationSpec", "SyntheticConfig", "generate_synthetic", "two_population_config",
           "load_synthetic_config", "dump_synthetic_config"]


@dataclass(frozen=True)
class PopulationSpec:
    name: str
    n_users: int
    items_min: int
    items_max: int
    mean: float
    spread: float
    negative_skew: float = 0.0
    item_effect_sd: float = 0.8
    user_offset_sd: float = 0.25

    def validate(self) -> list[str]:
        errs = []
        if self.n_users < 1:
            errs.append(f"{self.name}: n_users must be positive")
        if not 1 <= self.items_min <= self.items_max:
            errs.append(f"{self.name}: need 1 <= items_min <= items_max")
        if not 0.5 <= self.mean <= 5.0:
            errs.append(f"{self.name}: mean must lie in [0.5, 5.0]")
        if self.spread <= 0:
            errs.append(f"{self.name}: spread must be positive")
        if not 0.0 <= self.negative_skew <= 1.0:
            errs.append(f"{self.name}: negative_skew must lie in [0, 1]")
        if self.item_effect_sd < 0 or self.user_offset_sd < 0:
            errs.append(f"{self.name}: effect spreads must be non-negative")
        return errs


@dataclass(frozen=True)
class SyntheticConfig:
    populations: tuple[PopulationSpec, ...]
    n_items: int
    seed: int
    extra: dict = field(default_factory=dict, compare=False)

    def validate(self) -> list[str]:
        errs = []
        if not self.populations:
            errs.append("at least one population is required")
        if self.n_items < 1:
            errs.append("n_items must be positive")
        names = [p.name for p in self.populations]
        if len(set(names)) != len(names):
            errs.append("population names must be unique")
        for p in self.populations:
            errs.extend(p.validate())
        return errs


def two_population_config(n_users: int = 200, n_items: int = 400, seed: int = 0,
                          optimistic_mean: float = 4.0, pessimistic_mean: float = 2.5,
                          items_min: int = 30, items_max: int = 60) -> SyntheticConfig:
    """The optimistic/pessimistic pair used by the desk-scale acceptance run.

    The optimistic population is kept tight enough that a 30% negative-share
    cut recovers it almost exactly; the pessimistic one is wider and
    left-skewed.  The two populations have unrelated item tastes.
    """
    return SyntheticConfig(
        populations=(
            PopulationSpec("optimistic", n_users, items_min, items_max, optimistic_mean,
                           spread=0.4, negative_skew=0.0, item_effect_sd=0.4, user_offset_sd=0.15),
            PopulationSpec("pessimistic", n_users, items_min, items_max, pessimistic_mean,
                           spread=0.8, negative_skew=0.3, item_effect_sd=0.8, user_offset_sd=0.25),
        ),
        n_items=n_items,
        seed=seed,
    )


def _noise(rng: np.random.Generator, loc: np.ndarray, spread: float, skew: float) -> np.ndarray:
    # truncated so that loc + noise stays in [0.25, 5.25), which snaps into [0.5, 5.0]
    lo = (0.25 - loc) / spread
    hi = (5.25 - loc) / spread
    neg = rng.random(len(loc)) < skew
    hi = np.where(neg, np.minimum(hi, 0.0), hi)
    lo = np.minimum(lo, hi - 1e-9)
    u = rng.random(len(loc))
    z = stats.truncnorm.ppf(u, lo, hi)
    return z * spread


def generate_synthetic(cfg: SyntheticConfig) -> Dataset:
    """Draw a :class:`Dataset` from ``cfg``; deterministic per ``cfg.seed``."""
    errs = cfg.validate()
    if errs:
        raise DatasetError("; ".join(errs))
    for p in cfg.populations:
        if p.items_max > cfg.n_items:
            raise DatasetError(f"{p.name}: items_max {p.items_max} exceeds catalog size {cfg.n_items}")

    root = np.random.SeedSequence(cfg.seed)
    users: list[str] = []
    items: list[str] = []
    values: list[np.ndarray] = []
    width = len(str(sum(p.n_users for p in cfg.populations)))
    item_names = np.array([f"i{k:0{len(str(cfg.n_items))}d}" for k in range(cfg.n_items)])
    uid = 0
    for pop, ss in zip(cfg.populations, root.spawn(len(cfg.populations))):
        rng = np.random.default_rng(ss)
        item_effect = rng.normal(0.0, pop.item_effect_sd, cfg.n_items)
        for _ in range(pop.n_users):
            n = int(rng.integers(pop.items_min, pop.items_max + 1))
            chosen = rng.choice(cfg.n_items, size=n, replace=False)
            offset = rng.normal(0.0, pop.user_offset_sd)
            loc = np.clip(pop.mean + offset + item_effect[chosen], 0.5, 5.0)
            raw = loc + _noise(rng, loc, pop.spread, pop.negative_skew)
            snapped = np.clip(np.round(raw * 2.0) / 2.0, 0.5, 5.0)
            name = f"u{uid:0{width}d}"
            users.extend([name] * n)
            items.extend(item_names[chosen])
            values.append(snapped)
            uid += 1
    return Dataset(users, items, np.concatenate(values))


def population_of(cfg: SyntheticConfig) -> dict[str, str]:
    """Map generated user id -> population name."""
    width = len(str(sum(p.n_users for p in cfg.populations)))
    out: dict[str, str] = {}
    uid = 0
    for p in cfg.populations:
        for _ in range(p.n_users):
            out[f"u{uid:0{width}d}"] = p.name
            uid += 1
    return out


_POP_FLOATS = ("mean", "spread", "negative_skew", "item_effect_sd", "user_offset_sd")
_POP_INTS = ("n_users", "items_min", "items_max")


def load_synthetic_config(source: str | Path | configparser.ConfigParser) -> SyntheticConfig:
    if isinstance(source, configparser.ConfigParser):
        cp = source
    else:
        cp = configparser.ConfigParser()
        if not cp.read(source):
            raise DatasetError(f"cannot read synthetic config {source}")
    errs: list[str] = []
    if not cp.has_section("synthetic"):
        raise DatasetError("synthetic config needs a [synthetic] section")
    sec = cp["synthetic"]
    pops = []
    for name in cp.sections():
        if not name.startswith("population."):
            continue
        s = cp[name]
        kw = {}
        try:
            for key in _POP_INTS:
                kw[key] = s.getint(key)
            for key in _POP_FLOATS:
                if key in s:
                    kw[key] = s.getfloat(key)
        except ValueError as exc:
            errs.append(f"[{name}] {exc}")
            continue
        missing = [k for k in (*_POP_INTS, "mean", "spread") if kw.get(k) is None]
        if missing:
            errs.append(f"[{name}] missing keys: {', '.join(missing)}")
            continue
        pops.append(PopulationSpec(name=name.split(".", 1)[1], **kw))
    try:
        cfg = SyntheticConfig(tuple(pops), sec.getint("n_items", 400), sec.getint("seed", 0))
    except ValueError as exc:
        errs.append(f"[synthetic] {exc}")
        cfg = None
    if cfg is not None:
        errs.extend(cfg.validate())
    if errs:
        raise DatasetError("; ".join(errs))
    return cfg


def dump_synthetic_config(cfg: SyntheticConfig) -> str:
    lines = ["[synthetic]", f"n_items = {cfg.n_items}", f"seed = {cfg.seed}", ""]
    for p in cfg.populations:
        lines.append(f"[population.{p.name}]")
        for key in (*_POP_INTS, *_POP_FLOATS):
            lines.append(f"{key} = {getattr(p, key)}")
        lines.append("")
    return "\n".join(lines)
