"""Seeded synthetic community of couples and its phone event log.

Every magnitude here is a generator knob, not an empirical fact.  Effect
directions follow what was reported for the real community (e.g. parents
miss more calls); sizes are chosen so that prediction tasks are learnable
but not trivial, which makes accuracy grow gradually as days accumulate.

Config files use INI syntax::

    [community]
    n_couples = 70
    days = 30
    seed = 20101101
    partner_proximity_boost = 5
    ethnic_sms_homophily = 4

    [ethnicity_weights]
    asian = 0.3
    white = 0.5
    middle_eastern = 0.2

    [attribute_priors]        ; P(attribute is true); "female" for gender
    [unknown_rates]           ; P(attribute hidden in the profiles file)
    [rates]                   ; base daily rate per rate key
    [effects]                 ; attribute:value:rate_key = factor
    gender:female:search = 0.6
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .data_model import SECONDS_PER_DAY, EventLog, EventRecord, ParticipantProfile

RATE_KEYS = (
    "call_incoming",
    "call_outgoing",
    "call_missed",
    "sms_incoming",
    "sms_outgoing",
    "bluetooth",
    "wifi",
    "cell",
    "app_install",
    "app_uninstall",
    "running_apps",
    "alarm_set",
    "alarm_snooze",
    "search",
    "bookmark",
)

DEFAULT_RATES = {
    "call_incoming": 2.0,
    "call_outgoing": 2.0,
    "call_missed": 0.6,
    "sms_incoming": 3.0,
    "sms_outgoing": 3.0,
    "bluetooth": 30.0,
    "wifi": 8.0,
    "cell": 8.0,
    "app_install": 0.4,
    "app_uninstall": 0.15,
    "running_apps": 12.0,
    "alarm_set": 0.8,
    "alarm_snooze": 0.5,
    "search": 3.0,
    "bookmark": 0.3,
}

# (attribute, value, rate key) -> multiplicative factor
DEFAULT_EFFECTS: dict[tuple[str, object, str], float] = {
    ("gender", "female", "search"): 0.6,
    ("us_native", False, "sms_incoming"): 0.5,
    ("us_native", False, "sms_outgoing"): 0.5,
    ("has_children", True, "call_missed"): 1.8,
    ("has_children", True, "app_install"): 0.6,
    ("age_over_30", True, "search"): 0.7,
    ("is_student", True, "running_apps"): 1.3,
}

DEFAULT_PRIORS = {"female": 0.5, "age_over_30": 0.43, "has_children": 0.5, "is_student": 0.5, "us_native": 0.6}
DEFAULT_UNKNOWN = {
    "gender": 0.1,
    "age_over_30": 0.1,
    "has_children": 0.1,
    "is_student": 0.1,
    "us_native": 0.1,
    "ethnicity": 0.05,
}
DEFAULT_SEED = 20101101
N_APPS = 80
N_CAMPUS_PLACES = 10


class ConfigError(ValueError):
    pass


@dataclass
class CommunityConfig:
    n_couples: int = 70
    days: int = 30
    seed: int = DEFAULT_SEED
    ethnicity_weights: dict[str, float] = field(
        default_factory=lambda: {"asian": 0.3, "white": 0.5, "middle_eastern": 0.2}
    )
    attribute_priors: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_PRIORS))
    unknown_rates: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_UNKNOWN))
    rate_table: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_RATES))
    effect_table: dict[tuple[str, object, str], float] = field(default_factory=lambda: dict(DEFAULT_EFFECTS))
    partner_proximity_boost: float = 5.0
    ethnic_sms_homophily: float = 4.0
    couple_same_ethnicity: float = 0.8
    out_of_study_fraction: float = 0.1
    sms_contacts: int = 6
    individual_sd: float = 0.25

    def validate(self) -> "CommunityConfig":
        if self.n_couples < 1:
            raise ConfigError("n_couples must be >= 1")
        if self.days < 1:
            raise ConfigError("days must be >= 1")
        w = self.ethnicity_weights
        if not w or any(not (math.isfinite(p) and p >= 0) for p in w.values()):
            raise ConfigError("ethnicity weights must be non-negative and finite")
        if abs(sum(w.values()) - 1.0) > 1e-9:
            raise ConfigError(f"ethnicity weights sum to {sum(w.values())}, not 1")
        for name, table in (("attribute_priors", self.attribute_priors), ("unknown_rates", self.unknown_rates)):
            for k, p in table.items():
                if not 0.0 <= p <= 1.0:
                    raise ConfigError(f"{name}[{k}] = {p} is not a probability")
        for key in DEFAULT_PRIORS:
            if key not in self.attribute_priors:
                raise ConfigError(f"attribute_priors lacks {key!r}")
        for k, r in self.rate_table.items():
            if k not in RATE_KEYS:
                raise ConfigError(f"unknown rate key {k!r}")
            if not (math.isfinite(r) and 0 <= r < 500):
                raise ConfigError(f"rate {k} = {r} must be finite, >= 0 and < 500")
        for (attr, _val, key), f in self.effect_table.items():
            if key not in RATE_KEYS:
                raise ConfigError(f"effect on unknown rate key {key!r}")
            if attr not in ("gender", "age_over_30", "has_children", "is_student", "us_native", "ethnicity"):
                raise ConfigError(f"effect on unknown attribute {attr!r}")
            if not (math.isfinite(f) and f > 0):
                raise ConfigError(f"effect factor must be positive, got {f}")
        if self.partner_proximity_boost < 1 or self.ethnic_sms_homophily < 1:
            raise ConfigError("boost and homophily factors must be >= 1")
        for name in ("couple_same_ethnicity", "out_of_study_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be a probability")
        if self.sms_contacts < 1 or self.individual_sd < 0:
            raise ConfigError("sms_contacts must be >= 1 and individual_sd >= 0")
        return self

    def with_overrides(self, **kw) -> "CommunityConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_SCALAR_FIELDS = {
    f.name: f.type
    for f in fields(CommunityConfig)
    if f.name not in ("ethnicity_weights", "attribute_priors", "unknown_rates", "rate_table", "effect_table")
}


def _parse_value(text: str):
    t = text.strip()
    low = t.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return float(t)
    except ValueError:
        return t


def load_config(path: str | Path) -> CommunityConfig:
    """Read an INI community config; unspecified values keep their defaults."""
    cp = configparser.ConfigParser(delimiters=("=",), inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    if not cp.read(path, encoding="utf-8"):
        raise ConfigError(f"cannot read config {path}")
    cfg = CommunityConfig()
    kw: dict = {}
    if cp.has_section("community"):
        for k, v in cp.items("community"):
            if k not in _SCALAR_FIELDS:
                raise ConfigError(f"unknown [community] key {k!r}")
            kw[k] = int(v) if k in ("n_couples", "days", "seed", "sms_contacts") else float(v)
    if cp.has_section("ethnicity_weights"):
        kw["ethnicity_weights"] = {k: float(v) for k, v in cp.items("ethnicity_weights")}
    if cp.has_section("attribute_priors"):
        kw["attribute_priors"] = {**cfg.attribute_priors, **{k: float(v) for k, v in cp.items("attribute_priors")}}
    if cp.has_section("unknown_rates"):
        kw["unknown_rates"] = {**cfg.unknown_rates, **{k: float(v) for k, v in cp.items("unknown_rates")}}
    if cp.has_section("rates"):
        kw["rate_table"] = {**cfg.rate_table, **{k: float(v) for k, v in cp.items("rates")}}
    if cp.has_section("effects"):
        effects = {}
        for k, v in cp.items("effects"):
            parts = k.split(":")
            if len(parts) != 3:
                raise ConfigError(f"effect key {k!r} must be attribute:value:rate_key")
            attr, val, key = parts
            effects[(attr, _parse_value(val), key)] = float(v)
        kw["effect_table"] = effects
    return replace(cfg, **kw).validate()


# --------------------------------------------------------------------------- community


@dataclass
class SyntheticCommunity:
    profiles: dict[str, ParticipantProfile]  # as published, unknowns masked
    true_profiles: dict[str, ParticipantProfile]
    behavior: dict[str, dict[str, float]]  # realized daily rate per rate key
    contacts: dict[str, list[str]]  # in-study SMS/call contacts
    outside_contacts: dict[str, list[str]]
    devices_outside: list[str]
    places: dict[str, dict[str, list[str]]]


def participant_ids(n_couples: int) -> list[str]:
    width = max(3, len(str(2 * n_couples)))
    return [f"p{i:0{width}d}" for i in range(1, 2 * n_couples + 1)]


def _hash_id(prefix: str, rng: np.random.Generator) -> str:
    return prefix + "".join(f"{b:02x}" for b in rng.integers(0, 256, 6).tolist())


def _attribute_value(prof: ParticipantProfile, attr: str):
    return getattr(prof, attr)


def generate_community(cfg: CommunityConfig) -> SyntheticCommunity:
    cfg.validate()
    rng = np.random.default_rng([cfg.seed, 0])
    ids = participant_ids(cfg.n_couples)
    labels = sorted(cfg.ethnicity_weights)
    weights = np.array([cfg.ethnicity_weights[k] for k in labels])
    pri = cfg.attribute_priors

    true: dict[str, ParticipantProfile] = {}
    for c in range(cfg.n_couples):
        a, b = ids[2 * c], ids[2 * c + 1]
        eth_a = labels[rng.choice(len(labels), p=weights)]
        if rng.random() < cfg.couple_same_ethnicity:
            eth_b = eth_a
        else:
            eth_b = labels[rng.choice(len(labels), p=weights)]
        children = bool(rng.random() < pri["has_children"])
        for pid, partner, eth in ((a, b, eth_a), (b, a, eth_b)):
            true[pid] = ParticipantProfile(
                pid,
                gender="female" if rng.random() < pri["female"] else "male",
                age_over_30=bool(rng.random() < pri["age_over_30"]),
                has_children=children,
                is_student=bool(rng.random() < pri["is_student"]),
                us_native=bool(rng.random() < pri["us_native"]),
                ethnicity=eth,
                partner=partner,
            )

    published = {}
    for pid in ids:
        prof = true[pid]
        masked = {
            attr: None
            for attr, p in sorted(cfg.unknown_rates.items())
            if attr not in ("partner",) and rng.random() < p
        }
        published[pid] = replace(prof, **masked)

    behavior = {}
    for pid in ids:
        prof = true[pid]
        rates = {}
        for key in RATE_KEYS:
            r = cfg.rate_table.get(key, 0.0)
            for (attr, val, k), f in cfg.effect_table.items():
                if k == key and _attribute_value(prof, attr) == val:
                    r *= f
            if cfg.individual_sd > 0 and r > 0:
                r *= math.exp(cfg.individual_sd * rng.standard_normal() - cfg.individual_sd**2 / 2)
            rates[key] = r
        behavior[pid] = rates

    # SMS/call contacts: partner plus homophilous draws from the rest
    contacts = {}
    for pid in ids:
        prof = true[pid]
        others = [q for q in ids if q != pid and q != prof.partner]
        w = np.array([cfg.ethnic_sms_homophily if true[q].ethnicity == prof.ethnicity else 1.0 for q in others])
        k = min(cfg.sms_contacts, len(others))
        chosen = rng.choice(len(others), size=k, replace=False, p=w / w.sum()) if k else []
        contacts[pid] = [prof.partner] + sorted(others[i] for i in chosen)

    pool = [_hash_id("h_", rng) for _ in range(max(2, cfg.n_couples))]
    outside = {}
    for pid in ids:
        picks = rng.choice(len(pool), size=min(3, len(pool)), replace=False)
        outside[pid] = sorted(pool[i] for i in picks)
    devices = [_hash_id("d_", rng) for _ in range(max(2, cfg.n_couples // 2))]

    campus_wifi = [_hash_id("w_", rng) for _ in range(N_CAMPUS_PLACES)]
    campus_cell = [_hash_id("t_", rng) for _ in range(N_CAMPUS_PLACES)]
    places = {}
    for c in range(cfg.n_couples):
        home_w, home_t = _hash_id("w_", rng), _hash_id("t_", rng)
        for pid in ids[2 * c : 2 * c + 2]:
            places[pid] = {
                "wifi": [home_w] + [_hash_id("w_", rng) for _ in range(3)] + campus_wifi,
                "cell": [home_t] + [_hash_id("t_", rng) for _ in range(3)] + campus_cell,
            }
    return SyntheticCommunity(published, true, behavior, contacts, outside, devices, places)


# --------------------------------------------------------------------------- events


def poisson_inversion(lam: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Poisson counts by sequential CDF inversion of uniforms ``u``."""
    lam = np.asarray(lam, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    if np.any(lam < 0) or np.any(lam >= 700):
        raise ValueError("Poisson means must lie in [0, 700)")
    k = np.zeros(u.shape, dtype=np.int64)
    p = np.exp(-lam) * np.ones(u.shape)
    cdf = p.copy()
    active = u > cdf
    while active.any():
        k[active] += 1
        p = np.where(active, p * lam / np.maximum(k, 1), p)
        cdf = np.where(active, cdf + p, cdf)
        # guard against rounding leaving cdf just below u in the far tail
        active = active & (u > cdf) & (p > 0)
    return k


def _pick(rng: np.random.Generator, items: list[str], size: int) -> list[str]:
    return [items[i] for i in rng.integers(0, len(items), size).tolist()]


def generate_events(comm: SyntheticCommunity, cfg: CommunityConfig) -> EventLog:
    """Draw daily Poisson event counts per participant and rate key."""
    cfg.validate()
    rng = np.random.default_rng([cfg.seed, 1])
    ids = sorted(comm.true_profiles)
    n_keys = len(RATE_KEYS)
    lam = np.array([[comm.behavior[p][k] for k in RATE_KEYS] for p in ids])
    apps = [f"app_{i:03d}" for i in range(N_APPS)]
    events: list[EventRecord] = []

    bt_weights = {}
    for pid in ids:
        partner = comm.true_profiles[pid].partner
        others = [q for q in ids if q != pid]
        w = np.array([cfg.partner_proximity_boost if q == partner else 1.0 for q in others])
        bt_weights[pid] = (others, w / w.sum())

    for day in range(cfg.days):
        counts = poisson_inversion(lam, rng.random((len(ids), n_keys)))
        base = day * SECONDS_PER_DAY
        for pi, pid in enumerate(ids):
            for ki, key in enumerate(RATE_KEYS):
                n = int(counts[pi, ki])
                if n == 0:
                    continue
                times = (base + np.floor(rng.random(n) * SECONDS_PER_DAY)).astype(np.int64).tolist()
                events.extend(_make_events(key, pid, times, comm, cfg, rng, apps, bt_weights))
    events.sort(key=lambda e: e.time)
    return EventLog(tuple(events), comm.profiles)


def _peers(pid: str, n: int, comm: SyntheticCommunity, cfg: CommunityConfig, rng: np.random.Generator) -> list[str]:
    outside = rng.random(n) < cfg.out_of_study_fraction
    inside = _pick(rng, comm.contacts[pid], n)
    away = _pick(rng, comm.outside_contacts[pid], n)
    return [a if o else i for o, i, a in zip(outside.tolist(), inside, away)]


def _make_events(key, pid, times, comm, cfg, rng, apps, bt_weights) -> list[EventRecord]:
    n = len(times)
    if key.startswith("call_"):
        direction = key[5:]
        peers = _peers(pid, n, comm, cfg, rng)
        if direction == "missed":
            durs = [0] * n
        else:
            durs = (1 + np.floor(rng.exponential(120.0, n))).astype(np.int64).tolist()
        return [EventRecord(t, pid, "call", direction=direction, duration_s=d, peer=p) for t, d, p in zip(times, durs, peers)]
    if key.startswith("sms_"):
        direction = key[4:]
        peers = _peers(pid, n, comm, cfg, rng)
        return [EventRecord(t, pid, "sms", direction=direction, peer=p) for t, p in zip(times, peers)]
    if key == "bluetooth":
        others, w = bt_weights[pid]
        outside = rng.random(n) < cfg.out_of_study_fraction
        inside = [others[i] for i in rng.choice(len(others), size=n, p=w).tolist()] if others else [None] * n
        away = _pick(rng, comm.devices_outside, n)
        peers = [a if (o or i is None) else i for o, i, a in zip(outside.tolist(), inside, away)]
        return [EventRecord(t, pid, "bluetooth", peer=p) for t, p in zip(times, peers)]
    if key in ("wifi", "cell"):
        spots = comm.places[pid][key]
        # home, personal haunts, campus: 40/30/30
        u = rng.random(n)
        personal = _pick(rng, spots[1:4], n)
        campus = _pick(rng, spots[4:], n)
        chosen = [spots[0] if x < 0.4 else (p if x < 0.7 else c) for x, p, c in zip(u.tolist(), personal, campus)]
        return [EventRecord(t, pid, key, peer=s) for t, s in zip(times, chosen)]
    if key in ("app_install", "app_uninstall"):
        return [EventRecord(t, pid, key, app=a) for t, a in zip(times, _pick(rng, apps, n))]
    if key == "running_apps":
        counts = (1 + poisson_inversion(np.full(n, 6.0), rng.random(n))).tolist()
        return [EventRecord(t, pid, "running_apps", count=c) for t, c in zip(times, counts)]
    if key.startswith("alarm_"):
        action = "set" if key == "alarm_set" else "snooze"
        return [EventRecord(t, pid, "alarm", action=action) for t in times]
    return [EventRecord(t, pid, key) for t in times]


def generate(cfg: CommunityConfig) -> tuple[SyntheticCommunity, EventLog]:
    comm = generate_community(cfg)
    return comm, generate_events(comm, cfg)
