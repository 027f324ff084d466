"""Pipeline configuration: defaults, TOML loading, and country presets.

A single config object travels through the whole pipeline. Every list the
feature extractor consumes has a fixed width (5 flagged websites, 5
suspicious hashtags, 8 expertise categories); shorter user-supplied lists
are padded with empty entries that always produce zero features.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import InvalidParams

N_FLAGGED_WEBSITES = 5
N_SUSPICIOUS_HASHTAGS = 5
N_EXPERTISE_CATEGORIES = 8

COUNTRY_PRESETS = ("sweden", "latvia", "uk")


@dataclass
class LdaConfig:
    k: int = 25
    alpha: float = 2.0  # 50/k
    beta: float = 0.01
    iterations: int = 500
    fold_in_iterations: int = 50
    min_word_count: int = 2


@dataclass
class TfidfConfig:
    top_n: int = 20


@dataclass
class GbdtConfig:
    n_estimators: int = 200
    learning_rate: float = 0.1
    max_depth: int = 3


@dataclass
class ForestConfig:
    n_estimators: int = 200
    criterion: str = "entropy"
    max_depth: int | None = None


@dataclass
class TreeConfig:
    criterion: str = "gini"
    max_depth: int | None = None


@dataclass
class LogregConfig:
    c: float = 1.0
    tolerance: float = 0.01
    max_iters: int = 100


@dataclass
class ExpertiseCategory:
    name: str
    keywords: list[str] = field(default_factory=list)


@dataclass
class PipelineConfig:
    theta: int = 20
    causal_alpha: float = 0.001
    seed: int = 42
    cv_folds: int = 10
    country: str = "sweden"
    flagged_websites: list[str] = field(default_factory=list)
    suspicious_hashtags: list[str] = field(default_factory=list)
    expertise_categories: list[ExpertiseCategory] = field(default_factory=list)
    expertise_binary: bool = False
    lda: LdaConfig = field(default_factory=LdaConfig)
    tfidf: TfidfConfig = field(default_factory=TfidfConfig)
    gbdt: GbdtConfig = field(default_factory=GbdtConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)
    tree: TreeConfig = field(default_factory=TreeConfig)
    logreg: LogregConfig = field(default_factory=LogregConfig)
    stopwords_path: str | None = None
    lexicon_path: str | None = None

    def validate(self) -> "PipelineConfig":
        if self.theta < 2:
            raise InvalidParams(f"theta must be >= 2, got {self.theta}")
        if self.causal_alpha <= 0:
            raise InvalidParams("causal_alpha must be > 0")
        if self.lda.k < 1 or self.lda.iterations < 1:
            raise InvalidParams("lda.k and lda.iterations must be >= 1")
        if self.cv_folds < 2:
            raise InvalidParams("cv_folds must be >= 2")
        self.flagged_websites = _pad_list(
            self.flagged_websites, N_FLAGGED_WEBSITES, "flagged_websites"
        )
        self.suspicious_hashtags = _pad_list(
            [h.lstrip("#").lower() for h in self.suspicious_hashtags],
            N_SUSPICIOUS_HASHTAGS,
            "suspicious_hashtags",
        )
        if len(self.expertise_categories) > N_EXPERTISE_CATEGORIES:
            raise InvalidParams(
                f"at most {N_EXPERTISE_CATEGORIES} expertise categories allowed"
            )
        while len(self.expertise_categories) < N_EXPERTISE_CATEGORIES:
            pad_idx = len(self.expertise_categories)
            self.expertise_categories.append(ExpertiseCategory(f"unused_{pad_idx}", []))
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _pad_list(values: list[str], width: int, name: str) -> list[str]:
    if len(values) > width:
        raise InvalidParams(f"{name} accepts at most {width} entries, got {len(values)}")
    return list(values) + [""] * (width - len(values))


def _preset_lists(country: str) -> dict:
    if country not in COUNTRY_PRESETS:
        raise InvalidParams(
            f"unknown country preset {country!r}; expected one of {COUNTRY_PRESETS} "
            "or explicit flagged_websites/suspicious_hashtags/expertise lists"
        )
    ref = resources.files("psmdetect.resources.presets").joinpath(f"{country}.toml")
    return tomllib.loads(ref.read_text(encoding="utf-8"))


def default_config(country: str = "sweden") -> PipelineConfig:
    """Config with built-in defaults and the given country's lists."""
    cfg = PipelineConfig(country=country)
    _apply_dict(cfg, _preset_lists(country))
    return cfg.validate()


def load_config(path: str | Path) -> PipelineConfig:
    """Load a TOML config file on top of the defaults.

    The optional `country` key pulls in that preset's lists first; any
    explicit list in the file then overrides the preset.
    """
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    country = data.get("country", "sweden")
    cfg = PipelineConfig(country=country)
    _apply_dict(cfg, _preset_lists(country))
    _apply_dict(cfg, data)
    return cfg.validate()


_SECTION_TYPES = {
    "lda": LdaConfig,
    "tfidf": TfidfConfig,
    "gbdt": GbdtConfig,
    "forest": ForestConfig,
    "tree": TreeConfig,
    "logreg": LogregConfig,
}

_SCALAR_KEYS = (
    "theta",
    "causal_alpha",
    "seed",
    "cv_folds",
    "country",
    "expertise_binary",
    "stopwords_path",
    "lexicon_path",
)


def _apply_dict(cfg: PipelineConfig, data: dict) -> None:
    for key in _SCALAR_KEYS:
        if key in data:
            setattr(cfg, key, data[key])
    if "flagged_websites" in data:
        cfg.flagged_websites = list(data["flagged_websites"])
    if "suspicious_hashtags" in data:
        cfg.suspicious_hashtags = list(data["suspicious_hashtags"])
    if "expertise" in data:
        cfg.expertise_categories = [
            ExpertiseCategory(name, list(words)) for name, words in data["expertise"].items()
        ]
    for section, cls in _SECTION_TYPES.items():
        if section in data:
            current = getattr(cfg, section)
            for k, v in data[section].items():
                if not hasattr(current, k):
                    raise InvalidParams(f"unknown key {k!r} in [{section}]")
                setattr(current, k, v)
    unknown = (
        set(data)
        - set(_SCALAR_KEYS)
        - {"flagged_websites", "suspicious_hashtags", "expertise"}
        - set(_SECTION_TYPES)
    )
    if unknown:
        raise InvalidParams(f"unknown config keys: {sorted(unknown)}")


def derive_seed(master: int, *tags: object) -> int:
    """Stable, platform-independent child seed for a named random stream."""
    text = ":".join([str(master)] + [str(t) for t in tags])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") % (2**63 - 1)
