"""Pipeline configuration: one JSON file, validated at load, overridable per flag."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping


class ConfigError(ValueError):
    """Invalid or incomplete configuration; the message names the field."""


@dataclass
class PathSettings:
    kg: str | None = None
    lexicon: str | None = None
    stopwords: str | None = None
    embeddings: str | None = None
    corpus: str | None = None
    questions: str | None = None
    train: str | None = None
    test: str | None = None
    model_dir: str = "models"
    output_dir: str = "runs/default"


@dataclass
class CrfSettings:
    method: str = "ensemble"
    l2: float = 0.1
    epochs: int = 200
    seed: int = 0
    max_n: int = 4
    df_buckets: int = 8
    step: float = 1.0


@dataclass
class SimilaritySettings:
    k1: float = 1.5
    b: float = 0.75
    lsi_rank: int = 100
    lda_topics: int = 50
    lda_alpha: float | None = None
    lda_beta: float = 0.01
    lda_seed: int = 0
    lda_sweeps: int = 500
    lda_infer_sweeps: int = 50
    avge_mode: str = "candidates"


@dataclass
class RankerSettings:
    l2: float = 0.01
    epochs: int = 50
    eta0: float = 0.1
    seed: int = 0
    features: list[str] | None = None


SECTIONS = {"paths": PathSettings, "crf": CrfSettings, "similarity": SimilaritySettings,
            "ranker": RankerSettings}


@dataclass
class PipelineConfig:
    paths: PathSettings = field(default_factory=PathSettings)
    crf: CrfSettings = field(default_factory=CrfSettings)
    similarity: SimilaritySettings = field(default_factory=SimilaritySettings)
    ranker: RankerSettings = field(default_factory=RankerSettings)
    jobs: int = 1

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], base_dir: str | Path | None = None) -> "PipelineConfig":
        if not isinstance(d, Mapping):
            raise ConfigError("config must be a JSON object")
        unknown = set(d) - set(SECTIONS) - {"jobs"}
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
        kw = {}
        for name, klass in SECTIONS.items():
            sub = d.get(name, {})
            if not isinstance(sub, Mapping):
                raise ConfigError(f"{name}: expected an object")
            allowed = {f.name for f in fields(klass)}
            bad = set(sub) - allowed
            if bad:
                raise ConfigError(f"{name}.{sorted(bad)[0]}: unknown setting")
            kw[name] = klass(**sub)
        cfg = cls(**kw, jobs=d.get("jobs", 1))
        if base_dir is not None:
            cfg.resolve_paths(base_dir)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"{path}: config file not found") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: malformed JSON ({exc.msg}, line {exc.lineno})") from None
        try:
            return cls.from_dict(raw, base_dir=path.parent)
        except ConfigError as exc:
            raise ConfigError(f"{path}: {exc}") from None
        except TypeError as exc:
            raise ConfigError(f"{path}: {exc}") from None

    def resolve_paths(self, base_dir: str | Path) -> None:
        """Make relative paths relative to the config file's directory."""
        base = Path(base_dir)
        for f in fields(PathSettings):
            v = getattr(self.paths, f.name)
            if v is not None and not Path(v).is_absolute():
                setattr(self.paths, f.name, str(base / v))

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def override(self, dotted: str, value) -> None:
        """Set ``section.name`` (or ``jobs``) from a flag; ``None`` leaves it untouched."""
        if value is None:
            return
        if dotted == "jobs":
            self.jobs = value
            return
        section, _, name = dotted.partition(".")
        obj = getattr(self, section, None)
        if obj is None or not hasattr(obj, name):
            raise ConfigError(f"{dotted}: unknown setting")
        setattr(obj, name, value)

    def require(self, *path_fields: str) -> None:
        missing = [f for f in path_fields if not getattr(self.paths, f)]
        if missing:
            raise ConfigError(f"paths.{missing[0]}: required by this command but not set")
        for f in path_fields:
            p = Path(getattr(self.paths, f))
            if not p.exists():
                raise ConfigError(f"paths.{f}: {p} does not exist")

    def validate(self) -> None:
        def positive(section, name, allow_zero=False):
            v = getattr(getattr(self, section), name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v < 0 or (v == 0 and not allow_zero):
                raise ConfigError(f"{section}.{name}: must be {'non-negative' if allow_zero else 'positive'}, got {v!r}")

        if self.crf.method not in ("crf", "ensemble"):
            raise ConfigError(f"crf.method: expected 'crf' or 'ensemble', got {self.crf.method!r}")
        for name in ("l2", "epochs"):
            positive("crf", name, allow_zero=True)
        for name in ("max_n", "df_buckets", "step"):
            positive("crf", name)
        for name in ("k1", "lsi_rank", "lda_topics", "lda_beta", "lda_sweeps", "lda_infer_sweeps"):
            positive("similarity", name)
        if self.similarity.lda_alpha is not None:
            positive("similarity", "lda_alpha")
        if not 0.0 <= self.similarity.b <= 1.0:
            raise ConfigError(f"similarity.b: must lie in [0, 1], got {self.similarity.b!r}")
        if self.similarity.avge_mode not in ("candidates", "global"):
            raise ConfigError(f"similarity.avge_mode: unknown mode {self.similarity.avge_mode!r}")
        for name in ("l2", "epochs"):
            positive("ranker", name, allow_zero=True)
        positive("ranker", "eta0")
        if not isinstance(self.jobs, int) or self.jobs < 1:
            raise ConfigError(f"jobs: must be a positive integer, got {self.jobs!r}")
        for section in ("crf", "ranker"):
            if not isinstance(getattr(self, section).epochs, int):
                raise ConfigError(f"{section}.epochs: must be an integer")
