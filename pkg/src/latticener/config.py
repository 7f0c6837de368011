"""Run configuration: a flat ``key=value`` text file mapped onto :class:`Config`."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    pass


# variant -> (family, options)
VARIANTS = {
    "char": ("char", {}),
    "char+bichar": ("char", {"bichar": True}),
    "char+softword": ("char", {"softword": True}),
    "char+bichar+softword": ("char", {"bichar": True, "softword": True}),
    "word": ("word", {"char_integration": "none"}),
    "word+charLSTM": ("word", {"char_integration": "char_lstm"}),
    "word+charLSTM'": ("word", {"char_integration": "char_lstm_single"}),
    "word+charCNN": ("word", {"char_integration": "char_cnn"}),
    "word+char+bichar": ("word", {"char_integration": "char_lstm", "bichar": True}),
    "word+char+bichar+CNN": ("word", {"char_integration": "char_cnn", "bichar": True}),
    "lattice": ("lattice", {}),
}


@dataclass
class Config:
    variant: str = "lattice"
    char_emb: str = ""
    bichar_emb: str = ""
    word_emb: str = ""
    char_dim: int = 50
    bichar_dim: int = 50
    seg_dim: int = 50
    word_dim: int = 50
    hidden: int = 200
    per_direction_hidden: bool = False
    char_hidden: int = 50
    cnn_dim: int = 50
    dropout: float = 0.5
    lr: float = 0.015
    lr_decay: float = 0.05
    l2: float = 1e-8
    epochs: int = 100
    seed: int = 1
    bioes_constraint: bool = False

    @property
    def family(self) -> str:
        return VARIANTS[self.variant][0]

    @property
    def options(self) -> dict:
        return VARIANTS[self.variant][1]

    @property
    def direction_hidden(self) -> int:
        return self.hidden if self.per_direction_hidden else self.hidden // 2

    def lr_at(self, epoch: int) -> float:
        return self.lr / (1.0 + self.lr_decay * epoch)

    def validate(self, require_paths: bool = True) -> "Config":
        if self.variant not in VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}; choose from {sorted(VARIANTS)}")
        for name in ("char_dim", "bichar_dim", "seg_dim", "word_dim", "hidden", "char_hidden", "cnn_dim", "epochs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.direction_hidden < 1:
            raise ConfigError("hidden too small to split across two directions")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError("dropout must lie in [0, 1)")
        if self.lr <= 0 or self.lr_decay < 0 or self.l2 < 0:
            raise ConfigError("lr must be positive; lr_decay and l2 non-negative")
        if require_paths and self.family == "lattice" and not self.word_emb:
            raise ConfigError("lattice variant needs word_emb (the lexicon is its vocabulary)")
        return self

    def to_text(self) -> str:
        return "".join(f"{k}={_fmt(v)}\n" for k, v in asdict(self).items())

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(name: str, typ, raw: str):
    if typ in (bool, "bool"):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{name}: {raw!r} is not a boolean")
    try:
        if typ in (int, "int"):
            return int(raw)
        if typ in (float, "float"):
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r}") from None
    return raw


def parse_config(text: str, base_dir: Path | None = None, **overrides) -> Config:
    types = {f.name: f.type for f in fields(Config)}
    values = {}
    for lineno, line in enumerate(text.split("\n"), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected key=value")
        if key not in types:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        values[key] = _coerce(key, types[key], raw)
    values.update(overrides)
    cfg = Config(**values)
    if base_dir is not None:
        for key in ("char_emb", "bichar_emb", "word_emb"):
            p = getattr(cfg, key)
            if p and not Path(p).is_absolute():
                setattr(cfg, key, str(Path(base_dir) / p))
    return cfg


def load_config(path, **overrides) -> Config:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"{path}: {err.strerror}") from None
    return parse_config(text, path.parent, **overrides)
