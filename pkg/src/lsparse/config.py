"""Training configuration: defaults, validation and the plain-text format.

The text format is one ``key = value`` per line; blank lines and lines
starting with ``#`` are ignored.  Booleans are ``on``/``off``, unset
optional values are ``none``.
"""
from dataclasses import asdict, dataclass, fields

__all__ = ["ConfigError", "TrainConfig"]


class ConfigError(ValueError):
    """Invalid configuration; the message lists every problem found."""


_BOOL = {"on": True, "true": True, "1": True, "yes": True,
         "off": False, "false": False, "0": False, "no": False}


@dataclass
class TrainConfig:
    model: str = "gmm"
    K: int = 10
    L: str = "dense"
    alg: str = "mvi"
    batches: int = 1
    laps: int = 10
    alpha: float | None = None
    lambda_bar: float = 0.1
    nu_bar: float | None = None
    delta: float = 1.0
    kappa: float = 0.55
    max_local_iters: int = 100
    conv_threshold: float = 0.05
    eps_active: float = 1e-8
    restarts: bool = True
    warm_start: bool = False
    seed: int = 0
    deterministic: bool = True
    workers: int = 1
    data: str | None = None
    data_format: str = "auto"
    heldout: str | None = None
    init: str | None = None
    output: str | None = None

    # -- derived -----------------------------------------------------------
    @property
    def L_value(self):
        """Integer L, or None for dense responsibilities."""
        return None if str(self.L).lower() == "dense" else int(self.L)

    @property
    def alpha_value(self):
        if self.alpha is not None:
            return float(self.alpha)
        return 10.0 if self.model == "gmm" else 0.5

    def resolved(self):
        """Copy with model-dependent defaults filled in."""
        c = TrainConfig(**asdict(self))
        c.alpha = self.alpha_value
        c.L = "dense" if self.L_value is None else str(self.L_value)
        return c

    # -- validation --------------------------------------------------------
    def problems(self, require_data=True):
        errs = []
        if self.model not in ("gmm", "lda"):
            errs.append(f"--model must be gmm or lda, got {self.model!r}")
        if not isinstance(self.K, int) or self.K < 1:
            errs.append(f"--K must be a positive integer, got {self.K!r}")
        try:
            L = self.L_value
        except (TypeError, ValueError):
            errs.append(f"--L must be an integer or 'dense', got {self.L!r}")
        else:
            if L is not None and (L < 1 or (isinstance(self.K, int) and L > self.K)):
                errs.append(f"--L={L} must satisfy 1 <= L <= K={self.K}")
        if self.alg not in ("svi", "mvi", "full"):
            errs.append(f"--alg must be svi, mvi or full, got {self.alg!r}")
        if self.batches < 1:
            errs.append("--batches must be >= 1")
        if self.laps < 0:
            errs.append("--laps must be >= 0")
        if self.alpha is not None and not self.alpha > 0:
            errs.append("--alpha must be > 0")
        if not self.lambda_bar > 0:
            errs.append("--lambda_bar must be > 0")
        if self.nu_bar is not None and not self.nu_bar > 0:
            errs.append("--nu_bar must be > 0")
        if self.delta < 0:
            errs.append("--delta must be >= 0")
        if not 0.5 < self.kappa <= 1.0:
            errs.append("--kappa must lie in (0.5, 1]")
        if self.max_local_iters < 1:
            errs.append("--max_local_iters must be >= 1")
        if not self.conv_threshold > 0:
            errs.append("--conv_threshold must be > 0")
        if self.eps_active < 0:
            errs.append("--eps_active must be >= 0")
        if self.workers < 1:
            errs.append("--workers must be >= 1")
        if self.data_format not in ("auto", "csv", "raw64", "pgm", "uci"):
            errs.append(f"--data_format must be auto, csv, raw64, pgm or uci, got {self.data_format!r}")
        if require_data and not self.data:
            errs.append("--data is required")
        return errs

    def validate(self, require_data=True):
        errs = self.problems(require_data)
        if errs:
            raise ConfigError("; ".join(errs))
        return self

    # -- text format -------------------------------------------------------
    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                s = "none"
            elif isinstance(v, bool):
                s = "on" if v else "off"
            else:
                s = repr(v) if isinstance(v, float) else str(v)
            lines.append(f"{f.name} = {s}")
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_text(cls, text):
        return cls.from_pairs(_parse_lines(text))

    @classmethod
    def from_file(cls, path):
        with open(path) as fh:
            return cls.from_text(fh.read())

    @classmethod
    def from_pairs(cls, pairs, base=None):
        """Overlay string or typed values onto `base` (default: the defaults)."""
        cfg = TrainConfig(**asdict(base)) if base is not None else cls()
        types = {f.name: f.type for f in fields(cls)}
        for key, raw in pairs.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, _coerce(key, raw, types[key]))
        return cfg


def _parse_lines(text):
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _coerce(key, raw, typ):
    if not isinstance(raw, str):
        return raw
    low = raw.lower()
    optional = "None" in str(typ)
    if optional and low == "none":
        return None
    try:
        if typ is bool or typ == "bool":
            if low not in _BOOL:
                raise ValueError(raw)
            return _BOOL[low]
        if typ is int or typ == "int":
            return int(raw)
        if "float" in str(typ):
            return float(raw)
    except ValueError:
        raise ConfigError(f"--{key}: cannot parse {raw!r}") from None
    return raw
