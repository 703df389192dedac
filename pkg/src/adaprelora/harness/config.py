"""Strict parser for the line-oriented run configuration.

Format::

    # comment
    [optimizers]
    names = adaprelora_sgd, factor_sgd
    learning_rates = 1e-3, 1e-2

    [problem]
    kind = recovery
    m = 32

Every key must belong to its section, appear at most once and parse to the
documented type. List-valued keys take comma-separated items. Errors carry
the offending line number. The key reference lives in the README.
"""
from dataclasses import dataclass, field
from typing import Tuple

from ..errors import ConfigError, ContractError
from ..optimizers import OPTIMIZERS, OptimizerConfig
from ..problems import KINDS

MAX_SEED = 2**64 - 1


def _int(text):
    return int(text, 0)


def _bool(text):
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


# section -> key -> (parser, is_list, default); default None marks a required key
SCHEMA = {
    "optimizers": {
        "names": (str, True, None),
        "learning_rates": (float, True, None),
        "eps": (float, False, 1e-6),
        "decay_row": (float, False, 0.98),
        "decay_col": (float, False, 0.98),
        "momentum_decay": (float, False, 0.9),
        "weight_decay": (float, False, 0.0),
        "momentum_mode": (str, False, "none"),
        "gradient_source": (str, False, "exact"),
    },
    "problem": {
        "kind": (str, True, None),
        "m": (_int, False, None),
        "n": (_int, False, None),
        "rank": (_int, False, None),
        "planted_rank": (_int, False, "rank"),
        "condition_number": (float, True, (10.0,)),
    },
    "run": {
        "steps": (_int, False, None),
        "seeds": (_int, False, 1),
        "master_seed": (_int, False, 0),
        "threshold": (float, False, 1e-6),
        "stop_at_threshold": (_bool, False, False),
    },
}


@dataclass(frozen=True)
class RunConfig:
    names: Tuple[str, ...]
    learning_rates: Tuple[float, ...]
    kinds: Tuple[str, ...]
    m: int
    n: int
    rank: int
    planted_rank: int
    condition_numbers: Tuple[float, ...]
    seeds: int
    steps: int
    master_seed: int = 0
    threshold: float = 1e-6
    stop_at_threshold: bool = False
    optimizer_options: dict = field(default_factory=dict)

    def optimizer_config(self, learning_rate):
        return OptimizerConfig(learning_rate=learning_rate, **self.optimizer_options)

    def echo(self):
        """Flat ``key=value`` pairs describing the configuration (for CSV metadata)."""
        items = {
            "config.names": ",".join(self.names),
            "config.learning_rates": ",".join(repr(x) for x in self.learning_rates),
            "config.kind": ",".join(self.kinds),
            "config.condition_number": ",".join(repr(x) for x in self.condition_numbers),
            "config.m": self.m,
            "config.n": self.n,
            "config.rank": self.rank,
            "config.planted_rank": self.planted_rank,
            "config.seeds": self.seeds,
            "config.steps": self.steps,
            "config.master_seed": self.master_seed,
            "config.threshold": repr(self.threshold),
            "config.stop_at_threshold": str(self.stop_at_threshold).lower(),
        }
        for key, value in self.optimizer_options.items():
            items[f"config.{key}"] = value if isinstance(value, str) else repr(value)
        return items


def _split(raw, lineno):
    items = [item.strip() for item in raw.split(",")]
    if not items or any(not item for item in items):
        raise ConfigError("empty item in list value", lineno)
    return items


def parse_text(text):
    values, lines = {}, {}
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                raise ConfigError(f"malformed section header {stripped!r}", lineno)
            section = stripped[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigError(
                    f"unknown section [{section}]; expected one of {sorted(SCHEMA)}", lineno
                )
            continue
        if "=" not in stripped:
            raise ConfigError(f"expected 'key = value', got {stripped!r}", lineno)
        if section is None:
            raise ConfigError("key outside of any [section]", lineno)
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in SCHEMA[section]:
            raise ConfigError(
                f"unknown key {key!r} in [{section}]; expected one of {sorted(SCHEMA[section])}",
                lineno,
            )
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", lineno)
        if not raw:
            raise ConfigError(f"missing value for {key!r}", lineno)
        parser, is_list, _ = SCHEMA[section][key]
        try:
            parsed = tuple(parser(item) for item in _split(raw, lineno)) if is_list else parser(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", lineno) from None
        values[key] = parsed
        lines[key] = lineno
    return _build(values, lines)


def _build(values, lines):
    def get(section, key):
        if key in values:
            return values[key]
        default = SCHEMA[section][key][2]
        if default is None:
            raise ConfigError(f"missing required key {key!r} in [{section}]")
        if default == "rank":
            return get("problem", "rank")
        return default

    def fail(key, message):
        raise ConfigError(message, lines.get(key))

    names = get("optimizers", "names")
    for name in names:
        if name not in OPTIMIZERS:
            fail("names", f"unknown optimizer {name!r}; expected one of {sorted(OPTIMIZERS)}")
    kinds = get("problem", "kind")
    for kind in kinds:
        if kind not in KINDS:
            fail("kind", f"unknown problem kind {kind!r}; expected one of {list(KINDS)}")

    m, n, rank = get("problem", "m"), get("problem", "n"), get("problem", "rank")
    if min(m, n) < 1:
        fail("m" if m < 1 else "n", "m and n must be positive")
    if not 1 <= rank <= min(m, n):
        fail("rank", f"rank must lie in [1, min(m, n)] = [1, {min(m, n)}], got {rank}")
    planted_rank = get("problem", "planted_rank")
    if not 1 <= planted_rank <= min(m, n):
        fail("planted_rank", f"planted_rank must lie in [1, {min(m, n)}], got {planted_rank}")
    kappas = get("problem", "condition_number")
    if any(not k >= 1.0 for k in kappas):
        fail("condition_number", "condition numbers must be >= 1")
    seeds = get("run", "seeds")
    if seeds < 1:
        fail("seeds", "seeds must be positive")
    steps = get("run", "steps")
    if steps < 0:
        fail("steps", "steps must be nonnegative")
    master_seed = get("run", "master_seed")
    if not 0 <= master_seed <= MAX_SEED:
        fail("master_seed", "master_seed must be an unsigned 64-bit integer")
    threshold = get("run", "threshold")
    if not threshold > 0:
        fail("threshold", "threshold must be positive")

    options = {
        key: get("optimizers", key)
        for key in SCHEMA["optimizers"]
        if key not in ("names", "learning_rates")
    }
    learning_rates = get("optimizers", "learning_rates")
    for lr in learning_rates:
        try:
            OptimizerConfig(learning_rate=lr, **options)
        except ContractError as exc:
            bad = next((k for k in options if k in str(exc)), "learning_rates")
            fail(bad, str(exc))

    return RunConfig(
        names=names,
        learning_rates=learning_rates,
        kinds=kinds,
        m=m,
        n=n,
        rank=rank,
        planted_rank=planted_rank,
        condition_numbers=kappas,
        seeds=seeds,
        steps=steps,
        master_seed=master_seed,
        threshold=threshold,
        stop_at_threshold=get("run", "stop_at_threshold"),
        optimizer_options=options,
    )


def load(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_text(text)
