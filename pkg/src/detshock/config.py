"""Run configuration: flat ``key = value`` files with includes.

Example::

    # golden.cfg
    include = base.cfg
    gamma = 2.0
    eps = 0.05
    theta_w_degrees = 30
    L_factor = 4

Later lines override earlier ones; included files are read at the point of
the ``include`` line, relative to the including file.  ``--override``
pairs from the command line are applied last.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError
from .shock_polar import EPS_GUARD

BODIES = ("smoothstep", "wedge")
SEED_PROFILES = ("blend", "background")


def _float_list(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    return tuple(float(p) for p in parts)


@dataclass(frozen=True)
class RunConfig:
    """Every parameter of a run.

    ``L`` (absolute) takes precedence over ``L_factor`` (multiple of the
    minimum cut-off height).  ``L_list``/``L_factor_list`` and ``eps_list``
    drive the sweep command.
    """

    gamma: float = 2.0
    b0_bernoulli: float = 1.0
    eps: float = 0.05
    theta_w_degrees: float = 30.0
    h0: float = 1.0
    d0: float = 1.0
    body: str = "smoothstep"
    wedge_apex: float = 1.0
    L: float | None = None
    L_factor: float = 4.0
    L_list: tuple[float, ...] = ()
    L_factor_list: tuple[float, ...] = ()
    eps_list: tuple[float, ...] = ()
    n_s: int = 64
    n_t: int = 128
    stretch: float = 3.0
    damping: float = 0.5
    tol_f: float = 1e-7
    max_outer: int = 80
    omega: float = 0.7
    tol_psi: float = 1e-9
    tol_pde: float = 1e-6
    max_picard: int = 200
    seed_profile: str = "blend"
    polar_samples: int = 128
    norm_beta: float = 0.5
    norm_alpha: float = 0.5
    M1: float | None = None
    M2: float | None = None
    output_dir: str = "out"

    # ------------------------------------------------------------------
    @property
    def theta_w(self) -> float:
        return math.radians(self.theta_w_degrees)

    def validate(self) -> "RunConfig":
        """Check every parameter against the solver preconditions.

        Raises
        ------
        ConfigError
        """
        def need(cond, msg):
            if not cond:
                raise ConfigError(msg)

        need(self.gamma > 1.0, f"gamma must exceed 1, got {self.gamma}")
        need(self.b0_bernoulli > 0.0, "b0_bernoulli must be positive")
        need(0.0 < self.eps <= EPS_GUARD, f"eps must lie in (0, {EPS_GUARD}], got {self.eps}")
        need(0.0 < self.theta_w_degrees < 90.0, "theta_w_degrees must lie in (0, 90)")
        need(self.h0 > 0.0, "h0 must be positive")
        need(self.d0 > 0.0, "d0 must be positive")
        need(self.body in BODIES, f"body must be one of {BODIES}")
        need(self.seed_profile in SEED_PROFILES, f"seed_profile must be one of {SEED_PROFILES}")
        need(self.L is None or self.L > 0.0, "L must be positive")
        need(self.L_factor > 0.0, "L_factor must be positive")
        for name in ("L_list", "L_factor_list"):
            vals = getattr(self, name)
            need(all(v > 0.0 for v in vals), f"{name} entries must be positive")
            need(all(b > a for a, b in zip(vals, vals[1:])), f"{name} must be strictly increasing")
        need(all(0.0 < e <= EPS_GUARD for e in self.eps_list), f"eps_list entries must lie in (0, {EPS_GUARD}]")
        need(self.n_s >= 5 and self.n_t >= 5, "n_s and n_t must be at least 5")
        need(0.0 < self.damping <= 1.0, "damping must lie in (0, 1]")
        need(0.0 < self.omega <= 1.0, "omega must lie in (0, 1]")
        for name in ("tol_f", "tol_psi", "tol_pde"):
            need(getattr(self, name) > 0.0, f"{name} must be positive")
        need(self.max_outer >= 1 and self.max_picard >= 1, "iteration limits must be positive")
        need(self.polar_samples >= 8, "polar_samples must be at least 8")
        need(0.0 < self.norm_beta < 1.0 and 0.0 < self.norm_alpha < 1.0, "norm exponents must lie in (0, 1)")
        for name in ("M1", "M2"):
            v = getattr(self, name)
            need(v is None or v > 0.0, f"{name} must be positive")
        need(self.stretch >= 0.0, "stretch must be non-negative")
        return self

    def canonical(self) -> str:
        """Sorted ``key=value`` lines, the input of :meth:`digest`.

        ``output_dir`` is excluded so relocating a run keeps its hash.
        """
        items = asdict(self)
        items.pop("output_dir")
        return "\n".join(f"{k}={_render(v)}" for k, v in sorted(items.items()))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]

    def header_lines(self) -> list[str]:
        """Metadata for CSV headers: the hash followed by every setting."""
        return [f"config_hash={self.digest()}"] + self.canonical().splitlines()

    def replace(self, **changes) -> "RunConfig":
        data = asdict(self)
        data.update(changes)
        return RunConfig(**data).validate()


def _render(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(repr(float(v)) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


_FIELDS = {f.name: f for f in fields(RunConfig)}
_INT_KEYS = {"n_s", "n_t", "max_outer", "max_picard", "polar_samples"}
_TUPLE_KEYS = {"L_list", "L_factor_list", "eps_list"}
_STR_KEYS = {"body", "seed_profile", "output_dir"}
_OPTIONAL_KEYS = {"L", "M1", "M2"}


def _convert(key: str, raw: str):
    if key not in _FIELDS:
        raise ConfigError(f"unknown configuration key {key!r}")
    text = raw.strip()
    try:
        if key in _STR_KEYS:
            return text
        if key in _OPTIONAL_KEYS and text.lower() in ("", "none", "auto"):
            return None
        if key in _TUPLE_KEYS:
            return _float_list(text)
        if key in _INT_KEYS:
            value = float(text)
            if value != int(value):
                raise ValueError
            return int(value)
        return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def _read_pairs(path: Path, seen: tuple[Path, ...] = ()) -> list[tuple[str, str]]:
    path = Path(path)
    try:
        resolved = path.resolve()
        text = resolved.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise ConfigError(f"configuration file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read configuration {path}: {exc}") from None
    if resolved in seen:
        raise ConfigError(f"include cycle through {path}")
    pairs = []
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in body.split("=", 1))
        if key == "include":
            pairs.extend(_read_pairs(resolved.parent / value, seen + (resolved,)))
        else:
            pairs.append((key, value))
    return pairs


def parse_override(item: str) -> tuple[str, str]:
    if "=" not in item:
        raise ConfigError(f"override must look like key=value, got {item!r}")
    key, value = (s.strip() for s in item.split("=", 1))
    return key, value


def load_config(path=None, overrides=()) -> RunConfig:
    """Read, merge and validate a configuration.

    Parameters
    ----------
    path : path-like, optional
        Configuration file; defaults only when omitted.
    overrides : iterable of str
        ``key=value`` items applied after the file.
    """
    pairs = _read_pairs(Path(path)) if path is not None else []
    pairs += [parse_override(item) for item in overrides]
    values = {}
    for key, raw in pairs:
        values[key] = _convert(key, raw)
    return RunConfig(**values).validate()
