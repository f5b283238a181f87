"""Scenario configuration files.

Grammar, one assignment per line::

    # comment
    section.key = value

Values are numbers, booleans (``true``/``false``), bare words, or
comma-separated number lists (curve knots). Blank lines and ``#`` comments
are ignored; a key may appear once. Sections map onto the domain types:

``model``     kind, lambda0, a, b, kappa, theta, sigma, curve_times, curve_levels
``market``    r, r_p, r_b, r_k, h, epsilon, r1, r_L, z
``bond``      coupon, maturity, recovery, notional
``cds``       premium (number or ``par``), maturity, recovery
``capital``   mode, fixed_exposure, lgd, avc, maturity, var_amount
``numerics``  n_lambda, width_sigmas, n_steps, n_mbar, mbar_max, picard_tol, picard_max_iter, max_substeps
``mc``        n_paths, n_steps_per_year, seed, antithetic
``output``    dir, prefix
"""

from __future__ import annotations

import math
from functools import partial
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .basis import BasisNumerics
from .capital import CapitalMode, CapitalSpec
from .models import BondSpec, CdsSpec, IntensityModel, MarketEnv, ModelKind
from .montecarlo import McConfig
from .pricing import par_spread

SECTIONS = ("model", "market", "bond", "cds", "capital", "numerics", "mc", "output")


class ConfigError(ValueError):
    """Invalid configuration; ``key`` names the offending dotted key when known."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


def _parse_value(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if "," in text:
        try:
            return [float(x) for x in text.split(",") if x.strip()]
        except ValueError:
            return text
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (list, tuple)):
        return ", ".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def parse_text(text: str) -> dict[str, dict]:
    out: dict[str, dict] = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {line_no}: expected 'section.key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key.count(".") != 1:
            raise ConfigError(f"line {line_no}: key must be 'section.name'", key)
        section, name = key.split(".")
        if section not in SECTIONS:
            raise ConfigError(f"unknown section {section!r}", key)
        if name in out.get(section, {}):
            raise ConfigError("duplicate key", key)
        if not value:
            raise ConfigError("missing value", key)
        out.setdefault(section, {})[name] = _parse_value(value)
    return out


@dataclass
class ScenarioConfig:
    """Raw sections plus typed accessors. Accessors raise ``ConfigError`` naming the key."""

    sections: dict[str, dict] = field(default_factory=dict)

    @classmethod
    def from_text(cls, text: str) -> ScenarioConfig:
        cfg = cls(parse_text(text))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> ScenarioConfig:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
        return cls.from_text(text)

    def to_text(self) -> str:
        lines = []
        for section in SECTIONS:
            for name, value in self.sections.get(section, {}).items():
                lines.append(f"{section}.{name} = {_format_value(value)}")
        return "\n".join(lines) + "\n"

    def with_values(self, **dotted) -> ScenarioConfig:
        """Copy with overrides, e.g. ``with_values(**{"market.r_b": 0.04})``."""
        sections = {k: dict(v) for k, v in self.sections.items()}
        for key, value in dotted.items():
            section, name = key.split(".")
            sections.setdefault(section, {})[name] = value
        return ScenarioConfig(sections)

    def has(self, section: str) -> bool:
        return bool(self.sections.get(section))

    def validate(self) -> None:
        """Build every present section so errors surface at load time."""
        for section, build in (
            ("model", lambda: self.model()),
            ("market", lambda: self.market()),
            ("bond", lambda: self.bond()),
            ("capital", lambda: self.capital()),
            ("numerics", lambda: self.numerics()),
            ("mc", lambda: self.mc()),
        ):
            if self.has(section):
                build()
        if self.has("cds"):
            self._cds_fields()

    # typed access

    def _section(self, name: str) -> dict:
        if not self.has(name):
            raise ConfigError("section is required for this command", name)
        return self.sections[name]

    def _number(self, section: str, name: str, default=None, required=False, integer=False):
        data = self.sections.get(section, {})
        key = f"{section}.{name}"
        if name not in data:
            if required:
                raise ConfigError("missing required key", key)
            return default
        v = data[name]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"expected a number, got {v!r}", key)
        if integer:
            if float(v) != int(v):
                raise ConfigError(f"expected an integer, got {v!r}", key)
            return int(v)
        if not math.isfinite(v):
            raise ConfigError("must be finite", key)
        return float(v)

    def _check_keys(self, section: str, allowed) -> None:
        for name in self.sections.get(section, {}):
            if name not in allowed:
                raise ConfigError("unknown key", f"{section}.{name}")

    def _build(self, section: str, factory, key_of):
        try:
            return factory()
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), key_of(str(exc))) from None

    @staticmethod
    def _guess_key(section: str, names):
        def key_of(message: str):
            for name in names:
                if message.startswith(name) or f" {name} " in f" {message} " or f"{name}=" in message:
                    return f"{section}.{name}"
            return section
        return key_of

    def model(self) -> IntensityModel:
        names = ("kind", "lambda0", "a", "b", "kappa", "theta", "sigma", "curve_times", "curve_levels")
        data = self._section("model")
        self._check_keys("model", names)
        kind_text = data.get("kind")
        try:
            kind = ModelKind(kind_text)
        except ValueError:
            raise ConfigError(f"unknown model kind {kind_text!r}", "model.kind") from None
        num = partial(self._number, "model")
        if kind is ModelKind.DETERMINISTIC_CURVE:
            times, levels = data.get("curve_times"), data.get("curve_levels")
            for n, v in (("curve_times", times), ("curve_levels", levels)):
                if not isinstance(v, list):
                    raise ConfigError("expected a comma-separated list", f"model.{n}")
            factory = lambda: IntensityModel.curve(times, levels)  # noqa: E731
        elif kind is ModelKind.CONSTANT:
            factory = lambda: IntensityModel.constant(num("lambda0", required=True))  # noqa: E731
        elif kind is ModelKind.ARITHMETIC:
            factory = lambda: IntensityModel.arithmetic(  # noqa: E731
                num("lambda0", required=True), num("a", required=True), num("b", required=True)
            )
        else:
            factory = lambda: IntensityModel.square_root(  # noqa: E731
                num("lambda0", required=True), num("kappa", required=True),
                num("theta", required=True), num("sigma", required=True),
            )
        return self._build("model", factory, self._guess_key("model", names))

    def market(self) -> MarketEnv:
        names = ("r", "r_p", "r_b", "r_k", "h", "epsilon", "r1", "r_L", "z")
        self._section("market")
        self._check_keys("market", names)
        num = partial(self._number, "market")
        r = num("r", required=True)
        h = num("h", 0.0)
        if not 0.0 <= h < 1.0:
            raise ConfigError(f"haircut must satisfy 0 <= h < 1, got {h}", "market.h")
        eps = num("epsilon", 0.0)
        if not 0.0 <= eps <= 1.0:
            raise ConfigError("epsilon must lie in [0, 1]", "market.epsilon")
        kwargs = dict(
            r=r, r_p=num("r_p", r), r_b=num("r_b", r), r_k=num("r_k", r), h=h, epsilon=eps,
            r1=num("r1"), r_L=num("r_L"), z=num("z"),
        )
        return self._build("market", lambda: MarketEnv(**kwargs), self._guess_key("market", names))

    def bond(self) -> BondSpec:
        names = ("coupon", "maturity", "recovery", "notional")
        self._section("bond")
        self._check_keys("bond", names)
        num = partial(self._number, "bond")
        kwargs = dict(
            coupon=num("coupon", required=True), maturity=num("maturity", required=True),
            recovery=num("recovery", required=True), notional=num("notional", 1.0),
        )
        return self._build("bond", lambda: BondSpec(**kwargs), self._guess_key("bond", names))

    def _cds_fields(self):
        names = ("premium", "maturity", "recovery")
        self._section("cds")
        self._check_keys("cds", names)
        premium = self.sections["cds"].get("premium")
        if premium is None:
            raise ConfigError("missing required key", "cds.premium")
        if not (premium == "par" or (isinstance(premium, (int, float)) and not isinstance(premium, bool))):
            raise ConfigError(f"expected a number or 'par', got {premium!r}", "cds.premium")
        maturity = self._number("cds", "maturity", required=True)
        recovery = self._number("cds", "recovery", required=True)
        if premium != "par":
            self._build("cds", lambda: CdsSpec(float(premium), maturity, recovery), self._guess_key("cds", names))
        return premium, maturity, recovery

    def cds(self) -> CdsSpec:
        premium, maturity, recovery = self._cds_fields()
        if premium == "par":
            # par against the risk-free curve, so the hedge is worth zero at inception
            env = MarketEnv.riskfree(self.market().r)
            premium = par_spread(self.model(), env, recovery, maturity, self.numerics().pricing)
        return CdsSpec(float(premium), maturity, recovery)

    def capital(self) -> CapitalSpec:
        names = ("mode", "fixed_exposure", "lgd", "avc", "maturity", "var_amount")
        if not self.has("capital"):
            return CapitalSpec.none()
        self._check_keys("capital", names)
        mode_text = self.sections["capital"].get("mode", CapitalMode.FIXED_EXPOSURE.value)
        try:
            mode = CapitalMode(mode_text)
        except ValueError:
            raise ConfigError(f"unknown capital mode {mode_text!r}", "capital.mode") from None
        num = partial(self._number, "capital")
        kwargs = dict(
            mode=mode, fixed_exposure=num("fixed_exposure", 0.0), lgd=num("lgd", 0.45), avc=num("avc", 1.0),
            maturity=num("maturity"), var_amount=num("var_amount", 0.0),
        )
        return self._build("capital", lambda: CapitalSpec(**kwargs), self._guess_key("capital", names))

    def numerics(self) -> BasisNumerics:
        allowed = {f.name for f in fields(BasisNumerics)}
        self._check_keys("numerics", allowed)
        ints = {"n_lambda", "n_steps", "n_mbar", "picard_max_iter", "max_substeps"}
        kwargs = {}
        for name in self.sections.get("numerics", {}):
            kwargs[name] = self._number("numerics", name, integer=name in ints)
        names = tuple(sorted(allowed, key=len, reverse=True))
        return self._build("numerics", lambda: BasisNumerics(**kwargs), self._guess_key("numerics", names))

    def mc(self, seed: int | None = None) -> McConfig:
        allowed = {f.name for f in fields(McConfig)}
        self._check_keys("mc", allowed)
        data = self.sections.get("mc", {})
        kwargs = {}
        for name in ("n_paths", "n_steps_per_year", "seed"):
            if name in data:
                kwargs[name] = self._number("mc", name, integer=True)
        if "antithetic" in data:
            if not isinstance(data["antithetic"], bool):
                raise ConfigError("expected true or false", "mc.antithetic")
            kwargs["antithetic"] = data["antithetic"]
        cfg = self._build("mc", lambda: McConfig(**kwargs), self._guess_key("mc", tuple(allowed)))
        return replace(cfg, seed=seed) if seed is not None else cfg

    def output_dir(self) -> str:
        return str(self.sections.get("output", {}).get("dir", "."))

    def output_prefix(self) -> str:
        prefix = self.sections.get("output", {}).get("prefix", "")
        return str(prefix)
