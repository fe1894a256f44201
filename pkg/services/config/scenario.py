import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

from services.bounds.alpha import EXHAUSTIVE, MODES
from services.bounds.scaling import ScalingFamily, ScalingRule
from services.chain.chain_model import ChainClass, ChainModel, MultiplierRule, intensity_bound
from services.rates.rate_function import RateError, rate_from_config
from utils.config import (
    DEFAULT_GRID_POINTS,
    DEFAULT_INTENSITY_SAMPLES,
    DEFAULT_TOL,
    MAX_TOL,
    MIN_TOL,
)
from utils.logging_config import get_component_logger

logger = get_component_logger("scenario")


class ConfigError(ValueError):
    """Invalid scenario; ``path`` is the dotted location of the bad field."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class ModelBlock:
    model: ChainModel
    N: int


@dataclass(frozen=True)
class FamilyBlock:
    rule: ScalingRule = ScalingRule.GEOMETRIC
    delta: Optional[float] = None
    deltas: Tuple[float, ...] = ()

    def family(self) -> ScalingFamily:
        if self.delta is None:
            raise ConfigError("family.delta", "missing (required by this command)")
        return ScalingFamily(self.rule, self.delta)


@dataclass(frozen=True)
class AnalysisBlock:
    """Knobs shared by every command."""

    S: int = 12
    horizon: float = 25.0
    grid_points: int = DEFAULT_GRID_POINTS
    tol: float = DEFAULT_TOL
    pair: Optional[Tuple[int, int]] = None  # None: (0, min(50, N // 3))
    mode: str = EXHAUSTIVE
    intensity_samples: int = DEFAULT_INTENSITY_SAMPLES


@dataclass(frozen=True)
class OutputBlock:
    dir: str = "results"


@dataclass(frozen=True)
class Scenario:
    name: str
    model: ModelBlock
    family: FamilyBlock
    analysis: AnalysisBlock
    output: OutputBlock
    raw: Dict[str, Any] = field(default_factory=dict, compare=False, repr=False)


# Default analysis settings
default_analysis = AnalysisBlock()


def load_scenario(path: str) -> Scenario:
    """Read and validate one JSON scenario file."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        logger.error(f"Scenario file not found: {path}")
        raise ConfigError("scenario", f"file not found: {path}") from e
    except json.JSONDecodeError as e:
        logger.error(f"Scenario {path} is not valid JSON: {e}")
        raise ConfigError("scenario", f"invalid JSON at line {e.lineno}: {e.msg}") from e
    return parse_scenario(raw, name=Path(path).stem)


def parse_scenario(raw: Any, name: str = "scenario") -> Scenario:
    try:
        scenario = _parse(raw, name)
    except ConfigError as e:
        logger.error(f"Invalid scenario {name!r}: {e}")
        raise
    logger.info(
        f"Loaded scenario {name!r}: {scenario.model.model.describe()}, N={scenario.model.N}, "
        f"S={scenario.analysis.S}, family={scenario.family.rule.value}"
    )
    return scenario


def _parse(raw: Any, name: str) -> Scenario:
    _expect(raw, dict, "scenario")
    _no_extra(raw, {"name", "model", "family", "analysis", "output"}, "")
    model_block = _parse_model(_field(raw, "model", "model"))
    family = _parse_family(raw.get("family", {}))
    analysis = _parse_analysis(raw.get("analysis", {}), model_block)
    output = raw.get("output", {})
    _expect(output, dict, "output")
    _no_extra(output, {"dir"}, "output")
    scenario = Scenario(
        name=str(raw.get("name", name)),
        model=model_block,
        family=family,
        analysis=analysis,
        output=OutputBlock(dir=str(output.get("dir", OutputBlock.dir))),
        raw=raw,
    )
    _check_declared_L(scenario)
    return scenario


def _parse_model(obj: Any) -> ModelBlock:
    _expect(obj, dict, "model")
    _no_extra(obj, {"class", "R", "N", "rates", "multipliers", "L"}, "model")
    try:
        chain_class = ChainClass(_field(obj, "class", "model"))
    except ValueError as e:
        raise ConfigError("model.class", f"expected one of {[c.value for c in ChainClass]}") from e
    R = _integer(_field(obj, "R", "model"), "model.R", minimum=1)
    N = _integer(_field(obj, "N", "model"), "model.N", minimum=1)
    if N < R:
        raise ConfigError("model.N", f"truncation N={N} must be >= R={R}")

    rates = _field(obj, "rates", "model")
    _expect(rates, dict, "model.rates")
    _no_extra(rates, {"birth", "death", "arrivals", "services"}, "model.rates")
    kwargs: Dict[str, Any] = {}
    for key in ("birth", "death"):
        if key in rates:
            kwargs[key] = _rate(rates[key], f"model.rates.{key}")
    for key in ("arrivals", "services"):
        if key in rates:
            _expect(rates[key], list, f"model.rates.{key}")
            kwargs[key] = tuple(_rate(r, f"model.rates.{key}[{i}]") for i, r in enumerate(rates[key]))

    multipliers = obj.get("multipliers", {})
    _expect(multipliers, dict, "model.multipliers")
    _no_extra(multipliers, {"birth", "death"}, "model.multipliers")
    for key in ("birth", "death"):
        if key in multipliers:
            try:
                kwargs[f"{key}_multipliers"] = MultiplierRule.from_config(multipliers[key])
            except (TypeError, ValueError) as e:
                raise ConfigError(f"model.multipliers.{key}", str(e)) from e

    if "L" in obj:
        kwargs["L"] = _number(obj["L"], "model.L")
    try:
        model = ChainModel(chain_class, R, **kwargs)
    except ValueError as e:
        raise ConfigError("model", str(e)) from e
    return ModelBlock(model=model, N=N)


def _parse_family(obj: Any) -> FamilyBlock:
    _expect(obj, dict, "family")
    _no_extra(obj, {"rule", "delta", "deltas"}, "family")
    try:
        rule = ScalingRule(obj.get("rule", ScalingRule.GEOMETRIC.value))
    except ValueError as e:
        raise ConfigError("family.rule", f"expected one of {[r.value for r in ScalingRule]}") from e
    delta = None
    if "delta" in obj:
        delta = _number(obj["delta"], "family.delta")
        if not delta > 1.0:
            raise ConfigError("family.delta", f"delta must be > 1, got {delta}")
    deltas: Tuple[float, ...] = ()
    if "deltas" in obj:
        _expect(obj["deltas"], list, "family.deltas")
        deltas = tuple(_number(d, f"family.deltas[{i}]") for i, d in enumerate(obj["deltas"]))
        for i, d in enumerate(deltas):
            if not d > 1.0:
                raise ConfigError(f"family.deltas[{i}]", f"delta must be > 1, got {d}")
    return FamilyBlock(rule=rule, delta=delta, deltas=deltas)


def _parse_analysis(obj: Any, model_block: ModelBlock) -> AnalysisBlock:
    _expect(obj, dict, "analysis")
    _no_extra(obj, {"S", "horizon", "grid_points", "tol", "pair", "mode", "intensity_samples"}, "analysis")
    d = default_analysis
    R, N = model_block.model.R, model_block.N
    S = _integer(obj.get("S", d.S), "analysis.S", minimum=R + 2)
    horizon = _number(obj.get("horizon", d.horizon), "analysis.horizon")
    if not horizon > 0.0:
        raise ConfigError("analysis.horizon", f"must be > 0, got {horizon}")
    grid_points = _integer(obj.get("grid_points", d.grid_points), "analysis.grid_points", minimum=1)
    tol = _number(obj.get("tol", d.tol), "analysis.tol")
    if not MIN_TOL <= tol <= MAX_TOL:
        raise ConfigError("analysis.tol", f"must lie in [{MIN_TOL:g}, {MAX_TOL:g}], got {tol}")
    pair = None
    if "pair" in obj:
        _expect(obj["pair"], list, "analysis.pair")
        if len(obj["pair"]) != 2:
            raise ConfigError("analysis.pair", "expected two state indices")
        pair = tuple(_integer(s, f"analysis.pair[{i}]", minimum=0) for i, s in enumerate(obj["pair"]))
        if max(pair) > N:
            raise ConfigError("analysis.pair", f"states must lie in 0..N={N}")
    mode = obj.get("mode", d.mode)
    if mode not in MODES:
        raise ConfigError("analysis.mode", f"expected one of {list(MODES)}, got {mode!r}")
    samples = _integer(obj.get("intensity_samples", d.intensity_samples), "analysis.intensity_samples", minimum=1)
    return AnalysisBlock(
        S=S, horizon=horizon, grid_points=grid_points, tol=tol, pair=pair, mode=mode, intensity_samples=samples
    )


def _check_declared_L(scenario: Scenario):
    model = scenario.model.model
    if model.L is None:
        return
    sampled = intensity_bound(model, scenario.analysis.horizon, scenario.analysis.intensity_samples)
    if sampled > model.L * (1.0 + 1e-12):
        raise ConfigError("model.L", f"declared bound {model.L:g} is below the sampled outflow {sampled:g}")


def _rate(obj: Any, path: str):
    try:
        return rate_from_config(obj, path)
    except RateError as e:
        where, _, message = str(e).partition(": ")
        raise ConfigError(where if where.startswith(path) else path, message or str(e)) from e


def _field(obj: dict, key: str, path: str) -> Any:
    if key not in obj:
        raise ConfigError(f"{path}.{key}" if path else key, "missing")
    return obj[key]


def _expect(obj: Any, kind: type, path: str):
    if not isinstance(obj, kind):
        raise ConfigError(path, f"expected {kind.__name__}, got {type(obj).__name__}")


def _no_extra(obj: dict, allowed: set, path: str):
    extra = sorted(set(obj) - allowed)
    if extra:
        where = f"{path}.{extra[0]}" if path else extra[0]
        raise ConfigError(where, f"unknown key (allowed: {sorted(allowed)})")


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    return float(value)


def _integer(value: Any, path: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value}")
    return value
