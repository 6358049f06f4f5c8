"""The six household energy problems.

Each problem kind carries a parameter schema (exactly five elicited
questions, mirroring the assistant dialogues, plus optional defaults-only
parameters), a builder that turns validated parameters into an
OptInstance, an independent oracle for the true optimum, and post-solve
derived quantities for reporting.

Canonical fixture parameter sets reproduce the known reference outputs:
EV charging cost 4.20 USD, HVAC setpoint 75 °F at 9.60 USD/day, PV area
300 sqft with 405.60 USD annual savings, heat-pump savings 550 USD, and
battery size 8.66875 kWh (9.125 kWh at unit efficiency).
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .ir import Constraint, ConvexTerm, LinExpr, OptInstance, VarDecl, VarRef
from .solver import INFEASIBLE, OPTIMAL, Solution

Value = Union[float, int, str, Tuple[float, float], List[float]]

PV_CAPACITY_FACTOR = 0.12  # flat panel derate used throughout
HOURS = 24


class ProblemKind(str, enum.Enum):
    EV_CHARGING = "ev_charging"
    HVAC_SETPOINT = "hvac_setpoint"
    BATTERY_DISPATCH = "battery_dispatch"
    PV_SIZING = "pv_sizing"
    HEAT_PUMP = "heat_pump"
    BATTERY_SIZING = "battery_sizing"

    @staticmethod
    def parse(text: str) -> "ProblemKind":
        key = text.strip().lower().replace("-", "").replace("_", "").replace(" ", "")
        for kind in ProblemKind:
            if kind.value.replace("_", "") == key or kind.name.lower().replace("_", "") == key:
                return kind
        aliases = {
            "ev": ProblemKind.EV_CHARGING,
            "evcharging": ProblemKind.EV_CHARGING,
            "hvac": ProblemKind.HVAC_SETPOINT,
            "dispatch": ProblemKind.BATTERY_DISPATCH,
            "batterycharging": ProblemKind.BATTERY_DISPATCH,
            "pv": ProblemKind.PV_SIZING,
            "solarpanel": ProblemKind.PV_SIZING,
            "heatpump": ProblemKind.HEAT_PUMP,
            "batterycapacity": ProblemKind.BATTERY_SIZING,
            "batterysizing": ProblemKind.BATTERY_SIZING,
        }
        if key in aliases:
            return aliases[key]
        raise KeyError(f"unknown problem kind {text!r}")


class ProblemError(Exception):
    """Base for problem-level failures; `code` is machine-readable."""

    code = "ProblemError"

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class InfeasibleSpec(ProblemError):
    code = "InfeasibleSpec"


class DimensionMismatch(ProblemError):
    code = "DimensionMismatch"


class NegativeInput(ProblemError):
    code = "NegativeInput"


class BadBounds(ProblemError):
    code = "BadBounds"


class ValidationFailed(ProblemError):
    code = "ValidationFailed"


@dataclass(frozen=True)
class ParamField:
    """One schema entry.  Fields with a question are elicited; fields
    without one are defaults the user may override but is never asked."""

    name: str
    ptype: str  # real | integer | interval | enum | vector | text
    unit: str = ""
    question: Optional[str] = None
    required: bool = True
    default: Optional[Value] = None
    minimum: Optional[float] = None
    maximum: Optional[float] = None
    min_exclusive: bool = False
    max_exclusive: bool = False
    choices: Tuple[str, ...] = ()
    vector_length: Optional[int] = None  # None: length set by context (e.g. window)

    def range_text(self) -> str:
        if self.minimum is None and self.maximum is None:
            return ""
        left = "(" if self.min_exclusive else "["
        right = ")" if self.max_exclusive else "]"
        lo = "-inf" if self.minimum is None else f"{self.minimum:g}"
        hi = "inf" if self.maximum is None else f"{self.maximum:g}"
        return f"{left}{lo}, {hi}{right}"


@dataclass(frozen=True)
class ParamSchema:
    kind: ProblemKind
    params: Tuple[ParamField, ...]

    def questions(self) -> List[ParamField]:
        return [f for f in self.params if f.question is not None]

    def field(self, name: str) -> ParamField:
        for f in self.params:
            if f.name == name:
                return f
        raise KeyError(name)


def _real(name, unit, question, minimum=None, maximum=None, *, default=None,
          min_exclusive=False, max_exclusive=False, required=True) -> ParamField:
    return ParamField(name, "real", unit, question, required, default,
                      minimum, maximum, min_exclusive, max_exclusive)


SCHEMAS: Dict[ProblemKind, ParamSchema] = {
    ProblemKind.EV_CHARGING: ParamSchema(
        ProblemKind.EV_CHARGING,
        (
            _real("charger_power_kw", "kW", "What is the charging capacity of your charger (kW)?",
                  0.0, 1000.0, min_exclusive=True),
            _real("daily_energy_kwh", "kWh", "How much energy does the EV need by departure (kWh)?",
                  0.0, 1e6),
            ParamField("charging_location", "enum", "", "Where do you usually charge (home / work / public)?",
                       True, "home", choices=("home", "work", "public")),
            ParamField("charging_window", "interval", "hour",
                       "When do you plug in and when do you leave (hours 0-23, e.g. 18-6)?", True),
            ParamField("price_profile", "vector", "USD/kWh",
                       "Hourly electricity prices over the window, comma-separated "
                       "(or 'default' for the standard tariff: 0.14 peak 18-22, 0.06 off-peak)?",
                       True, "default", minimum=0.0),
        ),
    ),
    ProblemKind.HVAC_SETPOINT: ParamSchema(
        ProblemKind.HVAC_SETPOINT,
        (
            ParamField("comfort_band", "interval", "F",
                       "What is your preferred temperature band (e.g. 65-75)?", True),
            _real("ambient_temp_f", "F", "What is the typical ambient temperature (F)?", -100.0, 200.0),
            _real("electricity_cost", "USD/kWh", "What is your electricity cost per kWh (USD)?", 0.0, 10.0),
            _real("hvac_efficiency", "COP", "What is the efficiency (COP) of your system?",
                  0.0, 20.0, min_exclusive=True),
            _real("occupancy_hours", "h/day", "How many hours per day is the space occupied?", 0.0, 24.0),
        ),
    ),
    ProblemKind.BATTERY_DISPATCH: ParamSchema(
        ProblemKind.BATTERY_DISPATCH,
        (
            _real("battery_capacity_kwh", "kWh", "What is the usable battery capacity (kWh)?",
                  0.0, 1e5, min_exclusive=True),
            _real("max_power_kw", "kW", "What is the battery's maximum charge/discharge rate (kW)?",
                  0.0, 1e4),
            ParamField("price_profile", "vector", "USD/kWh",
                       "Hourly prices for the next 24 hours (24 values, or 'default': 0.2 from 18-22, 0.1 otherwise)?",
                       True, "default", minimum=0.0, vector_length=HOURS),
            ParamField("solar_production", "vector", "kWh",
                       "Expected hourly solar production for the next 24 hours (24 values, or 'default')?",
                       True, "default", minimum=0.0, vector_length=HOURS),
            ParamField("household_demand", "vector", "kWh",
                       "Expected hourly household demand for the next 24 hours (24 values, or 'default')?",
                       True, "default", minimum=0.0, vector_length=HOURS),
            ParamField("no_export", "enum", "", None, False, "no", choices=("yes", "no")),
        ),
    ),
    ProblemKind.PV_SIZING: ParamSchema(
        ProblemKind.PV_SIZING,
        (
            ParamField("location", "text", "", "In which city or region is the home located?", True),
            _real("roof_area_sqft", "sqft", "What is the usable roof area (sq ft)?",
                  0.0, 1e6, min_exclusive=True),
            _real("monthly_consumption_kwh", "kWh", "What is the average monthly electricity consumption (kWh)?",
                  0.0, 1e6),
            _real("electricity_rate", "USD/kWh", "What is the electricity cost per kWh (USD)?", 0.0, 10.0),
            _real("budget_usd", "USD", "What is the budget for the installation (USD)?",
                  0.0, 1e9, min_exclusive=True),
            _real("panel_price_rate", "USD/sqft", None, 0.0, 1e6, min_exclusive=True, default=10.0),
            _real("panel_wattage_per_sqft", "W/sqft", None, 0.0, 1e4, min_exclusive=True, default=15.0),
            _real("capacity_factor", "", None, 0.0, 1.0, min_exclusive=True, default=PV_CAPACITY_FACTOR),
        ),
    ),
    ProblemKind.HEAT_PUMP: ParamSchema(
        ProblemKind.HEAT_PUMP,
        (
            ParamField("climate", "text", "", "How would you describe your local climate?", True),
            _real("electricity_rate", "USD/kWh", "What is the electricity price per kWh (USD)?", 0.0, 10.0),
            _real("ac_annual_consumption_kwh", "kWh/yr",
                  "What is the annual energy consumption of the current system (kWh)?", 0.0, 1e7),
            _real("hp_annual_consumption_kwh", "kWh/yr",
                  "What would the heat pump's annual energy consumption be (kWh)?", 0.0, 1e7),
            _real("annual_maintenance_usd", "USD/yr",
                  "What is the annual maintenance cost of the heat pump (USD)?", 0.0, 1e6, default=200.0),
        ),
    ),
    ProblemKind.BATTERY_SIZING: ParamSchema(
        ProblemKind.BATTERY_SIZING,
        (
            _real("evening_demand_kwh", "kWh/day", "How much evening electricity usage should the battery cover (kWh/day)?",
                  0.0, 1e5, min_exclusive=True),
            _real("battery_unit_cost", "USD/kWh^2", "What is the battery price coefficient (USD per kWh squared)?",
                  0.0, 1e6, min_exclusive=True),
            _real("battery_efficiency", "", "What is the battery efficiency (a value in (0, 1])?",
                  0.0, 1.0, min_exclusive=True),
            _real("daily_solar_kwh", "kWh/day", "How much solar energy do you produce each day (kWh)?", 0.0, 1e5),
            _real("electricity_rate", "USD/kWh", "What is the grid electricity price per kWh (USD)?", 0.0, 10.0),
            _real("lifespan_years", "yr", None, 0.0, 100.0, min_exclusive=True, default=2.0),
        ),
    ),
}


@dataclass(frozen=True)
class ElicitedParams:
    """Validated parameter values for one problem kind."""

    kind: ProblemKind
    values: Tuple[Tuple[str, Value], ...]

    @staticmethod
    def of(kind: ProblemKind, values: Dict[str, Value]) -> "ElicitedParams":
        schema = SCHEMAS[kind]
        merged: Dict[str, Value] = {}
        deferred: List[str] = []
        for f in schema.params:
            v = values.get(f.name, f.default)
            if v is None:
                continue  # missing required values are flagged below
            if v == "default":
                try:
                    v = resolve_default(kind, f, values)
                except ValidationFailed as exc:
                    # e.g. the default tariff needs the window first; report
                    # the missing prerequisites, not the default mechanics
                    deferred.append(exc.message)
                    continue
            merged[f.name] = v
        problems = validate_params(kind, merged) or deferred
        if problems:
            raise ValidationFailed("; ".join(problems))
        return ElicitedParams(kind, tuple(sorted(merged.items(), key=lambda kv: kv[0])))

    def get(self, name: str) -> Value:
        for k, v in self.values:
            if k == name:
                return v
        raise KeyError(name)

    def as_dict(self) -> Dict[str, Value]:
        return dict(self.values)


def resolve_default(kind: ProblemKind, f: ParamField, context: Dict[str, Value]) -> Value:
    """Expand the 'default' sentinel for context-dependent vector fields."""
    if f.name == "price_profile" and kind == ProblemKind.EV_CHARGING:
        window = context.get("charging_window")
        if not isinstance(window, tuple):
            raise ValidationFailed("price_profile: the charging window must be known before the default tariff applies")
        return standard_tou_prices(window_hours(window))
    if f.name == "price_profile" and kind == ProblemKind.BATTERY_DISPATCH:
        return default_day_prices()
    if f.name == "solar_production":
        return list(DISPATCH_FIXTURE_A["solar"])
    if f.name == "household_demand":
        return list(DISPATCH_FIXTURE_A["demand"])
    if f.default is None or f.default == "default":
        raise ValidationFailed(f"{f.name}: no default is available")
    return f.default


def window_hours(window: Tuple[float, float]) -> List[int]:
    """Hours covered by a plug-in/departure window; wraps past midnight.
    18-6 covers 18..23 and 0..5 (12 slots)."""
    start, end = int(window[0]), int(window[1])
    span = (end - start) % 24
    if span == 0:
        span = 24
    return [(start + i) % 24 for i in range(span)]


def standard_tou_prices(hours: Sequence[int], peak: float = 0.14, off_peak: float = 0.06) -> List[float]:
    """Time-of-use tariff: `peak` from 18:00 to 22:00, `off_peak` otherwise."""
    return [peak if 18 <= h < 22 else off_peak for h in hours]


def default_day_prices(peak: float = 0.2, off_peak: float = 0.1) -> List[float]:
    return [peak if 18 <= h < 22 else off_peak for h in range(HOURS)]


def validate_params(kind: ProblemKind, values: Dict[str, Value]) -> List[str]:
    """Physical-range and presence checks; returns human-readable problems."""
    schema = SCHEMAS[kind]
    problems: List[str] = []
    for f in schema.params:
        if f.name not in values:
            if f.required and f.default is None:
                problems.append(f"{f.name}: required parameter missing")
            continue
        problems.extend(check_value(f, values[f.name]))
    if kind == ProblemKind.HVAC_SETPOINT and "comfort_band" in values:
        band = values["comfort_band"]
        if isinstance(band, tuple) and band[0] > band[1]:
            problems.append(f"comfort_band: heating setpoint {band[0]} above cooling setpoint {band[1]}")
    if kind == ProblemKind.EV_CHARGING and "price_profile" in values and "charging_window" in values:
        window = values["charging_window"]
        prices = values["price_profile"]
        if isinstance(window, tuple) and isinstance(prices, list):
            horizon = len(window_hours(window))
            if len(prices) != horizon:
                problems.append(
                    f"price_profile: expected {horizon} values for the window, got {len(prices)}"
                )
    return problems


def check_value(f: ParamField, value: Value) -> List[str]:
    def in_range(x: float) -> Optional[str]:
        if f.minimum is not None and (x < f.minimum or (f.min_exclusive and x == f.minimum)):
            return f"{f.name}: {x:g} outside allowed range {f.range_text()}"
        if f.maximum is not None and (x > f.maximum or (f.max_exclusive and x == f.maximum)):
            return f"{f.name}: {x:g} outside allowed range {f.range_text()}"
        return None

    problems: List[str] = []
    if f.ptype in ("real", "integer"):
        if not isinstance(value, (int, float)) or isinstance(value, bool) or not math.isfinite(float(value)):
            problems.append(f"{f.name}: expected a number")
        else:
            err = in_range(float(value))
            if err:
                problems.append(err)
    elif f.ptype == "interval":
        if not (isinstance(value, tuple) and len(value) == 2):
            problems.append(f"{f.name}: expected an interval like 'a-b'")
    elif f.ptype == "vector":
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
            problems.append(f"{f.name}: expected a list of numbers")
        else:
            for v in value:
                err = in_range(float(v))
                if err:
                    problems.append(err)
                    break
            if f.vector_length is not None and len(value) != f.vector_length:
                problems.append(f"{f.name}: expected {f.vector_length} values, got {len(value)}")
    elif f.ptype == "enum":
        if not isinstance(value, str) or value.lower() not in f.choices:
            problems.append(f"{f.name}: expected one of {', '.join(f.choices)}")
    elif f.ptype == "text":
        if not isinstance(value, str) or not value.strip():
            problems.append(f"{f.name}: expected a short text answer")
    return problems


def parse_answer(f: ParamField, text: str) -> Value:
    """Turn a free-text elicitation answer into a typed value.

    Raises ValidationFailed with a message suitable for re-asking.
    """
    raw = text.strip()
    if not raw:
        raise ValidationFailed(f"{f.name}: empty answer")
    if raw.lower() == "default":
        if f.default is None:
            raise ValidationFailed(f"{f.name}: no default is available")
        return "default"  # sentinel; ElicitedParams.of expands it with full context
    if f.ptype == "real" or f.ptype == "integer":
        if "=" in raw:
            raw = raw.split("=", 1)[1].strip()
        try:
            num = float(raw.replace("$", "").replace(",", ""))
        except ValueError:
            raise ValidationFailed(f"{f.name}: could not read a number from {raw!r}")
        if f.ptype == "integer":
            if abs(num - round(num)) > 1e-9:
                raise ValidationFailed(f"{f.name}: expected a whole number")
            num = float(round(num))
        problems = check_value(f, num)
        if problems:
            raise ValidationFailed(problems[0])
        return num
    if f.ptype == "interval":
        pair = _parse_interval(raw)
        if pair is None:
            raise ValidationFailed(f"{f.name}: expected an interval like '65-75'")
        return pair
    if f.ptype == "vector":
        cleaned = raw.strip("[]() ")
        try:
            vec = [float(tok) for tok in cleaned.replace(";", ",").split(",") if tok.strip()]
        except ValueError:
            raise ValidationFailed(f"{f.name}: expected comma-separated numbers")
        problems = check_value(f, vec)
        if problems:
            raise ValidationFailed(problems[0])
        return vec
    if f.ptype == "enum":
        low = raw.lower()
        for choice in f.choices:
            if choice in low:
                return choice
        raise ValidationFailed(f"{f.name}: expected one of {', '.join(f.choices)}")
    return raw  # text


def _parse_interval(raw: str) -> Optional[Tuple[float, float]]:
    cleaned = raw.strip("[]() ")
    for sep in (" to ", "..", ",", "-"):
        if sep in cleaned:
            left, _, right = cleaned.partition(sep)
            try:
                return (float(left), float(right))
            except ValueError:
                continue
    return None


# ---------------------------------------------------------------------------
# Builders

def build_instance(kind: ProblemKind, p: ElicitedParams) -> OptInstance:
    return _BUILDERS[kind](p)


def build_ev_charging(p: ElicitedParams) -> OptInstance:
    hours = window_hours(p.get("charging_window"))  # type: ignore[arg-type]
    horizon = len(hours)
    prices = _resolve_prices_ev(p, hours)
    if len(prices) != horizon:
        raise DimensionMismatch(f"price profile has {len(prices)} entries for a {horizon}-hour window")
    energy = float(p.get("daily_energy_kwh"))
    cap = float(p.get("charger_power_kw"))
    if energy > horizon * cap + 1e-9:
        raise InfeasibleSpec(
            f"required energy {energy:g} kWh exceeds window capacity {horizon} h x {cap:g} kW = {horizon * cap:g} kWh"
        )
    x = [VarRef("x", t) for t in range(horizon)]
    objective = ConvexTerm("linear", LinExpr.of([(prices[t], x[t]) for t in range(horizon)]))
    total = Constraint(LinExpr.of([(1.0, r) for r in x]), "==", energy, label="total_energy")
    return OptInstance.of(
        [VarDecl.vector("x", horizon, 0.0, cap)],
        [objective],
        [total],
        metadata={
            "kind": ProblemKind.EV_CHARGING.value,
            "unit:x": "kW",
            "objective_unit": "USD",
            "hours": ",".join(str(h) for h in hours),
        },
    )


def _resolve_prices_ev(p: ElicitedParams, hours: Sequence[int]) -> List[float]:
    prices = p.get("price_profile")
    if prices == "default" or prices == ["default"]:
        return standard_tou_prices(hours)
    return [float(v) for v in prices]  # type: ignore[union-attr]


def build_hvac(p: ElicitedParams) -> OptInstance:
    band = p.get("comfort_band")
    heat_sp, cool_sp = float(band[0]), float(band[1])  # type: ignore[index]
    if heat_sp > cool_sp:
        raise BadBounds(f"heating setpoint {heat_sp:g} above cooling setpoint {cool_sp:g}")
    cost = float(p.get("electricity_cost"))
    ambient = float(p.get("ambient_temp_f"))
    eff = float(p.get("hvac_efficiency"))
    occ = float(p.get("occupancy_hours"))
    weight = cost * occ / eff
    x = VarRef("x")
    term = ConvexTerm("abs", LinExpr.of([(1.0, x)], -ambient), weight)
    oracle_x = min(max(ambient, heat_sp), cool_sp)
    return OptInstance.of(
        [VarDecl.scalar("x", heat_sp, cool_sp)],
        [term],
        [],
        metadata={
            "kind": ProblemKind.HVAC_SETPOINT.value,
            "unit:x": "F",
            "objective_unit": "USD",
            "oracle_x_star": repr(oracle_x),
        },
    )


def build_battery_dispatch(p: ElicitedParams) -> OptInstance:
    prices = [float(v) for v in p.get("price_profile")]  # type: ignore[union-attr]
    solar = [float(v) for v in p.get("solar_production")]  # type: ignore[union-attr]
    demand = [float(v) for v in p.get("household_demand")]  # type: ignore[union-attr]
    for name, vec in (("price_profile", prices), ("solar_production", solar), ("household_demand", demand)):
        if len(vec) != HOURS:
            raise DimensionMismatch(f"{name} must have {HOURS} entries, got {len(vec)}")
    cap = float(p.get("battery_capacity_kwh"))
    power = float(p.get("max_power_kw"))
    x = [VarRef("x", t) for t in range(HOURS)]
    soc = [VarRef("b", t) for t in range(HOURS)]
    constraints: List[Constraint] = [
        Constraint(LinExpr.of([(1.0, soc[0]), (-1.0, x[0])]), "==", 0.0, label="state_0")
    ]
    for t in range(1, HOURS):
        constraints.append(
            Constraint(LinExpr.of([(1.0, soc[t]), (-1.0, soc[t - 1]), (-1.0, x[t])]), "==", 0.0, label=f"state_{t}")
        )
    constraints.append(Constraint(LinExpr.of([(1.0, soc[HOURS - 1])]), "==", 0.0, label="state_terminal"))
    no_export = str(p.as_dict().get("no_export", "no")).lower() == "yes"
    if no_export:
        for t in range(HOURS):
            constraints.append(
                Constraint(LinExpr.of([(1.0, x[t])]), ">=", solar[t] - demand[t], label=f"no_export_{t}")
            )
    baseline = sum(prices[t] * (demand[t] - solar[t]) for t in range(HOURS))
    objective = ConvexTerm("linear", LinExpr.of([(prices[t], x[t]) for t in range(HOURS)], baseline))
    return OptInstance.of(
        [VarDecl.vector("x", HOURS, -power, power), VarDecl.vector("b", HOURS, 0.0, cap)],
        [objective],
        constraints,
        metadata={
            "kind": ProblemKind.BATTERY_DISPATCH.value,
            "unit:x": "kW",
            "unit:b": "kWh",
            "objective_unit": "USD",
            "sign_convention": "positive x charges the battery; grid usage is x - solar + demand",
        },
    )


def build_pv_sizing(p: ElicitedParams) -> OptInstance:
    budget = float(p.get("budget_usd"))
    rate = float(p.get("panel_price_rate"))
    roof = float(p.get("roof_area_sqft"))
    wattage = float(p.get("panel_wattage_per_sqft"))
    monthly = float(p.get("monthly_consumption_kwh"))
    cf = float(p.get("capacity_factor"))
    yield_per_sqft = wattage * cf
    if roof * yield_per_sqft < monthly - 1e-9:
        raise InfeasibleSpec(
            f"roof area {roof:g} sqft can produce at most {roof * yield_per_sqft:g} kWh/month, "
            f"below the consumption of {monthly:g} kWh"
        )
    if monthly > 0 and rate * (monthly / yield_per_sqft) > budget + 1e-9:
        raise InfeasibleSpec(
            f"covering {monthly:g} kWh/month needs {monthly / yield_per_sqft:g} sqft costing "
            f"{rate * monthly / yield_per_sqft:g} USD, above the budget of {budget:g} USD"
        )
    a = VarRef("area")
    objective = ConvexTerm("linear", LinExpr.of([(-rate, a)], budget))
    constraints = [
        Constraint(LinExpr.of([(1.0, a)]), "<=", roof, label="roof_area"),
        Constraint(LinExpr.of([(yield_per_sqft, a)]), ">=", monthly, label="meet_consumption"),
    ]
    return OptInstance.of(
        [VarDecl.scalar("area", 0.0, None)],
        [objective],
        constraints,
        metadata={
            "kind": ProblemKind.PV_SIZING.value,
            "unit:area": "sqft",
            "objective_unit": "USD",
        },
    )


def build_heat_pump(p: ElicitedParams) -> OptInstance:
    rate = float(p.get("electricity_rate"))
    ac = float(p.get("ac_annual_consumption_kwh"))
    hp = float(p.get("hp_annual_consumption_kwh"))
    maint = float(p.get("annual_maintenance_usd"))
    for name, v in (("electricity_rate", rate), ("ac_annual_consumption_kwh", ac),
                    ("hp_annual_consumption_kwh", hp), ("annual_maintenance_usd", maint)):
        if v < 0:
            raise NegativeInput(f"{name} must be nonnegative, got {v:g}")
    hp_cost = VarRef("hp_cost")
    ac_cost = VarRef("ac_cost")
    constraints = [
        Constraint(LinExpr.of([(1.0, hp_cost)]), "==", hp * rate + maint, label="hp_annual_cost"),
        Constraint(LinExpr.of([(1.0, ac_cost)]), "==", ac * rate, label="ac_annual_cost"),
    ]
    objective = ConvexTerm("linear", LinExpr.of([(1.0, hp_cost), (-1.0, ac_cost)]))
    return OptInstance.of(
        [VarDecl.scalar("hp_cost", 0.0, None), VarDecl.scalar("ac_cost", 0.0, None)],
        [objective],
        constraints,
        metadata={
            "kind": ProblemKind.HEAT_PUMP.value,
            "unit:hp_cost": "USD/yr",
            "unit:ac_cost": "USD/yr",
            "objective_unit": "USD",
        },
    )


def build_battery_sizing(p: ElicitedParams) -> OptInstance:
    unit_cost = float(p.get("battery_unit_cost"))
    rate = float(p.get("electricity_rate"))
    years = float(p.get("lifespan_years"))
    demand = float(p.get("evening_demand_kwh"))
    solar = float(p.get("daily_solar_kwh"))
    eff = float(p.get("battery_efficiency"))
    for name, v in (("battery_unit_cost", unit_cost), ("electricity_rate", rate),
                    ("lifespan_years", years), ("evening_demand_kwh", demand),
                    ("daily_solar_kwh", solar), ("battery_efficiency", eff)):
        if v < 0:
            raise NegativeInput(f"{name} must be nonnegative, got {v:g}")
    b = VarRef("bsize")
    grid_weight = rate * 365.0 * years
    # Grid purchases G >= demand - solar - eff*B, G >= 0 enter the objective
    # as their epigraph value max(demand - solar - eff*B, 0) directly.
    terms = [
        ConvexTerm("square", LinExpr.of([(1.0, b)]), unit_cost),
        ConvexTerm("hinge0", LinExpr.of([(-eff, b)], demand - solar), grid_weight),
    ]
    return OptInstance.of(
        [VarDecl.scalar("bsize", 0.0, None)],
        terms,
        [],
        metadata={
            "kind": ProblemKind.BATTERY_SIZING.value,
            "unit:bsize": "kWh",
            "objective_unit": "USD",
            "grid_note": "daily grid purchase G = max(demand - solar - eff*B, 0)",
        },
    )


_BUILDERS = {
    ProblemKind.EV_CHARGING: build_ev_charging,
    ProblemKind.HVAC_SETPOINT: build_hvac,
    ProblemKind.BATTERY_DISPATCH: build_battery_dispatch,
    ProblemKind.PV_SIZING: build_pv_sizing,
    ProblemKind.HEAT_PUMP: build_heat_pump,
    ProblemKind.BATTERY_SIZING: build_battery_sizing,
}


# ---------------------------------------------------------------------------
# Oracles: exact optima computed independently of the simplex.

def oracle(kind: ProblemKind, p: ElicitedParams) -> Solution:
    """Closed-form / exhaustive optimum for the true instance.

    EV: exact greedy fill of cheapest hours.  HVAC: clamp formula.
    PV / heat pump / battery sizing: closed forms.  Dispatch: an
    independent LP solve through scipy (HiGHS), a codebase entirely
    separate from the built-in simplex.
    """
    if kind == ProblemKind.EV_CHARGING:
        return _oracle_ev(p)
    if kind == ProblemKind.HVAC_SETPOINT:
        return _oracle_hvac(p)
    if kind == ProblemKind.BATTERY_DISPATCH:
        return _oracle_dispatch(p)
    if kind == ProblemKind.PV_SIZING:
        return _oracle_pv(p)
    if kind == ProblemKind.HEAT_PUMP:
        return _oracle_heat_pump(p)
    if kind == ProblemKind.BATTERY_SIZING:
        return _oracle_battery_sizing(p)
    raise KeyError(kind)


def _oracle_ev(p: ElicitedParams) -> Solution:
    hours = window_hours(p.get("charging_window"))  # type: ignore[arg-type]
    horizon = len(hours)
    prices = _resolve_prices_ev(p, hours)
    energy = float(p.get("daily_energy_kwh"))
    cap = float(p.get("charger_power_kw"))
    if energy > horizon * cap + 1e-9:
        raise InfeasibleSpec(
            f"required energy {energy:g} kWh exceeds window capacity {horizon} h x {cap:g} kW = {horizon * cap:g} kWh"
        )
    x = [0.0] * horizon
    remaining = energy
    for t in sorted(range(horizon), key=lambda i: (prices[i], i)):
        take = min(cap, remaining)
        x[t] = take
        remaining -= take
        if remaining <= 1e-12:
            break
    objective = sum(prices[t] * x[t] for t in range(horizon))
    return Solution(OPTIMAL, {VarRef("x", t): x[t] for t in range(horizon)}, objective)


def _oracle_hvac(p: ElicitedParams) -> Solution:
    band = p.get("comfort_band")
    heat_sp, cool_sp = float(band[0]), float(band[1])  # type: ignore[index]
    if heat_sp > cool_sp:
        raise BadBounds(f"heating setpoint {heat_sp:g} above cooling setpoint {cool_sp:g}")
    ambient = float(p.get("ambient_temp_f"))
    x = min(max(ambient, heat_sp), cool_sp)
    cost = float(p.get("electricity_cost")) * abs(x - ambient) / float(p.get("hvac_efficiency")) * float(
        p.get("occupancy_hours")
    )
    return Solution(OPTIMAL, {VarRef("x"): x}, cost)


def _oracle_dispatch(p: ElicitedParams) -> Solution:
    from scipy.optimize import linprog  # deferred: oracle-only dependency

    prices = [float(v) for v in p.get("price_profile")]  # type: ignore[union-attr]
    solar = [float(v) for v in p.get("solar_production")]  # type: ignore[union-attr]
    demand = [float(v) for v in p.get("household_demand")]  # type: ignore[union-attr]
    cap = float(p.get("battery_capacity_kwh"))
    power = float(p.get("max_power_kw"))
    no_export = str(p.as_dict().get("no_export", "no")).lower() == "yes"
    n = HOURS
    # Columns: x_0..x_23, b_0..b_23
    import numpy as np

    c = np.concatenate([np.array(prices), np.zeros(n)])
    A_eq = []
    b_eq = []
    row = np.zeros(2 * n)
    row[n] = 1.0
    row[0] = -1.0
    A_eq.append(row)
    b_eq.append(0.0)
    for t in range(1, n):
        row = np.zeros(2 * n)
        row[n + t] = 1.0
        row[n + t - 1] = -1.0
        row[t] = -1.0
        A_eq.append(row)
        b_eq.append(0.0)
    row = np.zeros(2 * n)
    row[2 * n - 1] = 1.0
    A_eq.append(row)
    b_eq.append(0.0)
    A_ub = None
    b_ub = None
    if no_export:
        rows = []
        rhs = []
        for t in range(n):
            row = np.zeros(2 * n)
            row[t] = -1.0
            rows.append(row)
            rhs.append(-(solar[t] - demand[t]))
        A_ub = np.array(rows)
        b_ub = np.array(rhs)
    bounds = [(-power, power)] * n + [(0.0, cap)] * n
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=np.array(A_eq), b_eq=np.array(b_eq), bounds=bounds, method="highs")
    if res.status == 2:
        return Solution(INFEASIBLE)
    if not res.success:
        raise RuntimeError(f"reference LP solve failed: {res.message}")
    baseline = sum(prices[t] * (demand[t] - solar[t]) for t in range(n))
    assignment = {VarRef("x", t): float(res.x[t]) for t in range(n)}
    assignment.update({VarRef("b", t): float(res.x[n + t]) for t in range(n)})
    return Solution(OPTIMAL, assignment, float(res.fun) + baseline)


def _oracle_pv(p: ElicitedParams) -> Solution:
    instance_check = build_pv_sizing(p)  # reuse the feasibility guards
    del instance_check
    budget = float(p.get("budget_usd"))
    rate = float(p.get("panel_price_rate"))
    roof = float(p.get("roof_area_sqft"))
    # Objective budget - rate*A strictly decreases in A, so A* is the roof.
    return Solution(OPTIMAL, {VarRef("area"): roof}, budget - rate * roof)


def _oracle_heat_pump(p: ElicitedParams) -> Solution:
    rate = float(p.get("electricity_rate"))
    ac = float(p.get("ac_annual_consumption_kwh"))
    hp = float(p.get("hp_annual_consumption_kwh"))
    maint = float(p.get("annual_maintenance_usd"))
    for name, v in (("electricity_rate", rate), ("ac_annual_consumption_kwh", ac),
                    ("hp_annual_consumption_kwh", hp), ("annual_maintenance_usd", maint)):
        if v < 0:
            raise NegativeInput(f"{name} must be nonnegative, got {v:g}")
    a = hp * rate + maint
    b = ac * rate
    return Solution(OPTIMAL, {VarRef("hp_cost"): a, VarRef("ac_cost"): b}, a - b)


def _oracle_battery_sizing(p: ElicitedParams) -> Solution:
    unit_cost = float(p.get("battery_unit_cost"))
    rate = float(p.get("electricity_rate"))
    years = float(p.get("lifespan_years"))
    demand = float(p.get("evening_demand_kwh"))
    solar = float(p.get("daily_solar_kwh"))
    eff = float(p.get("battery_efficiency"))
    k = rate * 365.0 * years
    deficit = demand - solar
    if deficit <= 0 or k == 0.0:
        best = 0.0
    else:
        best = min(k * eff / (2.0 * unit_cost), deficit / eff)
    value = unit_cost * best * best + k * max(deficit - eff * best, 0.0)
    return Solution(OPTIMAL, {VarRef("bsize"): best}, value)


# ---------------------------------------------------------------------------
# Post-solve derived quantities for reporting and explanations.

def derived_outputs(kind: ProblemKind, p: ElicitedParams, sol: Solution) -> List[Tuple[str, float, str]]:
    """(label, value, unit) rows computed from the parameters and solution."""
    if sol.status != OPTIMAL or sol.assignment is None:
        return []
    rows: List[Tuple[str, float, str]] = []
    if kind == ProblemKind.EV_CHARGING:
        rows.append(("total_charging_cost", float(sol.objective or 0.0), "USD"))
    elif kind == ProblemKind.HVAC_SETPOINT:
        rows.append(("optimal_temperature", sol.value("x"), "F"))
        rows.append(("daily_energy_cost", float(sol.objective or 0.0), "USD"))
    elif kind == ProblemKind.BATTERY_DISPATCH:
        rows.append(("total_cost", float(sol.objective or 0.0), "USD"))
    elif kind == ProblemKind.PV_SIZING:
        area = sol.value("area")
        rate = float(p.get("panel_price_rate"))
        wattage = float(p.get("panel_wattage_per_sqft"))
        cf = float(p.get("capacity_factor"))
        monthly = float(p.get("monthly_consumption_kwh"))
        elec = float(p.get("electricity_rate"))
        production = area * wattage * cf
        savings = 12.0 * monthly * elec - 12.0 * (production - monthly) * elec
        rows.append(("panel_area", area, "sqft"))
        rows.append(("total_cost", rate * area, "USD"))
        rows.append(("monthly_production", production, "kWh"))
        rows.append(("annual_savings", savings, "USD"))
    elif kind == ProblemKind.HEAT_PUMP:
        rows.append(("annual_savings", -(sol.objective or 0.0), "USD"))
        rows.append(("heat_pump_annual_cost", sol.value("hp_cost"), "USD"))
        rows.append(("current_system_annual_cost", sol.value("ac_cost"), "USD"))
    elif kind == ProblemKind.BATTERY_SIZING:
        best = sol.value("bsize")
        demand = float(p.get("evening_demand_kwh"))
        solar = float(p.get("daily_solar_kwh"))
        eff = float(p.get("battery_efficiency"))
        rows.append(("battery_size", best, "kWh"))
        rows.append(("daily_grid_purchase", max(demand - solar - eff * best, 0.0), "kWh"))
        rows.append(("total_cost_over_lifetime", float(sol.objective or 0.0), "USD"))
    return rows


# ---------------------------------------------------------------------------
# CSV ingestion (header `t,value`, '.' decimals) and the dispatch fixture.

def load_series_csv(path: Union[str, Path]) -> List[float]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "value"]:
            raise ValueError(f"{path}: expected header 't,value'")
        values: List[float] = []
        for i, row in enumerate(reader):
            if len(row) != 2:
                raise ValueError(f"{path}: row {i + 2} must have two columns")
            if int(row[0]) != i:
                raise ValueError(f"{path}: periods must run 0,1,2,... (row {i + 2})")
            values.append(float(row[1]))
    return values


def load_dispatch_csv(path: Union[str, Path]) -> Dict[str, List[float]]:
    """Wide dispatch fixture: header `t,price,solar,demand`."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["t", "price", "solar", "demand"]:
            raise ValueError(f"{path}: expected header 't,price,solar,demand'")
        price: List[float] = []
        solar: List[float] = []
        demand: List[float] = []
        for i, row in enumerate(reader):
            if int(row[0]) != i:
                raise ValueError(f"{path}: periods must run 0,1,2,... (row {i + 2})")
            price.append(float(row[1]))
            solar.append(float(row[2]))
            demand.append(float(row[3]))
    return {"price": price, "solar": solar, "demand": demand}


# Deterministic day used by the dispatch fixture and as the vector defaults:
# a morning-to-afternoon solar bell within [0, 0.5] kWh and a household
# demand profile with an evening bump within [0.2, 3.0] kWh.
DISPATCH_FIXTURE_A: Dict[str, List[float]] = {
    "price": default_day_prices(),
    "solar": [
        0.0, 0.0, 0.0, 0.0, 0.0, 0.02,
        0.08, 0.18, 0.3, 0.4, 0.46, 0.5,
        0.5, 0.46, 0.38, 0.28, 0.16, 0.06,
        0.01, 0.0, 0.0, 0.0, 0.0, 0.0,
    ],
    "demand": [
        0.6, 0.5, 0.45, 0.4, 0.4, 0.5,
        0.9, 1.4, 1.2, 1.0, 0.9, 1.0,
        1.1, 1.0, 0.9, 1.1, 1.6, 2.2,
        2.8, 3.0, 2.6, 2.0, 1.2, 0.8,
    ],
}


# ---------------------------------------------------------------------------
# Canonical fixture parameter sets (reproduce the reference outputs).

def fixture_params(kind: ProblemKind) -> ElicitedParams:
    if kind == ProblemKind.EV_CHARGING:
        return ElicitedParams.of(kind, {
            "charger_power_kw": 15.0,
            "daily_energy_kwh": 70.0,
            "charging_location": "home",
            "charging_window": (18.0, 6.0),
            "price_profile": standard_tou_prices(window_hours((18.0, 6.0))),
        })
    if kind == ProblemKind.HVAC_SETPOINT:
        return ElicitedParams.of(kind, {
            "comfort_band": (65.0, 75.0),
            "ambient_temp_f": 85.0,
            "electricity_cost": 0.2,
            "hvac_efficiency": 2.5,
            "occupancy_hours": 12.0,
        })
    if kind == ProblemKind.BATTERY_DISPATCH:
        return ElicitedParams.of(kind, {
            "battery_capacity_kwh": 20.0,
            "max_power_kw": 3.0,
            "price_profile": list(DISPATCH_FIXTURE_A["price"]),
            "solar_production": list(DISPATCH_FIXTURE_A["solar"]),
            "household_demand": list(DISPATCH_FIXTURE_A["demand"]),
        })
    if kind == ProblemKind.PV_SIZING:
        return ElicitedParams.of(kind, {
            "location": "Seattle",
            "roof_area_sqft": 300.0,
            "monthly_consumption_kwh": 400.0,
            "electricity_rate": 0.13,
            "budget_usd": 8000.0,
        })
    if kind == ProblemKind.HEAT_PUMP:
        return ElicitedParams.of(kind, {
            "climate": "mild",
            "electricity_rate": 0.75,
            "ac_annual_consumption_kwh": 3000.0,
            "hp_annual_consumption_kwh": 2000.0,
            "annual_maintenance_usd": 200.0,
        })
    if kind == ProblemKind.BATTERY_SIZING:
        return ElicitedParams.of(kind, {
            "evening_demand_kwh": 30.0,
            "battery_unit_cost": 10.0,
            "battery_efficiency": 0.95,
            "daily_solar_kwh": 10.0,
            "electricity_rate": 0.25,
            "lifespan_years": 2.0,
        })
    raise KeyError(kind)


# ---------------------------------------------------------------------------
# Seeded random valid parameters for benchmarks.

def sample_params(kind: ProblemKind, rng) -> ElicitedParams:
    """Random valid parameters with a positive true optimum where the
    gap metric requires one (all kinds except heat pump, whose objective
    is a signed cost difference)."""
    for _ in range(64):
        values = _sample_raw(kind, rng)
        try:
            p = ElicitedParams.of(kind, values)
            v_star = oracle(kind, p).objective
        except ProblemError:
            continue
        if v_star is None:
            continue
        if kind == ProblemKind.HEAT_PUMP:
            if abs(v_star) > 1e-6:  # sign-indefinite objective; just avoid 0
                return p
        elif v_star > 1e-6:
            return p
    raise RuntimeError(f"could not sample valid parameters for {kind}")


def _sample_raw(kind: ProblemKind, rng) -> Dict[str, Value]:
    if kind == ProblemKind.EV_CHARGING:
        window = (18.0, 6.0)
        horizon = len(window_hours(window))
        cap = round(rng.uniform(5.0, 20.0), 1)
        energy = round(rng.uniform(0.2, 0.8) * horizon * cap, 1)
        prices = [round(rng.uniform(0.05, 0.3), 2) for _ in range(horizon)]
        return {
            "charger_power_kw": cap,
            "daily_energy_kwh": max(energy, 1.0),
            "charging_location": "home",
            "charging_window": window,
            "price_profile": prices,
        }
    if kind == ProblemKind.HVAC_SETPOINT:
        low = round(rng.uniform(60.0, 70.0), 0)
        high = low + round(rng.uniform(5.0, 15.0), 0)
        return {
            "comfort_band": (low, high),
            "ambient_temp_f": high + round(rng.uniform(1.0, 20.0), 0),
            "electricity_cost": round(rng.uniform(0.08, 0.4), 2),
            "hvac_efficiency": round(rng.uniform(1.5, 4.0), 1),
            "occupancy_hours": round(rng.uniform(4.0, 24.0), 0),
        }
    if kind == ProblemKind.BATTERY_DISPATCH:
        solar = [round(max(0.0, 0.5 * math.sin((h - 5) / 14 * math.pi)) * rng.uniform(0.5, 1.0), 2)
                 if 5 <= h <= 19 else 0.0 for h in range(HOURS)]
        demand = [round(rng.uniform(0.3, 3.0), 2) for _ in range(HOURS)]
        return {
            "battery_capacity_kwh": round(rng.uniform(5.0, 25.0), 1),
            "max_power_kw": round(rng.uniform(1.0, 4.0), 1),
            "price_profile": default_day_prices(round(rng.uniform(0.15, 0.35), 2), round(rng.uniform(0.05, 0.14), 2)),
            "solar_production": solar,
            "household_demand": demand,
        }
    if kind == ProblemKind.PV_SIZING:
        roof = round(rng.uniform(150.0, 600.0), 0)
        rate = 10.0
        budget = round(rate * roof * rng.uniform(1.2, 3.0), 0)  # positive unused budget at A*=roof
        monthly = round(roof * 15.0 * PV_CAPACITY_FACTOR * rng.uniform(0.2, 0.9), 0)
        return {
            "location": "Seattle",
            "roof_area_sqft": roof,
            "monthly_consumption_kwh": monthly,
            "electricity_rate": round(rng.uniform(0.08, 0.3), 2),
            "budget_usd": budget,
        }
    if kind == ProblemKind.HEAT_PUMP:
        return {
            "climate": "mild",
            "electricity_rate": round(rng.uniform(0.1, 0.9), 2),
            "ac_annual_consumption_kwh": round(rng.uniform(1000.0, 6000.0), 0),
            "hp_annual_consumption_kwh": round(rng.uniform(500.0, 4000.0), 0),
            "annual_maintenance_usd": round(rng.uniform(0.0, 400.0), 0),
        }
    if kind == ProblemKind.BATTERY_SIZING:
        # Only the five elicited fields are randomized; defaults-only
        # parameters (lifespan) keep their schema defaults so that scripted
        # conversations and oracles see the same problem.
        solar = round(rng.uniform(0.0, 20.0), 1)
        return {
            "evening_demand_kwh": round(solar + rng.uniform(5.0, 30.0), 1),
            "battery_unit_cost": round(rng.uniform(2.0, 30.0), 1),
            "battery_efficiency": round(rng.uniform(0.7, 1.0), 2),
            "daily_solar_kwh": solar,
            "electricity_rate": round(rng.uniform(0.1, 0.5), 2),
        }
    raise KeyError(kind)


def schemas_to_jsonable() -> List[dict]:
    """Schema export for the question-rendering UI."""
    out = []
    for kind in ProblemKind:
        schema = SCHEMAS[kind]
        out.append({
            "kind": kind.value,
            "params": [
                {
                    "name": f.name,
                    "type": f.ptype,
                    "unit": f.unit,
                    "question": f.question,
                    "required": f.required,
                    "default": f.default,
                    "minimum": f.minimum,
                    "maximum": f.maximum,
                    "min_exclusive": f.min_exclusive,
                    "max_exclusive": f.max_exclusive,
                    "choices": list(f.choices),
                    "vector_length": f.vector_length,
                }
                for f in schema.params
            ],
        })
    return out
