"""Reference formulation documents, rendered from elicited parameters.

`golden_document(kind, params)` emits DSL text whose compiled optimum
equals the matching builder/oracle optimum.  The benchmark harness feeds
these to scripted adapters; the static files under fixtures/dsl/ are the
same renderings for the canonical fixture parameter sets.
"""

from __future__ import annotations

from typing import List

from .problems import (
    HOURS,
    ElicitedParams,
    ProblemKind,
    window_hours,
    _resolve_prices_ev,
)


def _fmt(v: float) -> str:
    v = float(v)
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _vec(values) -> str:
    return "[" + ", ".join(_fmt(v) for v in values) + "]"


def golden_document(kind: ProblemKind, p: ElicitedParams) -> str:
    if kind == ProblemKind.EV_CHARGING:
        hours = window_hours(p.get("charging_window"))  # type: ignore[arg-type]
        horizon = len(hours)
        prices = _resolve_prices_ev(p, hours)
        return (
            f'problem "ev_charging"\n'
            f"var x[{horizon}] >= 0 <= {_fmt(p.get('charger_power_kw'))}\n"
            f"param p[{horizon}] = {_vec(prices)}\n"
            f"minimize sum(t, p[t] * x[t])\n"
            f"subject sum(t, x[t]) == {_fmt(p.get('daily_energy_kwh'))}\n"
        )
    if kind == ProblemKind.HVAC_SETPOINT:
        band = p.get("comfort_band")
        weight = float(p.get("electricity_cost")) * float(p.get("occupancy_hours")) / float(p.get("hvac_efficiency"))
        return (
            f'problem "hvac_setpoint"\n'
            f"var x >= {_fmt(band[0])} <= {_fmt(band[1])}\n"  # type: ignore[index]
            f"param y = {_fmt(p.get('ambient_temp_f'))}\n"
            f"minimize {_fmt(weight)} * abs(x - y)\n"
        )
    if kind == ProblemKind.BATTERY_DISPATCH:
        power = _fmt(p.get("max_power_kw"))
        lines: List[str] = [
            'problem "battery_dispatch"',
            f"var x[{HOURS}] >= -{power} <= {power}",
            f"var b[{HOURS}] >= 0 <= {_fmt(p.get('battery_capacity_kwh'))}",
            f"param p[{HOURS}] = {_vec(p.get('price_profile'))}",
            f"param s[{HOURS}] = {_vec(p.get('solar_production'))}",
            f"param d[{HOURS}] = {_vec(p.get('household_demand'))}",
            "minimize sum(t, p[t] * x[t]) + sum(t, p[t] * d[t]) - sum(t, p[t] * s[t])",
            "subject b[0] - x[0] == 0",
        ]
        for t in range(1, HOURS):
            lines.append(f"subject b[{t}] - b[{t - 1}] - x[{t}] == 0")
        lines.append(f"subject b[{HOURS - 1}] == 0")
        return "\n".join(lines) + "\n"
    if kind == ProblemKind.PV_SIZING:
        yield_per_sqft = float(p.get("panel_wattage_per_sqft")) * float(p.get("capacity_factor"))
        return (
            f'problem "pv_sizing"\n'
            f"var area >= 0\n"
            f"param budget = {_fmt(p.get('budget_usd'))}\n"
            f"minimize budget - {_fmt(p.get('panel_price_rate'))} * area\n"
            f"subject area <= {_fmt(p.get('roof_area_sqft'))}\n"
            f"subject {_fmt(yield_per_sqft)} * area >= {_fmt(p.get('monthly_consumption_kwh'))}\n"
        )
    if kind == ProblemKind.HEAT_PUMP:
        rate = float(p.get("electricity_rate"))
        hp_total = float(p.get("hp_annual_consumption_kwh")) * rate + float(p.get("annual_maintenance_usd"))
        ac_total = float(p.get("ac_annual_consumption_kwh")) * rate
        return (
            f'problem "heat_pump"\n'
            f"var hp_cost >= 0\n"
            f"var ac_cost >= 0\n"
            f"minimize hp_cost - ac_cost\n"
            f"subject hp_cost == {_fmt(hp_total)}\n"
            f"subject ac_cost == {_fmt(ac_total)}\n"
        )
    if kind == ProblemKind.BATTERY_SIZING:
        k = float(p.get("electricity_rate")) * 365.0 * float(p.get("lifespan_years"))
        deficit = float(p.get("evening_demand_kwh")) - float(p.get("daily_solar_kwh"))
        eff = float(p.get("battery_efficiency"))
        return (
            f'problem "battery_sizing"\n'
            f"var bsize >= 0\n"
            f"minimize {_fmt(p.get('battery_unit_cost'))} * sq(bsize) "
            f"+ {_fmt(k)} * max0({_fmt(deficit)} - {_fmt(eff)} * bsize)\n"
        )
    raise KeyError(kind)
