"""Python bindings for the flexmarket simulator."""

import json as _json

from ._core import (  # noqa: F401
    AggregateFlex,
    ClearingResult,
    DeviceKind,
    DevicePlan,
    DeviceRecord,
    EquilibriumReport,
    FlexibilityOffer,
    FlexmarketError,
    MemberFlex,
    PriceSignal,
    Scenario,
    SimulationTrace,
    aggregate_offers,
    best_response,
    clear_market,
    cma_welfare,
    compute_prices,
    load_scenario,
    positivity_region,
    read_trace,
    run_simulation,
    saturation_limit,
    scenario_from_json,
    solve_flexibility,
    verify_equilibrium,
)


def scenario_from_dict(doc, base_dir="."):
    """Build a Scenario from a JSON-compatible dict."""
    return scenario_from_json(_json.dumps(doc), base_dir)


def metadata(trace):
    """Trace metadata as a dict."""
    return _json.loads(trace.metadata)


__version__ = "0.1.0"
