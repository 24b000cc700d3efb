"""Certified preimage over-approximation of ReLU networks.

Thin wrapper over the native core; report-producing calls return dicts.
"""
import json

from . import _invprop
from ._invprop import (
    InputBox,
    InvpropError,
    Network,
    OptimizerConfig,
    OutputSet,
    bound_halfspaces,
    encode_closed_loop,
    exact_min,
    fold_output_constraints,
    gen_directions_2d,
    gen_directions_box,
    interval_bounds,
    load_box,
    load_network,
    load_output_set,
    max_gap_network,
    stack,
    tighten,
)

__all__ = [
    "InputBox", "InvpropError", "Network", "OptimizerConfig", "OutputSet",
    "bound_halfspaces", "encode_closed_loop", "exact_min", "fold_output_constraints",
    "gen_directions_2d", "gen_directions_box", "interval_bounds", "load_box",
    "load_network", "load_output_set", "max_gap_network", "stack", "tighten",
    "preimage", "reach", "robust", "recheck",
]


def _cfg(config):
    if isinstance(config, dict):
        return json.dumps(config)
    return config


def preimage(net, out_set, box, config=None, **kw):
    return json.loads(_invprop.preimage(net, out_set, box, _cfg(config), **kw))


def reach(A, B, policy, obstacle, box, steps, config=None, **kw):
    return json.loads(_invprop.reach(A, B, policy, obstacle, box, steps, _cfg(config), **kw))


def robust(net, box, label=0, config=None, **kw):
    return json.loads(_invprop.robust(net, box, label, _cfg(config), **kw))


def recheck(report, samples=100000, seed=1):
    text = report if isinstance(report, str) else json.dumps(report)
    return _invprop.recheck(text, samples, seed)
