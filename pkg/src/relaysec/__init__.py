"""Secrecy-rate optimization for two-hop DF relay beamforming with
artificial noise under finite-alphabet signaling."""

__version__ = "0.1.0"

from .alphabet import Alphabet, MiEvaluator, bpsk, named_alphabet  # noqa: F401
from .channel import (ChannelSet, PowerConfig, Scenario,  # noqa: F401
                      UncertaintyRadii, load_scenario, scenario_from_dict)
