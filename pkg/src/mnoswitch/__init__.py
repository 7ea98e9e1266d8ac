"""Operator switching for fog/cloud-connected vehicles.

Modules: ``latency`` (RTT distributions, confidence levels), ``assignment``
(fog/cloud split and slot cost), ``env`` (the finite-horizon MDP), ``dp``
(exact backward induction), ``nn`` (numpy MLP), ``agents`` (tabular
Q-learning, double DQN) and ``experiments`` (templates, sweeps, CLI).
"""
from .assignment import Pricing, Split, alpha_star, slot_cost
from .env import Scenario, ScenarioError, State, Transition, effective_tau, expected_utility, load_scenario, step
from .latency import LatencyCatalog, LatencyDistribution, ServiceSpec, confidence, from_samples

__version__ = "0.1.0"
