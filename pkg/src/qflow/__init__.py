"""
qflow
=====

Numerical companions to q-heat flows and Renyi-entropy gradient flows in
the p-Wasserstein space on weighted graphs.

Modules
-------
space       metric measure spaces on graphs, ``exp_p`` and ``ln_p``
calculus    slopes, Cheeger energy, the q-Laplacian and contraction checks
heatflow    proximal (implicit Euler) q-heat flow and its diagnostics
transport   exact ``w_p`` distances by linear programming
entropy     Renyi entropy, Fisher information and slope estimates
jko         the minimizing-movement scheme for ``U_p`` in ``(P, w_p)``
cli         configuration, verification suites and the ``qflow`` command
"""

from .calculus import cheeger_energy, dissipation_pairing, q_laplacian, slope
from .entropy import U_p, fisher_information, renyi_entropy, slope_bruteforce, slope_upper_bound
from .heatflow import FlowTrajectory, ProximalConfig, implicit_step, momentum_bound, run_flow
from .jko import JkoConfig, identification_check, jko_step, run_jko
from .space import (Exponents, MetricMeasureSpace, cycle_graph, exp_p, from_edges, grid_graph,
                    ln_p, path_graph)
from .transport import solve_transport, wasserstein_distance, wasserstein_p

__all__ = [
    "Exponents", "FlowTrajectory", "JkoConfig", "MetricMeasureSpace", "ProximalConfig", "U_p",
    "cheeger_energy", "cycle_graph", "dissipation_pairing", "exp_p", "fisher_information",
    "from_edges", "grid_graph", "identification_check", "implicit_step", "jko_step", "ln_p",
    "momentum_bound", "path_graph", "q_laplacian", "renyi_entropy", "run_flow", "run_jko",
    "slope", "slope_bruteforce", "slope_upper_bound", "solve_transport", "wasserstein_distance",
    "wasserstein_p",
]
