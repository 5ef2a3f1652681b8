"""Branch-and-propagate decision engine for phi-coherent entailment."""

from .compile import CompiledProblem, compile_kb
from .engine import (
    MODES, ExistsWitness, ExistsWithDegree, Satisfy, SearchGoal, SearchTimeout, Solver,
    available_backends, default_backend, entails, max_typical_degree, solve_goal,
)

__all__ = [
    "MODES", "CompiledProblem", "ExistsWitness", "ExistsWithDegree", "Satisfy", "SearchGoal",
    "SearchTimeout", "Solver", "available_backends", "compile_kb", "default_backend", "entails",
    "max_typical_degree", "solve_goal",
]
