"""Phi-coherent entailment for weighted, finitely many-valued typicality KBs."""

from .kb import (
    ANONYMOUS, BOT, TOP, And, Assertion, Bot, Cmp, Degree, Impl, Inclusion, KBError, KnowledgeBase,
    Name, Neg, Or, PhiRow, PhiTable, Query, Top, Valuation, Verdict, WTI, new_kb, phi_apply,
)
from .kbio import ParseError, load_kb, parse_kb, save_kb, serialize_kb
from .oracle import OracleBudgetExceeded, enumerate_achievable, oracle_entails, oracle_satisfiable
from .solver import SearchTimeout, entails, max_typical_degree, solve_goal

__version__ = "0.1.0"

__all__ = [
    "ANONYMOUS", "BOT", "TOP", "And", "Assertion", "Bot", "Cmp", "Degree", "Impl", "Inclusion",
    "KBError", "KnowledgeBase", "Name", "Neg", "Or", "PhiRow", "PhiTable", "Query", "Top",
    "Valuation", "Verdict", "WTI", "new_kb", "phi_apply", "ParseError", "load_kb", "parse_kb",
    "save_kb", "serialize_kb", "OracleBudgetExceeded", "enumerate_achievable", "oracle_entails",
    "oracle_satisfiable", "SearchTimeout", "entails", "max_typical_degree", "solve_goal",
]
