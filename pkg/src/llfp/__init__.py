"""LLFP: a logical framework with lock types discharged by external oracles."""

from .kernel import CheckError, CheckReport, Checker, GuardFrame, run_directives
from .oracles import OracleEnv, Verdict, default_env
from .parser import parse_file, parse_term, print_term
from .reduction import FuelExhausted, def_eq, normalize
from .syntax import Context, Signature

__all__ = [
    "CheckError",
    "CheckReport",
    "Checker",
    "Context",
    "FuelExhausted",
    "GuardFrame",
    "OracleEnv",
    "Signature",
    "Verdict",
    "def_eq",
    "default_env",
    "normalize",
    "parse_file",
    "parse_term",
    "print_term",
    "run_directives",
]
