"""Expression parsing and forward-mode jet evaluation."""

from .jets import DomainError, Jet, JetSpace, jet_space
from .parser import (Expr, ExprDomainError, ExprSyntaxError,
                     UndeclaredVariableError, compile_expr, evaluate,
                     jet_eval, parse_expr, pretty)

__all__ = ["DomainError", "Jet", "JetSpace", "jet_space", "Expr",
           "ExprDomainError", "ExprSyntaxError", "UndeclaredVariableError",
           "compile_expr", "evaluate", "jet_eval", "parse_expr", "pretty"]
