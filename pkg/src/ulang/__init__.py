"""A small two-language system: a pure functional language U and a linear
language L with in-place reuse, joined by typed boundaries."""

from .errors import ULError
from .eval import DEFAULT_FUEL, run, step_l, step_u
from .funtrans import funtrans_expr, funtrans_type
from .interop import compat, l_to_u, u_to_l
from .parser import elaborate, parse, parse_config, parse_lexpr, parse_ltype, parse_uexpr, parse_utype
from .pretty import pretty
from .typecheck_l import infer_store_typing, type_of_configuration
from .typecheck_u import typecheck_u

__all__ = [
    "DEFAULT_FUEL",
    "ULError",
    "compat",
    "elaborate",
    "funtrans_expr",
    "funtrans_type",
    "infer_store_typing",
    "l_to_u",
    "parse",
    "parse_config",
    "parse_lexpr",
    "parse_ltype",
    "parse_uexpr",
    "parse_utype",
    "pretty",
    "run",
    "step_l",
    "step_u",
    "type_of_configuration",
    "typecheck_u",
    "u_to_l",
]
