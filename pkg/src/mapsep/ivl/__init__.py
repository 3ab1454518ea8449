from .ast import *  # noqa: F401,F403
from .ast import IVLError, Program, Statement
from .normalize import normalize
from .parser import parse
from .printer import pretty

__all__ = ["IVLError", "Program", "Statement", "normalize", "parse", "pretty"]
