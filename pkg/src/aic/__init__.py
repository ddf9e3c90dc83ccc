"""Workbench for an affine-intuitionistic concurrent calculus with regions."""
from .surface import parse, print_file
from .typecheck import BASE, CONFLUENT, EFFECTS, STRATIFIED, Mode, typecheck

__all__ = ["parse", "print_file", "typecheck", "Mode", "BASE", "EFFECTS", "STRATIFIED", "CONFLUENT"]
