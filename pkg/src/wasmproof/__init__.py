"""Tooling for a first-order, encapsulated WebAssembly subset.

The package bundles a text-format parser and validator, a big-step and a
small-step interpreter, a stack/heap assertion language with executable
satisfaction checking, a proof-outline checker, and a B-tree corpus with
dynamic soundness testing.
"""

__version__ = "0.1.0"
