"""nml: a MiniML toplevel that compiles each phrase to x86-64 in memory.

A bytecode interpreter runs the same phrases and serves as the reference
for differential testing.
"""

__version__ = "0.1.0"
