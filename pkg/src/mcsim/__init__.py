"""Worst-case metastability in synchronous circuits, one clock cycle at a time.

Three-valued words and codes live in ternary_core, circuit structure in
netlist, round semantics in executor, classification and synthesis in
analysis, ready-made circuits in components, and the command line in cli.
"""

__version__ = "0.1.0"
