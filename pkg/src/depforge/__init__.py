"""depforge: dependability-analysis workbench for component architectures.

Describe components, behaviors, faults/threats and contracts in a textual
DSL, then run fault tree analysis, FMEA, LTL model checking, contract
refinement, Monte-Carlo reliability estimation and trade-off analysis.
"""

__version__ = "0.1.0"
