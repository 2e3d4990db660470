"""Exception types shared across the package.

Two failure families are distinguished so the CLI can map them to distinct
exit codes: bad inputs (shape/length/parameter problems) and numerical
degeneracies (zero-norm states, corrupted sampling weights).
"""


class ValidationError(ValueError):
    """Structurally invalid input: shape, length, or parameter out of contract."""


class DegeneracyError(ArithmeticError):
    """Numerically degenerate state: zero norm, vanishing or negative weights."""
