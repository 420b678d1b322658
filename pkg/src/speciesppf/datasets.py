"""Built-in datasets."""

import numpy as np

SARCOMA_SUBTYPES = ("LEI", "LIP", "MFH", "OST", "Syn", "Ang", "MPNST", "Fib")


def load_grid() -> np.ndarray:
    """Nine equally spaced points ``-4, -3, ..., 4``."""
    return np.arange(-4.0, 5.0)


def load_sarcoma() -> np.ndarray:
    """Phase II sarcoma trial: ``(successes, patients)`` per subtype.

    Row order follows :data:`SARCOMA_SUBTYPES`.
    """
    return np.array([[6, 28], [7, 29], [3, 29], [5, 26], [3, 20], [2, 15], [1, 5], [1, 12]])


PRESETS = {"grid": load_grid, "sarcoma": load_sarcoma}
