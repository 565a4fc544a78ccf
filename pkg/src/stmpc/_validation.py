import numpy as np

from .exceptions import InvalidInputError

SYM_TOL = 1e-12
PD_TOL = 1e-12


def as_matrix(value, name, shape=None):
    """Return ``value`` as a finite 2-D float array, checking ``shape``.

    ``None`` entries in ``shape`` are wildcards.
    """
    arr = np.array(value, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise InvalidInputError(f"{name} must be a 2-D matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if shape is not None:
        for axis, (got, want) in enumerate(zip(arr.shape, shape)):
            if want is not None and got != want:
                raise InvalidInputError(
                    f"{name} has shape {arr.shape}, expected {shape} (axis {axis})")
    return arr


def as_vector(value, name, size=None):
    arr = np.array(value, dtype=float).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if size is not None and arr.size != size:
        raise InvalidInputError(f"{name} has {arr.size} entries, expected {size}")
    return arr


def check_spd(mat, name, sym_tol=SYM_TOL, pd_tol=PD_TOL):
    """Raise unless ``mat`` is symmetric positive definite."""
    scale = max(1.0, float(np.max(np.abs(mat))))
    if np.max(np.abs(mat - mat.T)) > sym_tol * scale:
        raise InvalidInputError(f"{name} is not symmetric")
    lam_min = float(np.linalg.eigvalsh(0.5 * (mat + mat.T))[0])
    if lam_min <= pd_tol:
        raise InvalidInputError(
            f"{name} is not positive definite (min eigenvalue {lam_min:.3e})")
    return mat


def check_positive(value, name):
    value = float(value)
    if not np.isfinite(value) or value <= 0:
        raise InvalidInputError(f"{name} must be finite and > 0, got {value}")
    return value
