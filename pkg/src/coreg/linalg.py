"""Dense real linear algebra used by every other module.

Matrices are plain float64 numpy arrays validated at the public boundary
(finite entries, explicit 2-D shape).  Spectra are complex internally but
never exposed as a matrix type.
"""

from dataclasses import dataclass

import numpy as np

from . import _kernels

# Deflation threshold for the QR iteration, relative to neighbouring
# diagonal magnitude.  Tighter than the documented 1e-10 guarantee so the
# mu-bound arithmetic downstream is good to ~1e-12.
EIG_DEFLATION_RTOL = 1e-15
EIG_MAX_ITER_FACTOR = 100

SYLVESTER_RESIDUAL_RTOL = 1e-10
SPECTRUM_SEPARATION_RTOL = 1e-9


class DimensionError(ValueError):
    """Matrix dimensions do not conform."""


class NumericalError(ArithmeticError):
    """An iteration failed to converge or a result failed its residual check."""


class SingularEquationError(NumericalError):
    """A matrix equation has no unique solution (shared spectra, zero pivot)."""


def as_matrix(data, name="matrix") -> np.ndarray:
    """Validate and convert to a float64 2-D array with finite entries."""
    a = np.array(data, dtype=float, order="C")
    if a.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {a.shape}")
    if a.size == 0:
        raise DimensionError(f"{name} must have at least one row and column")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def as_vector(data, name="vector") -> np.ndarray:
    a = np.array(data, dtype=float).reshape(-1)
    if a.size == 0:
        raise DimensionError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def _require_square(a, name):
    if a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got {a.shape[0]}x{a.shape[1]}")


def max_abs(a) -> float:
    """Largest entry magnitude (the entrywise infinity norm used in residuals)."""
    return float(np.abs(a).max())


@dataclass(frozen=True)
class Spectrum:
    """All eigenvalues of a real matrix, sorted by descending modulus
    (ties broken by descending real then imaginary part)."""

    values: np.ndarray  # complex128

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def radius(self) -> float:
        return float(self.moduli[0]) if self.values.size else 0.0

    def __len__(self):
        return self.values.size

    def __iter__(self):
        return iter(self.values)


def _sort_complex(values: np.ndarray) -> np.ndarray:
    order = np.lexsort((-values.imag, -values.real, -np.abs(values)))
    return values[order]


def eigenvalues(a) -> Spectrum:
    """All eigenvalues with multiplicity, by Hessenberg reduction and
    implicitly shifted QR (see _kernels.eig_qr)."""
    a = as_matrix(a, "A")
    _require_square(a, "A")
    n = a.shape[0]
    max_iter = EIG_MAX_ITER_FACTOR * n
    re, im, ok, resid = _kernels.eig_qr(a, max_iter, EIG_DEFLATION_RTOL)
    if not ok:
        raise NumericalError(
            f"eigenvalue iteration did not converge within {max_iter} sweeps "
            f"(largest remaining subdiagonal {resid:.3e})"
        )
    return Spectrum(_sort_complex(re + 1j * im))


def spectral_radius(a) -> float:
    return eigenvalues(a).radius


def sigma_max(a) -> float:
    """Largest singular value, as the square root of the top eigenvalue of A^T A."""
    a = as_matrix(a, "A")
    gram = a.T @ a
    top = max(float(v.real) for v in eigenvalues(gram).values)
    return float(np.sqrt(max(top, 0.0)))


def mat_exp(a, t: float) -> np.ndarray:
    """exp(A t) for square A and t >= 0."""
    a = as_matrix(a, "A")
    _require_square(a, "A")
    t = float(t)
    if not np.isfinite(t) or t < 0.0:
        raise ValueError(f"t must be finite and nonnegative, got {t}")
    return _kernels.expm(a * t)


def exp_convolution(f, g, s, h: float) -> np.ndarray:
    """The convolution integral of exp(F (h-theta)) @ G @ exp(S theta) over
    (0, h), taken from the upper-right block of one exponential of the
    augmented matrix [[F, G], [0, S]] scaled by h."""
    f = as_matrix(f, "F")
    g = as_matrix(g, "G")
    s = as_matrix(s, "S")
    _require_square(f, "F")
    _require_square(s, "S")
    n = f.shape[0]
    q = s.shape[0]
    if g.shape != (n, q):
        raise DimensionError(
            f"G must be {n}x{q} to conform with F and S, got {g.shape[0]}x{g.shape[1]}"
        )
    h = float(h)
    if not np.isfinite(h) or h <= 0.0:
        raise ValueError(f"h must be finite and positive, got {h}")
    block = np.zeros((n + q, n + q))
    block[:n, :n] = f
    block[:n, n:] = g
    block[n:, n:] = s
    return _kernels.expm(block * h)[:n, n:].copy()


def kron(a, b) -> np.ndarray:
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    return _kernels.kron(a, b)


def _check_separation(spec_a: Spectrum, spec_b: Spectrum, what: str):
    scale = 1.0 + max(spec_a.radius, spec_b.radius)
    tol = SPECTRUM_SEPARATION_RTOL * scale
    for la in spec_a.values:
        for lb in spec_b.values:
            if abs(la - lb) < tol:
                raise SingularEquationError(
                    f"{what}: spectra share the eigenvalue pair "
                    f"({la:.6g}, {lb:.6g}) within {tol:.1e}; no unique solution"
                )


def _dense_solve(k: np.ndarray, rhs: np.ndarray, what: str) -> np.ndarray:
    x, minpiv = _kernels.lu_solve(k, rhs)
    if minpiv == 0.0:
        raise SingularEquationError(f"{what}: vectorized system is singular")
    return x


def solve_sylvester(a, s, p) -> np.ndarray:
    """Unique Pi with Pi S = A Pi + P, by Kronecker vectorization
    (S^T (x) I - I (x) A) vec(Pi) = vec(P) and dense elimination.

    Dense O((nq)^3); meant for the small systems this package works with,
    not a large-scale solver.
    """
    a = as_matrix(a, "A")
    s = as_matrix(s, "S")
    p = as_matrix(p, "P")
    _require_square(a, "A")
    _require_square(s, "S")
    n, q = a.shape[0], s.shape[0]
    if p.shape != (n, q):
        raise DimensionError(f"P must be {n}x{q}, got {p.shape[0]}x{p.shape[1]}")
    _check_separation(eigenvalues(a), eigenvalues(s), "sylvester")
    k = _kernels.kron(s.T.copy(), np.eye(n)) - _kernels.kron(np.eye(q), a)
    x = _dense_solve(k, p.flatten(order="F").reshape(-1, 1), "sylvester")
    pi = np.ascontiguousarray(x.reshape((n, q), order="F"))
    resid = max_abs(pi @ s - a @ pi - p)
    bound = SYLVESTER_RESIDUAL_RTOL * (1.0 + max_abs(p))
    if resid > bound:
        raise NumericalError(
            f"sylvester solution residual {resid:.3e} exceeds {bound:.3e}"
        )
    return pi


def solve_discrete_sylvester(m, j, n_rhs) -> np.ndarray:
    """Unique X with M X - X J + N = 0, via
    (J^T (x) I - I (x) M) vec(X) = vec(N)."""
    m = as_matrix(m, "M")
    j = as_matrix(j, "J")
    n_rhs = as_matrix(n_rhs, "N")
    _require_square(m, "M")
    _require_square(j, "J")
    nn, q = m.shape[0], j.shape[0]
    if n_rhs.shape != (nn, q):
        raise DimensionError(f"N must be {nn}x{q}, got {n_rhs.shape[0]}x{n_rhs.shape[1]}")
    _check_separation(eigenvalues(m), eigenvalues(j), "discrete sylvester")
    k = _kernels.kron(j.T.copy(), np.eye(nn)) - _kernels.kron(np.eye(q), m)
    x = _dense_solve(k, n_rhs.flatten(order="F").reshape(-1, 1), "discrete sylvester")
    sol = np.ascontiguousarray(x.reshape((nn, q), order="F"))
    resid = max_abs(m @ sol - sol @ j + n_rhs)
    bound = SYLVESTER_RESIDUAL_RTOL * (1.0 + max_abs(n_rhs))
    if resid > bound:
        raise NumericalError(
            f"discrete sylvester solution residual {resid:.3e} exceeds {bound:.3e}"
        )
    return sol


# ---------------------------------------------------------------------------
# Matrix text syntax: rows separated by ';', entries by ','.  Printing uses
# 17 significant digits so parse(format(A)) reproduces A exactly.

def parse_matrix(text: str, name="matrix") -> np.ndarray:
    rows = [r for r in text.split(";")]
    if not rows or not text.strip():
        raise ValueError(f"{name}: empty matrix text")
    data = []
    width = None
    for i, row in enumerate(rows):
        cells = [c.strip() for c in row.split(",")]
        if cells == [""]:
            raise ValueError(f"{name}: row {i + 1} is empty")
        try:
            values = [float(c) for c in cells]
        except ValueError:
            raise ValueError(f"{name}: row {i + 1} has a non-numeric entry") from None
        if width is None:
            width = len(values)
        elif len(values) != width:
            raise ValueError(
                f"{name}: row {i + 1} has {len(values)} entries, expected {width}"
            )
        data.append(values)
    return as_matrix(data, name)


def format_matrix(a) -> str:
    a = as_matrix(a, "matrix")
    return "; ".join(
        ",".join(format(v, ".17g") for v in row) for row in a
    )
