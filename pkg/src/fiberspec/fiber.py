"""Functions on the circle in truncated Fourier representation.

A FiberFunction stores complex coefficients c_{-N..N}; real functions keep
the Hermitian symmetry c_{-k} = conj(c_k).  The representation makes the
integral (c_0), derivatives, and products against other truncated series
exact, which the operator tests rely on.
"""

import numpy as np

from ._kernels import TWO_PI


class FiberFunction:
    """Truncated Fourier series u(x) = sum_{|k|<=N} c_k exp(2 pi i k x)."""

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=np.complex128)
        if coeffs.ndim != 1 or coeffs.size % 2 != 1:
            raise ValueError("coeffs must be a 1-d array of odd length 2N+1")
        self.coeffs = coeffs

    @property
    def trunc(self):
        """Truncation order N."""
        return (self.coeffs.size - 1) // 2

    def k_values(self):
        n = self.trunc
        return np.arange(-n, n + 1)

    @classmethod
    def zero(cls, trunc):
        return cls(np.zeros(2 * trunc + 1, dtype=np.complex128))

    @classmethod
    def constant(cls, value, trunc):
        c = np.zeros(2 * trunc + 1, dtype=np.complex128)
        c[trunc] = value
        return cls(c)

    @classmethod
    def mode(cls, k, trunc, amplitude=1.0):
        """The exponential e_k(x) = amplitude * exp(2 pi i k x)."""
        if abs(k) > trunc:
            raise ValueError(f"mode {k} outside truncation {trunc}")
        c = np.zeros(2 * trunc + 1, dtype=np.complex128)
        c[k + trunc] = amplitude
        return cls(c)

    @classmethod
    def cosine(cls, k, trunc, amplitude=1.0):
        """amplitude * cos(2 pi k x)."""
        c = np.zeros(2 * trunc + 1, dtype=np.complex128)
        c[k + trunc] = amplitude / 2.0
        c[-k + trunc] = amplitude / 2.0
        return cls(c)

    @classmethod
    def sine(cls, k, trunc, amplitude=1.0):
        """amplitude * sin(2 pi k x)."""
        c = np.zeros(2 * trunc + 1, dtype=np.complex128)
        c[k + trunc] = amplitude / 2j
        c[-k + trunc] = -amplitude / 2j
        return cls(c)

    @classmethod
    def from_function(cls, fn, trunc):
        """Sample fn on a 4N grid and keep the modes |k| <= N.

        Exact for trigonometric polynomials with band < 2N; smooth
        functions alias only at spectrally small levels.
        """
        m = max(4 * trunc, 2 * trunc + 1)
        xs = np.arange(m) / m
        samples = np.asarray(fn(xs), dtype=np.complex128)
        spec = np.fft.fft(samples) / m
        ks = np.arange(-trunc, trunc + 1)
        return cls(spec[ks % m])

    @classmethod
    def from_real_coeffs(cls, terms, trunc, const=0.0):
        """Build sum_k [a_k cos(2 pi k x) + b_k sin(2 pi k x)] + const.

        ``terms`` is an iterable of (k, a_k, b_k).
        """
        c = np.zeros(2 * trunc + 1, dtype=np.complex128)
        c[trunc] = const
        for k, a, b in terms:
            c[k + trunc] += a / 2.0 + b / 2j
            c[-k + trunc] += a / 2.0 - b / 2j
        return cls(c)

    def evaluate(self, x):
        """Evaluate at scalar or array x."""
        x = np.asarray(x, dtype=np.float64)
        phases = np.exp(1j * TWO_PI * np.multiply.outer(x, self.k_values()))
        out = phases @ self.coeffs
        if out.ndim == 0:
            return complex(out)
        return out

    def values_on_grid(self, m):
        """Values on the uniform grid {i/m}; requires m >= 2N+1."""
        if m < self.coeffs.size:
            raise ValueError(f"grid of {m} points cannot hold {self.coeffs.size} modes")
        spec = np.zeros(m, dtype=np.complex128)
        spec[self.k_values() % m] = self.coeffs
        return np.fft.ifft(spec) * m

    def integral(self):
        """Integral against normalized Lebesgue measure: exactly c_0."""
        return complex(self.coeffs[self.trunc])

    def derivative(self):
        return FiberFunction(self.coeffs * (1j * TWO_PI * self.k_values()))

    def sup_norm(self, oversample=4):
        m = max(oversample * max(self.trunc, 1), 64)
        return float(np.max(np.abs(self.values_on_grid(m))))

    def c1_norm(self, oversample=4):
        """sup|u| + sup|u'| estimated on an oversampled grid."""
        return self.sup_norm(oversample) + self.derivative().sup_norm(oversample)

    def pair(self, other):
        """Integral of the product: int self * other dm = sum_k c_k d_{-k}."""
        a, b = _aligned(self, other)
        return complex(np.dot(a.coeffs, b.coeffs[::-1]))

    def hermitian_defect(self):
        """How far the coefficients are from representing a real function."""
        return float(np.max(np.abs(self.coeffs[::-1].conj() - self.coeffs)))

    def resize(self, trunc):
        """Truncate or zero-pad to a new order."""
        n, m = self.trunc, trunc
        if m == n:
            return self
        c = np.zeros(2 * m + 1, dtype=np.complex128)
        keep = min(n, m)
        c[m - keep : m + keep + 1] = self.coeffs[n - keep : n + keep + 1]
        return FiberFunction(c)

    def __add__(self, other):
        a, b = _aligned(self, other)
        return FiberFunction(a.coeffs + b.coeffs)

    def __sub__(self, other):
        a, b = _aligned(self, other)
        return FiberFunction(a.coeffs - b.coeffs)

    def __mul__(self, scalar):
        return FiberFunction(self.coeffs * scalar)

    __rmul__ = __mul__

    def __neg__(self):
        return FiberFunction(-self.coeffs)

    def __repr__(self):
        return f"FiberFunction(trunc={self.trunc}, integral={self.integral():.6g})"


def _aligned(a, b):
    if not isinstance(b, FiberFunction):
        raise TypeError(f"expected FiberFunction, got {type(b).__name__}")
    n = max(a.trunc, b.trunc)
    return a.resize(n), b.resize(n)
