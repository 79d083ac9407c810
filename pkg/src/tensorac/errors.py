"""Exception hierarchy shared across the package."""


class TensoracError(Exception):
    """Base class for all package-specific errors."""


# --- spectra ---------------------------------------------------------------

class SpectrumError(TensoracError):
    pass


class EmptySpectrum(SpectrumError):
    pass


class NegativeEigenvalue(SpectrumError):
    pass


class InfeasibleBeta(SpectrumError):
    """Head mass left after placing the exact tail shape cannot be arranged
    nonincreasingly (beta too large for the requested family)."""


# --- tensor ----------------------------------------------------------------

class ComplexityError(TensoracError):
    pass


class InvalidEps(ComplexityError):
    pass


class CapExceeded(ComplexityError):
    def __init__(self, n_cap):
        super().__init__(f"best-first enumeration exceeded n_cap={n_cap}")
        self.n_cap = n_cap


class TooLarge(ComplexityError):
    pass


class InvalidAtom(ComplexityError):
    pass


class BadEpsilonOrder(ComplexityError):
    pass


class GridOverflow(ComplexityError):
    pass


class QuantileOutsideGrid(ComplexityError):
    pass


# --- dist ------------------------------------------------------------------

class LawError(TensoracError):
    pass


class BadStep(LawError):
    pass


class QuantileBeyondGrid(LawError):
    pass


class QuadratureFailure(LawError):
    pass


# --- asympt ----------------------------------------------------------------

class AsymptError(TensoracError):
    pass


class InconclusiveFit(AsymptError):
    pass


class MissingLaw(AsymptError):
    pass


class UnsupportedRegime(AsymptError):
    pass


class NoConvergence(AsymptError):
    pass


class IntegrableSingularity(AsymptError):
    pass


# --- cli -------------------------------------------------------------------

class ConfigError(TensoracError):
    exit_code = 2


class ComputeError(TensoracError):
    exit_code = 3


class MissingResults(ConfigError):
    pass
