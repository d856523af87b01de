"""Exception hierarchy shared across the package."""


class BlindPtychoError(Exception):
    """Base class for all package errors."""


class IllConditionedMaskError(BlindPtychoError):
    """Mask autocorrelation spectra come too close to zero to divide by."""


class DivisionError(BlindPtychoError):
    """A pointwise spectral division hit a (near-)zero denominator."""


class AliasingError(BlindPtychoError):
    """Sub-sampled aliasing terms overlap and cannot be separated."""


class SyncError(BlindPtychoError):
    """Angular synchronization received an unusable problem."""


class SolverError(BlindPtychoError):
    """Blind deconvolution could not produce an estimate."""


class DivergenceError(SolverError):
    """Gradient descent blew up."""


class DegenerateEstimateError(BlindPtychoError):
    """A lifted estimate is too far from rank one to factor."""


class ConfigError(BlindPtychoError, ValueError):
    """Invalid experiment configuration.  ``problems`` lists every violation."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
