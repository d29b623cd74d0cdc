"""Exception types shared across the package.

Every error raised by library code derives from NflfedError so callers can
catch the package's failures with a single except clause. The CLI maps
InvalidSpec (and its field-naming message) to exit code 2 and everything else
to exit code 3.
"""

from __future__ import annotations


class NflfedError(Exception):
    """Base class for all errors raised by this package."""


# ---------------------------------------------------------------------------
# divergence
# ---------------------------------------------------------------------------


class MisalignedSupport(NflfedError):
    """Two finite distributions disagree on their support labels."""


class AbsoluteContinuityViolated(NflfedError):
    """KL(p || q) requested where some atom has p > 0 but q = 0."""


class EmptyInput(NflfedError):
    """An operation over a collection received no elements."""


class InsufficientKernelCoverage(NflfedError):
    """A belief kernel does not cover the requested evaluation support."""


class UnsupportedClosedForm(NflfedError):
    """No closed-form total variation rule exists for the given pair."""


class UnsupportedPair(NflfedError):
    """The distribution pair cannot be compared by the requested method."""


class DimensionMismatch(NflfedError):
    """Vector or grid shapes do not agree."""


class NonpositiveVariance(NflfedError):
    """A Gaussian was specified with variance <= 0."""


class ProbabilityOutOfRange(NflfedError):
    """A probability-valued argument fell outside [0, 1]."""


# ---------------------------------------------------------------------------
# mechanisms
# ---------------------------------------------------------------------------


class NonpositiveSigma(NflfedError):
    """Randomization noise scale must be > 0 (use Identity for no noise)."""


class InvalidPrimes(NflfedError):
    """Paillier key generation received invalid primes."""


class GeneratorOrderInvalid(NflfedError):
    """The chosen Paillier generator is not invertible where required."""


class PlaintextOutOfRange(NflfedError):
    """Plaintext is outside Z_n for the given key."""


class CiphertextInvalid(NflfedError):
    """Ciphertext is outside Z*_{n^2} for the given key."""


class MagnitudeOverflow(NflfedError):
    """A float does not fit the fixed-point message space."""


# ---------------------------------------------------------------------------
# attacks
# ---------------------------------------------------------------------------


class EmptyGrid(NflfedError):
    """A candidate grid with no entries was supplied."""


class LikelihoodUndefined(NflfedError):
    """The likelihood is zero (or undefined) for every candidate."""


class NoNegativeCoordinate(NflfedError):
    """Direct label inference found no strictly negative coordinate."""


class DegenerateCalibration(NflfedError):
    """Norm-scoring calibration lacks at least one example of each class."""


class NonFiniteLoss(NflfedError):
    """Gradient matching produced a non-finite objective."""


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


class RatioUnbounded(NflfedError):
    """The likelihood/prior log-ratio is unbounded on the given grids."""


class UnsupportedMechanism(NflfedError):
    """No closed-form bound exists for the given mechanism config."""


class DeltaRequired(NflfedError):
    """A utility bound needs Delta but none was supplied or estimable."""


class XiGammaRequired(NflfedError):
    """An efficiency bound needs Xi and Gamma but they are unavailable."""


class Infeasible(NflfedError):
    """No point of the optimization grid satisfies the constraint."""


class MechanismIncompatible(NflfedError):
    """The mechanism config does not fit the requested scenario or bound."""


# ---------------------------------------------------------------------------
# fedsim / cli
# ---------------------------------------------------------------------------


class InvalidSpec(NflfedError):
    """A scenario or run spec failed validation; message names the field."""


class ReplicateCountTooSmall(NflfedError):
    """At least two replicates are required to report a standard error."""
