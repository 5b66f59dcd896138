"""Exception taxonomy shared by every module.

Math preconditions raise subclasses of QOrthoError so the CLI can map them
to a dedicated exit code; plain bugs stay ordinary Python exceptions.
"""


class QOrthoError(Exception):
    """Base class for domain errors (bad parameters, math preconditions)."""


class BaseOutOfDisk(QOrthoError):
    """An operation requiring |q| < 1 received a base outside the unit disk."""


class DegenerateBase(QOrthoError):
    """q = 1 where a q-number or q-difference needs q != 1."""


class NonConvergence(QOrthoError):
    """An iterative computation (infinite product, root refinement) stalled."""


class DegenerateDenominator(QOrthoError):
    """A denominator q-Pochhammer of a terminating series vanished."""


class NonNormal(QOrthoError):
    """Parameter product lies in {q^-k}, so the family is not normal."""


class UnknownParam(QOrthoError):
    """Parameter name does not belong to the family's schema."""


class BadRootOfUnity(QOrthoError):
    """Declared root-of-unity data inconsistent with the supplied base."""


class EvalOnlyFamily(QOrthoError):
    """Recurrence machinery requested for a family that only evaluates."""


class PoleInCoefficient(QOrthoError):
    """A closed-form recurrence coefficient hit a vanishing denominator."""


class InapplicableIdentity(QOrthoError):
    """A parameter-map identity was asked of a family it does not cover."""


class MomentsTooShort(QOrthoError):
    """Moment vector shorter than the degree it is applied to."""


class DegenerateWeight(QOrthoError):
    """A mass-point weight formula hit a vanishing denominator."""


class BranchMismatch(QOrthoError):
    """Parity branch handling produced overlapping mass indices."""


class ParamsOutsideDisk(QOrthoError):
    """Circle-quadrature functional needs all parameters inside |.| < 1."""


class AssumptionViolated(QOrthoError):
    """A stated nondegeneracy assumption of a construction fails."""


class DenominatorVanishes(QOrthoError):
    """Root-of-unity target formula has a vanishing denominator."""


class MultipleZero(QOrthoError):
    """Christoffel-type construction requires simple zeros."""


class SamplePole(QOrthoError):
    """A sample point landed on a pole of the operator's rational symbol."""


class NotPolynomialOutput(QOrthoError):
    """Sample-and-interpolate operator output failed the guard sample."""


class GammaNotZero(QOrthoError):
    """Factorization requested at an index where gamma does not vanish."""


class SingularMinor(QOrthoError):
    """Gram-Schmidt hit a singular leading minor at some degree."""
