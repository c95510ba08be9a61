"""Exception types, one per failure mode named in the operation contracts."""


class StripforgeError(Exception):
    """Base class for all library errors."""


class DerivativeOrderExceeded(StripforgeError):
    pass


class UndefinedAtInflection(StripforgeError):
    pass


class NonIsolatedZero(StripforgeError):
    pass


class OrderUndetermined(StripforgeError):
    pass


class RefitDegreeExceeded(StripforgeError):
    pass


class TransportAccuracyExceeded(StripforgeError):
    pass


class NotSpherical(StripforgeError):
    pass


class NotUnitSpeed(StripforgeError):
    pass


class AlgorithmMismatch(StripforgeError):
    pass


class GenericityFailure(StripforgeError):
    pass


class CurvesTooClose(StripforgeError):
    pass


class QuadratureUnconverged(StripforgeError):
    pass


class NotMoebius(StripforgeError):
    pass


class IdentityMismatch(StripforgeError):
    pass


class InadmissibleInflection(StripforgeError):
    pass


class RulingTangent(StripforgeError):
    pass


class EmbeddingFailed(StripforgeError):
    pass


class NotGenericInflection(StripforgeError):
    pass


class MoebiusWithoutUmbilic(StripforgeError):
    pass


class NoSignChange(StripforgeError):
    pass


class Rho0Zero(StripforgeError):
    pass


class InsertOverlap(StripforgeError):
    pass


class NonTransversalCrossing(StripforgeError):
    pass


class GateFailed(StripforgeError):
    pass


class SmoothnessMismatch(StripforgeError):
    pass


class SelfIntersectionUnresolved(StripforgeError):
    pass


class OutsideOmega(StripforgeError):
    pass


class NegativeRadicand(StripforgeError):
    pass


class ConditionViolated(StripforgeError):
    def __init__(self, condition, message=""):
        self.condition = condition
        super().__init__(f"Proposition-3.1 condition ({condition}) violated. {message}".strip())


class SingularCorrectionSystem(StripforgeError):
    pass


class BracketingFailed(StripforgeError):
    pass


class UnsupportedFormat(StripforgeError):
    pass


class ParseError(StripforgeError):
    pass
