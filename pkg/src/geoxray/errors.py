"""Exception hierarchy and process exit codes.

Every failure mode that the command line surface distinguishes gets its own
exception class; ``exit_code_for`` maps an exception to the documented code.
"""

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_COVERAGE = 3
EXIT_ILL_POSED = 4
EXIT_NON_INJECTIVE = 5
EXIT_TRAPPING = 6


class GeoxrayError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class SceneValidationError(GeoxrayError):
    """Bad configuration, geometry, or preconditions (dims, tilings, domains)."""

    exit_code = EXIT_VALIDATION


class DomainError(SceneValidationError):
    """A chart point lies outside the domain an operation is defined on."""


class FanConstructionError(SceneValidationError):
    """The offset-fan construction failed (base geodesic exits too early, etc.)."""


class CoverageError(GeoxrayError):
    """A reconstruction step has no usable geodesics: the plan is too sparse."""

    exit_code = EXIT_COVERAGE


class IllPosedStepError(GeoxrayError):
    """A linear solve exceeded the condition number cap."""

    exit_code = EXIT_ILL_POSED


class IllPosedSamplingError(IllPosedStepError):
    """The sample directions given to the local sector solver are unusable."""


class NearParallelSectorError(IllPosedSamplingError):
    """A tangent line nearly parallels a sector edge; chord length blows up."""


class NonInjectiveWeightError(GeoxrayError):
    """The weight matrix is rank deficient somewhere it must be injective."""

    exit_code = EXIT_NON_INJECTIVE


class TrappingSuspectedError(GeoxrayError):
    """A geodesic exceeded the arclength cap without leaving the domain."""

    exit_code = EXIT_TRAPPING


class TangencyWarning(UserWarning):
    """A geodesic slid along a tiling edge for a non-negligible length."""


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, GeoxrayError):
        return exc.exit_code
    return 1
