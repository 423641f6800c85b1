class SpdeReactError(Exception):
    pass


class ConfigError(SpdeReactError):
    pass


class NumericalError(SpdeReactError):
    pass


class BlowUpError(NumericalError):
    pass


class SingularSystemError(NumericalError):
    pass


class IllConditionedCovarianceError(NumericalError):
    pass


class DegenerateWindowError(NumericalError):
    pass


class BracketError(NumericalError):
    pass


class OutOfRegimeError(NumericalError):
    pass


EXIT_CODES = {
    ConfigError: 1,
    NumericalError: 2,
}


def exit_code_for(exc):
    """
    Look up the process exit code for an exception, walking its class hierarchy.
    """
    for cls in type(exc).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    return 2
