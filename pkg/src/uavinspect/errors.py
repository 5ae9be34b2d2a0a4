"""Exception hierarchy shared by every pipeline stage.

Each error carries a module-qualified ``code`` (e.g. ``"plane_extraction.no_plane"``)
and the CLI exit status it maps to.
"""


class InspectionError(Exception):
    exit_code = 3

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code
        self.message = message

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message, "exit_code": self.exit_code}


class InputError(InspectionError):
    """Malformed or contract-violating input (exit status 2)."""

    exit_code = 2


class AlgorithmError(InspectionError):
    """A well-formed input on which an estimator could not produce a result (exit status 3)."""

    exit_code = 3


class DegenerateError(AlgorithmError):
    pass
