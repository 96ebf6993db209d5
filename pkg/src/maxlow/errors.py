from __future__ import annotations


class MeshError(ValueError):
    """Invalid mesh, anchor or entity reference."""


class MeshFormatError(MeshError):
    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(ValueError):
    pass


class SolverError(RuntimeError):
    """A linear or eigen solve could not produce a trustworthy answer."""


class ConvergenceError(SolverError):
    def __init__(
        self,
        message: str,
        *,
        last_value: float | None = None,
        residual: float | None = None,
        iterations: int = 0,
    ) -> None:
        self.last_value = last_value
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"{message} (iterations={iterations}, last_value={last_value}, residual={residual})"
        )


class ConstantsError(SolverError):
    def __init__(self, kind: str, anchor: int, cause: Exception) -> None:
        self.kind = kind
        self.anchor = anchor
        super().__init__(f"{kind} patch {anchor}: {cause}")
