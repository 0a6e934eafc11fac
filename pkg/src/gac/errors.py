"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the domain of an operation."""


class ConvergenceError(ArithmeticError):
    """An iterative geodesic series failed to converge."""


class TraceParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class TraceValidationError(ValueError):
    def __init__(self, findings):
        self.findings = list(findings)
        detail = "; ".join(str(f) for f in self.findings[:5])
        super().__init__(f"trace failed validation ({len(self.findings)} findings): {detail}")
