"""Exception hierarchy.

Each class carries the process exit code the CLI uses for it.
"""


class SingsepError(Exception):
    exit_code = 1


class UsageError(SingsepError, ValueError):
    exit_code = 2


class DependencyError(SingsepError):
    """A required checkpoint or upstream training stage is missing."""

    exit_code = 3


class DataError(SingsepError, ValueError):
    exit_code = 4


class ResampleRequiredError(DataError):
    pass


class AnalysisError(DataError):
    def __init__(self, backend: str, message: str):
        super().__init__(f"vocoder backend {backend!r} failed: {message}")
        self.backend = backend


class ManifestError(DataError):
    def __init__(self, problems):
        self.problems = list(problems)
        lines = "\n  ".join(self.problems)
        super().__init__(f"{len(self.problems)} manifest problem(s):\n  {lines}")


class CheckpointError(SingsepError):
    """Checkpoint file is unreadable or does not match the expected config."""

    exit_code = 3
