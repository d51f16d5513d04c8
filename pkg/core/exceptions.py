"""Exception hierarchy shared by services, tasks and the command line.

Every error carries the process exit status the command line maps it to.
"""


class LabError(Exception):
    exit_code = 3

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigError(LabError, ValueError):
    #violated preconditions and bad run configuration
    exit_code = 2


class GeometryError(ConfigError):
    #degenerate geometry, mismatched grids, overlapping or wrong-kind masks
    pass


class NumericError(LabError):
    #non-finite values detected
    exit_code = 3


class ToleranceError(LabError):
    exit_code = 1
