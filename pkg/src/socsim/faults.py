"""Error types shared across the simulator."""


class ValidationError(ValueError):
    """Raised when a config, matrix, or plan fails static validation."""


class SimulationFault(RuntimeError):
    """Raised when a running simulation hits an illegal state.

    Carries the name of the faulting device so the harness can report
    which benchmark and component tripped.
    """

    def __init__(self, device: str, message: str):
        self.device = device
        super().__init__(f"{device}: {message}")
