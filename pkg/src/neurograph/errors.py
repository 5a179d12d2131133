"""Exception types shared across the package.

The CLI maps these onto exit codes: input problems exit 1, numerical
failures exit 2.
"""


class InputError(ValueError):
    """Malformed or inconsistent user input (files, indices, parameters)."""


class CapabilityError(InputError):
    """Request exceeds a hard implementation limit (e.g. joint-law enumeration size)."""


class OptimizerError(RuntimeError):
    """Likelihood maximization failed; carries diagnostics.

    Attributes:
        neuron: postsynaptic index of the failing fit.
        excluded: presynaptic index constrained to zero, if this was a
            leave-one-out refit (None otherwise).
        detail: free-form diagnostic payload.
    """

    def __init__(self, message, neuron=None, excluded=None, detail=None):
        super().__init__(message)
        self.neuron = neuron
        self.excluded = excluded
        self.detail = detail


class IntegrationError(RuntimeError):
    """Non-finite state encountered during circuit integration.

    Attributes:
        step: index of the integration step at which state became non-finite.
    """

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step
