class MechQubitError(Exception):
    """Base class for numerical failures raised by this package."""


class CutoffError(MechQubitError):
    """Fock truncation too small: population leaks above the cutoff."""


class DegeneratePostSelection(MechQubitError):
    """Post-selection probability vanishes (target orthogonal to the state)."""


class IntegrationError(MechQubitError):
    """The master-equation integrator lost trace or failed to converge."""


class NoSolutionError(MechQubitError):
    """No post-selection angle satisfies the equal-superposition condition."""


class ConfigError(MechQubitError, ValueError):
    """A run configuration is malformed or names an unsupported key."""
