"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Invalid experiment configuration."""


class DspDiagnosticError(RuntimeError):
    """The blind DSP chain failed to lock (equalizer singularity, carrier
    lock failure, or un-alignable output at the counter)."""
