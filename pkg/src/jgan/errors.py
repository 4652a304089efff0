class ConfigurationError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


class ChecksumError(ValueError):
    pass


class DivergenceError(RuntimeError):
    def __init__(self, message, last_checkpoint=None):
        super().__init__(f"{message} (last good checkpoint: {last_checkpoint})")
        self.last_checkpoint = last_checkpoint
