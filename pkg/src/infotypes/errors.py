class InfoTypesError(Exception):
    pass


class ConfigError(InfoTypesError):
    """Bad or missing configuration, detected before any work starts."""


class DataError(InfoTypesError):
    """Input data violates a documented format or precondition."""


class RetriableFailure(InfoTypesError):
    """Transport failed after exhausting retries."""


class ProtocolError(InfoTypesError):
    """Endpoint answered with something that is not the agreed wire format."""


class FixtureIncomplete(InfoTypesError):
    """Replay log has no entry for a requested (prompt, repetition)."""


class LowValidityError(InfoTypesError):
    def __init__(self, info_type: str, yes: int, valid: int, n: int):
        super().__init__(
            f"{info_type}: only {valid}/{n} valid responses (need {-(-n // 2)})"
        )
        self.info_type = info_type
        self.yes = yes
        self.valid = valid
        self.n = n
