from __future__ import annotations


class HarqError(Exception):
    """Base for every failure the command line turns into a non-zero exit code."""

    exit_code: int = 1


class ConfigError(HarqError, ValueError):
    """A run configuration or model parameter violates one of its invariants.
    The message always names the violated invariant."""

    exit_code = 2


class TermCapExceeded(HarqError, RuntimeError):
    """The series would enumerate more mixture terms than the configured cap allows."""

    exit_code = 3

    def __init__(self, terms: int, cap: int, order: int, rounds: int):
        self.terms = terms
        self.cap = cap
        self.order = order
        self.rounds = rounds
        super().__init__(
            f"series truncation N={order} with K={rounds} needs {terms} terms, "
            f"above the cap of {cap} (raise HARQ_TERM_CAP or loosen eps)"
        )
