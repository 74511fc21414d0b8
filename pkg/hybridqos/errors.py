"""
Exception hierarchy for hybridqos

Configuration problems exit the CLI with code 1, numerical failures with code 2.
"""

from typing import Optional


class HybridQosError(Exception):
    """Base class for every error raised by the library"""
    exit_code = 2


class ConfigError(HybridQosError):
    """Malformed scenario: unknown key, missing key, or violated invariant"""
    exit_code = 1

    def __init__(self, message: str, key_path: Optional[str] = None):
        self.key_path = key_path
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)


class NumericalError(HybridQosError):
    """A solver or estimator could not produce a trustworthy value"""
    exit_code = 2


class NoBracketError(NumericalError):
    def __init__(self, what: str, lo: float, hi: float):
        self.lo = lo
        self.hi = hi
        super().__init__(f"cannot bracket a root of {what} in [{lo:g}, {hi:g}]")


class OutOfRegimeError(NumericalError):
    def __init__(self, ratio: float):
        self.ratio = ratio
        super().__init__(
            f"average-to-peak ratio {ratio:g} is outside the low-ratio regime (0, 1/2)"
        )


class UnstableError(NumericalError):
    def __init__(self, theta: float, detail: str = ""):
        self.theta = theta
        message = f"no positive arrival rate is sustainable at theta={theta:g}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)


class QuadratureNotConvergedError(NumericalError):
    def __init__(self, theta: float, change: float):
        self.theta = theta
        self.change = change
        super().__init__(
            f"quadrature did not converge at theta={theta:g} (last relative change {change:.3g})"
        )


class NoPositiveRootError(NumericalError):
    def __init__(self, detail: str):
        super().__init__(f"no positive QoS exponent: {detail}")


class EmptyDomainError(NumericalError):
    def __init__(self, term: str, c: float):
        self.term = term
        self.c = c
        super().__init__(f"no admissible theta for the {term} term at c={c:g}")


class AllInfeasibleError(NumericalError):
    def __init__(self, strategy: str):
        self.strategy = strategy
        super().__init__(f"every capacity c on the grid is infeasible for {strategy}")


class InsufficientTailError(NumericalError):
    def __init__(self, exceedances: int, required: int = 50):
        self.exceedances = exceedances
        self.required = required
        super().__init__(
            f"only {exceedances} exceedances observed, at least {required} required"
        )


class ConvergenceError(NumericalError):
    def __init__(self, what: str, iterations: int):
        self.iterations = iterations
        super().__init__(f"{what} did not converge in {iterations} iterations")


class CensoredDelayError(NumericalError):
    def __init__(self, censored: int, total: int, epsilon: float):
        self.censored = censored
        self.total = total
        super().__init__(
            f"{censored} of {total} delays were still pending at the end of the run, "
            f"so the 1-{epsilon:g} delay quantile was never observed"
        )
