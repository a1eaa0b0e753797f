"""Pydantic result records shared by the CLI and the HTTP service."""
from pydantic import BaseModel

from seriation.core import FitResult


class AttemptRecord(BaseModel):
    epsilon: float
    outcome: str
    reason: str = ""


class FitRecord(BaseModel):
    n: int
    permutation: list[str]
    order: list[int]
    accepted_epsilon: float
    achieved_error: float
    search_mode: str
    modes_agree: bool | None = None
    trace: list[AttemptRecord] | None = None
    fitted: list[list[float]] | None = None

    @classmethod
    def from_result(cls, result: FitResult, labels, trace: bool = False,
                    fitted: bool = False) -> "FitRecord":
        return cls(
            n=len(result.order),
            permutation=[labels[x] for x in result.order],
            order=list(result.order.perm),
            accepted_epsilon=result.accepted_epsilon,
            achieved_error=result.achieved_error,
            search_mode=result.search_mode,
            modes_agree=result.modes_agree,
            trace=[AttemptRecord(epsilon=a.epsilon, outcome=a.outcome, reason=a.reason)
                   for a in result.attempts] if trace else None,
            fitted=result.fitted.square.tolist() if fitted else None,
        )

    def to_text(self) -> str:
        """Line-oriented key-value rendering."""
        lines = [
            f"n: {self.n}",
            "permutation: " + " ".join(self.permutation),
            f"accepted_epsilon: {self.accepted_epsilon!r}",
            f"achieved_error: {self.achieved_error!r}",
            f"search_mode: {self.search_mode}",
        ]
        if self.modes_agree is not None:
            lines.append(f"modes_agree: {str(self.modes_agree).lower()}")
        for a in self.trace or ():
            lines.append(f"attempt: {a.epsilon!r} {a.outcome}" + (f" {a.reason}" if a.reason else ""))
        if self.fitted is not None:
            # rows follow the input element order
            lines.extend("fitted: " + " ".join(repr(v) for v in row) for row in self.fitted)
        return "\n".join(lines) + "\n"


class VerifyRecord(BaseModel):
    n: int
    epsilon: float
    violation: float
    passed: bool

    def to_text(self) -> str:
        return (f"n: {self.n}\nepsilon: {self.epsilon!r}\nviolation: {self.violation!r}\n"
                f"result: {'pass' if self.passed else 'fail'}\n")


class OracleRecord(BaseModel):
    n: int
    epsilon_star: float
    witness: list[str]
    order: list[int]

    def to_text(self) -> str:
        return (f"n: {self.n}\nepsilon_star: {self.epsilon_star!r}\n"
                "witness: " + " ".join(self.witness) + "\n")
