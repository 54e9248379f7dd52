"""Per-trial records and their CSV layouts."""

from __future__ import annotations

from dataclasses import asdict, dataclass

GROUPTEST_COLUMNS = (
    "trial", "n", "L", "alpha", "m", "Z", "M", "d", "false_alarms", "misses", "exact_recovery",
)

PIPELINE_COLUMNS = (
    "trial", "seed", "n", "L", "alpha", "m", "Z", "M", "d", "k", "p", "r", "c", "T",
    "false_alarms", "misses", "exact_recovery", "systematic_standard", "criterion_failures",
    "criterion_ok_systematic", "decode_failures", "decode_correct_slots", "decode_eligible",
    "parity_collisions", "parity_false_fails", "gamma_mult_adds", "reconstruct_mult_adds",
)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    seed: int
    n: int
    L: int
    alpha: float
    m: int
    Z: int
    M: int
    d: float
    false_alarms: int
    misses: int
    # pipeline-only fields
    k: int | None = None
    p: int | None = None
    r: int | None = None
    c: int | None = None
    T: int | None = None
    systematic_standard: bool | None = None
    criterion_failures: int = 0
    criterion_ok_systematic: bool | None = None
    decode_failures: int = 0
    decode_correct_slots: int | None = None
    parity_collisions: int = 0
    parity_false_fails: int = 0
    gamma_mult_adds: int = 0
    reconstruct_mult_adds: int = 0

    @property
    def exact_recovery(self) -> bool:
        return self.false_alarms == 0 and self.misses == 0

    @property
    def decode_eligible(self) -> bool:
        """Identification was exact and every systematic unreliable worker had a criterion row."""
        return self.exact_recovery and bool(self.criterion_ok_systematic)

    @property
    def all_decoded(self) -> bool:
        return self.decode_correct_slots == self.T

    def row(self, columns) -> dict:
        data = asdict(self)
        data["exact_recovery"] = self.exact_recovery
        data["decode_eligible"] = self.decode_eligible
        return {col: data[col] for col in columns}
