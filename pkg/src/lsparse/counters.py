from dataclasses import dataclass, fields

import numpy as np

# slots of the int64 scratch array handed to numba kernels
EXP = 0
CMP = 1


def new_scratch():
    return np.zeros(2, dtype=np.int64)


@dataclass
class OpCounts:
    """Instrumented operation counts accumulated along a training run."""

    exp_calls: int = 0
    comparisons: int = 0
    restart_proposals: int = 0
    restart_accepts: int = 0

    def __add__(self, other):
        return OpCounts(*(getattr(self, f.name) + getattr(other, f.name) for f in fields(self)))

    def absorb(self, scratch):
        self.exp_calls += int(scratch[EXP])
        self.comparisons += int(scratch[CMP])
        scratch[:] = 0
        return self
