"""
Risk Matrix Constructors

- mnist_risk_matrix: ordinal digit costs, overvaluing (i - j)^2, undervaluing (i - j)
- grouped_risk_matrix: costs by class groups (same group, and per ordered pair of groups)
- cifar10_risk_matrix: animals vs. vehicles preset
- resolve_risk_matrix: CLI source ('mnist', 'grouped', 'cifar10', 'zero' or a CSV path)
"""

from pathlib import Path
from typing import Mapping, Optional, Sequence, Tuple

import numpy as np

from evidential.risk import RiskMatrix
from utils.errors import RiskMatrixError

CIFAR10_VEHICLES = (0, 1, 8, 9)
CIFAR10_ANIMALS = (2, 3, 4, 5, 6, 7)


def mnist_risk_matrix(K: int = 10) -> RiskMatrix:
    """R[i][j] = (i - j)^2 if j > i else (i - j); i is the true digit, j the prediction."""
    i, j = np.meshgrid(np.arange(K), np.arange(K), indexing='ij')
    values = np.where(j > i, (i - j) ** 2, i - j).astype(np.float64)
    return RiskMatrix(values, name='mnist')


def grouped_risk_matrix(groups: Sequence[Sequence[int]], cross_costs: Mapping[Tuple[int, int], float],
                        same_group_cost: float = 1.0) -> RiskMatrix:
    """
    Costs determined by class groups.

    Args:
        groups: Partition of 0..K-1 into groups
        cross_costs: (true_group, predicted_group) -> cost for classes in different groups
        same_group_cost: Cost of confusing two classes of the same group

    Raises:
        RiskMatrixError: groups are not a partition, a group pair has no cost, or a cost is negative
    """
    members = [int(c) for group in groups for c in group]
    K = len(members)
    if sorted(members) != list(range(K)):
        raise RiskMatrixError(f"groups must partition 0..{K - 1}, got {groups}")
    if same_group_cost < 0 or any(cost < 0 for cost in cross_costs.values()):
        raise RiskMatrixError("group costs must be non-negative")
    group_of = {c: g for g, group in enumerate(groups) for c in group}
    values = np.zeros((K, K))
    for true_class in range(K):
        for predicted in range(K):
            if true_class == predicted:
                continue
            pair = (group_of[true_class], group_of[predicted])
            if pair[0] == pair[1]:
                values[true_class, predicted] = same_group_cost
            elif pair in cross_costs:
                values[true_class, predicted] = cross_costs[pair]
            else:
                raise RiskMatrixError(f"no cost given for group pair {pair}")
    return RiskMatrix(values, name='grouped')


def cifar10_risk_matrix() -> RiskMatrix:
    """Misclassifying an animal costs 10, a vehicle 50, same-group confusions 1."""
    vehicles, animals = 0, 1
    matrix = grouped_risk_matrix([CIFAR10_VEHICLES, CIFAR10_ANIMALS],
                                 {(animals, vehicles): 10.0, (vehicles, animals): 50.0})
    return RiskMatrix(matrix.values, name='cifar10')


def resolve_risk_matrix(source: Optional[str], K: int) -> Optional[RiskMatrix]:
    """Build the risk matrix named by a CLI source string; None passes through."""
    if source is None:
        return None
    if source == 'mnist':
        return mnist_risk_matrix(K)
    if source in ('grouped', 'cifar10'):
        if K != 10:
            raise RiskMatrixError(f"the grouped preset is defined for K=10, not K={K}")
        return cifar10_risk_matrix()
    if source == 'zero':
        return RiskMatrix.zeros(K)
    matrix = RiskMatrix.from_csv(Path(source))
    if matrix.K != K:
        raise RiskMatrixError(f"risk matrix {source} is {matrix.K}x{matrix.K}, expected K={K}")
    return matrix
