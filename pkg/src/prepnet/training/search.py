"""Successive-halving hyperparameter search.

The budget is counted in epoch-units. With eta=2 and a budget of 32 the
schedule is 8 configs x 1 epoch, then 4 x 2, 2 x 4, and 1 x 8: each
rung trains the survivors from scratch for eta^rung epochs and keeps
the top 1/eta by validation balanced accuracy (ties resolved toward
the lower trial index).
"""

from dataclasses import dataclass, replace
from itertools import product

import numpy as np

from ..errors import ValidationError
from .engine import train_task_classifier


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    rung: int
    epochs: int
    score: float
    config: object


@dataclass(frozen=True)
class SearchResult:
    best_config: object
    best_score: float
    trials: tuple


def _initial_width(total_budget, eta):
    # largest n = eta^j whose full schedule (j+1)*n fits the budget
    j = 0
    while (j + 2) * eta ** (j + 1) <= total_budget:
        j += 1
    return eta ** j


def successive_halving_search(search_space, train_images, train_labels, val_images,
                              val_labels, model_config, base_config, total_budget,
                              eta=2, seed=0):
    """Search task-classifier hyperparameters over `search_space`.

    `search_space` maps TrainConfig field names to candidate lists;
    sampled configs are the base run config with those fields replaced.
    Returns the best full config plus a record of every trial.
    """
    if not isinstance(search_space, dict) or not search_space:
        raise ValidationError("search space must be a non-empty mapping")
    for key, values in search_space.items():
        if not hasattr(base_config.train, key):
            raise ValidationError(f"unknown train config field in search space: {key}")
        if not isinstance(values, (list, tuple)) or len(values) == 0:
            raise ValidationError(f"search space entry {key} must be a non-empty sequence")
    if not (isinstance(eta, int) and eta >= 2):
        raise ValidationError(f"eta must be an integer >= 2, got {eta!r}")
    if not (isinstance(total_budget, int) and total_budget >= 1):
        raise ValidationError(f"total_budget must be a positive integer, got {total_budget!r}")

    keys = sorted(search_space)
    combos = list(product(*(list(search_space[k]) for k in keys)))
    n0 = _initial_width(total_budget, eta)
    if total_budget < n0:
        raise ValidationError("budget smaller than the initial rung")

    rng = np.random.default_rng([int(seed), 21])
    if len(combos) >= n0:
        chosen = [combos[i] for i in rng.choice(len(combos), size=n0, replace=False)]
    else:
        fill = rng.choice(len(combos), size=n0 - len(combos), replace=True)
        chosen = combos + [combos[i] for i in fill]

    configs = []
    for combo in chosen:
        train = replace(base_config.train, **dict(zip(keys, combo)))
        configs.append(replace(base_config, train=train))

    records = []
    survivors = list(range(n0))
    rung = 0
    while True:
        epochs = eta ** rung
        scores = {}
        for t in survivors:
            _, best_ba, _ = train_task_classifier(
                train_images, train_labels, val_images, val_labels, model_config,
                configs[t], init_seed=int(seed) * 1000 + t,
                data_stream=[int(seed), 22, t, rung], epochs=epochs)
            scores[t] = best_ba
            records.append(TrialRecord(trial=t, rung=rung, epochs=epochs,
                                       score=best_ba, config=configs[t]))
        if len(survivors) == 1:
            winner = survivors[0]
            break
        keep = max(1, len(survivors) // eta)
        ranked = sorted(survivors, key=lambda t: (-scores[t], t))
        survivors = sorted(ranked[:keep])
        rung += 1
    return SearchResult(best_config=configs[winner], best_score=scores[winner],
                        trials=tuple(records))
