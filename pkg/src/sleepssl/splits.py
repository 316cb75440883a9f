"""Subject-grouped k-fold splitting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass
class FoldSplit:
    fold: int
    train: tuple[str, ...]
    validation: tuple[str, ...]
    test: tuple[str, ...]

    def __post_init__(self):
        sets = [set(self.train), set(self.validation), set(self.test)]
        for i in range(3):
            for j in range(i + 1, 3):
                if sets[i] & sets[j]:
                    raise ConfigError("subject appears in two roles")


def split_subject_kfold(
    subjects: list[str], k: int, val_count: int, seed: int
) -> list[FoldSplit]:
    """Shuffle subjects by seed, partition into k near-equal test folds,
    and draw ``val_count`` validation subjects from each fold's remainder."""
    subjects = list(subjects)
    if len(set(subjects)) != len(subjects):
        raise ConfigError("duplicate subject ids")
    if k < 2 or val_count < 1:
        raise ConfigError("need k >= 2 and val_count >= 1")
    if len(subjects) < k + val_count:
        raise ConfigError(
            f"{len(subjects)} subjects cannot support k={k}, val_count={val_count}"
        )
    rng = np.random.default_rng(seed)
    order = [subjects[i] for i in rng.permutation(len(subjects))]
    test_folds = [list(part) for part in np.array_split(np.array(order), k)]
    splits = []
    for fold, test in enumerate(test_folds):
        rest = [s for s in order if s not in set(test)]
        if len(rest) < val_count:
            raise ConfigError("not enough subjects for the validation draw")
        validation = rest[:val_count]
        train = rest[val_count:]
        splits.append(
            FoldSplit(
                fold=fold,
                train=tuple(train),
                validation=tuple(validation),
                test=tuple(str(s) for s in test),
            )
        )
    return splits
