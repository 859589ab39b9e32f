"""
# Supervision and bit-width study over seeded stacks

Repeats :func:`compare_supervision` and :func:`sweep_bits` on a series of
synthetic stacks and counts how often

* ``fias`` supervision ends with a final-output error no larger than ``general``,
* each intermediate bit width gives the lowest KL divergence.

Both counts are recorded as observations; a run never fails on them.
"""
from collections import Counter
from typing import Dict, List, Sequence

import pandas as pd

from squeeze import logger, monit
from squeeze.internal.pipeline.configs import QuantConfig
from squeeze.internal.pipeline.report import PROXY_NOTE
from squeeze.internal.quant.uniform import check_bits
from squeeze.internal.store.model_spec import Model
from squeeze.logger import Text
from squeeze.utils.notice import squeeze_notice
from .metrics import HistogramSpec
from .sweeps import MODEL, compare_supervision, sweep_bits
from .synthetic import synthetic_stack

DEFAULT_STUDY_BITS = [2, 3, 4, 5, 6, 8]


class StudyResult:
    r"""
    One entry per stack with both final-output errors, the KL divergence of
    every bit width and the bit width with the lowest divergence
    """

    def __init__(self, *, stacks: List[Dict[str, any]], config: QuantConfig, observations: List[str]):
        self.stacks = stacks
        self.config = config
        self.observations = observations

    @property
    def fias_not_worse(self) -> int:
        return sum(1 for s in self.stacks if s['final_mse_fias'] <= s['final_mse_general'])

    @property
    def fias_majority(self) -> bool:
        return 2 * self.fias_not_worse > len(self.stacks)

    @property
    def best_bits(self) -> Dict[int, int]:
        return dict(Counter(s['best_k'] for s in self.stacks))

    def to_dict(self):
        return {'note': PROXY_NOTE,
                'config': self.config.to_dict(),
                'stacks': self.stacks,
                'fias_not_worse': self.fias_not_worse,
                'fias_majority': self.fias_majority,
                'best_bits': {str(k): n for k, n in sorted(self.best_bits.items())},
                'observations': self.observations}

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for s in self.stacks:
            setting = f"seed={s['seed']}"
            rows.append({'setting': setting, 'layer': MODEL, 'metric': 'final_mse_fias',
                         'value': s['final_mse_fias']})
            rows.append({'setting': setting, 'layer': MODEL, 'metric': 'final_mse_general',
                         'value': s['final_mse_general']})
            rows.append({'setting': setting, 'layer': MODEL, 'metric': 'best_k', 'value': s['best_k']})
            for k, kl in s['kl'].items():
                rows.append({'setting': setting, 'layer': MODEL, 'metric': f'kl_k{k}', 'value': kl})
        return pd.DataFrame(rows, columns=['setting', 'layer', 'metric', 'value'])


def supervision_study(config: QuantConfig, *,
                      n_stacks: int = 20,
                      n_layers: int = 12,
                      width: int = 16,
                      n_tokens: int = 64,
                      k_list: Sequence[int] = None,
                      seed: int = 0,
                      threads: int = 1,
                      histogram: HistogramSpec = None) -> StudyResult:
    r"""
    Run the comparison on stacks seeded ``seed``, ``seed + 1``, ...

    Arguments:
        config: settings shared by every run; ``supervision`` and ``k_high`` are overridden
        n_stacks: number of synthetic stacks
        k_list: intermediate bit widths compared on each stack
    """
    if n_stacks < 1:
        raise ValueError(f"Need at least one stack, got {n_stacks}")
    k_list = list(DEFAULT_STUDY_BITS if k_list is None else k_list)
    for k in k_list:
        check_bits(k)
    histogram = histogram or HistogramSpec()

    stacks = []
    with monit.section('Study', total_steps=n_stacks):
        for i in range(n_stacks):
            spec, weights, inputs = synthetic_stack(n_layers, width, n_tokens, seed=seed + i)
            model = Model(spec, weights)
            supervision = compare_supervision(model, inputs, config, threads=threads)
            bits = sweep_bits(model, inputs, config, k_list, threads=threads, histogram=histogram)
            best = min(bits.points, key=lambda p: p.kl)
            stacks.append({'seed': seed + i,
                           'final_mse_fias': supervision.final_mse_fias,
                           'final_mse_general': supervision.final_mse_general,
                           'kl': {p.setting: p.kl for p in bits.points},
                           'best_k': best.setting})
            monit.progress(i + 1)

    result = StudyResult(stacks=stacks, config=config, observations=[])
    result.observations.append(f'fias final-output error is not above general supervision on '
                               f'{result.fias_not_worse} of {n_stacks} stacks')
    if not result.fias_majority:
        squeeze_notice(result.observations[-1])

    counts = result.best_bits
    most_common = max(counts, key=lambda k: (counts[k], -k))
    result.observations.append(f'k={most_common} has the lowest KL divergence on '
                               f'{counts[most_common]} of {n_stacks} stacks')
    if 4 in k_list and most_common != 4:
        squeeze_notice(f'{result.observations[-1]}; k=4 is the closest on {counts.get(4, 0)}')

    logger.log([('fias not worse', Text.key), ': ', (f'{result.fias_not_worse}/{n_stacks}', Text.value),
                ', ', ('lowest KL', Text.key), ': ',
                (', '.join(f'k={k}×{n}' for k, n in sorted(counts.items())), Text.value)])
    return result
