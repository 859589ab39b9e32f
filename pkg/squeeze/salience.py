"""
Hessian and activation-range salience, and selection of the weights kept at k bits.
"""
from squeeze.internal.salience.hessian import HessianState, HessianInverse, accumulate_hessian, invert_hessian
from squeeze.internal.salience.pbar import RangeMode, SalienceMask, SalienceMaps, compute_v, compute_b, \
    combine_pbar, select_salient, salient_count

__all__ = ['HessianState', 'HessianInverse', 'accumulate_hessian', 'invert_hessian',
           'RangeMode', 'SalienceMask', 'SalienceMaps', 'compute_v', 'compute_b', 'combine_pbar',
           'select_salient', 'salient_count']
