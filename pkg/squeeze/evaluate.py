"""
Measurement harness: output errors, activation KL divergence, range statistics,
parameter sweeps, the component ablation and the multi-stack supervision study.
"""
from squeeze.internal.eval.metrics import HistogramSpec, layer_output_error, activation_kl, range_stats, \
    forward_outputs, dequantized_weights, final_output_mse
from squeeze.internal.eval.sweeps import SweepAxis, SweepPoint, SweepResult, SupervisionReport, KLReport, \
    sweep_bits, sweep_ratio, sweep_lambda, compare_supervision, ablation, kl_report, model_mean_bits, \
    ABLATION_VARIANTS, DEFAULT_LAMBDAS
from squeeze.internal.eval.study import StudyResult, supervision_study, DEFAULT_STUDY_BITS
from squeeze.internal.eval.synthetic import synthetic_stack
from squeeze.internal.eval.writers import write_json, write_csv, write_result

__all__ = ['HistogramSpec', 'layer_output_error', 'activation_kl', 'range_stats',
           'forward_outputs', 'dequantized_weights', 'final_output_mse',
           'SweepAxis', 'SweepPoint', 'SweepResult', 'SupervisionReport', 'KLReport',
           'sweep_bits', 'sweep_ratio', 'sweep_lambda', 'compare_supervision', 'ablation', 'kl_report',
           'model_mean_bits', 'ABLATION_VARIANTS', 'DEFAULT_LAMBDAS',
           'StudyResult', 'supervision_study', 'DEFAULT_STUDY_BITS',
           'synthetic_stack', 'write_json', 'write_csv', 'write_result']
