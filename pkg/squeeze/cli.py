import argparse
import json
import sys
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from squeeze import logger, monit, __version__
from squeeze.internal import util
from squeeze.internal.eval import sweeps
from squeeze.internal.eval.metrics import HistogramSpec, DEFAULT_BINS
from squeeze.internal.eval.synthetic import synthetic_stack
from squeeze.internal.eval.writers import write_result
from squeeze.internal.pipeline.configs import QuantConfig, load_config
from squeeze.internal.eval.study import DEFAULT_STUDY_BITS, supervision_study
from squeeze.internal.pipeline.model import ModelQuantizer
from squeeze.internal.pipeline.report import save_report
from squeeze.internal.quant import packed_model
from squeeze.internal.quant.packed_model import PackedModel, load_packed, save_packed
from squeeze.internal.quant.packing import unpack_mixed, mean_bits
from squeeze.internal.store import container as tensor_container
from squeeze.internal.store.container import Tensor, TensorContainer, load_container, save_container
from squeeze.internal.store.model_spec import Model, load_model_spec, save_model_spec
from squeeze.logger import Text
from squeeze.utils.errors import SqueezeError, ContainerError, UnknownFormat

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2

DEFAULT_BITS = [2, 3, 4, 5, 6, 7, 8]
DEFAULT_RATIOS = [0.1, 0.2, 0.3, 0.5]
SEED_UNUSED = ('random seed (default: 0); this command draws no random numbers, '
               'only synth and supervision-study use it')

# flag destination -> QuantConfig key
_CONFIG_FLAGS = {
    'high_bits': 'k_high',
    'ratio': 'salient_ratio',
    'lam': 'lambda',
    'supervision': 'supervision',
    'binarize': 'binarize_mode',
    'compensate': 'compensation',
    'damping': 'damping_fraction',
    'range_mode': 'range_mode',
    'per_layer_params': 'per_layer_params',
    'staged': 'staged',
}


def _add_model_args(parser: argparse.ArgumentParser):
    parser.add_argument('--model', required=True, help='S10T container with the layer weights')
    parser.add_argument('--spec', required=True, help='model spec JSON')
    parser.add_argument('--calib', required=True, help='S10T container with N × d_in calibration inputs')
    parser.add_argument('--calib-tensor', default=None,
                        help='tensor name inside the calibration container (default: the first tensor)')


def _add_seed_arg(parser: argparse.ArgumentParser, help_text: str = SEED_UNUSED):
    parser.add_argument('--seed', type=int, default=0, help=help_text)


def _add_quant_args(parser: argparse.ArgumentParser, *, seed_help: str = SEED_UNUSED):
    parser.add_argument('--config', default=None, help='YAML file with quantization settings')
    parser.add_argument('--high-bits', type=int, default=None, help='bits of salient weights (default: 4)')
    parser.add_argument('--ratio', type=float, default=None, help='fraction of salient weights (default: 0.2)')
    parser.add_argument('--lambda', dest='lam', type=float, default=None,
                        help='weight of the activation-range salience (default: 3e-4)')
    parser.add_argument('--supervision', choices=['fias', 'general'], default=None,
                        help='calibration supervision (default: fias)')
    parser.add_argument('--binarize', choices=['bare', 'scaled'], default=None,
                        help='binarization of non-salient weights (default: scaled)')
    parser.add_argument('--compensate', action='store_true', default=None,
                        help='column-wise error compensation (default: off)')
    parser.add_argument('--damping', type=float, default=None,
                        help='Hessian damping as a fraction of its mean diagonal (default: 0.01)')
    parser.add_argument('--range-mode', choices=['raw', 'absolute'], default=None,
                        help='activation range measurement (default: raw)')
    parser.add_argument('--per-layer-params', action='store_true', default=None,
                        help='one scale and zero point per layer instead of per row')
    parser.add_argument('--no-staged', dest='staged', action='store_false', default=None,
                        help='measure salience and binarize on the original weights')
    parser.add_argument('--threads', type=int, default=1, help='worker threads, 0 for all cores (default: 1)')
    _add_seed_arg(parser, seed_help)


def _add_sweep_args(parser: argparse.ArgumentParser):
    _add_model_args(parser)
    _add_quant_args(parser)
    parser.add_argument('--out', required=True, help='JSON result; a .csv with the same stem is written too')
    parser.add_argument('--kl-layer', default=None,
                        help='layer name or index whose output distribution is compared (default: last)')
    parser.add_argument('--bins', type=int, default=DEFAULT_BINS, help='histogram bins for KL divergence')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog='squeeze',
                                     description='Staged mixed-precision weight quantization')
    parser.add_argument('--version', action='version', version=f'%(prog)s {__version__}')
    commands = parser.add_subparsers(dest='command', metavar='command')
    commands.required = True

    p = commands.add_parser('quantize', help='quantize a model to a packed S10P file')
    _add_model_args(p)
    _add_quant_args(p)
    p.add_argument('--out', required=True, help='output S10P file')
    p.add_argument('--report', default=None, help='report JSON (default: report.json next to --out)')
    p.add_argument('--timing', action='store_true', help='include wall time in the report')
    p.add_argument('--salience-out', default=None,
                   help='S10T file with the V, B and M salience maps of every layer')

    p = commands.add_parser('dequantize', help='expand a packed model to dense S10T weights')
    p.add_argument('--in', dest='input', required=True, help='S10P file')
    p.add_argument('--out', required=True, help='output S10T file')
    _add_seed_arg(p)

    p = commands.add_parser('inspect', help='summarize an S10T or S10P file')
    p.add_argument('path')
    p.add_argument('--format', choices=['text', 'json'], default='text')

    for name, help_text in (('sweep-bits', 'sweep the intermediate bit width'),
                            ('sweep-ratio', 'sweep the salient ratio'),
                            ('sweep-lambda', 'sweep the activation-range weight'),
                            ('ablation', 'remove components one at a time')):
        p = commands.add_parser(name, help=help_text)
        _add_sweep_args(p)
        if name == 'sweep-bits':
            p.add_argument('--bits', type=int, nargs='+', default=DEFAULT_BITS)
        elif name == 'sweep-ratio':
            p.add_argument('--ratios', type=float, nargs='+', default=DEFAULT_RATIOS)
        elif name == 'sweep-lambda':
            p.add_argument('--lambdas', type=float, nargs='+', default=sweeps.DEFAULT_LAMBDAS)

    p = commands.add_parser('compare-supervision', help='compare fias and general supervision')
    _add_model_args(p)
    _add_quant_args(p)
    p.add_argument('--out', required=True, help='JSON result; a .csv with the same stem is written too')

    p = commands.add_parser('kl-report', help='per-layer KL divergence of a packed model')
    _add_model_args(p)
    p.add_argument('--packed', required=True, help='S10P file of the quantized model')
    p.add_argument('--out', required=True, help='JSON result; a .csv with the same stem is written too')
    p.add_argument('--bins', type=int, default=DEFAULT_BINS, help='histogram bins')
    _add_seed_arg(p)

    p = commands.add_parser('synth', help='write a seeded synthetic model and calibration inputs')
    p.add_argument('--out-dir', required=True)
    p.add_argument('--layers', type=int, default=12)
    p.add_argument('--width', type=int, default=16)
    p.add_argument('--tokens', type=int, default=64)
    _add_seed_arg(p, 'seed of the synthetic weights and inputs (default: 0)')

    p = commands.add_parser('supervision-study',
                            help='compare supervision and bit widths over seeded synthetic stacks')
    _add_quant_args(p, seed_help='seed of the first stack; stack i uses seed + i (default: 0)')
    p.add_argument('--out', required=True, help='JSON result; a .csv with the same stem is written too')
    p.add_argument('--stacks', type=int, default=20)
    p.add_argument('--layers', type=int, default=12)
    p.add_argument('--width', type=int, default=16)
    p.add_argument('--tokens', type=int, default=64)
    p.add_argument('--bits', type=int, nargs='+', default=DEFAULT_STUDY_BITS)
    p.add_argument('--bins', type=int, default=DEFAULT_BINS, help='histogram bins for KL divergence')

    return parser


def _config(args) -> QuantConfig:
    overrides = {key: getattr(args, flag) for flag, key in _CONFIG_FLAGS.items()
                 if getattr(args, flag) is not None}
    if args.config is not None:
        return load_config(args.config, overrides)
    return QuantConfig.from_dict(overrides)


def _load_model(args) -> Model:
    return Model(load_model_spec(args.spec), load_container(args.model))


def _load_inputs(args) -> np.ndarray:
    calib = load_container(args.calib)
    if len(calib) == 0:
        raise ContainerError(f"{args.calib}: calibration container has no tensors")
    if args.calib_tensor is None:
        return next(iter(calib)).data
    if args.calib_tensor not in calib:
        raise ContainerError(f"{args.calib}: tensor {args.calib_tensor} not found")
    return calib[args.calib_tensor].data


def _kl_layer(value: Optional[str]):
    if value is None:
        return None
    try:
        return int(value)
    except ValueError:
        return value


def _quantize(args):
    config = _config(args)
    model = _load_model(args)
    inputs = _load_inputs(args)
    logger.inspect(config.to_dict())
    quantizer = ModelQuantizer(config, threads=args.threads)
    packed, report = quantizer.quantize(model, inputs)

    out = Path(args.out)
    report_path = Path(args.report) if args.report is not None else out.parent / 'report.json'
    with monit.section('Save'):
        save_packed(packed, out)
        save_report(report, report_path, timing=args.timing)
        if args.salience_out is not None:
            maps = TensorContainer()
            for name, layer_maps in zip(model.names, quantizer.salience):
                layer_maps.to_container(name, maps)
            save_container(maps, args.salience_out)
    logger.log(['Wrote ', (str(out), Text.highlight), ' and ', (str(report_path), Text.highlight)])
    if args.salience_out is not None:
        logger.log(['Wrote salience maps to ', (args.salience_out, Text.highlight)])


def _dequantize(args):
    packed = load_packed(args.input)
    dense = TensorContainer([Tensor(name=layer.name, data=unpack_mixed(layer)) for layer in packed])
    save_container(dense, args.out)
    logger.log(['Wrote ', (str(len(dense)), Text.value), ' tensors to ', (args.out, Text.highlight)])


def _container_summary(container: TensorContainer) -> Dict[str, any]:
    return {'format': 'S10T',
            'version': container.version,
            'tensors': [{'name': t.name, 'shape': t.shape} for t in container]}


def _packed_summary(packed: PackedModel) -> Dict[str, any]:
    layers = []
    for layer in packed:
        bits = mean_bits(layer)
        layers.append({'name': layer.name,
                       'shape': [layer.d_out, layer.d_in],
                       'k': layer.k,
                       'mean_bits': bits.payload_bits,
                       'total_bits': bits.total_bits,
                       'mask_ratio': layer.n_salient / layer.n_total,
                       'binarize': layer.binarize_mode.value,
                       'per_layer_params': layer.per_layer_params,
                       'config': layer.config_echo.to_dict()})
    return {'format': 'S10P', 'version': packed.version, 'layers': layers}


def inspect_file(path: str) -> Dict[str, any]:
    raw = util.read_bytes(path)
    if raw[:4] == tensor_container.MAGIC:
        return _container_summary(tensor_container.decode_container(raw, source=path))
    if raw[:4] == packed_model.MAGIC:
        return _packed_summary(packed_model.decode_packed(raw, source=path))
    raise UnknownFormat(f"{path}: unknown file format (magic {raw[:4]!r})")


def _format_summary(summary: Dict[str, any]) -> List[str]:
    if summary['format'] == 'S10T':
        lines = [f"S10T v{summary['version']}: {len(summary['tensors'])} tensors"]
        lines += [f"  {t['name']}: {t['shape'][0]}x{t['shape'][1]}" for t in summary['tensors']]
        return lines

    lines = [f"S10P v{summary['version']}: {len(summary['layers'])} layers"]
    for l in summary['layers']:
        c = l['config']
        lines.append(f"  {l['name']}: {l['shape'][0]}x{l['shape'][1]} k={l['k']} "
                     f"mean_bits={l['mean_bits']:.2f} total_bits={l['total_bits']:.2f} "
                     f"mask_ratio={l['mask_ratio']:.3f} binarize={l['binarize']} "
                     f"ratio={c['ratio']:g} lambda={c['lambda']:g}")
    return lines


def _inspect(args):
    summary = inspect_file(args.path)
    if args.format == 'json':
        sys.stdout.write(json.dumps(summary, indent=2) + '\n')
    else:
        sys.stdout.write('\n'.join(_format_summary(summary)) + '\n')


def _sweep(args):
    config = _config(args)
    model = _load_model(args)
    inputs = _load_inputs(args)
    histogram = HistogramSpec(bin_count=args.bins)
    kwargs = dict(threads=args.threads, kl_layer=_kl_layer(args.kl_layer), histogram=histogram)
    if args.command == 'sweep-bits':
        result = sweeps.sweep_bits(model, inputs, config, args.bits, **kwargs)
    elif args.command == 'sweep-ratio':
        result = sweeps.sweep_ratio(model, inputs, config, args.ratios, **kwargs)
    elif args.command == 'sweep-lambda':
        result = sweeps.sweep_lambda(model, inputs, config, args.lambdas, **kwargs)
    else:
        result = sweeps.ablation(model, inputs, config, **kwargs)
    write_result(result, args.out)


def _compare_supervision(args):
    result = sweeps.compare_supervision(_load_model(args), _load_inputs(args), _config(args),
                                        threads=args.threads)
    write_result(result, args.out)


def _kl_report(args):
    result = sweeps.kl_report(_load_model(args), _load_inputs(args), load_packed(args.packed),
                              HistogramSpec(bin_count=args.bins))
    write_result(result, args.out)


def _supervision_study(args):
    result = supervision_study(_config(args), n_stacks=args.stacks, n_layers=args.layers, width=args.width,
                               n_tokens=args.tokens, k_list=args.bits, seed=args.seed,
                               threads=args.threads, histogram=HistogramSpec(bin_count=args.bins))
    write_result(result, args.out)


def _synth(args):
    spec, weights, inputs = synthetic_stack(args.layers, args.width, args.tokens, seed=args.seed)
    out = Path(args.out_dir)
    save_container(weights, out / 'model.s10t')
    save_model_spec(spec, out / 'model.json')
    save_container(TensorContainer([Tensor(name='inputs', data=inputs)]), out / 'calib.s10t')
    logger.log(['Wrote synthetic model to ', (str(out), Text.highlight)])


_COMMANDS = {
    'quantize': _quantize,
    'dequantize': _dequantize,
    'inspect': _inspect,
    'sweep-bits': _sweep,
    'sweep-ratio': _sweep,
    'sweep-lambda': _sweep,
    'ablation': _sweep,
    'compare-supervision': _compare_supervision,
    'kl-report': _kl_report,
    'synth': _synth,
    'supervision-study': _supervision_study,
}


def run(argv: Optional[List[str]] = None) -> int:
    r"""
    Run one command and return its exit code:
    ``0`` on success, ``1`` on a runtime error and ``2`` on a usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (0, None) else EXIT_USAGE

    try:
        _COMMANDS[args.command](args)
    except (SqueezeError, ValueError) as e:
        sys.stderr.write(f"ERROR {type(e).__name__}: {str(e).splitlines()[0] if str(e) else ''}\n")
        return EXIT_ERROR
    return EXIT_OK


def main():
    sys.exit(run())
