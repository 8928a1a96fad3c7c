"""Numerical verification suites behind `metaprep gradcheck`"""
import logging
import time
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from metaprep.autodiff import Graph, ParamSet, Tensor, \
    finite_difference_grad, functional as F, grad, relative_error
from metaprep.metatrain import GradMode, MetaConfig, MetaTrainer, \
    OuterOptimizer, QuadraticObjective, TransformerObjective, \
    MixtureSource, first_order_meta_gradient, full_meta_gradient, \
    inner_loop, meta_gradient_first_order, meta_gradient_full, \
    multitask_train
from metaprep.model import ModelConfig, init_params
from metaprep.runlog import Phase, RunLog, RunRecord
from metaprep.tasks import PretrainSampler, QuadraticTask, SamplerConfig, \
    SeedStream, quadratic_meta_gradient_oracle, random_quadratic_task, \
    sample_pretrain_batches

logger = logging.getLogger(__name__)

SCALES = ('quick', 'full')
FD_STEP = 1e-5

# about 310 parameters
GRADCHECK_MODEL = ModelConfig(vocab_size=8, max_len=8, d_model=4, n_heads=2,
                              n_layers=1, d_ff=8, dropout_rate=0.0)
GRADCHECK_DATA = SamplerConfig(batch_size=2, max_len=8, n_docs=8, n_topics=2,
                               min_sentence=2, max_sentence=2)
GRADCHECK_MIX = {'MLM': 0.25, 'NSP': 0.25, 'QA_MATCH': 0.25,
                 'QQ_MATCH': 0.25}


@dataclass
class CheckResult:
    name: str
    error: float
    tolerance: float
    passed: bool
    seconds: float
    note: str = ''


Outcome = Tuple[float, float, str]


def _weights(shape) -> np.ndarray:
    size = int(np.prod(shape, dtype=np.int64))
    return np.cos(0.7 * np.arange(size) + 0.3).reshape(shape)


def _weighted(t: Tensor) -> Tensor:
    """fixed non-uniform projection to a scalar"""
    return F.sum(F.mul(t, Tensor(_weights(t.shape))))


def _point(seed: int, positive: Tuple[str, ...] = (), **shapes) -> ParamSet:
    stream = SeedStream(seed, 'gradcheck').child('point')
    entries = OrderedDict()
    for name, shape in shapes.items():
        if name in positive:
            entries[name] = stream.generator.uniform(0.5, 1.5, shape)
        else:
            entries[name] = stream.normal(size=shape)
    return ParamSet(entries)


# name -> (scalar function, evaluation point, check second order)
def primitive_cases() -> Dict[str, Tuple[Callable, ParamSet, bool]]:
    ids = np.array([[0, 2], [2, 5]])
    rows = np.array([1, 1, 3, 0])
    targets = np.array([0, 3, 1, 4])
    return OrderedDict([
        ('add', (lambda p: _weighted(F.add(p['x'], p['y'])),
                 _point(0, x=(3, 4), y=(4,)), False)),
        ('mul', (lambda p: _weighted(F.mul(p['x'], p['y'])),
                 _point(1, x=(3, 4), y=(3, 1)), True)),
        ('power', (lambda p: _weighted(F.power(p['x'], 2.5)),
                   _point(2, ('x',), x=(5,)), True)),
        ('div', (lambda p: _weighted(F.div(p['x'], p['y'])),
                 _point(3, ('y',), x=(2, 3), y=(2, 3)), True)),
        ('matmul', (lambda p: _weighted(F.matmul(p['x'], p['y'])),
                    _point(4, x=(2, 3, 4), y=(4, 5)), True)),
        ('transpose_reshape', (lambda p: _weighted(F.reshape(
            F.transpose(p['x'], (1, 2, 0)), (6, 4))),
            _point(5, x=(2, 3, 4)), False)),
        ('slice_unslice', (lambda p: _weighted(F.unslice(
            F.slice(p['x'], (slice(None), 1)), (slice(None), 2), (3, 4))),
            _point(6, x=(3, 4)), False)),
        ('concat', (lambda p: _weighted(F.concat([p['x'], p['y']], axis=1)),
                    _point(7, x=(2, 3), y=(2, 2)), False)),
        ('sum_mean', (lambda p: _weighted(F.mul(
            F.mean(p['x'], axis=1, keepdims=True), F.sum(p['x'], axis=0))),
            _point(8, x=(3, 4)), True)),
        ('broadcast_sum_to', (lambda p: _weighted(F.mul(
            F.broadcast_to(p['x'], (4, 3)), F.sum_to(p['y'], (1, 3)))),
            _point(9, x=(1, 3), y=(4, 3)), True)),
        ('softmax', (lambda p: _weighted(F.softmax(p['x'], axis=-1)),
                     _point(10, x=(3, 5)), True)),
        ('log_exp', (lambda p: _weighted(F.log(F.add(F.exp(p['x']),
                                                     Tensor(1.0)))),
                     _point(11, x=(4,)), True)),
        ('tanh', (lambda p: _weighted(F.tanh(p['x'])),
                  _point(12, x=(6,)), True)),
        ('normal_cdf', (lambda p: _weighted(F.normal_cdf(p['x'])),
                        _point(13, x=(6,)), True)),
        ('gelu', (lambda p: _weighted(F.gelu(p['x'])),
                  _point(14, x=(6,)), True)),
        ('layer_norm', (lambda p: _weighted(F.layer_norm(
            p['x'], p['gain'], p['bias'], 1e-5)),
            _point(15, x=(3, 5), gain=(5,), bias=(5,)), True)),
        ('gather', (lambda p: _weighted(F.gather(p['x'], ids)),
                    _point(16, x=(6, 3)), False)),
        ('scatter_rows', (lambda p: _weighted(F.scatter_rows(p['x'], rows,
                                                             5)),
                          _point(17, x=(4, 3)), False)),
        ('cross_entropy', (lambda p: F.cross_entropy(p['x'], targets),
                           _point(18, x=(4, 5)), True)),
    ])


def first_order_error(fn: Callable, at: ParamSet,
                      corrupt: float = 0.0) -> float:
    tracked = at.track(Graph())
    analytic = grad(fn(tracked), tracked)
    if corrupt:
        analytic = analytic.map(lambda n, t: Tensor(t.values + corrupt))
    return relative_error(analytic, finite_difference_grad(fn, at, FD_STEP))


def second_order_error(fn: Callable, at: ParamSet) -> float:
    """gradient of <grad f, v> against central differences of it"""
    direction = at.map(lambda n, t: Tensor(_weights(t.shape)))

    def directional(p: ParamSet) -> Tensor:
        tracked = p if any(t.graph is not None for t in p.values()) \
            else p.track(Graph())
        g = grad(fn(tracked), tracked, create_graph=True)
        total = Tensor(0.0)
        for name in g:
            total = F.add(total, F.sum(F.mul(g[name], direction[name])))
        return total

    tracked = at.track(Graph())
    analytic = grad(directional(tracked), tracked)
    numeric = finite_difference_grad(
        lambda p: directional(p).item(), at, FD_STEP)
    return relative_error(analytic, numeric)


def check_hessian_vector_product(dim: int = 6) -> Outcome:
    """double backward of theta' A theta / 2 against A v"""
    stream = SeedStream(0, 'gradcheck').child('hvp')
    root = stream.normal(size=(dim, dim))
    a = root @ root.T + dim * np.eye(dim)
    v = stream.normal(size=dim)
    theta = Graph().leaf(stream.normal(size=dim))
    quadratic = F.sum(F.mul(theta, F.reshape(
        F.matmul(Tensor(a), F.reshape(theta, (dim, 1))), (dim,))))
    (g,) = grad(F.mul(Tensor(0.5), quadratic), [theta], create_graph=True)
    (hv,) = grad(F.sum(F.mul(g, Tensor(v))), [theta])
    return relative_error(hv.values, a @ v), 1e-10, f"dim {dim}"


def check_linearity(a: float = 2.0, b: float = -3.0) -> Outcome:
    """grad(a f + b g) against a grad f + b grad g on two task losses"""
    params, objective, train, test = _tiny(1)

    def gradient(fn: Callable[[ParamSet], Tensor]) -> np.ndarray:
        tracked = params.track(Graph())
        return grad(fn(tracked), tracked).flatten()

    def first(p):
        return objective.loss(p, train[0])

    def second(p):
        return objective.loss(p, test)

    combined = gradient(lambda p: F.add(F.mul(Tensor(a), first(p)),
                                        F.mul(Tensor(b), second(p))))
    expected = a * gradient(first) + b * gradient(second)
    return relative_error(combined, expected), 1e-12, \
        f"{objective.tag(train[0])} and {objective.tag(test)}"


def check_determinism(k: int = 2) -> Outcome:
    """two unrolled meta-gradients from fresh graphs are bit-identical"""
    runs = []
    for _ in range(2):
        params, objective, train, test = _tiny(k)
        runs.append(meta_gradient_full(params, train, test, 0.1, objective))
    first, second = runs
    return (0.0 if first.equals(second) else
            relative_error(first, second)), 0.0, f"k={k}"


def _tiny(k: int, seed: int = 0):
    sampler = PretrainSampler.from_config(GRADCHECK_DATA,
                                          GRADCHECK_MODEL.vocab_size)
    batches = sample_pretrain_batches(
        GRADCHECK_MIX, k + 1, SeedStream(seed).child('gradcheck'), sampler)
    return (init_params(GRADCHECK_MODEL, seed),
            TransformerObjective(GRADCHECK_MODEL), batches[:-1], batches[-1])


def check_unrolled_fd(k: int, alpha: float = 0.5,
                      corrupt: float = 0.0) -> Outcome:
    """meta-gradient against finite differences of theta0 -> L(theta_k)"""
    params, objective, train, test = _tiny(k)

    def unrolled(p: ParamSet) -> float:
        theta_k = inner_loop(p, train, alpha, objective).theta_k
        return objective.loss(theta_k, test).item()

    analytic = meta_gradient_full(params, train, test, alpha, objective, k)
    if corrupt:
        analytic = analytic.map(lambda n, t: Tensor(t.values + corrupt))
    numeric = finite_difference_grad(unrolled, params, FD_STEP)
    return (relative_error(analytic, numeric), 1e-5,
            f"{params.num_parameters} parameters")


def check_quadratic_oracle(n_tasks: int = 10, dim: int = 5,
                           alpha: float = 0.1) -> Outcome:
    stream = SeedStream(0).child('quadratic')
    objective = QuadraticObjective()
    worst = 0.0
    for i in range(n_tasks):
        task = random_quadratic_task(stream.child(str(i)), dim)
        theta0 = stream.child(f"theta{i}").normal(size=dim)
        for k in (0, 1, 2, 5, 10):
            analytic = meta_gradient_full(ParamSet({'theta': theta0}),
                                          [task] * k, task, alpha, objective)
            oracle = quadratic_meta_gradient_oracle(task, theta0, alpha, k)
            worst = max(worst, relative_error(analytic['theta'].values,
                                              oracle))
    return worst, 1e-10, f"{n_tasks} tasks, k in 0,1,2,5,10"


def check_first_order_ratio(alpha: float = 0.1) -> Outcome:
    """full / first-order on scalar quadratics equals (1 - alpha lambda)^k"""
    objective = QuadraticObjective()
    worst = 0.0
    for curvature in (0.5, 1.0, 1.5):
        task = QuadraticTask(np.array([curvature]), np.array([0.0]))
        theta0 = ParamSet({'theta': np.array([1.0])})
        for k in (1, 2, 5):
            batches = [task] * k
            full = meta_gradient_full(theta0, batches, task, alpha,
                                      objective)['theta'].item()
            fo = meta_gradient_first_order(theta0, batches, task, alpha,
                                           objective)['theta'].item()
            expected = (1.0 - alpha * curvature) ** k
            worst = max(worst, abs(full / fo - expected) / expected)
    return worst, 1e-10, "lambda in 0.5,1,1.5; k in 1,2,5"


def first_order_discrepancy(alpha: float, k: int = 2) -> float:
    params, objective, train, test = _tiny(k)
    full = meta_gradient_full(params, train, test, alpha,
                              objective).flatten()
    fo = meta_gradient_first_order(params, train, test, alpha,
                                   objective).flatten()
    return float(np.linalg.norm(fo - full) / np.linalg.norm(full))


def check_first_order_limit() -> Outcome:
    gaps = [first_order_discrepancy(a) for a in (1e-1, 1e-2, 1e-3)]
    monotone = all(b < a for a, b in zip(gaps, gaps[1:]))
    note = ' > '.join(f"{g:.2e}" for g in gaps)
    return (gaps[-1] if monotone else float('inf')), float('inf'), note


def check_depth_zero() -> Outcome:
    params, objective, train, test = _tiny(0)
    full = meta_gradient_full(params, train, test, 0.1, objective)
    fo = meta_gradient_first_order(params, train, test, 0.1, objective)
    return (0.0 if full.equals(fo) else relative_error(full, fo)), 0.0, \
        "bit-identical FULL and FIRST_ORDER"


def _meta_trainer(k: int, steps: int, beta: float,
                  mode: GradMode = GradMode.FULL) -> MetaTrainer:
    config = MetaConfig(k=k, alpha=0.1, beta=beta, grad_mode=mode,
                        outer_optimizer=OuterOptimizer.SGD,
                        total_meta_test_steps=steps)
    sampler = PretrainSampler.from_config(GRADCHECK_DATA,
                                          GRADCHECK_MODEL.vocab_size)
    return MetaTrainer(config, TransformerObjective(GRADCHECK_MODEL),
                       MixtureSource(GRADCHECK_MIX, sampler),
                       init_params(GRADCHECK_MODEL, 0))


def check_multitask_equivalence(steps: int, beta: float = 0.1) -> Outcome:
    trainer = _meta_trainer(0, steps, beta)
    reference = multitask_train(trainer.params, trainer.objective,
                                trainer.source, beta, steps)
    worst = 0.0
    for expected in reference[1:]:
        trainer.step()
        worst = max(worst, float(np.max(np.abs(
            trainer.params.flatten() - expected.flatten()))))
    return worst, 1e-12, f"{steps} steps, max abs difference"


def check_budget(steps: int = 3) -> Outcome:
    notes, ok = [], True
    for k in (0, 1, 3):
        trainer = _meta_trainer(k, steps, 0.1, GradMode.FIRST_ORDER)
        trainer.run()
        ok = ok and trainer.objective.evaluations == (k + 1) * steps
        notes.append(f"k={k}: {trainer.objective.evaluations}")
    return (0.0 if ok else 1.0), 0.0, ', '.join(notes)


def measure_cost_ratio(k: int = 3, repeats: int = 3) -> Outcome:
    """wallclock of a first-order over a full meta-gradient; reported
    only"""
    params, objective, train, test = _tiny(k)
    timings = {}
    for name, fn in (('full', full_meta_gradient),
                     ('first_order', first_order_meta_gradient)):
        start = time.perf_counter()
        for _ in range(repeats):
            fn(params, train, test, 0.1, objective)
        timings[name] = time.perf_counter() - start
    ratio = timings['first_order'] / timings['full']
    return ratio, float('inf'), f"FO/FULL time at k={k}: {ratio:.2f}"


def build_checks(scale: str = 'full',
                 corrupt: float = 0.0) -> List[Tuple[str, Callable]]:
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}, expected one of {SCALES}")
    quick = scale == 'quick'
    checks = []
    for name, (fn, at, second) in primitive_cases().items():
        checks.append((f"grad/{name}",
                       lambda fn=fn, at=at: (first_order_error(fn, at),
                                             1e-6, '')))
        if second:
            checks.append((f"grad2/{name}",
                           lambda fn=fn, at=at: (second_order_error(fn, at),
                                                 1e-6, '')))
    checks += [
        ('autodiff/hvp_quadratic', check_hessian_vector_product),
        ('autodiff/linearity', check_linearity),
        ('autodiff/determinism', check_determinism),
    ]
    for k in ((1, 2) if quick else (1, 2, 3)):
        checks.append((f"meta/unrolled_fd_k{k}",
                       lambda k=k: check_unrolled_fd(k, corrupt=corrupt)))
    checks += [
        ('meta/quadratic_oracle', check_quadratic_oracle),
        ('meta/first_order_ratio', check_first_order_ratio),
        ('meta/first_order_limit', check_first_order_limit),
        ('meta/depth_zero', check_depth_zero),
        ('meta/multitask_equivalence',
         lambda: check_multitask_equivalence(10 if quick else 100)),
        ('meta/budget', check_budget),
        ('meta/cost_ratio', measure_cost_ratio),
    ]
    return checks


def run_checks(scale: str = 'full', corrupt: float = 0.0) -> pd.DataFrame:
    results = []
    for name, check in build_checks(scale, corrupt):
        start = time.perf_counter()
        error, tolerance, note = check()
        if np.isfinite(tolerance):
            passed = bool(error <= tolerance)
        else:
            passed = bool(np.isfinite(error))
        results.append(CheckResult(name, float(error), tolerance, passed,
                                   time.perf_counter() - start, note))
        logger.debug("%s: error %.3e (%s)", name, error,
                     'ok' if passed else 'FAIL')
    return pd.DataFrame([r.__dict__ for r in results])


def cmd_gradcheck(scale: str = 'full', out: Optional[Union[str, Path]] = None,
                  corrupt: float = 0.0) -> int:
    """run every suite, print the table and return 0 or 3"""
    table = run_checks(scale, corrupt)
    print(table[['name', 'error', 'tolerance', 'passed', 'note']]
          .to_string(index=False))
    if out is not None:
        log = RunLog(Path(out) / 'metrics.jsonl')
        for step, row in enumerate(table.itertuples(), 1):
            log.append(RunRecord(f"gradcheck/{row.name}", step, Phase.CHECK,
                                 {'error': row.error,
                                  'passed': float(row.passed)}))
    failed = table[~table['passed']]
    if len(failed):
        name = failed.iloc[0]['name']
        logger.error("gradcheck failed: %s", name)
        print(f"FAILED: {name}")
        return 3
    print(f"all {len(table)} checks passed")
    return 0
