import logging
from typing import Any, List, NamedTuple, Optional, Sequence, Tuple

from metaprep.autodiff import Graph, ParamSet, Tensor, grad
from metaprep.errors import GradError, NonFiniteError
from metaprep.metatrain.config import GradMode
from metaprep.metatrain.objective import Objective

logger = logging.getLogger(__name__)


class InnerLoop(NamedTuple):
    theta_k: ParamSet
    trajectory: List[ParamSet]
    losses: List[float]


class MetaGradient(NamedTuple):
    gradient: ParamSet
    inner_losses: List[float]
    test_loss: float


def _graph_of(params: ParamSet) -> Optional[Graph]:
    for tensor in params.values():
        if tensor.graph is not None:
            return tensor.graph
    return None


def loss_and_grad(objective: Objective, params: ParamSet, batch: Any,
                  create_graph: bool = False) -> Tuple[Tensor, ParamSet]:
    """one loss-gradient evaluation, counted on the objective

    Args:
        objective (Objective): loss to evaluate
        params (ParamSet): parameters tracked on a graph
        batch (Any): batch for the objective
        create_graph (bool): keep the gradient differentiable

    Returns:
        Tuple[Tensor, ParamSet]: the loss and its gradient
    """
    objective.evaluations += 1
    loss = objective.loss(params, batch)
    return loss, grad(loss, params, create_graph=create_graph)


def _check_finite(loss: Tensor, gradient: ParamSet, step: int):
    if not loss.is_finite():
        raise NonFiniteError("non-finite loss", step)
    if not gradient.is_finite():
        raise NonFiniteError("non-finite gradient", step)


def inner_loop(theta0: ParamSet, batches: Sequence[Any], alpha: float,
               objective: Objective,
               differentiable: bool = False) -> InnerLoop:
    """k plain SGD steps, theta_j = theta_{j-1} - alpha * grad L_j

    Args:
        theta0 (ParamSet): starting parameters; when differentiable they
            should already be leaves of the graph the caller will
            differentiate, otherwise a fresh graph is made
        batches (Sequence[Any]): one batch per step
        alpha (float): inner learning rate
        objective (Objective): loss being adapted to
        differentiable (bool): keep every step on the graph so theta_k can
            be differentiated against theta0

    Raises:
        NonFiniteError: a loss or gradient at step j is NaN or infinite

    Returns:
        InnerLoop: theta_k, the trajectory theta_0..theta_k and the losses
    """
    if differentiable:
        theta = theta0
        if _graph_of(theta) is None:
            theta = theta0.track(Graph())
    else:
        theta = theta0.detach()

    trajectory = [theta]
    losses = []
    for j, batch in enumerate(batches, 1):
        if differentiable:
            loss, gradient = loss_and_grad(objective, theta, batch,
                                           create_graph=True)
        else:
            loss, gradient = loss_and_grad(objective,
                                           theta.track(Graph()), batch)
        _check_finite(loss, gradient, j)
        theta = theta.axpy(-alpha, gradient)
        trajectory.append(theta)
        losses.append(loss.item())
    return InnerLoop(theta, trajectory, losses)


def _check_depth(train_batches: Sequence[Any], k: Optional[int]):
    if k is not None and k != len(train_batches):
        raise GradError(f"k={k} but {len(train_batches)} meta-train batches")


def full_meta_gradient(theta0: ParamSet, train_batches: Sequence[Any],
                       test_batch: Any, alpha: float,
                       objective: Objective) -> MetaGradient:
    graph = Graph()
    theta = theta0.detach().track(graph)
    adapted = inner_loop(theta, train_batches, alpha, objective,
                         differentiable=True)

    objective.evaluations += 1
    test_loss = objective.loss(adapted.theta_k, test_batch)
    # back through every inner step to the theta0 leaves
    gradient = grad(test_loss, theta)
    _check_finite(test_loss, gradient, len(train_batches) + 1)
    return MetaGradient(gradient, adapted.losses, test_loss.item())


def first_order_meta_gradient(theta0: ParamSet,
                              train_batches: Sequence[Any], test_batch: Any,
                              alpha: float,
                              objective: Objective) -> MetaGradient:
    adapted = inner_loop(theta0, train_batches, alpha, objective)
    test_loss, gradient = loss_and_grad(
        objective, adapted.theta_k.track(Graph()), test_batch)
    _check_finite(test_loss, gradient, len(train_batches) + 1)
    return MetaGradient(gradient, adapted.losses, test_loss.item())


def meta_gradient_full(theta0: ParamSet, train_batches: Sequence[Any],
                       test_batch: Any, alpha: float, objective: Objective,
                       k: Optional[int] = None) -> ParamSet:
    """exact gradient of L_test(theta_k(theta0)) with respect to theta0

    The inner loop is unrolled on one graph with differentiable gradients,
    so second-order terms through every step are included.

    Raises:
        GradError: k disagrees with the number of meta-train batches
        NonFiniteError: non-finite loss or gradient

    Returns:
        ParamSet: gradient shaped like theta0
    """
    _check_depth(train_batches, k)
    return full_meta_gradient(theta0, train_batches, test_batch, alpha,
                              objective).gradient


def meta_gradient_first_order(theta0: ParamSet,
                              train_batches: Sequence[Any], test_batch: Any,
                              alpha: float, objective: Objective,
                              k: Optional[int] = None) -> ParamSet:
    """gradient of L_test evaluated at theta_k, treating d theta_k / d theta0
    as the identity"""
    _check_depth(train_batches, k)
    return first_order_meta_gradient(theta0, train_batches, test_batch,
                                     alpha, objective).gradient


def compute_meta_gradient(mode: GradMode, theta0: ParamSet,
                          train_batches: Sequence[Any], test_batch: Any,
                          alpha: float,
                          objective: Objective) -> MetaGradient:
    if GradMode(mode) is GradMode.FULL:
        return full_meta_gradient(theta0, train_batches, test_batch, alpha,
                                  objective)
    return first_order_meta_gradient(theta0, train_batches, test_batch,
                                     alpha, objective)
