# tensor must load first: ops and functional import from it
from metaprep.autodiff.tensor import Graph, Node, Tensor
from metaprep.autodiff.ops import OPS, Op, forward_op
from metaprep.autodiff import functional
from metaprep.autodiff.params import ParamSet
from metaprep.autodiff.grad import finite_difference_grad, grad, \
    relative_error
