from gazedep.nn.autograd import Tensor, backward
from gazedep.nn.kernels import BACKEND
from gazedep.nn.model import Batch, Hyperparams, Tagger, Vocabs
from gazedep.nn.optim import SGD, learning_rate

__all__ = ["BACKEND", "Batch", "Hyperparams", "SGD", "Tagger", "Tensor", "Vocabs", "backward", "learning_rate"]
