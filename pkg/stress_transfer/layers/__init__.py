# Layer kernels of the network. Every layer derives from
# `base_layer.BaseLayer` and is identified in model containers by its `tag`.

from .activations import (FlattenLayer, ReLULayer, SoftmaxLayer, relu_backward, relu_forward,
                          softmax, softmax_backward)
from .base_layer import BaseLayer
from .conv1d import Conv1DLayer, conv1d_backward, conv1d_forward
from .dense import DenseLayer, dense_backward, dense_forward
from .dropout import DropoutLayer, dropout_forward
from .pooling import MaxPool1DLayer, maxpool1d_backward, maxpool1d_forward


LAYER_TYPES = {
    layer.tag: layer
    for layer in (Conv1DLayer, MaxPool1DLayer, ReLULayer, FlattenLayer, DropoutLayer, DenseLayer, SoftmaxLayer)
}
