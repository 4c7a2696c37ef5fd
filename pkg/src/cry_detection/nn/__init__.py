# A small numpy neural-network engine and the modified AlexNet built on it

from .tensor import Tensor
from .layers import BatchNorm, Conv2d, Flatten, Linear, MaxPool2d, ReLU, softmax, softmax_cross_entropy
from .alexnet import (CLASSES, PRESETS, CnnModel, Prediction, deep_features, forward, load_model,
                      predict, predict_batch, save_model)
from .train import Adam, TrainConfig, batch_slices, train
