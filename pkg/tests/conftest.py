import numpy as np

from macodec.weights import TENSOR_ORDER, ModelWeights, expected_shapes

# verdict lines queued by the acceptance tests; flushed after the run so
# they survive pytest's fd-level capture
_verdicts = []


def record_verdict(line):
    _verdicts.append(line)


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance verdicts")
        for line in _verdicts:
            terminalreporter.write_line(line)


def make_weights(n, seed):
    """Random but reproducible weights, scaled to keep logits moderate."""
    rng = np.random.RandomState(seed)
    shapes = expected_shapes(n)
    tensors = []
    for name in TENSOR_ORDER:
        shape = shapes[name]
        if name.startswith("B"):
            a = rng.standard_normal(shape) * 0.01
        else:
            fan_in = int(np.prod(shape[1:]))
            a = rng.standard_normal(shape) / np.sqrt(fan_in)
        tensors.append(a.astype(np.float32))
    return ModelWeights(n, *tensors)
